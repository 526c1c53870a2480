"""Fine-grained incident video retrieval.

An engine plus benchmark-construction toolkit for retrieving user-generated
incident videos at scene granularity.  The package covers the full loop:

* ingesting event listings and video metadata (:mod:`fivr.ingest`),
* frame-level visual descriptors (:mod:`fivr.features`),
* visual-word codebooks and bag-of-words encoding (:mod:`fivr.vocab`),
* title-based textual vectors (:mod:`fivr.textsim`),
* exact sparse retrieval and near-duplicate pairing (:mod:`fivr.index`),
* query selection from similarity graphs (:mod:`fivr.selectq`),
* a synthetic world generator with a scene-relation oracle (:mod:`fivr.synth`),
* the annotation protocol state machine (:mod:`fivr.annotate`),
* retrieval metrics (:mod:`fivr.evalkit`),
* an end-to-end pipeline, CLI, and HTTP annotation service
  (:mod:`fivr.pipeline`, :mod:`fivr.cli`, :mod:`fivr.service`).
"""

__version__ = "0.1.0"
