"""Retrieval structures over sparse and dense video vectors.

Three interchangeable similarity routes live here: exact sparse cosine
through an inverted index (magic ``FVIX`` on disk), dense global-vector
similarity (cosine or inverse-distance), and compact binary hash codes
compared by Hamming similarity.  The inverted index also drives defect
pairing: enumerating all video pairs whose combined visual-textual
similarity clears a threshold, touching only pairs that co-occur in some
posting list.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .binio import ByteReader, ByteWriter, FormatError
from .vocab import SparseVector

INDEX_MAGIC = b"FVIX"


def cosine(a: SparseVector, b: SparseVector) -> float:
    """Cosine similarity of two sparse vectors; zero vectors score 0."""
    na, nb = a.norm(), b.norm()
    if na == 0 or nb == 0:
        return 0.0
    return a.dot(b) / (na * nb)


def global_vector(frames: np.ndarray) -> np.ndarray:
    """Mean of per-frame vectors, L2-normalized.

    A video whose frames average to the zero vector has no direction to
    normalize and is rejected.
    """
    frames = np.asarray(frames, dtype=np.float64)
    if frames.ndim != 2 or frames.shape[0] == 0:
        raise ValueError("frames must be a non-empty 2-D array")
    mean = frames.mean(axis=0)
    norm = float(np.linalg.norm(mean))
    if norm == 0:
        raise ValueError("frame vectors average to zero, no global direction")
    return mean / norm


def dense_similarity(a: np.ndarray, b: np.ndarray, kind: str = "cosine") -> float:
    """Similarity of dense vectors: ``cosine`` or ``euclidean`` (1/(1+d))."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch {a.shape} vs {b.shape}")
    if kind == "cosine":
        na = float(np.linalg.norm(a))
        nb = float(np.linalg.norm(b))
        if na == 0 or nb == 0:
            return 0.0
        return float(a @ b) / (na * nb)
    if kind == "euclidean":
        return 1.0 / (1.0 + float(np.linalg.norm(a - b)))
    raise ValueError(f"unknown similarity kind {kind!r}")


@dataclass(frozen=True)
class HashFamily:
    """Random-hyperplane hash: center on ``mean``, project on unit rows."""

    mean: np.ndarray
    directions: np.ndarray

    @property
    def bits(self) -> int:
        return self.directions.shape[0]


@dataclass(frozen=True)
class VideoCode:
    """A video's binary hash code as a 0/1 string."""

    bits: str

    def __post_init__(self):
        if not self.bits or set(self.bits) - {"0", "1"}:
            raise ValueError(f"bits must be a non-empty 0/1 string: {self.bits!r}")


def train_hash_family(sample: np.ndarray, bits: int, seed: int) -> HashFamily:
    """Fit a hash family: sample mean plus seeded unit Gaussian directions."""
    sample = np.asarray(sample, dtype=np.float64)
    if sample.ndim != 2 or sample.shape[0] == 0:
        raise ValueError("sample must be a non-empty 2-D array")
    if bits < 1:
        raise ValueError(f"bits must be positive, got {bits}")
    rng = np.random.default_rng(seed)
    directions = rng.standard_normal((bits, sample.shape[1]))
    norms = np.linalg.norm(directions, axis=1, keepdims=True)
    if np.any(norms == 0):
        raise RuntimeError("degenerate zero-norm hash direction")
    return HashFamily(mean=sample.mean(axis=0), directions=directions / norms)


def encode_video(frames: np.ndarray, family: HashFamily) -> VideoCode:
    """Hash every frame, then majority-vote each bit; ties round to 1."""
    frames = np.asarray(frames, dtype=np.float64)
    if frames.ndim != 2 or frames.shape[0] == 0:
        raise ValueError("frames must be a non-empty 2-D array")
    projected = (frames - family.mean) @ family.directions.T
    frame_bits = projected >= 0
    ones = frame_bits.sum(axis=0)
    video_bits = ones * 2 >= frames.shape[0]
    return VideoCode(bits="".join("1" if b else "0" for b in video_bits))


def hamming_similarity(a: VideoCode, b: VideoCode) -> float:
    """1 minus the fraction of differing bits."""
    if len(a.bits) != len(b.bits):
        raise ValueError(f"code lengths differ: {len(a.bits)} vs {len(b.bits)}")
    distance = sum(1 for x, y in zip(a.bits, b.bits) if x != y)
    return 1.0 - distance / len(a.bits)


class InvertedIndex:
    """Term -> postings index over sparse video vectors.

    Vectors are stored as given; feed L2-normalized vectors if scores
    should read as cosines.  Postings hold (doc ordinal, weight) pairs
    sorted by ordinal, where ordinals follow insertion order.
    """

    def __init__(self, vocab_size: int = 0):
        self.doc_ids: list[str] = []
        self.postings: dict[int, list[tuple[int, float]]] = {}
        self.vocab_size = vocab_size

    def __len__(self) -> int:
        return len(self.doc_ids)

    def __contains__(self, video_id: str) -> bool:
        return video_id in self._ordinals

    @property
    def _ordinals(self) -> dict[str, int]:
        cached = getattr(self, "_ordinal_cache", None)
        if cached is None or len(cached) != len(self.doc_ids):
            cached = {doc: i for i, doc in enumerate(self.doc_ids)}
            self._ordinal_cache = cached
        return cached

    def add(self, video_id: str, vector: SparseVector) -> None:
        if video_id in self._ordinals:
            raise ValueError(f"duplicate video_id {video_id!r}")
        ordinal = len(self.doc_ids)
        self.doc_ids.append(video_id)
        self._ordinal_cache[video_id] = ordinal
        for term, weight in vector.entries:
            if term >= self.vocab_size:
                self.vocab_size = term + 1
            self.postings.setdefault(term, []).append((ordinal, weight))


def build_index(vectors, vocab_size: int = 0) -> InvertedIndex:
    """Index an iterable of (video_id, SparseVector); duplicate ids error."""
    index = InvertedIndex(vocab_size=vocab_size)
    items = vectors.items() if hasattr(vectors, "items") else vectors
    for video_id, vector in items:
        index.add(video_id, vector)
    return index


def document_vector(index: InvertedIndex, video_id: str) -> SparseVector:
    """Reconstruct one document's sparse vector from the postings."""
    ordinals = index._ordinals
    if video_id not in ordinals:
        raise KeyError(f"unknown video_id {video_id!r}")
    ordinal = ordinals[video_id]
    entries = {}
    for term, posting in index.postings.items():
        for doc_ordinal, weight in posting:
            if doc_ordinal == ordinal:
                entries[term] = weight
    return SparseVector.from_mapping(entries)


def query_top_k(
    index: InvertedIndex, query: SparseVector, k: int
) -> list[tuple[str, float]]:
    """Exact top-k by accumulated dot product.

    Only documents sharing at least one term with the query can score, so
    a disjoint query returns an empty list.  Results sort by descending
    score with ties broken by ascending video id.
    """
    if k < 1:
        raise ValueError(f"k must be positive, got {k}")
    scores: dict[int, float] = {}
    for term, weight in query.entries:
        for ordinal, doc_weight in index.postings.get(term, ()):
            scores[ordinal] = scores.get(ordinal, 0.0) + weight * doc_weight
    ranked = sorted(
        ((index.doc_ids[ordinal], score) for ordinal, score in scores.items()),
        key=lambda item: (-item[1], item[0]),
    )
    return ranked[:k]


def _pair_dots(index: InvertedIndex) -> dict[tuple[str, str], float]:
    """Dot products for every pair of docs co-occurring in some posting."""
    dots: dict[tuple[int, int], float] = {}
    for posting in index.postings.values():
        for i in range(len(posting)):
            ord_a, weight_a = posting[i]
            for j in range(i + 1, len(posting)):
                ord_b, weight_b = posting[j]
                key = (ord_a, ord_b)
                dots[key] = dots.get(key, 0.0) + weight_a * weight_b
    named: dict[tuple[str, str], float] = {}
    for (ord_a, ord_b), value in dots.items():
        id_a, id_b = index.doc_ids[ord_a], index.doc_ids[ord_b]
        if id_b < id_a:
            id_a, id_b = id_b, id_a
        named[(id_a, id_b)] = named.get((id_a, id_b), 0.0) + value
    return named


def count_candidate_pairs(
    visual: InvertedIndex, textual: InvertedIndex
) -> int:
    """How many distinct pairs the all-pairs scan actually touches."""
    candidates = set(_pair_dots(visual)) | set(_pair_dots(textual))
    return len(candidates)


def all_pairs_edges(
    visual: InvertedIndex, textual: InvertedIndex, threshold: float
) -> list[tuple[str, str, float]]:
    """Every unordered pair whose combined similarity beats ``threshold``.

    The combined score averages the visual and textual dot products; a
    pair absent from one index contributes 0 on that side and the average
    still divides by two.  Only co-occurring pairs are examined, so
    disjoint corpora cost nothing.  Edges come back sorted by id pair.
    """
    visual_dots = _pair_dots(visual)
    textual_dots = _pair_dots(textual)
    edges = []
    for pair in set(visual_dots) | set(textual_dots):
        combined = (visual_dots.get(pair, 0.0) + textual_dots.get(pair, 0.0)) / 2.0
        if combined > threshold:
            edges.append((pair[0], pair[1], combined))
    edges.sort(key=lambda edge: (edge[0], edge[1]))
    return edges


def save_index(index: InvertedIndex, path) -> None:
    """Write an index file (magic ``FVIX``, f64 weights for exact reload)."""
    writer = ByteWriter()
    writer.raw(INDEX_MAGIC)
    writer.u32(len(index.doc_ids))
    writer.u32(index.vocab_size)
    for doc_id in index.doc_ids:
        writer.string16(doc_id)
    writer.u32(len(index.postings))
    for term in sorted(index.postings):
        posting = index.postings[term]
        writer.u32(term)
        writer.u32(len(posting))
        for ordinal, weight in posting:
            writer.u32(ordinal)
            writer.f64(weight)
    with open(path, "wb") as handle:
        handle.write(writer.getvalue())


def load_index(path) -> InvertedIndex:
    with open(path, "rb") as handle:
        data = handle.read()
    reader = ByteReader(data, label=str(path))
    reader.magic(INDEX_MAGIC)
    n_docs = reader.u32()
    vocab_size = reader.u32()
    index = InvertedIndex(vocab_size=vocab_size)
    index.doc_ids = [reader.string16() for _ in range(n_docs)]
    n_terms = reader.u32()
    for _ in range(n_terms):
        term = reader.u32()
        count = reader.u32()
        posting = []
        for _ in range(count):
            ordinal = reader.u32()
            if ordinal >= n_docs:
                raise FormatError(f"{path}: posting ordinal {ordinal} out of range")
            posting.append((ordinal, reader.f64()))
        index.postings[term] = posting
    reader.expect_end()
    return index
