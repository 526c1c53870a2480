"""Visual vocabularies and sparse bag-of-words vectors.

Codebooks are trained per descriptor channel with seeded k-means and
stored in a small binary format (magic ``FVCB``).  Frame descriptors map
to their ``m`` nearest words; per-video counts over the concatenated
channel vocabularies become tf-idf weighted, L2-normalized sparse
vectors.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .binio import ByteReader, ByteWriter
from .features import DescriptorSequence

CODEBOOK_MAGIC = b"FVCB"

KMEANS_MAX_ITERS = 100
KMEANS_REL_TOL = 1e-4

# Float slack for the non-increasing objective assertion; Lloyd iterations
# cannot increase the true objective, so anything beyond rounding is a bug.
_OBJECTIVE_SLACK = 1e-9


@dataclass(frozen=True)
class SparseVector:
    """Sparse weights keyed by term id, ids strictly increasing."""

    entries: tuple[tuple[int, float], ...]

    def __post_init__(self):
        last = -1
        for term, weight in self.entries:
            if term <= last:
                raise ValueError("term ids must be strictly increasing")
            if not math.isfinite(weight):
                raise ValueError(f"non-finite weight for term {term}")
            if weight == 0:
                raise ValueError(f"zero weight stored for term {term}")
            last = term

    @classmethod
    def from_mapping(cls, mapping: dict[int, float]) -> "SparseVector":
        return cls(tuple(sorted((t, w) for t, w in mapping.items() if w != 0)))

    @property
    def nnz(self) -> int:
        return len(self.entries)

    def terms(self) -> list[int]:
        return [term for term, _ in self.entries]

    def dot(self, other: "SparseVector") -> float:
        total = 0.0
        i, j = 0, 0
        a, b = self.entries, other.entries
        while i < len(a) and j < len(b):
            ta, wa = a[i]
            tb, wb = b[j]
            if ta == tb:
                total += wa * wb
                i += 1
                j += 1
            elif ta < tb:
                i += 1
            else:
                j += 1
        return total

    def norm(self) -> float:
        return math.sqrt(sum(w * w for _, w in self.entries))

    def l2_normalized(self) -> "SparseVector":
        scale = self.norm()
        if scale == 0:
            return self
        return SparseVector(tuple((t, w / scale) for t, w in self.entries))


@dataclass
class Codebook:
    """A trained visual vocabulary for one descriptor channel."""

    channel: str
    centroids: np.ndarray
    objective_history: tuple[float, ...] = field(default=(), repr=False)

    @property
    def k(self) -> int:
        return self.centroids.shape[0]

    @property
    def dim(self) -> int:
        return self.centroids.shape[1]


@dataclass
class DocumentFrequencies:
    """Per-term document counts over a corpus of ``n_docs`` vectors."""

    n_docs: int
    counts: dict[int, int]

    def __post_init__(self):
        if self.n_docs < 1:
            raise ValueError("document frequencies need at least one document")
        for term, count in self.counts.items():
            if not 1 <= count <= self.n_docs:
                raise ValueError(
                    f"term {term}: df {count} outside [1, {self.n_docs}]"
                )

    @classmethod
    def from_corpus(cls, vectors) -> "DocumentFrequencies":
        counts: dict[int, int] = {}
        n_docs = 0
        for vector in vectors:
            n_docs += 1
            for term in vector.terms():
                counts[term] = counts.get(term, 0) + 1
        return cls(n_docs=n_docs, counts=counts)

    def df(self, term: int) -> int:
        # Terms never seen in the corpus behave as if present everywhere,
        # which zeroes them out of queries.
        return self.counts.get(term, self.n_docs)


def _pairwise_sq_dist(points: np.ndarray, centers: np.ndarray) -> np.ndarray:
    """Exact squared distances, chunked to bound memory."""
    n = points.shape[0]
    out = np.empty((n, centers.shape[0]), dtype=np.float64)
    step = max(1, 2**22 // max(1, centers.shape[0] * centers.shape[1]))
    for start in range(0, n, step):
        block = points[start : start + step]
        diff = block[:, None, :] - centers[None, :, :]
        out[start : start + step] = np.einsum("ijk,ijk->ij", diff, diff)
    return out


def _seed_centroids(sample: np.ndarray, k: int, rng) -> np.ndarray:
    """k-means++ seeding; degenerate duplicate mass falls back to uniform."""
    n = sample.shape[0]
    chosen = [int(rng.integers(n))]
    d2 = _pairwise_sq_dist(sample, sample[chosen[-1]][None, :])[:, 0]
    while len(chosen) < k:
        total = d2.sum()
        if total > 0:
            index = int(rng.choice(n, p=d2 / total))
        else:
            remaining = [i for i in range(n) if i not in set(chosen)]
            index = int(rng.choice(remaining))
        chosen.append(index)
        d2 = np.minimum(d2, _pairwise_sq_dist(sample, sample[index][None, :])[:, 0])
    return sample[chosen].copy()


def train_codebook(
    sample: np.ndarray, k: int, seed: int, channel: str = ""
) -> Codebook:
    """Train a k-word codebook on descriptor samples with Lloyd's method.

    Seeding is k-means++ driven by ``seed``; ties in assignment go to the
    lower centroid index; an emptied cluster keeps its previous centroid.
    Training stops after 100 iterations or when the relative objective
    improvement drops below 1e-4.  The recorded objective history is
    checked to be non-increasing every iteration.
    """
    sample = np.asarray(sample, dtype=np.float64)
    if sample.ndim != 2:
        raise ValueError("sample must be a 2-D array of descriptors")
    n = sample.shape[0]
    if k < 1:
        raise ValueError(f"k must be positive, got {k}")
    if n < k:
        raise ValueError(f"sample of {n} descriptors cannot fill k={k} words")
    rng = np.random.default_rng(seed)
    centroids = _seed_centroids(sample, k, rng)
    history: list[float] = []
    for _ in range(KMEANS_MAX_ITERS):
        d2 = _pairwise_sq_dist(sample, centroids)
        assignment = np.argmin(d2, axis=1)
        objective = float(d2[np.arange(n), assignment].sum())
        if history and objective > history[-1] + _OBJECTIVE_SLACK * max(
            1.0, history[-1]
        ):
            raise RuntimeError(
                f"k-means objective increased: {history[-1]} -> {objective}"
            )
        history.append(objective)
        if len(history) >= 2:
            previous = history[-2]
            if previous - objective < KMEANS_REL_TOL * max(previous, 1e-30):
                break
        sums = np.zeros_like(centroids)
        np.add.at(sums, assignment, sample)
        counts = np.bincount(assignment, minlength=k)
        occupied = counts > 0
        centroids = centroids.copy()
        centroids[occupied] = sums[occupied] / counts[occupied, None]
    return Codebook(
        channel=channel, centroids=centroids, objective_history=tuple(history)
    )


def assign_words(descriptors: np.ndarray, codebook: Codebook, m: int) -> np.ndarray:
    """Map each descriptor to its ``m`` nearest words.

    Returns an ``(n, m)`` array of word ids ordered nearest first;
    distance ties resolve to the lower word id.
    """
    if not 1 <= m <= codebook.k:
        raise ValueError(f"m={m} outside [1, {codebook.k}]")
    descriptors = np.asarray(descriptors, dtype=np.float64)
    single = descriptors.ndim == 1
    if single:
        descriptors = descriptors[None, :]
    if descriptors.shape[1] != codebook.dim:
        raise ValueError(
            f"descriptor dim {descriptors.shape[1]} != codebook dim {codebook.dim}"
        )
    d2 = _pairwise_sq_dist(descriptors, codebook.centroids)
    order = np.argsort(d2, axis=1, kind="stable")[:, :m]
    return order[0] if single else order


def aggregate_bow(
    sequence: DescriptorSequence, codebooks: dict[str, Codebook], m: int = 1
) -> SparseVector:
    """Bag-of-words counts for one video over concatenated vocabularies.

    Every channel in the sequence needs a codebook and vice versa.  Each
    codebook's words occupy a contiguous term range; the offset of a
    channel is the sum of the k values of the codebooks before it, in
    codebook order.  Each frame contributes ``m`` counts per channel.
    """
    if set(sequence.channels) != set(codebooks):
        raise ValueError(
            f"channel mismatch: descriptors have {sorted(sequence.channels)}, "
            f"codebooks have {sorted(codebooks)}"
        )
    counts: dict[int, float] = {}
    offset = 0
    for name, codebook in codebooks.items():
        words = assign_words(sequence.channel(name), codebook, m)
        for word in words.ravel():
            term = offset + int(word)
            counts[term] = counts.get(term, 0) + 1
        offset += codebook.k
    return SparseVector.from_mapping(counts)


def tf_idf(counts: SparseVector, dfs: DocumentFrequencies) -> SparseVector:
    """Weight counts by ln(n_docs / df) and L2-normalize.

    Terms whose document frequency equals the corpus size get weight zero
    and are dropped, so a vector of corpus-wide terms comes back empty.
    """
    weighted: dict[int, float] = {}
    for term, count in counts.entries:
        weight = count * math.log(dfs.n_docs / dfs.df(term))
        if weight != 0:
            weighted[term] = weight
    return SparseVector.from_mapping(weighted).l2_normalized()


def save_codebook(codebook: Codebook, path) -> None:
    """Write a codebook file (magic ``FVCB``, f32 centroid payload)."""
    writer = ByteWriter()
    writer.raw(CODEBOOK_MAGIC)
    writer.u32(codebook.k)
    writer.u32(codebook.dim)
    writer.string16(codebook.channel)
    writer.f32_array(codebook.centroids)
    with open(path, "wb") as handle:
        handle.write(writer.getvalue())


def load_codebook(path) -> Codebook:
    with open(path, "rb") as handle:
        data = handle.read()
    reader = ByteReader(data, label=str(path))
    reader.magic(CODEBOOK_MAGIC)
    k = reader.u32()
    dim = reader.u32()
    channel = reader.string16()
    centroids = reader.f32_array(k * dim).reshape(k, dim).astype(np.float64)
    reader.expect_end()
    return Codebook(channel=channel, centroids=centroids)
