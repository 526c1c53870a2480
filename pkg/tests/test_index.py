"""Retrieval structures: similarities, hashing, and the inverted index.

The index is checked against a brute-force scorer built on the sparse
dot product.  Exactness tests use dyadic weights (multiples of 1/64), for
which every accumulation order produces the same float, so rankings must
match bit for bit; behavior under generic floats is checked separately
with tolerances.
"""

import numpy as np
import pytest

from fivr.binio import FormatError
from fivr.index import (
    INDEX_MAGIC,
    HashFamily,
    InvertedIndex,
    VideoCode,
    all_pairs_edges,
    build_index,
    cosine,
    count_candidate_pairs,
    dense_similarity,
    document_vector,
    encode_video,
    global_vector,
    hamming_similarity,
    load_index,
    query_top_k,
    save_index,
    train_hash_family,
)
from fivr.vocab import SparseVector


def random_corpus(rng, n_docs, vocab, density=0.3, dyadic=True):
    """Random sparse corpus; dyadic weights make float sums order-free."""
    corpus = {}
    for i in range(n_docs):
        support = rng.random(vocab) < density
        terms = np.flatnonzero(support)
        if dyadic:
            weights = rng.integers(1, 64, size=terms.size) / 64.0
        else:
            weights = rng.random(terms.size) + 0.01
        corpus[f"d{i:04d}"] = SparseVector.from_mapping(
            dict(zip(map(int, terms), map(float, weights)))
        )
    return corpus


def brute_force_top_k(corpus, query, k):
    """Oracle: dot against every doc, keep term-sharing docs, sort."""
    scored = []
    for doc_id, vector in corpus.items():
        if set(query.terms()) & set(vector.terms()):
            scored.append((query.dot(vector), doc_id))
    scored.sort(key=lambda item: (-item[0], item[1]))
    return [(doc_id, score) for score, doc_id in scored[:k]]


def brute_force_edges(corpus, threshold):
    """Oracle: all n^2 pairs, average of one side only (visual here)."""
    ids = sorted(corpus)
    edges = []
    for i, a in enumerate(ids):
        for b in ids[i + 1:]:
            dot = corpus[a].dot(corpus[b])
            combined = (dot + 0.0) / 2.0
            if combined > threshold:
                edges.append((a, b, combined))
    return edges


class TestSimilarities:
    def test_cosine_of_identical_unit_vectors(self):
        v = SparseVector.from_mapping({0: 3.0, 2: 4.0})
        assert cosine(v, v) == pytest.approx(1.0)

    def test_cosine_zero_vector_scores_zero(self):
        v = SparseVector.from_mapping({0: 1.0})
        assert cosine(v, SparseVector(())) == 0.0

    def test_global_vector_is_unit_mean(self):
        frames = np.array([[2.0, 0.0], [0.0, 2.0]])
        got = global_vector(frames)
        np.testing.assert_allclose(got, [1 / np.sqrt(2), 1 / np.sqrt(2)])

    def test_global_vector_zero_mean_rejected(self):
        frames = np.array([[1.0, 0.0], [-1.0, 0.0]])
        with pytest.raises(ValueError, match="zero"):
            global_vector(frames)

    def test_euclidean_similarity_formula(self):
        a = np.array([0.0, 0.0])
        b = np.array([3.0, 4.0])
        assert dense_similarity(a, b, kind="euclidean") == pytest.approx(
            1.0 / 6.0
        )
        assert dense_similarity(a, a, kind="euclidean") == 1.0

    def test_unknown_kind_rejected(self):
        with pytest.raises(ValueError, match="unknown similarity"):
            dense_similarity(np.ones(2), np.ones(2), kind="manhattan")


class TestHashing:
    def test_family_deterministic_per_seed(self):
        rng = np.random.default_rng(70)
        sample = rng.normal(size=(30, 8))
        a = train_hash_family(sample, bits=16, seed=5)
        b = train_hash_family(sample, bits=16, seed=5)
        np.testing.assert_array_equal(a.directions, b.directions)
        np.testing.assert_array_equal(a.mean, b.mean)

    def test_directions_are_unit(self):
        rng = np.random.default_rng(71)
        family = train_hash_family(rng.normal(size=(10, 6)), bits=12, seed=0)
        np.testing.assert_allclose(
            np.linalg.norm(family.directions, axis=1), 1.0
        )

    def test_encode_matches_scalar_majority_vote(self):
        rng = np.random.default_rng(72)
        sample = rng.normal(size=(40, 5))
        family = train_hash_family(sample, bits=9, seed=2)
        frames = rng.normal(size=(7, 5))
        code = encode_video(frames, family)
        for bit in range(9):
            votes = 0
            for frame in frames:
                if float((frame - family.mean) @ family.directions[bit]) >= 0:
                    votes += 1
            expected = "1" if votes * 2 >= len(frames) else "0"
            assert code.bits[bit] == expected

    def test_majority_tie_rounds_to_one(self):
        family = HashFamily(
            mean=np.zeros(1), directions=np.array([[1.0]])
        )
        frames = np.array([[1.0], [-1.0]])  # one vote each way
        assert encode_video(frames, family).bits == "1"

    def test_hamming_similarity(self):
        assert hamming_similarity(VideoCode("1100"), VideoCode("1001")) == 0.5
        assert hamming_similarity(VideoCode("111"), VideoCode("111")) == 1.0

    def test_length_mismatch_rejected(self):
        with pytest.raises(ValueError, match="lengths differ"):
            hamming_similarity(VideoCode("10"), VideoCode("101"))

    def test_code_validation(self):
        with pytest.raises(ValueError, match="0/1"):
            VideoCode("10a")


class TestInvertedIndex:
    def test_duplicate_doc_rejected(self):
        ivx = InvertedIndex()
        v = SparseVector.from_mapping({0: 1.0})
        ivx.add("d1", v)
        with pytest.raises(ValueError, match="duplicate"):
            ivx.add("d1", v)

    def test_vocab_size_tracks_terms(self):
        ivx = build_index({"d1": SparseVector.from_mapping({4: 1.0})})
        assert ivx.vocab_size == 5

    def test_document_vector_round_trip(self):
        rng = np.random.default_rng(73)
        corpus = random_corpus(rng, 10, 30)
        ivx = build_index(sorted(corpus.items()))
        for doc_id, vector in corpus.items():
            assert document_vector(ivx, doc_id).entries == vector.entries

    def test_document_vector_unknown_id(self):
        ivx = build_index({})
        with pytest.raises(KeyError):
            document_vector(ivx, "ghost")

    def test_top_k_matches_brute_force_exactly(self):
        rng = np.random.default_rng(74)
        for _ in range(20):
            corpus = random_corpus(
                rng, int(rng.integers(5, 40)), int(rng.integers(10, 50))
            )
            ivx = build_index(sorted(corpus.items()))
            query_id = sorted(corpus)[int(rng.integers(len(corpus)))]
            query = corpus[query_id]
            k = int(rng.integers(1, len(corpus) + 2))
            assert query_top_k(ivx, query, k) == brute_force_top_k(
                corpus, query, k
            )

    def test_top_k_only_scores_term_sharing_docs(self):
        corpus = {
            "a": SparseVector.from_mapping({0: 1.0}),
            "b": SparseVector.from_mapping({1: 1.0}),
        }
        ivx = build_index(sorted(corpus.items()))
        hits = query_top_k(ivx, corpus["a"], k=5)
        assert hits == [("a", 1.0)]

    def test_top_k_tie_breaks_by_id(self):
        corpus = {
            "b": SparseVector.from_mapping({0: 1.0}),
            "a": SparseVector.from_mapping({0: 1.0}),
        }
        ivx = build_index(sorted(corpus.items()))
        hits = query_top_k(ivx, SparseVector.from_mapping({0: 1.0}), k=2)
        assert [doc for doc, _ in hits] == ["a", "b"]

    def test_k_must_be_positive(self):
        ivx = build_index({})
        with pytest.raises(ValueError, match="positive"):
            query_top_k(ivx, SparseVector(()), k=0)


class TestAllPairs:
    def test_edges_match_quadratic_scan_exactly(self):
        rng = np.random.default_rng(75)
        for _ in range(10):
            corpus = random_corpus(rng, int(rng.integers(4, 30)), 20)
            visual = build_index(sorted(corpus.items()))
            textual = build_index([])  # one-sided: textual side reads 0
            threshold = float(rng.integers(0, 8)) / 16.0
            got = all_pairs_edges(visual, textual, threshold)
            assert got == brute_force_edges(corpus, threshold)

    def test_combined_averages_both_sides(self):
        a = {"x": SparseVector.from_mapping({0: 1.0}),
             "y": SparseVector.from_mapping({0: 1.0})}
        b = {"x": SparseVector.from_mapping({0: 0.5}),
             "y": SparseVector.from_mapping({0: 0.5})}
        edges = all_pairs_edges(
            build_index(sorted(a.items())),
            build_index(sorted(b.items())),
            threshold=0.0,
        )
        assert edges == [("x", "y", (1.0 + 0.25) / 2.0)]

    def test_threshold_is_strict(self):
        a = {"x": SparseVector.from_mapping({0: 1.0}),
             "y": SparseVector.from_mapping({0: 1.0})}
        empty = build_index([])
        # Combined = (1.0 + 0) / 2 = 0.5 exactly.
        assert all_pairs_edges(build_index(sorted(a.items())), empty, 0.5) == []
        assert len(
            all_pairs_edges(build_index(sorted(a.items())), empty, 0.49)
        ) == 1

    def test_candidate_count_below_quadratic_on_sparse_corpus(self):
        # Two disjoint term cliques: cross-clique pairs never co-occur.
        corpus = {}
        for i in range(10):
            term = 0 if i < 5 else 1
            corpus[f"d{i}"] = SparseVector.from_mapping({term: 1.0})
        ivx = build_index(sorted(corpus.items()))
        count = count_candidate_pairs(ivx, build_index([]))
        assert count == 2 * (5 * 4 // 2)
        assert count < 10 * 9 // 2


class TestIndexFile:
    def test_round_trip_preserves_rankings(self, tmp_path):
        rng = np.random.default_rng(76)
        corpus = random_corpus(rng, 25, 40, dyadic=False)
        ivx = build_index(sorted(corpus.items()))
        path = tmp_path / "i.fvix"
        save_index(ivx, path)
        loaded = load_index(path)
        for doc_id in sorted(corpus)[:5]:
            query = corpus[doc_id]
            assert query_top_k(loaded, query, 10) == query_top_k(ivx, query, 10)

    def test_write_read_write_byte_identical(self, tmp_path):
        rng = np.random.default_rng(77)
        corpus = random_corpus(rng, 12, 30, dyadic=False)
        ivx = build_index(sorted(corpus.items()))
        first = tmp_path / "a.fvix"
        second = tmp_path / "b.fvix"
        save_index(ivx, first)
        save_index(load_index(first), second)
        assert first.read_bytes() == second.read_bytes()

    def test_magic_enforced(self, tmp_path):
        path = tmp_path / "bad.fvix"
        path.write_bytes(b"JUNK" + bytes(12))
        with pytest.raises(FormatError, match="magic"):
            load_index(path)

    def test_corrupt_ordinal_detected(self, tmp_path):
        corpus = {"d0": SparseVector.from_mapping({0: 1.0})}
        ivx = build_index(sorted(corpus.items()))
        path = tmp_path / "i.fvix"
        save_index(ivx, path)
        data = bytearray(path.read_bytes())
        # The single posting ordinal is the u32 right before the final f64.
        data[-12:-8] = (99).to_bytes(4, "little")
        bad = tmp_path / "bad.fvix"
        bad.write_bytes(bytes(data))
        with pytest.raises(FormatError, match="out of range"):
            load_index(bad)

    def test_magic_constant(self):
        assert INDEX_MAGIC == b"FVIX"
