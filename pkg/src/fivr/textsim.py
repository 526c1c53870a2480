"""Title-based textual similarity.

Titles go through a small normalization pipeline: lowercase and split on
non-alphanumeric characters, drop stopwords, drop lexicon verbs, then
reduce tokens to lemmas with suffix-stripping rules.  The surviving
lemmas feed the same tf-idf weighting used for visual words, so textual
vectors compare with plain cosine.

The packaged verb lexicon stays conservative (auxiliaries and reporting
verbs); domain verbs like "flood" double as nouns in headlines, so
callers with stronger opinions pass their own lexicon.
"""

from __future__ import annotations

import re
from importlib import resources

from .vocab import DocumentFrequencies, SparseVector, tf_idf

_TOKEN_RE = re.compile(r"[a-z0-9]+")

# Suffix rules shorten their input, so repeated application terminates.
_UNDOUBLE = frozenset("bdgmnprt")


def _load_wordlist(filename: str) -> frozenset:
    text = resources.files("fivr.data").joinpath(filename).read_text("utf-8")
    words = set()
    for line in text.splitlines():
        line = line.strip().lower()
        if line and not line.startswith("#"):
            words.add(line)
    return frozenset(words)


def load_stopwords(path=None) -> frozenset:
    """Packaged English stopword list, or one word per line from ``path``."""
    if path is None:
        return _load_wordlist("stopwords.txt")
    with open(path, encoding="utf-8") as handle:
        return frozenset(
            line.strip().lower()
            for line in handle
            if line.strip() and not line.startswith("#")
        )


def load_verb_lexicon(path=None) -> frozenset:
    if path is None:
        return _load_wordlist("verbs.txt")
    with open(path, encoding="utf-8") as handle:
        return frozenset(
            line.strip().lower()
            for line in handle
            if line.strip() and not line.startswith("#")
        )


def _strip_once(token: str) -> str:
    t = token
    if t.endswith("ies") and len(t) > 4:
        return t[:-3] + "y"
    if t.endswith("sses"):
        return t[:-2]
    if t.endswith(("ches", "shes", "xes", "zes", "oes")) and len(t) > 4:
        return t[:-2]
    if (
        t.endswith("s")
        and not t.endswith(("ss", "us", "is"))
        and len(t) > 3
    ):
        return t[:-1]
    if t.endswith("ing") and len(t) > 5:
        t = t[:-3]
        if len(t) >= 2 and t[-1] == t[-2] and t[-1] in _UNDOUBLE:
            t = t[:-1]
        return t
    if t.endswith("ed") and len(t) > 4:
        t = t[:-2]
        if len(t) >= 2 and t[-1] == t[-2] and t[-1] in _UNDOUBLE:
            t = t[:-1]
        return t
    return t


def lemmatize(token: str) -> str:
    """Suffix-strip to a fixed point, so lemmas map to themselves."""
    while True:
        stripped = _strip_once(token)
        if stripped == token:
            return token
        token = stripped


def preprocess_title(
    title: str, stopwords=None, verb_lexicon=None
) -> list[str]:
    """Normalize a title to content lemmas.

    Tokens are lowercased alphanumeric runs; stopwords and lexicon verbs
    drop out both before and after lemmatization, which keeps the result
    stable under re-processing.
    """
    if stopwords is None:
        stopwords = load_stopwords()
    if verb_lexicon is None:
        verb_lexicon = load_verb_lexicon()
    tokens = _TOKEN_RE.findall(title.lower())
    tokens = [t for t in tokens if t not in stopwords and t not in verb_lexicon]
    lemmas = [lemmatize(t) for t in tokens]
    return [t for t in lemmas if t not in stopwords and t not in verb_lexicon]


def build_dictionary(token_lists) -> dict[str, int]:
    """Assign term ids to lemmas, sorted for determinism."""
    seen = set()
    for tokens in token_lists:
        seen.update(tokens)
    return {lemma: term for term, lemma in enumerate(sorted(seen))}


def count_vector(tokens: list[str], dictionary: dict[str, int]) -> SparseVector:
    """Token counts as a sparse vector; out-of-dictionary tokens drop."""
    counts: dict[int, float] = {}
    for token in tokens:
        term = dictionary.get(token)
        if term is not None:
            counts[term] = counts.get(term, 0) + 1
    return SparseVector.from_mapping(counts)


def text_vector(
    tokens: list[str],
    dictionary: dict[str, int],
    dfs: DocumentFrequencies,
) -> SparseVector:
    """tf-idf weighted, L2-normalized textual vector for one title."""
    return tf_idf(count_vector(tokens, dictionary), dfs)
