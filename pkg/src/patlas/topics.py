"""Cluster labeling by over-represented title/abstract words.

Word importance in a cluster is the z-score of the in-cluster document
frequency M against a null model where the word lands in any patent with
probability p = m/n (m = patents containing the word corpus-wide, n = corpus
size):

    mu = |cluster| * p,  sigma = sqrt(|cluster| * p * (1 - p)),  z = (M - mu) / sigma

Counting is presence-based: a word counts once per patent regardless of how
often it appears.
"""

from __future__ import annotations

import re
from collections import Counter
from dataclasses import dataclass
from math import sqrt
from pathlib import Path

from ._stopwords import DEFAULT_STOPWORDS
from .coclus import CoClustering
from .errors import PatlasError
from .ingest import PatentRecord

_TOKEN_RE = re.compile(r"[a-z0-9]+")


@dataclass(frozen=True)
class TokenizedCorpus:
    doc_ids: tuple[str, ...]
    doc_tokens: tuple[frozenset[str], ...]
    doc_freq: dict[str, int]  # word -> number of docs containing it

    @property
    def n(self) -> int:
        return len(self.doc_ids)

    def index_of(self) -> dict[str, int]:
        return {doc_id: i for i, doc_id in enumerate(self.doc_ids)}


@dataclass(frozen=True)
class KeywordScore:
    word: str
    cluster: int
    m_in_cluster: int      # M: docs in the cluster containing the word
    mu: float
    sigma: float
    z: float
    degenerate: bool = False  # sigma == 0 (word in every doc); excluded from rankings


def load_stopwords(path) -> frozenset[str]:
    words = Path(path).read_text(encoding="utf-8").split()
    return frozenset(w.strip().lower() for w in words if w.strip())


def tokenize_text(text: str, stopwords=DEFAULT_STOPWORDS) -> frozenset[str]:
    """Distinct lowercase tokens: split on non-alphanumerics, drop tokens
    shorter than 3 chars, pure numbers, and stopwords."""
    return frozenset(
        t for t in _TOKEN_RE.findall(text.lower())
        if len(t) >= 3 and not t.isdigit() and t not in stopwords
    )


def tokenize(apps: list[PatentRecord], stopwords=None) -> TokenizedCorpus:
    """Tokenize title+abstract of each patent into per-document token sets."""
    stop = DEFAULT_STOPWORDS if stopwords is None else frozenset(stopwords)
    ids = []
    sets = []
    freq: Counter[str] = Counter()
    for app in apps:
        tokens = tokenize_text(f"{app.title} {app.abstract}", stop)
        ids.append(app.application_id)
        sets.append(tokens)
        freq.update(tokens)
    return TokenizedCorpus(tuple(ids), tuple(sets), dict(freq))


def _cluster_doc_indices(cluster: int, corpus: TokenizedCorpus, clustering: CoClustering):
    part = clustering.row_partition()
    index = corpus.index_of()
    missing = [label for label in part if label not in index]
    if missing:
        raise PatlasError(f"clustered document {missing[0]!r} is not in the corpus")
    return [index[label] for label, k in part.items() if k == cluster]


def _score(word: str, cluster: int, m_k: int, n: int, c_size: int, m_in: int) -> KeywordScore:
    p = m_k / n
    mu = (m_k * c_size) / n  # multiply first: exact when the cluster is the whole corpus
    if m_k >= n or c_size == 0:
        return KeywordScore(word, cluster, m_in, mu, 0.0, 0.0, degenerate=True)
    sigma = sqrt(c_size * p * (1.0 - p))
    return KeywordScore(word, cluster, m_in, mu, sigma, (m_in - mu) / sigma)


def zscore(word: str, cluster: int, corpus: TokenizedCorpus,
           clustering: CoClustering) -> KeywordScore:
    """Score one word in one cluster. The word must occur somewhere in the
    corpus; a word present in every document gets a degenerate (sigma=0)
    score that rankings exclude."""
    m_k = corpus.doc_freq.get(word, 0)
    if m_k == 0:
        raise PatlasError(f"word {word!r} does not occur in the corpus")
    docs = _cluster_doc_indices(cluster, corpus, clustering)
    m_in = sum(1 for i in docs if word in corpus.doc_tokens[i])
    return _score(word, cluster, m_k, corpus.n, len(docs), m_in)


def cluster_keyword_scores(cluster: int, corpus: TokenizedCorpus,
                           clustering: CoClustering) -> list[KeywordScore]:
    """Scores for every corpus word in one cluster (single counting pass)."""
    docs = _cluster_doc_indices(cluster, corpus, clustering)
    counts: Counter[str] = Counter()
    for i in docs:
        counts.update(corpus.doc_tokens[i])
    n = corpus.n
    c_size = len(docs)
    return [
        _score(word, cluster, m_k, n, c_size, counts.get(word, 0))
        for word, m_k in corpus.doc_freq.items()
    ]


def top_keywords(cluster: int, corpus: TokenizedCorpus, clustering: CoClustering,
                 k: int = 25) -> list[KeywordScore]:
    """Top-k keywords of a cluster: z descending, ties by higher M then word."""
    if k <= 0:
        return []
    scores = [s for s in cluster_keyword_scores(cluster, corpus, clustering)
              if not s.degenerate]
    scores.sort(key=lambda s: (-s.z, -s.m_in_cluster, s.word))
    return scores[:k]
