"""Lexical node retrieval behind a pluggable scorer.

A scorer is any callable ``(query_tokens, doc_tokens, stats) -> float``. The default
``bm25`` scorer adds an exact-match bonus so a node whose indexed text equals the
query is never outranked by a node that merely shares terms with it.
"""

from __future__ import annotations

import math
from collections import Counter, defaultdict
from dataclasses import dataclass, field
from typing import Callable, Mapping, Optional, Sequence

from .graph_store import KnowledgeGraph
from .text import tokenize

BM25_K1 = 1.5
BM25_B = 0.75


class RetrievalConfigError(ValueError):
    pass


@dataclass(frozen=True)
class CorpusStats:
    n_docs: int
    avg_doc_len: float
    doc_freq: Mapping[str, int]

    def idf(self, term: str) -> float:
        df = self.doc_freq.get(term, 0)
        return math.log((self.n_docs - df + 0.5) / (df + 0.5) + 1.0)


Scorer = Callable[[Sequence[str], Sequence[str], CorpusStats], float]


def bm25_score(query: Sequence[str], doc: Sequence[str], stats: CorpusStats) -> float:
    if not query or not doc:
        return 0.0
    tf = Counter(doc)
    norm = BM25_K1 * (1.0 - BM25_B + BM25_B * len(doc) / (stats.avg_doc_len or 1.0))
    score = 0.0
    for term in query:
        f = tf.get(term, 0)
        if f:
            score += stats.idf(term) * f * (BM25_K1 + 1.0) / (f + norm)
    if score and list(query) == list(doc):
        # each query term contributes strictly less than idf * (k1 + 1) to any document,
        # so this bound lifts an exact match above every non-identical text
        score += sum(stats.idf(term) * (BM25_K1 + 1.0) for term in query)
    return score


# scorers that are zero whenever query and document share no token;
# the index only scans posting lists for these
_SPARSE: set[str] = {"bm25"}
_SCORERS: dict[str, Scorer] = {"bm25": bm25_score}


def register_scorer(name: str, scorer: Scorer, *, sparse: bool = False) -> None:
    _SCORERS[name] = scorer
    if sparse:
        _SPARSE.add(name)
    else:
        _SPARSE.discard(name)


def get_scorer(name: str) -> Scorer:
    try:
        return _SCORERS[name]
    except KeyError:
        raise RetrievalConfigError(
            f"unknown scorer {name!r}; registered: {', '.join(sorted(_SCORERS))}"
        ) from None


@dataclass(frozen=True)
class RetrievalHit:
    node: str
    score: float


@dataclass(frozen=True)
class RetrievalIndex:
    fields: tuple[str, ...]
    doc_tokens: Mapping[str, tuple[str, ...]]
    stats: CorpusStats
    scorer_name: str = "bm25"
    postings: Mapping[str, tuple[str, ...]] = field(default_factory=dict, repr=False)

    def __len__(self) -> int:
        return len(self.doc_tokens)

    def _candidates(self, query: Sequence[str]) -> list[str]:
        if self.scorer_name not in _SPARSE:
            return list(self.doc_tokens)
        seen: dict[str, None] = {}
        for term in query:
            for node in self.postings.get(term, ()):
                seen[node] = None
        return list(seen)

    def top_k(self, query: str, k: int) -> list[RetrievalHit]:
        if not query.strip():
            raise ValueError("retrieval query is empty")
        q = tokenize(query)
        scorer = get_scorer(self.scorer_name)
        hits = []
        for node in self._candidates(q):
            s = float(scorer(q, self.doc_tokens[node], self.stats))
            if not math.isfinite(s):
                raise ValueError(f"scorer {self.scorer_name!r} returned {s} for node {node}")
            if s != 0.0:
                hits.append(RetrievalHit(node, s))
        hits.sort(key=lambda h: (-h.score, h.node))
        return hits[:k]


def build_index(
    g: KnowledgeGraph, fields: Optional[Sequence[str]] = None, scorer: str = "bm25"
) -> RetrievalIndex:
    """Index every node under the concatenation of its values for ``fields``.

    ``fields=None`` means every feature name in schema order.
    """
    if fields is None:
        fields = g.schema.feature_names
    else:
        if not fields:
            raise RetrievalConfigError("retrieval field list is empty")
        unknown = [f for f in fields if f not in g.schema.feature_names]
        if unknown and len(g):
            raise RetrievalConfigError(
                f"unknown retrieval field(s) {unknown}; graph has {list(g.schema.feature_names)}"
            )
    get_scorer(scorer)

    doc_tokens: dict[str, tuple[str, ...]] = {}
    postings: dict[str, list[str]] = defaultdict(list)
    doc_freq: Counter[str] = Counter()
    for node, features in g.nodes.items():
        text = " ".join(features[f] for f in fields if features.get(f))
        toks = tuple(tokenize(text))
        doc_tokens[node] = toks
        for term in set(toks):
            doc_freq[term] += 1
            postings[term].append(node)
    n = len(doc_tokens)
    avg = sum(len(t) for t in doc_tokens.values()) / n if n else 0.0
    return RetrievalIndex(
        fields=tuple(fields),
        doc_tokens=doc_tokens,
        stats=CorpusStats(n, avg, dict(doc_freq)),
        scorer_name=scorer,
        postings={k: tuple(v) for k, v in postings.items()},
    )


def retrieve_top1(idx: RetrievalIndex, query: str) -> Optional[RetrievalHit]:
    """Best-scoring node, ties to the smallest id; ``None`` when nothing scores."""
    hits = idx.top_k(query, 1)
    return hits[0] if hits else None
