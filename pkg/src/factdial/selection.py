"""Candidate-triple scoring and Top-N dialogue sense graph construction.

Three interchangeable scorers rank a dialogue's candidate triple pool:

* ``score_bm25``      -- Okapi BM25 over textualized triples (query = last utterance)
* ``score_embedding`` -- cosine similarity of gateway embeddings
* ``score_llm``       -- per-triple Relevant/Irrelevant judgement by the chat model

``select_top_n`` turns any scored list into a sense graph.
"""

from __future__ import annotations

import logging
import math
import re
from collections import Counter
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from enum import Enum

from .corpus import DialogueSenseGraph, Triple, Variant, textualize_triple
from .errors import EmptyPool, GatewayError, ScorerBackend
from .gateway import Gateway
from .prompts import TemplateName, render

logger = logging.getLogger(__name__)


class Scorer(str, Enum):
    BM25 = "bm25"
    EMBEDDING = "embedding"
    LLM_JUDGE = "llm-judge"


@dataclass(frozen=True)
class Bm25Params:
    k1: float = 1.5
    b: float = 0.75

    def __post_init__(self):
        if self.k1 <= 0:
            raise ValueError("k1 must be > 0")
        if not 0.0 <= self.b <= 1.0:
            raise ValueError("b must be in [0, 1]")


@dataclass
class SelectionConfig:
    n: int = 5
    scorer: Scorer = Scorer.BM25
    bm25: Bm25Params = field(default_factory=Bm25Params)

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("n must be >= 1")


@dataclass(frozen=True)
class ScoredTriple:
    triple: Triple
    score: float
    source_index: int


def tokenize(s: str) -> list[str]:
    """Lowercase, split on any non-alphanumeric run, drop empties."""
    return [t for t in re.split(r"[^0-9a-z]+", s.lower()) if t]


def score_bm25(query: str, pool: list[Triple], p: Bm25Params | None = None) -> list[ScoredTriple]:
    """Okapi BM25 with each textualized triple as one document.

    idf(t) = ln((D - df + 0.5) / (df + 0.5) + 1), the +1-inside-log variant,
    so scores stay non-negative on tiny pools.
    """
    if not pool:
        raise EmptyPool("BM25 needs a non-empty pool")
    p = p or Bm25Params()
    docs = [tokenize(textualize_triple(t)) for t in pool]
    doc_lens = [len(d) for d in docs]
    avgdl = sum(doc_lens) / len(docs)
    term_freqs = [Counter(d) for d in docs]
    df = Counter()
    for tf in term_freqs:
        df.update(tf.keys())
    n_docs = len(docs)
    idf = {t: math.log((n_docs - n + 0.5) / (n + 0.5) + 1.0) for t, n in df.items()}

    query_terms = tokenize(query)
    out = []
    for i, triple in enumerate(pool):
        tf = term_freqs[i]
        norm = p.k1 * (1.0 - p.b + p.b * doc_lens[i] / avgdl)
        s = 0.0
        for term in query_terms:
            f = tf.get(term, 0)
            if f == 0:
                continue
            s += idf[term] * f * (p.k1 + 1.0) / (f + norm)
        out.append(ScoredTriple(triple=triple, score=s, source_index=i))
    return out


def cosine(a: list[float], b: list[float]) -> float:
    """Cosine similarity; by convention 0 when either vector is all-zero."""
    na = math.sqrt(sum(x * x for x in a))
    nb = math.sqrt(sum(x * x for x in b))
    if na == 0.0 or nb == 0.0:
        return 0.0
    return sum(x * y for x, y in zip(a, b)) / (na * nb)


def score_embedding(gw: Gateway, dialogue_text: str, pool: list[Triple]) -> list[ScoredTriple]:
    """Cosine similarity between the dialogue embedding and each triple embedding."""
    if not pool:
        raise EmptyPool("embedding scorer needs a non-empty pool")
    texts = [dialogue_text] + [textualize_triple(t) for t in pool]
    try:
        vectors = gw.embed(texts)
    except GatewayError as e:
        raise ScorerBackend(str(e)) from e
    query_vec = vectors[0]
    return [
        ScoredTriple(triple=t, score=cosine(query_vec, v), source_index=i)
        for i, (t, v) in enumerate(zip(pool, vectors[1:]))
    ]


_LABEL_WORD = re.compile(r"[a-z]+")


def parse_relevance_label(reply: str) -> float | None:
    """Map a judge reply to 1.0 (Relevant) / 0.0 (Irrelevant); None if neither
    word occurs. First matching word wins, case-insensitively."""
    for word in _LABEL_WORD.findall(reply.lower()):
        if word == "relevant":
            return 1.0
        if word == "irrelevant":
            return 0.0
    return None


def score_llm(
    gw: Gateway,
    dialogue_text: str,
    pool: list[Triple],
    embedding_tiebreak: bool = True,
) -> list[ScoredTriple]:
    """One Relevance judgement per triple, mapped to a {0, 1} label score.

    Labels alone produce massive ties, so when the backend can embed, a
    cosine-similarity component scaled into [0, 0.5] is added: it orders
    equal labels without ever crossing the 1.0 label gap. If embeddings are
    unavailable the plain label is used and ties fall back to pool order.
    An unparseable judge reply scores 0.0 (with a warning), never an error.
    """
    if not pool:
        raise EmptyPool("LLM judge needs a non-empty pool")

    dialogue_for_prompt = dialogue_text

    def judge(i: int) -> float:
        prompt = render(
            TemplateName.RELEVANCE,
            {"Dialogue": dialogue_for_prompt, "Selected Triples": textualize_triple(pool[i])},
        )
        try:
            reply = gw.chat_text(prompt)
        except GatewayError as e:
            raise ScorerBackend(str(e)) from e
        label = parse_relevance_label(reply)
        if label is None:
            logger.warning(
                "unparseable relevance label for triple %d (%r); scoring 0.0", i, reply[:80]
            )
            return 0.0
        return label

    with ThreadPoolExecutor(max_workers=gw.cfg.parallelism) as pool_exec:
        labels = list(pool_exec.map(judge, range(len(pool))))

    tiebreak = [0.0] * len(pool)
    if embedding_tiebreak:
        try:
            by_embedding = score_embedding(gw, dialogue_text, pool)
            # cosine in [-1, 1] -> [0, 0.5]: strictly below the label gap
            tiebreak = [(st.score + 1.0) / 4.0 for st in by_embedding]
        except ScorerBackend:
            logger.info("embedding tiebreak unavailable; ties fall back to pool order")

    return [
        ScoredTriple(triple=t, score=labels[i] + tiebreak[i], source_index=i)
        for i, t in enumerate(pool)
    ]


def select_top_n(
    scored: list[ScoredTriple],
    n: int,
    dialogue_id: str = "",
    variant: Variant = Variant.ORIGINAL,
) -> DialogueSenseGraph:
    """Stable (score desc, source_index asc) sort, truncated to n."""
    ordered = sorted(scored, key=lambda st: (-st.score, st.source_index))
    kept = ordered[: min(n, len(ordered))]
    return DialogueSenseGraph(
        dialogue_id=dialogue_id,
        variant=variant,
        triples=tuple((st.triple, st.score) for st in kept),
        n=n,
    )
