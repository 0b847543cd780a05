"""Conventional generation metrics and annotator agreement statistics.

BLEU-4 here is sentence-level with uniform 1/4 weights and add-epsilon
smoothing (zero n-gram precisions are replaced by 1e-9), because exact BLEU-4
on short dialogue responses is almost always zero. ROUGE-L is the balanced-F
LCS score. Entity F1 compares alias-linked entity sets. Perplexity comes from
gateway token logprobs.
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass

from .errors import Unsupported
from .factscore import AliasLinker
from .gateway import Gateway
from .selection import tokenize

BLEU_EPSILON = 1e-9


@dataclass(frozen=True)
class MetricRow:
    response_id: str
    bleu4: float | None
    rouge_l: float | None
    entity_f1: float | None
    ppl: float | None


@dataclass(frozen=True)
class LabelPair:
    annotator_a: tuple[str, ...]
    annotator_b: tuple[str, ...]

    def __post_init__(self):
        if len(self.annotator_a) != len(self.annotator_b):
            raise ValueError("annotator label lists differ in length")
        if not self.annotator_a:
            raise ValueError("label lists are empty")


def _ngrams(tokens: list[str], n: int) -> Counter:
    return Counter(tuple(tokens[i : i + n]) for i in range(len(tokens) - n + 1))


def bleu4(hypothesis: str, reference: str) -> float:
    """Sentence BLEU, n = 1..4, brevity penalty, add-epsilon smoothing."""
    hyp = tokenize(hypothesis)
    ref = tokenize(reference)
    if not hyp:
        return 0.0
    log_sum = 0.0
    for n in range(1, 5):
        hyp_ngrams = _ngrams(hyp, n)
        ref_ngrams = _ngrams(ref, n)
        total = sum(hyp_ngrams.values())
        clipped = sum(min(c, ref_ngrams[g]) for g, c in hyp_ngrams.items())
        precision = clipped / total if total > 0 else 0.0
        log_sum += 0.25 * math.log(precision if precision > 0.0 else BLEU_EPSILON)
    bp = 1.0 if len(hyp) >= len(ref) else math.exp(1.0 - len(ref) / len(hyp))
    return bp * math.exp(log_sum)


def _lcs_length(a: list[str], b: list[str]) -> int:
    prev = [0] * (len(b) + 1)
    for x in a:
        cur = [0]
        for j, y in enumerate(b, start=1):
            cur.append(prev[j - 1] + 1 if x == y else max(prev[j], cur[j - 1]))
        prev = cur
    return prev[-1]


def rouge_l(hypothesis: str, reference: str) -> float:
    """LCS-based F score over tokens (beta = 1)."""
    hyp = tokenize(hypothesis)
    ref = tokenize(reference)
    if not hyp or not ref:
        return 0.0
    lcs = _lcs_length(hyp, ref)
    if lcs == 0:
        return 0.0
    p = lcs / len(hyp)
    r = lcs / len(ref)
    return 2 * p * r / (p + r)


def entity_f1(linker: AliasLinker, hypothesis: str, reference: str) -> float:
    """F1 over alias-linked entity sets. Both empty -> 1.0, one empty -> 0.0."""
    e_hyp = set(linker.link(hypothesis))
    e_ref = set(linker.link(reference))
    if not e_hyp and not e_ref:
        return 1.0
    if not e_hyp or not e_ref:
        return 0.0
    overlap = len(e_hyp & e_ref)
    if overlap == 0:
        return 0.0
    p = overlap / len(e_hyp)
    r = overlap / len(e_ref)
    return 2 * p * r / (p + r)


def perplexity(gw: Gateway, text: str) -> float:
    """exp(-mean token logprob) under the gateway's scoring model."""
    if not text:
        raise ValueError("text must be non-empty")
    scored = gw.logprobs(text)
    if not scored:
        raise Unsupported("scoring model returned no tokens")
    mean = sum(lp for _, lp in scored) / len(scored)
    return math.exp(-mean)


def raw_agreement(p: LabelPair) -> float:
    equal = sum(1 for a, b in zip(p.annotator_a, p.annotator_b) if a == b)
    return equal / len(p.annotator_a)


def cohen_kappa(p: LabelPair) -> float:
    """kappa = (p_o - p_e) / (1 - p_e) with the degenerate p_e = 1 case pinned
    to 1.0 when observed agreement is perfect, else 0.0."""
    n = len(p.annotator_a)
    p_o = raw_agreement(p)
    freq_a = Counter(p.annotator_a)
    freq_b = Counter(p.annotator_b)
    p_e = sum(freq_a[c] * freq_b.get(c, 0) for c in freq_a) / (n * n)
    if p_e == 1.0:
        return 1.0 if p_o == 1.0 else 0.0
    return (p_o - p_e) / (1.0 - p_e)
