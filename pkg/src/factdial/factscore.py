"""Dialogue fact score and NEIP.

A response is split into atomic facts; each fact is verified against local
snapshot passages plus the dialogue history, with three possible verdicts:
True, False, or Not Enough Information (the last covering opinions,
non-claims, and evidence-free content). Per response:

    fact_score = |True| / (|True| + |False|)   (undefined when no verifiable facts)
    neip       = |NotEnoughInfo| / |verdicts|

Corpus-level numbers are macro averages over responses, computed with exact
rational arithmetic and reported as percentages with two decimals.
"""

from __future__ import annotations

import logging
import re
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from enum import Enum
from fractions import Fraction

from .corpus import Dialogue, KnowledgeSnapshot, normalize_title
from .errors import EmptyVerdicts, NoDefinedScores
from .gateway import Gateway
from .prompts import TemplateName, render

logger = logging.getLogger(__name__)


class Label(str, Enum):
    TRUE = "True"
    FALSE = "False"
    NOT_ENOUGH_INFO = "NotEnoughInfo"


@dataclass(frozen=True)
class AtomicFact:
    response_id: str
    index: int
    text: str

    def __post_init__(self):
        if not self.text.strip():
            raise ValueError("atomic fact text is empty")


@dataclass(frozen=True)
class Verdict:
    fact: AtomicFact
    label: Label
    evidence_titles: tuple[str, ...] = ()


@dataclass(frozen=True)
class FactReport:
    response_id: str
    verdicts: tuple[Verdict, ...]
    fact_score: float | None
    neip: float


_ENUMERATION = re.compile(r"^\s*(?:\d+[.)]\s*|[-*]\s+)")


def split_atomic(gw: Gateway, response_id: str, response_text: str) -> list[AtomicFact]:
    """Split a response into atomic facts via the splitting prompt.

    One fact per non-empty reply line, leading enumeration stripped. A blank
    reply falls back to the whole response as a single fact.
    """
    if not response_text.strip():
        raise ValueError("response text is empty")
    reply = gw.chat_text(render(TemplateName.ATOMIC_SPLIT, {"Response": response_text}))
    facts = []
    for line in reply.splitlines():
        text = _ENUMERATION.sub("", line).strip()
        if text:
            facts.append(text)
    if not facts:
        logger.warning("atomic split of %s produced nothing; using the whole response", response_id)
        facts = [response_text.strip()]
    return [AtomicFact(response_id=response_id, index=i, text=t) for i, t in enumerate(facts)]


def _match_words(text: str) -> list[str]:
    """Normalized words with non-alphanumeric edges trimmed (inner chars kept,
    so "bug's" survives while "life." matches "life")."""
    words = []
    for w in normalize_title(text).split():
        w = w.strip("'\".,;:!?()[]{}")
        if w:
            words.append(w)
    return words


class AliasLinker:
    """Longest-match alias scanner over snapshot titles and graph node labels."""

    def __init__(self, snapshot: KnowledgeSnapshot | None = None, extra_labels=()):
        self._aliases: dict[tuple[str, ...], str] = {}
        titles = snapshot.titles() if snapshot is not None else []
        for label in list(titles) + list(extra_labels):
            key = tuple(_match_words(label))
            if key and key not in self._aliases:
                self._aliases[key] = label
        self._max_len = max((len(k) for k in self._aliases), default=0)

    def __len__(self) -> int:
        return len(self._aliases)

    def link(self, text: str) -> list[str]:
        """Canonical labels found in the text, longest match first at each
        position, each label reported once in order of first occurrence."""
        words = _match_words(text)
        found: list[str] = []
        seen: set[str] = set()
        i = 0
        while i < len(words):
            matched = 0
            for length in range(min(self._max_len, len(words) - i), 0, -1):
                candidate = tuple(words[i : i + length])
                label = self._aliases.get(candidate)
                if label is not None:
                    if label not in seen:
                        seen.add(label)
                        found.append(label)
                    matched = length
                    break
            i += matched if matched else 1
        return found


def link_entities(linker: AliasLinker, text: str) -> list[str]:
    return linker.link(text)


def retrieve_evidence(snapshot: KnowledgeSnapshot, titles) -> tuple[str, list[str]]:
    """Concatenated passages for the given titles (each prefixed "Title: ..."),
    missing titles skipped, duplicates included once. Also returns the
    canonical titles that contributed."""
    parts: list[str] = []
    used: list[str] = []
    seen: set[str] = set()
    for title in titles:
        hit = snapshot.lookup(title)
        if hit is None:
            continue
        canonical, passage = hit
        if canonical in seen:
            continue
        seen.add(canonical)
        used.append(canonical)
        parts.append(f"Title: {canonical}\n{passage}")
    return "\n".join(parts), used


_NEI_PATTERNS = ("not enough information", "no enough information")


def parse_verdict(reply: str) -> Label | None:
    """Earliest occurrence of true/false/not-enough-information wins."""
    lowered = reply.lower()
    hits: list[tuple[int, Label]] = []
    for pattern in _NEI_PATTERNS:
        pos = lowered.find(pattern)
        if pos >= 0:
            hits.append((pos, Label.NOT_ENOUGH_INFO))
    for pattern, label in (("true", Label.TRUE), ("false", Label.FALSE)):
        pos = lowered.find(pattern)
        if pos >= 0:
            hits.append((pos, label))
    if not hits:
        return None
    return min(hits, key=lambda h: h[0])[1]


def verify(
    gw: Gateway,
    fact: AtomicFact,
    evidence: str,
    dialogue: Dialogue,
    evidence_titles=(),
) -> Verdict:
    """Three-way verification of one atomic fact against evidence + history.

    Unrecognized replies become NotEnoughInfo with a warning: the prompt
    itself labels unverifiable content that way.
    """
    prompt = render(
        TemplateName.VERIFY,
        {
            "Wikipedia Passages": evidence,
            "Dialogue": dialogue.history_text(),
            "Speaker": f"Speaker {dialogue.responder.value}",
            "Atomic Fact": fact.text,
        },
    )
    reply = gw.chat_text(prompt)
    label = parse_verdict(reply)
    if label is None:
        logger.warning("unparseable verification reply %r; labeling NotEnoughInfo", reply[:80])
        label = Label.NOT_ENOUGH_INFO
    return Verdict(fact=fact, label=label, evidence_titles=tuple(evidence_titles))


def aggregate(verdicts) -> tuple[float | None, float]:
    """(fact_score, neip) for one response's verdicts."""
    verdicts = list(verdicts)
    if not verdicts:
        raise EmptyVerdicts("no verdicts to aggregate")
    n_true = sum(1 for v in verdicts if v.label is Label.TRUE)
    n_false = sum(1 for v in verdicts if v.label is Label.FALSE)
    n_nei = sum(1 for v in verdicts if v.label is Label.NOT_ENOUGH_INFO)
    fact = n_true / (n_true + n_false) if (n_true + n_false) > 0 else None
    return fact, n_nei / len(verdicts)


def score_response(
    gw: Gateway,
    snapshot: KnowledgeSnapshot,
    linker: AliasLinker,
    dialogue: Dialogue,
    response_id: str,
    response_text: str,
) -> FactReport:
    """Full per-response scoring: split, link, retrieve, verify, aggregate.

    Evidence titles come from entities linked in the atomic fact and in the
    dialogue history; verification always sees the ORIGINAL dialogue, never
    the system's own reformulation.
    """
    facts = split_atomic(gw, response_id, response_text)
    dialogue_titles = linker.link(dialogue.history_text())

    def judge(fact: AtomicFact) -> Verdict:
        titles = linker.link(fact.text)
        titles += [t for t in dialogue_titles if t not in titles]
        evidence, used = retrieve_evidence(snapshot, titles)
        return verify(gw, fact, evidence, dialogue, evidence_titles=used)

    with ThreadPoolExecutor(max_workers=gw.cfg.parallelism) as pool:
        verdicts = tuple(pool.map(judge, facts))
    fact_score, neip = aggregate(verdicts)
    return FactReport(
        response_id=response_id, verdicts=verdicts, fact_score=fact_score, neip=neip
    )


def corpus_fact(reports) -> tuple[float, float]:
    """Macro-averaged (fact, neip) percentages, two decimals, exact arithmetic.

    Responses whose fact score is undefined are excluded from the fact mean
    but still count toward the NEIP mean.
    """
    reports = list(reports)
    if not reports:
        raise EmptyVerdicts("no reports")
    fact_terms: list[Fraction] = []
    neip_terms: list[Fraction] = []
    for r in reports:
        n_true = sum(1 for v in r.verdicts if v.label is Label.TRUE)
        n_false = sum(1 for v in r.verdicts if v.label is Label.FALSE)
        n_nei = sum(1 for v in r.verdicts if v.label is Label.NOT_ENOUGH_INFO)
        total = len(r.verdicts)
        if n_true + n_false > 0:
            fact_terms.append(Fraction(n_true, n_true + n_false))
        neip_terms.append(Fraction(n_nei, total) if total else Fraction(0))
    if not fact_terms:
        raise NoDefinedScores("every response had an undefined fact score")
    mean_fact = sum(fact_terms, Fraction(0)) / len(fact_terms) * 100
    mean_neip = sum(neip_terms, Fraction(0)) / len(neip_terms) * 100
    return round(float(mean_fact), 2), round(float(mean_neip), 2)
