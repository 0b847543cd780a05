"""Dialogue reformulation and knowledge-grounded response generation.

Two variants of the textualized-graph pipeline:

* NR -- select triples against the original dialogue, generate from it.
* R  -- reformulate first (step-by-step coreference resolution), select
        against the resolved dialogue, generate from it.

Reformulation replies are expected to follow the prompt's output format,
with a ``**Resolved Dialogue**:`` section of ``Speaker A:`` / ``Speaker B:``
lines. Any reply we cannot parse falls back to the original turns (flagged,
never fatal): every dialogue must end up with a response to evaluate.
"""

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

from .corpus import Dialogue, DialogueSenseGraph, Response, Speaker, Utterance, Variant
from .errors import FactDialError, FatalConfig
from .gateway import Gateway
from .prompts import TemplateName, render
from .selection import (
    Scorer,
    SelectionConfig,
    score_bm25,
    score_embedding,
    score_llm,
    select_top_n,
)

logger = logging.getLogger(__name__)

RESOLVED_MARKER = "**Resolved Dialogue**:"
COT_MARKER = "**Chain of Thought**:"


@dataclass(frozen=True)
class ReformulatedDialogue:
    original: Dialogue
    resolved_turns: tuple[Utterance, ...]
    chain_of_thought: str
    fallback_used: bool

    def resolved_history_text(self) -> str:
        return "\n".join(f"Speaker {u.speaker.value}: {u.text}" for u in self.resolved_turns)

    def resolved_context_text(self) -> str:
        return "\n".join(
            f"Speaker {u.speaker.value}: {u.text}" for u in self.resolved_turns[:-1]
        )


@dataclass
class RunConfig:
    variant: str  # "nr" | "r"
    selection: SelectionConfig
    output_path: str
    method_tag: str = ""

    def __post_init__(self):
        if self.variant not in ("nr", "r"):
            raise ValueError(f"unknown variant {self.variant!r}")
        if not self.method_tag:
            self.method_tag = f"tg-drg-{self.variant}"


def parse_resolved_dialogue(reply: str) -> tuple[list[Utterance], str] | None:
    """Extract (turns, chain_of_thought) from a reformulation reply, or None."""
    if RESOLVED_MARKER not in reply:
        return None
    before, _, resolved = reply.partition(RESOLVED_MARKER)
    cot = ""
    if COT_MARKER in before:
        cot = before.split(COT_MARKER, 1)[1].strip()
    turns: list[Utterance] = []
    current: tuple[Speaker, list[str]] | None = None
    for line in resolved.splitlines():
        stripped = line.strip()
        speaker = None
        if stripped.startswith("Speaker A:"):
            speaker = Speaker.A
        elif stripped.startswith("Speaker B:"):
            speaker = Speaker.B
        if speaker is not None:
            if current is not None:
                turns.append(_finish_turn(current))
            current = (speaker, [stripped.split(":", 1)[1].strip()])
        elif current is not None and stripped:
            current[1].append(stripped)
    if current is not None:
        turns.append(_finish_turn(current))
    if not turns or any(not u.text for u in turns):
        return None
    return turns, cot


def _finish_turn(acc: tuple[Speaker, list[str]]) -> Utterance:
    speaker, lines = acc
    return Utterance(speaker=speaker, text=" ".join(x for x in lines if x))


def reformulate(gw: Gateway, d: Dialogue) -> ReformulatedDialogue:
    """Resolve coreferences via the reformulation prompt; fall back on parse failure."""
    reply = gw.chat_text(render(TemplateName.REFORMULATE, {"Dialogue": d.history_text()}))
    parsed = parse_resolved_dialogue(reply)
    if parsed is not None:
        turns, cot = parsed
        if len(turns) == len(d.turns):
            return ReformulatedDialogue(
                original=d,
                resolved_turns=tuple(turns),
                chain_of_thought=cot,
                fallback_used=False,
            )
        logger.warning(
            "reformulation of %s returned %d turns (expected %d); keeping original",
            d.id, len(turns), len(d.turns),
        )
    else:
        logger.warning("reformulation of %s had no parseable resolved dialogue", d.id)
    return ReformulatedDialogue(
        original=d, resolved_turns=d.turns, chain_of_thought="", fallback_used=True
    )


def generate_response(
    gw: Gateway,
    d_or_ref: Dialogue | ReformulatedDialogue,
    sense_graph: DialogueSenseGraph,
    method: str = "tg-drg-nr",
) -> Response:
    """Render the generation prompt from the (possibly resolved) dialogue and call the model."""
    from .corpus import textualize_graph

    if isinstance(d_or_ref, ReformulatedDialogue):
        dialogue_id = d_or_ref.original.id
        context = d_or_ref.resolved_context_text()
        last = d_or_ref.resolved_turns[-1].text
    else:
        dialogue_id = d_or_ref.id
        context = d_or_ref.context_text()
        last = d_or_ref.last_utterance.text
    if sense_graph.dialogue_id and sense_graph.dialogue_id != dialogue_id:
        raise ValueError(
            f"sense graph for {sense_graph.dialogue_id!r} used with dialogue {dialogue_id!r}"
        )
    prompt = render(
        TemplateName.GENERATE,
        {
            "Selected Triples": textualize_graph(sense_graph),
            "Dialogue Context": context,
            "Last Utterance": last,
        },
    )
    text = gw.chat_text(prompt)
    return Response(dialogue_id=dialogue_id, method=method, text=text)


def score_pool(gw: Gateway, cfg: SelectionConfig, dialogue_text: str, last_utterance: str, pool):
    """Dispatch to the configured scorer. BM25 queries with the last utterance;
    the semantic scorers see the whole dialogue."""
    pool = list(pool)
    if cfg.scorer is Scorer.BM25:
        return score_bm25(last_utterance, pool, cfg.bm25)
    if cfg.scorer is Scorer.EMBEDDING:
        return score_embedding(gw, dialogue_text, pool)
    return score_llm(gw, dialogue_text, pool)


def build_sense_graph(
    gw: Gateway,
    cfg: SelectionConfig,
    d: Dialogue | ReformulatedDialogue,
) -> DialogueSenseGraph:
    if isinstance(d, ReformulatedDialogue):
        dialogue_id = d.original.id
        history = d.resolved_history_text()
        last = d.resolved_turns[-1].text
        pool = d.original.triples
        variant = Variant.REFORMULATED
    else:
        dialogue_id = d.id
        history = d.history_text()
        last = d.last_utterance.text
        pool = d.triples
        variant = Variant.ORIGINAL
    if not pool:
        return DialogueSenseGraph(dialogue_id=dialogue_id, variant=variant, triples=(), n=cfg.n)
    scored = score_pool(gw, cfg, history, last, pool)
    return select_top_n(scored, cfg.n, dialogue_id=dialogue_id, variant=variant)


@dataclass
class ItemError:
    dialogue_id: str
    stage: str
    message: str


@dataclass
class RunOutcome:
    responses: list[Response] = field(default_factory=list)
    errors: list[ItemError] = field(default_factory=list)


def run(corpus: list[Dialogue], gw: Gateway, cfg: RunConfig) -> RunOutcome:
    """Process the whole corpus; responses keep corpus order, failures are
    collected per item instead of aborting the batch."""
    if not corpus:
        raise ValueError("corpus is empty")
    if not gw.probe():
        raise FatalConfig(f"gateway unreachable at {gw.cfg.base_url}")

    def process(d: Dialogue):
        if cfg.variant == "r":
            ref = reformulate(gw, d)
            graph = build_sense_graph(gw, cfg.selection, ref)
            return generate_response(gw, ref, graph, method=cfg.method_tag)
        graph = build_sense_graph(gw, cfg.selection, d)
        return generate_response(gw, d, graph, method=cfg.method_tag)

    outcome = RunOutcome()
    with ThreadPoolExecutor(max_workers=gw.cfg.parallelism) as pool:
        futures = [(d, pool.submit(process, d)) for d in corpus]
        for d, fut in futures:
            try:
                outcome.responses.append(fut.result())
            except FactDialError as e:
                logger.warning("dialogue %s failed: %s", d.id, e)
                outcome.errors.append(ItemError(dialogue_id=d.id, stage="pipeline", message=str(e)))

    from .corpus import save_responses

    save_responses(outcome.responses, cfg.output_path)
    return outcome
