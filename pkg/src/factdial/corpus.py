"""Core domain types, corpus and knowledge-snapshot file formats, triple textualization.

File formats are line-delimited JSON (UTF-8, one object per line):

    corpus line    {"id": ..., "turns": [{"speaker": "A"|"B", "text": ...}, ...],
                    "reference": ...?, "triples": [[s, p, o], ...]}
    snapshot line  {"title": ..., "passage": ...}
    sense-graph export line
                   {"dialogue_id": ..., "variant": "original"|"reformulated",
                    "n": ..., "triples": [{"s": ..., "p": ..., "o": ..., "score": ...}, ...]}
    response line  {"dialogue_id": ..., "method": ..., "text": ...}
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from enum import Enum

from .errors import DuplicateId, MalformedRecord


class Speaker(str, Enum):
    A = "A"
    B = "B"


class Variant(str, Enum):
    ORIGINAL = "original"
    REFORMULATED = "reformulated"


@dataclass(frozen=True)
class Utterance:
    speaker: Speaker
    text: str

    def __post_init__(self):
        if not self.text.strip():
            raise ValueError("utterance text is empty")


@dataclass(frozen=True)
class Triple:
    subject: str
    predicate: str
    object: str

    def __post_init__(self):
        for part in (self.subject, self.predicate, self.object):
            if not part.strip():
                raise ValueError(f"triple has an empty field: {self!r}")


@dataclass(frozen=True)
class Dialogue:
    id: str
    turns: tuple[Utterance, ...]
    reference: str | None = None
    triples: tuple[Triple, ...] = ()

    def __post_init__(self):
        if not self.turns:
            raise ValueError(f"dialogue {self.id!r} has no turns")

    @property
    def last_utterance(self) -> Utterance:
        return self.turns[-1]

    @property
    def responder(self) -> Speaker:
        """The speaker expected to produce the next turn."""
        return Speaker.B if self.turns[-1].speaker is Speaker.A else Speaker.A

    def history_text(self) -> str:
        """All turns as 'Speaker X: ...' lines, one per turn."""
        return "\n".join(f"Speaker {u.speaker.value}: {u.text}" for u in self.turns)

    def context_text(self) -> str:
        """Every turn except the last, same line format as history_text."""
        return "\n".join(f"Speaker {u.speaker.value}: {u.text}" for u in self.turns[:-1])


@dataclass(frozen=True)
class KnowledgeGraph:
    nodes: frozenset[str]
    edges: tuple[Triple, ...]

    @classmethod
    def from_triples(cls, triples) -> "KnowledgeGraph":
        edges = tuple(triples)
        seen = set()
        for t in edges:
            key = (t.subject, t.predicate, t.object)
            if key in seen:
                raise ValueError(f"duplicate edge: {key}")
            seen.add(key)
        nodes = frozenset(x for t in edges for x in (t.subject, t.object))
        return cls(nodes=nodes, edges=edges)


@dataclass(frozen=True)
class DialogueSenseGraph:
    """Top-N dialogue-relevant triples with their selection scores, best first."""

    dialogue_id: str
    variant: Variant
    triples: tuple[tuple[Triple, float], ...]
    n: int

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("n must be positive")
        if len(self.triples) > self.n:
            raise ValueError("sense graph holds more triples than its n")


@dataclass(frozen=True)
class Response:
    dialogue_id: str
    method: str
    text: str


class KnowledgeSnapshot:
    """Title -> passage store with case-insensitive, whitespace-insensitive lookup."""

    def __init__(self, entries: dict[str, str]):
        self._titles: dict[str, str] = {}   # normalized -> canonical title
        self._passages: dict[str, str] = {}  # canonical title -> passage
        for title, passage in entries.items():
            key = normalize_title(title)
            if key in self._titles:
                raise ValueError(f"duplicate snapshot title: {title!r}")
            self._titles[key] = title
            self._passages[title] = passage

    def __len__(self) -> int:
        return len(self._passages)

    def titles(self) -> list[str]:
        return list(self._passages)

    def lookup(self, title: str) -> tuple[str, str] | None:
        """Return (canonical title, passage) or None."""
        canonical = self._titles.get(normalize_title(title))
        if canonical is None:
            return None
        return canonical, self._passages[canonical]


def normalize_title(s: str) -> str:
    """Lowercase and collapse runs of whitespace to single spaces."""
    return " ".join(s.lower().split())


def textualize_triple(t: Triple) -> str:
    return f"({t.subject}, {t.predicate}, {t.object})"


def textualize_graph(g: DialogueSenseGraph) -> str:
    """The sense graph as space-joined triple strings, in stored order."""
    return " ".join(textualize_triple(t) for t, _ in g.triples)


def _parse_dialogue(obj: dict, line_no: int) -> Dialogue:
    if not isinstance(obj, dict):
        raise MalformedRecord(line_no, "record is not an object")
    try:
        raw_id = obj["id"]
        raw_turns = obj["turns"]
    except KeyError as e:
        raise MalformedRecord(line_no, f"missing field {e.args[0]!r}") from None
    if not isinstance(raw_id, str) or not raw_id:
        raise MalformedRecord(line_no, "id must be a non-empty string")
    if not isinstance(raw_turns, list) or not raw_turns:
        raise MalformedRecord(line_no, "turns must be a non-empty list")
    try:
        turns = tuple(
            Utterance(speaker=Speaker(t["speaker"]), text=t["text"]) for t in raw_turns
        )
        triples = tuple(Triple(*item) for item in obj.get("triples", []))
    except (KeyError, TypeError, ValueError) as e:
        raise MalformedRecord(line_no, str(e)) from None
    seen = set()
    for t in triples:
        key = (t.subject, t.predicate, t.object)
        if key in seen:
            raise MalformedRecord(line_no, f"duplicate triple {key}")
        seen.add(key)
    reference = obj.get("reference")
    if reference is not None and not isinstance(reference, str):
        raise MalformedRecord(line_no, "reference must be a string")
    return Dialogue(id=raw_id, turns=turns, reference=reference, triples=triples)


def load_dialogue_corpus(path) -> list[Dialogue]:
    """Load a line-delimited JSON corpus, preserving file order.

    Raises MalformedRecord (with its 1-based line number) on any schema
    violation and DuplicateId on repeated ids.
    """
    dialogues: list[Dialogue] = []
    ids = set()
    with open(path, encoding="utf-8") as f:
        for line_no, line in enumerate(f, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as e:
                raise MalformedRecord(line_no, f"invalid JSON: {e.msg}") from None
            d = _parse_dialogue(obj, line_no)
            if d.id in ids:
                raise DuplicateId(d.id)
            ids.add(d.id)
            dialogues.append(d)
    return dialogues


def save_dialogue_corpus(dialogues, path) -> None:
    with open(path, "w", encoding="utf-8") as f:
        for d in dialogues:
            obj = {
                "id": d.id,
                "turns": [{"speaker": u.speaker.value, "text": u.text} for u in d.turns],
                "triples": [[t.subject, t.predicate, t.object] for t in d.triples],
            }
            if d.reference is not None:
                obj["reference"] = d.reference
            f.write(json.dumps(obj, ensure_ascii=False) + "\n")


def load_snapshot(path) -> KnowledgeSnapshot:
    """Load a {title, passage} line-delimited JSON snapshot."""
    entries: dict[str, str] = {}
    with open(path, encoding="utf-8") as f:
        for line_no, line in enumerate(f, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
                title, passage = obj["title"], obj["passage"]
            except (json.JSONDecodeError, KeyError, TypeError) as e:
                raise MalformedRecord(line_no, str(e)) from None
            if title in entries:
                raise MalformedRecord(line_no, f"duplicate title {title!r}")
            entries[title] = passage
    return KnowledgeSnapshot(entries)


def save_sense_graphs(graphs, path) -> None:
    with open(path, "w", encoding="utf-8") as f:
        for g in graphs:
            obj = {
                "dialogue_id": g.dialogue_id,
                "variant": g.variant.value,
                "n": g.n,
                "triples": [
                    {"s": t.subject, "p": t.predicate, "o": t.object, "score": score}
                    for t, score in g.triples
                ],
            }
            f.write(json.dumps(obj, ensure_ascii=False) + "\n")


def load_sense_graphs(path) -> list[DialogueSenseGraph]:
    graphs: list[DialogueSenseGraph] = []
    with open(path, encoding="utf-8") as f:
        for line_no, line in enumerate(f, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
                triples = tuple(
                    (Triple(item["s"], item["p"], item["o"]), float(item["score"]))
                    for item in obj["triples"]
                )
                graphs.append(
                    DialogueSenseGraph(
                        dialogue_id=obj["dialogue_id"],
                        variant=Variant(obj["variant"]),
                        triples=triples,
                        n=int(obj["n"]),
                    )
                )
            except (json.JSONDecodeError, KeyError, TypeError, ValueError) as e:
                raise MalformedRecord(line_no, str(e)) from None
    return graphs


def save_responses(responses, path) -> None:
    with open(path, "w", encoding="utf-8") as f:
        for r in responses:
            f.write(
                json.dumps(
                    {"dialogue_id": r.dialogue_id, "method": r.method, "text": r.text},
                    ensure_ascii=False,
                )
                + "\n"
            )


def load_responses(path) -> list[Response]:
    responses: list[Response] = []
    with open(path, encoding="utf-8") as f:
        for line_no, line in enumerate(f, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
                responses.append(
                    Response(
                        dialogue_id=obj["dialogue_id"],
                        method=obj["method"],
                        text=obj["text"],
                    )
                )
            except (json.JSONDecodeError, KeyError, TypeError) as e:
                raise MalformedRecord(line_no, str(e)) from None
    return responses
