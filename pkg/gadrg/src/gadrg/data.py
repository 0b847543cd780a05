"""Readers for the companion toolkit's file formats.

These parse files only; the generator shares no code with the producer.

    corpus line        {"id", "turns": [{"speaker", "text"}], "reference"?, "triples": [[s,p,o], ...]}
    sense-graph line   {"dialogue_id", "variant", "n", "triples": [{"s","p","o","score"}, ...]}
    response line      {"dialogue_id", "method", "text"}   (what we emit)
"""

from __future__ import annotations

import json
from dataclasses import dataclass


@dataclass(frozen=True)
class CorpusEntry:
    dialogue_id: str
    turns: list[tuple[str, str]]  # (speaker, text)
    reference: str | None

    def dialogue_text(self) -> str:
        return "\n".join(f"Speaker {speaker}: {text}" for speaker, text in self.turns)


@dataclass(frozen=True)
class SenseGraphEntry:
    dialogue_id: str
    variant: str
    triples: list[tuple[str, str, str, float]]

    def node_labels_and_edges(self) -> tuple[list[str], list[tuple[int, int]], list[str]]:
        """Unique node labels in first-occurrence order plus index edges."""
        labels: list[str] = []
        index: dict[str, int] = {}
        edges: list[tuple[int, int]] = []
        predicates: list[str] = []
        for s, p, o, _ in self.triples:
            for label in (s, o):
                if label not in index:
                    index[label] = len(labels)
                    labels.append(label)
            edges.append((index[s], index[o]))
            predicates.append(p)
        return labels, edges, predicates


def load_corpus(path) -> list[CorpusEntry]:
    entries = []
    with open(path, encoding="utf-8") as f:
        for line in f:
            if not line.strip():
                continue
            obj = json.loads(line)
            entries.append(
                CorpusEntry(
                    dialogue_id=obj["id"],
                    turns=[(t["speaker"], t["text"]) for t in obj["turns"]],
                    reference=obj.get("reference"),
                )
            )
    return entries


def load_sense_graphs(path) -> list[SenseGraphEntry]:
    entries = []
    with open(path, encoding="utf-8") as f:
        for line in f:
            if not line.strip():
                continue
            obj = json.loads(line)
            entries.append(
                SenseGraphEntry(
                    dialogue_id=obj["dialogue_id"],
                    variant=obj["variant"],
                    triples=[
                        (t["s"], t["p"], t["o"], float(t["score"])) for t in obj["triples"]
                    ],
                )
            )
    return entries


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
