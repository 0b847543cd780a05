"""Command-line entry point: train on (corpus, sense-graph) pairs, then
generate responses in the companion toolkit's response-file format."""

from __future__ import annotations

import argparse
import sys

import torch

from .data import load_corpus, load_sense_graphs, save_responses
from .model import GaDrgModel, GeneratedResponse
from .train import (
    NonFiniteLoss,
    init_train_state,
    load_checkpoint,
    save_checkpoint,
    target_ids,
    train_step,
)


def _paired_batches(model: GaDrgModel, corpus_path, graphs_path, use_reformulated_text=False):
    corpus = {e.dialogue_id: e for e in load_corpus(corpus_path)}
    pairs = []
    for graph in load_sense_graphs(graphs_path):
        entry = corpus.get(graph.dialogue_id)
        if entry is None or not graph.triples:
            continue
        labels, edges, predicates = graph.node_labels_and_edges()
        batch = model.graph_batch(labels, edges, predicates)
        pairs.append((entry, batch))
    return pairs


def cmd_train(args) -> int:
    torch.manual_seed(args.seed)
    state = init_train_state(seed=args.seed, lr=args.lr)
    pairs = _paired_batches(state.model, args.corpus, args.graphs)
    trainable = [
        (entry, batch, target_ids(entry.reference))
        for entry, batch in pairs
        if entry.reference
    ]
    if not trainable:
        print("error: no (dialogue, graph, reference) triples to train on", file=sys.stderr)
        return 2
    for epoch in range(args.epochs):
        for entry, batch, target in trainable:
            try:
                state, loss = train_step(state, batch, entry.dialogue_text(), target)
            except NonFiniteLoss as e:
                print(f"error: {e}", file=sys.stderr)
                return 2
        print(f"epoch {epoch}: loss {loss:.4f}", file=sys.stderr)
    save_checkpoint(state, args.out)
    print(f"checkpoint written to {args.out}", file=sys.stderr)
    return 0


def _resolved_texts(path) -> dict[str, str]:
    """dialogue_id -> resolved dialogue text from an upstream reformulation file."""
    import json

    texts = {}
    with open(path, encoding="utf-8") as f:
        for line in f:
            if not line.strip():
                continue
            obj = json.loads(line)
            texts[obj["dialogue_id"]] = "\n".join(
                f"Speaker {t['speaker']}: {t['text']}" for t in obj["turns"]
            )
    return texts


def cmd_generate(args) -> int:
    torch.manual_seed(args.seed)
    if args.ckpt:
        state = load_checkpoint(args.ckpt)
        model = state.model
    else:
        model = GaDrgModel.build(seed=args.seed)
    pairs = _paired_batches(model, args.corpus, args.graphs)
    resolved = _resolved_texts(args.reformulated) if args.reformulated else {}
    responses = []
    for entry, batch in pairs:
        prompt = model.soft_prompt(batch)
        text_in = resolved.get(entry.dialogue_id, entry.dialogue_text())
        responses.append(
            model.generate(
                prompt,
                text_in,
                dialogue_id=entry.dialogue_id,
                max_new_tokens=args.max_new_tokens,
            )
        )
    # dialogues whose sense graph came back empty still need a response record
    covered = {r.dialogue_id for r in responses}
    for entry in load_corpus(args.corpus):
        if entry.dialogue_id not in covered:
            plain = model.generate(
                None, entry.dialogue_text(), dialogue_id=entry.dialogue_id,
                max_new_tokens=args.max_new_tokens,
            )
            responses.append(plain)
    order = {e.dialogue_id: i for i, e in enumerate(load_corpus(args.corpus))}
    responses.sort(key=lambda r: order.get(r.dialogue_id, len(order)))
    save_responses(responses, args.out)
    print(f"{len(responses)} responses written to {args.out}", file=sys.stderr)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="gadrg", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train")
    p.add_argument("--corpus", required=True)
    p.add_argument("--graphs", required=True, help="sense-graph export file")
    p.add_argument("--out", required=True, help="checkpoint path")
    p.add_argument("--epochs", type=int, default=20)
    p.add_argument("--lr", type=float, default=2e-2)
    p.add_argument("--seed", type=int, default=0)

    p = sub.add_parser("generate")
    p.add_argument("--corpus", required=True)
    p.add_argument("--graphs", required=True)
    p.add_argument("--out", required=True, help="response file to write")
    p.add_argument("--ckpt", help="checkpoint from train; fresh weights if omitted")
    p.add_argument("--max-new-tokens", type=int, default=64)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument(
        "--reformulated",
        help="reformulation file from the upstream pipeline; when given, its "
        "resolved dialogue text is fed to the text embedding instead of the "
        "original turns",
    )
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "train":
        return cmd_train(args)
    return cmd_generate(args)


if __name__ == "__main__":
    sys.exit(main())
