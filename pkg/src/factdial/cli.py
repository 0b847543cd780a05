"""Command-line entry point.

Subcommands mirror the pipeline stages so a full run can be reproduced step
by step; ``run-all`` is literally the composition of the individual stages
over the same config. Exit codes: 0 success (per-item failures are collected
and summarized, not fatal), 1 usage error, 2 fatal config/IO error. All
diagnostics go to stderr; data goes to files or stdout.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import random
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

from .corpus import (
    Dialogue,
    DialogueSenseGraph,
    Speaker,
    Utterance,
    load_dialogue_corpus,
    load_responses,
    load_sense_graphs,
    load_snapshot,
    save_responses,
    save_sense_graphs,
)
from .errors import FactDialError, FatalConfig, GatewayError, Unsupported
from .factscore import AliasLinker, corpus_fact, score_response
from .gateway import Gateway, GatewayConfig
from .metrics import (
    LabelPair,
    MetricRow,
    bleu4,
    cohen_kappa,
    entity_f1,
    perplexity,
    raw_agreement,
    rouge_l,
)
from .mock import MockEngine
from .mockserver import serve_forever
from .pcst import assign_prizes, solve_pcst
from .pipeline import ReformulatedDialogue, build_sense_graph, generate_response, reformulate
from .selection import Bm25Params, Scorer, ScoredTriple, SelectionConfig

logger = logging.getLogger("factdial")

REFORMULATED_FILE = "reformulated.jsonl"
SENSE_GRAPH_FILE = "sense_graphs.jsonl"
RESPONSES_FILE = "responses.jsonl"
FACTSCORE_FILE = "factscore.jsonl"
FACTSCORE_SUMMARY_FILE = "factscore_summary.json"
METRICS_FILE = "metrics.jsonl"
METRICS_SUMMARY_FILE = "metrics_summary.json"


@dataclass
class AppConfig:
    gateway: GatewayConfig
    selection: SelectionConfig
    corpus: str = ""
    snapshot: str = ""
    out_dir: str = "out"
    variant: str = "nr"
    seed: int = 0

    @classmethod
    def load(cls, config_path: str | None, overrides: argparse.Namespace) -> "AppConfig":
        raw: dict = {}
        if config_path:
            try:
                with open(config_path, encoding="utf-8") as f:
                    raw = json.load(f)
            except OSError as e:
                raise FatalConfig(f"cannot read config {config_path}: {e}") from None
            except json.JSONDecodeError as e:
                raise FatalConfig(f"config {config_path} is not valid JSON: {e}") from None
        gw_raw = dict(raw.get("gateway", {}))
        sel_raw = dict(raw.get("selection", {}))
        paths = dict(raw.get("paths", {}))

        def flag(name, fallback):
            value = getattr(overrides, name, None)
            return value if value is not None else fallback

        try:
            gateway = GatewayConfig(
                base_url=flag("base_url", gw_raw.get("base_url", "http://127.0.0.1:8080/v1")),
                api_key_env=flag("api_key_env", gw_raw.get("api_key_env", "FACTDIAL_API_KEY")),
                model=flag("model", gw_raw.get("model", "mock-chat")),
                temperature=flag("temperature", gw_raw.get("temperature", 0.0)),
                max_tokens=flag("max_tokens", gw_raw.get("max_tokens", 512)),
                timeout=flag("timeout", gw_raw.get("timeout", 30.0)),
                max_retries=flag("max_retries", gw_raw.get("max_retries", 2)),
                parallelism=flag("parallelism", gw_raw.get("parallelism", 4)),
            )
            bm25_raw = dict(sel_raw.get("bm25", {}))
            selection = SelectionConfig(
                n=flag("n", sel_raw.get("n", 5)),
                scorer=Scorer(flag("scorer", sel_raw.get("scorer", "bm25"))),
                bm25=Bm25Params(
                    k1=float(bm25_raw.get("k1", 1.5)), b=float(bm25_raw.get("b", 0.75))
                ),
            )
            return cls(
                gateway=gateway,
                selection=selection,
                corpus=flag("corpus", paths.get("corpus", "")),
                snapshot=flag("snapshot", paths.get("snapshot", "")),
                out_dir=flag("out_dir", paths.get("out_dir", "out")),
                variant=flag("variant", raw.get("variant", "nr")).lower(),
                seed=flag("seed", raw.get("seed", 0)),
            )
        except (ValueError, KeyError) as e:
            raise FatalConfig(f"bad configuration value: {e}") from None


def _require_file(path: str, role: str) -> str:
    if not path:
        raise FatalConfig(f"no {role} path configured")
    if not os.path.isfile(path):
        raise FatalConfig(f"{role} file not found: {path}")
    return path


def _make_gateway(cfg: AppConfig) -> Gateway:
    return Gateway(cfg.gateway, rng=random.Random(cfg.seed))


def _probe(gw: Gateway):
    if not gw.probe():
        raise FatalConfig(f"gateway unreachable at {gw.cfg.base_url}")


def _ordered_map(fn, items, workers: int):
    """Apply fn over items on a bounded pool, results in input order;
    per-item failures are collected, not raised."""
    results: list = []
    errors: list[tuple[str, str]] = []
    with ThreadPoolExecutor(max_workers=workers) as pool:
        futures = [(item, pool.submit(fn, item)) for item in items]
        for item, fut in futures:
            try:
                results.append(fut.result())
            except (FactDialError, ValueError) as e:
                item_id = getattr(item, "id", None) or getattr(item, "dialogue_id", repr(item))
                logger.warning("item %s failed: %s", item_id, e)
                errors.append((str(item_id), str(e)))
    return results, errors


def _warn_summary(stage: str, errors: list[tuple[str, str]]):
    if errors:
        print(
            f"warning: {stage}: {len(errors)} item(s) failed: "
            + ", ".join(item_id for item_id, _ in errors),
            file=sys.stderr,
        )


# --- stage handlers -------------------------------------------------------

def stage_reformulate(cfg: AppConfig, dialogues: list[Dialogue], gw: Gateway) -> list[ReformulatedDialogue]:
    reformulated, errors = _ordered_map(
        lambda d: reformulate(gw, d), dialogues, gw.cfg.parallelism
    )
    _warn_summary("reformulate", errors)
    out = Path(cfg.out_dir) / REFORMULATED_FILE
    with open(out, "w", encoding="utf-8") as f:
        for r in reformulated:
            f.write(
                json.dumps(
                    {
                        "dialogue_id": r.original.id,
                        "turns": [
                            {"speaker": u.speaker.value, "text": u.text}
                            for u in r.resolved_turns
                        ],
                        "chain_of_thought": r.chain_of_thought,
                        "fallback_used": r.fallback_used,
                    },
                    ensure_ascii=False,
                )
                + "\n"
            )
    return reformulated


def load_reformulated(path: str, dialogues: list[Dialogue]) -> list[ReformulatedDialogue]:
    by_id = {d.id: d for d in dialogues}
    out: list[ReformulatedDialogue] = []
    with open(path, encoding="utf-8") as f:
        for line in f:
            if not line.strip():
                continue
            obj = json.loads(line)
            original = by_id[obj["dialogue_id"]]
            out.append(
                ReformulatedDialogue(
                    original=original,
                    resolved_turns=tuple(
                        Utterance(speaker=Speaker(t["speaker"]), text=t["text"])
                        for t in obj["turns"]
                    ),
                    chain_of_thought=obj.get("chain_of_thought", ""),
                    fallback_used=bool(obj.get("fallback_used", False)),
                )
            )
    return out


def stage_select(cfg: AppConfig, subjects, gw: Gateway) -> list[DialogueSenseGraph]:
    graphs, errors = _ordered_map(
        lambda d: build_sense_graph(gw, cfg.selection, d), subjects, gw.cfg.parallelism
    )
    _warn_summary("select", errors)
    save_sense_graphs(graphs, Path(cfg.out_dir) / SENSE_GRAPH_FILE)
    return graphs


def stage_generate(cfg: AppConfig, subjects, graphs: list[DialogueSenseGraph], gw: Gateway):
    by_id = {g.dialogue_id: g for g in graphs}
    method = f"tg-drg-{cfg.variant}"

    def gen(subject):
        dialogue_id = (
            subject.original.id if isinstance(subject, ReformulatedDialogue) else subject.id
        )
        return generate_response(gw, subject, by_id[dialogue_id], method=method)

    responses, errors = _ordered_map(gen, subjects, gw.cfg.parallelism)
    _warn_summary("generate", errors)
    save_responses(responses, Path(cfg.out_dir) / RESPONSES_FILE)
    return responses


def stage_factscore(cfg: AppConfig, dialogues, responses, gw: Gateway):
    snapshot = load_snapshot(_require_file(cfg.snapshot, "snapshot"))
    labels = {x for d in dialogues for t in d.triples for x in (t.subject, t.object)}
    linker = AliasLinker(snapshot, extra_labels=sorted(labels))
    by_id = {d.id: d for d in dialogues}

    def score(resp):
        return score_response(gw, snapshot, linker, by_id[resp.dialogue_id], resp.dialogue_id, resp.text)

    reports, errors = _ordered_map(score, responses, 1)  # fact workers fan out per fact
    _warn_summary("factscore", errors)

    with open(Path(cfg.out_dir) / FACTSCORE_FILE, "w", encoding="utf-8") as f:
        for r in reports:
            f.write(
                json.dumps(
                    {
                        "response_id": r.response_id,
                        "fact_score": r.fact_score,
                        "neip": r.neip,
                        "verdicts": [
                            {
                                "index": v.fact.index,
                                "text": v.fact.text,
                                "label": v.label.value,
                                "evidence_titles": list(v.evidence_titles),
                            }
                            for v in r.verdicts
                        ],
                    },
                    ensure_ascii=False,
                )
                + "\n"
            )
    fact, neip = corpus_fact(reports)
    summary = {
        "fact": fact,
        "neip": neip,
        "n_responses": len(reports),
        "n_facts": sum(len(r.verdicts) for r in reports),
    }
    with open(Path(cfg.out_dir) / FACTSCORE_SUMMARY_FILE, "w", encoding="utf-8") as f:
        json.dump(summary, f, indent=2)
        f.write("\n")
    print(json.dumps(summary))
    return reports, summary


def stage_evaluate(cfg: AppConfig, dialogues, responses, gw: Gateway | None):
    by_id = {d.id: d for d in dialogues}
    linker_labels = {x for d in dialogues for t in d.triples for x in (t.subject, t.object)}
    snapshot = load_snapshot(cfg.snapshot) if cfg.snapshot and os.path.isfile(cfg.snapshot) else None
    linker = AliasLinker(snapshot, extra_labels=sorted(linker_labels))

    ppl_available = gw is not None
    rows: list[MetricRow] = []
    for resp in responses:
        reference = by_id[resp.dialogue_id].reference
        ppl = None
        if ppl_available and resp.text.strip():
            try:
                ppl = perplexity(gw, resp.text)
            except (Unsupported, GatewayError) as e:
                logger.warning("perplexity unavailable (%s); reporting undefined", e)
                ppl_available = False
        rows.append(
            MetricRow(
                response_id=resp.dialogue_id,
                bleu4=bleu4(resp.text, reference) if reference else None,
                rouge_l=rouge_l(resp.text, reference) if reference else None,
                entity_f1=entity_f1(linker, resp.text, reference) if reference else None,
                ppl=ppl,
            )
        )

    with open(Path(cfg.out_dir) / METRICS_FILE, "w", encoding="utf-8") as f:
        for row in rows:
            f.write(
                json.dumps(
                    {
                        "response_id": row.response_id,
                        "bleu4": row.bleu4,
                        "rouge_l": row.rouge_l,
                        "entity_f1": row.entity_f1,
                        "ppl": row.ppl,
                    }
                )
                + "\n"
            )

    def mean(values):
        defined = [v for v in values if v is not None]
        return round(sum(defined) / len(defined), 6) if defined else None

    summary = {
        "bleu4": mean([r.bleu4 for r in rows]),
        "rouge_l": mean([r.rouge_l for r in rows]),
        "entity_f1": mean([r.entity_f1 for r in rows]),
        "ppl": mean([r.ppl for r in rows]),
        "n_responses": len(rows),
    }
    with open(Path(cfg.out_dir) / METRICS_SUMMARY_FILE, "w", encoding="utf-8") as f:
        json.dump(summary, f, indent=2)
        f.write("\n")
    print(json.dumps(summary))
    return rows, summary


# --- subcommands ----------------------------------------------------------

def cmd_reformulate(cfg: AppConfig) -> int:
    dialogues = load_dialogue_corpus(_require_file(cfg.corpus, "corpus"))
    gw = _make_gateway(cfg)
    _probe(gw)
    os.makedirs(cfg.out_dir, exist_ok=True)
    stage_reformulate(cfg, dialogues, gw)
    return 0


def cmd_select(cfg: AppConfig) -> int:
    dialogues = load_dialogue_corpus(_require_file(cfg.corpus, "corpus"))
    gw = _make_gateway(cfg)
    if cfg.selection.scorer is not Scorer.BM25:
        _probe(gw)
    os.makedirs(cfg.out_dir, exist_ok=True)
    if cfg.variant == "r":
        ref_path = Path(cfg.out_dir) / REFORMULATED_FILE
        subjects = load_reformulated(_require_file(str(ref_path), "reformulated"), dialogues)
    else:
        subjects = dialogues
    stage_select(cfg, subjects, gw)
    return 0


def cmd_generate(cfg: AppConfig) -> int:
    dialogues = load_dialogue_corpus(_require_file(cfg.corpus, "corpus"))
    gw = _make_gateway(cfg)
    _probe(gw)
    graphs = load_sense_graphs(_require_file(str(Path(cfg.out_dir) / SENSE_GRAPH_FILE), "sense-graph"))
    if cfg.variant == "r":
        ref_path = Path(cfg.out_dir) / REFORMULATED_FILE
        subjects = load_reformulated(_require_file(str(ref_path), "reformulated"), dialogues)
    else:
        subjects = dialogues
    stage_generate(cfg, subjects, graphs, gw)
    return 0


def cmd_subgraph(cfg: AppConfig, args) -> int:
    in_path = args.graphs or str(Path(cfg.out_dir) / SENSE_GRAPH_FILE)
    out_path = args.out or str(Path(cfg.out_dir) / "pcst_graphs.jsonl")
    graphs = load_sense_graphs(_require_file(in_path, "sense-graph"))
    os.makedirs(os.path.dirname(out_path) or ".", exist_ok=True)
    pruned = []
    for g in graphs:
        if not g.triples:
            pruned.append(g)
            continue
        scored = [
            ScoredTriple(triple=t, score=s, source_index=i)
            for i, (t, s) in enumerate(g.triples)
        ]
        prized = assign_prizes(scored, k=args.k)
        result = solve_pcst(prized)
        kept = tuple(
            (t, s)
            for (t, s) in g.triples
            if t.subject in result.nodes and t.object in result.nodes
        )
        pruned.append(
            DialogueSenseGraph(
                dialogue_id=g.dialogue_id, variant=g.variant, triples=kept, n=g.n
            )
        )
    save_sense_graphs(pruned, out_path)
    return 0


def cmd_factscore(cfg: AppConfig, args) -> int:
    dialogues = load_dialogue_corpus(_require_file(cfg.corpus, "corpus"))
    responses_path = args.responses or str(Path(cfg.out_dir) / RESPONSES_FILE)
    responses = load_responses(_require_file(responses_path, "responses"))
    gw = _make_gateway(cfg)
    _probe(gw)
    os.makedirs(cfg.out_dir, exist_ok=True)
    stage_factscore(cfg, dialogues, responses, gw)
    return 0


def cmd_evaluate(cfg: AppConfig, args) -> int:
    dialogues = load_dialogue_corpus(_require_file(cfg.corpus, "corpus"))
    responses_path = args.responses or str(Path(cfg.out_dir) / RESPONSES_FILE)
    responses = load_responses(_require_file(responses_path, "responses"))
    gw = None
    if not args.no_ppl:
        gw = _make_gateway(cfg)
        if not gw.probe():
            logger.warning("gateway unreachable; perplexity will be undefined")
            gw = None
    os.makedirs(cfg.out_dir, exist_ok=True)
    stage_evaluate(cfg, dialogues, responses, gw)
    return 0


def cmd_agreement(args) -> int:
    def read_labels(path):
        with open(_require_file(path, "labels"), encoding="utf-8") as f:
            return tuple(line.strip() for line in f if line.strip())

    pair = LabelPair(annotator_a=read_labels(args.labels_a), annotator_b=read_labels(args.labels_b))
    print(json.dumps({"raw": raw_agreement(pair), "kappa": cohen_kappa(pair)}))
    return 0


def cmd_run_all(cfg: AppConfig, args) -> int:
    dialogues = load_dialogue_corpus(_require_file(cfg.corpus, "corpus"))
    _require_file(cfg.snapshot, "snapshot")
    gw = _make_gateway(cfg)
    _probe(gw)
    os.makedirs(cfg.out_dir, exist_ok=True)

    if cfg.variant == "r":
        subjects = stage_reformulate(cfg, dialogues, gw)
    else:
        subjects = dialogues
    graphs = stage_select(cfg, subjects, gw)
    responses = stage_generate(cfg, subjects, graphs, gw)
    stage_factscore(cfg, dialogues, responses, gw)
    stage_evaluate(cfg, dialogues, responses, gw)
    return 0


def cmd_mock_serve(args) -> int:
    engine = (
        MockEngine.from_file(_require_file(args.mock_script, "mock-script"))
        if args.mock_script
        else MockEngine()
    )
    serve_forever(engine, args.port)
    return 0


# --- argument parsing -----------------------------------------------------

class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _add_common(p: argparse.ArgumentParser):
    p.add_argument("--config", help="JSON config file; flags override its fields")
    p.add_argument("--corpus")
    p.add_argument("--snapshot")
    p.add_argument("--out-dir", dest="out_dir")
    p.add_argument("--variant", choices=["nr", "r"])
    p.add_argument("--n", type=int)
    p.add_argument("--scorer", choices=[s.value for s in Scorer])
    p.add_argument("--base-url", dest="base_url")
    p.add_argument("--model")
    p.add_argument("--api-key-env", dest="api_key_env")
    p.add_argument("--temperature", type=float)
    p.add_argument("--max-tokens", dest="max_tokens", type=int)
    p.add_argument("--timeout", type=float)
    p.add_argument("--max-retries", dest="max_retries", type=int)
    p.add_argument("--parallelism", type=int)
    p.add_argument("--seed", type=int)


def build_parser() -> _Parser:
    parser = _Parser(prog="factdial", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    for name in ("reformulate", "select", "generate", "run-all"):
        p = sub.add_parser(name)
        _add_common(p)

    p = sub.add_parser("subgraph")
    _add_common(p)
    p.add_argument("--graphs", help="scored sense-graph export to prune")
    p.add_argument("--out", help="output export path")
    p.add_argument("--k", type=int, default=3, help="triples whose subjects receive prizes")

    for name in ("factscore", "evaluate"):
        p = sub.add_parser(name)
        _add_common(p)
        p.add_argument("--responses", help="response file to score")
        if name == "evaluate":
            p.add_argument("--no-ppl", action="store_true", help="skip perplexity")

    p = sub.add_parser("agreement")
    p.add_argument("labels_a", help="first annotator's labels, one per line")
    p.add_argument("labels_b", help="second annotator's labels, one per line")

    p = sub.add_parser("mock-serve")
    p.add_argument("--port", type=int, default=8080)
    p.add_argument("--mock-script", dest="mock_script")

    return parser


def main(argv: list[str] | None = None) -> int:
    logging.basicConfig(
        level=getattr(logging, os.environ.get("FACTDIAL_LOG", "WARNING").upper(), logging.WARNING),
        stream=sys.stderr,
        format="%(levelname)s %(name)s: %(message)s",
    )
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)

    try:
        if args.command == "agreement":
            return cmd_agreement(args)
        if args.command == "mock-serve":
            return cmd_mock_serve(args)
        cfg = AppConfig.load(args.config, args)
        if args.command == "reformulate":
            return cmd_reformulate(cfg)
        if args.command == "select":
            return cmd_select(cfg)
        if args.command == "generate":
            return cmd_generate(cfg)
        if args.command == "subgraph":
            return cmd_subgraph(cfg, args)
        if args.command == "factscore":
            return cmd_factscore(cfg, args)
        if args.command == "evaluate":
            return cmd_evaluate(cfg, args)
        if args.command == "run-all":
            return cmd_run_all(cfg, args)
        parser.error(f"unknown command {args.command!r}")
        return 1
    except (FatalConfig, OSError) as e:
        print(f"fatal: {e}", file=sys.stderr)
        return 2
    except FactDialError as e:
        print(f"fatal: {e}", file=sys.stderr)
        return 2
    except KeyboardInterrupt:
        print("interrupted; partial outputs may be incomplete", file=sys.stderr)
        return 130


if __name__ == "__main__":
    sys.exit(main())
