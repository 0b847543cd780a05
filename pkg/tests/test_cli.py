import json

import pytest

from conftest import FIXTURES
from factdial.cli import main
from factdial.corpus import load_responses, load_sense_graphs
from factdial.mock import MockEngine
from factdial.mockserver import MockServer


@pytest.fixture(scope="module")
def live_mock():
    engine = MockEngine.from_file(FIXTURES / "mock_script.json")
    with MockServer(engine) as server:
        yield server


def write_config(tmp_path, base_url, variant="nr", **extra):
    cfg = {
        "gateway": {"base_url": base_url, "model": "mock", "max_retries": 1, "parallelism": 4},
        "selection": {"n": 5, "scorer": "bm25"},
        "paths": {
            "corpus": str(FIXTURES / "mini_corpus.jsonl"),
            "snapshot": str(FIXTURES / "snapshot.jsonl"),
            "out_dir": str(tmp_path / "out"),
        },
        "variant": variant,
    }
    cfg.update(extra)
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps(cfg))
    return path


def test_unknown_flag_is_usage_error(capsys):
    assert main(["select", "--definitely-not-a-flag"]) == 1
    assert "usage" in capsys.readouterr().err


def test_unknown_command_is_usage_error():
    assert main(["frobnicate"]) == 1


def test_missing_corpus_is_fatal(tmp_path, capsys):
    cfg = write_config(tmp_path, "http://127.0.0.1:1/v1")
    raw = json.loads(cfg.read_text())
    raw["paths"]["corpus"] = str(tmp_path / "nope.jsonl")
    cfg.write_text(json.dumps(raw))
    assert main(["select", "--config", str(cfg)]) == 2
    assert "nope.jsonl" in capsys.readouterr().err


def test_unreachable_gateway_is_fatal(tmp_path):
    cfg = write_config(tmp_path, "http://127.0.0.1:9/v1")  # discard port, nothing listens
    (tmp_path / "out").mkdir()
    assert main(["reformulate", "--config", str(cfg)]) == 2


def test_agreement_subcommand(capsys):
    rc = main(["agreement", str(FIXTURES / "labels_a.txt"), str(FIXTURES / "labels_b.txt")])
    assert rc == 0
    out = json.loads(capsys.readouterr().out)
    assert 0.0 <= out["kappa"] <= 1.0
    assert out["raw"] == 0.8


def test_select_writes_sense_graph_export(tmp_path, live_mock):
    cfg = write_config(tmp_path, live_mock.base_url)
    assert main(["select", "--config", str(cfg)]) == 0
    graphs = load_sense_graphs(tmp_path / "out" / "sense_graphs.jsonl")
    assert [g.dialogue_id for g in graphs] == [f"d{i}" for i in range(10)]
    assert all(len(g.triples) <= 5 for g in graphs)
    assert all(g.variant.value == "original" for g in graphs)


def test_subgraph_consumes_and_emits_export(tmp_path, live_mock):
    cfg = write_config(tmp_path, live_mock.base_url)
    assert main(["select", "--config", str(cfg)]) == 0
    out = tmp_path / "out" / "pcst_graphs.jsonl"
    assert main(["subgraph", "--config", str(cfg), "--k", "5", "--out", str(out)]) == 0
    pruned = load_sense_graphs(out)
    full = load_sense_graphs(tmp_path / "out" / "sense_graphs.jsonl")
    assert [g.dialogue_id for g in pruned] == [g.dialogue_id for g in full]
    for p, f in zip(pruned, full):
        kept = {t for t, _ in p.triples}
        assert kept <= {t for t, _ in f.triples}
    # pools whose prizes span several nodes keep connected knowledge
    assert sum(1 for p in pruned if p.triples) >= 3


def test_stagewise_run_matches_run_all(tmp_path, live_mock):
    (tmp_path / "a").mkdir()
    (tmp_path / "b").mkdir()
    cfg_a = write_config(tmp_path / "a", live_mock.base_url, variant="r")
    for cmd in ("reformulate", "select", "generate", "factscore", "evaluate"):
        assert main([cmd, "--config", str(cfg_a)]) == 0, cmd

    cfg_b = write_config(tmp_path / "b", live_mock.base_url, variant="r")
    assert main(["run-all", "--config", str(cfg_b)]) == 0

    for name in (
        "reformulated.jsonl",
        "sense_graphs.jsonl",
        "responses.jsonl",
        "factscore.jsonl",
        "factscore_summary.json",
        "metrics.jsonl",
        "metrics_summary.json",
    ):
        a = (tmp_path / "a" / "out" / name).read_bytes()
        b = (tmp_path / "b" / "out" / name).read_bytes()
        assert a == b, f"{name} differs between stagewise and run-all"


def test_run_all_emits_method_tag(tmp_path, live_mock):
    cfg = write_config(tmp_path, live_mock.base_url, variant="r")
    assert main(["run-all", "--config", str(cfg)]) == 0
    responses = load_responses(tmp_path / "out" / "responses.jsonl")
    assert all(r.method == "tg-drg-r" for r in responses)
    summary = json.loads((tmp_path / "out" / "factscore_summary.json").read_text())
    assert summary == {"fact": 75.0, "neip": 20.0, "n_responses": 10, "n_facts": 50}


def test_flag_overrides_config(tmp_path, live_mock):
    cfg = write_config(tmp_path, live_mock.base_url)
    other_out = tmp_path / "other"
    assert main(["select", "--config", str(cfg), "--out-dir", str(other_out), "--n", "2"]) == 0
    graphs = load_sense_graphs(other_out / "sense_graphs.jsonl")
    assert all(len(g.triples) <= 2 for g in graphs)


def test_generate_failures_collected_exit_zero(tmp_path, capsys):
    # a gateway that 500s every generation call: items fail, the command
    # still exits 0 with a warning summary and an empty response file
    failing = MockEngine(
        {"failures": [{"contains": "ensure the response is fluent", "status": 500}]}
    )
    with MockServer(failing) as server:
        cfg = write_config(tmp_path, server.base_url)
        raw = json.loads(cfg.read_text())
        raw["gateway"]["max_retries"] = 0
        cfg.write_text(json.dumps(raw))
        assert main(["select", "--config", str(cfg)]) == 0
        assert main(["generate", "--config", str(cfg)]) == 0
    assert "10 item(s) failed" in capsys.readouterr().err
    assert load_responses(tmp_path / "out" / "responses.jsonl") == []
