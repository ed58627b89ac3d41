"""Command-line pipeline, exit codes and report envelopes."""
import json
import subprocess
import sys

import numpy as np
import pytest

from flowshield import __version__
from flowshield.cli import EXIT_DATA, EXIT_NUMERIC, EXIT_OK, EXIT_USAGE, run
from flowshield.dataset import read_table, table_provenance
from flowshield.envelope import ReportEnvelope, config_digest, emit_report, read_report
from flowshield.learners import load_model


@pytest.fixture(scope="module")
def corpus(tmp_path_factory):
    d = tmp_path_factory.mktemp("corpus")
    assert run(["synth", "--rows", "4000", "--out", str(d / "flows.bin"), "--csv-dir", str(d),
                "--files", "11", "--stream-out", str(d / "five.flows")]) == EXIT_OK
    return d


def ok(argv):
    code = run([str(a) for a in argv])
    assert code == EXIT_OK, argv
    return code


# ---------------------------------------------------------------- envelopes

def test_envelope_round_trip(tmp_path):
    env = ReportEnvelope(kind="demo", payload={"a": [1, 2.5], "b": None}, config={"x": 1}, seed=7)
    emit_report(env, tmp_path / "r.json")
    back = read_report(tmp_path / "r.json")
    assert back.payload == env.payload and back.to_dict() == env.to_dict()
    d = json.loads((tmp_path / "r.json").read_text())
    assert d["seed"] == 7 and d["tool_version"] == __version__ and d["format_version"] == 1
    assert "timestamp" in d


def test_config_digest_contract():
    base = {"learner": "gbt", "rounds": 100, "nested": {"eta": 0.3}}
    assert config_digest(base) == config_digest(dict(reversed(list(base.items()))))
    for change in ({"rounds": 101}, {"learner": "rf"}, {"nested": {"eta": 0.31}}):
        assert config_digest({**base, **change}) != config_digest(base)


def test_tampered_digest_rejected():
    d = ReportEnvelope(kind="k", payload={}, config={"a": 1}).to_dict()
    d["config"]["a"] = 2
    with pytest.raises(ValueError):
        ReportEnvelope.from_dict(d)


def test_timestamp_honours_source_date_epoch(monkeypatch):
    monkeypatch.setenv("SOURCE_DATE_EPOCH", "0")
    assert ReportEnvelope(kind="k", payload={}).timestamp == "1970-01-01T00:00:00Z"


# ---------------------------------------------------------------- pipeline

def test_ingest_eleven_csv_files(corpus, tmp_path):
    out, rep = tmp_path / "merged.bin", tmp_path / "ingest.json"
    ok(["ingest", "--in", corpus, "--out", out, "--report", rep])
    payload = read_report(rep).payload
    assert len(payload["files"]) == 11 and payload["rows"] == 4000
    merged = read_table(out)
    original = read_table(corpus / "flows.bin")
    assert merged.feature_names == original.feature_names
    assert np.array_equal(merged.labels, original.labels)
    assert np.allclose(merged.features, original.features, rtol=0, atol=0)
    assert table_provenance(out)["kind"] == "table"


def test_pipeline_end_to_end(corpus, tmp_path):
    base = corpus / "flows.bin"
    clean_t, train_t, test_t = tmp_path / "c.bin", tmp_path / "tr.bin", tmp_path / "te.bin"
    ok(["clean", "--in", base, "--out", clean_t])
    ok(["resample", "--in", clean_t, "--out", train_t, "--test-out", test_t, "--report", tmp_path / "rs.json",
        "--provenance-log", tmp_path / "prov.csv"])
    assert read_table(train_t).row_count > 0 and read_table(test_t).row_count > 0
    assert (tmp_path / "prov.csv").read_text().startswith("source,neighbor,u")
    ok(["select", "--in", train_t, "--method", "importance", "--k", "5", "--trees", "20",
        "--out", tmp_path / "top5.json"])
    names = read_report(tmp_path / "top5.json").payload["names"]
    assert len(names) == 5
    ok(["train", "--in", train_t, "--learner", "gbt", "--features", tmp_path / "top5.json", "--rounds", "20",
        "--out", tmp_path / "gbt.json"])
    model = load_model(tmp_path / "gbt.json")
    assert list(model.feature_names) == names
    ok(["evaluate", "--in", test_t, "--model", tmp_path / "gbt.json", "--out", tmp_path / "m.json"])
    assert read_report(tmp_path / "m.json").payload["accuracy"] > 0.9
    ok(["explain", "ice", "--in", test_t, "--model", tmp_path / "gbt.json", "--feature", names[0],
        "--out", tmp_path / "ice.txt", "--report", tmp_path / "ice.json"])
    assert (tmp_path / "ice.txt").read_text().startswith("grid pdp")
    ok(["explain", "surrogate", "--in", test_t, "--model", tmp_path / "gbt.json", "--out", tmp_path / "s.json",
        "--tree-out", tmp_path / "tree.json"])
    assert 0 <= read_report(tmp_path / "s.json").payload["fidelity"] <= 1
    ok(["simulate", "--model", tmp_path / "tree.json", "--in", test_t, "--out", tmp_path / "sim.json",
        "--timings", tmp_path / "simt.json", "--warmup", "0"])
    sim = read_report(tmp_path / "sim.json").payload
    assert sim["allow"] + sim["block"] == sim["flows_processed"]
    assert "throughput_flows_per_s" not in sim
    assert read_report(tmp_path / "simt.json").payload["timings"]["throughput_flows_per_s"] > 0


def test_select_other_methods(corpus, tmp_path):
    t = corpus / "flows.bin"
    for method in ("anova", "filter", "wald"):
        ok(["select", "--in", t, "--method", method, "--k", "8", "--out", tmp_path / f"{method}.json",
            "--report", tmp_path / f"{method}_r.json"])
    ok(["select", "--method", "intersect", "--subsets", tmp_path / "anova.json", tmp_path / "filter.json",
        "--out", tmp_path / "both.json"])
    both = set(read_report(tmp_path / "both.json").payload["names"])
    assert both <= set(read_report(tmp_path / "anova.json").payload["names"])


def test_simulate_binary_stream(corpus, tmp_path):
    t = corpus / "flows.bin"
    (tmp_path / "five.json").write_text(json.dumps(["Inbound", "Destination Port", "URG Flag Count",
                                                    "Source Port", "Avg Bwd Segment Size"]))
    ok(["train", "--in", t, "--learner", "cart", "--max-depth", "6", "--features", tmp_path / "five.json",
        "--out", tmp_path / "cart.json"])
    ok(["simulate", "--model", tmp_path / "cart.json", "--stream", corpus / "five.flows",
        "--out", tmp_path / "sim.json", "--shards", "2", "--warmup", "100"])
    sim = read_report(tmp_path / "sim.json").payload
    assert sim["flows_processed"] == 4000 and sim["recall"] >= 0.8


def test_evaluate_grid_covers_all_learners(corpus, tmp_path):
    out = tmp_path / "grid.json"
    ok(["evaluate", "--in", corpus / "flows.bin", "--grid", "nb,knn,logreg,cart,rf,ada,gbt", "--k", "30,20,10,5",
        "--out", out, "--timings", tmp_path / "gt.json", "--timing-repeats", "1", "--threads", "1"])
    rows = read_report(out).payload["rows"]
    cells = {(r["learner"], r["feature_count"]) for r in rows}
    assert cells == {(a, k) for a in ("nb", "knn", "logreg", "cart", "rf", "ada", "gbt") for k in (30, 20, 10, 5)}
    assert all(r["error"] is None for r in rows)
    assert len(read_report(tmp_path / "gt.json").payload["timings"]) == 28


def test_sweep_subcommand(corpus, tmp_path):
    ok(["sweep", "--in", corpus / "flows.bin", "--counts", "10,5", "--min-flows", "5000", "--warmup", "0",
        "--out", tmp_path / "sw.json"])
    rows = read_report(tmp_path / "sw.json").payload["rows"]
    assert [r["count"] for r in rows] == [10, 5]


def test_train_is_byte_identical(corpus, tmp_path):
    t = corpus / "flows.bin"
    outs = []
    for i, threads in enumerate((1, 8, 1)):
        out = tmp_path / f"rf{i}.json"
        ok(["train", "--in", t, "--learner", "rf", "--trees", "8", "--threads", threads, "--out", out])
        outs.append(out.read_bytes())
    assert outs[0] == outs[1] == outs[2]
    doc = json.loads(outs[0])
    assert doc["provenance"]["seed"] == 42 and doc["provenance"]["tool_version"] == __version__
    ok(["train", "--in", t, "--learner", "rf", "--trees", "8", "--seed", "43", "--out", tmp_path / "rf43.json"])
    assert (tmp_path / "rf43.json").read_bytes() != outs[0]


def test_inputs_not_mutated(corpus, tmp_path):
    t = corpus / "flows.bin"
    before = t.read_bytes()
    ok(["clean", "--in", t, "--out", tmp_path / "c.bin"])
    ok(["resample", "--in", t, "--out", tmp_path / "r.bin", "--resample-scope", "all"])
    assert t.read_bytes() == before


def test_environment_input_default(corpus, tmp_path, monkeypatch):
    monkeypatch.setenv("FLOWSHIELD_INPUT", str(corpus / "flows.bin"))
    ok(["clean", "--out", tmp_path / "c.bin"])


# ---------------------------------------------------------------- exit codes

def test_usage_errors_exit_one(capsys):
    assert run(["frobnicate"]) == EXIT_USAGE
    assert run(["train", "--bogus"]) == EXIT_USAGE
    assert run([]) == EXIT_USAGE
    assert "usage" in capsys.readouterr().err


def test_data_errors_exit_two(corpus, tmp_path):
    assert run(["clean", "--in", str(tmp_path / "missing.bin"), "--out", str(tmp_path / "o.bin")]) == EXIT_DATA
    assert run(["clean", "--in", str(corpus / "flows.bin"), "--out", str(tmp_path / "no" / "o.bin")]) == EXIT_DATA
    ok(["train", "--in", corpus / "flows.bin", "--learner", "knn", "--out", tmp_path / "knn.json"])
    assert run(["simulate", "--model", str(tmp_path / "knn.json"), "--in", str(corpus / "flows.bin")]) == EXIT_DATA
    bad = tmp_path / "bad.csv"
    bad.write_text("a,Label\n1,BENIGN\n2\n")
    assert run(["ingest", "--in", str(bad), "--out", str(tmp_path / "x.bin"), "--schema-policy", "strict"]) \
        == EXIT_DATA


def test_numerical_failure_exits_three(tmp_path):
    rows = ["x,Label"] + [f"{i},{'BENIGN' if i < 10 else 'Syn'}" for i in range(20)]
    (tmp_path / "sep.csv").write_text("\n".join(rows) + "\n")
    code = run(["train", "--in", str(tmp_path / "sep.csv"), "--learner", "logreg", "--l2", "0",
                "--out", str(tmp_path / "lr.json")])
    assert code == EXIT_NUMERIC


def test_module_entry_point(tmp_path):
    res = subprocess.run([sys.executable, "-m", "flowshield", "--version"], capture_output=True, text=True)
    assert res.returncode == 0 and __version__ in res.stdout
