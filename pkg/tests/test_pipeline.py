import csv
import io
import json

import pytest

from kgbpr import cli, pipeline
from kgbpr.model import EmbeddingModel
from kgbpr.synth import density_sweep


@pytest.fixture(scope="module")
def corpus(tmp_path_factory):
    path = tmp_path_factory.mktemp("data") / "sweep.tsv"
    triples, _ = density_sweep(k=3, m=60, n=40, p_min=0.15, p_max=0.4, seed=2)
    path.write_text("".join(f"{s}\t{p}\t{o}\n" for s, p, o in triples))
    return path


def write_config(tmp_path, corpus, output, extra="", methods="bpr, mf, mp, random", workers=1):
    cfg = tmp_path / f"{output}.ini"
    cfg.write_text(
        f"""[experiment]
input = {corpus}
methods = {methods}
repeats = 2
seed = 4
output = {tmp_path / output}
workers = {workers}

[hyperparams]
K = 8
epochs = 5
{extra}"""
    )
    return cfg


def test_load_config(tmp_path, corpus):
    cfg = pipeline.load_config(write_config(tmp_path, corpus, "o", extra="\n[hyperparams.mf]\nalpha = 0.05\n"))
    assert cfg.methods == ("bpr", "mf", "mp", "random")
    assert cfg.hp_for("bpr").K == 8 and cfg.hp_for("bpr").alpha == 0.2
    assert cfg.hp_for("mf").alpha == 0.05 and cfg.hp_for("mf").K == 8
    assert cfg.predicates == "all" and cfg.repeat_count == 2


@pytest.mark.parametrize(
    "extra, match",
    [
        ("bogus = 1\n", "unknown hyperparameter"),
        ("alpha = fast\n", "not a number"),
        ("alpha = -1\n", "alpha"),
        ("\n[hyperparams.svd]\nK = 3\n", "unknown method"),
        ("\n[other]\nx = 1\n", "unknown config section"),
    ],
)
def test_config_errors(tmp_path, corpus, extra, match):
    with pytest.raises(pipeline.ConfigError, match=match):
        pipeline.load_config(write_config(tmp_path, corpus, "o", extra=extra))


def test_unknown_method_exits_before_work(tmp_path, corpus):
    cfg = write_config(tmp_path, corpus, "out", methods="bpr, svd")
    assert cli.main(["run", "--config", str(cfg)]) == pipeline.EXIT_CONFIG
    assert not (tmp_path / "out").exists()


def test_unknown_predicate_exits_before_work(tmp_path, corpus):
    cfg = write_config(tmp_path, corpus, "out")
    assert cli.main(["run", "--config", str(cfg), "--predicates", "nope"]) == pipeline.EXIT_CONFIG
    assert not (tmp_path / "out").exists()


def test_env_workers(tmp_path, corpus, monkeypatch):
    monkeypatch.setenv(pipeline.WORKERS_ENV, "3")
    cfg = tmp_path / "c.ini"
    cfg.write_text(f"[experiment]\ninput = {corpus}\noutput = {tmp_path}\n")
    assert pipeline.load_config(cfg).workers == 3


@pytest.fixture(scope="module")
def run_dir(tmp_path_factory, corpus):
    tmp = tmp_path_factory.mktemp("run")
    cfg = pipeline.load_config(write_config(tmp, corpus, "a"))
    assert pipeline.run_experiment(cfg) == pipeline.EXIT_OK
    return tmp / "a", cfg


def test_artifacts(run_dir):
    out, _ = run_dir
    for name in ("eval.csv", "topology.csv", "config.json", "manifest.json", "regression_bpr.csv"):
        assert (out / name).exists()
    assert len(list((out / "scatter" / "mp").glob("*.csv"))) == 9
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["failed"] == {}
    assert set(manifest["predicates"]) == {"p1", "p2", "p3"}
    assert set(manifest["predicates"]["p1"]["seeds"]) == {"split", "bpr", "mf", "mp", "random"}
    rows = list(csv.DictReader(io.StringIO((out / "eval.csv").read_text())))
    assert len(rows) == 3 * 4 * 3


def test_rerun_is_byte_identical(tmp_path, corpus, run_dir):
    out, cfg = run_dir
    again = tmp_path / "b"
    assert pipeline.run_experiment(pipeline.load_config(write_config(tmp_path, corpus, "b"))) == 0
    for name in ("eval.csv", "topology.csv", "regression_bpr.csv", "regression_random.csv"):
        assert (again / name).read_bytes() == (out / name).read_bytes()


def test_parallel_matches_serial(tmp_path, corpus, run_dir):
    out, _ = run_dir
    cfg = pipeline.load_config(write_config(tmp_path, corpus, "par", workers=2))
    assert pipeline.run_experiment(cfg) == 0
    assert (tmp_path / "par" / "eval.csv").read_bytes() == (out / "eval.csv").read_bytes()


def test_method_seeds_independent(tmp_path, corpus, run_dir):
    out, _ = run_dir
    cfg = pipeline.load_config(write_config(tmp_path, corpus, "solo", methods="random"))
    assert pipeline.run_experiment(cfg) == 0
    full = [r for r in csv.DictReader(io.StringIO((out / "eval.csv").read_text())) if r["method"] == "random"]
    solo = list(csv.DictReader(io.StringIO((tmp_path / "solo" / "eval.csv").read_text())))
    assert full == solo


def test_report_matches_artifacts(run_dir):
    out, _ = run_dir
    text = pipeline.report_summary(out)
    rows = {(r["predicate"], r["method"]): r for r in csv.DictReader(io.StringIO((out / "eval.csv").read_text())) if r["repeat"] == "mean"}
    for pred in ("p1", "p2", "p3"):
        block = text.split(f"== {pred}\n")[1].split("\n\n")[0].splitlines()[2:]
        assert len(block) == 4
        for line in block:
            method, hr, arhr, auc, subjects = line.split()
            r = rows[(pred, method)]
            assert float(hr) == pytest.approx(float(r["hr"]), abs=5e-5)
            assert float(auc) == pytest.approx(float(r["auc"]), abs=5e-5)
            assert subjects == r["n_subjects_tested"]
    reg = list(csv.DictReader(io.StringIO((out / "regression_bpr.csv").read_text())))
    assert len(reg) == 9
    block = text.split("== regression (bpr)\n")[1].split("\n\n")[0].splitlines()[2:]
    for line, r in zip(block, reg):
        fields = line.split()
        assert fields[:2] == [r["x_metric"], r["y_metric"]]
        if r["rvalue"] != "nan":
            assert float(fields[4]) == pytest.approx(float(r["rvalue"]), abs=5e-5)


def test_report_missing_artifacts(tmp_path):
    with pytest.raises(FileNotFoundError, match="eval.csv"):
        pipeline.report_summary(tmp_path)
    assert cli.main(["report", str(tmp_path)]) == pipeline.EXIT_FAILED


def test_partial_failure(tmp_path, corpus):
    path = tmp_path / "mixed.tsv"
    path.write_text(corpus.read_text() + "a\tlonely\tx\nb\tlonely\ty\n")
    cfg = pipeline.load_config(write_config(tmp_path, path, "mixed", methods="mp"))
    assert pipeline.run_experiment(cfg) == pipeline.EXIT_PARTIAL
    manifest = json.loads((tmp_path / "mixed" / "manifest.json").read_text())
    assert "lonely" in manifest["failed"]
    assert "degree >= 2" in manifest["failed"]["lonely"]
    preds = {r["predicate"] for r in csv.DictReader(io.StringIO((tmp_path / "mixed" / "eval.csv").read_text()))}
    assert preds == {"p1", "p2", "p3"}


def test_all_failed(tmp_path):
    path = tmp_path / "bad.tsv"
    path.write_text("a\tlonely\tx\nb\tlonely\ty\n")
    cfg = pipeline.ExperimentConfig(input_path=path, output_dir=tmp_path / "o", methods=("mp",))
    assert pipeline.run_experiment(cfg) == pipeline.EXIT_FAILED


def test_cli_ingest(corpus, capsys):
    assert cli.main(["ingest", str(corpus)]) == 0
    out = capsys.readouterr().out
    assert "duplicates=0 malformed=0" in out
    rows = [line.split("\t") for line in out.splitlines()[2:]]
    assert [r[0] for r in rows] == ["p1", "p2", "p3"]
    assert all(len(r) == 4 for r in rows)


def test_cli_train_and_reload(tmp_path, corpus, capsys):
    dump = tmp_path / "m.bin"
    assert cli.main(["train", str(corpus), "--predicate", "p2", "--out", str(dump), "--K", "6", "--epochs", "3"]) == 0
    model = EmbeddingModel.load(dump)
    labels = json.loads((tmp_path / "m.bin.labels.json").read_text())
    assert model.K == 6
    assert (model.m, model.n) == (len(labels["subjects"]), len(labels["objects"]))
    assert model.is_finite()
    assert "objective=" in capsys.readouterr().out
    assert cli.main(["train", str(corpus), "--predicate", "zz", "--out", str(dump)]) == pipeline.EXIT_FAILED


def test_cli_evaluate_and_analyze(tmp_path, corpus, capsys):
    ev = tmp_path / "ev.csv"
    args = ["evaluate", str(corpus), "--predicate", "p1", "--methods", "mp", "random", "--repeats", "2", "--csv", str(ev)]
    assert cli.main(args) == 0
    assert capsys.readouterr().out == ev.read_text()
    assert cli.main(["analyze", str(corpus), "--output", str(tmp_path / "an")]) == 0
    assert (tmp_path / "an" / "topology.csv").read_text().count("\n") == 4


def test_cli_synth(tmp_path):
    out = tmp_path / "s.tsv"
    assert cli.main(["synth", "planted-blocks", "--out", str(out), "--param", "m=20", "--param", "n=10", "--param", "blocks=2"]) == 0
    assert out.exists() and (tmp_path / "s.tsv.truth.json").exists()
    assert cli.main(["synth", "planted-blocks", "--out", str(out), "--param", "blocks=0"]) == pipeline.EXIT_CONFIG


def test_cli_run_with_flags(tmp_path, corpus, capsys):
    out = tmp_path / "flags"
    code = cli.main(["run", "--input", str(corpus), "--output", str(out), "--methods", "mp", "bpr", "--repeats", "1", "--K", "4", "--epochs", "2"])
    assert code == 0
    cfg = json.loads((out / "config.json").read_text())
    assert cfg["hyperparams"]["bpr"]["K"] == 4
    assert "== regression (bpr)" in capsys.readouterr().out
