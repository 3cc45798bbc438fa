import json

import pytest

from fractal_lab import cli, harness, io
from fractal_lab.errors import InvalidArgument

EXPECTED = {
    "bm-turning", "bm-lemma31", "sle-trace", "sle-turning", "sle-validate",
    "perc-dim", "perc-survival", "cle-carpet", "cle-turning",
}

SOUP = dict(t_min=1e-2, diam_min=0.05, mesh=1 / 128, mc_mass_samples=500, replicates=2)
TINY = {
    "bm-turning": dict(depth=8, replicates=3, max_points=128),
    "bm-lemma31": dict(dims="1", level=6, depth=10, replicates=3),
    "sle-trace": dict(dt=1e-2, replicates=2),
    "sle-turning": dict(dt=1e-2, replicates=2, max_points=64),
    "sle-validate": dict(dt=1e-2, ks_seeds=50, gap_dt=1e-2),
    "perc-dim": dict(depth=3, replicates=3),
    "perc-survival": dict(depth=4, replicates=100),
    "cle-carpet": SOUP,
    "cle-turning": dict(SOUP, min_vertices=16),
}


def test_registry_contents_sorted():
    names = [i.name for i in harness.list_experiments()]
    assert set(names) == EXPECTED
    assert names == sorted(names)


def test_defaults_validate():
    for info in harness.list_experiments():
        exp = harness.get_experiment(info.name)
        assert exp.validate(info.defaults) == exp.validate()
        # rendered defaults parse back to the same values
        text = {k: exp.schema[k].render(v) for k, v in info.defaults.items()}
        assert exp.validate(text) == exp.validate()


def test_unknown_experiment():
    with pytest.raises(harness.UnknownExperiment):
        harness.run_experiment("nope")


def test_invalid_config_reports_fields():
    with pytest.raises(harness.InvalidConfig) as exc:
        harness.get_experiment("perc-dim").validate({"p": "1.5", "depth": "x", "bogus": 1})
    assert set(exc.value.errors) == {"p", "depth", "bogus"}
    with pytest.raises(harness.InvalidConfig) as exc:
        harness.get_experiment("cle-carpet").validate({"mesh": 0.1})
    assert "mesh" in exc.value.errors
    with pytest.raises(harness.InvalidConfig) as exc:
        harness.get_experiment("sle-trace").validate({"dt": 2, "horizon": 1})
    assert "dt" in exc.value.errors


def test_field_parsing():
    f = harness.Field("float", 0.0)
    assert f.parse("1/9") == pytest.approx(1 / 9)
    assert harness.Field("ints", (1,)).parse("1, 2") == (1, 2)
    assert harness.Field("bool", False).parse("yes") is True
    assert harness.Field("float", None, optional=True).parse("none") is None
    with pytest.raises(ValueError):
        harness.Field("int", 0).parse(1.5)


def test_config_text():
    cfg = harness.parse_config_text("# comment\np = 0.5  # trailing\n\ndepth=4\n")
    assert cfg == {"p": "0.5", "depth": "4"}
    with pytest.raises(InvalidArgument):
        harness.parse_config_text("no equals sign")


def test_threads(monkeypatch):
    monkeypatch.setenv(harness.THREADS_ENV, "3")
    assert harness.resolve_threads() == 3
    monkeypatch.setenv(harness.THREADS_ENV, "0")
    assert harness.resolve_threads() >= 1
    assert harness.resolve_threads(5) == 5
    with pytest.raises(InvalidArgument):
        harness.resolve_threads(-1)


@pytest.mark.parametrize("name", sorted(EXPECTED))
def test_every_experiment_runs_and_is_deterministic(name, tmp_path):
    a = harness.run_experiment(name, TINY[name], 7, tmp_path / "a", threads=1)
    b = harness.run_experiment(name, TINY[name], 7, tmp_path / "b", threads=4)
    assert a.verdicts and a.verdicts == b.verdicts
    assert _nan_equal(a.metrics, b.metrics)
    assert a.artifacts == b.artifacts and "result.json" in a.artifacts
    for f in a.artifacts:
        assert (tmp_path / "a" / f).read_bytes() == (tmp_path / "b" / f).read_bytes(), f
    man = io.read_json(tmp_path / "a" / "manifest.json")
    assert [e["path"] for e in man["files"]] == sorted(a.artifacts)
    assert man["master_seed"] == 7 and man["threads"] == 1
    harness.verify_manifest(tmp_path / "a" / "manifest.json")
    res = io.read_json(tmp_path / "a" / "result.json")
    assert res["passed"] == a.passed and set(res["verdicts"]) == set(a.verdicts)


def _nan_equal(x, y):
    return json.dumps(io._jsonable(x), sort_keys=True) == json.dumps(io._jsonable(y), sort_keys=True)


def test_seed_changes_artifacts(tmp_path):
    a = harness.run_experiment("bm-turning", TINY["bm-turning"], 1, tmp_path / "a")
    b = harness.run_experiment("bm-turning", TINY["bm-turning"], 2, tmp_path / "b")
    assert (tmp_path / "a" / "turning_profile.csv").read_bytes() != (tmp_path / "b" / "turning_profile.csv").read_bytes()
    assert a.metrics != b.metrics


def test_perc_dim_reports_reference(tmp_path):
    r = harness.run_experiment("perc-dim", dict(depth=4, replicates=4), 0, tmp_path)
    assert r.metrics["reference"] == pytest.approx(1.675, abs=5e-4)
    assert "dim_estimate" in r.metrics
    assert (tmp_path / "cells_000.pgm").exists()


def test_manifest_detects_tampering(tmp_path):
    harness.run_experiment("perc-survival", TINY["perc-survival"], 0, tmp_path)
    (tmp_path / "survival.csv").write_text("tampered\n")
    with pytest.raises(Exception, match="digest mismatch"):
        harness.verify_manifest(tmp_path / "manifest.json")


# ---------------------------------------------------------------------- cli


def test_cli_list(capsys):
    assert cli.main(["list"]) == 0
    out = capsys.readouterr().out
    for name in EXPECTED:
        assert f"{name}:" in out


def test_cli_exit_codes(tmp_path, capsys):
    ok = cli.main(["perc-dim", "--depth", "3", "--replicates", "3", "--out", str(tmp_path / "ok"), "-q"])
    assert ok == 0
    # p at the threshold with a zero bound cannot be met by a surviving sample
    fail = cli.main(["perc-survival", "--p", "0.5", "--l", "2", "--n", "1", "--depth", "3",
                     "--replicates", "100", "--max-survival", "0", "--out", str(tmp_path / "f"), "-q"])
    assert fail == 2
    err = cli.main(["perc-dim", "--p", "7", "--out", str(tmp_path / "e")])
    assert err == 1
    with pytest.raises(SystemExit):
        cli.main(["not-an-experiment"])


def test_cli_config_file_and_override(tmp_path):
    cfg = tmp_path / "perc.cfg"
    cfg.write_text("depth = 3\nreplicates = 2\np = 0.5\n")
    assert cli.main(["perc-dim", "--config", str(cfg), "--p", "0.8", "--out", str(tmp_path / "o"), "-q"]) in (0, 2)
    rec = io.read_json(tmp_path / "o" / "result.json")
    assert rec["params"]["p"] == "0.8" and rec["params"]["depth"] == "3" and rec["params"]["replicates"] == "2"
