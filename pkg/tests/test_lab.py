import json
import math
from pathlib import Path

import pytest

from scatterlab.lab.cli import main
from scatterlab.lab.config import ConfigError, load_config, parse_config
from scatterlab.lab.io import csv_table, dumps, fmt
from scatterlab.lab.manifest import RunManifest

ONE = {"kind": "constant", "value": 1}


def scenario(sid, mu2=ONE, b2=ONE):
    fam = {"family": "line", "base_radius": 0, "radius_step": 40}
    return {"scenario_id": sid, "levels": [1, 2, 3, 4, 5, 6, 7, 8],
            "g1": {**fam, "b": ONE, "mu": ONE}, "g2": {**fam, "b": b2, "mu": mu2},
            "packets": [{"k_over_pi": 0.5, "n0": 0, "sigma": 8}],
            "time_grid": {"kind": "linear", "t_max": 120, "points": 13},
            "criteria": {"s_values": [0.5]}}


SMALL = [scenario("identity"),
         scenario("rescale", mu2={"kind": "constant", "value": 4}),
         scenario("finite_range", mu2={"kind": "bump", "base": 1, "values": {"-2": 1.5, "0": 2, "3": 0.5}},
                  b2={"kind": "bump", "base": 1, "values": {"0": 2, "1": 0.5}})]


def write_config(tmp_path, scenarios=SMALL, **extra):
    path = tmp_path / "config.json"
    path.write_text(json.dumps({"name": "small", "seed": 7, "scenarios": scenarios, **extra}, indent=1))
    return path


@pytest.fixture(scope="module")
def small_run(tmp_path_factory):
    root = tmp_path_factory.mktemp("run")
    cfg = write_config(root)
    out = root / "out"
    codes = [main(["criteria", "--config", str(cfg), "--out", str(out)]),
             main(["scatter", "--config", str(cfg), "--out", str(out)])]
    return cfg, out, codes


def read_json(path):
    return json.loads(Path(path).read_text())


class TestConfig:
    def test_bundled_parses(self):
        cfg = load_config()
        assert [s.scenario_id for s in cfg.scenarios] == [
            "identity", "constant_rescale", "finite_range", "geometric_decay", "slow_decay"]
        assert len(cfg.config_hash) == 64

    def test_duplicate_ids(self):
        with pytest.raises(ConfigError, match="duplicate"):
            parse_config(json.dumps({"scenarios": [scenario("a"), scenario("a")]}))

    def test_json_position(self):
        with pytest.raises(ConfigError, match=r"cfg:2:"):
            parse_config('{"scenarios":\n [,]}', "cfg")

    def test_field_path(self):
        bad = scenario("a")
        bad["levels"] = [3, 2]
        with pytest.raises(ConfigError, match=r"scenarios\[0\]\.levels"):
            parse_config(json.dumps({"scenarios": [bad]}))
        bad = scenario("a")
        bad["packets"][0]["sigma"] = -1
        with pytest.raises(ConfigError, match=r"scenarios\[0\]\.packets\[0\]\.sigma"):
            parse_config(json.dumps({"scenarios": [bad]}))

    def test_momentum_range(self):
        bad = scenario("a")
        bad["packets"][0] = {"k": 3.5, "n0": 0, "sigma": 5}
        with pytest.raises(ConfigError):
            parse_config(json.dumps({"scenarios": [bad]}))

    def test_hash_ignores_formatting(self):
        a = parse_config(json.dumps({"scenarios": [scenario("a")]}))
        b = parse_config(json.dumps({"scenarios": [scenario("a")]}, indent=4))
        assert a.config_hash == b.config_hash

    def test_edge_list_family(self, tmp_path):
        (tmp_path / "ring.json").write_text(json.dumps(
            {"labels": list(range(6)), "mu": [1] * 6, "edges": [[i, (i + 1) % 6, 1] for i in range(6)]}))
        s = scenario("ring")
        s["g1"] = s["g2"] = {"family": "edge_list", "graph_file": "ring.json", "root": 0}
        s["levels"] = [0, 1, 2, 3]
        cfg = parse_config(json.dumps({"scenarios": [s]}), base_dir=tmp_path)
        assert cfg.scenarios[0].g1.name == "edge_list"


class TestValidateCommand:
    def test_bundled(self, capsys):
        assert main(["validate"]) == 0
        assert "OK 5 scenarios" in capsys.readouterr().out

    def test_negative_measure(self, tmp_path, capsys):
        path = write_config(tmp_path, [scenario("neg", mu2={"kind": "constant", "value": -1})])
        assert main(["validate", "--config", str(path)]) == 1
        assert "scenarios[0].g2.mu" in capsys.readouterr().out

    def test_duplicate_ids(self, tmp_path, capsys):
        path = write_config(tmp_path, [scenario("a"), scenario("a")])
        assert main(["validate", "--config", str(path)]) == 1
        assert "duplicate" in capsys.readouterr().err

    def test_missing_file(self, tmp_path):
        assert main(["validate", "--config", str(tmp_path / "nope.json")]) == 1


class TestRun:
    def test_exit_codes(self, small_run):
        assert small_run[2] == [0, 0]

    def test_identity_criteria(self, small_run):
        _, out, _ = small_run
        for name in ("vertex_sum", "edge_sum_j1", "edge_sum_j2", "asp_s0.5"):
            rep = read_json(out / "identity" / "criteria" / f"{name}.json")
            assert rep["verdict"] == "converging"
            assert all(v == 0 for _, v in rep["partial_sums"])

    def test_rescale_criteria(self, small_run):
        rep = read_json(small_run[1] / "rescale" / "criteria" / "vertex_sum.json")
        assert rep["verdict"] == "diverging"

    def test_identity_scatter(self, small_run):
        rep = read_json(small_run[1] / "identity" / "scatter" / "packet0.json")
        assert rep["verdict"] == "equivalent"
        assert all(d == 0 for _, d in rep["decay_curve"])

    def test_finite_range_scatter(self, small_run):
        rep = read_json(small_run[1] / "finite_range" / "scatter" / "packet0.json")
        assert rep["verdict"] == "equivalent" and rep["final_distance"] <= 0.1

    def test_rescale_scatter(self, small_run):
        out = small_run[1]
        rep = read_json(out / "rescale" / "scatter" / "packet0.json")
        assert rep["verdict"] == "not_equivalent"
        assert all(d == pytest.approx(1.0, rel=1e-9) for _, d in rep["decay_curve"])
        assert read_json(out / "rescale" / "scatter" / "summary.json")["consistent"]

    def test_csv_layout(self, small_run):
        lines = (small_run[1] / "rescale" / "scatter" / "packet0_decay.csv").read_text().splitlines()
        assert lines[0] == "t,value" and len(lines) == 14
        lines = (small_run[1] / "rescale" / "criteria" / "vertex_sum.csv").read_text().splitlines()
        assert lines[0] == "level,value" and lines[1] == "1,121.5"

    def test_manifest_lists_everything(self, small_run):
        out = small_run[1]
        man = RunManifest.load(out)
        man.verify(out)
        on_disk = {str(p.relative_to(out)) for p in out.rglob("*") if p.is_file()} - {"manifest.json"}
        assert set(man.files) == on_disk
        assert man.seed == 7 and man.scenarios["rescale"] == {
            "criteria": "not_equivalent", "scatter": "not_equivalent"}

    def test_invariants_recorded(self, small_run):
        inv = read_json(small_run[1] / "identity" / "scatter" / "invariants.json")
        assert inv["seed"] == 7 and inv["unitary_J_max_rel_error"] <= 1e-13
        assert inv["propagator_norm_drift"] <= 1e-9


class TestReport:
    def test_summary_table(self, small_run, tmp_path):
        _, out, _ = small_run
        assert main(["report", str(out)]) == 0
        rows = (out / "summary.csv").read_text().splitlines()
        assert len(rows) == 4
        assert all(r.endswith(",True") for r in rows[1:])
        RunManifest.load(out).verify(out)

    def test_empty_directory(self, tmp_path, capsys):
        assert main(["report", str(tmp_path)]) == 1
        assert "no manifest" in capsys.readouterr().err

    def test_tampered_file(self, small_run, tmp_path, capsys):
        import shutil
        copy = tmp_path / "copy"
        shutil.copytree(small_run[1], copy)
        target = copy / "identity" / "criteria" / "vertex_sum.csv"
        target.write_text(target.read_text() + "9,9.0\n")
        assert main(["report", str(copy)]) == 1
        assert "digest mismatch" in capsys.readouterr().err

    def test_env_override(self, small_run, monkeypatch):
        monkeypatch.setenv("SCATTERLAB_OUT", str(small_run[1]))
        assert main(["report"]) == 0


def test_parallel_matches_serial(small_run, tmp_path):
    cfg, out, _ = small_run
    par = tmp_path / "par"
    assert main(["criteria", "--config", str(cfg), "--out", str(par), "--jobs", "3"]) == 0
    for rel in RunManifest.load(par).files:
        assert (par / rel).read_bytes() == (out / rel).read_bytes()


def test_both_signs(tmp_path):
    cfg = write_config(tmp_path, [scenario("finite_range", mu2={"kind": "bump", "base": 1, "values": {"0": 2}})])
    out = tmp_path / "out"
    assert main(["scatter", "--config", str(cfg), "--out", str(out), "--both-signs"]) == 0
    minus = read_json(out / "finite_range" / "scatter" / "packet0_minus.json")
    assert minus["packet"]["k"] < 0 and minus["verdict"] == "equivalent"


def test_inconsistency_exit_code(tmp_path):
    cfg = write_config(tmp_path, [scenario("rescale", mu2={"kind": "constant", "value": 4})])
    out = tmp_path / "out"
    assert main(["scatter", "--config", str(cfg), "--out", str(out)]) == 0
    pred = out / "rescale" / "criteria" / "prediction.json"
    pred.parent.mkdir(parents=True)
    pred.write_text(json.dumps({"prediction": "equivalent"}))
    assert main(["scatter", "--config", str(cfg), "--out", str(out)]) == 3


def test_packet_that_does_not_fit(tmp_path, capsys):
    s = scenario("tight")
    s["packets"][0]["sigma"] = 100
    cfg = write_config(tmp_path, [s])
    assert main(["scatter", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 2
    assert "tight" in capsys.readouterr().err


def test_s_values_flag(tmp_path):
    cfg = write_config(tmp_path, [scenario("identity")])
    out = tmp_path / "o"
    assert main(["criteria", "--config", str(cfg), "--out", str(out), "--s-values", "0.1,0.9"]) == 0
    assert (out / "identity" / "criteria" / "asp_s0.9.csv").is_file()
    with pytest.raises(SystemExit):
        main(["criteria", "--s-values", "1.5"])


class TestIO:
    def test_shortest_round_trip(self):
        for x in (0.1, 1 / 3, 1e-300, 2.0 ** 0.5, 12345678.9):
            assert float(fmt(x)) == x and fmt(x) == repr(x)
        assert fmt(math.inf) == "inf" and fmt(math.nan) == "nan"

    def test_strict_json(self):
        text = dumps({"a": math.inf, "b": [1.5, complex(1, -2)]})
        assert json.loads(text) == {"a": "inf", "b": [1.5, [1.0, -2.0]]}

    def test_csv(self):
        assert csv_table(("t", "value"), [(0.0, 0.5), (2.0, math.inf)]) == "t,value\n0.0,0.5\n2.0,inf\n"
