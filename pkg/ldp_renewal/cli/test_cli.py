import csv
import sys
from pathlib import Path

import pytest
import ujson

from . import constants as C
from .config import RunConfig
from .excepthook import exit_code_for
from .export import RATE_CURVE_HEADER, rate_curve_rows
from .main import build_parser, main
from ..ldp.exceptions import ConfigError, SimulationError
from ..ldp.mc import ProbEstimate, RateCurveEntry

EXP_UNIT = {"family": "exp_unit", "params": {"rate": 1.0}}
CONFIGS = Path(__file__).resolve().parents[2] / "configs"

def write_config(tmp_path, name="run.json", **sections):
    content = {"law": EXP_UNIT, "seed": 42, "output": {"dir": "out", "timestamp": "2024-01-01T00:00:00Z"}}
    content.update(sections)
    file = tmp_path / name
    file.write_text(ujson.dumps(content), encoding='utf-8')
    return file

@pytest.fixture(autouse=True)
def keep_excepthook(monkeypatch):
    monkeypatch.setattr(sys, "excepthook", sys.excepthook)
    monkeypatch.delenv(C.WORKERS_ENV, raising=False)

def read_csv(file):
    with file.open('r', encoding='utf-8', newline='') as f:
        return list(csv.reader(f))

class TestRunConfig:
    def test_load(self, tmp_path):
        config = RunConfig.load(write_config(tmp_path))
        assert config.seed == 42
        assert config.workers == 1
        assert config.output_dir == tmp_path / "out"
        assert config.make_law().describe()["family"] == "exp_unit"

    def test_overrides(self, tmp_path, monkeypatch):
        monkeypatch.setenv(C.WORKERS_ENV, "3")
        config = RunConfig.load(write_config(tmp_path), seed=7, out=tmp_path / "elsewhere")
        assert config.seed == 7
        assert config.workers == 3
        assert config.output_dir == tmp_path / "elsewhere"
        assert RunConfig.load(write_config(tmp_path), workers=2).workers == 2

    def test_file_workers_win_over_environment(self, tmp_path, monkeypatch):
        monkeypatch.setenv(C.WORKERS_ENV, "3")
        assert RunConfig.load(write_config(tmp_path, workers=4)).workers == 4

    def test_invalid_environment(self, tmp_path, monkeypatch):
        monkeypatch.setenv(C.WORKERS_ENV, "many")
        with pytest.raises(ConfigError):
            RunConfig.load(write_config(tmp_path))

    def test_seed_is_required(self, tmp_path):
        file = tmp_path / "noseed.json"
        file.write_text(ujson.dumps({"law": EXP_UNIT}), encoding='utf-8')
        with pytest.raises(ConfigError):
            RunConfig.load(file)
        assert RunConfig.load(file, seed=0).seed == 0

    @pytest.mark.parametrize("content", [
        {"law": EXP_UNIT, "seed": 1, "plots": {}},
        {"law": {"params": {}}, "seed": 1},
        {"law": EXP_UNIT, "seed": -1},
        {"law": EXP_UNIT, "seed": 1, "workers": 0},
        {"law": EXP_UNIT, "seed": 1, "verify": []},
    ])
    def test_invalid(self, content):
        with pytest.raises(ConfigError):
            RunConfig.from_dict(content)

    def test_wrong_extension(self, tmp_path):
        with pytest.raises(ConfigError):
            RunConfig.load(tmp_path / "run.yaml")

    def test_not_json(self, tmp_path):
        file = tmp_path / "broken.json"
        file.write_text("{law:", encoding='utf-8')
        with pytest.raises(ConfigError):
            RunConfig.load(file)

    def test_grid_points(self):
        config = RunConfig.from_dict({"law": EXP_UNIT, "seed": 1,
                                      "rate": {"grid": {"start": 0.2, "stop": 3.0, "step": 0.1}}})
        points = config.grid_points()
        assert len(points) == 29
        assert points[0][0] == pytest.approx(0.2)
        assert points[-1][0] == pytest.approx(3.0)

    def test_explicit_points(self):
        config = RunConfig.from_dict({"law": EXP_UNIT, "seed": 1,
                                      "rate": {"grid": {"points": [0.5, [1.5]]},
                                               "upsilon_points": [["+inf", [1.0]], [0.5, 2.0]]}})
        assert [p.tolist() for p in config.grid_points()] == [[0.5], [1.5]]
        assert config.upsilon_points()[0][0] == float("inf")

    def test_invalid_grid(self):
        config = RunConfig.from_dict({"law": EXP_UNIT, "seed": 1, "rate": {"grid": {"start": 1.0, "step": 0.1}}})
        with pytest.raises(ConfigError):
            config.grid_points()

    def test_shipped_configs_pin_timestamps(self):
        files = sorted(CONFIGS.glob("*.json"))
        assert files
        for file in files:
            assert RunConfig.load(file).timestamp == "2024-01-01T00:00:00Z", file.name

    def test_set_and_simulation(self):
        config = RunConfig.from_dict({"law": EXP_UNIT, "seed": 1, "workers": 2, "simulate": {
            "set": {"kind": "open_ball", "center": [1.5], "radius": 0.3}, "t_grid": [10, 20], "n_runs": 500}})
        assert config.set_descriptor("simulate").radius == 0.3
        assert config.t_grid("simulate") == [10.0, 20.0]
        sim = config.simulation_parameters("simulate")
        assert (sim.n_runs, sim.workers) == (500, 2)
        with pytest.raises(ConfigError):
            config.set_descriptor("verify")

class TestCommands:
    def test_rate(self, tmp_path):
        config = write_config(tmp_path, rate={"grid": {"start": 0.2, "stop": 3.0, "step": 0.1},
                                              "upsilon_points": [[1.0, [2.0]]]})
        assert main(["rate", "-c", str(config), "-q"]) == C.EXIT_OK
        rows = read_csv(tmp_path / "out" / C.RATE_GRID_CSV)
        assert rows[0] == ["w1", "beta_star", "gamma_star", "J", "Upsilon1", "I_lower", "I_upper", "converged"]
        assert len(rows) == 30
        assert all(r[-1] == "true" for r in rows[1:])
        assert read_csv(tmp_path / "out" / C.UPSILON_POINTS_CSV)[0] == ["beta", "w1", "Upsilon", "converged"]
        summary = ujson.loads((tmp_path / "out" / C.RATE_SUMMARY_JSON).read_text(encoding='utf-8'))
        assert summary["grid"]["rows"] == 29
        assert summary["grid"]["argmin_I_lower"]["w"] == [pytest.approx(1.0)]
        assert summary["timestamp"] == "2024-01-01T00:00:00Z"

    def test_rate_needs_points(self, tmp_path):
        assert main(["rate", "-c", str(write_config(tmp_path))]) == C.EXIT_USAGE

    def test_simulate_is_reproducible(self, tmp_path):
        simulate = {"set": {"kind": "open_ball", "center": [1.5], "radius": 0.3}, "t_grid": [5, 10],
                    "n_runs": 1000, "chunk_runs": 500}
        config = write_config(tmp_path, simulate=simulate)
        assert main(["simulate", "-c", str(config), "-o", str(tmp_path / "a")]) == C.EXIT_OK
        assert main(["simulate", "-c", str(config), "-o", str(tmp_path / "b"), "--workers", "2"]) == C.EXIT_OK
        for name in (C.RATE_CURVE_CSV, C.RATE_CURVE_JSON):
            assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()
        assert read_csv(tmp_path / "a" / C.RATE_CURVE_CSV)[0] == RATE_CURVE_HEADER

    def test_rate_is_byte_identical(self, tmp_path, monkeypatch):
        monkeypatch.setenv("SOURCE_DATE_EPOCH", "1700000000")
        config = write_config(tmp_path, output={"dir": "out"},
                              rate={"grid": {"start": 0.5, "stop": 2.0, "step": 0.5}, "upsilon_points": [[0.5, [1.0]]]})
        for out in ("a", "b"):
            assert main(["rate", "-c", str(config), "-o", str(tmp_path / out), "-q"]) == C.EXIT_OK
        for name in (C.RATE_GRID_CSV, C.UPSILON_POINTS_CSV, C.RATE_SUMMARY_JSON):
            assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()
        summary = ujson.loads((tmp_path / "a" / C.RATE_SUMMARY_JSON).read_text(encoding='utf-8'))
        assert summary["timestamp"] == "2023-11-14T22:13:20Z"

    def test_shipped_config_is_byte_identical(self, tmp_path, monkeypatch):
        monkeypatch.delenv("SOURCE_DATE_EPOCH", raising=False)
        config = CONFIGS / "oscillating_tails.json"
        for out in ("a", "b"):
            assert main(["verify", "tails", "-c", str(config), "-o", str(tmp_path / out), "-q"]) == C.EXIT_OK
            assert main(["tails", "-c", str(config), "-o", str(tmp_path / out), "-q"]) == C.EXIT_OK
        for name in (C.report_json("tails"), C.TAILS_JSON):
            assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()

    def test_verify_upper(self, tmp_path):
        verify = {"set": {"kind": "closed_ball", "center": [1.5], "radius": 0.3}, "t_grid": [20, 40],
                  "n_runs": 5000, "chunk_runs": 2500}
        assert main(["verify", "upper", "-c", str(write_config(tmp_path, verify=verify))]) == C.EXIT_OK
        report = ujson.loads((tmp_path / "out" / "report_upper.json").read_text(encoding='utf-8'))
        assert report["theorem_part"] == "c"
        assert report["verdict"] == "consistent"
        assert report["seed"] == 42

    def test_verify_tails(self, tmp_path):
        law = {"family": "oscillating_tail", "params": {"ell_s": 1.0, "ell_i": 2.0}}
        config = write_config(tmp_path, law=law, tails={"dyadic": [1, 10]})
        assert main(["verify", "tails", "-c", str(config)]) == C.EXIT_OK
        assert (tmp_path / "out" / "report_tails.json").exists()

    def test_unexpected_verdict(self, tmp_path):
        law = {"family": "oscillating_tail", "params": {"ell_s": 1.0, "ell_i": 2.0, "reward": "wait"}}
        config = write_config(tmp_path, law=law, verify={"w_grid": [[0.5], [1.0]]})
        assert main(["verify", "prop2", "-c", str(config)]) == C.EXIT_UNEXPECTED_VERDICT
        report = ujson.loads((tmp_path / "out" / "report_prop2.json").read_text(encoding='utf-8'))
        assert report["verdict"] == "violated"

    def test_tails(self, tmp_path):
        config = write_config(tmp_path, tails={"s_grid": [1, 2, 4, 8, 16]})
        assert main(["tails", "-c", str(config)]) == C.EXIT_OK
        tails = ujson.loads((tmp_path / "out" / C.TAILS_JSON).read_text(encoding='utf-8'))
        assert tails["estimate"]["ell_i"] == pytest.approx(1.0, abs=0.05)
        assert tails["expected"]["ell_i"] == 1.0

class TestErrors:
    def test_usage(self, tmp_path):
        with pytest.raises(SystemExit) as e:
            main(["integrate", "-c", str(write_config(tmp_path))])
        assert e.value.code == C.EXIT_USAGE
        with pytest.raises(SystemExit) as e:
            main(["rate"])
        assert e.value.code == C.EXIT_USAGE

    def test_unknown_check(self):
        with pytest.raises(SystemExit):
            build_parser().parse_args(["verify", "theorem", "-c", "run.json"])

    def test_missing_config_writes_a_log(self, tmp_path, capsys):
        assert main(["rate", "-c", str(tmp_path / "missing.json"), "-o", str(tmp_path)]) == C.EXIT_USAGE
        logs = list(tmp_path.glob("error-*.log"))
        assert len(logs) == 1
        assert "ConfigError" in logs[0].read_text(encoding='utf-8')
        assert "error" in capsys.readouterr().err

    def test_exit_codes(self):
        assert exit_code_for(SimulationError) == C.EXIT_NUMERICAL
        assert exit_code_for(FloatingPointError) == C.EXIT_NUMERICAL
        assert exit_code_for(ConfigError) == C.EXIT_USAGE
        assert exit_code_for(KeyError) == C.EXIT_USAGE

def test_rate_curve_rows():
    entries = [RateCurveEntry.from_estimate(10.0, ProbEstimate.from_counts(0, 1000, 0.99))]
    row = rate_curve_rows(entries)[0]
    assert row[0] == "10"
    assert row[4] == ""
    assert row[6] == "+inf"
    assert row[-2:] == ["0", "1000"]

def test_report_names():
    assert C.report_json("counterexample-open") == "report_counterexample_open.json"
