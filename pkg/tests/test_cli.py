import json

import numpy as np
import pytest

from grassopt import cli, io
from grassopt.config import PRESETS, ConfigError, from_dict, preset
from grassopt.evaluate import fukunaga_koontz
from grassopt.experiments import evaluate_point, start_point, evaluation_images
from grassopt.simulate import true_stats

SMALL_OPT = {"preset": "table2", "grid": {"side": 6, "sigma1": 0.55, "sigma2": 0.30},
             "p": 2, "iters": 15, "seeds": [0, 1], "test_per_class": 200}


def write(tmp_path, cfg, name="cfg.json"):
    path = tmp_path / name
    path.write_text(json.dumps(cfg))
    return str(path)


def run(*argv):
    return cli.main([str(a) for a in argv])


def snapshot(root):
    return {str(p.relative_to(root)): p.read_bytes() for p in sorted(root.rglob("*")) if p.is_file()}


class TestConfig:
    def test_named_presets_exist(self):
        assert {"fig4-desk", "fig4-paper", "table1", "table2"} <= set(PRESETS)

    def test_preset_values(self):
        cfg = preset("table2")
        assert cfg.optimizer == {"method": "rigd_ls", "eta0": 2.0, "beta": 0.7, "sigma": 1e-4,
                                 "max_backtracks": 60, "warm_start": False, "grad_tol": 0.0}
        assert cfg.shrinkage == 0.6 and cfg.test_per_class == 2000
        assert preset("table1").sample_sizes == [10, 100, 1000, 10000]

    @pytest.mark.parametrize("bad", [
        {"bogus": 1}, {"p": 0}, {"p": 256}, {"shrinkage": 1.0}, {"seeds": []},
        {"oracle": {"kind": "relative", "delta": 1.0}}, {"oracle": {"kind": "magic"}},
        {"optimizer": {"method": "rigd", "step": "corollary1"}}, {"grid": "nowhere"},
        {"rate": {"band": [-0.8, -1.6]}}, {"preset": "nope"}, {"iters": 1.5},
    ])
    def test_rejects(self, bad):
        with pytest.raises(ConfigError):
            from_dict(bad)

    def test_hash_ignores_output_directory(self):
        assert from_dict({"out": "a"}).config_hash() == from_dict({"out": "b"}).config_hash()
        assert from_dict({"p": 3}).config_hash() != from_dict({"p": 4}).config_hash()

    def test_switching_oracle_kind_drops_old_keys(self):
        cfg = from_dict({"preset": "fig4-desk", "oracle": {"kind": "exact"}})
        assert cfg.oracle == {"kind": "exact"}


class TestExitCodes:
    def test_bad_json(self, tmp_path):
        path = tmp_path / "c.json"
        path.write_text("{not json")
        assert run("simulate", "--config", path, "--out", tmp_path) == 2

    def test_missing_config_file(self, tmp_path):
        assert run("covtable", "--config", tmp_path / "none.json") == 2

    def test_unknown_command(self, tmp_path):
        with pytest.raises(SystemExit) as info:
            run("frobnicate", "--config", "x")
        assert info.value.code == 2

    def test_numerical_failure(self, tmp_path):
        cfg = write(tmp_path, {"grid": {"side": 16, "sigma1": 6.0, "sigma2": 1.0, "nugget": 0.0}})
        assert run("simulate", "--config", cfg, "--out", tmp_path) == 3

    def test_threads_env_override(self, tmp_path, monkeypatch):
        monkeypatch.setenv("GRASSOPT_THREADS", "zero")
        cfg = write(tmp_path, {"grid": {"side": 3, "sigma1": 1.0, "sigma2": 0.5}, "p": 1,
                               "sample_sizes": [2]})
        assert run("simulate", "--config", cfg, "--out", tmp_path) == 2
        monkeypatch.setenv("GRASSOPT_THREADS", "1")
        assert run("simulate", "--config", cfg, "--out", tmp_path, "--threads", "0") == 0

    def test_evaluate_needs_point(self, tmp_path):
        assert run("evaluate", "--config", write(tmp_path, SMALL_OPT)) == 2


class TestSimulate:
    def test_small_dataset(self, tmp_path):
        cfg = write(tmp_path, {"grid": {"side": 4, "sigma1": 1.0, "sigma2": 0.5}, "p": 2,
                               "sample_sizes": [3], "emit_pgm": True})
        assert run("simulate", "--config", cfg, "--out", tmp_path / "o", "--seed", 7) == 0
        base = tmp_path / "o" / "simulate"
        assert io.read_grmx(base / "seed7" / "class1_N3.grmx").shape == (3, 16)
        meta = io.read_json(base / "seed7" / "class2_N3.json")
        assert meta["N"] == 3 and meta["class"] == 2 and meta["seed"] == 7 and "config_hash" in meta
        assert (base / "seed7" / "class1_N3.pgm").read_bytes().startswith(b"P5")
        assert io.read_json(base / "stats" / "stats.json")["generator"] == "squared-exponential"


class TestCovtable:
    def test_columns_and_trend(self, tmp_path):
        cfg = write(tmp_path, {"preset": "table1", "sample_sizes": [100, 10, 1000], "seeds": [0, 1, 2]})
        assert run("covtable", "--config", cfg, "--out", tmp_path) == 0
        rows = (tmp_path / "covtable" / "covtable.csv").read_text().splitlines()
        assert rows[0] == "N,k1_mean,k1_std,k1_median,k2_mean,k2_std,k2_median,n_seeds"
        table = np.array([[float(v) for v in r.split(",")] for r in rows[1:]])
        assert np.all(np.diff(table[:, 0]) > 0)
        assert np.all(np.diff(table[:, 3]) < 0) and np.all(np.diff(table[:, 6]) < 0)


class TestOptimizeEvaluate:
    @pytest.fixture
    def optimized(self, tmp_path):
        cfg = write(tmp_path, SMALL_OPT)
        assert run("optimize", "--config", cfg, "--out", tmp_path) == 0
        return cfg, tmp_path

    def test_artifacts(self, optimized):
        cfg, out = optimized
        cell = out / "optimize" / "seed1"
        trace = (cell / "trace.csv").read_text().splitlines()
        assert trace[0] == "k,f,J,delta_norm,grad_norm,err_norm,eta,backtracks,func_evals,wall_ns"
        assert len(trace) == 16
        meta = io.read_json(cell / "trace.json")
        assert meta["config_input"] == SMALL_OPT
        assert meta["j_star"] == pytest.approx(fukunaga_koontz(true_stats(from_dict(SMALL_OPT).grid), 2).j_closed_form)
        assert io.read_json(cell / "point.json")["config_hash"] == meta["config_hash"]

    def test_evaluate_report(self, optimized):
        cfg, out = optimized
        point = out / "optimize" / "seed0" / "point.grmx"
        assert run("evaluate", "--config", cfg, "--out", out, "--point", point) == 0
        report = io.read_json(out / "evaluate" / "seed0_point.json")
        assert {"auc", "j_value", "j_star", "grad_norm", "config_hash", "distance_to_fk"} <= set(report)
        assert report["auc_fk"] >= report["auc"] - 0.02
        scores = (out / "evaluate" / "seed0_point_scores.csv").read_text().splitlines()
        assert scores[0] == "class,score" and len(scores) == 401

    def test_evaluate_twice_identical(self, optimized):
        cfg, out = optimized
        point = out / "optimize" / "seed0" / "point.grmx"
        run("evaluate", "--config", cfg, "--out", out / "a", "--point", point)
        run("evaluate", "--config", cfg, "--out", out / "b", "--point", point)
        assert snapshot(out / "a") == snapshot(out / "b")

    def test_mismatched_config_refused(self, optimized, tmp_path):
        _, out = optimized
        other = write(tmp_path, {**SMALL_OPT, "iters": 16}, "other.json")
        point = out / "optimize" / "seed0" / "point.grmx"
        assert run("evaluate", "--config", other, "--out", out, "--point", point) == 2


def test_random_start_auc_near_chance_level():
    cfg = preset("fig4-desk")
    truth = true_stats(cfg.grid)
    images = evaluation_images(truth, cfg.test_per_class, 0)
    aucs = [evaluate_point(cfg, start_point(cfg, s), 0, truth, images)[0]["auc"] for s in range(5)]
    assert abs(np.median(aucs) - 0.53) <= 0.05


def test_ratecheck_exit_code_follows_verdict(tmp_path):
    cfg = write(tmp_path, {"preset": "ratecheck", "iters": 100, "seeds": [0],
                           "rate": {"k_min": 10, "k_max": 100, "band": [-100.0, 100.0],
                                    "control_exponent": 0.0}})
    # the control cannot leave an unbounded band, so the verdict is a failure
    assert run("ratecheck", "--config", cfg, "--out", tmp_path) == 4
    report = io.read_json(tmp_path / "ratecheck" / "ratecheck.json")
    assert report["passed"] is False and report["corollary_i"]["in_band"] is True
