"""Experiment configuration: JSON schema, named presets, validation, hashing.

A config file is a JSON object. ``"preset"`` names a starting point from
:data:`PRESETS`; every other key overrides it (nested dicts are merged one
level deep). Recognized keys::

    name            str
    grid            {"side", "sigma1", "sigma2", "nugget"} or a preset name from
                    grassopt.simulate.GRID_PRESETS
    p               subspace dimension
    oracle          {"kind": "exact" | "perturbed" | "sample" | "additive" | "relative",
                     "refresh": "uniform" | "fixed" (perturbed only),
                     "c", "exponent" (additive), "delta" (relative)}
    optimizer       {"method": "rigd" | "rigd_ls",
                     "step": "constant" | "corollary1" | "corollary2", "eta", "lipschitz",
                     "eta0", "beta", "sigma", "max_backtracks", "warm_start", "grad_tol"}
    iters           iteration budget K
    seeds           list of integer seeds
    shrinkage       lambda in (0, 1) for sample covariances
    sample_sizes    list of N (images per class)
    test_per_class  evaluation images per class
    rate            {"n", "p", "c", "exponent_i", "exponent_ii", "control_exponent",
                     "band": [lo, hi], "k_min", "k_max"}
    record_timing   bool; write wall-clock times into traces (breaks byte-identity)
    emit_pgm        bool; also write the first image of each dataset as PGM
    out             output directory (not part of the config hash)
"""

from __future__ import annotations

import copy
import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

from .errors import ConfigError
from .simulate import GRID_PRESETS, GridSpec

ORACLE_KINDS = ("exact", "perturbed", "sample", "additive", "relative")
METHODS = ("rigd", "rigd_ls")
STEP_RULES = ("constant", "corollary1", "corollary2")

_BASE = {
    "name": "custom",
    "grid": "fig4",
    "p": 5,
    "oracle": {"kind": "exact"},
    "optimizer": {"method": "rigd", "step": "constant", "eta": 0.2},
    "iters": 300,
    "seeds": [0],
    "shrinkage": 0.6,
    "sample_sizes": [100],
    "test_per_class": 2000,
    "rate": {
        "n": 16,
        "p": 2,
        "c": 1.0,
        "exponent_i": 0.75,
        "exponent_ii": 0.5,
        "control_exponent": 0.0,
        "band": [-1.6, -0.8],
        "k_min": 10,
        "k_max": 2000,
    },
    "record_timing": False,
    "emit_pgm": False,
    "out": "runs",
}


def _preset(**over) -> dict:
    cfg = copy.deepcopy(_BASE)
    cfg.update(over)
    return cfg


PRESETS = {
    "fig4-desk": _preset(
        name="fig4-desk", grid="fig4", p=5, oracle={"kind": "perturbed", "refresh": "uniform"},
        optimizer={"method": "rigd", "step": "constant", "eta": 0.2}, iters=300,
    ),
    "fig4-paper": _preset(
        name="fig4-paper", grid="fig4-paper", p=25, oracle={"kind": "perturbed", "refresh": "uniform"},
        optimizer={"method": "rigd", "step": "constant", "eta": 0.2}, iters=300,
    ),
    "table1": _preset(
        name="table1", grid="table1", sample_sizes=[10, 100, 1000, 10000], seeds=list(range(20)),
    ),
    "table1-full": _preset(
        name="table1-full", grid="table1-full", sample_sizes=[10, 100, 1000, 10000],
        seeds=list(range(20)),
    ),
    "table2": _preset(
        name="table2", grid="fig4", p=5, oracle={"kind": "exact"},
        optimizer={"method": "rigd_ls", "eta0": 2.0, "beta": 0.7, "sigma": 1e-4},
        iters=300, seeds=list(range(5)), sample_sizes=[100], shrinkage=0.6,
    ),
    "ratecheck": _preset(name="ratecheck", iters=2000, seeds=list(range(5))),
}


@dataclass
class ExperimentConfig:
    name: str
    grid: GridSpec
    p: int
    oracle: dict
    optimizer: dict
    iters: int
    seeds: list
    shrinkage: float
    sample_sizes: list
    test_per_class: int
    rate: dict
    record_timing: bool = False
    emit_pgm: bool = False
    out: str = "runs"
    raw: dict = field(default_factory=dict, repr=False)

    @property
    def n(self) -> int:
        return self.grid.n

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "grid": self.grid.to_dict(),
            "p": self.p,
            "oracle": dict(self.oracle),
            "optimizer": dict(self.optimizer),
            "iters": self.iters,
            "seeds": list(self.seeds),
            "shrinkage": self.shrinkage,
            "sample_sizes": list(self.sample_sizes),
            "test_per_class": self.test_per_class,
            "rate": dict(self.rate),
            "record_timing": self.record_timing,
            "emit_pgm": self.emit_pgm,
        }

    def config_hash(self) -> str:
        canon = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canon.encode()).hexdigest()[:16]

    def replace(self, **kw) -> "ExperimentConfig":
        d = self.to_dict()
        d["out"] = self.out
        d.update(kw)
        return from_dict(d)


def _merge(base: dict, over: dict) -> dict:
    out = copy.deepcopy(base)
    for key, val in over.items():
        if isinstance(val, dict) and isinstance(out.get(key), dict) and key != "grid":
            # switching oracle kind or optimizer method starts from a clean dict
            if key in ("oracle", "optimizer") and (
                val.get("kind", out[key].get("kind")) != out[key].get("kind")
                or val.get("method", out[key].get("method")) != out[key].get("method")
            ):
                out[key] = copy.deepcopy(val)
            else:
                out[key] = {**out[key], **val}
        else:
            out[key] = copy.deepcopy(val)
    return out


def _int(v, what, lo=None) -> int:
    if isinstance(v, bool) or not isinstance(v, int):
        raise ConfigError(f"{what} must be an integer, got {v!r}")
    if lo is not None and v < lo:
        raise ConfigError(f"{what} must be >= {lo}, got {v}")
    return v


def _num(v, what) -> float:
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ConfigError(f"{what} must be a number, got {v!r}")
    return float(v)


def _grid(v) -> GridSpec:
    if isinstance(v, str):
        if v not in GRID_PRESETS:
            raise ConfigError(f"unknown grid preset {v!r}; choose from {sorted(GRID_PRESETS)}")
        return GRID_PRESETS[v]
    if not isinstance(v, dict):
        raise ConfigError("grid must be a preset name or an object")
    unknown = set(v) - {"side", "sigma1", "sigma2", "nugget"}
    if unknown:
        raise ConfigError(f"unknown grid keys {sorted(unknown)}")
    try:
        return GridSpec(
            side=_int(v["side"], "grid.side", 2),
            sigma1=_num(v["sigma1"], "grid.sigma1"),
            sigma2=_num(v["sigma2"], "grid.sigma2"),
            nugget=_num(v.get("nugget", 1e-8), "grid.nugget"),
        )
    except KeyError as err:
        raise ConfigError(f"grid is missing {err}") from None


def _check_oracle(o: dict) -> dict:
    kind = o.get("kind")
    if kind not in ORACLE_KINDS:
        raise ConfigError(f"oracle.kind must be one of {ORACLE_KINDS}, got {kind!r}")
    out = {"kind": kind}
    if kind == "perturbed":
        refresh = o.get("refresh", "uniform")
        if refresh not in ("uniform", "fixed"):
            raise ConfigError("oracle.refresh must be 'uniform' or 'fixed'")
        out["refresh"] = refresh
    elif kind == "additive":
        out["c"] = _num(o.get("c", 1.0), "oracle.c")
        out["exponent"] = _num(o.get("exponent", 0.75), "oracle.exponent")
        if out["c"] <= 0 or out["exponent"] < 0:
            raise ConfigError("additive oracle needs c > 0 and exponent >= 0")
    elif kind == "relative":
        out["delta"] = _num(o.get("delta", 0.3), "oracle.delta")
        if not 0 <= out["delta"] < 1:
            raise ConfigError("oracle.delta must lie in [0, 1)")
    return out


def _check_optimizer(o: dict) -> dict:
    method = o.get("method")
    if method not in METHODS:
        raise ConfigError(f"optimizer.method must be one of {METHODS}, got {method!r}")
    out = {"method": method, "grad_tol": _num(o.get("grad_tol", 0.0), "optimizer.grad_tol")}
    if out["grad_tol"] < 0:
        raise ConfigError("optimizer.grad_tol must be nonnegative")
    if method == "rigd":
        step = o.get("step", "constant")
        if step not in STEP_RULES:
            raise ConfigError(f"optimizer.step must be one of {STEP_RULES}")
        out["step"] = step
        if step == "constant":
            out["eta"] = _num(o.get("eta", 0.2), "optimizer.eta")
            if out["eta"] <= 0:
                raise ConfigError("optimizer.eta must be positive")
        else:
            if "lipschitz" not in o:
                raise ConfigError(f"step rule {step} needs optimizer.lipschitz")
            out["lipschitz"] = _num(o["lipschitz"], "optimizer.lipschitz")
            if out["lipschitz"] <= 0:
                raise ConfigError("optimizer.lipschitz must be positive")
    else:
        out["eta0"] = _num(o.get("eta0", 2.0), "optimizer.eta0")
        out["beta"] = _num(o.get("beta", 0.7), "optimizer.beta")
        out["sigma"] = _num(o.get("sigma", 1e-4), "optimizer.sigma")
        out["max_backtracks"] = _int(o.get("max_backtracks", 60), "optimizer.max_backtracks", 1)
        out["warm_start"] = bool(o.get("warm_start", False))
        if out["eta0"] <= 0 or not 0 < out["beta"] < 1 or not 0 < out["sigma"] < 1:
            raise ConfigError("line search needs eta0 > 0, beta and sigma in (0, 1)")
    return out


def _check_rate(r: dict) -> dict:
    out = dict(_BASE["rate"])
    unknown = set(r) - set(out)
    if unknown:
        raise ConfigError(f"unknown rate keys {sorted(unknown)}")
    out.update(r)
    out["n"] = _int(out["n"], "rate.n", 2)
    out["p"] = _int(out["p"], "rate.p", 1)
    if out["p"] >= out["n"]:
        raise ConfigError("rate.p must be smaller than rate.n")
    for key in ("c", "exponent_i", "exponent_ii", "control_exponent"):
        out[key] = _num(out[key], f"rate.{key}")
    band = out["band"]
    if not (isinstance(band, list) and len(band) == 2 and band[0] < band[1]):
        raise ConfigError("rate.band must be [lo, hi] with lo < hi")
    out["band"] = [_num(band[0], "rate.band"), _num(band[1], "rate.band")]
    out["k_min"] = _int(out["k_min"], "rate.k_min", 1)
    out["k_max"] = _int(out["k_max"], "rate.k_max", out["k_min"] + 9)
    return out


def from_dict(d: dict) -> ExperimentConfig:
    """Resolve presets, merge overrides and validate everything up front."""
    if not isinstance(d, dict):
        raise ConfigError("config must be a JSON object")
    raw = copy.deepcopy(d)
    d = dict(d)
    preset = d.pop("preset", None)
    if preset is not None:
        if preset not in PRESETS:
            raise ConfigError(f"unknown preset {preset!r}; choose from {sorted(PRESETS)}")
        base = PRESETS[preset]
    else:
        base = _BASE
    merged = _merge(base, d)
    unknown = set(merged) - set(_BASE)
    if unknown:
        raise ConfigError(f"unknown config keys {sorted(unknown)}")

    grid = _grid(merged["grid"])
    p = _int(merged["p"], "p", 1)
    if p >= grid.n:
        raise ConfigError(f"p={p} must be smaller than n={grid.n}")
    seeds = merged["seeds"]
    if not isinstance(seeds, list) or not seeds:
        raise ConfigError("seeds must be a nonempty list of integers")
    seeds = [_int(s, "seed", 0) for s in seeds]
    sizes = merged["sample_sizes"]
    if not isinstance(sizes, list) or not sizes:
        raise ConfigError("sample_sizes must be a nonempty list")
    sizes = [_int(s, "sample size", 1) for s in sizes]
    lam = _num(merged["shrinkage"], "shrinkage")
    if not 0 < lam < 1:
        raise ConfigError(f"shrinkage must lie in (0, 1), got {lam}")
    oracle = _check_oracle(merged["oracle"])
    if oracle["kind"] == "sample" and min(sizes) < 2:
        raise ConfigError("sample-covariance oracle needs sample sizes >= 2")
    return ExperimentConfig(
        name=str(merged["name"]),
        grid=grid,
        p=p,
        oracle=oracle,
        optimizer=_check_optimizer(merged["optimizer"]),
        iters=_int(merged["iters"], "iters", 1),
        seeds=seeds,
        shrinkage=lam,
        sample_sizes=sizes,
        test_per_class=_int(merged["test_per_class"], "test_per_class", 1),
        rate=_check_rate(merged["rate"]),
        record_timing=bool(merged["record_timing"]),
        emit_pgm=bool(merged["emit_pgm"]),
        out=str(merged["out"]),
        raw=raw,
    )


def load_config(path) -> ExperimentConfig:
    try:
        d = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as err:
        raise ConfigError(f"cannot read config {path}: {err}") from err
    return from_dict(d)


def preset(name: str, **over) -> ExperimentConfig:
    return from_dict({"preset": name, **over})
