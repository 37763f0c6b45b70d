"""Experiment configuration and the built-in test problems."""
from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Callable

import numpy as np

from .expr import ExpressionError, compile_expression
from .pushforward import DensityWeight, ParameterBox, jacobi_weight, uniform_weight

__all__ = [
    "ConfigError",
    "Problem",
    "ExperimentConfig",
    "load_config",
    "config_from_dict",
    "build_problem",
    "BUILTIN_PROBLEMS",
    "DEFAULT_SWEEPS",
]

BUILTIN_PROBLEMS = ("tanh-paper", "oscillator", "oscillatory-g", "fk-atom", "custom")
SURROGATE_KINDS = ("spline", "pwl", "gpc", "tensor-spline", "none")
BOUNDARIES = ("not-a-knot", "clamped", "natural")
DEFAULT_SWEEPS = {
    "spline": [8, 16, 32, 64, 128, 256],
    "tensor-spline": [64, 256, 1024],
    "pwl": [8, 16, 32, 64, 128, 256],
    "gpc": [4, 8, 16, 32, 64, 120],
    "none": [1],
}
DEFAULT_BUDGETS = [16, 32, 64, 128, 256, 512]


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class Problem:
    """A response f on a weighted box, optionally with a fixed comparison g."""

    name: str
    f: Callable
    box: ParameterBox
    weight: DensityWeight
    df: Callable | None = None
    pieces: tuple | None = None  # monotone pieces of f (1D), None if unknown
    g: Callable | None = None
    dg: Callable | None = None
    g_pieces: tuple | None = None
    has_density: bool = True

    @property
    def dim(self):
        return self.box.dim


@dataclass(frozen=True)
class ExperimentConfig:
    problem: dict = field(default_factory=lambda: {"name": "tanh-paper"})
    surrogate_kind: str = "spline"
    boundary: str = "not-a-knot"
    n_sweep: tuple = ()
    metrics: tuple = ("w1",)
    ref_resolution: int = 4000
    seed: int = 0
    out_dir: str = "out"
    record_walltime: bool = False
    p: float = 1.0
    q_list: tuple = (1.0, 2.0, 4.0)
    K: int = 5
    seeds: tuple = tuple(range(20))
    budgets: tuple = tuple(DEFAULT_BUDGETS)
    atoms_per_bin: int | None = None

    def with_overrides(self, **kw):
        kw = {k: v for k, v in kw.items() if v is not None}
        return validate(replace(self, **kw)) if kw else self


_TOP_KEYS = {"problem", "surrogate", "metrics", "ref_resolution", "seed", "out_dir",
             "record_walltime", "bounds", "histogram"}
_PROBLEM_KEYS = {"name", "expression", "g_expression", "domain", "weight", "k", "delta"}
_WEIGHT_KEYS = {"kind", "beta1", "beta2"}
_SURROGATE_KEYS = {"kind", "boundary", "n_sweep"}
_BOUNDS_KEYS = {"p", "q_list", "K"}
_HIST_KEYS = {"seeds", "budgets", "atoms_per_bin"}


def _reject_unknown(d, allowed, where):
    if not isinstance(d, dict):
        raise ConfigError(f"{where} must be a JSON object")
    extra = sorted(set(d) - allowed)
    if extra:
        raise ConfigError(f"unknown key(s) in {where}: {', '.join(extra)}")


def _metric_ok(m):
    if m in ("w1", "w2", "l1cdf", "l1pdf", "hm1"):
        return True
    if m.startswith("wp:"):
        try:
            return float(m[3:]) >= 1
        except ValueError:
            return False
    return False


def config_from_dict(d: dict) -> ExperimentConfig:
    _reject_unknown(d, _TOP_KEYS, "config")
    kw = {}
    if "problem" in d:
        prob = d["problem"]
        _reject_unknown(prob, _PROBLEM_KEYS, "problem")
        if "weight" in prob:
            _reject_unknown(prob["weight"], _WEIGHT_KEYS, "problem.weight")
        kw["problem"] = dict(prob)
    if "surrogate" in d:
        s = d["surrogate"]
        _reject_unknown(s, _SURROGATE_KEYS, "surrogate")
        if "kind" in s:
            kw["surrogate_kind"] = s["kind"]
        if "boundary" in s:
            kw["boundary"] = s["boundary"]
        if s.get("n_sweep") is not None:
            kw["n_sweep"] = tuple(int(n) for n in s["n_sweep"])
    if "metrics" in d:
        kw["metrics"] = tuple(d["metrics"])
    for key in ("ref_resolution", "seed"):
        if key in d:
            kw[key] = int(d[key])
    if "out_dir" in d:
        kw["out_dir"] = str(d["out_dir"])
    if "record_walltime" in d:
        kw["record_walltime"] = bool(d["record_walltime"])
    if "bounds" in d:
        b = d["bounds"]
        _reject_unknown(b, _BOUNDS_KEYS, "bounds")
        if "p" in b:
            kw["p"] = float(b["p"])
        if "q_list" in b:
            kw["q_list"] = tuple(float(q) for q in b["q_list"])
        if "K" in b:
            kw["K"] = int(b["K"])
    if "histogram" in d:
        h = d["histogram"]
        _reject_unknown(h, _HIST_KEYS, "histogram")
        if "seeds" in h:
            kw["seeds"] = tuple(int(s) for s in h["seeds"])
        if "budgets" in h:
            kw["budgets"] = tuple(int(n) for n in h["budgets"])
        if h.get("atoms_per_bin") is not None:
            kw["atoms_per_bin"] = int(h["atoms_per_bin"])
    return validate(ExperimentConfig(**kw))


def validate(cfg: ExperimentConfig) -> ExperimentConfig:
    name = cfg.problem.get("name")
    if name not in BUILTIN_PROBLEMS:
        raise ConfigError(f"problem.name must be one of {BUILTIN_PROBLEMS}, got {name!r}")
    if cfg.surrogate_kind not in SURROGATE_KINDS:
        raise ConfigError(f"surrogate.kind must be one of {SURROGATE_KINDS}")
    if cfg.boundary not in BOUNDARIES:
        raise ConfigError(f"surrogate.boundary must be one of {BOUNDARIES}")
    if not cfg.n_sweep:
        cfg = replace(cfg, n_sweep=tuple(DEFAULT_SWEEPS[cfg.surrogate_kind]))
    if any(b <= a for a, b in zip(cfg.n_sweep, cfg.n_sweep[1:])):
        raise ConfigError("surrogate.n_sweep must be strictly increasing")
    if any(n < 1 for n in cfg.n_sweep):
        raise ConfigError("surrogate.n_sweep entries must be positive")
    if not cfg.metrics:
        raise ConfigError("metrics must be nonempty")
    bad = [m for m in cfg.metrics if not _metric_ok(m)]
    if bad:
        raise ConfigError(f"unknown metric(s): {bad}; use w1, w2, wp:<p>, l1cdf, l1pdf, hm1")
    if len(set(cfg.metrics)) != len(cfg.metrics):
        raise ConfigError("duplicate metrics")
    if cfg.ref_resolution < 2:
        raise ConfigError("ref_resolution must be >= 2")
    if cfg.seed < 0 or cfg.seed >= 2**64:
        raise ConfigError("seed must be an unsigned 64-bit integer")
    if cfg.p < 1:
        raise ConfigError("bounds.p must be >= 1")
    if any(q < 1 for q in cfg.q_list):
        raise ConfigError("bounds.q_list entries must be >= 1")
    if cfg.K < 1:
        raise ConfigError("bounds.K must be >= 1")
    if not cfg.seeds:
        raise ConfigError("histogram.seeds must be nonempty")
    if any(b <= a for a, b in zip(cfg.budgets, cfg.budgets[1:])) or not cfg.budgets:
        raise ConfigError("histogram.budgets must be nonempty and strictly increasing")
    if cfg.surrogate_kind == "none" and name not in ("oscillatory-g",) and "g_expression" not in cfg.problem:
        raise ConfigError("surrogate.kind 'none' needs a problem with a fixed g")
    build_problem(cfg.problem)  # surfaces problem errors early
    return cfg


def load_config(path) -> ExperimentConfig:
    p = Path(path)
    try:
        data = json.loads(p.read_text())
    except OSError as exc:
        raise ConfigError(f"cannot read config {p}: {exc.strerror}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{p} is not valid JSON: {exc}") from None
    return config_from_dict(data)


# --- problems -------------------------------------------------------------------


def _weight_for(section, box):
    section = section or {"kind": "uniform"}
    kind = section.get("kind", "uniform")
    if kind == "uniform":
        return uniform_weight(box)
    if kind == "jacobi":
        return jacobi_weight(float(section.get("beta1", 0.0)), float(section.get("beta2", 0.0)), box)
    raise ConfigError(f"problem.weight.kind must be 'uniform' or 'jacobi', got {kind!r}")


def _box_for(section, default):
    dom = section.get("domain", default)
    try:
        lo = [float(iv[0]) for iv in dom]
        hi = [float(iv[1]) for iv in dom]
        return ParameterBox(lo, hi)
    except (TypeError, IndexError, ValueError) as exc:
        raise ConfigError(f"problem.domain must be a list of [lo, hi] pairs: {exc}") from None


def tanh_ramp(a):
    return 0.5 * a + np.tanh(9.0 * a)


def tanh_ramp_deriv(a):
    return 0.5 + 9.0 / np.cosh(9.0 * a) ** 2


def build_problem(section: dict) -> Problem:
    name = section.get("name")
    if name == "tanh-paper":
        box = _box_for(section, [[-1.0, 1.0]])
        return Problem(name, tanh_ramp, box, _weight_for(section.get("weight"), box),
                       df=tanh_ramp_deriv, pieces=((box.lower[0], box.upper[0]),))
    if name == "oscillator":
        # y'' + y = 0, y(0) = 0, y'(0) = v  =>  y(pi/2)^2 = v^2
        box = _box_for(section, [[1.0, 2.0]])
        if box.lower[0] * box.upper[0] <= 0:
            raise ConfigError("oscillator domain must not contain 0 (v^2 is then not monotone)")
        return Problem(name, lambda v: np.asarray(v, dtype=float) ** 2, box,
                       _weight_for(section.get("weight"), box), df=lambda v: 2.0 * np.asarray(v),
                       pieces=((box.lower[0], box.upper[0]),))
    if name == "oscillatory-g":
        delta = float(section.get("delta", 1e-3))
        if not 0 < delta < 0.1:
            raise ConfigError("problem.delta must lie in (0, 0.1)")
        box = _box_for(section, [[0.0, 1.0]])
        iv = ((box.lower[0], box.upper[0]),)
        return Problem(
            name,
            lambda a: np.array(a, dtype=float),
            box,
            _weight_for(section.get("weight"), box),
            df=lambda a: np.ones_like(np.asarray(a, dtype=float)),
            pieces=iv,
            g=lambda a: np.asarray(a, dtype=float) + delta * np.sin(np.asarray(a) / (10.0 * delta)),
            dg=lambda a: 1.0 + 0.1 * np.cos(np.asarray(a) / (10.0 * delta)),
            g_pieces=iv,
        )
    if name == "fk-atom":
        k = int(section.get("k", 2))
        if k < 1:
            raise ConfigError("problem.k must be >= 1")
        box = _box_for(section, [[0.0, 1.0]])

        def fk(a):
            a = np.asarray(a, dtype=float)
            return np.where(a <= 0.5, 0.0, (a - 0.5) ** k)

        return Problem(name, fk, box, _weight_for(section.get("weight"), box), has_density=False)
    if name == "custom":
        if "expression" not in section:
            raise ConfigError("custom problem needs problem.expression")
        box = _box_for(section, [[0.0, 1.0]])
        try:
            f = compile_expression(section["expression"], box.dim)
            g = compile_expression(section["g_expression"], box.dim) if "g_expression" in section else None
        except ExpressionError as exc:
            raise ConfigError(f"problem expression: {exc}") from None
        return Problem(name, f, box, _weight_for(section.get("weight"), box), g=g)
    raise ConfigError(f"unknown problem {name!r}")


def parse_metric(m: str):
    """Return (kind, order) for a metric name; order is the Wasserstein p if any."""
    if m == "w1":
        return "wp", 1.0
    if m == "w2":
        return "wp", 2.0
    if m.startswith("wp:"):
        return "wp", float(m[3:])
    return m, None


def metric_column(m: str) -> str:
    return m.replace(":", "_")
