import json
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from wasserpush.config import (
    DEFAULT_SWEEPS,
    ConfigError,
    ExperimentConfig,
    build_problem,
    config_from_dict,
    load_config,
    metric_column,
    parse_metric,
)
from wasserpush.expr import ExpressionError, compile_expression


def test_defaults():
    cfg = config_from_dict({})
    assert cfg.problem == {"name": "tanh-paper"}
    assert cfg.n_sweep == tuple(DEFAULT_SWEEPS["spline"])
    assert cfg.record_walltime is False


def test_gpc_default_sweep():
    cfg = config_from_dict({"surrogate": {"kind": "gpc"}})
    assert cfg.n_sweep == (4, 8, 16, 32, 64, 120)


@pytest.mark.parametrize(
    "bad",
    [
        {"nope": 1},
        {"problem": {"name": "tanh-paper", "extra": 2}},
        {"problem": {"name": "custom", "expression": "x", "weight": {"kind": "uniform", "beta": 1}}},
        {"surrogate": {"kind": "spline", "order": 3}},
        {"bounds": {"r": 1}},
        {"histogram": {"bins": 3}},
    ],
)
def test_unknown_keys_rejected(bad):
    with pytest.raises(ConfigError, match="unknown key"):
        config_from_dict(bad)


@pytest.mark.parametrize(
    "bad",
    [
        {"problem": {"name": "bogus"}},
        {"surrogate": {"kind": "chebfun"}},
        {"surrogate": {"boundary": "periodic"}},
        {"surrogate": {"n_sweep": [8, 8]}},
        {"metrics": ["w0"]},
        {"metrics": ["wp:0.5"]},
        {"metrics": []},
        {"ref_resolution": 1},
        {"seed": -1},
        {"seed": 2**64},
        {"bounds": {"p": 0.5}},
        {"histogram": {"budgets": [32, 16]}},
        {"surrogate": {"kind": "none"}},
        {"problem": {"name": "custom"}},
        {"problem": {"name": "custom", "expression": "x +"}},
    ],
)
def test_invalid_values_rejected(bad):
    with pytest.raises(ConfigError):
        config_from_dict(bad)


def test_load_config_errors(tmp_path):
    with pytest.raises(ConfigError, match="cannot read"):
        load_config(tmp_path / "missing.json")
    p = tmp_path / "bad.json"
    p.write_text("{not json")
    with pytest.raises(ConfigError, match="valid JSON"):
        load_config(p)
    p.write_text(json.dumps({"metrics": ["w1", "wp:3", "hm1"], "seed": 9}))
    cfg = load_config(p)
    assert cfg.metrics == ("w1", "wp:3", "hm1") and cfg.seed == 9


def test_overrides_revalidate():
    cfg = config_from_dict({})
    assert cfg.with_overrides(seed=5).seed == 5
    assert cfg.with_overrides(seed=None) is cfg
    with pytest.raises(ConfigError):
        cfg.with_overrides(ref_resolution=0)


def test_metric_helpers():
    assert parse_metric("w1") == ("wp", 1.0)
    assert parse_metric("wp:2.5") == ("wp", 2.5)
    assert parse_metric("hm1") == ("hm1", None)
    assert metric_column("wp:3") == "wp_3"


def test_builtin_problems():
    p = build_problem({"name": "tanh-paper"})
    x = np.linspace(-1, 1, 11)
    np.testing.assert_allclose(p.f(x), x / 2 + np.tanh(9 * x))
    h = 1e-6
    np.testing.assert_allclose(p.df(x), (p.f(x + h) - p.f(x - h)) / (2 * h), rtol=1e-6)
    osc = build_problem({"name": "oscillator"})
    assert osc.box.lower[0] == 1.0 and osc.f(np.array([1.5]))[0] == 2.25
    atom = build_problem({"name": "fk-atom", "k": 3})
    assert atom.has_density is False and atom.f(np.array([0.2, 0.7]))[1] == pytest.approx(0.2**3)
    g = build_problem({"name": "oscillatory-g", "delta": 0.01})
    assert np.max(np.abs(g.g(x) - x)) <= 0.01
    with pytest.raises(ConfigError):
        build_problem({"name": "oscillator", "domain": [[-1, 1]]})


def test_custom_problem_with_weight():
    p = build_problem({"name": "custom", "expression": "exp(x) * sin(pi * x)", "domain": [[-1, 1]],
                       "weight": {"kind": "jacobi", "beta1": 1, "beta2": 2}})
    assert p.weight.kind == "jacobi" and p.weight.params == (1.0, 2.0)
    assert p.f(np.array([0.5]))[0] == pytest.approx(math.exp(0.5))


def test_custom_2d():
    p = build_problem({"name": "custom", "expression": "x * y + 1", "domain": [[0, 1], [0, 2]]})
    assert p.dim == 2
    np.testing.assert_allclose(p.f(np.array([[0.5, 2.0], [1.0, 1.0]])), [2.0, 2.0])


# --- expression language ----------------------------------------------------------


@pytest.mark.parametrize(
    "text, x, expected",
    [
        ("x/2 + tanh(9*x)", 0.3, 0.15 + math.tanh(2.7)),
        ("pow(x, 3) - 2**x", 2.0, 4.0),
        ("-x + pi * e", 1.0, -1 + math.pi * math.e),
        ("cos(x) + exp(-x)", 0.0, 2.0),
        ("3", 7.0, 3.0),
    ],
)
def test_expressions(text, x, expected):
    f = compile_expression(text)
    assert f(np.array([x]))[0] == pytest.approx(expected)


@pytest.mark.parametrize(
    "text",
    ["__import__('os')", "x.real", "[x]", "sqrt(x)", "sin(x, x)", "lambda: 1", "x if x else 1", "z", "sin(x=1)", "True"],
)
def test_expression_whitelist(text):
    with pytest.raises(ExpressionError):
        compile_expression(text)


def test_y_needs_2d():
    with pytest.raises(ExpressionError):
        compile_expression("x + y")


@given(st.floats(-5, 5), st.floats(-5, 5))
def test_expression_matches_python(a, b):
    f = compile_expression("sin(x) * cos(y) + x**2 - y/3", dim=2)
    got = f(np.array([[a, b]]))[0]
    assert got == pytest.approx(math.sin(a) * math.cos(b) + a**2 - b / 3, rel=1e-12, abs=1e-12)


def test_dataclass_is_frozen():
    with pytest.raises(Exception):
        ExperimentConfig().seed = 3
