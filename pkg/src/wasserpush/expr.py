"""Tiny arithmetic expression language for custom response functions.

Grammar: numbers, the variables ``x`` (first coordinate) and ``y`` (second
coordinate), the constants ``pi`` and ``e``, the operators ``+ - * / **``
and the functions ``sin cos tanh exp pow``. Parsed with :mod:`ast` and
evaluated with numpy; nothing else is reachable.
"""
from __future__ import annotations

import ast
import math
import operator

import numpy as np

__all__ = ["compile_expression", "ExpressionError"]

_BINOPS = {
    ast.Add: operator.add,
    ast.Sub: operator.sub,
    ast.Mult: operator.mul,
    ast.Div: operator.truediv,
    ast.Pow: operator.pow,
}
_UNARY = {ast.USub: operator.neg, ast.UAdd: operator.pos}
_FUNCS = {"sin": (np.sin, 1), "cos": (np.cos, 1), "tanh": (np.tanh, 1), "exp": (np.exp, 1), "pow": (np.power, 2)}
_CONSTS = {"pi": math.pi, "e": math.e}
_VARS = ("x", "y")


class ExpressionError(ValueError):
    pass


def _build(node):
    if isinstance(node, ast.Expression):
        return _build(node.body)
    if isinstance(node, ast.Constant) and isinstance(node.value, (int, float)) and not isinstance(node.value, bool):
        v = float(node.value)
        return lambda env: v
    if isinstance(node, ast.Name):
        if node.id in _CONSTS:
            v = _CONSTS[node.id]
            return lambda env: v
        if node.id in _VARS:
            name = node.id
            return lambda env: env[name]
        raise ExpressionError(f"unknown name {node.id!r}")
    if isinstance(node, ast.BinOp) and type(node.op) in _BINOPS:
        op = _BINOPS[type(node.op)]
        a, b = _build(node.left), _build(node.right)
        return lambda env: op(a(env), b(env))
    if isinstance(node, ast.UnaryOp) and type(node.op) in _UNARY:
        op = _UNARY[type(node.op)]
        a = _build(node.operand)
        return lambda env: op(a(env))
    if isinstance(node, ast.Call) and isinstance(node.func, ast.Name) and not node.keywords:
        if node.func.id not in _FUNCS:
            raise ExpressionError(f"unknown function {node.func.id!r}")
        fn, arity = _FUNCS[node.func.id]
        if len(node.args) != arity:
            raise ExpressionError(f"{node.func.id} takes {arity} argument(s)")
        args = [_build(a) for a in node.args]
        return lambda env: fn(*(a(env) for a in args))
    raise ExpressionError(f"unsupported syntax: {ast.dump(node)[:60]}")


def compile_expression(text: str, dim: int = 1):
    """Return a vectorized callable for ``text``.

    In 1D the callable takes a flat array of x values; in 2D it takes an
    (n, 2) array of (x, y) points.
    """
    try:
        tree = ast.parse(text.strip(), mode="eval")
    except SyntaxError as exc:
        raise ExpressionError(f"cannot parse {text!r}: {exc.msg}") from None
    body = _build(tree)
    used = {n.id for n in ast.walk(tree) if isinstance(n, ast.Name)}
    if dim == 1 and "y" in used:
        raise ExpressionError("variable 'y' needs a 2D domain")

    def func(a):
        a = np.asarray(a, dtype=float)
        if dim == 1:
            x = a.reshape(-1) if a.ndim > 1 else a
            env = {"x": x}
            shape = x.shape
        else:
            a = a.reshape(-1, dim)
            env = {"x": a[:, 0], "y": a[:, 1]}
            shape = (a.shape[0],)
        with np.errstate(all="ignore"):
            out = body(env)
        return np.broadcast_to(np.asarray(out, dtype=float), shape).copy()

    func.expression = text
    return func
