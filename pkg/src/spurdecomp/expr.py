"""Restricted expression language for mechanism definitions.

Model files may give a mechanism as a small arithmetic/boolean expression
over its parents, e.g. ``"X + Z1 + Z2"`` or ``"UX & (U1X | U2X)"``.  The
expression is parsed with :mod:`ast` and interpreted over a whitelist of
node types; nothing is passed to :func:`eval`.
"""
from __future__ import annotations

import ast
import operator
from typing import Any, Callable, Mapping

_BINOPS: dict[type, Callable[[Any, Any], Any]] = {
    ast.Add: operator.add,
    ast.Sub: operator.sub,
    ast.Mult: operator.mul,
    ast.Div: operator.truediv,
    ast.FloorDiv: operator.floordiv,
    ast.Mod: operator.mod,
    ast.Pow: operator.pow,
    ast.BitAnd: operator.and_,
    ast.BitOr: operator.or_,
    ast.BitXor: operator.xor,
}

_CMPOPS: dict[type, Callable[[Any, Any], bool]] = {
    ast.Eq: operator.eq,
    ast.NotEq: operator.ne,
    ast.Lt: operator.lt,
    ast.LtE: operator.le,
    ast.Gt: operator.gt,
    ast.GtE: operator.ge,
}

_FUNCS: dict[str, Callable[..., Any]] = {
    "min": min,
    "max": max,
    "abs": abs,
    "int": int,
}


class ExpressionError(ValueError):
    """Raised for expressions outside the supported subset."""


class Expression:
    """A compiled mechanism expression.

    >>> Expression("X + Z1").evaluate({"X": 1, "Z1": 1})
    2
    """

    def __init__(self, source: str):
        self.source = source
        try:
            self._tree = ast.parse(source, mode="eval")
        except SyntaxError as exc:
            raise ExpressionError(f"cannot parse expression {source!r}: {exc.msg}") from exc
        self.names = frozenset(
            node.id for node in ast.walk(self._tree) if isinstance(node, ast.Name)
        ) - frozenset(_FUNCS)
        self._check(self._tree.body)

    def _check(self, node: ast.AST) -> None:
        allowed = (
            ast.BinOp, ast.UnaryOp, ast.BoolOp, ast.Compare, ast.IfExp,
            ast.Name, ast.Constant, ast.Call, ast.Load,
        )
        for sub in ast.walk(node):
            if isinstance(sub, (ast.operator, ast.unaryop, ast.boolop, ast.cmpop)):
                continue
            if not isinstance(sub, allowed):
                raise ExpressionError(
                    f"unsupported syntax {type(sub).__name__} in {self.source!r}"
                )
            if isinstance(sub, ast.Call):
                if not (isinstance(sub.func, ast.Name) and sub.func.id in _FUNCS) or sub.keywords:
                    raise ExpressionError(f"unsupported call in {self.source!r}")
            if isinstance(sub, ast.BinOp) and type(sub.op) not in _BINOPS:
                raise ExpressionError(f"unsupported operator in {self.source!r}")

    def evaluate(self, env: Mapping[str, Any]) -> Any:
        value = self._eval(self._tree.body, env)
        if isinstance(value, bool):
            return int(value)
        return value

    def _eval(self, node: ast.AST, env: Mapping[str, Any]) -> Any:
        if isinstance(node, ast.Constant):
            return node.value
        if isinstance(node, ast.Name):
            try:
                return env[node.id]
            except KeyError:
                raise ExpressionError(f"unknown name {node.id!r} in {self.source!r}") from None
        if isinstance(node, ast.BinOp):
            return _BINOPS[type(node.op)](self._eval(node.left, env), self._eval(node.right, env))
        if isinstance(node, ast.UnaryOp):
            operand = self._eval(node.operand, env)
            if isinstance(node.op, ast.USub):
                return -operand
            if isinstance(node.op, ast.UAdd):
                return +operand
            if isinstance(node.op, ast.Not):
                return int(not operand)
            if isinstance(node.op, ast.Invert):
                # boolean complement on 0/1 values
                return 1 - int(operand)
        if isinstance(node, ast.BoolOp):
            values = [self._eval(v, env) for v in node.values]
            if isinstance(node.op, ast.And):
                return int(all(values))
            return int(any(values))
        if isinstance(node, ast.Compare):
            left = self._eval(node.left, env)
            for op, comparator in zip(node.ops, node.comparators):
                right = self._eval(comparator, env)
                if not _CMPOPS[type(op)](left, right):
                    return 0
                left = right
            return 1
        if isinstance(node, ast.IfExp):
            if self._eval(node.test, env):
                return self._eval(node.body, env)
            return self._eval(node.orelse, env)
        if isinstance(node, ast.Call):
            return _FUNCS[node.func.id](*(self._eval(a, env) for a in node.args))
        raise ExpressionError(f"unsupported syntax in {self.source!r}")
