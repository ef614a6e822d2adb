"""Analytic expressions in a small infix grammar, evaluated into jets.

The grammar (documented in the README) is a subset of Python
expression syntax with ``^`` for powers, so parsing is delegated to the
standard :mod:`ast` module and the resulting tree is validated node by node.
"""

from __future__ import annotations

import ast
import math
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from . import jets
from .jets import DomainError, Jet

FUNCTIONS = {
    "exp": jets.exp,
    "log": jets.log,
    "sin": jets.sin,
    "cos": jets.cos,
    "sqrt": jets.sqrt,
}
CONSTANTS = {"pi": math.pi, "e": math.e}


class ExpressionSyntaxError(ValueError):
    def __init__(self, message: str, text: str, line: int, column: int):
        super().__init__(f"{message} at line {line}, column {column}: {text!r}")
        self.text = text
        self.line = line
        self.column = column


class ExpressionDomainError(DomainError):
    """An elementary function was evaluated outside its smooth domain."""


@dataclass(frozen=True)
class Expression:
    text: str
    tree: ast.expr
    variables: tuple[str, ...]

    def __str__(self) -> str:
        return self.text

    def free_variables(self) -> set[str]:
        return {n.id for n in ast.walk(self.tree) if isinstance(n, ast.Name)} - set(CONSTANTS)


_ALLOWED_BINOPS = (ast.Add, ast.Sub, ast.Mult, ast.Div, ast.Pow)


def parse(text: str, variables: Sequence[str]) -> Expression:
    """Parse ``text`` over the given variable names."""
    stripped = text.strip()
    src = stripped.replace("^", "**")
    lead = len(text) - len(text.lstrip())

    def column(offset: int) -> int:
        """1-based column in ``text`` of 1-based ``offset`` into ``src``."""
        k = 0
        for i, ch in enumerate(stripped):
            if k >= offset - 1:
                return lead + i + 1
            k += 2 if ch == "^" else 1
        return lead + len(stripped) + 1

    try:
        tree = ast.parse(src, mode="eval").body
    except SyntaxError as exc:
        raise ExpressionSyntaxError(exc.msg, text, exc.lineno or 1, column(exc.offset or 1)) from None

    def fail(node: ast.AST, msg: str):
        raise ExpressionSyntaxError(
            msg, text, getattr(node, "lineno", 1), column(getattr(node, "col_offset", 0) + 1)
        )

    for node in ast.walk(tree):
        if isinstance(node, ast.BinOp):
            if not isinstance(node.op, _ALLOWED_BINOPS):
                fail(node, f"operator {type(node.op).__name__} not allowed")
        elif isinstance(node, ast.UnaryOp):
            if not isinstance(node.op, (ast.USub, ast.UAdd)):
                fail(node, "unary operator not allowed")
        elif isinstance(node, ast.Call):
            if not isinstance(node.func, ast.Name) or node.func.id not in FUNCTIONS:
                fail(node, "unknown function")
            if len(node.args) != 1 or node.keywords:
                fail(node, "functions take exactly one argument")
        elif isinstance(node, ast.Name):
            if node.id not in variables and node.id not in CONSTANTS and node.id not in FUNCTIONS:
                fail(node, f"unknown name {node.id!r}")
        elif isinstance(node, ast.Constant):
            if not isinstance(node.value, (int, float)) or isinstance(node.value, bool):
                fail(node, "only numeric literals are allowed")
        elif not isinstance(node, (ast.operator, ast.unaryop, ast.expr_context, ast.Load)):
            fail(node, f"syntax element {type(node).__name__} not allowed")
    return Expression(text, tree, tuple(variables))


def evaluate(expr: Expression, bindings: Mapping[str, Jet], cache: dict | None = None) -> Jet:
    """Evaluate with each variable bound to a jet (all in one jet space).

    Function calls are memoized on their source text; pass the same ``cache``
    to share them across expressions with identical bindings.
    """
    any_jet = next(iter(bindings.values()))
    cache = {} if cache is None else cache

    def const(v: float) -> Jet:
        return Jet.constant(v, any_jet.dim, any_jet.order)

    def ev(node: ast.expr) -> Jet | float:
        if isinstance(node, ast.Constant):
            return float(node.value)
        if isinstance(node, ast.Name):
            if node.id in bindings:
                return bindings[node.id]
            return CONSTANTS[node.id]
        if isinstance(node, ast.UnaryOp):
            v = ev(node.operand)
            return -v if isinstance(node.op, ast.USub) else v
        if isinstance(node, ast.BinOp):
            a, b = ev(node.left), ev(node.right)
            op = node.op
            if isinstance(op, ast.Add):
                return a + b
            if isinstance(op, ast.Sub):
                return a - b
            if isinstance(op, ast.Mult):
                return a * b
            if isinstance(op, ast.Div):
                if not isinstance(b, Jet) and b == 0:
                    raise ExpressionDomainError(f"division by zero in {ast.unparse(node)!r}")
                if isinstance(b, Jet) and np.any(np.asarray(b.value()) == 0):
                    raise ExpressionDomainError(f"division by zero in {ast.unparse(node)!r}")
                return a / b
            if isinstance(op, ast.Pow):
                if isinstance(b, Jet):
                    if not isinstance(a, Jet):
                        a = const(a)
                    return ev_call("exp", jets.log(a) * b, node)
                if not isinstance(a, Jet):
                    return float(a) ** b
                try:
                    return a**b
                except DomainError as exc:
                    raise ExpressionDomainError(f"{exc} in {ast.unparse(node)!r}") from None
        if isinstance(node, ast.Call):
            key = ast.dump(node)
            if key not in cache:
                arg = ev(node.args[0])
                if not isinstance(arg, Jet):
                    arg = const(arg)
                cache[key] = ev_call(node.func.id, arg, node)
            return cache[key]
        raise ExpressionSyntaxError("unsupported node", ast.unparse(node), 1, 0)

    def ev_call(name: str, arg: Jet, node: ast.AST) -> Jet:
        try:
            return FUNCTIONS[name](arg)
        except DomainError as exc:
            raise ExpressionDomainError(f"{exc} in {ast.unparse(node)!r}") from None

    out = ev(expr.tree)
    return out if isinstance(out, Jet) else const(out)


def evaluate_expression(
    expr: Expression | str,
    base_point: Sequence[float],
    dim: int | None = None,
    order: int = 4,
    variables: Sequence[str] | None = None,
) -> Jet:
    """Taylor expansion of ``expr`` about ``base_point`` in shifted coordinates."""
    base_point = list(map(float, base_point))
    dim = len(base_point) if dim is None else dim
    if isinstance(expr, str):
        variables = variables or default_variables(dim)
        expr = parse(expr, variables)
    names = expr.variables
    bindings = {
        name: Jet.variable(i, dim, order, base_point[i]) for i, name in enumerate(names)
    }
    return evaluate(expr, bindings)


def default_variables(dim: int) -> tuple[str, ...]:
    if dim <= 4:
        return ("x", "y", "z", "w")[:dim]
    return tuple(f"x{i + 1}" for i in range(dim))
