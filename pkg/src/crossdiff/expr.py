"""Restricted arithmetic expressions in ``u`` and ``v``.

Accepted: numeric literals, the names ``u``, ``v``, ``pi``, ``e``, binary
``+ - * /``, unary ``+``/``-``, parentheses, ``min(x, y, ...)`` and ``exp(x)``.
``^`` and ``**`` are both read as powers with a numeric-constant exponent
only, so every expression stays a composition of the listed operations.
Compiled expressions are vectorized over numpy arrays.
"""

import ast
import math

import numpy as np

from .errors import ParseError

_CONSTANTS = {"pi": math.pi, "e": math.e}
_VARIABLES = ("u", "v")
_BINOPS = {ast.Add: np.add, ast.Sub: np.subtract, ast.Mult: np.multiply, ast.Div: np.divide}


def _fail(message, node, offset):
    line = getattr(node, "lineno", 1)
    col = getattr(node, "col_offset", 0) + 1 + (offset if line == 1 else 0)
    raise ParseError(message, line, col)


class Expression:
    """A validated expression; call it as ``expr(u, v)``."""

    def __init__(self, source, tree, offset=0):
        self.source = source
        self._tree = tree
        self._offset = offset
        self.variables = frozenset(
            n.id for n in ast.walk(tree) if isinstance(n, ast.Name) and n.id in _VARIABLES)
        _Validator(offset).visit(tree)

    def __call__(self, u, v):
        u = np.asarray(u, dtype=float)
        v = np.asarray(v, dtype=float)
        with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
            out = _evaluate(self._tree.body, {"u": u, "v": v})
        return np.broadcast_to(np.asarray(out, dtype=float), np.broadcast(u, v).shape).copy()

    def constant_value(self):
        """Numeric value if the expression does not depend on ``u`` or ``v``, else None."""
        if self.variables:
            return None
        return float(_evaluate(self._tree.body, {}))

    def __repr__(self):
        return f"Expression({self.source!r})"


class _Validator(ast.NodeVisitor):
    def __init__(self, offset):
        self.offset = offset

    def generic_visit(self, node):
        _fail(f"unsupported syntax {type(node).__name__}", node, self.offset)

    def visit_Expression(self, node):
        self.visit(node.body)

    def visit_Constant(self, node):
        if isinstance(node.value, bool) or not isinstance(node.value, (int, float)):
            _fail(f"unsupported literal {node.value!r}", node, self.offset)

    def visit_Name(self, node):
        if node.id not in _VARIABLES and node.id not in _CONSTANTS:
            _fail(f"unknown name {node.id!r}", node, self.offset)

    def visit_BinOp(self, node):
        if isinstance(node.op, ast.Pow):
            if _numeric(node.right) is None:
                _fail("exponent must be a numeric constant", node.right, self.offset)
        elif type(node.op) not in _BINOPS:
            _fail(f"unsupported operator {type(node.op).__name__}", node, self.offset)
        self.visit(node.left)
        self.visit(node.right)

    def visit_UnaryOp(self, node):
        if not isinstance(node.op, (ast.UAdd, ast.USub)):
            _fail(f"unsupported operator {type(node.op).__name__}", node, self.offset)
        self.visit(node.operand)

    def visit_Call(self, node):
        if not isinstance(node.func, ast.Name) or node.func.id not in ("min", "exp"):
            _fail("only min(...) and exp(...) may be called", node, self.offset)
        if node.keywords:
            _fail("keyword arguments are not allowed", node, self.offset)
        if node.func.id == "exp" and len(node.args) != 1:
            _fail("exp takes exactly one argument", node, self.offset)
        if node.func.id == "min" and len(node.args) < 2:
            _fail("min takes at least two arguments", node, self.offset)
        for arg in node.args:
            self.visit(arg)


def _numeric(node):
    if isinstance(node, ast.Constant) and isinstance(node.value, (int, float)) \
            and not isinstance(node.value, bool):
        return float(node.value)
    if isinstance(node, ast.Name) and node.id in _CONSTANTS:
        return _CONSTANTS[node.id]
    if isinstance(node, ast.UnaryOp) and isinstance(node.op, (ast.UAdd, ast.USub)):
        inner = _numeric(node.operand)
        if inner is not None:
            return -inner if isinstance(node.op, ast.USub) else inner
    return None


def _evaluate(node, env):
    if isinstance(node, ast.Constant):
        return float(node.value)
    if isinstance(node, ast.Name):
        return env[node.id] if node.id in _VARIABLES else _CONSTANTS[node.id]
    if isinstance(node, ast.UnaryOp):
        val = _evaluate(node.operand, env)
        return -val if isinstance(node.op, ast.USub) else val
    if isinstance(node, ast.BinOp):
        left = _evaluate(node.left, env)
        right = _evaluate(node.right, env)
        if isinstance(node.op, ast.Pow):
            return np.power(left, right)
        return _BINOPS[type(node.op)](left, right)
    args = [_evaluate(a, env) for a in node.args]
    if node.func.id == "exp":
        return np.exp(args[0])
    out = args[0]
    for a in args[1:]:
        out = np.minimum(out, a)
    return out


def parse_expression(source, line=1, column=1):
    """Parse ``source`` into an :class:`Expression`.

    ``line``/``column`` locate the text inside an enclosing file so that
    errors point at the right place.
    """
    text = source.strip()
    lead = len(source) - len(source.lstrip())
    if not text:
        raise ParseError("empty expression", line, column)
    try:
        tree = ast.parse(text.replace("^", "**"), mode="eval")
    except SyntaxError as exc:
        col = (exc.offset or 1) + lead + column - 1
        raise ParseError(f"syntax error: {exc.msg}", line + (exc.lineno or 1) - 1, col) from None
    try:
        return Expression(text, tree, offset=lead + column - 1)
    except ParseError as exc:
        raise ParseError(exc.message, line + exc.line - 1, exc.column) from None
