"""Closed-form expression mini-grammar used by scenario files.

Expressions are ordinary arithmetic over a fixed set of variables, numeric
constants, ``pi`` and ``e``, and a handful of elementary functions::

    "1 + x**2/2"          "cos(theta) + 0.4*cos(2*theta)"

``^`` is accepted as a synonym for ``**`` (rewritten before parsing, so it
binds like ``**``). Parsing goes through :mod:`ast` with a node whitelist;
nothing is ever passed to ``eval``.
"""

import ast
import operator

import numpy as np

from .errors import InputError

_FUNCTIONS = {
    "sin": np.sin,
    "cos": np.cos,
    "tan": np.tan,
    "exp": np.exp,
    "log": np.log,
    "sqrt": np.sqrt,
    "sinh": np.sinh,
    "cosh": np.cosh,
    "tanh": np.tanh,
    "arctan": np.arctan,
    "atan2": np.arctan2,
    "abs": np.abs,
}
# abs has no complex derivative; expressions using it fall back to finite differences
_NON_ANALYTIC = {"abs", "atan2"}

_CONSTANTS = {"pi": np.pi, "e": np.e}

_BINOPS = {
    ast.Add: operator.add,
    ast.Sub: operator.sub,
    ast.Mult: operator.mul,
    ast.Div: operator.truediv,
    ast.Pow: operator.pow,
}
_UNARYOPS = {ast.UAdd: operator.pos, ast.USub: operator.neg}


class Expression:
    """A parsed expression, callable on numpy arrays.

    Parameters
    ----------
    source : str or float
        Expression text. Plain numbers are accepted and become constants.
    variables : sequence of str
        Names the expression may reference.
    """

    def __init__(self, source, variables=("x", "y")):
        if isinstance(source, (int, float)) and not isinstance(source, bool):
            source = repr(float(source))
        if not isinstance(source, str):
            raise InputError(f"expected an expression string, got {type(source).__name__}")
        self.source = source
        self.variables = tuple(variables)
        self._used_functions = set()
        self._used_variables = set()
        try:
            tree = ast.parse(source.strip().replace("^", "**"), mode="eval")
        except SyntaxError as exc:
            raise InputError(f"cannot parse expression {source!r}: {exc.msg}") from None
        self._fn = self._compile(tree.body)

    @property
    def is_analytic(self):
        return not (self._used_functions & _NON_ANALYTIC)

    @property
    def is_constant(self):
        return not self._used_variables

    def __call__(self, **values):
        arrays = [np.asarray(values[name]) for name in self.variables if name in values]
        missing = [name for name in self._used_variables if name not in values]
        if missing:
            raise InputError(f"expression {self.source!r} needs values for {missing}")
        shape = np.broadcast_shapes(*(a.shape for a in arrays)) if arrays else ()
        out = self._fn(values)
        dtype = np.result_type(out, *arrays) if arrays else np.result_type(out)
        return np.broadcast_to(np.asarray(out, dtype=np.result_type(dtype, float)), shape).copy()

    def __repr__(self):
        return f"Expression({self.source!r})"

    def _compile(self, node):
        if isinstance(node, ast.Constant):
            if isinstance(node.value, bool) or not isinstance(node.value, (int, float)):
                raise InputError(f"unsupported literal {node.value!r} in {self.source!r}")
            value = float(node.value)
            return lambda env: value
        if isinstance(node, ast.Name):
            name = node.id
            if name in self.variables:
                self._used_variables.add(name)
                return lambda env: env[name]
            if name in _CONSTANTS:
                value = _CONSTANTS[name]
                return lambda env: value
            raise InputError(
                f"unknown name {name!r} in {self.source!r}; allowed variables are {list(self.variables)}"
            )
        if isinstance(node, ast.BinOp):
            op = _BINOPS.get(type(node.op))
            if op is None:
                raise InputError(f"unsupported operator in {self.source!r}")
            left, right = self._compile(node.left), self._compile(node.right)
            return lambda env: op(left(env), right(env))
        if isinstance(node, ast.UnaryOp):
            op = _UNARYOPS.get(type(node.op))
            if op is None:
                raise InputError(f"unsupported unary operator in {self.source!r}")
            operand = self._compile(node.operand)
            return lambda env: op(operand(env))
        if isinstance(node, ast.Call):
            if not isinstance(node.func, ast.Name) or node.func.id not in _FUNCTIONS:
                raise InputError(f"unsupported function call in {self.source!r}")
            if node.keywords:
                raise InputError(f"keyword arguments are not allowed in {self.source!r}")
            fn = _FUNCTIONS[node.func.id]
            self._used_functions.add(node.func.id)
            args = [self._compile(a) for a in node.args]
            return lambda env: fn(*(a(env) for a in args))
        raise InputError(f"unsupported syntax {type(node).__name__} in {self.source!r}")
