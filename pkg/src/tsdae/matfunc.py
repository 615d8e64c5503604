"""Matrix- and vector-valued functions on a TimeScaleGrid.

A MatrixFunction is an immutable map from grid indices to matrices of a
fixed shape.  Two backing stores exist behind the same interface: a
per-index table, or a closure evaluated lazily and cached per index.
Analysis code never knows which.  Values are float64 arrays, or object
arrays of Fractions when the function is exact.

The sigma shift and the delta derivative shrink the valid index range by
one at the top; compositions intersect ranges.
"""

from dataclasses import dataclass

import numpy as np

from . import linalg
from .errors import GridIndexError, ShapeError
from .grid import TimeScaleGrid


class MatrixFunction:
    """Immutable matrix-valued function on a grid, evaluated by index."""

    def __init__(self, grid: TimeScaleGrid, shape, fn, last_index=None, exact=False):
        self.grid = grid
        self.shape = tuple(shape)
        self._fn = fn
        self.last_index = grid.last_index if last_index is None else last_index
        self.exact = exact
        self._cache = {}

    # -- constructors ------------------------------------------------

    @classmethod
    def from_table(cls, grid, values, exact=False):
        """Wrap a sequence of per-index matrices (index 0 upward)."""
        tables = [_coerce(v, exact) for v in values]
        shape = tables[0].shape
        for v in tables:
            if v.shape != shape:
                raise ShapeError("table entries change shape across indices")
        return cls(grid, shape, lambda k: tables[k],
                   last_index=len(tables) - 1, exact=exact)

    @classmethod
    def from_callable(cls, grid, shape, fn_of_t, exact=False):
        """Evaluate fn(t_k) lazily; fn receives the time value, not the index."""
        return cls(grid, shape, lambda k: _coerce(fn_of_t(grid.t(k)), exact),
                   exact=exact)

    @classmethod
    def from_entries(cls, grid, entries, exact=False):
        """entries[i][j] is a parsed expression Node evaluated at t."""
        rows = len(entries)
        cols = len(entries[0])

        def fn(k):
            t = grid.t(k)
            out = np.empty((rows, cols), dtype=object)
            for i in range(rows):
                for j in range(cols):
                    out[i, j] = entries[i][j].evaluate(t)
            return _coerce(out, exact)

        return cls(grid, (rows, cols), fn, exact=exact)

    @classmethod
    def constant(cls, grid, value, exact=False, last_index=None):
        mat = _coerce(value, exact)
        return cls(grid, mat.shape, lambda k: mat, last_index=last_index, exact=exact)

    # -- evaluation --------------------------------------------------

    def __call__(self, k: int) -> np.ndarray:
        if not 0 <= k <= self.last_index:
            raise GridIndexError(
                f"matrix function evaluated at index {k}, valid range 0..{self.last_index}")
        cached = self._cache.get(k)
        if cached is None:
            value = self._fn(k)
            if value.shape != self.shape:
                raise ShapeError(
                    f"entry evaluation produced shape {value.shape}, declared {self.shape}")
            # idempotent fill: concurrent readers may race, same value wins
            cached = self._cache.setdefault(k, value)
        return cached

    def table(self):
        return [self(k) for k in range(self.last_index + 1)]

    # -- calculus ----------------------------------------------------

    def sigma(self) -> "MatrixFunction":
        """F^sigma: index k maps to F(k+1); loses the last index."""
        return MatrixFunction(self.grid, self.shape, lambda k: self(k + 1),
                              last_index=self.last_index - 1, exact=self.exact)

    def delta(self) -> "MatrixFunction":
        """Entrywise exact delta derivative, defined on 0..last-1."""

        def fn(k):
            mu = self.grid.mu(k)
            return (self(k + 1) - self(k)) / mu

        return MatrixFunction(self.grid, self.shape, fn,
                              last_index=self.last_index - 1, exact=self.exact)

    # -- pointwise algebra -------------------------------------------

    def _combine(self, other, op, shape):
        last = min(self.last_index, other.last_index)
        exact = self.exact and other.exact
        return MatrixFunction(self.grid, shape, lambda k: op(self(k), other(k)),
                              last_index=last, exact=exact)

    def __matmul__(self, other):
        if self.shape[1] != other.shape[0]:
            raise ShapeError(f"cannot multiply {self.shape} by {other.shape}")
        return self._combine(other, lambda a, b: a @ b, (self.shape[0], other.shape[1]))

    def __add__(self, other):
        if self.shape != other.shape:
            raise ShapeError(f"cannot add {self.shape} and {other.shape}")
        return self._combine(other, lambda a, b: a + b, self.shape)

    def __sub__(self, other):
        if self.shape != other.shape:
            raise ShapeError(f"cannot subtract {other.shape} from {self.shape}")
        return self._combine(other, lambda a, b: a - b, self.shape)

    def __neg__(self):
        return MatrixFunction(self.grid, self.shape, lambda k: -self(k),
                              last_index=self.last_index, exact=self.exact)


def _coerce(value, exact):
    if exact:
        return linalg.as_exact(value)
    return linalg.as_float(np.asarray(value))


def check_product_rule(f: MatrixFunction, g: MatrixFunction, k: int,
                       rel_tol: float = 1e-12) -> bool:
    """(fg)^Delta == f^Delta g + f^sigma g^Delta at index k (both orderings)."""
    fg = f @ g
    lhs = fg.delta()(k)
    first = f.delta()(k) @ g(k) + f.sigma()(k) @ g.delta()(k)
    second = f(k) @ g.delta()(k) + f.delta()(k) @ g.sigma()(k)
    scale = 1.0 + linalg.norm_inf(lhs)
    return (linalg.norm_inf(lhs - first) <= rel_tol * scale
            and linalg.norm_inf(lhs - second) <= rel_tol * scale)


@dataclass(frozen=True)
class DAESystem:
    """The quadruple (A, B, C, f) with dims (n, m) on a common grid.

    Shapes: A is n x m, B is m x n, C is n x n, f is n x 1, matching the
    dynamic-algebraic equation A^sigma (Bx)^Delta = C^sigma x^sigma + f.
    """

    grid: TimeScaleGrid
    A: MatrixFunction
    B: MatrixFunction
    C: MatrixFunction
    f: MatrixFunction
    n: int
    m: int

    def __post_init__(self):
        expect = {
            "A": (self.n, self.m),
            "B": (self.m, self.n),
            "C": (self.n, self.n),
            "f": (self.n, 1),
        }
        for name, shape in expect.items():
            got = getattr(self, name).shape
            if got != shape:
                raise ShapeError(f"{name} has shape {got}, expected {shape}")

    @property
    def exact(self) -> bool:
        return self.grid.exact and all(
            mf.exact for mf in (self.A, self.B, self.C, self.f))
