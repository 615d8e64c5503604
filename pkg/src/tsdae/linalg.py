"""Rank-revealing linear algebra over two scalar fields.

Every routine takes an ``exact`` flag.  With ``exact=False`` matrices are
float64 arrays and rank decisions use a relative singular-value threshold.
With ``exact=True`` matrices are object arrays of ``fractions.Fraction``
and everything (rank, kernels, inverses, determinants) is decided by exact
Gaussian elimination, so the golden fixtures reproduce bit for bit.
"""

from fractions import Fraction

import numpy as np

from .errors import ShapeError


def as_exact(a) -> np.ndarray:
    """Copy ``a`` into an object array of Fractions."""
    arr = np.asarray(a, dtype=object)
    out = np.empty(arr.shape, dtype=object)
    for idx in np.ndindex(arr.shape):
        out[idx] = Fraction(arr[idx])
    return out


def as_float(a) -> np.ndarray:
    arr = np.asarray(a)
    if arr.dtype == object:
        flat = np.array([float(x) for x in arr.flat], dtype=float)
        return flat.reshape(arr.shape)
    return arr.astype(float)


def zeros(shape, exact: bool) -> np.ndarray:
    if exact:
        out = np.empty(shape, dtype=object)
        out[...] = Fraction(0)
        return out
    return np.zeros(shape)


def eye(n: int, exact: bool) -> np.ndarray:
    if exact:
        out = zeros((n, n), exact=True)
        for i in range(n):
            out[i, i] = Fraction(1)
        return out
    return np.eye(n)


def default_rank_tol(m: np.ndarray, singular_values=None) -> float:
    """max(rows, cols) * eps * largest singular value, the usual rcond."""
    if singular_values is None:
        singular_values = np.linalg.svd(as_float(m), compute_uv=False)
    smax = singular_values[0] if len(singular_values) else 0.0
    return max(m.shape) * np.finfo(float).eps * smax


def _rref(m: np.ndarray):
    """Exact reduced row echelon form; returns (rref, pivot columns)."""
    a = m.copy()
    rows, cols = a.shape
    pivots = []
    r = 0
    for c in range(cols):
        pivot = None
        for i in range(r, rows):
            if a[i, c] != 0:
                pivot = i
                break
        if pivot is None:
            continue
        if pivot != r:
            a[[r, pivot]] = a[[pivot, r]]
        a[r] = a[r] / a[r, c]
        for i in range(rows):
            if i != r and a[i, c] != 0:
                a[i] = a[i] - a[i, c] * a[r]
        pivots.append(c)
        r += 1
        if r == rows:
            break
    return a, pivots


def rank(m: np.ndarray, tol: float | None = None, exact: bool = False) -> int:
    if m.size == 0:
        return 0
    if exact:
        _, pivots = _rref(as_exact(m))
        return len(pivots)
    s = np.linalg.svd(as_float(m), compute_uv=False)
    if tol is None:
        tol = default_rank_tol(m, s)
    return int(np.sum(s > tol))


def null_basis(m: np.ndarray, tol: float | None = None, exact: bool = False) -> np.ndarray:
    """Columns span ker(m).  Orthonormal in float mode, unit-pivot in exact mode."""
    rows, cols = m.shape
    if exact:
        a = as_exact(m)
        rr, pivots = _rref(a)
        free = [c for c in range(cols) if c not in pivots]
        basis = zeros((cols, len(free)), exact=True)
        for j, fc in enumerate(free):
            basis[fc, j] = Fraction(1)
            for r, pc in enumerate(pivots):
                basis[pc, j] = -rr[r, fc]
        return basis
    if rows == 0:
        return np.eye(cols)
    u, s, vh = np.linalg.svd(as_float(m))
    if tol is None:
        tol = default_rank_tol(m, s)
    r = int(np.sum(s > tol))
    return vh[r:].T.conj()


def solve(a: np.ndarray, b: np.ndarray, exact: bool = False) -> np.ndarray:
    if exact:
        return _exact_solve(as_exact(a), as_exact(b))
    return np.linalg.solve(as_float(a), as_float(b))


def _exact_solve(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    n = a.shape[0]
    if a.shape[1] != n:
        raise ShapeError("exact solve needs a square matrix")
    rhs = b.reshape(n, -1) if b.ndim == 1 else b
    aug = np.concatenate([a.copy(), rhs.copy()], axis=1)
    rr, pivots = _rref(aug)
    if len(pivots) != n or any(p >= n for p in pivots):
        raise np.linalg.LinAlgError("exact solve: singular matrix")
    x = rr[:, n:]
    return x[:, 0] if b.ndim == 1 else x


def inv(a: np.ndarray, exact: bool = False) -> np.ndarray:
    if exact:
        return _exact_solve(as_exact(a), eye(a.shape[0], exact=True))
    return np.linalg.inv(as_float(a))


def det(a: np.ndarray, exact: bool = False):
    if exact:
        m = as_exact(a)
        n = m.shape[0]
        d = Fraction(1)
        for c in range(n):
            pivot = None
            for i in range(c, n):
                if m[i, c] != 0:
                    pivot = i
                    break
            if pivot is None:
                return Fraction(0)
            if pivot != c:
                m[[c, pivot]] = m[[pivot, c]]
                d = -d
            d *= m[c, c]
            for i in range(c + 1, n):
                if m[i, c] != 0:
                    m[i] = m[i] - (m[i, c] / m[c, c]) * m[c]
        return d
    return np.linalg.det(as_float(a))


def cond(a: np.ndarray) -> float:
    """2-norm condition estimate on the float cast (inf when singular)."""
    s = np.linalg.svd(as_float(a), compute_uv=False)
    if len(s) == 0 or s[-1] == 0.0:
        return np.inf
    return float(s[0] / s[-1])


def lstsq(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    x, *_ = np.linalg.lstsq(as_float(a), as_float(b), rcond=None)
    return x


def column_span_basis(m: np.ndarray, tol: float | None = None, exact: bool = False) -> np.ndarray:
    """Basis of the column space (orthonormal in float mode)."""
    if m.shape[1] == 0 or m.size == 0:
        return zeros((m.shape[0], 0), exact)
    if exact:
        _, pivots = _rref(as_exact(m))
        return as_exact(m)[:, pivots]
    u, s, _ = np.linalg.svd(as_float(m), full_matrices=False)
    if tol is None:
        tol = default_rank_tol(m, s)
    r = int(np.sum(s > tol))
    return u[:, :r]


def orth_complement_basis(basis: np.ndarray, exact: bool = False) -> np.ndarray:
    """Basis of the orthogonal complement of the span of ``basis`` columns."""
    n = basis.shape[0]
    if basis.shape[1] == 0:
        return eye(n, exact)
    return null_basis(basis.T, exact=exact)


def projector_onto_along(image: np.ndarray, kernel: np.ndarray, exact: bool = False) -> np.ndarray:
    """Projector with the given image and kernel bases (columns).

    Requires image + kernel to be a direct decomposition of the ambient
    space; the caller checks that and maps failure to its own error.
    """
    n = image.shape[0]
    u = np.concatenate([image, kernel], axis=1)
    if u.shape[1] != n:
        raise ShapeError("image and kernel sizes do not add up to the ambient dim")
    target = np.concatenate([image, zeros(kernel.shape, exact)], axis=1)
    # P u = target  =>  P = target u^{-1}
    return target @ inv(u, exact=exact)


def orthogonal_projector(basis: np.ndarray, exact: bool = False) -> np.ndarray:
    """Orthogonal projector onto the span of ``basis`` columns.

    Gram inverses keep this rational for rational input, no square roots.
    """
    n = basis.shape[0]
    if basis.shape[1] == 0:
        return zeros((n, n), exact)
    g = basis.T @ basis
    return basis @ inv(g, exact=exact) @ basis.T


def norm_inf(a) -> float:
    arr = as_float(np.asarray(a))
    if arr.size == 0:
        return 0.0
    return float(np.max(np.abs(arr)))
