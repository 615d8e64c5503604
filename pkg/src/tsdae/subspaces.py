"""Subspace computations and projector construction.

Everything here is a pure function of matrices at a single grid index;
the chain builder maps these over the grid.  Rank decisions use the
relative singular-value threshold from :mod:`tsdae.linalg` in float mode
and exact elimination in rational mode.
"""

from dataclasses import dataclass

import numpy as np

from . import linalg
from .errors import (
    NotADirectSumError,
    ProjectorError,
    ShapeError,
    SubspaceIntersectionError,
    TransversalityError,
)
from .matfunc import DAESystem, MatrixFunction


@dataclass(frozen=True)
class SubspaceBasis:
    """A list of independent column vectors spanning a subspace."""

    ambient: int
    vectors: np.ndarray  # ambient x count
    tol_rank: float | None = None

    @property
    def count(self) -> int:
        return self.vectors.shape[1]

    @staticmethod
    def empty(ambient: int, exact: bool = False) -> "SubspaceBasis":
        return SubspaceBasis(ambient, linalg.zeros((ambient, 0), exact))


@dataclass(frozen=True)
class TransversalityReport:
    ok: bool
    dim_kernel: int
    rank_b: int
    ambient: int
    joint_rank: int


def kernel_basis(m: np.ndarray, tol_rank: float | None = None,
                 exact: bool = False) -> SubspaceBasis:
    """Basis of ker(m); rank(m) + count = cols(m) by construction."""
    vecs = linalg.null_basis(m, tol=tol_rank, exact=exact)
    return SubspaceBasis(m.shape[1], vecs, tol_rank)


def check_transversality(a_sigma: np.ndarray, b: np.ndarray,
                         tol_rank: float | None = None,
                         exact: bool = False) -> TransversalityReport:
    """Does ker A^sigma + im B split the full space R^m directly?"""
    m = a_sigma.shape[1]
    if b.shape[0] != m:
        raise ShapeError("A^sigma columns must match B rows")
    ker = linalg.null_basis(a_sigma, tol=tol_rank, exact=exact)
    imb = linalg.column_span_basis(b, tol=tol_rank, exact=exact)
    joint = np.concatenate([ker, imb], axis=1)
    joint_rank = linalg.rank(joint, tol=tol_rank, exact=exact) if joint.size else 0
    ok = (ker.shape[1] + imb.shape[1] == m) and joint_rank == m
    return TransversalityReport(ok, ker.shape[1], imb.shape[1], m, joint_rank)


def projector_onto_along(image: SubspaceBasis, kernel: SubspaceBasis,
                         exact: bool = False) -> np.ndarray:
    """Projector with im P = image and ker P = kernel (a direct sum)."""
    if image.ambient != kernel.ambient:
        raise ShapeError("image and kernel live in different spaces")
    n = image.ambient
    if image.count + kernel.count != n:
        raise NotADirectSumError(
            f"image ({image.count}) + kernel ({kernel.count}) != ambient ({n})")
    joint = np.concatenate([image.vectors, kernel.vectors], axis=1)
    if linalg.rank(joint, exact=exact) != n:
        raise NotADirectSumError("concatenated basis is rank deficient")
    return linalg.projector_onto_along(image.vectors, kernel.vectors, exact=exact)


def projector_onto_avoiding(target: SubspaceBasis, must_kill: SubspaceBasis,
                            exact: bool = False) -> np.ndarray:
    """Projector onto ``target`` whose kernel contains ``must_kill``.

    Canonical completion: the kernel is must_kill plus the orthogonal
    complement of target + must_kill.  Raises SubspaceIntersectionError
    when the two spaces meet, which is exactly an (A2) failure upstream.
    """
    if target.ambient != must_kill.ambient:
        raise ShapeError("target and must_kill live in different spaces")
    joint = np.concatenate([target.vectors, must_kill.vectors], axis=1)
    joint_rank = linalg.rank(joint, exact=exact)
    if joint_rank != target.count + must_kill.count:
        raise SubspaceIntersectionError(
            None, "target intersects the space it must annihilate")
    rest = linalg.orth_complement_basis(joint, exact=exact)
    kernel = SubspaceBasis(target.ambient,
                           np.concatenate([must_kill.vectors, rest], axis=1))
    return projector_onto_along(target, kernel, exact=exact)


def direct_sum_rank(bases: list[SubspaceBasis], exact: bool = False) -> tuple[int, bool]:
    """Rank of the concatenation; True when the sum is direct."""
    if not bases:
        return 0, True
    ambient = bases[0].ambient
    joint = np.concatenate([b.vectors for b in bases], axis=1)
    if joint.shape[1] == 0:
        return 0, True
    r = linalg.rank(joint, exact=exact)
    return r, r == sum(b.count for b in bases)


@dataclass(frozen=True)
class ProperFactorization:
    """R = B B^-, Binv = the {1,2}-inverse, Pi0 = B^- B, per grid index."""

    R: MatrixFunction
    Binv: MatrixFunction
    Pi0: MatrixFunction


def reflexive_inverse_point(b: np.ndarray, a_sigma: np.ndarray,
                            pi0: np.ndarray | None = None,
                            tol_rank: float | None = None,
                            tol_proj: float = 1e-10,
                            exact: bool = False):
    """The {1,2}-inverse of B at one index, with its two projectors.

    B maps R^n -> R^m.  Given a projector Pi0 along ker B (orthogonal by
    default), B restricted to im Pi0 is a bijection onto im B; B^- inverts
    it there and annihilates ker A^sigma.  Returns (R, Binv, Pi0).
    """
    m, n = b.shape
    report = check_transversality(a_sigma, b, tol_rank, exact)
    if not report.ok:
        raise TransversalityError(None, report.dim_kernel, report.rank_b, m)

    ker_b = linalg.null_basis(b, tol=tol_rank, exact=exact)
    if pi0 is None:
        complement = linalg.orth_complement_basis(ker_b, exact=exact)
        pi0 = linalg.projector_onto_along(complement, ker_b, exact=exact)
    else:
        pi0 = np.asarray(pi0)
        _validate_pi0(pi0, ker_b, tol_proj, exact)

    y = linalg.column_span_basis(pi0, tol=tol_rank, exact=exact)  # basis of im Pi0
    ker_asig = linalg.null_basis(a_sigma, tol=tol_rank, exact=exact)
    # B^- [B y | w] = [y | 0] for w spanning ker A^sigma
    lhs = np.concatenate([b @ y, ker_asig], axis=1)
    if lhs.shape[1] != m:
        raise TransversalityError(None, ker_asig.shape[1], y.shape[1], m)
    rhs = np.concatenate([y, linalg.zeros((n, ker_asig.shape[1]), exact)], axis=1)
    binv = rhs @ linalg.inv(lhs, exact=exact)
    r = b @ binv
    return r, binv, pi0


def _validate_pi0(pi0, ker_b, tol_proj, exact):
    defect = linalg.norm_inf(pi0 @ pi0 - pi0)
    kills = linalg.norm_inf(pi0 @ ker_b) if ker_b.size else 0.0
    n = pi0.shape[0]
    expected_rank = n - ker_b.shape[1]
    if defect > tol_proj or kills > tol_proj or \
            linalg.rank(pi0, exact=exact) != expected_rank:
        raise ProjectorError(
            "supplied Pi0 is not a projector along ker B "
            f"(idempotency defect {defect:.2e}, kernel leakage {kills:.2e})")


def reflexive_inverse(system: DAESystem, pi0_choice: MatrixFunction | None = None,
                      tol_rank: float | None = None, tol_proj: float = 1e-10
                      ) -> ProperFactorization:
    """Per-index {1,2}-inverse for a system; defined on indices 0..N-1."""
    exact = system.exact
    a_sigma = system.A.sigma()
    last = a_sigma.last_index
    rs, binvs, pi0s = [], [], []
    for k in range(last + 1):
        pi0_k = pi0_choice(k) if pi0_choice is not None else None
        r, binv, pi0 = reflexive_inverse_point(
            system.B(k), a_sigma(k), pi0_k, tol_rank, tol_proj, exact)
        rs.append(r)
        binvs.append(binv)
        pi0s.append(pi0)
    grid = system.grid
    return ProperFactorization(
        R=MatrixFunction.from_table(grid, rs, exact),
        Binv=MatrixFunction.from_table(grid, binvs, exact),
        Pi0=MatrixFunction.from_table(grid, pi0s, exact),
    )
