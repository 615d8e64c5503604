"""Independent brute-force stepping of the original equation.

At a right-scattered point the equation is the plain linear system

    [A^sigma B^sigma / mu - C^sigma] x^sigma = f + A^sigma B x / mu,

so a trajectory can be continued one step at a time with no projector
machinery at all.  That makes it a genuinely independent cross-check for
the decoupled solution: wherever the step matrix W is nonsingular the two
must agree.  When W is singular the oracle falls back to the minimum-norm
least-squares step and only reports the consistency defect; it does not
pretend to decide uniqueness.
"""

from dataclasses import dataclass

import numpy as np

from . import linalg
from .decouple import DecoupledSolution, residual
from .errors import InconsistentStateError
from .matfunc import DAESystem


@dataclass
class OracleStepReport:
    index: int
    condition: float
    singular: bool
    defect: float                # least-squares residual when W is singular


@dataclass
class CrossValidationReport:
    start_index: int
    deviations: dict             # index -> relative deviation
    steps: list                  # OracleStepReport per step
    max_deviation: float         # over indices reached through nonsingular W
    first_singular: int | None

    def ok(self, tol: float) -> bool:
        return self.max_deviation <= tol


def _step_matrices(system: DAESystem, k: int):
    mu = float(system.grid.mu(k))
    a_sig = linalg.as_float(system.A(k + 1))
    w = a_sig @ linalg.as_float(system.B(k + 1)) / mu - linalg.as_float(system.C(k + 1))
    lift = a_sig @ linalg.as_float(system.B(k)) / mu
    return w, lift


def direct_step(system: DAESystem, x_k, k: int, tol: float = 1e-8,
                cond_max: float = 1e12):
    """Advance x one index; returns (x_sigma, OracleStepReport).

    Raises InconsistentStateError when W is singular and x_k is not in
    the solvable set (defect above tol).
    """
    x_k = linalg.as_float(np.asarray(x_k)).reshape(-1)
    w, lift = _step_matrices(system, k)
    rhs = linalg.as_float(system.f(k)).reshape(-1) + lift @ x_k
    condition = linalg.cond(w)
    if condition <= cond_max:
        x_sigma = np.linalg.solve(w, rhs)
        return x_sigma, OracleStepReport(k, condition, False, 0.0)
    x_sigma = linalg.lstsq(w, rhs)
    defect = linalg.norm_inf(w @ x_sigma - rhs) / (1.0 + linalg.norm_inf(rhs))
    if defect > tol:
        raise InconsistentStateError(k, defect)
    return x_sigma, OracleStepReport(k, condition, True, defect)


def cross_validate(system: DAESystem, decoupled: DecoupledSolution,
                   tol: float = 1e-8, cond_max: float = 1e12) -> CrossValidationReport:
    """Re-run the trajectory by direct stepping and compare pointwise.

    Seeds at the first index where the decoupled x is defined and walks
    the window.  Deviations beyond the first singular W are recorded but
    excluded from max_deviation (the direct path is no longer unique
    there).
    """
    indices = decoupled.x_indices
    if len(indices) < 3:
        raise InconsistentStateError(0, float("nan"))
    start = indices[0]
    x = linalg.as_float(decoupled.x[start]).copy()
    deviations = {}
    steps = []
    first_singular = None
    max_dev = 0.0
    for k in indices[:-1]:
        if k + 1 not in decoupled.x:
            break
        w, lift = _step_matrices(system, k)
        rhs = linalg.as_float(system.f(k)).reshape(-1) + lift @ x
        condition = linalg.cond(w)
        if condition <= cond_max:
            x = np.linalg.solve(w, rhs)
            steps.append(OracleStepReport(k, condition, False, 0.0))
        else:
            x = linalg.lstsq(w, rhs)
            defect = linalg.norm_inf(w @ x - rhs) / (1.0 + linalg.norm_inf(rhs))
            steps.append(OracleStepReport(k, condition, True, defect))
            if first_singular is None:
                first_singular = k
        ref = linalg.as_float(decoupled.x[k + 1])
        dev = linalg.norm_inf(x - ref) / (1.0 + linalg.norm_inf(ref))
        deviations[k + 1] = dev
        if first_singular is None:
            max_dev = max(max_dev, dev)
    return CrossValidationReport(start, deviations, steps, max_dev, first_singular)


def oracle_trajectory(system: DAESystem, x_start, start: int, last: int,
                      tol: float = 1e-8, cond_max: float = 1e12):
    """Direct trajectory from x(start); returns (traj dict, reports, residuals)."""
    traj = {start: linalg.as_float(np.asarray(x_start)).reshape(-1)}
    reports = []
    for k in range(start, last):
        x_next, rep = direct_step(system, traj[k], k, tol, cond_max)
        traj[k + 1] = x_next
        reports.append(rep)
    residuals = {k: residual(system, traj, k) for k in range(start, last)}
    return traj, reports, residuals
