"""Decoupling of a regular chain into inherent dynamics plus components.

With u = B Pi_{nu-1} x and S = B Pi_{nu-1} B^-, multiplying the
G_nu^{-1}-scaled equation by B Pi_{nu-1} and by U_k = M_k P_{k+1}...
P_{nu-1} gives, per base point t (everything exact on isolated grids,
x^sigma = B^{-sigma} u^sigma + sum_j v_j^sigma):

  u-row:    u^Delta = S^Delta B^sigma x^sigma
                      + B Pi_{nu-1} G_nu^{-1} (C^sigma x^sigma + f)

  k-row:    sum_{j>k} N_kj (B v_j)^Delta + W_k u^Delta
                      + Psi_k sum_{j>=1} v_j^sigma
            = Khat_k u^sigma + sum_j T_kj v_j^sigma + U_k G_nu^{-1} f

  T_kj  = U_k G_nu^{-1} C^sigma M_j^sigma,
  N_kj  = -M_k P_{k+1}...P_{j-1} Q_j B^-,
  W_k   = M_k (P_{k+1}...P_{nu-1} - I) B^-,
  Khat_k = U_k G_nu^{-1} C^sigma B^{-sigma},
  Psi_k = [sum_{j>k} M_k P_{k+1}...P_{j-1} Q_j B^- (B M_j B^-)^Delta] B^sigma.

All sigma-values are linear unknowns, so the default forward driver
solves (u^sigma, v_*^sigma) jointly at each base index; no coefficient
cancellations are assumed, and couplings to components that are not yet
defined at a base index are dropped and measured (they vanish on every
verified fixture).  The textbook-style route -- an (I - mu K) stepper for
the inherent equation u^Delta = K u^sigma + g followed by a highest-first
component sweep -- is kept as method="sweep"; it agrees with the coupled
driver exactly whenever those couplings vanish, e.g. whenever B M_j B^-
and B Pi_j B^- are constant in t.

The printed source equations for the components carry sign typos (their
own worked trivial cases contradict them); the forms above are
re-derived from scratch and validated against the residual of the
original equation and an independent one-step oracle.

The component sweep determines v_k from grid index nu-k onward; an
optional consistent x(t_0) fills index 0 and closes the window.
"""

from dataclasses import dataclass, field

import numpy as np

from . import linalg
from .chain import ChainResult
from .errors import IrregularSystemError, NonRegressiveStepError, TsdaeError
from .grid import TimeScaleGrid


@dataclass
class InherentEquation:
    """K, g on base indices 0..base_last; S = B Pi_{nu-1} B^- one further."""

    K: list
    g: list
    S: list
    base_last: int
    m: int


@dataclass
class DecoupleCoefficients:
    """Per-level coefficient tables over base indices 0..base_last.

    Indexing: N[k][i][j] maps base index i to the coefficient of
    (B v_j)^Delta in equation k; T[k][j][i] couples v_j^sigma into
    equation k; W, Khat, F, U, V, Psi are per-level lists over i;
    E[j][i] couples v_j^sigma into the u-equation.  F_k = U_k G_nu^{-1}
    multiplies f.
    """

    nu: int
    base_last: int
    N: dict
    W: dict
    Khat: dict
    F: dict
    U: dict
    V: dict
    T: dict
    Psi: dict
    E: dict
    Rsig: list                  # R at the sigma point, for the u-row
    ufront: list                # B Pi_{nu-1} G_nu^{-1} per base index


@dataclass
class Decoupling:
    """Everything assemble() produces, ready for the forward drivers."""

    chain: ChainResult
    inherent: InherentEquation
    coeffs: DecoupleCoefficients
    cond_max: float = 1e12

    @property
    def grid(self) -> TimeScaleGrid:
        return self.chain.system.grid


@dataclass
class DecoupledSolution:
    """Trajectories keyed by grid index; absent key = not defined there."""

    grid: TimeScaleGrid
    nu: int
    u: dict
    v: list                      # v[k] is a dict index -> vector
    x: dict
    residual: dict               # base index -> normalized residual
    diagnostics: dict = field(default_factory=dict)

    @property
    def x_indices(self) -> list:
        return sorted(self.x)

    def max_residual(self) -> float:
        return max(self.residual.values()) if self.residual else 0.0


def _prod(mats):
    out = None
    for m in mats:
        out = m if out is None else out @ m
    return out


def assemble(chain: ChainResult, cond_max: float = 1e12) -> Decoupling:
    """Build the inherent equation and all component coefficient tables."""
    if not chain.regular:
        raise IrregularSystemError(chain.reason, chain.level)
    nu = chain.nu
    if nu == 0:
        raise IrregularSystemError(
            "index 0: the system is an implicit ODE, use an ODE solver", 0)
    system = chain.system
    grid = system.grid
    n = system.n
    interior_last = grid.last_index - 1
    stages = chain.stages
    top = stages[nu]
    binv = chain.factorization.Binv
    rmat = chain.factorization.R
    bmat = system.B

    pi_top = stages[nu - 1].Pi
    base_last = min(top.last, stages[nu - 1].last - 1, interior_last - 1)
    if base_last < 0:
        raise TsdaeError("grid too short to decouple at this index")

    s_last = min(stages[nu - 1].last, binv.last_index)
    s_tab = [bmat(k) @ pi_top[k] @ binv(k) for k in range(s_last + 1)]

    k_tab, g_tab, ufront_tab, rsig_tab, s_delta_tab = [], [], [], [], []
    for i in range(base_last + 1):
        mu = grid.mu(i)
        s_delta = (s_tab[i + 1] - s_tab[i]) / mu
        s_delta_tab.append(s_delta)
        front = bmat(i) @ pi_top[i] @ chain.Ginv[i]
        ufront_tab.append(front)
        rsig_tab.append(rmat(i + 1))
        k_tab.append(s_delta + front @ system.C(i + 1) @ binv(i + 1))
        g_tab.append((front @ system.f(i)).reshape(-1))
    inherent = InherentEquation(k_tab, g_tab, s_tab, base_last, system.m)

    levels = range(nu)
    coeff = DecoupleCoefficients(nu, base_last, N={}, W={}, Khat={}, F={},
                                 U={}, V={}, T={}, Psi={}, E={},
                                 Rsig=rsig_tab, ufront=ufront_tab)
    ident = linalg.eye(n, chain.exact)
    for j in levels:
        # coupling of v_j^sigma into the u-equation
        e_t = []
        for i in range(base_last + 1):
            e_ji = ufront_tab[i] @ system.C(i + 1) @ stages[j].M[i + 1]
            if j >= 1:
                e_ji = e_ji + s_delta_tab[i] @ bmat(i + 1) @ stages[j].M[i + 1]
            e_t.append(e_ji)
        coeff.E[j] = e_t
    for k in levels:
        n_t, w_t, khat_t, f_t, u_t, v_t, psi_t = [], [], [], [], [], [], []
        t_t = {j: [] for j in levels}
        for i in range(base_last + 1):
            p_chain = ident if k + 1 >= nu else \
                _prod([stages[l].P[i] for l in range(k + 1, nu)])
            u_ki = stages[k].M[i] @ p_chain
            u_t.append(u_ki)
            v_t.append(stages[k].Q[i] @ p_chain)
            w_t.append(stages[k].M[i] @ (p_chain - ident) @ binv(i))
            front = u_ki @ chain.Ginv[i]
            f_t.append(front)
            khat_t.append(front @ system.C(i + 1) @ binv(i + 1))
            for j in levels:
                t_t[j].append(front @ system.C(i + 1) @ stages[j].M[i + 1])
            n_kj = {}
            psi = linalg.zeros((n, n), chain.exact)
            for j in range(k + 1, nu):
                lead = stages[k].M[i] if j == k + 1 else \
                    stages[k].M[i] @ _prod([stages[l].P[i] for l in range(k + 1, j)])
                coeff_n = -(lead @ stages[j].Q[i] @ binv(i))
                n_kj[j] = coeff_n
                mu = grid.mu(i)
                bmb = [bmat(idx) @ stages[j].M[idx] @ binv(idx) for idx in (i, i + 1)]
                bmb_delta = (bmb[1] - bmb[0]) / mu
                psi = psi + (-coeff_n) @ bmb_delta @ bmat(i + 1)
            n_t.append(n_kj)
            psi_t.append(psi)
        coeff.N[k] = n_t
        coeff.W[k] = w_t
        coeff.Khat[k] = khat_t
        coeff.F[k] = f_t
        coeff.U[k] = u_t
        coeff.V[k] = v_t
        coeff.T[k] = t_t
        coeff.Psi[k] = psi_t
    return Decoupling(chain, inherent, coeff, cond_max)


def project_initial(dec: Decoupling, u0_raw) -> np.ndarray:
    """S(t_0) u0, landing in the invariant subspace im(B Pi_{nu-1} B^-)."""
    u0 = linalg.as_float(np.asarray(u0_raw, dtype=float).reshape(-1))
    if u0.shape[0] != dec.inherent.m:
        raise TsdaeError(f"u0 has dimension {u0.shape[0]}, expected {dec.inherent.m}")
    return linalg.as_float(dec.inherent.S[0]) @ u0


def step_inherent(dec: Decoupling, u_k: np.ndarray, k: int) -> np.ndarray:
    """Exact implicit step u(t_{k+1}) = (I - mu K)^{-1} (u + mu g)."""
    if not 0 <= k <= dec.inherent.base_last:
        raise NonRegressiveStepError(k, f"no step data at index {k}")
    mu = float(dec.grid.mu(k))
    kmat = linalg.as_float(dec.inherent.K[k])
    lhs = np.eye(dec.inherent.m) - mu * kmat
    if linalg.cond(lhs) > dec.cond_max:
        raise NonRegressiveStepError(
            k, f"I - mu K is singular at index {k} (adapted regressivity fails)")
    rhs = linalg.as_float(u_k) + mu * linalg.as_float(dec.inherent.g[k]).reshape(-1)
    return np.linalg.solve(lhs, rhs)


def _solve_on_image(t_kk, m_sigma, rhs):
    """Solve T v = rhs subject to v = M^sigma v, least squares, with defect."""
    n = m_sigma.shape[0]
    stack = np.vstack([linalg.as_float(t_kk),
                       np.eye(n) - linalg.as_float(m_sigma)])
    target = np.concatenate([linalg.as_float(rhs).reshape(-1), np.zeros(n)])
    v = linalg.lstsq(stack, target)
    defect = linalg.norm_inf(linalg.as_float(t_kk) @ v - linalg.as_float(rhs).reshape(-1))
    defect /= 1.0 + linalg.norm_inf(rhs)
    return v, defect


def component_last(dec: Decoupling, u_sigma: np.ndarray, i: int):
    """v_{nu-1}(t_{i+1}) from the hidden-constraint equation at base i."""
    nu = dec.chain.nu
    c = dec.coeffs
    k = nu - 1
    rhs = -(linalg.as_float(c.Khat[k][i]) @ linalg.as_float(u_sigma)) \
        - linalg.as_float(c.F[k][i] @ dec.chain.system.f(i)).reshape(-1)
    m_sigma = dec.chain.stages[k].M[i + 1]
    return _solve_on_image(c.T[k][k][i], m_sigma, rhs)


def components_backward(dec: Decoupling, k: int, i: int, u_i, u_sigma,
                        v_at_i: dict, v_at_sigma: dict):
    """v_k(t_{i+1}) for k < nu-1, given u and all higher components.

    v_at_i / v_at_sigma map levels j > k to their vectors at t_i and
    t_{i+1}; both points feed the exact derivative (B v_j)^Delta.
    """
    c = dec.coeffs
    grid = dec.grid
    mu = float(grid.mu(i))
    bmat = dec.chain.system.B
    b_i = linalg.as_float(bmat(i))
    b_sig = linalg.as_float(bmat(i + 1))
    u_delta = (linalg.as_float(u_sigma) - linalg.as_float(u_i)) / mu
    rhs = linalg.as_float(c.W[k][i]) @ u_delta
    rhs = rhs - linalg.as_float(c.Khat[k][i]) @ linalg.as_float(u_sigma)
    rhs = rhs - linalg.as_float(c.F[k][i] @ dec.chain.system.f(i)).reshape(-1)
    for j in range(k + 1, dec.chain.nu):
        bdv = (b_sig @ v_at_sigma[j] - b_i @ v_at_i[j]) / mu
        rhs = rhs + linalg.as_float(c.N[k][i][j]) @ bdv
        correction = linalg.as_float(c.Psi[k][i] - c.T[k][j][i])
        rhs = rhs + correction @ v_at_sigma[j]
    # Psi_k also multiplies v_k^sigma itself once k >= 1
    operator = c.T[k][k][i] if k == 0 else c.T[k][k][i] - c.Psi[k][i]
    m_sigma = dec.chain.stages[k].M[i + 1]
    return _solve_on_image(operator, m_sigma, rhs)


def _coupled_step(dec: Decoupling, i: int, u_i, v_state: list):
    """Solve all sigma-values at base i jointly.

    Unknowns: u^sigma plus v_k^sigma for every level whose inputs exist
    at this base (all levels j > k defined at t_i, needed for
    (B v_j)^Delta).  Couplings to levels outside the unknown set are
    dropped; their magnitudes are returned for the diagnostics.
    """
    c = dec.coeffs
    nu = dec.chain.nu
    system = dec.chain.system
    n, m = system.n, dec.inherent.m
    mu = float(dec.grid.mu(i))
    f_i = linalg.as_float(system.f(i)).reshape(-1)
    b_i = linalg.as_float(system.B(i))
    b_sig = linalg.as_float(system.B(i + 1))
    u_i = linalg.as_float(u_i)

    active = [k for k in range(nu)
              if all(idx in v_state[j] for j in range(k + 1, nu) for idx in (i,))]
    # level k needs v_j(t_i) for all j > k; nu-1 is always active
    offset = {None: 0}
    pos = m
    for k in active:
        offset[k] = pos
        pos += n
    width = pos
    rows, rhs_rows = [], []
    dropped = {}

    def add_row(block_rows, block_rhs):
        rows.append(block_rows)
        rhs_rows.append(block_rhs)

    # u-equation: u^sigma/mu - S^D R^sig u^sigma - uC B^{-sig} u^sigma
    #             - sum_j E_j v_j^sigma = u/mu + ufront f
    s_delta = (linalg.as_float(dec.inherent.S[i + 1])
               - linalg.as_float(dec.inherent.S[i])) / mu
    ufront = linalg.as_float(c.ufront[i])
    block = np.zeros((m, width))
    binv_sig = linalg.as_float(dec.chain.factorization.Binv(i + 1))
    block[:, :m] = np.eye(m) / mu \
        - s_delta @ linalg.as_float(c.Rsig[i]) \
        - ufront @ linalg.as_float(system.C(i + 1)) @ binv_sig
    for j in range(nu):
        e_j = linalg.as_float(c.E[j][i])
        if j in offset:
            block[:, offset[j]:offset[j] + n] = -e_j
        else:
            dropped[("u", j)] = linalg.norm_inf(e_j)
    add_row(block, u_i / mu + ufront @ f_i)

    # u-membership, pins u^sigma into im S^sigma
    block = np.zeros((m, width))
    block[:, :m] = np.eye(m) - linalg.as_float(dec.inherent.S[i + 1])
    add_row(block, np.zeros(m))

    for k in active:
        # [Khat_k - W_k/mu] u^s + sum_j [T_kj - Psi_k 1_{j>=1}
        #   - N_kj B^sig/mu 1_{j>k}] v_j^s = -W_k u/mu
        #   - sum_{j>k} N_kj B v_j(t_i)/mu - F_k f
        block = np.zeros((n, width))
        w_k = linalg.as_float(c.W[k][i])
        block[:, :m] = linalg.as_float(c.Khat[k][i]) - w_k / mu
        rhs_k = -(w_k @ u_i) / mu - linalg.as_float(c.F[k][i]) @ f_i
        psi_k = linalg.as_float(c.Psi[k][i])
        for j in range(nu):
            coef = linalg.as_float(c.T[k][j][i]).copy()
            if j >= 1:
                coef = coef - psi_k
            if j > k:
                coef = coef - linalg.as_float(c.N[k][i][j]) @ b_sig / mu
                rhs_k = rhs_k - linalg.as_float(c.N[k][i][j]) @ (b_i @ v_state[j][i]) / mu
            if j in offset:
                block[:, offset[j]:offset[j] + n] = coef
            else:
                dropped[(k, j)] = linalg.norm_inf(coef)
        add_row(block, rhs_k)
        # membership row
        block = np.zeros((n, width))
        block[:, offset[k]:offset[k] + n] = \
            np.eye(n) - linalg.as_float(dec.chain.stages[k].M[i + 1])
        add_row(block, np.zeros(n))

    lhs = np.vstack(rows)
    rhs = np.concatenate(rhs_rows)
    z = linalg.lstsq(lhs, rhs)
    defect = linalg.norm_inf(lhs @ z - rhs) / (1.0 + linalg.norm_inf(rhs))
    u_sig = z[:m]
    v_sig = {k: z[offset[k]:offset[k] + n] for k in active}
    return u_sig, v_sig, defect, dropped


def residual(system, x_traj: dict, k: int) -> float:
    """Normalized defect of A^sigma (Bx)^Delta = C^sigma x^sigma + f at base k."""
    mu = float(system.grid.mu(k))
    x_k = linalg.as_float(x_traj[k])
    x_s = linalg.as_float(x_traj[k + 1])
    bx_delta = (linalg.as_float(system.B(k + 1)) @ x_s
                - linalg.as_float(system.B(k)) @ x_k) / mu
    f_k = linalg.as_float(system.f(k)).reshape(-1)
    lhs = linalg.as_float(system.A(k + 1)) @ bx_delta
    rhs = linalg.as_float(system.C(k + 1)) @ x_s + f_k
    scale = 1.0 + linalg.norm_inf(f_k) + linalg.norm_inf(x_k)
    return linalg.norm_inf(lhs - rhs) / scale


def hidden_constraint_defect(dec: Decoupling, x_traj: dict, i: int) -> float:
    """Defect of M_{nu-1} G_nu^{-1} (C^sigma x^sigma + f) = 0 at base i."""
    nu = dec.chain.nu
    system = dec.chain.system
    m_top = linalg.as_float(dec.chain.stages[nu - 1].M[i])
    ginv = linalg.as_float(dec.chain.Ginv[i])
    x_s = linalg.as_float(x_traj[i + 1])
    f_i = linalg.as_float(system.f(i)).reshape(-1)
    value = m_top @ ginv @ (linalg.as_float(system.C(i + 1)) @ x_s + f_i)
    scale = 1.0 + linalg.norm_inf(f_i) + linalg.norm_inf(x_s)
    return linalg.norm_inf(value) / scale


def reassemble(dec: Decoupling, u: dict, v: list) -> tuple[dict, dict]:
    """x = B^- u + sum_k v_k wherever every part is defined, plus residuals."""
    binv = dec.chain.factorization.Binv
    x = {}
    for i in sorted(u):
        if i > binv.last_index:
            continue
        if all(i in v[k] for k in range(dec.chain.nu)):
            xi = linalg.as_float(binv(i)) @ linalg.as_float(u[i])
            for k in range(dec.chain.nu):
                xi = xi + v[k][i]
            x[i] = xi
    res = {}
    for i in sorted(x):
        if i + 1 in x and i <= dec.grid.last_index - 1:
            res[i] = residual(dec.chain.system, x, i)
    return x, res


def solve_forward(dec: Decoupling, u0_raw=None, x0=None,
                  method: str = "coupled") -> DecoupledSolution:
    """Drive the decoupled system forward from t_0.

    Exactly one of u0_raw, x0 is required.  u0_raw is projected onto the
    invariant subspace; a consistent x0 additionally fills index 0 of all
    components, which closes the defined window at the left end.

    method="coupled" (default) solves all sigma-values jointly per index;
    method="sweep" steps the inherent equation alone and substitutes
    components highest level first, which matches the coupled answer
    whenever the measured cross couplings vanish.
    """
    if method not in ("coupled", "sweep"):
        raise TsdaeError(f"unknown method {method!r}")
    nu = dec.chain.nu
    n = dec.chain.system.n
    base_last = dec.inherent.base_last
    diagnostics = {"step_residual": {}, "solve_defect": {}, "membership": {},
                   "invariance": {}, "dropped_coupling": {}}

    v = [dict() for _ in range(nu)]
    u = {}
    if x0 is not None:
        x0 = linalg.as_float(np.asarray(x0, dtype=float).reshape(-1))
        if x0.shape[0] != n:
            raise TsdaeError(f"x0 has dimension {x0.shape[0]}, expected {n}")
        u[0] = linalg.as_float(dec.chain.system.B(0)) @ \
            linalg.as_float(dec.chain.stages[nu - 1].Pi[0]) @ x0
        for k in range(nu):
            v[k][0] = linalg.as_float(dec.chain.stages[k].M[0]) @ x0
    elif u0_raw is not None:
        u[0] = project_initial(dec, u0_raw)
    else:
        raise TsdaeError("provide u0 or x0")

    if method == "coupled":
        for i in range(base_last + 1):
            u_sig, v_sig, defect, dropped = _coupled_step(dec, i, u[i], v)
            u[i + 1] = u_sig
            for k, vec in v_sig.items():
                v[k][i + 1] = vec
            diagnostics["solve_defect"][i] = defect
            for key, val in dropped.items():
                diagnostics["dropped_coupling"][key] = max(
                    diagnostics["dropped_coupling"].get(key, 0.0), val)
    else:
        for i in range(base_last + 1):
            u[i + 1] = step_inherent(dec, u[i], i)
        for i in range(base_last + 1):
            u_sig = u[i + 1]
            vk, defect = component_last(dec, u_sig, i)
            v[nu - 1][i + 1] = vk
            diagnostics["solve_defect"][(nu - 1, i)] = defect
            for k in range(nu - 2, -1, -1):
                if not all(i in v[j] and i + 1 in v[j] for j in range(k + 1, nu)):
                    continue
                v_at_i = {j: v[j][i] for j in range(k + 1, nu)}
                v_at_sig = {j: v[j][i + 1] for j in range(k + 1, nu)}
                vk, defect = components_backward(dec, k, i, u[i], u_sig,
                                                 v_at_i, v_at_sig)
                v[k][i + 1] = vk
                diagnostics["solve_defect"][(k, i)] = defect
            for j in range(nu):
                ecoef = linalg.norm_inf(linalg.as_float(dec.coeffs.E[j][i]))
                key = ("u", j)
                diagnostics["dropped_coupling"][key] = max(
                    diagnostics["dropped_coupling"].get(key, 0.0), ecoef)

    # full u-equation residual: the pure inherent relation plus whatever
    # sigma couplings were present at each base index
    for i in range(base_last + 1):
        if i + 1 in u:
            mu = float(dec.grid.mu(i))
            step_res = (linalg.as_float(u[i + 1]) - linalg.as_float(u[i])) / mu \
                - linalg.as_float(dec.inherent.K[i]) @ linalg.as_float(u[i + 1]) \
                - linalg.as_float(dec.inherent.g[i]).reshape(-1)
            for j in range(nu):
                if i + 1 in v[j]:
                    step_res = step_res \
                        - linalg.as_float(dec.coeffs.E[j][i]) @ v[j][i + 1]
            scale = 1.0 + linalg.norm_inf(u[i + 1]) * (1.0 + linalg.norm_inf(dec.inherent.K[i])) \
                + linalg.norm_inf(dec.inherent.g[i])
            diagnostics["step_residual"][i] = linalg.norm_inf(step_res) / scale

    for i in sorted(u):
        if i <= len(dec.inherent.S) - 1:
            s_i = linalg.as_float(dec.inherent.S[i])
            u_i = linalg.as_float(u[i])
            diagnostics["invariance"][i] = linalg.norm_inf(u_i - s_i @ u_i)

    for k in range(nu):
        for i, vec in v[k].items():
            if i <= dec.chain.stages[k].last:
                m_k = linalg.as_float(dec.chain.stages[k].M[i])
                diagnostics["membership"][(k, i)] = linalg.norm_inf(vec - m_k @ vec)

    x, res = reassemble(dec, u, v)
    return DecoupledSolution(dec.grid, nu, u, v, x, res, diagnostics)
