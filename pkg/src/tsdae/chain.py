"""Matrix chains, admissible projectors, and the tractability index.

Starting from G_0 = A^sigma B the construction iterates

    N_i = ker G_i,   Q_i a projector onto N_i killing N_0 + ... + N_{i-1},
    P_i = I - Q_i,   Pi_i = Pi_{i-1} P_i,   M_i = Pi_{i-1} - Pi_i,
    D_i = G_i B^- (B Pi_i B^-)^Delta B^sigma,
    C_i = (C_{i-1} o sigma + D_i) (Pi_i o sigma - M_i o sigma),
    G_{i+1} = G_i + C_i M_i,

until some G_nu is invertible at every index (tractability index nu) or a
chain condition fails (irregular verdict).  The C_i update is the unique
blockwise resolution of the implicit relation

    C_i^sigma Pi_i^sigma = (C_{i-1}^sigma + C_i M_i + D_i) Pi_{i-1}^sigma

that is +(C_{i-1}^sigma + D_i) on im Pi_i^sigma, the negative of that on
im M_i^sigma and zero on ker Pi_{i-1}^sigma; it reproduces the worked
five-dimensional fixture entry for entry.

Everything is stored per grid index.  sigma-consuming quantities lose one
index per chain level, so stage i carries its own last valid index.
"""

from dataclasses import dataclass, field

import numpy as np

from . import linalg
from .errors import (
    IrregularSystemError,
    ProjectorError,
    ShapeError,
    SubspaceIntersectionError,
    TransversalityError,
)
from .matfunc import DAESystem, MatrixFunction
from .subspaces import (
    ProperFactorization,
    SubspaceBasis,
    check_transversality,
    direct_sum_rank,
    kernel_basis,
    projector_onto_avoiding,
    reflexive_inverse_point,
)

CANONICAL = "canonical"
INJECTED = "injected"


@dataclass
class ChainOptions:
    max_index: int = 8
    tol_rank: float | None = None
    tol_proj: float = 1e-10
    cond_max: float = 1e12
    # injected projector tables by level: matrix, per-index list, or
    # MatrixFunction; None means canonical construction throughout
    projectors: dict | None = None

    @property
    def strategy(self) -> str:
        return INJECTED if self.projectors else CANONICAL


@dataclass
class ChainStage:
    """Chain data for one level, tables indexed 0..last."""

    level: int
    last: int
    G: list
    N: list
    rank: int
    Q: list
    P: list
    Pi: list
    M: list
    C: list | None
    D: list | None


@dataclass
class ChainResult:
    system: DAESystem
    options: ChainOptions
    status: str                      # "regular" | "irregular"
    stages: list
    nu: int | None = None
    reason: str | None = None
    level: int | None = None
    factorization: ProperFactorization | None = None
    Ginv: list | None = None         # G_nu^{-1} per index, 0..stages[-1].last
    cond_G_nu: float = float("nan")
    exact: bool = False
    a_sigma: list = field(default_factory=list)
    ranks: list = field(default_factory=list)

    @property
    def regular(self) -> bool:
        return self.status == "regular"

    def stage(self, i: int) -> ChainStage:
        return self.stages[i]


def tractability_index(result: ChainResult) -> int:
    """The index nu of a regular result; raises for irregular ones."""
    if not result.regular:
        raise IrregularSystemError(result.reason, result.level)
    return result.nu


def canonical_update(c_prev: MatrixFunction, d_i: MatrixFunction,
                     pi_i: MatrixFunction, m_i: MatrixFunction) -> MatrixFunction:
    """C_i as a matrix function: (C_{i-1}^sigma + D_i)(Pi_i^sigma - M_i^sigma)."""
    return (c_prev.sigma() + d_i) @ (pi_i.sigma() - m_i.sigma())


def _injected_table(spec_value, grid, exact, level, expected_shape, last):
    """Normalize an injected projector to a per-index table over 0..last."""
    if isinstance(spec_value, MatrixFunction):
        getter = spec_value
    else:
        arr = np.asarray(spec_value, dtype=object)
        if arr.ndim == 3:
            getter = MatrixFunction.from_table(grid, list(spec_value), exact=exact)
        elif arr.ndim == 2:
            getter = MatrixFunction.constant(grid, spec_value, exact=exact)
        else:
            raise ShapeError(f"injected Q{level} is neither a matrix nor a table")
    if getter.shape != expected_shape:
        raise ShapeError(f"injected Q{level} has shape {getter.shape}, "
                         f"expected {expected_shape}")
    if getter.last_index < last:
        raise ShapeError(f"injected Q{level} table covers indices 0..{getter.last_index}, "
                         f"need 0..{last}")
    return [getter(k) for k in range(last + 1)]


def _validate_injected(level, q_table, g_table, n_bases, prev_q_tables, tol_proj):
    for k, q in enumerate(q_table):
        idem = linalg.norm_inf(q @ q - q)
        if idem > tol_proj:
            raise ProjectorError(
                f"injected Q{level} is not idempotent at index {k} (defect {idem:.2e})")
        onto = linalg.norm_inf(g_table[k] @ q)
        if onto > tol_proj * (1.0 + linalg.norm_inf(g_table[k])):
            raise ProjectorError(
                f"injected Q{level} does not map into ker G{level} at index {k}")
        if linalg.rank(linalg.as_float(q)) != n_bases[k].count:
            raise ProjectorError(
                f"injected Q{level} has wrong rank at index {k}")
        for j, prev in enumerate(prev_q_tables):
            anti = linalg.norm_inf(q @ prev[k])
            if anti > tol_proj:
                raise ProjectorError(
                    f"(A3) anticommutation failure at level {level}: "
                    f"Q{level} Q{j} != 0 at index {k} (defect {anti:.2e})")


def build_chain(system: DAESystem, options: ChainOptions | None = None) -> ChainResult:
    """Construct the projector chain and classify the system.

    Returns a ChainResult whose status is "regular" (with the index nu and
    G_nu inverses) or "irregular" (with a reason and the failing level).
    Contract violations -- transversality failure, malformed injected
    projectors -- raise instead of classifying.
    """
    opts = options or ChainOptions()
    exact = system.exact
    grid = system.grid
    n = system.n
    interior_last = grid.last_index - 1   # sigma exists on 0..interior_last

    a_sigma = [system.A(k + 1) for k in range(interior_last + 1)]
    b = [system.B(k) for k in range(interior_last + 1)]

    for k in range(interior_last + 1):
        report = check_transversality(a_sigma[k], b[k], opts.tol_rank, exact)
        if not report.ok:
            raise TransversalityError(k, report.dim_kernel, report.rank_b, system.m)

    injected = dict(opts.projectors or {})

    def make_result(**kw):
        return ChainResult(system=system, options=opts, exact=exact,
                           a_sigma=a_sigma, **kw)

    # -- level 0 -------------------------------------------------------
    last = interior_last
    g = [a_sigma[k] @ b[k] for k in range(last + 1)]
    n_bases = [kernel_basis(g[k], opts.tol_rank, exact) for k in range(last + 1)]
    ranks = [n - nb.count for nb in n_bases]
    stages: list[ChainStage] = []
    if len(set(ranks)) != 1:
        return make_result(status="irregular", stages=stages, ranks=[],
                           reason=f"(A1) rank of G_0 not constant: {sorted(set(ranks))}",
                           level=0)
    r0 = ranks[0]

    if 0 in injected:
        q = _injected_table(injected[0], grid, exact, 0, (n, n), last)
        _validate_injected(0, q, g, n_bases, [], opts.tol_proj)
    else:
        empty = SubspaceBasis.empty(n, exact)
        q = [projector_onto_avoiding(n_bases[k], empty, exact) for k in range(last + 1)]
    ident = linalg.eye(n, exact)
    p = [ident - qk for qk in q]
    pi = list(p)                       # Pi_0 = P_0
    mm = list(q)                       # M_0 = Q_0
    c = [system.C(k) for k in range(last + 1)]
    stage0 = ChainStage(0, last, g, n_bases, r0, q, p, pi, mm, c, None)
    stages.append(stage0)
    rank_seq = [r0]

    # the {1,2}-inverse is pinned to Pi_0 = P_0 so both views agree exactly
    try:
        fact_point = [reflexive_inverse_point(b[k], a_sigma[k], pi[k],
                                              opts.tol_rank, opts.tol_proj, exact)
                      for k in range(last + 1)]
    except ProjectorError as exc:
        raise ProjectorError(f"Pi_0 rejected by the reflexive inverse: {exc}") from exc
    factorization = ProperFactorization(
        R=MatrixFunction.from_table(grid, [fp[0] for fp in fact_point], exact),
        Binv=MatrixFunction.from_table(grid, [fp[1] for fp in fact_point], exact),
        Pi0=MatrixFunction.from_table(grid, [fp[2] for fp in fact_point], exact),
    )
    binv = [fp[1] for fp in fact_point]

    def invertible_at(gmat):
        if exact:
            return linalg.det(gmat, exact=True) != 0
        return linalg.rank(gmat, opts.tol_rank) == n

    def finish_regular(nu):
        top = stages[nu]
        ginv = [linalg.inv(top.G[k], exact=exact) for k in range(top.last + 1)]
        conds = [linalg.cond(top.G[k]) for k in range(top.last + 1)]
        cond_max_seen = max(conds) if conds else float("nan")
        if not exact and cond_max_seen > opts.cond_max:
            return make_result(status="irregular", stages=stages, ranks=rank_seq,
                               reason=f"ill-conditioned G_{nu} "
                                      f"(cond {cond_max_seen:.2e} > {opts.cond_max:.2e})",
                               level=nu)
        return make_result(status="regular", stages=stages, nu=nu,
                           factorization=factorization, Ginv=ginv,
                           cond_G_nu=cond_max_seen, ranks=rank_seq)

    if all(invertible_at(g[k]) for k in range(last + 1)):
        _append_top_stage(stages, 0, exact, n)
        return finish_regular(0)

    # -- levels >= 1 -----------------------------------------------------
    for i in range(1, opts.max_index + 1):
        prev = stages[-1]
        if prev.C is None:
            raise RuntimeError("previous stage lost its C table")   # pragma: no cover
        last = min(prev.last, len(prev.C) - 1)
        if last < 0:
            return make_result(status="irregular", stages=stages, ranks=rank_seq,
                               reason=f"grid too short to evaluate level {i}",
                               level=i)
        g = [prev.G[k] + prev.C[k] @ prev.M[k] for k in range(last + 1)]
        n_bases = [kernel_basis(g[k], opts.tol_rank, exact) for k in range(last + 1)]
        ranks = [n - nb.count for nb in n_bases]
        if len(set(ranks)) != 1:
            return make_result(status="irregular", stages=stages, ranks=rank_seq,
                               reason=f"(A1) rank of G_{i} not constant: "
                                      f"{sorted(set(ranks))}",
                               level=i)
        r_i = ranks[0]
        rank_seq.append(r_i)

        if all(invertible_at(g[k]) for k in range(last + 1)):
            stages.append(ChainStage(i, last, g, n_bases, r_i,
                                     None, None, None, None, None, None))
            _fill_top_stage(stages, exact, n)
            return finish_regular(i)

        # (A2): the new kernel must miss the span of the previous ones
        for k in range(last + 1):
            all_bases = [stages[j].N[k] for j in range(i)] + [n_bases[k]]
            _, direct = direct_sum_rank(all_bases, exact)
            if not direct:
                return make_result(status="irregular", stages=stages, ranks=rank_seq,
                                   reason="(A2) intersection nontrivial",
                                   level=i)

        if i in injected:
            q = _injected_table(injected[i], grid, exact, i, (n, n), last)
            _validate_injected(i, q, g, n_bases,
                               [st.Q for st in stages], opts.tol_proj)
        else:
            q = []
            for k in range(last + 1):
                killed = [stages[j].N[k].vectors for j in range(i)]
                must_kill = SubspaceBasis(n, np.concatenate(killed, axis=1))
                try:
                    q.append(projector_onto_avoiding(n_bases[k], must_kill, exact))
                except SubspaceIntersectionError as exc:
                    exc.level = i
                    raise
        p = [ident - qk for qk in q]
        pi = [prev.Pi[k] @ p[k] for k in range(last + 1)]
        mm = [prev.Pi[k] - pi[k] for k in range(last + 1)]

        # D_i = G_i B^- (B Pi_i B^-)^Delta B^sigma, one fewer index at the top
        d_last = min(last - 1, interior_last - 1)
        spi = [b[k] @ pi[k] @ binv[k] for k in range(last + 1)]
        d = []
        c_new = []
        for k in range(d_last + 1):
            mu = grid.mu(k)
            spi_delta = (spi[k + 1] - spi[k]) / mu
            d_k = g[k] @ binv[k] @ spi_delta @ system.B(k + 1)
            d.append(d_k)
            c_prev_sigma = prev.C[k + 1] if prev.level > 0 else system.C(k + 1)
            c_new.append((c_prev_sigma + d_k) @ (pi[k + 1] - mm[k + 1]))

        stages.append(ChainStage(i, last, g, n_bases, r_i, q, p, pi, mm, c_new, d))

    return make_result(status="irregular", stages=stages, ranks=rank_seq,
                       reason=f"max index {opts.max_index} exceeded with G still singular",
                       level=opts.max_index)


def _append_top_stage(stages, nu, exact, n):
    """For nu = 0 the invertible stage is stage 0 itself; nothing to add."""
    # stage 0 already carries full projector data
    return


def _fill_top_stage(stages, exact, n):
    """Give the final (invertible) stage trivial projector data."""
    top = stages[-1]
    prev = stages[-2]
    last = top.last
    ident = linalg.eye(n, exact)
    zero = linalg.zeros((n, n), exact)
    top.Q = [zero for _ in range(last + 1)]
    top.P = [ident for _ in range(last + 1)]
    top.Pi = [prev.Pi[k] for k in range(last + 1)]
    top.M = [zero for _ in range(last + 1)]


@dataclass
class IdentityCheck:
    name: str
    max_violation: float
    checked: int                 # number of (index, combination) evaluations


@dataclass
class ChainIdentityReport:
    """Max violation per algebraic identity of a regular chain."""

    entries: list
    a4_note: str = ("(A4) smoothness of B Pi_i B^-: trivially satisfied, "
                    "every grid point is isolated")

    def max_violation(self) -> float:
        return max((e.max_violation for e in self.entries), default=0.0)

    def ok(self, tol: float) -> bool:
        return self.max_violation() <= tol

    def lines(self) -> list:
        width = max(len(e.name) for e in self.entries)
        out = [f"{e.name.ljust(width)}  max violation {e.max_violation:.3e} "
               f"({e.checked} checks)" for e in self.entries]
        out.append(self.a4_note)
        return out


def verify_chain_identities(result: ChainResult, tol: float = 1e-10
                            ) -> ChainIdentityReport:
    """Evaluate the full identity suite of a regular chain, per index.

    Report-only: every identity is evaluated on the intersection of the
    index windows of its operands and the worst violation is recorded.
    """
    if not result.regular:
        raise IrregularSystemError(result.reason, result.level)
    nu = result.nu
    n = result.system.n
    stages = result.stages
    exact = result.exact
    ident = linalg.eye(n, exact)
    entries = []

    def window(*levels):
        return min(stages[l].last for l in levels)

    def desc_p(top, bottom, k):
        """P_top P_{top-1} ... P_bottom at index k."""
        out = ident
        for l in range(top, bottom - 1, -1):
            out = out @ stages[l].P[k]
        return out

    def check(name, pairs):
        worst, count = 0.0, 0
        for got, want in pairs:
            worst = max(worst, linalg.norm_inf(got - want))
            count += 1
        entries.append(IdentityCheck(name, worst, count))

    # projector basics and (A3)
    check("Q_i^2 = Q_i", [(stages[i].Q[k] @ stages[i].Q[k], stages[i].Q[k])
                          for i in range(nu) for k in range(stages[i].last + 1)])
    check("(A3) Q_i Q_j = 0 (j < i)",
          [(stages[i].Q[k] @ stages[j].Q[k], linalg.zeros((n, n), exact))
           for i in range(1, nu) for j in range(i)
           for k in range(window(i, j) + 1)])

    check("M_i M_j = delta_ij M_i",
          [(stages[i].M[k] @ stages[j].M[k],
            stages[i].M[k] if i == j else linalg.zeros((n, n), exact))
           for i in range(nu) for j in range(nu)
           for k in range(window(i, j) + 1)])
    check("Pi_i Pi_j = Pi_max(i,j)",
          [(stages[i].Pi[k] @ stages[j].Pi[k], stages[max(i, j)].Pi[k])
           for i in range(nu) for j in range(nu)
           for k in range(window(i, j) + 1)])
    check("Pi_i M_j = [i<j] M_j",
          [(stages[i].Pi[k] @ stages[j].M[k],
            stages[j].M[k] if i < j else linalg.zeros((n, n), exact))
           for i in range(nu) for j in range(nu)
           for k in range(window(i, j) + 1)])
    check("M_i Pi_j = [i>j] M_i",
          [(stages[i].M[k] @ stages[j].Pi[k],
            stages[i].M[k] if i > j else linalg.zeros((n, n), exact))
           for i in range(nu) for j in range(nu)
           for k in range(window(i, j) + 1)])
    check("M_i Q_j = [i=j] M_i (i >= j)",
          [(stages[i].M[k] @ stages[j].Q[k],
            stages[i].M[k] if i == j else linalg.zeros((n, n), exact))
           for i in range(nu) for j in range(i + 1)
           for k in range(window(i, j) + 1)])
    check("M_i P_i = 0",
          [(stages[i].M[k] @ stages[i].P[k], linalg.zeros((n, n), exact))
           for i in range(nu) for k in range(stages[i].last + 1)])
    check("Q_i M_i = Q_i",
          [(stages[i].Q[k] @ stages[i].M[k], stages[i].Q[k])
           for i in range(nu) for k in range(stages[i].last + 1)])

    check("Q_j P_i...P_l = Q_j (j > i > l)",
          [(stages[j].Q[k] @ desc_p(i, l, k), stages[j].Q[k])
           for j in range(2, nu) for i in range(1, j) for l in range(i)
           for k in range(window(*range(j + 1)) + 1)])
    check("P_k...P_i = I - Q_i - ... - Q_k",
          [(desc_p(hi, lo, k),
            ident - sum(stages[l].Q[k] for l in range(lo, hi + 1)))
           for hi in range(nu) for lo in range(hi + 1)
           for k in range(window(*range(hi + 1)) + 1)])

    # chain telescoping
    check("G_i P_{i-1} = G_{i-1}",
          [(stages[i].G[k] @ stages[i - 1].P[k], stages[i - 1].G[k])
           for i in range(1, nu + 1) for k in range(window(i, i - 1) + 1)])
    check("G_0 = G_i P_{i-1}...P_0",
          [(stages[i].G[k] @ desc_p(i - 1, 0, k), stages[0].G[k])
           for i in range(1, nu + 1) for k in range(window(*range(i + 1)) + 1)])
    check("G_i = G_nu P_{nu-1}...P_i",
          [(stages[nu].G[k] @ desc_p(nu - 1, i, k), stages[i].G[k])
           for i in range(nu) for k in range(window(*range(nu + 1)) + 1)])
    check("G_nu^{-1} G_i = I - Q_i - ... - Q_{nu-1}",
          [(result.Ginv[k] @ stages[i].G[k],
            ident - sum(stages[l].Q[k] for l in range(i, nu)))
           for i in range(nu) for k in range(window(i, nu) + 1)])

    rank_pairs = []
    for k_lv in range(nu):
        expected = n - sum(stages[j].N[0].count for j in range(k_lv + 1))
        for k in range(stages[k_lv].last + 1):
            got = linalg.rank(linalg.as_float(stages[k_lv].Pi[k]))
            rank_pairs.append((linalg.as_float(np.array([[float(got)]])),
                               linalg.as_float(np.array([[float(expected)]]))))
    check("rank Pi_k = n - sum dim N_j", rank_pairs)

    check("sum M_j + Pi_{nu-1} = I",
          [(sum(stages[j].M[k] for j in range(nu)) + stages[nu - 1].M[k] * 0
            + stages[nu - 1].Pi[k], ident)
           for k in range(window(*range(nu)) + 1)])

    # the defining relation of the C update; the constructed C_i is the
    # sigma-side object, so every projector factor sits at the sigma point
    c_pairs = []
    for i in range(1, nu):
        st = stages[i]
        if st.C is None or st.D is None:
            continue
        c_prev = stages[i - 1].C if i > 1 else None
        for k in range(len(st.C)):
            if k + 1 > st.last:
                continue
            c_prev_sig = result.system.C(k + 1) if i == 1 else c_prev[k + 1]
            lhs = st.C[k] @ st.Pi[k + 1]
            rhs = (c_prev_sig + st.C[k] @ st.M[k + 1] + st.D[k]) \
                @ stages[i - 1].Pi[k + 1]
            c_pairs.append((lhs, rhs))
    if c_pairs:
        check("C_i Pi_i^s = (C_{i-1}^s + C_i M_i^s + D_i) Pi_{i-1}^s", c_pairs)

    # proper factorization, per index
    fact = result.factorization
    b_tab = [result.system.B(k) for k in range(fact.Binv.last_index + 1)]
    check("B B^- B = B", [(b_tab[k] @ fact.Binv(k) @ b_tab[k], b_tab[k])
                          for k in range(len(b_tab))])
    check("B^- B B^- = B^-", [(fact.Binv(k) @ b_tab[k] @ fact.Binv(k), fact.Binv(k))
                              for k in range(len(b_tab))])
    check("B^- B = Pi_0", [(fact.Binv(k) @ b_tab[k], fact.Pi0(k))
                           for k in range(len(b_tab))])
    check("B B^- = R", [(b_tab[k] @ fact.Binv(k), fact.R(k))
                        for k in range(len(b_tab))])
    check("A^sigma = G_0 B^-",
          [(stages[0].G[k] @ fact.Binv(k), result.a_sigma[k])
           for k in range(stages[0].last + 1)])
    return ChainIdentityReport(entries)
