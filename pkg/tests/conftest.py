"""Shared fixtures: the golden five-dimensional example and random corpora."""

import numpy as np
import pytest

from tsdae import (
    ChainOptions,
    DAESystem,
    MatrixFunction,
    TimeScaleGrid,
    build_chain,
)
from tsdae.expressions import parse_expression
from tsdae.systemio import load_system, paper_example_document

PAPER_Q0 = np.array([[0, 0, 0, 0, 0],
                     [0, 0, 0, 0, 0],
                     [0, 0, 0, 0, 0],
                     [0, 0, 0, 1, 0],
                     [0, 0, 0, 0, 1]], dtype=float)

PAPER_Q1 = np.array([[1, 0, 0, 0, 0],
                     [-1, 0, 0, 0, 0],
                     [0, 0, 0, 0, 0],
                     [1, 0, 0, 0, 0],
                     [0, 0, 0, 0, 0]], dtype=float)


def paper_tables(t):
    """Golden matrices of the worked example at time t, as published."""
    return {
        "G0": np.diag([1.0, 1, 1, 0, 0]),
        "Q0": PAPER_Q0.copy(),
        "P0": np.diag([1.0, 1, 1, 0, 0]),
        "G1": np.array([[1, 0, 0, -1, 1],
                        [0, 1, 0, 1, 0],
                        [0, 0, 1, 0, 0],
                        [0, 0, 0, 0, 0],
                        [0, 0, 0, 0, t * t]], dtype=float),
        "Q1": PAPER_Q1.copy(),
        "P1": np.eye(5) - PAPER_Q1,
        "Pi1": np.array([[0, 0, 0, 0, 0],
                         [1, 1, 0, 0, 0],
                         [0, 0, 1, 0, 0],
                         [0, 0, 0, 0, 0],
                         [0, 0, 0, 0, 0]], dtype=float),
        "M1": np.array([[1, 0, 0, 0, 0],
                        [-1, 0, 0, 0, 0],
                        [0, 0, 0, 0, 0],
                        [0, 0, 0, 0, 0],
                        [0, 0, 0, 0, 0]], dtype=float),
        "Binv": np.array([[1, 0, 0],
                          [0, 1 / (2 * t), 0],
                          [0, 0, 1],
                          [0, 0, 0],
                          [0, 0, 0]], dtype=float),
        "BPi1Binv": np.array([[0, 0, 0],
                              [1, 1, 0],
                              [0, 0, 1]], dtype=float),
        "C1": np.array([[0, 0, 0, 0, 0],
                        [0, 0, 1, 0, 0],
                        [-2, -1, 0, 0, 0],
                        [3, 1, 0, 0, 0],
                        [-1, 0, 0, 0, 0]], dtype=float),
        "C1M1": np.array([[0, 0, 0, 0, 0],
                          [0, 0, 0, 0, 0],
                          [-1, 0, 0, 0, 0],
                          [2, 0, 0, 0, 0],
                          [-1, 0, 0, 0, 0]], dtype=float),
        "G2": np.array([[1, 0, 0, -1, 1],
                        [0, 1, 0, 1, 0],
                        [-1, 0, 1, 0, 0],
                        [2, 0, 0, 0, 0],
                        [-1, 0, 0, 0, t * t]], dtype=float),
    }


def paper_system(count=11, exact=False, f_entries=None) -> DAESystem:
    doc = paper_example_document()
    doc["grid"]["count"] = count
    if f_entries is not None:
        doc["f"] = list(f_entries)
    system, _, _ = load_system(doc, exact=exact)
    return system


def paper_options(inject=True) -> ChainOptions:
    if inject:
        return ChainOptions(projectors={0: PAPER_Q0, 1: PAPER_Q1})
    return ChainOptions()


def constant_system(grid, a, b, c, f_table=None) -> DAESystem:
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    c = np.asarray(c, dtype=float)
    n, m = a.shape
    if f_table is None:
        f = MatrixFunction.constant(grid, np.zeros((n, 1)))
    elif isinstance(f_table, list):
        f = MatrixFunction.from_table(grid, f_table)
    else:
        f = MatrixFunction.constant(grid, np.asarray(f_table, float).reshape(n, 1))
    return DAESystem(grid,
                     MatrixFunction.constant(grid, a),
                     MatrixFunction.constant(grid, b),
                     MatrixFunction.constant(grid, c),
                     f, n, m)


def algebraic_system(npts=8, rng=None) -> DAESystem:
    """A = B = 0, C = I: the purely algebraic index-1 system 0 = x^s + f."""
    grid = TimeScaleGrid.uniform(1.0, 0.0, npts)
    rng = rng or np.random.default_rng(0)
    n = 3
    f_tab = [rng.normal(size=(n, 1)) for _ in range(npts)]
    return constant_system(grid, np.zeros((n, n)), np.zeros((n, n)),
                           np.eye(n), f_tab)


def implicit_ode_system(npts=8) -> DAESystem:
    """A = B = I, C arbitrary: G_0 = I, index 0."""
    grid = TimeScaleGrid.uniform(1.0, 0.0, npts)
    rng = np.random.default_rng(1)
    n = 3
    return constant_system(grid, np.eye(n), np.eye(n), rng.normal(size=(n, n)))


def zero_system(npts=6) -> DAESystem:
    grid = TimeScaleGrid.uniform(1.0, 0.0, npts)
    n = 3
    return constant_system(grid, np.zeros((n, n)), np.zeros((n, n)),
                           np.zeros((n, n)))


def hand_index2_system(alpha=0.7, beta=0.3, npts=12, h=1.0) -> DAESystem:
    """x1' = x2^s + f1; 0 = x1^s + alpha x3^s + f2; x3' = beta x3^s + f3.

    Constant coefficients, tractability index 2, closed-form solution.
    """
    grid = TimeScaleGrid.uniform(h, 0.0, npts)
    a = np.array([[1.0, 0], [0, 0], [0, 1.0]])
    b = np.array([[1.0, 0, 0], [0, 0, 1.0]])
    c = np.array([[0.0, 1, 0], [1.0, 0, alpha], [0, 0, beta]])
    rng = np.random.default_rng(5)
    f_tab = [rng.normal(size=(3, 1)) for _ in range(npts)]
    return constant_system(grid, a, b, c, f_tab)


def _smooth_entry(rng, grid_kind, scale=0.4):
    """A bounded smooth scalar function of t for either grid family."""
    a = rng.uniform(-scale, scale)
    b = rng.uniform(-scale, scale)
    if grid_kind == "geometric":
        return lambda t: 1.0 + a + b / t
    return lambda t: 1.0 + a + b * t / 60.0


def random_index1_system(rng, grid) -> DAESystem:
    """Spec-shaped draw: B of rank r, A with complementary kernel, random C.

    On geometric grids the dynamic coupling of C decays like 1/t (the
    natural q-difference scaling), which keeps I - mu K well conditioned
    while the graininess grows exponentially; the algebraic part of C
    stays order one so every rank decision is clean.
    """
    m = int(rng.integers(2, 4))
    n = int(rng.integers(m, 5))
    r = int(rng.integers(1, min(m, n)))
    left = np.linalg.qr(rng.normal(size=(m, r)))[0]
    right = np.linalg.qr(rng.normal(size=(n, r)))[0].T
    gains = [_smooth_entry(rng, grid.kind) for _ in range(r)]
    npts = len(grid)

    b_tab = []
    for k in range(npts):
        t = float(grid.t(k))
        d = np.diag([g(t) for g in gains])
        b_tab.append(left @ d @ right)
    # ker A^sigma must complement im B = span(left): project onto it
    proj = left @ left.T
    lift = rng.normal(size=(n, m))
    a_tab = [lift @ proj for _ in range(npts)]

    # split C into an O(1) part feeding ker B and a dynamic part feeding
    # the row space of B (scaled down on geometric grids)
    row_proj = right.T @ right
    c_alg = rng.normal(size=(n, n)) * rng.uniform(0.4, 1.0)
    c_dyn = rng.normal(size=(n, n)) * rng.uniform(0.2, 0.6)
    c_tab = []
    for k in range(npts):
        t = float(grid.t(k))
        s = 1.0 / t if grid.kind == "geometric" else (1.0 + 0.3 * t / 60.0)
        c_tab.append(c_alg @ (np.eye(n) - row_proj) + s * (c_dyn @ row_proj))
    f_tab = [rng.normal(size=(n, 1)) for _ in range(npts)]
    return DAESystem(grid,
                     MatrixFunction.from_table(grid, a_tab),
                     MatrixFunction.from_table(grid, b_tab),
                     MatrixFunction.from_table(grid, c_tab),
                     MatrixFunction.from_table(grid, f_tab), n, m)


def random_index2_system(rng, grid, time_varying=True) -> DAESystem:
    """A randomized index-2 block system, optionally conjugated in time.

    Canonical block: x1' = x2^s + c (ode)^s; 0 = x1^s + c (ode)^s;
    ode' = c (all)^s; optional extra algebraic row.  A change of
    variables x = T(t) z and a constant left multiplier produce honest
    time-varying coefficients with the same solution structure.  (A
    time-varying left multiplier would decouple C from its own sigma
    shift and genuinely change the chain, so it is not used.)
    """
    n_ode = int(rng.integers(1, 3))
    n_alg = int(rng.integers(0, 2))
    n = 2 + n_ode + n_alg
    m = 1 + n_ode
    a0 = np.zeros((n, m))
    a0[0, 0] = 1.0
    for i in range(n_ode):
        a0[2 + i, 1 + i] = 1.0
    b0 = np.zeros((m, n))
    b0[0, 0] = 1.0
    for i in range(n_ode):
        b0[1 + i, 2 + i] = 1.0
    c0 = np.zeros((n, n))
    c0[0, 1] = 1.0                      # x2 drives x1'
    c0[0, 2:2 + n_ode] = 0.3 * rng.normal(size=n_ode)
    c0[1, 0] = 1.0                      # constraint on x1
    c0[1, 2:2 + n_ode] = 0.5 * rng.normal(size=n_ode)
    for i in range(n_ode):
        c0[2 + i, 2:2 + n_ode] = 0.2 * rng.normal(size=n_ode)
        c0[2 + i, 0] = 0.2 * rng.normal()
    for i in range(n_alg):
        c0[2 + n_ode + i, 2 + n_ode + i] = 1.0
        c0[2 + n_ode + i, 0:2] = 0.3 * rng.normal(size=2)

    npts = len(grid)
    seed_t = rng.normal(size=(n, n))
    l0 = np.eye(n) + 0.2 * np.tanh(rng.normal(size=(n, n)))

    def t_of(t):
        if not time_varying:
            return np.eye(n)
        return np.eye(n) + 0.25 * np.tanh(seed_t * (1 + t / 50.0))

    a_tab = [l0 @ a0 for _ in range(npts)]
    b_tab = [b0 @ t_of(float(grid.t(k))) for k in range(npts)]
    c_tab = [l0 @ c0 @ t_of(float(grid.t(k))) for k in range(npts)]
    f_tab = [l0 @ rng.normal(size=(n, 1)) for _ in range(npts)]
    return DAESystem(grid,
                     MatrixFunction.from_table(grid, a_tab),
                     MatrixFunction.from_table(grid, b_tab),
                     MatrixFunction.from_table(grid, c_tab),
                     MatrixFunction.from_table(grid, f_tab), n, m)


def _regressive(system, chain) -> bool:
    from tsdae.decouple import assemble
    from tsdae import linalg

    if chain.nu == 0:
        return False
    try:
        dec = assemble(chain)
    except Exception:
        return False
    for i in range(dec.inherent.base_last + 1):
        mu = float(system.grid.mu(i))
        lhs = np.eye(system.m) - mu * linalg.as_float(dec.inherent.K[i])
        if linalg.cond(lhs) > 1e12:
            return False
    return True


def build_corpus(count=50, seed=2024, npts=50):
    """Regular test systems with index 1 or 2 on both grid families.

    Uniform grids carry both the rank-deficient-B construction (index 1)
    and the conjugated block construction (index 2); geometric grids
    carry the decay-structured index-1 draws (a genuinely index-2
    structure over 48 doublings has its level-2 data at relative scale
    1/t, below double precision).  Systems are kept when the chain
    classifies them regular with nu in {1, 2} and every implicit step is
    regressive.
    """
    rng = np.random.default_rng(seed)
    uniform = TimeScaleGrid.uniform(1.0, 1.0, npts)
    geometric = TimeScaleGrid.geometric(2.0, 1.0, npts)
    corpus = []
    draws = 0
    while len(corpus) < count and draws < 40 * count:
        draws += 1
        family = draws % 4
        if family == 0:
            system = random_index1_system(rng, geometric)
        elif family == 1:
            system = random_index1_system(rng, uniform)
        else:
            system = random_index2_system(rng, uniform,
                                          time_varying=(draws % 5 != 0))
        try:
            chain = build_chain(system)
        except Exception:
            continue
        if not chain.regular or chain.nu not in (1, 2):
            continue
        if not _regressive(system, chain):
            continue
        corpus.append((system, chain))
    if len(corpus) < count:
        raise RuntimeError(f"corpus generation starved: {len(corpus)}/{count}")
    return corpus


@pytest.fixture(scope="session")
def corpus():
    return build_corpus(count=50, seed=2024)


@pytest.fixture(scope="session")
def golden_chain():
    system = paper_system()
    return system, build_chain(system, paper_options())
