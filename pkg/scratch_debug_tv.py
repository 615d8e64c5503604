"""Check every decoupling relation against a ground-truth oracle trajectory."""
import numpy as np
from tsdae import (TimeScaleGrid, MatrixFunction, DAESystem, build_chain,
                   assemble, solve_forward)
from tsdae import linalg as la
from scratch_validate import random_tv_system

rng = np.random.default_rng(7)
sysr = random_tv_system(rng)
res = build_chain(sysr)
print("status", res.status, "nu", res.nu, "ranks", res.ranks)
dec = assemble(res)
grid = sysr.grid
n, m, nu = sysr.n, sysr.m, res.nu

# ground truth by direct stepping (W nonsingular everywhere here?)
from tsdae.oracle import _step_matrices
x = {0: rng.normal(size=n)}
for k in range(grid.last_index):
    w, lift = _step_matrices(sysr, k)
    print(f"cond W({k}) = {la.cond(w):.2e}")
    rhs = la.as_float(sysr.f(k)).reshape(-1) + lift @ x[k]
    x[k + 1] = np.linalg.solve(w, rhs)

from tsdae.decouple import residual
print("truth residuals:", max(residual(sysr, x, k) for k in range(grid.last_index)))

u_true = {i: la.as_float(sysr.B(i)) @ la.as_float(res.stages[nu-1].Pi[i]) @ x[i]
          for i in range(res.stages[nu-1].last + 1)}
v_true = [{i: la.as_float(res.stages[k].M[i]) @ x[i]
           for i in range(res.stages[k].last + 1)} for k in range(nu)]

# 1) inherent equation on the true u
bl = dec.inherent.base_last
for i in range(bl + 1):
    mu = float(grid.mu(i))
    lhs = (u_true[i+1] - u_true[i]) / mu
    rhs = la.as_float(dec.inherent.K[i]) @ u_true[i+1] + dec.inherent.g[i]
    err = np.max(np.abs(lhs - rhs))
    if err > 1e-10:
        print(f"INHERENT mismatch at {i}: {err:.2e}")
print("inherent eq checked")

# 2) v_{nu-1} equation: T_11 v1^s = -Khat u^s - F f  (+ drops T_10 v0^s)
c = dec.coeffs
k1 = nu - 1
for i in range(bl + 1):
    lhs = la.as_float(c.T[k1][k1][i]) @ v_true[k1][i+1]
    rhs = -(la.as_float(c.Khat[k1][i]) @ u_true[i+1]) \
          - la.as_float(c.F[k1][i] @ sysr.f(i)).reshape(-1)
    # include the dropped coupling explicitly to see if it matters
    drop = la.as_float(c.T[k1][0][i]) @ v_true[0][i+1]
    err_without = np.max(np.abs(lhs - rhs))
    err_with = np.max(np.abs(lhs - (rhs - drop)))
    if err_without > 1e-10:
        print(f"V1 eq at {i}: without drop {err_without:.2e}, with drop {err_with:.2e}")
print("v1 eq checked")

# 3) v_0 equation with corrections
for i in range(bl + 1):
    mu = float(grid.mu(i))
    u_delta = (u_true[i+1] - u_true[i]) / mu
    rhs = la.as_float(c.W[0][i]) @ u_delta \
        - la.as_float(c.Khat[0][i]) @ u_true[i+1] \
        - la.as_float(c.F[0][i] @ sysr.f(i)).reshape(-1)
    for j in range(1, nu):
        bdv = (la.as_float(sysr.B(i+1)) @ v_true[j][i+1]
               - la.as_float(sysr.B(i)) @ v_true[j][i]) / mu
        rhs = rhs + la.as_float(c.N[0][i][j]) @ bdv
        rhs = rhs + la.as_float(c.Psi[0][i] - c.T[0][j][i]) @ v_true[j][i+1]
    lhs = la.as_float(c.T[0][0][i]) @ v_true[0][i+1]
    err = np.max(np.abs(lhs - rhs))
    if err > 1e-10:
        print(f"V0 eq at {i}: {err:.2e}")
print("v0 eq checked")

# 4) now the solver path itself, seeded with x0 (full consistency)
sol = solve_forward(dec, x0=x[0])
print("solver from x0: max residual", sol.max_residual())
worst = max(np.max(np.abs(sol.x[i] - x[i])) for i in sol.x)
print("solver vs truth:", worst)
sol2 = solve_forward(dec, u0_raw=u_true[0])
print("solver from u0 (different algebraic init): max residual", sol2.max_residual())
