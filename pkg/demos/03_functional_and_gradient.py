"""The weighted Tikhonov functional and its exact gradient.

Builds J(v) = h tau sum r^2 phi^2 + beta |v|^2_H2 for the S1 problem and checks
a few gradient entries against central differences.  It also shows how far
the forward solution is from a zero of the discrete residual.  The residual
is explicit in x while the solver is implicit, and the data are not
compatible at the initial corners, so only the L2 size of that residual
shrinks under refinement, and the maximum once away from t = -1/2.
"""
import numpy as np

from carleman_cauchy import FunctionalConfig, TikhonovFunctional, build_extension, build_grid
from carleman_cauchy.forward import add_noise, differentiate_trace, extract_trace, study_problem, solve_forward
from carleman_cauchy.functional import residual

spec = study_problem("S1")
grid = build_grid(32, 16)
u = solve_forward(spec, grid)
trace = differentiate_trace(add_noise(extract_trace(u, grid), 0.05, seed=1), grid)
F = build_extension(trace, grid)
J = TikhonovFunctional(FunctionalConfig(lam=3.0, beta=0.00063), F, spec, trace, grid)

rng = np.random.default_rng(0)
v = J.pin(0.1 * rng.standard_normal(grid.shape))
g = J.gradient(v)
for i, j in [(5, 3), (17, 8), (29, 15)]:
    e = np.zeros(grid.shape)
    e[i, j] = 1e-6
    fd = (J(v + e) - J(v - e)) / 2e-6
    print(f"dJ/dv[{i},{j}]: analytic {g[i, j]:+.8e}, difference {fd:+.8e}")
print("gradient on pinned columns:", np.abs(g[-2:]).max())

print("residual of the noiseless forward solution:")
for N, M in [(32, 16), (64, 64), (128, 256)]:
    gr = build_grid(N, M)
    u = solve_forward(spec, gr)
    tr = differentiate_trace(extract_trace(u, gr), gr)
    Fr = build_extension(tr, gr)
    r = residual(u - Fr, Fr, spec, tr, gr)
    print(f"  {N:>3} x {M:<3}: L2 {np.sqrt(gr.cell * np.sum(r**2)):7.3f}, "
          f"max for t >= -1/4 {np.abs(r[:, gr.M // 4:]).max():7.3f}")
