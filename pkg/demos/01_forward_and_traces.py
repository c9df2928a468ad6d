"""Forward problem and the lateral Cauchy data it produces.

Solves u_t = u_xx + S(u) + G on (0,1) x (-1/2, 1/2) with the implicit scheme,
reads off p = u(1, t) and the one-sided flux q, adds 5% noise and
differentiates the noisy traces, which is all the inverse solver ever sees.
"""
import numpy as np

from carleman_cauchy import build_grid
from carleman_cauchy.forward import add_noise, differentiate_trace, extract_trace, study_problem, solve_forward

grid = build_grid(128, 32)
for name in ("S1", "S2", "Zero"):
    u = solve_forward(study_problem(name), grid)
    print(f"{name:>4}: max|u| = {np.abs(u).max():.3f}, u(0.6, 0) = {u[grid.nearest_x_index(0.6), 16]:.4f}")

u = solve_forward(study_problem("S1"), grid)
clean = extract_trace(u, grid)
noisy = differentiate_trace(add_noise(clean, 0.05, seed=0), grid)

# the perturbation never exceeds 5% of the trace's sup norm
dp = np.abs(np.asarray(noisy.p_vals) - clean.p_vals).max() / np.abs(clean.p_vals).max()
dq = np.abs(np.asarray(noisy.q_vals) - clean.q_vals).max() / np.abs(clean.q_vals).max()
print(f"relative noise on p: {dp:.3f}, on q: {dq:.3f}")
print("first rows of the noisy trace (t, p, q, dp, dq):")
for j in range(4):
    print("  " + "  ".join(f"{v[j]:+.4f}" for v in (noisy.t, noisy.p_vals, noisy.q_vals, noisy.dp_vals, noisy.dq_vals)))
