"""Gradient projection, fixed-step conjugate gradients and the convexity checks.

On a small linear problem the exact minimizer is one sparse solve away, so
both iterations can be compared against it, and the contraction factor q
predicted from the Hessian spectrum can be compared with observed ratios.
"""
import numpy as np

from carleman_cauchy.diagnostics import study_functional
from carleman_cauchy.optimize import (
    H2Metric,
    OptimizerConfig,
    estimate_constants,
    fixed_step_cg,
    gradient_projection,
    hessian_constants,
    project_ball,
)

J = study_functional(6, 6, "Zero", lam=1.0, beta=0.5)
m = H2Metric(J.grid, J.free)
L, kappa = hessian_constants(J, m)
v_min = J.linear_minimizer()
print(f"L = {L:.4g}, kappa = {kappa:.4g}, step bound 2 kappa / L^2 = {2 * kappa / L**2:.4g}")

gamma = kappa / L**2
errs = []
gradient_projection(OptimizerConfig("GradientProjection", gamma=gamma, iters=3000, R=1e3), J,
                    callback=lambda n, v: errs.append(m.norm(v - v_min)))
errs = np.array(errs)
diag = estimate_constants(J, R=5.0, samples=50, gamma=gamma)
print(f"q(gamma) = {diag.q_gamma:.5f}, worst observed ratio {np.max(errs[1:50] / errs[:49]):.5f}")
print(f"gradient projection error after 3000 steps: {errs[-1]:.2e}")

cg = fixed_step_cg(OptimizerConfig(gamma=0.5 / L, iters=300), J)
print(f"fixed-step CG error after 300 steps: {m.norm(cg.final - v_min):.2e}, restarts {len(cg.restarts)}")

# projection onto a small ball puts the answer on the sphere
R = 0.5 * m.norm(v_min)
print(f"|P(v_min)| = {m.norm(project_ball(v_min, R, metric=m)):.6f} with R = {R:.6f}")
