"""Self-check suites behind ``carleman-cauchy check``.

Each suite returns ``(name, passed, detail)`` tuples.  The problems are the
reference problem data on small grids, so the whole set runs in well under a minute.
"""
from __future__ import annotations

import numpy as np

from .forward import add_noise, differentiate_trace, extract_trace, study_problem, solve_forward
from .functional import FunctionalConfig, TikhonovFunctional, build_extension
from .grid import build_grid
from .optimize import (
    H2Metric,
    OptimizerConfig,
    bregman_gaps,
    constrained_quadratic_minimizer,
    contraction_factor,
    gradient_projection,
    hessian_constants,
    project_ball,
    sample_ball,
)

STUDY_BETA = 0.00063


def study_functional(N, M, nonlinearity="S1", lam=3.0, beta=STUDY_BETA, noise=0.05, seed=3):
    """The functional built from the reference problem data on an ``N x M`` mesh."""
    grid = build_grid(N, M)
    spec = study_problem(nonlinearity)
    u = solve_forward(spec, grid)
    trace = differentiate_trace(add_noise(extract_trace(u, grid), noise, seed), grid)
    F = build_extension(trace, grid)
    return TikhonovFunctional(FunctionalConfig(lam=lam, beta=beta), F, spec, trace, grid)


def fd_gradient(J, v, step=1e-6):
    """Central differences of ``J`` at every free node."""
    out = np.zeros_like(v)
    for i, j in zip(*np.nonzero(J.free)):
        e = np.zeros_like(v)
        e[i, j] = step
        out[i, j] = (J(v + e) - J(v - e)) / (2 * step)
    return out


def gradient_error(nonlinearity, lam, N=8, M=8, seed=0):
    """Largest relative gap between analytic and finite-difference gradients.

    Entries far below the gradient's scale are compared against ``1e-3`` of
    that scale, since cancellation dominates them.
    """
    J = study_functional(N, M, nonlinearity, lam=lam)
    v = J.pin(np.random.default_rng(seed).standard_normal(J.grid.shape))
    g, fd = J.gradient(v), fd_gradient(J, v)
    return float((np.abs(g - fd) / np.maximum(np.abs(g), 1e-3 * np.abs(g).max())).max())


def projection_properties(pairs=1000, seed=0, N=6, M=6, R=1.0):
    """Idempotence flag, worst nonexpansiveness excess over all pairs."""
    grid = build_grid(N, M)
    m = H2Metric(grid)
    rng = np.random.default_rng(seed)
    idem, excess = True, -np.inf
    for _ in range(pairs):
        u, v = (rng.standard_normal(grid.shape) * 10.0 ** rng.uniform(-3, 0) for _ in range(2))
        pu, pv = project_ball(u, R, metric=m), project_ball(v, R, metric=m)
        idem &= np.array_equal(project_ball(pu, R, metric=m), pu)
        excess = max(excess, m.norm(pu - pv) - m.norm(u - v))
    return bool(idem), float(excess)


def variational_inequality(samples=100, seed=0, lam=1.0, radius_fraction=0.5):
    """Largest sampled ``<J'(v*), v* - y>`` at the constrained minimizer of the linear case.

    Normalized by ``|J'(v*)|_raw * R`` so the bound is scale free.
    """
    J = study_functional(6, 6, "Zero", lam=lam)
    m = H2Metric(J.grid, J.free)
    R = radius_fraction * m.norm(J.linear_minimizer())
    v, _ = constrained_quadratic_minimizer(J, R)
    g = J.gradient(v)
    rng = np.random.default_rng(seed)
    worst = -np.inf
    for k in range(samples):
        y = sample_ball(rng, m, R) if k % 2 else project_ball(rng.standard_normal(J.grid.shape) * J.free, R, metric=m)
        worst = max(worst, float(np.sum(g * (v - y))))
    return worst / max(1.0, np.abs(g).max() * R)


def convexity_violations(pairs=200, lam=3.0, beta=STUDY_BETA, R=10.0, N=128, M=32, seed=0, nonlinearity="S1"):
    """Pairs whose Bregman gap falls below ``(beta/2) |h|^2 - 1e-9``."""
    J = study_functional(N, M, nonlinearity, lam=lam, beta=beta)
    sample = bregman_gaps(J, R, pairs, seed=seed)
    ratio = float((sample.gaps / sample.dist_sq).min())
    return sample.violations(beta / 2.0), ratio


def contraction_run(lam=3.0, beta=STUDY_BETA, iters=2000, N=6, M=6):
    """Gradient projection at half the step bound on the linear problem.

    Returns ``(q, max error ratio, final distance to the direct minimizer)``;
    ratios are taken while the error is above the rounding floor.
    """
    J = study_functional(N, M, "Zero", lam=lam, beta=beta)
    m = H2Metric(J.grid, J.free)
    L, kappa = hessian_constants(J, m)
    gamma = kappa / L**2
    vmin = J.linear_minimizer()
    errs = []
    R = 1e3 * max(1.0, m.norm(vmin))
    gradient_projection(OptimizerConfig("GradientProjection", gamma=gamma, iters=iters, R=R), J,
                        callback=lambda n, v: errs.append(m.norm(v - vmin)))
    errs = np.asarray(errs)
    # once the error reaches the rounding floor of the minimizer the ratios are noise
    nz = errs[:-1] > 1e-10 * max(1.0, m.norm(vmin))
    ratio = float((errs[1:][nz] / errs[:-1][nz]).max()) if nz.any() else 0.0
    return contraction_factor(gamma, kappa, L), ratio, float(errs[-1])


def run_all(seed=0):
    results = []
    worst = max(gradient_error(name, lam, seed=seed) for name in ("S1", "S2", "Zero") for lam in (0.0, 1.0, 3.0))
    results.append(("gradient-fd", worst <= 1e-5, f"max relative error {worst:.2e} (8x8, S1/S2/Zero, lambda 0/1/3)"))
    idem, excess = projection_properties(seed=seed)
    results.append(("projection-idempotent", idem, "P(P(v)) == P(v) on 1000 pairs"))
    results.append(("projection-nonexpansive", excess <= 1e-12, f"worst excess {excess:.2e}"))
    vi = variational_inequality(seed=seed)
    results.append(("variational-inequality", vi <= 1e-8, f"max <J'(v*), v* - y> {vi:.2e}"))
    bad, ratio = convexity_violations(seed=seed)
    results.append(("convexity", bad == 0, f"{bad} violations in 200 pairs, min gap/|h|^2 {ratio:.3g}"))
    q, ratio, _ = contraction_run()
    results.append(("contraction", ratio <= q + 0.05, f"1 - max error ratio {1 - ratio:.3e}, 1 - q {1 - q:.3e}"))
    return results
