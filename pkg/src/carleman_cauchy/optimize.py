"""Ball projection, gradient projection, fixed-step conjugate gradients and
empirical convexity constants.

The optimizers work on any object exposing ``value(v)``, ``gradient(v)``
(raw partial derivatives w.r.t. nodal values), ``grid`` and a boolean
``free`` mask of the nodes that may move.  Gradients are turned into
search directions through a :class:`Metric`: by default the discrete H^2
inner product, the same one that defines the ball.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
from scipy.optimize import brentq
from scipy.sparse.linalg import eigsh, splu

from .grid import Grid

__all__ = [
    "NumericalDivergenceError",
    "BregmanSample",
    "bregman_gaps",
    "constrained_quadratic_minimizer",
    "H2Metric",
    "NodalMetric",
    "make_metric",
    "project_ball",
    "OptimizerConfig",
    "RunTrajectory",
    "ConvexityDiagnostics",
    "gradient_projection",
    "fixed_step_cg",
    "minimize",
    "contraction_factor",
    "estimate_constants",
    "hessian_constants",
    "sample_ball",
    "write_trajectory_csv",
]


class NumericalDivergenceError(FloatingPointError):
    """An iterate, functional value or gradient became non-finite."""


class H2Metric:
    """Discrete H^2 inner product restricted to the free nodes."""

    name = "h2"

    def __init__(self, grid: Grid, free: Optional[np.ndarray] = None):
        self.grid = grid
        self.free = np.ones(grid.shape, dtype=bool) if free is None else np.asarray(free, dtype=bool)
        self._idx = np.flatnonzero(self.free.ravel())
        self.gram = grid.h2_gram
        self._gram_free = self.gram[self._idx][:, self._idx].tocsc()
        self._lu = splu(self._gram_free)

    def inner(self, a, b) -> float:
        return float(np.ravel(a) @ (self.gram @ np.ravel(b)))

    def norm(self, a) -> float:
        return math.sqrt(max(self.inner(a, a), 0.0))

    def riesz(self, raw) -> np.ndarray:
        """Solve ``K g = raw`` on the free nodes; ``inner(g, w) == sum(raw * w)``."""
        out = np.zeros(self.grid.size)
        out[self._idx] = self._lu.solve(np.ravel(raw)[self._idx])
        return out.reshape(self.grid.shape)

    def gram_free(self) -> sp.csc_matrix:
        return self._gram_free


class NodalMetric:
    """Nodal l2 product weighted by ``h * tau``."""

    name = "l2"

    def __init__(self, grid: Grid, free: Optional[np.ndarray] = None):
        self.grid = grid
        self.free = np.ones(grid.shape, dtype=bool) if free is None else np.asarray(free, dtype=bool)
        self._idx = np.flatnonzero(self.free.ravel())

    def inner(self, a, b) -> float:
        return float(self.grid.cell * np.sum(np.asarray(a) * np.asarray(b)))

    def norm(self, a) -> float:
        return math.sqrt(max(self.inner(a, a), 0.0))

    def riesz(self, raw) -> np.ndarray:
        out = np.asarray(raw, dtype=float) / self.grid.cell
        return np.where(self.free, out, 0.0)

    def gram_free(self) -> sp.csc_matrix:
        return (self.grid.cell * sp.identity(self._idx.size)).tocsc()


def make_metric(name: str, grid: Grid, free=None):
    if name == "h2":
        return H2Metric(grid, free)
    if name == "l2":
        return NodalMetric(grid, free)
    raise ValueError(f"unknown metric {name!r}; use 'h2' or 'l2'")


def _radial(v: np.ndarray, R: float, metric) -> tuple[np.ndarray, bool]:
    nv = metric.norm(v)
    if nv <= R or not math.isfinite(nv):
        return v, False
    out = v * (R / nv)
    # shave rounding so the computed norm is <= R and projection is idempotent
    while metric.norm(out) > R:
        out = out * (1.0 - 2.0**-52)
    return out, True


def project_ball(v: np.ndarray, R: float, grid: Optional[Grid] = None, metric=None) -> np.ndarray:
    """Metric projection onto the closed centered ball of radius ``R``.

    The norm is the discrete H^2 norm of ``grid`` unless ``metric`` is given.
    Radial scaling keeps pinned (zero) nodes at zero.
    """
    if not R > 0:
        raise ValueError(f"ball radius must be positive, got {R}")
    v = np.array(v, dtype=float)
    if math.isinf(R):
        return v
    if metric is None:
        if grid is None:
            raise ValueError("project_ball needs a grid or a metric")
        metric = H2Metric(grid)
    return _radial(v, R, metric)[0]


@dataclass
class OptimizerConfig:
    method: str = "FixedStepCG"
    gamma: float = 1e-3
    iters: int = 10_000
    R: float = math.inf
    v0: Optional[np.ndarray] = None
    metric: str = "h2"
    restart: Optional[int] = None
    restart_on_growth: bool = True

    def __post_init__(self):
        if self.method not in ("GradientProjection", "FixedStepCG"):
            raise ValueError(f"unknown optimizer method {self.method!r}")
        if not self.gamma > 0:
            raise ValueError(f"gamma must be positive, got {self.gamma}")
        if int(self.iters) != self.iters or self.iters < 1:
            raise ValueError(f"iters must be a positive integer, got {self.iters}")
        if not self.R > 0:
            raise ValueError(f"R must be positive, got {self.R}")


@dataclass
class RunTrajectory:
    final: np.ndarray
    J_history: np.ndarray
    grad_norm_history: np.ndarray
    projected_flags: np.ndarray
    restarts: list = field(default_factory=list)


def _start(cfg: OptimizerConfig, functional) -> np.ndarray:
    grid = functional.grid
    if cfg.v0 is None:
        return np.zeros(grid.shape)
    v0 = grid.check_field(cfg.v0, "v0").copy()
    if np.any(v0[~functional.free] != 0.0):
        raise ValueError("v0 must vanish on the constrained columns")
    return v0


def _checked(n: int, J: float, g: np.ndarray) -> None:
    if not math.isfinite(J) or not np.all(np.isfinite(g)):
        raise NumericalDivergenceError(f"non-finite functional value or gradient at iteration {n}")


def _step_value(n: int, functional, v: np.ndarray) -> float:
    if not np.all(np.isfinite(v)):
        raise NumericalDivergenceError(f"non-finite iterate at iteration {n}")
    J = functional.value(v)
    if not math.isfinite(J):
        raise NumericalDivergenceError(f"non-finite functional value at iteration {n}")
    return J


# overflow is detected explicitly and reported as NumericalDivergenceError
@np.errstate(over="ignore", invalid="ignore")
def gradient_projection(cfg: OptimizerConfig, functional, callback: Optional[Callable] = None) -> RunTrajectory:
    """``v_{n+1} = P_R(v_n - gamma * grad J(v_n))`` with the gradient taken in the metric.

    ``callback(n, v_n)`` is invoked for every iterate including the start.
    """
    metric = make_metric(cfg.metric, functional.grid, functional.free)
    v = _start(cfg, functional)
    if metric.norm(v) > cfg.R + 1e-12:
        raise ValueError("v0 lies outside the ball")
    Js, gnorms, flags = [], [], []
    J = functional.value(v)
    Js.append(J)
    if callback:
        callback(0, v)
    for n in range(cfg.iters):
        g = metric.riesz(functional.gradient(v))
        _checked(n, J, g)
        gnorms.append(metric.norm(g))
        v, projected = _radial(v - cfg.gamma * g, cfg.R, metric)
        flags.append(projected)
        J = _step_value(n + 1, functional, v)
        Js.append(J)
        if callback:
            callback(n + 1, v)
    _checked(cfg.iters, J, v)
    return RunTrajectory(v, np.array(Js), np.array(gnorms), np.array(flags, dtype=bool))


@np.errstate(over="ignore", invalid="ignore")
def fixed_step_cg(cfg: OptimizerConfig, functional, callback: Optional[Callable] = None) -> RunTrajectory:
    """Fletcher-Reeves conjugate directions advanced with a constant step.

    Directions are reset to steepest descent every ``cfg.restart`` steps
    (default ``N * M``) and, with ``restart_on_growth``, whenever the
    Fletcher-Reeves ratio exceeds one.  A finite ``cfg.R`` projects each
    iterate back onto the ball.
    """
    grid = functional.grid
    metric = make_metric(cfg.metric, grid, functional.free)
    restart = cfg.restart or grid.N * grid.M
    v = _start(cfg, functional)
    Js, gnorms, flags, restarts = [], [], [], []
    J = functional.value(v)
    Js.append(J)
    g = metric.riesz(functional.gradient(v))
    _checked(0, J, g)
    gg = metric.inner(g, g)
    d = -g
    if callback:
        callback(0, v)
    since_restart = 0
    for n in range(cfg.iters):
        gnorms.append(math.sqrt(gg))
        v, projected = _radial(v + cfg.gamma * d, cfg.R, metric)
        flags.append(projected)
        J = _step_value(n + 1, functional, v)
        g = metric.riesz(functional.gradient(v))
        _checked(n + 1, J, g)
        Js.append(J)
        gg_new = metric.inner(g, g)
        beta = gg_new / gg if gg > 0 else 0.0
        gg = gg_new
        since_restart += 1
        if since_restart >= restart or (cfg.restart_on_growth and beta > 1.0) or projected:
            d = -g
            since_restart = 0
            restarts.append(n + 1)
        else:
            d = -g + beta * d
        if callback:
            callback(n + 1, v)
    return RunTrajectory(v, np.array(Js), np.array(gnorms), np.array(flags, dtype=bool), restarts)


def minimize(cfg: OptimizerConfig, functional, callback=None) -> RunTrajectory:
    if cfg.method == "GradientProjection":
        if math.isinf(cfg.R):
            raise ValueError("gradient projection needs a finite ball radius R")
        return gradient_projection(cfg, functional, callback)
    return fixed_step_cg(cfg, functional, callback)


# -- diagnostics ------------------------------------------------------------------


def contraction_factor(gamma: float, kappa: float, L: float) -> float:
    """``q(gamma) = sqrt(1 - 2 gamma kappa + gamma^2 L^2)``, clipped at zero."""
    return math.sqrt(max(0.0, 1.0 - 2.0 * gamma * kappa + gamma**2 * L**2))


@dataclass
class ConvexityDiagnostics:
    L_hat: float
    kappa_hat: float
    gamma: float
    q_gamma: float
    gamma_bound: float
    L_hessian: Optional[float] = None
    kappa_hessian: Optional[float] = None
    samples: int = 0

    @classmethod
    def from_constants(cls, L, kappa, gamma, **kw):
        return cls(L_hat=L, kappa_hat=kappa, gamma=gamma,
                   q_gamma=contraction_factor(gamma, kappa, L),
                   gamma_bound=2.0 * kappa / L**2, **kw)


def sample_ball(rng: np.random.Generator, metric, R: float, smooth: bool = True) -> np.ndarray:
    """A random field in the closed ball, zero off the free nodes.

    With ``smooth`` the direction mixes a few low Fourier modes with nodal
    noise so that samples are not all dominated by grid-scale oscillation.
    """
    grid = metric.grid
    w = rng.standard_normal(grid.shape)
    if smooth:
        X, T = grid.mesh()
        for _ in range(3):
            kx, kt = rng.integers(1, 4, size=2)
            w += 5.0 * rng.standard_normal() * np.sin(kx * np.pi * X + rng.uniform(0, np.pi)) \
                * np.cos(kt * np.pi * T + rng.uniform(0, np.pi))
    w[~metric.free] = 0.0
    r = R * rng.uniform() ** (1.0 / max(1, int(metric.free.sum())))
    return w * (r / metric.norm(w))


def hessian_constants(functional, metric) -> tuple[float, float]:
    """``(L, kappa)`` of a quadratic functional from extreme generalized
    eigenvalues of ``H x = mu K x``: ``L = mu_max``, ``kappa = mu_min / 2``."""
    idx = np.flatnonzero(functional.free.ravel())
    H = functional.hessian()[idx][:, idx]
    K = metric.gram_free()
    if idx.size <= 400:
        mu = sla.eigh(H.toarray(), K.toarray(), eigvals_only=True)
        return float(mu[-1]), float(mu[0]) / 2.0
    mu_max = eigsh(H, M=K, k=1, which="LA", return_eigenvectors=False)[0]
    mu_min = eigsh(H, M=K, k=1, sigma=0.0, which="LM", return_eigenvectors=False)[0]
    return float(mu_max), float(mu_min) / 2.0


def estimate_constants(functional, R: float, samples: int, gamma: float, seed: int = 0,
                       metric: str = "h2", hessian: Optional[bool] = None) -> ConvexityDiagnostics:
    """Sampled Lipschitz and convexity constants of ``grad J`` on the ball.

    ``L_hat`` is the largest observed ``|g1 - g2| / |v1 - v2|`` and
    ``kappa_hat`` the smallest Bregman gap ``J(v2) - J(v1) - <g1, v2 - v1>``
    divided by ``|v2 - v1|^2``.  For a quadratic functional (one exposing
    ``hessian()`` without raising) the eigenvalue constants are added.
    """
    if samples < 10:
        raise ValueError(f"need at least 10 samples, got {samples}")
    m = make_metric(metric, functional.grid, functional.free)
    rng = np.random.default_rng(seed)
    L_hat, kappa_hat = 0.0, math.inf
    done = 0
    while done < samples:
        v1, v2 = sample_ball(rng, m, R), sample_ball(rng, m, R)
        dv = m.norm(v2 - v1)
        if dv <= 1e-14 * max(1.0, R):
            continue
        raw1, raw2 = functional.gradient(v1), functional.gradient(v2)
        g1, g2 = m.riesz(raw1), m.riesz(raw2)
        L_hat = max(L_hat, m.norm(g1 - g2) / dv)
        gap = functional.value(v2) - functional.value(v1) - float(np.sum(raw1 * (v2 - v1)))
        kappa_hat = min(kappa_hat, gap / dv**2)
        done += 1
    extra = {}
    if hessian is None:
        hessian = getattr(getattr(functional, "spec", None), "nonlinearity", None) is not None \
            and functional.spec.nonlinearity.name == "Zero"
    if hessian:
        L, kappa = hessian_constants(functional, m)
        extra = {"L_hessian": L, "kappa_hessian": kappa}
    return ConvexityDiagnostics.from_constants(L_hat, kappa_hat, gamma, samples=samples, **extra)


def constrained_quadratic_minimizer(functional, R: float, metric: str = "h2") -> tuple[np.ndarray, float]:
    """Minimizer of a quadratic functional over the ball ``|v| <= R``.

    Solves ``(H + 2 mu K) v = -g0`` and picks the multiplier ``mu >= 0`` by a
    bracketed root search on ``|v(mu)| = R``.  Returns ``(v, mu)``.
    """
    m = make_metric(metric, functional.grid, functional.free)
    idx = np.flatnonzero(functional.free.ravel())
    H = functional.hessian()[idx][:, idx].tocsc()
    K = m.gram_free().tocsc()
    b = -functional.gradient(np.zeros(functional.grid.shape)).ravel()[idx]

    def solve(mu):
        out = np.zeros(functional.grid.size)
        out[idx] = splu((H + 2.0 * mu * K).tocsc()).solve(b)
        return out.reshape(functional.grid.shape)

    v = solve(0.0)
    if m.norm(v) <= R:
        return v, 0.0
    hi = 1.0
    while m.norm(solve(hi)) > R:
        hi *= 4.0
    mu = brentq(lambda t: m.norm(solve(t)) - R, 0.0, hi, xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=500)
    v, _ = _radial(solve(mu), R, m)
    return v, float(mu)


@dataclass
class BregmanSample:
    gaps: np.ndarray
    dist_sq: np.ndarray

    def violations(self, modulus: float, slack: float = 1e-9) -> int:
        """Pairs with ``gap < modulus * |v2 - v1|^2 - slack``."""
        return int(np.sum(self.gaps < modulus * self.dist_sq - slack))


def bregman_gaps(functional, R: float, pairs: int, seed: int = 0, metric: str = "h2") -> BregmanSample:
    """Bregman gaps ``J(v2) - J(v1) - J'(v1)(v2 - v1)`` on random pairs in the ball."""
    m = make_metric(metric, functional.grid, functional.free)
    rng = np.random.default_rng(seed)
    gaps, dist = np.empty(pairs), np.empty(pairs)
    for k in range(pairs):
        v1, v2 = sample_ball(rng, m, R), sample_ball(rng, m, R)
        h = v2 - v1
        gaps[k] = functional.value(v2) - functional.value(v1) - float(np.sum(functional.gradient(v1) * h))
        dist[k] = m.norm(h) ** 2
    return BregmanSample(gaps, dist)


def write_trajectory_csv(traj: RunTrajectory, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["iteration", "J", "grad_norm", "projected"])
        n = len(traj.J_history)
        for k in range(n):
            gn = repr(float(traj.grad_norm_history[k])) if k < len(traj.grad_norm_history) else ""
            pr = int(traj.projected_flags[k]) if k < len(traj.projected_flags) else ""
            w.writerow([k, repr(float(traj.J_history[k])), gn, pr])
