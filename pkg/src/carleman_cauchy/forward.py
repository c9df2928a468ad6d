"""Forward parabolic solver, lateral Cauchy traces and noisy data synthesis."""
from __future__ import annotations

import csv
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Callable, Optional

import numpy as np
from scipy.linalg import solve_banded

from .grid import Grid

__all__ = [
    "NONLINEARITIES",
    "Nonlinearity",
    "ProblemSpec",
    "study_problem",
    "CauchyTrace",
    "solve_forward",
    "extract_trace",
    "add_noise",
    "differentiate_trace",
    "write_trace_csv",
    "read_trace_csv",
]


@dataclass(frozen=True)
class Nonlinearity:
    """Lower-order term ``S(u, x, t)`` together with ``dS/du``."""

    name: str
    value: Callable[[np.ndarray, np.ndarray, np.ndarray], np.ndarray]
    du: Callable[[np.ndarray, np.ndarray, np.ndarray], np.ndarray]
    bound: float


def _s1(u, x, t):
    return 10.0 * np.cos(u + x + 2.0 * t)


def _ds1(u, x, t):
    return -10.0 * np.sin(u + x + 2.0 * t)


def _s2(u, x, t):
    return 10.0 * u**2 / (1.0 + u**2)


def _ds2(u, x, t):
    return 20.0 * u / (1.0 + u**2) ** 2


def _zero(u, x, t):
    return np.zeros(np.broadcast(u, x, t).shape)


NONLINEARITIES = {
    "S1": Nonlinearity("S1", _s1, _ds1, 10.0),
    "S2": Nonlinearity("S2", _s2, _ds2, 10.0),
    "Zero": Nonlinearity("Zero", _zero, _zero, 0.0),
}


def _study_G(x, t):
    return 10.0 * np.sin(100.0 * ((x - 0.5) ** 2 + t**2))


def _study_f(x):
    return 10.0 * (x - x**2)


def _study_g(t):
    return 10.0 * np.sin(10.0 * (t - 0.5) * (t + 0.5))


def _study_p(t):
    return np.sin(10.0 * (t + 0.5))


@dataclass(frozen=True)
class ProblemSpec:
    """``u_t = u_xx + S(u) + G`` on the unit time cylinder with
    ``u(x, -1/2) = f``, ``u(0, t) = g`` and ``u(1, t) = p``."""

    nonlinearity: Nonlinearity
    G: Callable = _study_G
    f: Callable = _study_f
    g: Callable = _study_g
    p: Callable = _study_p

    def __post_init__(self):
        if isinstance(self.nonlinearity, str):
            object.__setattr__(self, "nonlinearity", NONLINEARITIES[self.nonlinearity])

    def S(self, u, x, t):
        return self.nonlinearity.value(u, x, t)

    def dS(self, u, x, t):
        return self.nonlinearity.du(u, x, t)


def study_problem(nonlinearity: str = "S1") -> ProblemSpec:
    """The source, initial and boundary data of the numerical study, with the
    chosen lower-order term (``"S1"``, ``"S2"`` or ``"Zero"``)."""
    return ProblemSpec(NONLINEARITIES[nonlinearity])


def solve_forward(spec: ProblemSpec, grid: Grid) -> np.ndarray:
    """Implicit-diffusion, lagged-source finite differences.

    Each step solves ``(u^{j+1} - u^j)/tau = D_xx u^{j+1} + S(u^j) + G^j`` on
    the interior nodes with Dirichlet values from ``g`` and ``p``.
    """
    N, M, h, tau = grid.N, grid.M, grid.h, grid.tau
    x, t = grid.x_nodes, grid.t_nodes
    u = np.empty(grid.shape)
    u[:, 0] = spec.f(x)
    u[0, :] = spec.g(t)
    u[N, :] = spec.p(t)
    G = grid.sample(spec.G)

    r = 1.0 / h**2
    n = N - 1
    ab = np.empty((3, n))
    ab[0, :] = -r
    ab[1, :] = 1.0 / tau + 2.0 * r
    ab[2, :] = -r
    xi = x[1:N]
    for j in range(M):
        rhs = u[1:N, j] / tau + spec.S(u[1:N, j], xi, t[j]) + G[1:N, j]
        rhs[0] += r * u[0, j + 1]
        rhs[-1] += r * u[N, j + 1]
        u[1:N, j + 1] = solve_banded((1, 1), ab, rhs, check_finite=False)
    assert np.all(np.isfinite(u)), "forward solve produced non-finite values"
    return u


@dataclass(frozen=True)
class CauchyTrace:
    """Dirichlet ``p`` and Neumann ``q`` data at ``x = 1`` on the time nodes."""

    t: np.ndarray
    p_vals: np.ndarray
    q_vals: np.ndarray
    dp_vals: Optional[np.ndarray] = None
    dq_vals: Optional[np.ndarray] = None
    noise_level: float = 0.0
    seed: Optional[int] = None

    def __post_init__(self):
        n = len(self.t)
        for name in ("p_vals", "q_vals", "dp_vals", "dq_vals"):
            val = getattr(self, name)
            if val is not None and len(val) != n:
                raise ValueError(f"{name} has length {len(val)}, expected {n}")

    @property
    def has_derivatives(self) -> bool:
        return self.dp_vals is not None and self.dq_vals is not None


def extract_trace(u: np.ndarray, grid: Grid) -> CauchyTrace:
    u = grid.check_field(u, "u")
    N = grid.N
    p = u[N].copy()
    q = (u[N] - u[N - 1]) / grid.h
    return CauchyTrace(t=np.array(grid.t_nodes), p_vals=p, q_vals=q)


def add_noise(trace: CauchyTrace, level: float, seed: int) -> CauchyTrace:
    """Multiplicative-amplitude uniform noise on both traces.

    ``p + level * max|p| * sigma`` and ``q + level * max|q| * sigma'`` with
    ``sigma, sigma'`` drawn independently from U[-1, 1], each stream spawned
    from ``seed``.
    """
    if level < 0:
        raise ValueError(f"noise level must be nonnegative, got {level}")
    p, q = np.asarray(trace.p_vals), np.asarray(trace.q_vals)
    ss_p, ss_q = np.random.SeedSequence(seed).spawn(2)
    sigma_p = np.random.default_rng(ss_p).uniform(-1.0, 1.0, size=p.shape)
    sigma_q = np.random.default_rng(ss_q).uniform(-1.0, 1.0, size=q.shape)
    p_noisy = p + level * np.max(np.abs(p)) * sigma_p
    q_noisy = q + level * np.max(np.abs(q)) * sigma_q
    return replace(trace, p_vals=p_noisy, q_vals=q_noisy, dp_vals=None, dq_vals=None,
                   noise_level=float(level), seed=seed)


def differentiate_trace(trace: CauchyTrace, grid: Grid) -> CauchyTrace:
    """Time derivatives of the traces: central inside, one-sided at the ends."""
    dp = np.gradient(np.asarray(trace.p_vals, dtype=float), grid.tau, edge_order=1)
    dq = np.gradient(np.asarray(trace.q_vals, dtype=float), grid.tau, edge_order=1)
    return replace(trace, dp_vals=dp, dq_vals=dq)


_CSV_COLUMNS = ("t", "p", "q", "dp", "dq")


def write_trace_csv(trace: CauchyTrace, path) -> None:
    cols = [trace.t, trace.p_vals, trace.q_vals, trace.dp_vals, trace.dq_vals]
    n = len(trace.t)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(_CSV_COLUMNS)
        for k in range(n):
            w.writerow(["" if c is None else repr(float(c[k])) for c in cols])


def read_trace_csv(path) -> CauchyTrace:
    with open(Path(path), newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if tuple(header) != _CSV_COLUMNS:
            raise ValueError(f"unexpected trace CSV header {header}, expected {list(_CSV_COLUMNS)}")
        rows = list(reader)
    cols = list(zip(*rows)) if rows else [()] * 5

    def parse(col):
        if any(v == "" for v in col):
            return None
        return np.array([float(v) for v in col])

    t, p, q, dp, dq = (parse(c) for c in cols)
    if t is None or p is None or q is None:
        raise ValueError("trace CSV requires t, p and q values on every row")
    return CauchyTrace(t=t, p_vals=p, q_vals=q, dp_vals=dp, dq_vals=dq)
