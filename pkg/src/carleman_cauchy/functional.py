"""Carleman-weighted Tikhonov functional for the lateral Cauchy problem.

With ``F = p(t) + (x - 1) q(t)`` and ``u = v + F`` the unknown ``v`` has zero
Dirichlet and Neumann traces at ``x = 1``.  The discrete residual on the
interior box ``i = 1..N-1``, ``j = 0..M-1`` is

    r_ij = (v_{i,j+1} - v_ij)/tau - (v_{i-1,j} - 2 v_ij + v_{i+1,j})/h^2
           - S(v_ij + F_ij) - G_ij + dp_j + (x_i - 1) dq_j

and the functional is

    J(v) = c * h * tau * sum r_ij^2 phi_ij^2 + beta * |v|^2_{H^2}

where ``phi`` is the Carleman weight and ``c`` the optional balancing factor
``exp(-2 lambda (alpha + eps))``.  The columns ``i = N-1, N`` of ``v`` are
pinned to zero.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, replace
from functools import cached_property
from typing import Optional

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import splu

from .carleman import CwfSpec, cwf_weight_grid
from .forward import CauchyTrace, ProblemSpec
from .grid import Grid, h2_norm_sq

__all__ = [
    "MissingDerivativesError",
    "FunctionalConfig",
    "TikhonovFunctional",
    "build_extension",
    "residual",
    "evaluate",
    "gradient",
]


class MissingDerivativesError(ValueError):
    """The trace has no time derivatives; call ``differentiate_trace`` first."""


@dataclass(frozen=True)
class FunctionalConfig:
    lam: float = 3.0
    beta: float = 0.00063
    cwf: Optional[CwfSpec] = None
    balance_exponent: Optional[tuple] = None
    constrained_columns: int = 2

    def __post_init__(self):
        if not 0 < self.beta < 1:
            raise ValueError(f"beta must lie in (0, 1), got {self.beta}")
        if not self.lam >= 0:
            raise ValueError(f"lambda must be nonnegative, got {self.lam}")
        if self.constrained_columns < 0:
            raise ValueError("constrained_columns must be nonnegative")

    @property
    def weight_spec(self) -> CwfSpec:
        return replace(self.cwf or CwfSpec("ParabolicQuadratic"), lam=self.lam)

    @property
    def prefactor(self) -> float:
        if self.balance_exponent is None:
            return 1.0
        alpha, eps = self.balance_exponent
        return math.exp(-2.0 * self.lam * (alpha + eps))


def build_extension(trace: CauchyTrace, grid: Grid) -> np.ndarray:
    """``F_ij = p_j + (x_i - 1) q_j``."""
    p = np.asarray(trace.p_vals, dtype=float)
    q = np.asarray(trace.q_vals, dtype=float)
    return p[None, :] + (grid.x_nodes[:, None] - 1.0) * q[None, :]


class TikhonovFunctional:
    """Value, exact gradient and (linear case) Hessian of the discrete functional.

    All heavy pieces are assembled once as sparse operators so the functional
    can be evaluated thousands of times inside an optimizer loop.
    """

    def __init__(self, cfg: FunctionalConfig, F: np.ndarray, spec: ProblemSpec,
                 trace: CauchyTrace, grid: Grid):
        if not trace.has_derivatives:
            raise MissingDerivativesError("trace lacks dp/dq; run differentiate_trace first")
        self.cfg, self.spec, self.trace, self.grid = cfg, spec, trace, grid
        self.F = grid.check_field(F, "F")
        N, M = grid.N, grid.M
        X, T = grid.mesh()
        box = (slice(1, N), slice(0, M))
        self.box = box
        self._xc, self._tc = X[box], T[box]
        self._Fc = self.F[box]
        dp = np.asarray(trace.dp_vals, dtype=float)[:M]
        dq = np.asarray(trace.dq_vals, dtype=float)[:M]
        G = grid.sample(spec.G)[box]
        self._const = -G + dp[None, :] + (self._xc - 1.0) * dq[None, :]
        self._weight = cfg.prefactor * grid.cell * cwf_weight_grid(cfg.weight_spec, grid)[box]

        free = np.ones(grid.shape, dtype=bool)
        if cfg.constrained_columns:
            free[N + 1 - cfg.constrained_columns:, :] = False
        self.free = free
        self._free_idx = np.flatnonzero(free.ravel())

    # -- sparse pieces ----------------------------------------------------------

    @cached_property
    def stencil(self) -> sp.csr_matrix:
        """Linear part of the residual: flattened ``v`` -> flattened interior box."""
        g = self.grid
        N, M, h, tau = g.N, g.M, g.h, g.tau
        ncol = M + 1
        rows, cols, vals = [], [], []
        k = 0
        for i in range(1, N):
            for j in range(M):
                c = i * ncol + j
                rows += [k] * 5
                cols += [c + 1, c, c - ncol, c + ncol, c]
                vals += [1 / tau, -1 / tau, -1 / h**2, -1 / h**2, 2 / h**2]
                k += 1
        return sp.csr_matrix((vals, (rows, cols)), shape=(k, g.size))

    @cached_property
    def center(self) -> sp.csr_matrix:
        """Selection of the stencil center node for every residual row."""
        g = self.grid
        idx = (np.arange(1, g.N)[:, None] * (g.M + 1) + np.arange(g.M)[None, :]).ravel()
        return sp.csr_matrix((np.ones(idx.size), (np.arange(idx.size), idx)), shape=(idx.size, g.size))

    # -- evaluation ---------------------------------------------------------------

    def _check(self, v) -> np.ndarray:
        return self.grid.check_field(v, "v")

    def residual(self, v) -> np.ndarray:
        v = self._check(v)
        lin = (self.stencil @ v.ravel()).reshape(self._xc.shape)
        u_c = v[self.box] + self._Fc
        return lin - self.spec.S(u_c, self._xc, self._tc) + self._const

    def __call__(self, v) -> float:
        return self.value(v)

    def value(self, v) -> float:
        r = self.residual(v)
        fit = np.sum(self._weight * r * r)
        return float(fit + self.cfg.beta * h2_norm_sq(v, self.grid))

    def gradient(self, v) -> np.ndarray:
        """Exact partial derivatives ``dJ/dv_ij``; zero on the pinned columns."""
        v = self._check(v)
        wr = 2.0 * self._weight * self.residual(v)
        u_c = v[self.box] + self._Fc
        chain = wr * self.spec.dS(u_c, self._xc, self._tc)
        g = self.stencil.T @ wr.ravel() - self.center.T @ chain.ravel()
        g += 2.0 * self.cfg.beta * (self.grid.h2_gram @ v.ravel())
        g = g.reshape(self.grid.shape)
        g[~self.free] = 0.0
        return g

    def hessian(self) -> sp.csr_matrix:
        """Hessian w.r.t. all nodal values; only defined for ``S = 0``."""
        if self.spec.nonlinearity.name != "Zero":
            raise ValueError("a constant Hessian exists only for the linear (Zero) case")
        W = sp.diags(2.0 * self._weight.ravel())
        return (self.stencil.T @ W @ self.stencil + 2.0 * self.cfg.beta * self.grid.h2_gram).tocsr()

    def free_hessian(self) -> sp.csr_matrix:
        H = self.hessian()
        return H[self._free_idx][:, self._free_idx].tocsr()

    def linear_minimizer(self) -> np.ndarray:
        """Unconstrained minimizer over the free subspace by a sparse direct solve (``S = 0``)."""
        H = self.free_hessian()
        g0 = self.gradient(np.zeros(self.grid.shape)).ravel()[self._free_idx]
        sol = splu(H.tocsc()).solve(-g0)
        out = np.zeros(self.grid.size)
        out[self._free_idx] = sol
        return out.reshape(self.grid.shape)

    def pin(self, v) -> np.ndarray:
        """Copy of ``v`` with the constrained columns zeroed."""
        out = np.array(v, dtype=float)
        out[~self.free] = 0.0
        return out


def residual(v, F, spec, trace, grid, cfg: Optional[FunctionalConfig] = None) -> np.ndarray:
    return TikhonovFunctional(cfg or FunctionalConfig(), F, spec, trace, grid).residual(v)


def evaluate(v, cfg, F, spec, trace, grid) -> float:
    return TikhonovFunctional(cfg, F, spec, trace, grid).value(v)


def gradient(v, cfg, F, spec, trace, grid) -> np.ndarray:
    return TikhonovFunctional(cfg, F, spec, trace, grid).gradient(v)
