"""Uniform space-time meshes, difference stencils and the discrete H^2 norm.

Fields are plain ``numpy`` arrays of shape ``(N + 1, M + 1)`` indexed
``[i, j]`` with ``x_i = i h`` and ``t_j = -1/2 + j tau``.  Flattening is
row-major, so node ``(i, j)`` sits at ``i * (M + 1) + j``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
import scipy.sparse as sp

__all__ = [
    "DegenerateMeshError",
    "Grid",
    "DerivativeBundle",
    "build_grid",
    "derivative_bundle",
    "h2_norm_sq",
    "h2_inner",
]

DERIVATIVE_NAMES = ("d_x", "d_t", "d_xx", "d_tt", "d_xt")


class DegenerateMeshError(ValueError):
    """Raised when a mesh has too few intervals for the stencils."""


@dataclass(frozen=True)
class Grid:
    N: int
    M: int

    def __post_init__(self):
        if int(self.N) != self.N or int(self.M) != self.M:
            raise DegenerateMeshError(f"N and M must be integers, got N={self.N}, M={self.M}")
        if self.N < 4 or self.M < 4:
            raise DegenerateMeshError(
                f"degenerate mesh N={self.N}, M={self.M}: need N >= 4 and M >= 4 "
                "so that every stencil has interior nodes"
            )

    @property
    def h(self) -> float:
        return 1.0 / self.N

    @property
    def tau(self) -> float:
        return 1.0 / self.M

    @property
    def shape(self) -> tuple[int, int]:
        return (self.N + 1, self.M + 1)

    @property
    def size(self) -> int:
        return (self.N + 1) * (self.M + 1)

    @property
    def cell(self) -> float:
        """Quadrature weight ``h * tau`` attached to every node."""
        return self.h * self.tau

    @cached_property
    def x_nodes(self) -> np.ndarray:
        x = np.arange(self.N + 1) / self.N
        x.flags.writeable = False
        return x

    @cached_property
    def t_nodes(self) -> np.ndarray:
        t = -0.5 + np.arange(self.M + 1) / self.M
        t.flags.writeable = False
        return t

    def mesh(self) -> tuple[np.ndarray, np.ndarray]:
        """Return ``(X, T)`` node coordinate arrays of shape ``self.shape``."""
        return np.meshgrid(self.x_nodes, self.t_nodes, indexing="ij")

    def sample(self, fn) -> np.ndarray:
        """Evaluate ``fn(x, t)`` on every node."""
        X, T = self.mesh()
        return np.broadcast_to(np.asarray(fn(X, T), dtype=float), self.shape).copy()

    def check_field(self, f, name: str = "field") -> np.ndarray:
        f = np.asarray(f, dtype=float)
        if f.shape != self.shape:
            raise ValueError(f"{name} has shape {f.shape}, grid expects {self.shape}")
        if not np.all(np.isfinite(f)):
            raise FloatingPointError(f"{name} contains non-finite values")
        return f

    def nearest_x_index(self, x: float) -> int:
        return int(np.argmin(np.abs(self.x_nodes - x)))

    # -- sparse difference operators on flattened fields ----------------------

    @cached_property
    def operators(self) -> dict[str, sp.csr_matrix]:
        """Difference operators acting on ``f.ravel()``.

        Rows outside an operator's valid region are empty, so each operator
        returns a zero-filled field outside its stencil's domain.
        """
        Dx, Dxx = _first_diff(self.N, self.h), _second_diff(self.N, self.h)
        Dt, Dtt = _first_diff(self.M, self.tau), _second_diff(self.M, self.tau)
        Dx_c = _central_only(self.N, self.h)
        Dt_c = _central_only(self.M, self.tau)
        Ix, It = sp.identity(self.N + 1), sp.identity(self.M + 1)
        return {
            "d_x": sp.kron(Dx, It, format="csr"),
            "d_t": sp.kron(Ix, Dt, format="csr"),
            "d_xx": sp.kron(Dxx, It, format="csr"),
            "d_tt": sp.kron(Ix, Dtt, format="csr"),
            "d_xt": sp.kron(Dx_c, Dt_c, format="csr"),
        }

    @cached_property
    def valid_region(self) -> dict[str, tuple[slice, slice]]:
        full = slice(0, None)
        ix, it = slice(1, self.N), slice(1, self.M)
        return {
            "d_x": (full, full),
            "d_t": (full, full),
            "d_xx": (ix, full),
            "d_tt": (full, it),
            "d_xt": (ix, it),
        }

    @cached_property
    def h2_gram(self) -> sp.csr_matrix:
        """Gram matrix ``K`` with ``h2_inner(f, g) = f.ravel() @ K @ g.ravel()``."""
        K = sp.identity(self.size, format="csr")
        for D in self.operators.values():
            K = K + D.T @ D
        return (self.cell * K).tocsr()


def _first_diff(n: int, step: float) -> sp.csr_matrix:
    """Central differences inside, first-order one-sided at both ends."""
    D = sp.lil_matrix((n + 1, n + 1))
    D[0, 0], D[0, 1] = -1.0, 1.0
    D[n, n - 1], D[n, n] = -1.0, 1.0
    for k in range(1, n):
        D[k, k - 1], D[k, k + 1] = -0.5, 0.5
    return (D / step).tocsr()


def _central_only(n: int, step: float) -> sp.csr_matrix:
    D = sp.lil_matrix((n + 1, n + 1))
    for k in range(1, n):
        D[k, k - 1], D[k, k + 1] = -0.5, 0.5
    return (D / step).tocsr()


def _second_diff(n: int, step: float) -> sp.csr_matrix:
    D = sp.lil_matrix((n + 1, n + 1))
    for k in range(1, n):
        D[k, k - 1], D[k, k], D[k, k + 1] = 1.0, -2.0, 1.0
    return (D / step**2).tocsr()


def build_grid(N: int, M: int) -> Grid:
    """Uniform mesh on ``(0, 1) x (-1/2, 1/2)`` with ``N`` space and ``M`` time intervals."""
    return Grid(N, M)


@dataclass(frozen=True)
class DerivativeBundle:
    d_x: np.ndarray
    d_t: np.ndarray
    d_xx: np.ndarray
    d_tt: np.ndarray
    d_xt: np.ndarray
    valid_region: dict = field(repr=False)

    def items(self):
        for name in DERIVATIVE_NAMES:
            yield name, getattr(self, name)


def derivative_bundle(f: np.ndarray, grid: Grid) -> DerivativeBundle:
    f = grid.check_field(f)
    flat = f.ravel()
    fields = {name: (D @ flat).reshape(grid.shape) for name, D in grid.operators.items()}
    return DerivativeBundle(valid_region=dict(grid.valid_region), **fields)


def h2_norm_sq(f: np.ndarray, grid: Grid) -> float:
    """Squared discrete H^2 norm: ``h tau`` times the node sum of f and its
    first and second differences, each over its own valid region."""
    bundle = derivative_bundle(f, grid)
    total = np.sum(np.asarray(f, dtype=float) ** 2)
    for name, d in bundle.items():
        total += np.sum(d[bundle.valid_region[name]] ** 2)
    return float(grid.cell * total)


def h2_inner(f: np.ndarray, g: np.ndarray, grid: Grid) -> float:
    return float(np.asarray(f, dtype=float).ravel() @ (grid.h2_gram @ np.asarray(g, dtype=float).ravel()))
