"""Carleman weight functions and the noise-driven choice of ``lambda``."""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .grid import Grid

__all__ = [
    "FAMILIES",
    "CwfDomainError",
    "CwfSpec",
    "cwf_psi",
    "cwf_log",
    "cwf_value",
    "cwf_weight_grid",
    "lambda_for_noise",
    "convergence_exponent",
]

FAMILIES = (
    "GenericExp",
    "EllipticInvPower",
    "ParabolicInvPower",
    "ParabolicQuadratic",
    "HyperbolicQuadratic",
)
_INV_POWER = ("EllipticInvPower", "ParabolicInvPower")
DEFAULT_NU = 2.0


class CwfDomainError(ValueError):
    """Raised when an inverse-power weight is evaluated where ``psi <= 0``."""


@dataclass(frozen=True)
class CwfSpec:
    """Weight family and its parameters.

    ``psi`` is only used by ``GenericExp``; ``nu``, ``rho``, ``X`` and ``T`` by
    the inverse-power families; ``x0`` and ``eta`` by ``HyperbolicQuadratic``.
    """

    family: str = "ParabolicQuadratic"
    lam: float = 0.0
    nu: Optional[float] = None
    rho: float = 0.25
    X: float = 1.0
    T: float = 0.5
    x0: Optional[tuple] = None
    eta: float = 0.5
    psi: Optional[Callable] = None

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValueError(f"unknown CWF family {self.family!r}; choose from {FAMILIES}")
        if not self.lam >= 0:
            raise ValueError(f"lambda must be nonnegative, got {self.lam}")
        if self.family in _INV_POWER:
            if self.nu is None:
                warnings.warn(
                    f"{self.family}: nu not given, using nu={DEFAULT_NU}; the admissible "
                    "threshold nu_0 is only known to exist, not its value",
                    stacklevel=3,
                )
                object.__setattr__(self, "nu", DEFAULT_NU)
            if self.nu <= 1:
                raise ValueError(f"nu must exceed 1, got {self.nu}")
            if not 0 < self.rho < 0.5:
                raise ValueError(f"rho must lie in (0, 1/2), got {self.rho}")
            if self.X <= 0 or self.T <= 0:
                raise ValueError("X and T must be positive")
        if self.family == "HyperbolicQuadratic" and not 0 < self.eta < 1:
            raise ValueError(f"eta must lie in (0, 1), got {self.eta}")
        if self.family == "GenericExp" and self.psi is None:
            raise ValueError("GenericExp needs a psi(x, t) callable")


def _split(x):
    """Return ``(x1, |xbar|^2, |x|^2)`` for a scalar or a point array ``(..., n)``.

    A non-scalar ``x`` always carries the space dimension on its last axis.
    """
    x = np.asarray(x, dtype=float)
    if x.ndim == 0:
        return x, np.zeros_like(x), x * x
    x1 = x[..., 0]
    rest = np.sum(x[..., 1:] ** 2, axis=-1)
    return x1, rest, x1 * x1 + rest


def cwf_psi(spec: CwfSpec, x, t=0.0):
    """The exponent profile ``psi`` (before the power ``-nu`` for inverse-power families)."""
    t = np.asarray(t, dtype=float)
    fam = spec.family
    if fam == "GenericExp":
        return np.asarray(spec.psi(x, t), dtype=float)
    x1, rest, full = _split(x)
    if fam == "EllipticInvPower":
        return x1 + rest / spec.X**2 + spec.rho
    if fam == "ParabolicInvPower":
        return x1 + rest / spec.X**2 + t**2 / spec.T**2 + spec.rho
    if fam == "ParabolicQuadratic":
        return full - t**2
    # HyperbolicQuadratic
    xa = np.asarray(x, dtype=float)
    x0 = np.zeros(xa.shape[-1] if xa.ndim else ()) if spec.x0 is None else np.asarray(spec.x0, dtype=float)
    d = xa - x0
    dist2 = d * d if xa.ndim == 0 else np.sum(d * d, axis=-1)
    return dist2 - spec.eta * t**2


def cwf_log(spec: CwfSpec, x, t=0.0):
    """``log phi_lambda``; raises :class:`CwfDomainError` where an inverse power is undefined."""
    psi = cwf_psi(spec, x, t)
    if spec.family in _INV_POWER:
        if np.any(psi <= 0):
            raise CwfDomainError(f"{spec.family}: psi must be positive, min psi = {np.min(psi)}")
        return spec.lam * psi ** (-spec.nu)
    return spec.lam * psi


def cwf_value(spec: CwfSpec, x, t=0.0):
    out = np.exp(cwf_log(spec, x, t))
    return float(out) if np.ndim(out) == 0 else out


def cwf_weight_grid(spec: CwfSpec, grid: Grid) -> np.ndarray:
    """``phi_lambda**2`` at every node of a 1-D space-time grid."""
    X, T = grid.mesh()
    return np.exp(2.0 * cwf_log(spec, X[..., None], T))


def lambda_for_noise(delta: float, m: float) -> float:
    """``lambda(delta) = ln(delta**(-1/(2m)))`` for a noise level ``delta`` in (0, 1)."""
    if not 0 < delta < 1:
        raise ValueError(f"delta must lie in (0, 1), got {delta}")
    if m <= 0:
        raise ValueError(f"m must be positive, got {m}")
    return -math.log(delta) / (2.0 * m)


def convergence_exponent(eps: float, m: float) -> float:
    """Hoelder exponent ``theta = min(eps / (4 m), 1/2)`` of the noise-to-error estimate."""
    if m <= 0:
        raise ValueError(f"m must be positive, got {m}")
    return min(eps / (4.0 * m), 0.5)
