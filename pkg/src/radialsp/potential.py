"""External potential family and the analytic hydrogen reference.

The working potential is the smooth radial solution of Delta V = (Z/2) e^{-r},

    V(r) = Z * [ (1/2) e^{-r} - (1/r)(1 - e^{-r}) ],

which is bounded, everywhere negative, and has the Coulomb tail
r*V(r) -> -Z.  A "tabulated" kind wraps an arbitrary radial callable and is
used for the point-Coulomb validation oracle and for zero-potential tests.

Radial integrals throughout the package use the measure r^2 dr without a 4*pi
factor; charges and masses quoted here follow that convention.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy.special import eval_genlaguerre

from .errors import ConfigurationError, EvaluationError

KIND_SMOOTHED = "smoothed-exponential"
KIND_TABULATED = "tabulated"

# V' series at the origin: V'(r) = r/6 - r^2/8 + r^3/20 + O(r^4)
_VPRIME_SERIES_CUT = 1e-3


def smoothed_coulomb_V(r):
    """Smoothed Coulomb potential (1/2)e^{-r} - (1/r)(1 - e^{-r}), unit charge.

    Accepts scalars or arrays, r >= 0.  The origin is a removable
    singularity with V(0) = -1/2; evaluation uses expm1 so no accuracy is
    lost near r = 0.
    """
    r = np.asarray(r, dtype=float)
    if np.any(r < 0):
        raise ConfigurationError("potential evaluated at negative radius")
    out = np.empty_like(r)
    zero = r == 0
    rs = np.where(zero, 1.0, r)
    out = 0.5 * np.exp(-r) + np.expm1(-r) / rs
    if np.any(zero):
        out = np.where(zero, -0.5, out)
    return out if out.ndim else float(out)


def smoothed_coulomb_V_prime(r):
    """Radial derivative of the unit-charge smoothed Coulomb potential."""
    r = np.asarray(r, dtype=float)
    if np.any(r < 0):
        raise ConfigurationError("potential derivative at negative radius")
    small = r < _VPRIME_SERIES_CUT
    rs = np.where(small, 1.0, r)
    exact = -0.5 * np.exp(-r) + (-np.expm1(-r) - r * np.exp(-r)) / rs**2
    series = r / 6.0 - r**2 / 8.0 + r**3 / 20.0
    out = np.where(small, series, exact)
    return out if out.ndim else float(out)


def smoothed_coulomb_rho(r):
    """Source density of the smoothed potential: Delta V = rho = (1/2)e^{-r}."""
    r = np.asarray(r, dtype=float)
    out = 0.5 * np.exp(-r)
    return out if out.ndim else float(out)


@dataclass(frozen=True)
class PotentialSpec:
    """Selectable external potential.

    kind      -- "smoothed-exponential" or "tabulated"
    Z         -- charge (radial L^1 mass of the source density)
    func      -- radial callable for the tabulated kind
    func_deriv-- optional derivative callable for the tabulated kind
    label     -- short name recorded in manifests
    """

    kind: str = KIND_SMOOTHED
    Z: float = 1.0
    func: Optional[Callable] = None
    func_deriv: Optional[Callable] = None
    label: str = field(default="")

    def __post_init__(self):
        if self.kind not in (KIND_SMOOTHED, KIND_TABULATED):
            raise ConfigurationError(f"unknown potential kind {self.kind!r}")
        if self.kind == KIND_TABULATED and self.func is None:
            raise ConfigurationError("tabulated potential needs a callable")
        if not self.label:
            object.__setattr__(self, "label", self.kind)

    def __call__(self, r):
        if self.kind == KIND_SMOOTHED:
            return self.Z * smoothed_coulomb_V(r)
        return self.func(np.asarray(r, dtype=float))

    def derivative(self, r):
        """V'(r); finite differences when no analytic derivative is known."""
        if self.kind == KIND_SMOOTHED:
            return self.Z * smoothed_coulomb_V_prime(r)
        if self.func_deriv is not None:
            return self.func_deriv(np.asarray(r, dtype=float))
        r = np.asarray(r, dtype=float)
        h = 1e-6 * np.maximum(r, 1.0)
        lo = np.maximum(r - h, 0.0)
        return (self.func(r + h) - self.func(lo)) / (r + h - lo)


def smoothed_potential(Z: float = 1.0) -> PotentialSpec:
    return PotentialSpec(kind=KIND_SMOOTHED, Z=Z, label=f"smoothed-exponential(Z={Z:g})")


def zero_potential() -> PotentialSpec:
    return PotentialSpec(
        kind=KIND_TABULATED,
        Z=0.0,
        func=lambda r: np.zeros_like(np.asarray(r, dtype=float)),
        func_deriv=lambda r: np.zeros_like(np.asarray(r, dtype=float)),
        label="zero",
    )


def point_coulomb(Z: float = 1.0, r_floor: float = 1e-6) -> PotentialSpec:
    """Oracle-mode -Z/r, clamped below r_floor (removable for r^2 dr weights)."""
    if Z <= 0:
        raise ConfigurationError("point charge needs Z > 0")
    return PotentialSpec(
        kind=KIND_TABULATED,
        Z=Z,
        func=lambda r: -Z / np.maximum(np.asarray(r, dtype=float), r_floor),
        func_deriv=lambda r: Z / np.maximum(np.asarray(r, dtype=float), r_floor) ** 2,
        label=f"point-coulomb(Z={Z:g})",
    )


def potential_norms(spec: PotentialSpec, r_hi: float = 1e4, n_samples: int = 100_000):
    """Numeric suprema (sup|V|, sup|r V'|) over a log grid plus tail limits.

    The grid spans [1e-6, r_hi] log-spaced, with r = 0 and the analytic tail
    limit |r*V| -> Z appended so slowly-varying tails cannot be missed.
    """
    grid = np.concatenate(([0.0], np.logspace(-6, np.log10(r_hi), n_samples)))
    v = np.asarray(spec(grid), dtype=float)
    if not np.all(np.isfinite(v)):
        raise EvaluationError("potential evaluation produced non-finite values")
    vp = np.asarray(spec.derivative(grid[1:]), dtype=float)
    if not np.all(np.isfinite(vp)):
        raise EvaluationError("potential derivative produced non-finite values")
    sup_v = float(np.max(np.abs(v)))
    sup_rvp = float(np.max(np.abs(grid[1:] * vp)))
    return sup_v, sup_rvp


class HydrogenProfile:
    """Radial eigenfunction e^{-Z r/(2n)} L^{(1)}_{n-1}(Z r/n) with derivatives."""

    def __init__(self, n: int, Z: float):
        self.n = n
        self.Z = Z
        self._a = Z / (2.0 * n)   # exponential rate
        self._b = Z / n           # Laguerre argument scale

    def _lag(self, x, order, k):
        if self.n - 1 - order < 0:
            return np.zeros_like(x)
        sign = (-1.0) ** order
        return sign * eval_genlaguerre(self.n - 1 - order, k + order, x)

    def __call__(self, r):
        r = np.asarray(r, dtype=float)
        x = self._b * r
        return np.exp(-self._a * r) * self._lag(x, 0, 1)

    def deriv(self, r):
        r = np.asarray(r, dtype=float)
        x = self._b * r
        e = np.exp(-self._a * r)
        return e * (-self._a * self._lag(x, 0, 1) + self._b * self._lag(x, 1, 1))

    def deriv2(self, r):
        r = np.asarray(r, dtype=float)
        x = self._b * r
        e = np.exp(-self._a * r)
        return e * (
            self._a**2 * self._lag(x, 0, 1)
            - 2.0 * self._a * self._b * self._lag(x, 1, 1)
            + self._b**2 * self._lag(x, 2, 1)
        )


def hydrogen_reference(n: int, Z: float):
    """Exact n-th radial eigenpair of -Delta - Z/r in this package's convention.

    Returns (E, profile) with eigenvalue -E, E = Z^2 / (4 n^2), and a profile
    carrying n-1 zero crossings.  Substituting e^{-alpha r} into
    -u'' - (2/r)u' - (Z/r)u = -E u forces alpha = Z/2 and E = Z^2/4 at n = 1;
    the convention is fixed by that derivation.
    """
    if n <= 0:
        raise ConfigurationError("hydrogen_reference needs n >= 1")
    if Z <= 0:
        raise ConfigurationError("hydrogen_reference needs Z > 0")
    E = Z * Z / (4.0 * n * n)
    return E, HydrogenProfile(n, Z)
