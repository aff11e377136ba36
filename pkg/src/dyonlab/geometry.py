"""Rotationally invariant conformally flat metrics ``ds^2 = G(r) dr.dr``.

Three curvature classes are supported: flat space (``G = 1``), the
three-sphere and the two-sheet hyperboloid in stereographic coordinates,

    G(r) = 4 r0^2 / (1 + eps r^2)^2,    eps = +1 (sphere), -1 (hyperboloid).

In the curved cases the radial coordinate is dimensionless; the radius
``r0`` carries the length scale. The Coulomb potential of each space is the
rotationally invariant Green function of its Laplacian, characterised by
``dphi/dr = -1 / (r^2 sqrt(G))``.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass

from scipy import integrate

from .errors import ConvergenceError, DomainError, SingularityError

__all__ = [
    "Curvature",
    "MetricSpec",
    "FLAT",
    "conformal_factor",
    "conformal_factor_derivative",
    "coulomb_green_closed",
    "coulomb_green_derivative",
    "coulomb_green_quadrature",
]

#: Hyperboloid coordinates must stay below ``1 - HYPERBOLOID_GUARD``.
HYPERBOLOID_GUARD = 1e-12

#: Anchor point of the quadrature antiderivative for curved metrics.
QUADRATURE_REF = 0.5


class Curvature(str, enum.Enum):
    FLAT = "flat"
    SPHERE = "sphere"
    HYPERBOLOID = "hyperboloid"

    @property
    def epsilon(self) -> int:
        return {"flat": 0, "sphere": 1, "hyperboloid": -1}[self.value]


@dataclass(frozen=True)
class MetricSpec:
    """Curvature class plus curvature radius ``r0`` (ignored for flat space)."""

    curvature: Curvature = Curvature.FLAT
    r0: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "curvature", Curvature(self.curvature))
        r0 = float(self.r0)
        if self.curvature is not Curvature.FLAT and not (r0 > 0 and math.isfinite(r0)):
            raise DomainError(f"curvature radius r0 must be positive and finite, got {self.r0!r}")
        object.__setattr__(self, "r0", r0)

    @property
    def epsilon(self) -> int:
        return self.curvature.epsilon

    @property
    def is_flat(self) -> bool:
        return self.curvature is Curvature.FLAT

    @classmethod
    def sphere(cls, r0: float = 1.0) -> "MetricSpec":
        return cls(Curvature.SPHERE, r0)

    @classmethod
    def hyperboloid(cls, r0: float = 1.0) -> "MetricSpec":
        return cls(Curvature.HYPERBOLOID, r0)

    @property
    def r_max(self) -> float:
        """Supremum of the valid radial domain."""
        if self.curvature is Curvature.HYPERBOLOID:
            return 1.0 - HYPERBOLOID_GUARD
        return math.inf

    def check_radius(self, r: float) -> float:
        r = float(r)
        if not r >= 0 or math.isnan(r):
            raise DomainError(f"radius must be non-negative, got {r!r}")
        if self.curvature is Curvature.HYPERBOLOID and r >= 1.0 - HYPERBOLOID_GUARD:
            raise DomainError(
                f"r = {r!r} is outside the hyperboloid chart (requires r < 1 - {HYPERBOLOID_GUARD:g})"
            )
        if math.isinf(r):
            raise DomainError("radius must be finite")
        return r


FLAT = MetricSpec()


def conformal_factor(metric: MetricSpec, r: float) -> float:
    """Return ``G(r)``; exactly 1.0 for flat space."""
    r = metric.check_radius(r)
    if metric.is_flat:
        return 1.0
    return 4.0 * metric.r0**2 / (1.0 + metric.epsilon * r * r) ** 2


def conformal_factor_derivative(metric: MetricSpec, r: float) -> float:
    """Return ``dG/dr = -16 r0^2 eps r / (1 + eps r^2)^3``."""
    r = metric.check_radius(r)
    if metric.is_flat:
        return 0.0
    eps = metric.epsilon
    return -16.0 * metric.r0**2 * eps * r / (1.0 + eps * r * r) ** 3


def coulomb_green_closed(metric: MetricSpec, r: float) -> float:
    """Closed-form Coulomb potential ``(1/(2 r0)) (1 - eps r^2) / r`` (``1/r`` if flat)."""
    r = metric.check_radius(r)
    if r == 0.0:
        raise SingularityError("Coulomb Green function is singular at r = 0")
    if metric.is_flat:
        return 1.0 / r
    return (1.0 - metric.epsilon * r * r) / (2.0 * metric.r0 * r)


def coulomb_green_derivative(metric: MetricSpec, r: float) -> float:
    """``dphi/dr = -1 / (r^2 sqrt(G(r)))``."""
    g = conformal_factor(metric, r)
    if r == 0.0:
        raise SingularityError("Coulomb Green function is singular at r = 0")
    return -1.0 / (r * r * math.sqrt(g))


def _integrand(metric: MetricSpec):
    if metric.is_flat:
        return lambda t: 1.0 / (t * t)
    two_r0 = 2.0 * metric.r0
    eps = metric.epsilon
    # 1/(t^2 sqrt(G)) written out to avoid the domain check inside quad.
    return lambda t: (1.0 + eps * t * t) / (two_r0 * t * t)


def coulomb_green_quadrature(metric: MetricSpec, r: float, tol: float = 1e-12) -> float:
    """Coulomb potential from numerical integration of ``-1/(r^2 sqrt(G))``.

    The integration constant is fixed by ``phi -> 0`` at infinity for flat
    space and by matching the closed form at ``r = 1/2`` for curved metrics.
    """
    r = metric.check_radius(r)
    if r == 0.0:
        raise SingularityError("Coulomb Green function is singular at r = 0")
    f = _integrand(metric)
    if metric.is_flat:
        value, err = integrate.quad(f, r, math.inf, epsabs=tol, epsrel=tol, limit=200)
        anchor = 0.0
    else:
        # phi(r) = phi(r_ref) + int_r^{r_ref} dt / (t^2 sqrt G)
        value, err = integrate.quad(f, r, QUADRATURE_REF, epsabs=tol, epsrel=tol, limit=200)
        anchor = coulomb_green_closed(metric, QUADRATURE_REF)
    if not err <= max(1e-9, 100 * tol * max(1.0, abs(value))):
        raise ConvergenceError(
            f"Green-function quadrature did not converge at r={r} (estimated error {err:.3e})",
            achieved=err,
        )
    return anchor + value
