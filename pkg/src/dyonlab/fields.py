"""Dirac dyon fields: vector potentials, superposed magnetic fields and
Coulomb-type scalar potentials, with numerical checks of the duality
``-grad phi = curl A`` and of Gauss' law for the monopole flux.

Units: particle charge e = 1, so magnetic charges g_i are directly the
monopole numbers s_i. Flux is normalised as ``oint B.dS = 4 pi g``.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from . import geometry
from .errors import DomainError, ProximityError, StringProximityError
from .geometry import FLAT, MetricSpec

__all__ = [
    "DyonCenter",
    "FieldSample",
    "Weight",
    "DELTA_MIN",
    "dirac_vector_potential",
    "vector_potential_multi",
    "magnetic_field_multi",
    "scalar_potential_multi",
    "scalar_potential_gradient",
    "sample_fields",
    "fd_curl",
    "fd_gradient",
    "fd_divergence",
    "duality_residual",
    "monopole_flux",
    "flux_through_sphere",
]

DELTA_MIN = 1e-6
STRING_ANGLE_TOL = 1e-9
FD_STEP = 1e-4
_SOUTH = (0.0, 0.0, -1.0)


@dataclass(frozen=True)
class DyonCenter:
    """A fixed background dyon: position, magnetic charge ``g`` and electric charge ``q``."""

    position: tuple = (0.0, 0.0, 0.0)
    g: float = 0.0
    q: float = 0.0

    def __post_init__(self):
        pos = tuple(float(c) for c in self.position)
        if len(pos) != 3 or not all(math.isfinite(c) for c in pos):
            raise DomainError(f"dyon position must be a finite 3-vector, got {self.position!r}")
        object.__setattr__(self, "position", pos)
        for name in ("g", "q"):
            v = float(getattr(self, name))
            if not math.isfinite(v):
                raise DomainError(f"dyon charge {name} must be finite")
            object.__setattr__(self, name, v)

    @property
    def a(self) -> np.ndarray:
        return np.array(self.position)


class Weight(str, enum.Enum):
    MAGNETIC = "magnetic"
    ELECTRIC = "electric"


@dataclass
class FieldSample:
    point: np.ndarray
    A: np.ndarray
    B: np.ndarray
    phi_g: float
    phi_q: float


def _offsets(point, centers: Sequence[DyonCenter], delta_min: float):
    x = np.asarray(point, dtype=float)
    for c in centers:
        d = x - c.a
        r = math.sqrt(d @ d)
        if r < delta_min:
            raise ProximityError(f"point {x.tolist()} is within {delta_min:g} of center {c.position}")
        yield c, d, r


def dirac_vector_potential(point, center: DyonCenter, string_axis=_SOUTH) -> np.ndarray:
    """Dirac potential of ``center`` with its string along the ray ``a + t*string_axis``.

    With ``n = -string_axis`` and ``d = point - a``,

        A = g (n x d) / (|d| (|d| + n.d)),

    which is regular on the ray opposite to the string and has
    ``curl A = g d / |d|^3`` everywhere off the string.
    """
    axis = np.asarray(string_axis, dtype=float)
    axis = axis / np.linalg.norm(axis)
    n = -axis
    d = np.asarray(point, dtype=float) - center.a
    r = math.sqrt(d @ d)
    if r == 0.0:
        raise ProximityError("vector potential evaluated at the monopole position")
    nd = n @ d
    cross = np.cross(n, d)
    rho = math.sqrt(cross @ cross)
    if nd < 0 and math.atan2(rho, -nd) < STRING_ANGLE_TOL:
        raise StringProximityError(
            f"point {np.asarray(point).tolist()} lies on the Dirac string of the center at {center.position}"
        )
    if center.g == 0.0:
        return np.zeros(3)
    return center.g * cross / (r * (r + nd))


def vector_potential_multi(point, centers: Sequence[DyonCenter], string_axis=_SOUTH,
                           delta_min: float = DELTA_MIN) -> np.ndarray:
    A = np.zeros(3)
    for c, _, _ in _offsets(point, centers, delta_min):
        A += dirac_vector_potential(point, c, string_axis)
    return A


def magnetic_field_multi(point, centers: Sequence[DyonCenter], delta_min: float = DELTA_MIN) -> np.ndarray:
    """``B = sum_i g_i (x - a_i) / |x - a_i|^3``."""
    B = np.zeros(3)
    for c, d, r in _offsets(point, centers, delta_min):
        B += c.g * d / r**3
    return B


def _weights(centers, weight):
    weight = Weight(weight)
    return [c.g if weight is Weight.MAGNETIC else c.q for c in centers]


def scalar_potential_multi(point, centers: Sequence[DyonCenter], metric: MetricSpec = FLAT,
                           weight: Weight = Weight.MAGNETIC, delta_min: float = DELTA_MIN) -> float:
    """``sum_i c_i phi_C(|x - a_i|)`` with ``c_i = g_i`` or ``q_i``."""
    coeffs = _weights(centers, weight)
    total = 0.0
    for coeff, (_, _, r) in zip(coeffs, _offsets(point, centers, delta_min)):
        if coeff:
            total += coeff * geometry.coulomb_green_closed(metric, r)
    return total


def scalar_potential_gradient(point, centers: Sequence[DyonCenter], metric: MetricSpec = FLAT,
                              weight: Weight = Weight.MAGNETIC, delta_min: float = DELTA_MIN) -> np.ndarray:
    """Analytic gradient of :func:`scalar_potential_multi`."""
    coeffs = _weights(centers, weight)
    grad = np.zeros(3)
    for coeff, (_, d, r) in zip(coeffs, _offsets(point, centers, delta_min)):
        if coeff:
            grad += coeff * geometry.coulomb_green_derivative(metric, r) * d / r
    return grad


def sample_fields(point, centers: Sequence[DyonCenter], metric: MetricSpec = FLAT,
                  string_axis=_SOUTH, delta_min: float = DELTA_MIN) -> FieldSample:
    x = np.asarray(point, dtype=float)
    return FieldSample(
        point=x,
        A=vector_potential_multi(x, centers, string_axis, delta_min),
        B=magnetic_field_multi(x, centers, delta_min),
        phi_g=scalar_potential_multi(x, centers, metric, Weight.MAGNETIC, delta_min),
        phi_q=scalar_potential_multi(x, centers, metric, Weight.ELECTRIC, delta_min),
    )


# -- finite-difference operators -------------------------------------------

def fd_gradient(f, point, h: float = FD_STEP) -> np.ndarray:
    x = np.asarray(point, dtype=float)
    out = np.empty(3)
    for k in range(3):
        e = np.zeros(3)
        e[k] = h
        out[k] = (f(x + e) - f(x - e)) / (2 * h)
    return out


def _fd_jacobian(F, point, h):
    x = np.asarray(point, dtype=float)
    jac = np.empty((3, 3))  # jac[i, k] = dF_i / dx_k
    for k in range(3):
        e = np.zeros(3)
        e[k] = h
        jac[:, k] = (np.asarray(F(x + e)) - np.asarray(F(x - e))) / (2 * h)
    return jac


def fd_curl(F, point, h: float = FD_STEP) -> np.ndarray:
    j = _fd_jacobian(F, point, h)
    return np.array([j[2, 1] - j[1, 2], j[0, 2] - j[2, 0], j[1, 0] - j[0, 1]])


def fd_divergence(F, point, h: float = FD_STEP) -> float:
    return float(np.trace(_fd_jacobian(F, point, h)))


def duality_residual(point, centers: Sequence[DyonCenter], metric: MetricSpec = FLAT,
                     h: float = FD_STEP, string_axis=_SOUTH) -> float:
    """Max-norm of ``grad phi_g + curl A_g`` by central differences.

    The field strength two-form is metric independent, so ``curl A`` is the
    flat expression. The metric enters through the Hodge star on the
    gradient side: each center's potential gradient is weighted by
    ``sqrt(G)`` evaluated at that center's conformal distance. In flat space
    this reduces to the plain ``grad phi_g + curl A_g``.
    """
    x = np.asarray(point, dtype=float)
    if all(c.g == 0.0 for c in centers):
        return 0.0
    list(_offsets(x, centers, DELTA_MIN))  # proximity guard
    curl = fd_curl(lambda y: vector_potential_multi(y, centers, string_axis), x, h)
    grad = np.zeros(3)
    for c in centers:
        if c.g == 0.0:
            continue
        single = [c]
        g_phi = fd_gradient(lambda y: scalar_potential_multi(y, single, metric), x, h)
        r = float(np.linalg.norm(x - c.a))
        grad += math.sqrt(geometry.conformal_factor(metric, r)) * g_phi
    return float(np.max(np.abs(grad + curl)))


# -- flux ------------------------------------------------------------------

def flux_through_sphere(centers: Sequence[DyonCenter], sphere_center, radius: float,
                        quadrature_order: int = 64) -> float:
    """Surface integral of the total ``B`` over a sphere.

    Gauss-Legendre nodes in ``cos(theta)`` times a uniform periodic rule in
    ``phi``; exact for a charge at the sphere center.
    """
    if not radius > 0:
        raise DomainError("sphere radius must be positive")
    c0 = np.asarray(sphere_center, dtype=float)
    for c in centers:
        if abs(np.linalg.norm(c.a - c0) - radius) < 1e-9 * max(1.0, radius):
            raise DomainError(f"center at {c.position} lies on the integration sphere")
    n = int(quadrature_order)
    if n < 2:
        raise DomainError("quadrature_order must be >= 2")
    u, w = np.polynomial.legendre.leggauss(n)
    phi = 2 * np.pi * np.arange(2 * n) / (2 * n)
    sin_t = np.sqrt(1.0 - u * u)
    nx = np.outer(sin_t, np.cos(phi))
    ny = np.outer(sin_t, np.sin(phi))
    nz = np.outer(u, np.ones_like(phi))
    normal = np.stack([nx, ny, nz], axis=-1)
    pts = c0 + radius * normal
    B = np.zeros_like(pts)
    for c in centers:
        d = pts - c.a
        r = np.linalg.norm(d, axis=-1)
        B += c.g * d / r[..., None] ** 3
    integrand = np.sum(B * normal, axis=-1) * radius**2
    return float(np.sum(w[:, None] * integrand) * (2 * np.pi / (2 * n)))


def monopole_flux(center: DyonCenter, radius: float, quadrature_order: int = 64,
                  others: Iterable[DyonCenter] = ()) -> float:
    """Flux of ``B`` through a sphere of ``radius`` around ``center``.

    ``others`` are additional centers whose field is superposed; they must
    lie outside the sphere.
    """
    others = list(others)
    for c in others:
        if np.linalg.norm(c.a - center.a) <= radius:
            raise DomainError(
                f"center at {c.position} lies inside the flux sphere of radius {radius} around {center.position}"
            )
    return flux_through_sphere([center, *others], center.a, radius, quadrature_order)
