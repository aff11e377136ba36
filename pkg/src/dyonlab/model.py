"""Hamiltonians of charged particles in dyon backgrounds.

The generic one-particle Hamiltonian is

    H = pi^2 / (2 mu G) + U(x) + sum_i q_i phi_C(r_i) + W(x)

with ``pi`` the gauge-invariant kinetic momentum and ``W`` the monopole
term selected by :class:`Replacement`:

* ``NONE``:        W = 0
* ``ONE_CENTER``:  W = s^2 / (2 mu G r^2)            (single monopole at the origin)
* ``MULTI_CENTER``: W = phi_g^2 / (2 mu),  phi_g = sum_i g_i phi_C(r_i)

In flat space the multi-center term is ``(sum_i g_i / r_i)^2 / 2`` and
coincides with the one-center term when there is one center at the origin.
On curved spaces the two differ by the constant ``eps s^2 / (2 mu r0^2)``.
"""
from __future__ import annotations

import enum
import math
import warnings
from dataclasses import dataclass
from itertools import combinations
from typing import NamedTuple, Sequence

import numpy as np

from . import geometry
from .errors import DomainError, ProximityError, SingularityError
from .fields import DELTA_MIN, DyonCenter, dirac_vector_potential, scalar_potential_multi, Weight
from .geometry import FLAT, MetricSpec

__all__ = [
    "Coulomb",
    "Oscillator",
    "LinearStark",
    "Zero",
    "Sum",
    "Replacement",
    "SystemSpec",
    "NBodySpec",
    "PhaseState",
    "apply_micz_replacement",
    "apply_multicenter_replacement",
    "effective_potential",
    "effective_potential_gradient",
    "evaluate_hamiltonian",
    "susy_potential",
    "dsz_check",
    "IV2Result",
    "iv2_residual",
    "calogero_monopole_energy",
]

DSZ_TOL = 1e-12


# -- external potentials ---------------------------------------------------

@dataclass(frozen=True)
class Coulomb:
    """``alpha * phi_C(|x|)``; ``alpha < 0`` is attractive. Flat: ``alpha / r``."""

    alpha: float

    def value(self, x, metric=FLAT, mu=1.0):
        r = math.sqrt(x @ x)
        return self.alpha * geometry.coulomb_green_closed(metric, r)

    def gradient(self, x, metric=FLAT, mu=1.0):
        r = math.sqrt(x @ x)
        return self.alpha * geometry.coulomb_green_derivative(metric, r) * x / r


@dataclass(frozen=True)
class Oscillator:
    """Isotropic oscillator ``mu omega^2 r^2 / 2``."""

    omega: float

    def __post_init__(self):
        if not self.omega > 0:
            raise DomainError("oscillator frequency must be positive")

    def value(self, x, metric=FLAT, mu=1.0):
        return 0.5 * mu * self.omega**2 * float(x @ x)

    def gradient(self, x, metric=FLAT, mu=1.0):
        return mu * self.omega**2 * np.asarray(x, dtype=float)


@dataclass(frozen=True)
class LinearStark:
    """Uniform electric field: ``E . x`` (unit particle charge)."""

    field: tuple

    def __post_init__(self):
        object.__setattr__(self, "field", tuple(float(c) for c in self.field))

    def value(self, x, metric=FLAT, mu=1.0):
        return float(np.dot(self.field, x))

    def gradient(self, x, metric=FLAT, mu=1.0):
        return np.array(self.field, dtype=float)

    def rotated(self, R):
        return LinearStark(tuple(np.asarray(R) @ np.array(self.field)))


@dataclass(frozen=True)
class Zero:
    def value(self, x, metric=FLAT, mu=1.0):
        return 0.0

    def gradient(self, x, metric=FLAT, mu=1.0):
        return np.zeros(3)


@dataclass(frozen=True)
class Sum:
    terms: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "terms", tuple(self.terms))

    def value(self, x, metric=FLAT, mu=1.0):
        return sum((t.value(x, metric, mu) for t in self.terms), 0.0)

    def gradient(self, x, metric=FLAT, mu=1.0):
        g = np.zeros(3)
        for t in self.terms:
            g = g + t.gradient(x, metric, mu)
        return g

    def rotated(self, R):
        return Sum(tuple(t.rotated(R) if hasattr(t, "rotated") else t for t in self.terms))


def flatten_potential(potential):
    """Collapse a potential tree into ``(alpha, omega^2, field)`` totals."""
    alpha, omega2, E = 0.0, 0.0, np.zeros(3)
    stack = [potential]
    while stack:
        p = stack.pop()
        if isinstance(p, Coulomb):
            alpha += p.alpha
        elif isinstance(p, Oscillator):
            omega2 += p.omega**2
        elif isinstance(p, LinearStark):
            E = E + np.array(p.field)
        elif isinstance(p, Sum):
            stack.extend(p.terms)
        elif isinstance(p, Zero):
            pass
        else:
            raise TypeError(f"unsupported potential {p!r}")
    return alpha, omega2, E


def is_central(potential) -> bool:
    _, _, E = flatten_potential(potential)
    return not np.any(E)


# -- systems ---------------------------------------------------------------

class Replacement(str, enum.Enum):
    NONE = "none"
    ONE_CENTER = "one_center"
    MULTI_CENTER = "multi_center"


@dataclass(frozen=True)
class SystemSpec:
    metric: MetricSpec = FLAT
    centers: tuple = ()
    potential: object = Zero()
    mu: float = 1.0
    replacement: Replacement = Replacement.NONE
    susy_kappa: float | None = None

    def __post_init__(self):
        object.__setattr__(self, "centers", tuple(self.centers))
        object.__setattr__(self, "replacement", Replacement(self.replacement))
        if not self.mu > 0:
            raise DomainError(f"mass mu must be positive, got {self.mu!r}")
        if self.replacement is Replacement.ONE_CENTER:
            if len(self.centers) != 1 or any(self.centers[0].position):
                raise DomainError("one-center replacement requires exactly one center at the origin")
        for c in self.centers:
            if not self.metric.is_flat:
                self.metric.check_radius(float(np.linalg.norm(c.position)))

    @property
    def s(self) -> float:
        """Total monopole number (sum of the magnetic charges)."""
        return float(sum(c.g for c in self.centers))

    @property
    def rotationally_symmetric(self) -> bool:
        return all(not any(c.position) for c in self.centers) and is_central(self.potential)

    @classmethod
    def micz(cls, s=1.0, alpha=-1.0, mu=1.0, metric=FLAT):
        """One-center MICZ-Kepler system: monopole ``s`` at the origin, Coulomb ``alpha``."""
        return cls(metric=metric, centers=(DyonCenter((0, 0, 0), g=s, q=0.0),),
                   potential=Coulomb(alpha), mu=mu, replacement=Replacement.ONE_CENTER)


@dataclass
class PhaseState:
    """Position ``x`` and kinetic momentum ``pi`` (arrays of shape (3,) or (N, 3))."""

    x: np.ndarray
    pi: np.ndarray

    def __post_init__(self):
        self.x = np.array(self.x, dtype=float)
        self.pi = np.array(self.pi, dtype=float)
        if self.x.shape != self.pi.shape or self.x.shape[-1] != 3:
            raise DomainError("x and pi must be matching 3-vectors")
        if not (np.all(np.isfinite(self.x)) and np.all(np.isfinite(self.pi))):
            raise DomainError("phase state must be finite")

    def as_vector(self) -> np.ndarray:
        return np.concatenate([self.x.ravel(), self.pi.ravel()])

    @classmethod
    def from_vector(cls, y, n_particles=None):
        y = np.asarray(y, dtype=float)
        if n_particles is None:
            return cls(y[:3], y[3:6])
        k = 3 * n_particles
        return cls(y[:k].reshape(n_particles, 3), y[k:].reshape(n_particles, 3))


# -- replacement rules -----------------------------------------------------

def apply_micz_replacement(potential_value: float, s: float, G: float, r: float, mu: float = 1.0) -> float:
    """``U + s^2 / (2 mu G r^2)``."""
    if r <= 0:
        raise SingularityError("MICZ replacement term is singular at r = 0")
    if not G > 0:
        raise DomainError("conformal factor must be positive")
    w = s / r
    return potential_value + w * w / (2.0 * G * mu)


def apply_multicenter_replacement(potential_value: float, point, centers: Sequence[DyonCenter],
                                  G: float, mu: float = 1.0, delta_min: float = DELTA_MIN) -> float:
    """``U + (sum_i g_i / r_i)^2 / (2 mu G)``."""
    if not G > 0:
        raise DomainError("conformal factor must be positive")
    x = np.asarray(point, dtype=float)
    w = 0.0
    for c in centers:
        d = x - c.a
        r = math.sqrt(d @ d)
        if r < delta_min:
            raise ProximityError(f"point within {delta_min:g} of center {c.position}")
        w += c.g / r
    return potential_value + w * w / (2.0 * G * mu)


# -- Hamiltonian -----------------------------------------------------------

def _radius(system: SystemSpec, x) -> float:
    r = math.sqrt(x @ x)
    system.metric.check_radius(r)
    return r


def _center_offsets(system, x):
    out = []
    for c in system.centers:
        d = x - c.a
        rc = math.sqrt(d @ d)
        if rc < DELTA_MIN:
            raise ProximityError(f"point {x.tolist()} within {DELTA_MIN:g} of center {c.position}")
        system.metric.check_radius(rc)
        out.append((c, d, rc))
    return out


def effective_potential(system: SystemSpec, x) -> float:
    """Everything in ``H`` except the kinetic term."""
    x = np.asarray(x, dtype=float)
    metric, mu = system.metric, system.mu
    r = _radius(system, x)
    offsets = _center_offsets(system, x)
    u = system.potential.value(x, metric, mu)
    for c, _, rc in offsets:
        if c.q:
            u += c.q * geometry.coulomb_green_closed(metric, rc)
    if system.replacement is Replacement.ONE_CENTER:
        u = apply_micz_replacement(u, system.centers[0].g, geometry.conformal_factor(metric, r), r, mu)
    elif system.replacement is Replacement.MULTI_CENTER:
        phi_g = sum(c.g * geometry.coulomb_green_closed(metric, rc) for c, _, rc in offsets)
        u += phi_g * phi_g / (2.0 * mu)
    return u


def effective_potential_gradient(system: SystemSpec, x) -> np.ndarray:
    """Analytic gradient of :func:`effective_potential`."""
    x = np.asarray(x, dtype=float)
    metric, mu = system.metric, system.mu
    r = _radius(system, x)
    offsets = _center_offsets(system, x)
    grad = np.array(system.potential.gradient(x, metric, mu), dtype=float)
    for c, d, rc in offsets:
        if c.q:
            grad += c.q * geometry.coulomb_green_derivative(metric, rc) * d / rc
    if system.replacement is Replacement.ONE_CENTER:
        s = system.centers[0].g
        G = geometry.conformal_factor(metric, r)
        dG = geometry.conformal_factor_derivative(metric, r)
        dW = -s * s * (dG * r * r + 2.0 * G * r) / (2.0 * mu * G * G * r**4)
        grad += dW * x / r
    elif system.replacement is Replacement.MULTI_CENTER:
        phi_g = 0.0
        dphi = np.zeros(3)
        for c, d, rc in offsets:
            phi_g += c.g * geometry.coulomb_green_closed(metric, rc)
            dphi += c.g * geometry.coulomb_green_derivative(metric, rc) * d / rc
        grad += phi_g * dphi / mu
    return grad


def evaluate_hamiltonian(system: SystemSpec, state: PhaseState) -> float:
    x = np.asarray(state.x, dtype=float)
    pi = np.asarray(state.pi, dtype=float)
    G = geometry.conformal_factor(system.metric, math.sqrt(x @ x))
    return float(pi @ pi) / (2.0 * system.mu * G) + effective_potential(system, x)


# -- supersymmetric potential and DSZ ----------------------------------------

def susy_potential(point, centers: Sequence[DyonCenter], B0, kappa: float, metric: MetricSpec = FLAT) -> float:
    """``(kappa/G) (sum_I g_I / |x - a_I| + B0 . x) + kappa^2 / (2G)``."""
    x = np.asarray(point, dtype=float)
    G = geometry.conformal_factor(metric, math.sqrt(x @ x))
    w = 0.0
    for c in centers:
        d = x - c.a
        rc = math.sqrt(d @ d)
        if rc < DELTA_MIN:
            raise ProximityError(f"point within {DELTA_MIN:g} of center {c.position}")
        w += c.g / rc
    w += float(np.dot(B0, x))
    return kappa * w / G + kappa * kappa / (2.0 * G)


def dsz_check(centers: Sequence[DyonCenter], tol: float = DSZ_TOL) -> tuple[bool, float]:
    """Whether all pairs satisfy ``g_i q_j - g_j q_i = 0``; also the largest violation."""
    worst = 0.0
    for a, b in combinations(centers, 2):
        worst = max(worst, abs(a.g * b.q - b.g * a.q))
    return worst <= tol, worst


class IV2Result(NamedTuple):
    residual: float
    precondition_ok: bool


def _h_multicenter(x, p, centers, metric):
    G = geometry.conformal_factor(metric, math.sqrt(x @ x))
    A = sum((dirac_vector_potential(x, c) for c in centers), np.zeros(3))
    kin = p - A
    phi_g = scalar_potential_multi(x, centers, metric, Weight.MAGNETIC)
    phi_q = scalar_potential_multi(x, centers, metric, Weight.ELECTRIC)
    return kin @ kin / (2 * G) + 0.5 * phi_g**2 + phi_q, kin @ kin / (2 * G), phi_g


def iv2_residual(centers: Sequence[DyonCenter], kappa: float, points, momenta=None,
                 metric: MetricSpec = FLAT) -> IV2Result:
    """Largest ``|H_sum - H_square|`` between the charge-sum and completed-square forms.

    ``H_square = (p - A)^2/(2G) + (phi_g + kappa)^2 / 2 - kappa^2 / 2``. The
    two agree identically when ``q_i = kappa g_i`` for every center.
    """
    ok, _ = dsz_check(centers)
    ok = ok and all(abs(c.q - kappa * c.g) <= DSZ_TOL * max(1.0, abs(c.q)) for c in centers)
    pts = [np.asarray(p, dtype=float) for p in points]
    moms = [np.zeros(3)] * len(pts) if momenta is None else [np.asarray(m, dtype=float) for m in momenta]
    worst = 0.0
    for x, p in zip(pts, moms):
        h_sum, kin, phi_g = _h_multicenter(x, p, centers, metric)
        h_square = kin + 0.5 * (phi_g + kappa) ** 2 - 0.5 * kappa**2
        worst = max(worst, abs(h_sum - h_square))
    if not ok:
        warnings.warn("iv2_residual: charges do not satisfy q_i = kappa g_i; residual is not expected to vanish",
                      RuntimeWarning, stacklevel=2)
    return IV2Result(worst, ok)


# -- Calogero model with monopoles -------------------------------------------

@dataclass(frozen=True)
class NBodySpec:
    """N particles with electric charges ``e`` and magnetic charges ``g`` plus a harmonic trap."""

    e: tuple
    g: tuple
    omega: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "e", tuple(float(v) for v in self.e))
        object.__setattr__(self, "g", tuple(float(v) for v in self.g))
        if len(self.e) != len(self.g) or len(self.e) < 1:
            raise DomainError("need matching, non-empty charge lists")
        if not self.omega >= 0:
            raise DomainError("omega must be non-negative")

    @property
    def n(self) -> int:
        return len(self.e)

    @property
    def s_matrix(self) -> np.ndarray:
        """``s_IJ = e_I g_J - e_J g_I`` (antisymmetric)."""
        e = np.array(self.e)
        g = np.array(self.g)
        return np.outer(e, g) - np.outer(g, e)


def _pair_sums(spec: NBodySpec, positions, delta_min=DELTA_MIN):
    x = np.asarray(positions, dtype=float)
    s = spec.s_matrix
    w = np.zeros(spec.n)
    for i in range(spec.n):
        for j in range(spec.n):
            if i == j:
                continue
            rij = math.sqrt((x[i] - x[j]) @ (x[i] - x[j]))
            if rij < delta_min:
                raise ProximityError(f"particles {i} and {j} collide (r = {rij:.3e})")
            w[i] += s[i, j] / rij
    return w


def calogero_monopole_energy(spec: NBodySpec, positions, momenta) -> float:
    """``sum pi^2/2 + sum_I (sum_{J!=I} s_IJ / r_IJ)^2 / 2 + omega^2 sum r_I^2 / 2``."""
    x = np.asarray(positions, dtype=float)
    p = np.asarray(momenta, dtype=float)
    w = _pair_sums(spec, x)
    return float(0.5 * np.sum(p * p) + 0.5 * np.sum(w * w) + 0.5 * spec.omega**2 * np.sum(x * x))
