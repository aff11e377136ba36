"""Quantum MICZ-Kepler systems: radial spectra, quantum-number ranges,
linear Stark splitting of the ground multiplet and dipole selection rules.

The radial problem on a conformally flat space ``ds^2 = G(r) dr.dr`` is

    -(1/2mu) G^{-3/2} r^{-2} (r^2 G^{1/2} R')' + [lam/(2 mu G r^2) + U(r) + W(r)] R = E R

with ``lam = l(l+1) - s^2`` the monopole angular eigenvalue and
``W = s^2/(2 mu G r^2)`` the compensating centrifugal term. It is solved as a
symmetric generalized Sturm-Liouville problem by second-order conservative
finite differences on a uniform or logarithmic grid, with zero flux at the
inner end and ``R = 0`` at the outer end.
"""
from __future__ import annotations

import math
from collections import defaultdict
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy import integrate, linalg

from .angular import COMPONENTS, dipole_matrix_element, is_half_integer
from .errors import ConvergenceError, DomainError
from .geometry import FLAT, MetricSpec

__all__ = [
    "QuantumNumbers",
    "EigenResult",
    "RadialGrid",
    "RadialProblem",
    "analytic_spectrum",
    "sphere_coulomb_spectrum",
    "allowed_quantum_numbers",
    "level_degeneracy",
    "radial_eigenvalues",
    "spectrum_shift_check",
    "stark_ground_energy",
    "stark_first_order",
    "hydrogenic_mean_radius",
    "selection_rule_table",
    "standard_rule_set",
]


@dataclass(frozen=True)
class QuantumNumbers:
    s: float
    l: float
    m: float
    n_r: int

    def __post_init__(self):
        s, l, m = self.s, self.l, self.m
        if not (is_half_integer(s) and is_half_integer(l) and is_half_integer(m)):
            raise DomainError("s, l, m must be integers or half-integers")
        if l < abs(s) - 1e-12 or not float(l - abs(s)).is_integer():
            raise DomainError(f"l = {l} not allowed for s = {s} (need l = |s|, |s|+1, ...)")
        if abs(m) > l + 1e-12 or not float(m - l).is_integer():
            raise DomainError(f"m = {m} not allowed for l = {l}")
        if self.n_r < 0 or int(self.n_r) != self.n_r:
            raise DomainError("n_r must be a non-negative integer")

    @property
    def n(self) -> float:
        return self.n_r + self.l + 1


@dataclass
class EigenResult:
    n_r: int
    l: float
    energy: float
    grid_size: int
    scheme: str
    r: np.ndarray | None = field(default=None, repr=False)
    radial: np.ndarray | None = field(default=None, repr=False)  # R(r), normalised with the curved measure
    weight: np.ndarray | None = field(default=None, repr=False)  # quadrature weights of that measure


@dataclass(frozen=True)
class RadialGrid:
    r_min: float = 1e-4
    r_max: float = 200.0
    nodes: int = 4000
    scheme: str = "log"

    def __post_init__(self):
        if not (0 < self.r_min < self.r_max):
            raise DomainError("radial grid needs 0 < r_min < r_max")
        if self.nodes < 200:
            raise DomainError("radial grid needs at least 200 nodes")
        if self.scheme not in ("log", "uniform"):
            raise DomainError(f"unknown grid scheme {self.scheme!r}")

    def doubled(self) -> "RadialGrid":
        return RadialGrid(self.r_min, self.r_max, 2 * self.nodes + 1, self.scheme)

    def coordinates(self):
        """Interior nodes ``r_i``, midpoints, ``dr/dxi`` at both, and the step in ``xi``."""
        if self.scheme == "log":
            xi = np.linspace(math.log(self.r_min), math.log(self.r_max), self.nodes + 2)
            dxi = xi[1] - xi[0]
            mid = 0.5 * (xi[:-1] + xi[1:])
            r, rm = np.exp(xi[1:-1]), np.exp(mid)
            return r, r, rm, rm, dxi
        xi = np.linspace(self.r_min, self.r_max, self.nodes + 2)
        dxi = xi[1] - xi[0]
        mid = 0.5 * (xi[:-1] + xi[1:])
        return xi[1:-1], np.ones(self.nodes), mid, np.ones(len(mid)), dxi


@dataclass(frozen=True)
class RadialProblem:
    """Radial profile: metric, central potential ``U(r)`` (vectorised), mass, and
    whether the monopole compensating term ``s^2/(2 mu G r^2)`` is included."""

    metric: MetricSpec = FLAT
    potential: Callable = None
    mu: float = 1.0
    replacement: bool = True

    @classmethod
    def coulomb(cls, alpha=-1.0, metric=FLAT, mu=1.0, replacement=True):
        if metric.is_flat:
            U = lambda r: alpha / r
        else:
            U = lambda r: alpha * (1.0 - metric.epsilon * r * r) / (2.0 * metric.r0 * r)
        return cls(metric, U, mu, replacement)

    @classmethod
    def oscillator(cls, omega=1.0, metric=FLAT, mu=1.0, replacement=True):
        return cls(metric, lambda r: 0.5 * mu * omega**2 * r * r, mu, replacement)

    def G(self, r):
        if self.metric.is_flat:
            return np.ones_like(r)
        return 4.0 * self.metric.r0**2 / (1.0 + self.metric.epsilon * r * r) ** 2


# -- closed forms -------------------------------------------------------------

def analytic_spectrum(mu: float, alpha: float, n: float) -> float:
    """``E_n = -mu alpha^2 / (2 n^2)``."""
    if not n > 0:
        raise DomainError(f"principal quantum number must be positive, got {n}")
    return -mu * alpha**2 / (2.0 * n * n)


def sphere_coulomb_spectrum(mu: float, alpha: float, n: float, r0: float) -> float:
    """Coulomb levels on the three-sphere of radius r0: ``-mu alpha^2/(2n^2) + (n^2-1)/(2 mu r0^2)``."""
    return analytic_spectrum(mu, alpha, n) + (n * n - 1.0) / (2.0 * mu * r0 * r0)


def allowed_quantum_numbers(s: float, n_max: float) -> list[QuantumNumbers]:
    """All ``(n_r, l, m)`` with ``l = |s|, |s|+1, ...``, ``|m| <= l`` and ``n_r + l + 1 <= n_max``."""
    if not is_half_integer(s):
        raise DomainError("monopole number must be an integer or half-integer")
    out = []
    l = abs(s)
    while l + 1 <= n_max + 1e-12:
        n_r = 0
        while n_r + l + 1 <= n_max + 1e-12:
            m = -l
            while m <= l + 1e-12:
                out.append(QuantumNumbers(s, l, m, n_r))
                m += 1
            n_r += 1
        l += 1
    return out


def level_degeneracy(s: float, n_max: float) -> dict:
    """Number of states per principal level ``n`` (``n^2 - s^2`` in closed form)."""
    counts = defaultdict(int)
    for qn in allowed_quantum_numbers(s, n_max):
        counts[qn.n] += 1
    return dict(sorted(counts.items()))


# -- radial solver -----------------------------------------------------------

_BISECT_TOL = 1e-15


def _assemble(problem: RadialProblem, l: float, s: float, grid: RadialGrid):
    metric, mu = problem.metric, problem.mu
    r, drdxi, rm, drdxi_m, dxi = grid.coordinates()
    if not metric.is_flat:
        metric.check_radius(grid.r_max)
    G, Gm = problem.G(r), problem.G(rm)
    lam = l * (l + 1.0) - s * s
    V = np.asarray(problem.potential(r), dtype=float) + lam / (2.0 * mu * G * r * r)
    if problem.replacement:
        V = V + (s * s) / (2.0 * mu * G * r * r)
    w = G**1.5 * r * r * drdxi                      # measure in xi
    p = rm * rm * np.sqrt(Gm) / drdxi_m             # stiffness at half nodes
    c = 1.0 / (2.0 * mu * dxi * dxi)
    p_left = p[:-1].copy()
    p_left[0] = 0.0                                 # zero flux at r_min, since r^2 G^{1/2} R' -> 0
    diag = c * (p_left + p[1:]) + w * V
    off = -c * p[1:-1]
    # symmetric scaling M^{-1/2} A M^{-1/2}
    sw = np.sqrt(w)
    return r, w, V, diag / w, off / (sw[:-1] * sw[1:])


def _solve(problem, l, s, count, grid, vectors):
    r, w, V, d, e = _assemble(problem, l, s, grid)
    # the default bisection tolerance of the selective driver is far too loose
    kw = dict(select="i", select_range=(0, count - 1), tol=_BISECT_TOL)
    if vectors:
        vals, vecs = linalg.eigh_tridiagonal(d, e, **kw)
    else:
        vals, vecs = linalg.eigh_tridiagonal(d, e, eigvals_only=True, **kw), None
    return r, w, V, vals, vecs


def radial_eigenvalues(problem: RadialProblem, l: float, s: float, count: int,
                       grid: RadialGrid = RadialGrid(), convergence_tol: float | None = None,
                       vectors: bool = False) -> list[EigenResult]:
    """Lowest ``count`` radial levels at angular momentum ``l`` in a monopole ``s`` background.

    Levels above the potential at the outer wall are box states and raise
    :class:`DomainError`. With ``convergence_tol`` the grid is doubled once and
    a relative change above the tolerance raises :class:`ConvergenceError`.
    """
    if l < abs(s) - 1e-12 or not float(l - abs(s)).is_integer():
        raise DomainError(f"l = {l} not allowed for s = {s}")
    if count < 1:
        raise DomainError("count must be >= 1")
    r, w, V, vals, vecs = _solve(problem, l, s, count, grid, vectors)
    edge = V[-1]
    if len(vals) < count or np.any(vals >= edge):
        n_ok = int(np.sum(vals < edge))
        raise DomainError(f"only {n_ok} bound states below the grid edge (V = {edge:.4g}) for l = {l}")
    if convergence_tol is not None:
        _, _, _, fine, _ = _solve(problem, l, s, count, grid.doubled(), False)
        change = np.max(np.abs(fine - vals) / np.maximum(np.abs(fine), 1e-300))
        if change > convergence_tol:
            raise ConvergenceError(f"grid doubling changed levels by {change:.3e} (> {convergence_tol:g})",
                                   achieved=float(change))
    out = []
    for k, E in enumerate(vals):
        res = EigenResult(k, l, float(E), grid.nodes, grid.scheme)
        if vectors:
            u = vecs[:, k] / np.sqrt(w)               # R on the grid
            norm = math.sqrt(np.sum(w * u * u))
            u = u / norm
            if u[np.argmax(np.abs(u))] < 0:
                u = -u
            res.r, res.radial, res.weight = r, u, w
        out.append(res)
    return out


def spectrum_shift_check(metric: MetricSpec, potential: RadialProblem | None, s: float, n_max: int = 4,
                         grid: RadialGrid = RadialGrid(), alpha: float = -1.0, mu: float = 1.0) -> float:
    """Largest ``|E(n_r, l; s) - E(n_r, l; 0)|`` over ``l >= |s|`` with ``n_r + l + 1 <= n_max``.

    ``potential`` defaults to the Coulomb problem of ``metric``.
    """
    if potential is None:
        potential = RadialProblem.coulomb(alpha, metric, mu)
    worst = 0.0
    l = abs(s)
    while l + 1 <= n_max:
        count = int(math.floor(n_max - l - 1 + 1e-12)) + 1
        with_s = radial_eigenvalues(potential, l, s, count, grid)
        without = radial_eigenvalues(potential, l, 0.0, count, grid)
        for a, b in zip(with_s, without):
            worst = max(worst, abs(a.energy - b.energy))
        l += 1
    return worst


# -- Stark effect ----------------------------------------------------------

def stark_ground_energy(mu: float, alpha: float, s: float, m: float, field_magnitude: float) -> float:
    """Ground multiplet in a weak uniform field:
    ``-mu alpha^2 / (2(|s|+1)^2) + |E|/(mu |alpha|) m sgn(s) (|s| + 3/2)``."""
    if abs(m) > abs(s) + 1e-12:
        raise DomainError(f"|m| = {abs(m)} exceeds |s| = {abs(s)} in the ground multiplet")
    sgn = math.copysign(1.0, s) if s != 0 else 0.0
    return (-mu * alpha**2 / (2.0 * (abs(s) + 1.0) ** 2)
            + abs(field_magnitude) / (mu * abs(alpha)) * m * sgn * (abs(s) + 1.5))


def hydrogenic_mean_radius(mu: float, alpha: float, l: float) -> float:
    """``<r>`` of the nodeless level ``n = l + 1`` (``R ~ r^l exp(-r/(n a))``), by quadrature."""
    a = 1.0 / (mu * abs(alpha))
    n = l + 1.0
    k = 1.0 / (n * a)
    dens = lambda r: r ** (2 * l + 2) * math.exp(-2 * k * r)
    scale = n * n * a
    num, _ = integrate.quad(lambda r: r * dens(r), 0, 60 * scale, epsabs=0, epsrel=1e-13, limit=400)
    den, _ = integrate.quad(dens, 0, 60 * scale, epsabs=0, epsrel=1e-13, limit=400)
    return num / den


def stark_first_order(mu: float, alpha: float, s: float, field_magnitude: float,
                      radial: str = "analytic", grid: RadialGrid = RadialGrid()):
    """First-order degenerate perturbation theory for ``U = |E| z`` in the ground multiplet.

    The perturbation matrix ``|E| <r> <s,l,m'|cos theta|s,l,m>`` (``l = |s|``,
    ``n = |s| + 1``) is diagonalised. ``radial`` chooses how ``<r>`` is obtained:
    quadrature of the nodeless hydrogenic function (``"analytic"``) or the
    finite-difference eigenvector (``"numeric"``).

    Returns ``(ms, energies, mean_radius, matrix)`` with energies ordered like ``ms``.
    """
    l = abs(s)
    E0 = analytic_spectrum(mu, alpha, l + 1.0)
    if radial == "analytic":
        mean_r = hydrogenic_mean_radius(mu, alpha, l)
    elif radial == "numeric":
        res = radial_eigenvalues(RadialProblem.coulomb(alpha, FLAT, mu), l, s, 1, grid, vectors=True)[0]
        mean_r = float(np.sum(res.weight * res.r * res.radial**2))
    else:
        raise DomainError(f"unknown radial mode {radial!r}")
    ms = [-l + k for k in range(int(round(2 * l)) + 1)]
    M = np.array([[dipole_matrix_element(s, l, m, l, mp, "z") for m in ms] for mp in ms])
    H1 = abs(field_magnitude) * mean_r * M
    evals, evecs = np.linalg.eigh(H1)
    # label eigenvalues by the dominant m component
    order = [ms[int(np.argmax(np.abs(evecs[:, k])))] for k in range(len(ms))]
    by_m = dict(zip(order, evals))
    energies = np.array([E0 + by_m[m] for m in ms])
    return np.array(ms), energies, mean_r, M


# -- selection rules -------------------------------------------------------

def _ms(l):
    return [-l + k for k in range(int(round(2 * l)) + 1)]


def selection_rule_table(s: float, l_max: float, threshold: float = 1e-12) -> list[tuple]:
    """Dipole-allowed transitions ``(l, m) -> (l', m')`` with ``|s| <= l, l' <= l_max``.

    Returns sorted tuples ``(l, m, l', m', component, value)`` for every
    component whose angular matrix element exceeds ``threshold`` in magnitude.
    """
    if l_max < abs(s):
        raise DomainError("l_max must be >= |s|")
    ls = []
    l = abs(s)
    while l <= l_max + 1e-12:
        ls.append(l)
        l += 1
    rows = []
    for l in ls:
        for lp in ls:
            for m in _ms(l):
                for mp in _ms(lp):
                    for comp in COMPONENTS:
                        v = dipole_matrix_element(s, l, m, lp, mp, comp)
                        if abs(v) > threshold:
                            rows.append((l, m, lp, mp, comp, v))
    return sorted(rows)


def standard_rule_set(l_min: float, l_max: float) -> set:
    """``(l, m, l', m')`` allowed by the usual dipole rules: ``l' = l +- 1``, ``m' - m in {0, +-1}``."""
    out = set()
    l = l_min
    while l <= l_max + 1e-12:
        for lp in (l - 1, l + 1):
            if lp < l_min - 1e-12 or lp > l_max + 1e-12:
                continue
            for m in _ms(l):
                for mp in _ms(lp):
                    if abs(mp - m) <= 1 + 1e-12:
                        out.add((l, m, lp, mp))
        l += 1
    return out
