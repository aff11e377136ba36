"""Classical motion in dyon backgrounds.

The state is ``(x, pi)`` with ``pi`` the gauge-invariant kinetic momentum.
The monopole enters only through the twisted bracket
``{pi_i, pi_j} = -eps_ijk B_k``, so the flow is

    xdot  = pi / (mu G)
    pidot = -grad H - xdot x B,      B = sum_i g_i (x - a_i) / |x - a_i|^3

and no vector potential (hence no Dirac string) appears along trajectories.
With this sign ``J = x x pi + s x/|x|`` is conserved for one monopole at
the origin.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np
from scipy import interpolate, optimize

from . import _kernels as K
from .errors import (
    ConvergenceError,
    DomainError,
    IntegrationAborted,
    ProximityError,
    SingularityError,
)
from .fields import DELTA_MIN
from .model import (
    NBodySpec,
    PhaseState,
    Replacement,
    SystemSpec,
    evaluate_hamiltonian,
    flatten_potential,
)

__all__ = [
    "Integrator",
    "IntegratorConfig",
    "TrajectoryRecord",
    "OrbitGeometry",
    "Branch",
    "Section",
    "pack_system",
    "pack_nbody",
    "equations_of_motion",
    "integrate",
    "integrate_nbody",
    "energy_series",
    "angular_momentum",
    "runge_lenz",
    "radial_decomposition",
    "azimuthal_rate",
    "orbit_geometry",
    "orbit_shape_compare",
    "build_initial_state",
    "kepler_period",
    "auto_step",
    "poincare_section",
    "closed_curve_deviation",
]

_STATUS_MESSAGES = {
    K.PROXIMITY: "state approached a center (or the origin) closer than delta_min",
    K.DOMAIN: "state left the coordinate chart of the metric",
    K.NO_CONVERGENCE: "implicit midpoint fixed-point iteration did not converge",
    K.NONFINITE: "state became non-finite",
}


class Integrator(str, enum.Enum):
    RK4 = "rk4"
    IMPLICIT_MIDPOINT = "implicit_midpoint"


@dataclass(frozen=True)
class IntegratorConfig:
    integrator: Integrator = Integrator.RK4
    h: float = 1e-2
    t_end: float = 1.0
    stride: int = 1
    tol: float = 1e-13
    maxiter: int = 50

    def __post_init__(self):
        object.__setattr__(self, "integrator", Integrator(self.integrator))
        if not self.h > 0:
            raise DomainError("step size h must be positive")
        if not self.t_end > 0:
            raise DomainError("t_end must be positive")
        if int(self.stride) < 1:
            raise DomainError("stride must be >= 1")

    @property
    def n_steps(self) -> int:
        return max(1, int(round(self.t_end / self.h)))


@dataclass
class TrajectoryRecord:
    times: np.ndarray
    y: np.ndarray  # (n_samples, 6) or (n_samples, 6N)
    h: float
    integrator: Integrator
    system: object = None
    n_particles: int | None = None

    def __len__(self):
        return len(self.times)

    @property
    def x(self) -> np.ndarray:
        k = 3 * (self.n_particles or 1)
        xs = self.y[:, :k]
        return xs if self.n_particles is None else xs.reshape(len(self), self.n_particles, 3)

    @property
    def pi(self) -> np.ndarray:
        k = 3 * (self.n_particles or 1)
        ps = self.y[:, k:]
        return ps if self.n_particles is None else ps.reshape(len(self), self.n_particles, 3)

    @property
    def states(self) -> list:
        return [PhaseState.from_vector(row, self.n_particles) for row in self.y]


# -- packing ---------------------------------------------------------------

def pack_system(system: SystemSpec):
    metric = system.metric
    alpha, omega2, E = flatten_potential(system.potential)
    mode = {Replacement.NONE: 0, Replacement.ONE_CENTER: 1, Replacement.MULTI_CENTER: 2}[system.replacement]
    rlim = metric.r_max
    params = np.array([
        system.mu, metric.epsilon, metric.r0, 1.0 if metric.is_flat else 0.0, mode,
        alpha, omega2, E[0], E[1], E[2], DELTA_MIN, rlim,
    ], dtype=float)
    centers = np.array([[*c.position, c.g, c.q] for c in system.centers], dtype=float).reshape(-1, 5)
    return params, centers


def pack_nbody(spec: NBodySpec):
    return np.array([spec.omega, DELTA_MIN, spec.n], dtype=float), spec.s_matrix.astype(float)


def _raise_status(status, where=""):
    msg = _STATUS_MESSAGES.get(status, f"status {status}")
    if status == K.PROXIMITY:
        raise ProximityError(msg + where)
    if status == K.DOMAIN:
        raise DomainError(msg + where)
    raise ConvergenceError(msg + where)


def equations_of_motion(system: SystemSpec, state: PhaseState):
    """Return ``(xdot, pidot)`` at ``state``."""
    params, centers = pack_system(system)
    y = np.concatenate([np.asarray(state.x, float), np.asarray(state.pi, float)])
    out = np.empty(6)
    st = K.micz_rhs(y, params, centers, out)
    if st != K.OK:
        _raise_status(st)
    return out[:3].copy(), out[3:].copy()


# -- integration -----------------------------------------------------------

def _run(rhs, params, centers, y0, config: IntegratorConfig, system, n_particles=None):
    method = 0 if config.integrator is Integrator.RK4 else 1
    n = config.n_steps
    samples, stored, status, last = K.integrate_fixed(
        rhs, method, np.ascontiguousarray(y0, dtype=float), float(config.h), n, int(config.stride),
        params, centers, float(config.tol), int(config.maxiter),
    )
    times = np.arange(stored) * config.stride * config.h
    rec = TrajectoryRecord(times, samples[:stored].copy(), config.h, config.integrator, system, n_particles)
    if status != K.OK:
        raise IntegrationAborted(
            f"{_STATUS_MESSAGES.get(status, status)} at step {last} (t = {last * config.h:.6g})",
            partial=rec,
        )
    return rec


def integrate(system: SystemSpec, state0: PhaseState, config: IntegratorConfig) -> TrajectoryRecord:
    """Fixed-step integration of one particle; raises :class:`IntegrationAborted` on failure."""
    params, centers = pack_system(system)
    y0 = np.concatenate([np.asarray(state0.x, float), np.asarray(state0.pi, float)])
    return _run(K.micz_rhs, params, centers, y0, config, system)


def integrate_nbody(spec: NBodySpec, positions, momenta, config: IntegratorConfig) -> TrajectoryRecord:
    params, smat = pack_nbody(spec)
    y0 = np.concatenate([np.asarray(positions, float).ravel(), np.asarray(momenta, float).ravel()])
    return _run(K.nbody_rhs, params, smat, y0, config, spec, spec.n)


def energy_series(traj: TrajectoryRecord) -> np.ndarray:
    if isinstance(traj.system, NBodySpec):
        from .model import calogero_monopole_energy
        return np.array([calogero_monopole_energy(traj.system, x, p) for x, p in zip(traj.x, traj.pi)])
    params, centers = pack_system(traj.system)
    return np.array([K.micz_energy(row, params, centers) for row in traj.y])


def kepler_period(alpha: float, energy: float, mu: float = 1.0) -> float:
    """Radial period of a bound flat Coulomb orbit, ``2 pi sqrt(mu a^3 / |alpha|)``."""
    if not (energy < 0 and alpha < 0):
        raise DomainError("Kepler period needs attractive alpha and negative energy")
    a = -alpha / (2 * -energy)
    return 2 * math.pi * math.sqrt(mu * a**3 / -alpha)


def auto_step(alpha: float, mu: float = 1.0, energy: float | None = None, per_period: int = 2000) -> float:
    """Default step: ``T / per_period`` with ``T`` the Kepler period (or ``2 pi / (mu alpha^2)``)."""
    if alpha == 0:
        return 1e-2
    if energy is not None and energy < 0 and alpha < 0:
        T = kepler_period(alpha, energy, mu)
    else:
        T = 2 * math.pi / (mu * alpha**2)
    return T / per_period


# -- conserved quantities and orbit geometry -----------------------------------

def _xp(state):
    if isinstance(state, PhaseState):
        return np.asarray(state.x, float), np.asarray(state.pi, float)
    x, p = state
    return np.asarray(x, float), np.asarray(p, float)


def angular_momentum(state, s: float) -> np.ndarray:
    """``J = x x pi + s x/|x|`` (broadcasts over leading axes)."""
    x, p = _xp(state)
    r = np.linalg.norm(x, axis=-1, keepdims=True)
    if np.any(r == 0):
        raise SingularityError("angular momentum undefined at the origin")
    return np.cross(x, p) + s * x / r


def runge_lenz(state, s: float, mu: float = 1.0, alpha: float = -1.0) -> np.ndarray:
    """``A = (pi x J - J x pi)/(2 mu) + alpha x/|x|``, i.e. ``pi x J / mu + alpha x/|x|``."""
    x, p = _xp(state)
    J = angular_momentum((x, p), s)
    r = np.linalg.norm(x, axis=-1, keepdims=True)
    return (np.cross(p, J) - np.cross(J, p)) / (2.0 * mu) + alpha * x / r


def radial_decomposition(state, s: float):
    """``(p_r, J^2)`` with ``p_r = pi.x/|x|``; ``pi^2 = p_r^2 + (J^2 - s^2)/r^2``."""
    x, p = _xp(state)
    r = float(np.linalg.norm(x))
    if r == 0:
        raise SingularityError("radial decomposition undefined at the origin")
    J = angular_momentum((x, p), s)
    return float(p @ x) / r, float(J @ J)


def azimuthal_rate(state, s: float, G: float = 1.0, mu: float = 1.0) -> float:
    """``dphi/dt = |J| / (mu G r^2)`` about the ``J`` axis."""
    x, p = _xp(state)
    J = angular_momentum((x, p), s)
    Jn = float(np.linalg.norm(J))
    r2 = float(x @ x)
    rho2 = r2 - (float(J @ x) / Jn) ** 2 if Jn > 0 else 0.0
    if Jn == 0 or rho2 <= 1e-24 * r2:
        raise SingularityError("azimuthal angle undefined on the J axis")
    return Jn / (mu * G * r2)


@dataclass
class OrbitGeometry:
    J: np.ndarray
    cone_angle: float
    cone_residual_max: float
    tilt_deviation_max: float
    r_of_phi: np.ndarray  # columns (t, phi, r)
    degenerate: bool = False


def _frame(J):
    e3 = J / np.linalg.norm(J)
    trial = np.array([1.0, 0.0, 0.0]) if abs(e3[0]) < 0.9 else np.array([0.0, 1.0, 0.0])
    e1 = trial - (trial @ e3) * e3
    e1 /= np.linalg.norm(e1)
    e2 = np.cross(e3, e1)
    return e1, e2, e3


def orbit_geometry(traj: TrajectoryRecord, s: float | None = None) -> OrbitGeometry:
    """Cone of motion and ``r(phi)`` of a trajectory, in the frame aligned with ``J(0)``."""
    if len(traj) == 0:
        raise DomainError("empty trajectory")
    if s is None:
        s = traj.system.s
    x = traj.x
    J = angular_momentum((x[0], traj.pi[0]), s)
    Jn = float(np.linalg.norm(J))
    if Jn == 0:
        raise DomainError("|J| = 0: orbit geometry undefined")
    r = np.linalg.norm(x, axis=1)
    c = min(1.0, max(-1.0, s / Jn))
    cone = math.acos(c)
    residual = float(np.max(np.abs(x @ J - s * r)))
    cosang = np.clip((x @ J) / (Jn * r), -1.0, 1.0)
    tilt = float(np.max(np.abs(np.arccos(cosang) - cone)))
    e1, e2, _ = _frame(J)
    phi = np.unwrap(np.arctan2(x @ e2, x @ e1))
    degenerate = abs(Jn - abs(s)) <= 1e-12 * max(1.0, Jn)
    return OrbitGeometry(J, cone, residual, tilt, np.column_stack([traj.times, phi, r]), degenerate)


def _monotone_segments(phi):
    d = np.sign(np.diff(phi))
    segs, start = [], 0
    for i in range(1, len(d)):
        if d[i] != d[start] or d[i] == 0:
            segs.append((start, i + 1))
            start = i
    segs.append((start, len(phi)))
    return [(a, b) for a, b in segs if b - a >= 4]


def _longest_spline(phi, r):
    a, b = max(_monotone_segments(phi), key=lambda ab: ab[1] - ab[0])
    p, rr = phi[a:b], r[a:b]
    if p[0] > p[-1]:
        p, rr = p[::-1], rr[::-1]
    return p[0], p[-1], interpolate.CubicSpline(p, rr)


def orbit_shape_compare(traj_a: TrajectoryRecord, traj_b: TrajectoryRecord, n_grid: int = 2000,
                        phi_span: float | None = None) -> float:
    """Largest relative deviation ``|r_a(phi) - r_b(phi)| / r_a(phi)`` on a common grid.

    Each orbit is reduced to ``r(phi)`` in its own ``J``-aligned frame; the
    longest monotone-in-phi segment is interpolated with a cubic spline.
    """
    ga, gb = orbit_geometry(traj_a), orbit_geometry(traj_b)
    a0, a1, fa = _longest_spline(ga.r_of_phi[:, 1], ga.r_of_phi[:, 2])
    b0, b1, fb = _longest_spline(gb.r_of_phi[:, 1], gb.r_of_phi[:, 2])
    lo, hi = max(a0, b0), min(a1, b1)
    if phi_span is not None:
        hi = min(hi, lo + phi_span)
    if not hi > lo:
        raise DomainError("trajectories have non-overlapping phi ranges")
    grid = np.linspace(lo, hi, n_grid)
    ra, rb = fa(grid), fb(grid)
    return float(np.max(np.abs(ra - rb) / np.abs(ra)))


# -- initial conditions --------------------------------------------------------

class Branch(str, enum.Enum):
    PERIHELION = "perihelion"
    APHELION = "aphelion"


def _state_on_cone(r, Jmag, s):
    cos0 = s / Jmag if Jmag > 0 else 0.0
    sin0 = math.sqrt(max(0.0, 1.0 - cos0 * cos0))
    xhat = np.array([sin0, 0.0, cos0])
    J = np.array([0.0, 0.0, Jmag])
    L = J - s * xhat
    x = r * xhat
    return PhaseState(x, np.cross(L, x) / (r * r))


def build_initial_state(system: SystemSpec, E: float, Jmag: float, s: float | None = None,
                        branch: Branch = Branch.PERIHELION, r_max: float = 1e4,
                        n_scan: int = 4000) -> PhaseState:
    """State at a radial turning point with prescribed energy and ``|J|``.

    ``J`` points along ``+z`` and ``x`` lies on the cone ``J.x = s |x|`` in the
    ``xz`` plane. Turning points are bracketed on a logarithmic scan of
    ``[delta_min, r_max]`` and refined with Brent's method; a touching
    minimum is accepted as a circular orbit.
    """
    if s is None:
        s = system.s
    branch = Branch(branch)
    if Jmag < abs(s):
        raise DomainError(f"|J| = {Jmag} violates the bound |J| >= |s| = {abs(s)}")
    r_hi = min(r_max, system.metric.r_max * (1 - 1e-9))

    def f(r):
        return evaluate_hamiltonian(system, _state_on_cone(r, Jmag, s)) - E

    grid = np.geomspace(max(DELTA_MIN, 1e-6) * 10, r_hi, n_scan)
    vals = np.array([f(r) for r in grid])
    scale = max(1.0, abs(E))
    roots = []
    for i in range(len(grid) - 1):
        if vals[i] == 0.0:
            roots.append((grid[i], -np.sign(vals[i + 1])))
        elif vals[i] * vals[i + 1] < 0:
            r = optimize.brentq(f, grid[i], grid[i + 1], xtol=1e-15, rtol=1e-15, maxiter=500)
            roots.append((r, np.sign(vals[i + 1])))  # sign after the root
    entries = [r for r, after in roots if after < 0]
    exits = [r for r, after in roots if after > 0]
    if entries or exits:
        if branch is Branch.PERIHELION and entries:
            r = entries[0]
        elif branch is Branch.APHELION and exits:
            r = exits[0] if not entries else next((x for x in exits if x > entries[0]), None)
            if r is None:
                raise DomainError("orbit is unbounded: no aphelion below r_max")
        else:
            raise DomainError(f"no {branch.value} turning point for E={E}, |J|={Jmag}")
    else:
        i = int(np.argmin(vals))
        lo, hi = grid[max(i - 1, 0)], grid[min(i + 1, len(grid) - 1)]
        res = optimize.minimize_scalar(f, bounds=(lo, hi), method="bounded",
                                       options={"xatol": 1e-13 * hi, "maxiter": 500})
        if abs(res.fun) > 1e-10 * scale:
            raise DomainError(f"no radial turning point for E={E}, |J|={Jmag} (min excess {res.fun:.3e})")
        r = float(res.x)
    return _state_on_cone(r, Jmag, s)


# -- Poincare sections -----------------------------------------------------------

@dataclass(frozen=True)
class Section:
    """Plane ``n.(x - point) = 0``; ``direction`` +1 / -1 selects the crossing sense, 0 both."""

    point: tuple = (0.0, 0.0, 0.0)
    normal: tuple = (0.0, 0.0, 1.0)
    direction: int = 1


@dataclass
class SectionResult:
    times: np.ndarray
    y: np.ndarray
    complete: bool

    @property
    def x(self):
        return self.y[:, :3]

    @property
    def pi(self):
        return self.y[:, 3:6]


def poincare_section(system: SystemSpec, state0: PhaseState, section: Section, n_crossings: int,
                     h: float, t_max: float, tol: float = 1e-10) -> SectionResult:
    """Successive crossings of the section plane, refined to ``tol`` in crossing time.

    A sign change of ``n.(x - point)`` across one RK4 step is first located with
    Henon's step (integrating in the section coordinate), then polished by
    Newton iteration in time. Fewer crossings than requested within ``t_max``
    gives ``complete=False``.
    """
    params, centers = pack_system(system)
    y0 = np.concatenate([np.asarray(state0.x, float), np.asarray(state0.pi, float)])
    normal = np.asarray(section.normal, float)
    normal = normal / np.linalg.norm(normal)
    out, count, status = K.poincare_kernel(
        K.micz_rhs, y0, float(h), int(math.ceil(t_max / h)), params, centers,
        np.asarray(section.point, float), normal, int(section.direction), int(n_crossings), float(tol),
    )
    if status not in (K.OK,):
        msg = _STATUS_MESSAGES.get(status, str(status))
        if count == 0:
            raise IntegrationAborted(f"Poincare integration failed: {msg}")
    return SectionResult(out[:count, 0].copy(), out[:count, 1:].copy(), count >= n_crossings)


def closed_curve_deviation(points, n_harmonics: int | None = None) -> float:
    """Regularity measure of 2D section points: worst distance to a fitted closed curve / diameter.

    Coordinates are standardised, points are ordered by polar angle about
    their centroid and the radius is fitted by a truncated Fourier series in
    that angle. Points on a smooth star-shaped curve give values near zero;
    scattered (chaotic) sections give values of order 0.1 or more.
    """
    P = np.asarray(points, float)
    if len(P) < 8:
        raise DomainError("need at least 8 section points")
    Q = (P - P.mean(axis=0)) / np.where(P.std(axis=0) > 0, P.std(axis=0), 1.0)
    theta = np.arctan2(Q[:, 1], Q[:, 0])
    rad = np.hypot(Q[:, 0], Q[:, 1])
    K_h = n_harmonics if n_harmonics is not None else int(min(24, (len(P) - 1) // 6))
    cols = [np.ones_like(theta)]
    for k in range(1, K_h + 1):
        cols += [np.cos(k * theta), np.sin(k * theta)]
    M = np.column_stack(cols)
    coef, *_ = np.linalg.lstsq(M, rad, rcond=None)
    dev = np.abs(rad - M @ coef)
    diff = Q[:, None, :] - Q[None, :, :]
    diameter = float(np.sqrt(np.max(np.sum(diff * diff, axis=-1))))
    if diameter == 0:
        return 0.0
    return float(np.max(dev) / diameter)

