import math

import numpy as np
import pytest

from dyonlab import _kernels as K
from dyonlab.dynamics import (Integrator, IntegratorConfig, Section, angular_momentum, auto_step,
                              azimuthal_rate, build_initial_state, closed_curve_deviation, energy_series,
                              equations_of_motion, integrate, integrate_nbody, kepler_period, orbit_geometry,
                              orbit_shape_compare, pack_nbody, poincare_section, radial_decomposition, runge_lenz)
from dyonlab.errors import DomainError, IntegrationAborted, SingularityError
from dyonlab.fields import DyonCenter
from dyonlab.geometry import FLAT, MetricSpec, conformal_factor
from dyonlab.model import (Coulomb, LinearStark, NBodySpec, Oscillator, PhaseState, Replacement, Sum,
                           SystemSpec, Zero, calogero_monopole_energy, evaluate_hamiltonian)

E0, J0 = -0.1, 2.0


def _micz(s=1.0, metric=FLAT, potential=None):
    system = SystemSpec.micz(s, -1.0, 1.0, metric)
    if potential is not None:
        system = SystemSpec(metric, system.centers, potential, 1.0, Replacement.ONE_CENTER)
    return system


def _grad(f, v, h=1e-6):
    out = np.empty(3)
    for k in range(3):
        e = np.zeros(3)
        e[k] = h
        out[k] = (f(v + e) - f(v - e)) / (2 * h)
    return out


def _dynamic_systems():
    two = (DyonCenter((0.0, 0.0, 0.5), g=1.0, q=-1.0), DyonCenter((0.1, 0.0, -0.5), g=0.5, q=-0.5))
    yield _micz()
    yield _micz(1.5, MetricSpec.sphere(2.0))
    yield _micz(-0.5, MetricSpec.hyperboloid(1.0))
    yield _micz(1.0, FLAT, Sum((Coulomb(-1.0), LinearStark((0.02, 0.0, 0.01)))))
    yield SystemSpec(FLAT, two, Oscillator(0.3), 1.2, Replacement.MULTI_CENTER)
    yield SystemSpec(MetricSpec.sphere(1.0), two, Zero(), 0.9, Replacement.NONE)


@pytest.mark.parametrize("system", list(_dynamic_systems()))
def test_hamiltonian_is_stationary_along_flow(system, rng):
    # dH/dt from analytic equations of motion against difference gradients of H
    for _ in range(5):
        x = rng.normal(size=3)
        x *= rng.uniform(0.2, 0.6) / np.linalg.norm(x)
        if min(np.linalg.norm(x - c.a) for c in system.centers) < 0.1:
            continue
        p = rng.normal(size=3)
        xdot, pdot = equations_of_motion(system, PhaseState(x, p))
        gx = _grad(lambda y: evaluate_hamiltonian(system, PhaseState(y, p)), x)
        gp = _grad(lambda q: evaluate_hamiltonian(system, PhaseState(x, q)), p)
        np.testing.assert_allclose(xdot, gp, rtol=1e-7, atol=1e-8)
        scale = np.linalg.norm(gx) * np.linalg.norm(xdot) + 1e-12
        assert abs(gx @ xdot + gp @ pdot) / scale < 1e-7


@pytest.mark.parametrize("metric", [FLAT, MetricSpec.sphere(1.7), MetricSpec.hyperboloid(1.0)])
def test_angular_momentum_is_stationary(metric, rng):
    s = 1.2
    system = _micz(s, metric)
    for _ in range(5):
        x = rng.normal(size=3)
        x *= rng.uniform(0.2, 0.8) / np.linalg.norm(x)
        p = rng.normal(size=3)
        xdot, pdot = equations_of_motion(system, PhaseState(x, p))
        r = np.linalg.norm(x)
        xhat_dot = xdot / r - x * (x @ xdot) / r**3
        Jdot = np.cross(xdot, p) + np.cross(x, pdot) + s * xhat_dot
        np.testing.assert_allclose(Jdot, 0.0, atol=1e-12)


def test_free_particle_moves_on_a_line():
    system = SystemSpec()
    x0, p0 = np.array([1.0, -2.0, 0.5]), np.array([0.3, 0.1, -0.2])
    traj = integrate(system, PhaseState(x0, p0), IntegratorConfig("rk4", 0.01, 10.0, stride=100))
    expected = x0 + traj.times[:, None] * p0
    np.testing.assert_allclose(traj.x, expected, atol=1e-12)
    np.testing.assert_allclose(traj.pi, np.broadcast_to(p0, traj.pi.shape), atol=1e-14)


def test_initial_state_has_requested_invariants():
    system = _micz()
    for branch in ("perihelion", "aphelion"):
        st = build_initial_state(system, E0, J0, branch=branch)
        assert evaluate_hamiltonian(system, st) == pytest.approx(E0, abs=1e-14)
        np.testing.assert_allclose(angular_momentum(st, 1.0), [0, 0, J0], atol=1e-14)
        p_r, J2 = radial_decomposition(st, 1.0)
        assert abs(p_r) < 1e-14 and J2 == pytest.approx(J0**2)


def test_initial_state_rejects_bad_inputs():
    system = _micz()
    with pytest.raises(DomainError):
        build_initial_state(system, E0, 0.5)
    with pytest.raises(DomainError):
        build_initial_state(system, 0.2, J0, branch="aphelion")
    with pytest.raises(DomainError):
        build_initial_state(system, -10.0, J0)


def test_pi_squared_decomposition(rng):
    s = 0.7
    for _ in range(5):
        x, p = rng.normal(size=3), rng.normal(size=3)
        p_r, J2 = radial_decomposition(PhaseState(x, p), s)
        assert p @ p == pytest.approx(p_r**2 + (J2 - s * s) / (x @ x), rel=1e-12)


def _radial_period(traj):
    r = np.linalg.norm(traj.x, axis=1)
    i = np.where((r[1:-1] < r[:-2]) & (r[1:-1] <= r[2:]))[0] + 1
    t = []
    for k in i:  # parabolic refinement of each perihelion time
        y0, y1, y2 = r[k - 1], r[k], r[k + 1]
        t.append(traj.times[k] + 0.5 * (y0 - y2) / (y0 - 2 * y1 + y2) * (traj.times[1] - traj.times[0]))
    return np.diff(t)


@pytest.mark.parametrize("s,E,jmag", [(0.0, -0.1, 1.5), (1.0, -0.1, 1.5), (1.0, -0.3, 1.2), (2.0, -0.05, 2.5)])
def test_kepler_third_law(s, E, jmag):
    system = _micz(s)
    T = kepler_period(-1.0, E)
    st = build_initial_state(system, E, jmag, s=s)
    traj = integrate(system, st, IntegratorConfig("rk4", T / 4000, 3.2 * T))
    periods = _radial_period(traj)
    assert len(periods) >= 2
    np.testing.assert_allclose(periods, T, rtol=1e-6)


def test_cone_and_tilt():
    system = _micz()
    T = kepler_period(-1.0, E0)
    traj = integrate(system, build_initial_state(system, E0, J0), IntegratorConfig("rk4", T / 4000, 5 * T, stride=10))
    geo = orbit_geometry(traj)
    assert geo.cone_angle == pytest.approx(math.acos(0.5))
    assert geo.cone_residual_max < 1e-9 and geo.tilt_deviation_max < 1e-9
    assert not geo.degenerate


def test_orbit_shape_independent_of_monopole():
    T = kepler_period(-1.0, E0)
    cfg = IntegratorConfig("rk4", T / 4000, 1.05 * T)
    a = integrate(_micz(1.0), build_initial_state(_micz(1.0), E0, J0), cfg)
    b = integrate(_micz(0.0), build_initial_state(_micz(0.0), E0, J0, s=0.0), cfg)
    assert orbit_shape_compare(a, b, phi_span=2 * math.pi) < 1e-6


@pytest.mark.parametrize("metric", [FLAT, MetricSpec.sphere(1.5)])
def test_azimuthal_rate_matches_trajectory(metric):
    system = _micz(1.0, metric)
    st = PhaseState([0.5, 0.0, 0.3], [0.1, 0.6, -0.05])
    h = 1e-3
    traj = integrate(system, st, IntegratorConfig("rk4", h, 2.0))
    phi = orbit_geometry(traj).r_of_phi[:, 1]
    for k in (100, 700, 1500):
        fd = (phi[k - 2] - 8 * phi[k - 1] + 8 * phi[k + 1] - phi[k + 2]) / (12 * h)
        x = traj.x[k]
        G = conformal_factor(metric, np.linalg.norm(x))
        rate = azimuthal_rate((x, traj.pi[k]), 1.0, G)
        assert fd == pytest.approx(rate, rel=1e-8)


def test_azimuthal_rate_undefined_on_axis():
    with pytest.raises(SingularityError):
        azimuthal_rate(PhaseState([0.0, 0.0, 1.0], [0.0, 0.0, 0.3]), 0.0)


def test_runge_lenz_negative_control():
    potential = Sum((Coulomb(-1.0), Oscillator(0.05)))
    system = _micz(1.0, FLAT, potential)
    st = build_initial_state(_micz(), E0, J0)
    T = kepler_period(-1.0, E0)
    traj = integrate(system, st, IntegratorConfig("rk4", T / 2000, 5 * T, stride=50))
    A = runge_lenz((traj.x, traj.pi), 1.0, 1.0, -1.0)
    drift = np.max(np.linalg.norm(A - A[0], axis=1)) / np.linalg.norm(A[0])
    assert drift >= 1e-3


def test_runge_lenz_conserved_for_micz():
    system = _micz(1.5)
    T = kepler_period(-1.0, E0)
    traj = integrate(system, build_initial_state(system, E0, J0), IntegratorConfig("rk4", T / 4000, 3 * T, stride=20))
    A = runge_lenz((traj.x, traj.pi), 1.5)
    assert np.max(np.linalg.norm(A - A[0], axis=1)) / np.linalg.norm(A[0]) < 1e-9


def _final(system, st, h, T, method="rk4"):
    return integrate(system, st, IntegratorConfig(method, h, T, stride=10**9)).y


def test_rk4_self_convergence_order():
    system = _micz()
    st = build_initial_state(system, E0, J0)
    T = kepler_period(-1.0, E0)
    tend = 2 * T
    ys = [integrate(system, st, IntegratorConfig("rk4", T / n, tend, stride=int(2 * n))).y[-1] for n in (1000, 2000, 4000)]
    order = math.log2(np.linalg.norm(ys[0] - ys[1]) / np.linalg.norm(ys[1] - ys[2]))
    assert order >= 3.7


def test_energy_error_shrinks_on_halving():
    system = _micz()
    st = build_initial_state(system, E0, J0)
    T = kepler_period(-1.0, E0)
    drifts = []
    for n in (500, 1000):
        traj = integrate(system, st, IntegratorConfig("rk4", T / n, 10 * T, stride=10))
        E = energy_series(traj)
        drifts.append(np.max(np.abs(E - E[0])))
    assert drifts[0] / drifts[1] >= 12


def test_implicit_midpoint_time_reversal():
    # reversing momenta and the monopole charge retraces the orbit
    fwd_sys, rev_sys = _micz(1.0), _micz(-1.0)
    st = build_initial_state(fwd_sys, E0, J0)
    cfg = IntegratorConfig(Integrator.IMPLICIT_MIDPOINT, 0.01, 20.0, stride=10**9, tol=1e-15, maxiter=100)
    end = integrate(fwd_sys, st, cfg).y[-1]
    back = integrate(rev_sys, PhaseState(end[:3], -end[3:]), cfg).y[-1]
    np.testing.assert_allclose(back[:3], st.x, atol=1e-9)
    np.testing.assert_allclose(-back[3:], st.pi, atol=1e-9)


def test_implicit_midpoint_bounded_energy_error():
    system = _micz()
    st = build_initial_state(system, E0, J0)
    T = kepler_period(-1.0, E0)
    traj = integrate(system, st, IntegratorConfig("implicit_midpoint", T / 1000, 20 * T, stride=50))
    E = energy_series(traj)
    assert np.max(np.abs(E - E[0])) < 1e-4


def test_collision_aborts_with_partial_record():
    center = DyonCenter((1.0, 0.0, 0.0), g=1.0, q=-1.0)
    system = SystemSpec(FLAT, (center,), Zero(), 1.0, Replacement.MULTI_CENTER)
    with pytest.raises(IntegrationAborted) as info:
        integrate(system, PhaseState([1.0 + 5e-7, 0, 0], [0, 0, 0]), IntegratorConfig("rk4", 1e-3, 1.0))
    assert info.value.partial is not None


def test_hyperboloid_exit_aborts():
    system = SystemSpec(MetricSpec.hyperboloid(1.0))
    with pytest.raises(IntegrationAborted):
        integrate(system, PhaseState([0.0, 0.0, 0.5], [0.0, 0.0, 5.0]), IntegratorConfig("rk4", 1e-3, 50.0))


def test_trajectory_stride_and_states():
    system = _micz()
    st = build_initial_state(system, E0, J0)
    traj = integrate(system, st, IntegratorConfig("rk4", 0.01, 1.0, stride=10))
    assert len(traj) == 11
    np.testing.assert_allclose(traj.times, np.arange(11) * 0.1)
    assert isinstance(traj.states[0], PhaseState)


def test_auto_step():
    assert auto_step(-1.0, 1.0, E0) == pytest.approx(kepler_period(-1.0, E0) / 2000)
    assert auto_step(-2.0, 1.0) == pytest.approx(2 * math.pi / 4 / 2000)


# -- Calogero-monopole dynamics ----------------------------------------------

SPEC = NBodySpec((1.0, -0.5, 0.8), (0.3, 0.6, -0.4), omega=1.0)
X0 = np.array([[1.0, 0.0, 0.0], [-0.5, 0.9, 0.1], [-0.4, -0.8, -0.2]])
P0 = np.array([[0.0, 0.3, 0.1], [-0.2, 0.0, 0.2], [0.1, -0.2, 0.0]])


def _nbody_rhs(spec, x, p):
    params, smat = pack_nbody(spec)
    y = np.concatenate([x.ravel(), p.ravel()])
    out = np.empty_like(y)
    assert K.nbody_rhs(y, params, smat, out) == K.OK
    n = spec.n
    return out[:3 * n].reshape(n, 3), out[3 * n:].reshape(n, 3)


def test_nbody_force_is_energy_gradient(rng):
    # with zero velocities the magnetic term vanishes and pidot = -grad V
    for _ in range(3):
        x = X0 + 0.1 * rng.normal(size=X0.shape)
        _, pdot = _nbody_rhs(SPEC, x, np.zeros_like(x))
        for i in range(3):
            def V(y, i=i):
                xx = x.copy()
                xx[i] = y
                return calogero_monopole_energy(SPEC, xx, np.zeros_like(xx))
            np.testing.assert_allclose(pdot[i], -_grad(V, x[i]), rtol=1e-6, atol=1e-8)


def test_nbody_energy_stationary(rng):
    x, p = X0, rng.normal(size=X0.shape)
    xdot, pdot = _nbody_rhs(SPEC, x, p)
    np.testing.assert_allclose(xdot, p)
    # magnetic forces do no work; potential work cancels kinetic change
    gx = np.array([_grad(lambda y, i=i: calogero_monopole_energy(
        SPEC, np.where(np.arange(3)[:, None] == i, y, x), p), x[i]) for i in range(3)])
    assert abs(np.sum(gx * xdot) + np.sum(p * pdot)) < 1e-7


def test_nbody_relabeling_covariance(rng):
    perm = [1, 2, 0]
    p = rng.normal(size=X0.shape)
    spec_p = NBodySpec(np.array(SPEC.e)[perm], np.array(SPEC.g)[perm], SPEC.omega)
    _, pdot = _nbody_rhs(SPEC, X0, p)
    _, pdot_p = _nbody_rhs(spec_p, X0[perm], p[perm])
    np.testing.assert_allclose(pdot_p, pdot[perm], rtol=1e-13, atol=1e-14)


def test_nbody_zero_charge_is_decoupled_oscillators():
    spec = NBodySpec((0.0,) * 3, (0.0,) * 3, omega=1.3)
    traj = integrate_nbody(spec, X0, P0, IntegratorConfig("rk4", 1e-3, 5.0, stride=1000))
    t = traj.times[:, None, None]
    w = 1.3
    exact = X0 * np.cos(w * t) + P0 / w * np.sin(w * t)
    np.testing.assert_allclose(traj.x, exact, atol=1e-8)


def test_nbody_energy_conservation():
    traj = integrate_nbody(SPEC, X0, P0, IntegratorConfig("rk4", 1e-3, 20.0, stride=200))
    E = energy_series(traj)
    assert np.max(np.abs(E - E[0])) / abs(E[0]) < 1e-7


# -- Poincare sections ---------------------------------------------------------

def test_section_of_precessing_orbit_is_a_curve():
    system = SystemSpec(FLAT, (), Sum((Coulomb(-1.0), Oscillator(0.02))), 1.0, Replacement.NONE)
    st = PhaseState([1.0, 0.0, 0.0], [0.2, 0.9, 0.0])
    res = poincare_section(system, st, Section((0, 0, 0), (0, 1, 0), 0), 120, 1e-3, 5e3)
    assert res.complete
    np.testing.assert_allclose(res.x[:, 1], 0.0, atol=1e-9)
    pts = np.column_stack([np.abs(res.x[:, 0]), res.pi[:, 0] * np.sign(res.x[:, 0])])
    assert closed_curve_deviation(pts) < 1e-3


def test_section_crossings_are_on_the_plane_and_upward():
    two = (DyonCenter((0, 0, 1.0), g=1.0, q=-2.0), DyonCenter((0, 0, -1.0), g=1.0, q=-2.0))
    system = SystemSpec(FLAT, two, Zero(), 1.0, Replacement.MULTI_CENTER)
    st = PhaseState([0.8, 0.0, 0.0], [0.0, 0.2834026171580171, 1.3883836076129417])
    res = poincare_section(system, st, Section(), 50, 1e-3, 1e4)
    assert res.complete
    np.testing.assert_allclose(res.x[:, 2], 0.0, atol=1e-9)
    assert np.all(res.pi[:, 2] > 0)
    E = [evaluate_hamiltonian(system, PhaseState(x, p)) for x, p in zip(res.x, res.pi)]
    np.testing.assert_allclose(E, E[0], atol=1e-9)


def test_curve_deviation_discriminates(rng):
    t = np.sort(rng.uniform(0, 2 * np.pi, 300))
    ellipse = np.column_stack([3 * np.cos(t) + 1, 0.5 * np.sin(t) - 2])
    assert closed_curve_deviation(ellipse) < 1e-10
    scatter = rng.normal(size=(300, 2))
    assert closed_curve_deviation(scatter) > 0.05
    with pytest.raises(DomainError):
        closed_curve_deviation(ellipse[:5])
