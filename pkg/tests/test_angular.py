import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from sympy import Rational
from sympy.physics.wigner import wigner_3j as sympy_3j

from dyonlab.angular import (COMPONENTS, dipole_matrix_element, monopole_harmonic, wigner_3j,
                             wigner_small_d)
from dyonlab.errors import DomainError

half = st.integers(0, 12).map(lambda k: k / 2)


@settings(max_examples=300, deadline=None)
@given(j1=half, j2=half, j3=half, m1=st.integers(-12, 12), m2=st.integers(-12, 12))
def test_3j_against_sympy(j1, j2, j3, m1, m2):
    m1, m2 = m1 / 2, m2 / 2
    m3 = -m1 - m2
    ref = float(sympy_3j(*(_rat(v) for v in (j1, j2, j3, m1, m2, m3))))
    assert wigner_3j(j1, j2, j3, m1, m2, m3) == pytest.approx(ref, abs=1e-14)


def _rat(v):
    return Rational(int(round(2 * v)), 2)


def test_3j_symmetries():
    args = (2, 1.5, 1.5, 1, -0.5, -0.5)
    j1, j2, j3, m1, m2, m3 = args
    base = wigner_3j(*args)
    sign = (-1) ** int(round(j1 + j2 + j3))
    assert wigner_3j(j2, j3, j1, m2, m3, m1) == pytest.approx(base)
    assert wigner_3j(j2, j1, j3, m2, m1, m3) == pytest.approx(sign * base)
    assert wigner_3j(j1, j2, j3, -m1, -m2, -m3) == pytest.approx(sign * base)


def test_3j_orthogonality():
    j1, j2 = 1.5, 2
    for j3 in (0.5, 1.5, 2.5, 3.5):
        for jp in (0.5, 1.5, 2.5, 3.5):
            m3 = 0.5
            s = 0.0
            for m1 in (-1.5, -0.5, 0.5, 1.5):
                m2 = -m3 - m1
                if abs(m2) <= j2:
                    s += wigner_3j(j1, j2, j3, m1, m2, m3) * wigner_3j(j1, j2, jp, m1, m2, m3)
            assert s == pytest.approx((j3 == jp) / (2 * j3 + 1), abs=1e-14)


def test_3j_selection_zeros():
    assert wigner_3j(1, 1, 3, 0, 0, 0) == 0.0
    assert wigner_3j(1, 1, 1, 0, 0, 0) == 0.0
    assert wigner_3j(1, 1, 1, 1, 1, -1) == 0.0


def test_small_d_known_values():
    t = np.linspace(0.1, 3.0, 7)
    np.testing.assert_allclose(wigner_small_d(1, 0, 0, t), np.cos(t), atol=1e-15)
    np.testing.assert_allclose(wigner_small_d(0.5, 0.5, 0.5, t), np.cos(t / 2), atol=1e-15)
    np.testing.assert_allclose(wigner_small_d(1, 1, 0, t), -np.sin(t) / math.sqrt(2), atol=1e-15)


def _gram(s, lmax, n=64):
    u, w = np.polynomial.legendre.leggauss(n)
    theta = np.arccos(u)
    phi = 2 * np.pi * np.arange(2 * n) / (2 * n)
    T, P = np.meshgrid(theta, phi, indexing="ij")
    W = np.outer(w, np.full(2 * n, 2 * np.pi / (2 * n)))
    labels, Ys = [], []
    l = abs(s)
    while l <= lmax:
        for k in range(int(round(2 * l)) + 1):
            m = -l + k
            labels.append((l, m))
            Ys.append(monopole_harmonic(s, l, m, T, P))
        l += 1
    Y = np.array(Ys).reshape(len(Ys), -1)
    return Y.conj() @ (W.ravel() * Y).T


@pytest.mark.parametrize("s", [0, 0.5, 1, 1.5, 2])
def test_monopole_harmonics_orthonormal(s):
    gram = _gram(s, abs(s) + 2)
    np.testing.assert_allclose(gram, np.eye(len(gram)), atol=1e-12)


def test_harmonic_requires_l_at_least_s():
    with pytest.raises(DomainError):
        monopole_harmonic(1, 0, 0, 0.3, 0.2)
    with pytest.raises(DomainError):
        monopole_harmonic(1, 1.5, 0.5, 0.3, 0.2)


def _quadrature_element(s, l, m, lp, mp, component, n=96):
    # direct 2D quadrature of <s,l',m'| rhat_c |s,l,m>
    u, w = np.polynomial.legendre.leggauss(n)
    theta = np.arccos(u)
    phi = 2 * np.pi * np.arange(2 * n) / (2 * n)
    T, P = np.meshgrid(theta, phi, indexing="ij")
    W = np.outer(w, np.full(2 * n, 2 * np.pi / (2 * n)))
    f = {"z": np.cos(T), "plus": np.sin(T) * np.exp(1j * P), "minus": np.sin(T) * np.exp(-1j * P)}[component]
    val = np.sum(W * np.conj(monopole_harmonic(s, lp, mp, T, P)) * f * monopole_harmonic(s, l, m, T, P))
    assert abs(val.imag) < 1e-13
    return val.real


@pytest.mark.parametrize("s", [0, 0.5, 1, 1.5])
def test_dipole_elements_match_quadrature(s):
    l0 = abs(s)
    for l in (l0, l0 + 1):
        for lp in (l0, l0 + 1, l0 + 2):
            for m in np.arange(-l, l + 1):
                for comp, q in zip(COMPONENTS, (0, 1, -1)):
                    mp = m + q
                    if abs(mp) > lp:
                        continue
                    closed = dipole_matrix_element(s, l, m, lp, mp, comp)
                    assert closed == pytest.approx(_quadrature_element(s, l, m, lp, mp, comp), abs=1e-12)


@pytest.mark.parametrize("s,l,m", [(1, 1, 1), (1, 2, -1), (0.5, 1.5, 0.5), (2, 3, 2)])
def test_mean_cos_theta(s, l, m):
    assert dipole_matrix_element(s, l, m, l, m, "z") == pytest.approx(m * s / (l * (l + 1)), rel=1e-13)


def test_dipole_rejects_unknown_component():
    with pytest.raises(DomainError):
        dipole_matrix_element(0, 1, 0, 1, 0, "x")
