"""Compiled right-hand sides and fixed-step integrators.

Systems are packed into flat float arrays so that one compiled kernel
serves every metric / potential / replacement combination.

Single-particle ``params`` layout::

    0 mu   1 eps   2 r0   3 flat flag   4 replacement mode (0 none, 1 one-center, 2 multi-center)
    5 alpha   6 omega^2   7..9 Stark field   10 delta_min   11 radial chart limit

``centers`` rows are ``(ax, ay, az, g, q)``.

N-body ``params`` is ``(omega, delta_min, N)`` and ``centers`` holds the
antisymmetric coupling matrix ``s_IJ``.

Status codes: 0 ok, 1 proximity to a center, 2 outside the metric chart,
3 implicit-midpoint fixed point not converged, 4 non-finite state.
"""
import math

import numpy as np
from numba import njit

OK, PROXIMITY, DOMAIN, NO_CONVERGENCE, NONFINITE = 0, 1, 2, 3, 4


@njit(cache=True)
def _G(r, eps, r0, flat):
    if flat:
        return 1.0
    return 4.0 * r0 * r0 / (1.0 + eps * r * r) ** 2


@njit(cache=True)
def _dG(r, eps, r0, flat):
    if flat:
        return 0.0
    return -16.0 * r0 * r0 * eps * r / (1.0 + eps * r * r) ** 3


@njit(cache=True)
def _phi(r, eps, r0, flat):
    if flat:
        return 1.0 / r
    return (1.0 - eps * r * r) / (2.0 * r0 * r)


@njit(cache=True)
def _dphi(r, eps, r0, flat):
    return -1.0 / (r * r * math.sqrt(_G(r, eps, r0, flat)))


@njit(cache=True)
def micz_rhs(y, params, centers, out):
    mu = params[0]
    eps = params[1]
    r0 = params[2]
    flat = params[3] != 0.0
    mode = int(params[4])
    alpha = params[5]
    omega2 = params[6]
    dmin = params[10]
    rlim = params[11]

    x0, x1, x2 = y[0], y[1], y[2]
    p0, p1, p2 = y[3], y[4], y[5]
    r = math.sqrt(x0 * x0 + x1 * x1 + x2 * x2)
    if r >= rlim:
        return DOMAIN
    G = _G(r, eps, r0, flat)
    c = 1.0 / (mu * G)
    v0, v1, v2 = p0 * c, p1 * c, p2 * c

    g0 = mu * omega2 * x0 + params[7]
    g1 = mu * omega2 * x1 + params[8]
    g2 = mu * omega2 * x2 + params[9]

    if (not flat) and r > 0.0:
        k = -(p0 * p0 + p1 * p1 + p2 * p2) * _dG(r, eps, r0, flat) / (2.0 * mu * G * G) / r
        g0 += k * x0
        g1 += k * x1
        g2 += k * x2
    if alpha != 0.0 or mode == 1:
        if r < dmin:
            return PROXIMITY
    if alpha != 0.0:
        k = alpha * _dphi(r, eps, r0, flat) / r
        g0 += k * x0
        g1 += k * x1
        g2 += k * x2

    b0 = 0.0
    b1 = 0.0
    b2 = 0.0
    phig = 0.0
    h0 = 0.0
    h1 = 0.0
    h2 = 0.0
    for i in range(centers.shape[0]):
        d0 = x0 - centers[i, 0]
        d1 = x1 - centers[i, 1]
        d2 = x2 - centers[i, 2]
        rc = math.sqrt(d0 * d0 + d1 * d1 + d2 * d2)
        if rc < dmin:
            return PROXIMITY
        if rc >= rlim:
            return DOMAIN
        g = centers[i, 3]
        q = centers[i, 4]
        if q != 0.0:
            k = q * _dphi(rc, eps, r0, flat) / rc
            g0 += k * d0
            g1 += k * d1
            g2 += k * d2
        if g != 0.0:
            k = g / (rc * rc * rc)
            b0 += k * d0
            b1 += k * d1
            b2 += k * d2
            if mode == 2:
                phig += g * _phi(rc, eps, r0, flat)
                k = g * _dphi(rc, eps, r0, flat) / rc
                h0 += k * d0
                h1 += k * d1
                h2 += k * d2

    if mode == 1:
        s = centers[0, 3]
        dG = _dG(r, eps, r0, flat)
        k = -s * s * (dG * r * r + 2.0 * G * r) / (2.0 * mu * G * G * r ** 4) / r
        g0 += k * x0
        g1 += k * x1
        g2 += k * x2
    elif mode == 2:
        k = phig / mu
        g0 += k * h0
        g1 += k * h1
        g2 += k * h2

    out[0] = v0
    out[1] = v1
    out[2] = v2
    # pidot = -grad H - v x B
    out[3] = -g0 - (v1 * b2 - v2 * b1)
    out[4] = -g1 - (v2 * b0 - v0 * b2)
    out[5] = -g2 - (v0 * b1 - v1 * b0)
    return OK


@njit(cache=True)
def micz_energy(y, params, centers):
    mu = params[0]
    eps = params[1]
    r0 = params[2]
    flat = params[3] != 0.0
    mode = int(params[4])
    alpha = params[5]
    omega2 = params[6]
    x0, x1, x2 = y[0], y[1], y[2]
    r2 = x0 * x0 + x1 * x1 + x2 * x2
    r = math.sqrt(r2)
    G = _G(r, eps, r0, flat)
    p2 = y[3] * y[3] + y[4] * y[4] + y[5] * y[5]
    e = p2 / (2.0 * mu * G) + 0.5 * mu * omega2 * r2
    e += params[7] * x0 + params[8] * x1 + params[9] * x2
    if alpha != 0.0:
        e += alpha * _phi(r, eps, r0, flat)
    phig = 0.0
    for i in range(centers.shape[0]):
        d0 = x0 - centers[i, 0]
        d1 = x1 - centers[i, 1]
        d2 = x2 - centers[i, 2]
        rc = math.sqrt(d0 * d0 + d1 * d1 + d2 * d2)
        if centers[i, 4] != 0.0:
            e += centers[i, 4] * _phi(rc, eps, r0, flat)
        if mode == 2:
            phig += centers[i, 3] * _phi(rc, eps, r0, flat)
    if mode == 1:
        w = centers[0, 3] / r
        e += w * w / (2.0 * G * mu)
    elif mode == 2:
        e += phig * phig / (2.0 * mu)
    return e


@njit(cache=True)
def nbody_rhs(y, params, smat, out):
    omega = params[0]
    dmin = params[1]
    n = int(params[2])
    k = 3 * n
    # W_I = sum_{J != I} s_IJ / r_IJ
    W = np.zeros(n)
    for i in range(n):
        for j in range(n):
            if i != j:
                d0 = y[3 * i] - y[3 * j]
                d1 = y[3 * i + 1] - y[3 * j + 1]
                d2 = y[3 * i + 2] - y[3 * j + 2]
                rij = math.sqrt(d0 * d0 + d1 * d1 + d2 * d2)
                if rij < dmin:
                    return PROXIMITY
                W[i] += smat[i, j] / rij
    for i in range(n):
        out[3 * i] = y[k + 3 * i]
        out[3 * i + 1] = y[k + 3 * i + 1]
        out[3 * i + 2] = y[k + 3 * i + 2]
    for i in range(n):
        f0 = -omega * omega * y[3 * i]
        f1 = -omega * omega * y[3 * i + 1]
        f2 = -omega * omega * y[3 * i + 2]
        for j in range(n):
            if i == j:
                continue
            d0 = y[3 * i] - y[3 * j]
            d1 = y[3 * i + 1] - y[3 * j + 1]
            d2 = y[3 * i + 2] - y[3 * j + 2]
            rij = math.sqrt(d0 * d0 + d1 * d1 + d2 * d2)
            inv3 = 1.0 / (rij * rij * rij)
            s = smat[i, j]
            # -dV/dx_I, V = sum_K W_K^2 / 2
            k1 = (W[i] * s + W[j] * smat[j, i]) * inv3
            f0 += k1 * d0
            f1 += k1 * d1
            f2 += k1 * d2
            # magnetic coupling through the relative velocity
            u0 = y[k + 3 * i] - y[k + 3 * j]
            u1 = y[k + 3 * i + 1] - y[k + 3 * j + 1]
            u2 = y[k + 3 * i + 2] - y[k + 3 * j + 2]
            f0 -= s * inv3 * (u1 * d2 - u2 * d1)
            f1 -= s * inv3 * (u2 * d0 - u0 * d2)
            f2 -= s * inv3 * (u0 * d1 - u1 * d0)
        out[k + 3 * i] = f0
        out[k + 3 * i + 1] = f1
        out[k + 3 * i + 2] = f2
    return OK


@njit(cache=True)
def _finite(y):
    for i in range(y.shape[0]):
        if not math.isfinite(y[i]):
            return False
    return True


@njit(cache=True)
def rk4_step(rhs, y, h, params, centers, k1, k2, k3, k4, tmp, out):
    st = rhs(y, params, centers, k1)
    if st != OK:
        return st
    for i in range(y.shape[0]):
        tmp[i] = y[i] + 0.5 * h * k1[i]
    st = rhs(tmp, params, centers, k2)
    if st != OK:
        return st
    for i in range(y.shape[0]):
        tmp[i] = y[i] + 0.5 * h * k2[i]
    st = rhs(tmp, params, centers, k3)
    if st != OK:
        return st
    for i in range(y.shape[0]):
        tmp[i] = y[i] + h * k3[i]
    st = rhs(tmp, params, centers, k4)
    if st != OK:
        return st
    for i in range(y.shape[0]):
        out[i] = y[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i])
    return OK


@njit(cache=True)
def midpoint_step(rhs, y, h, params, centers, tol, maxiter, f, mid, out):
    """Implicit midpoint ``y' = y + h f((y + y')/2)`` by fixed-point iteration."""
    n = y.shape[0]
    st = rhs(y, params, centers, f)
    if st != OK:
        return st
    for i in range(n):
        out[i] = y[i] + h * f[i]
    for _ in range(maxiter):
        for i in range(n):
            mid[i] = 0.5 * (y[i] + out[i])
        st = rhs(mid, params, centers, f)
        if st != OK:
            return st
        delta = 0.0
        for i in range(n):
            new = y[i] + h * f[i]
            scale = max(1.0, abs(new))
            delta = max(delta, abs(new - out[i]) / scale)
            out[i] = new
        if delta <= tol:
            return OK
    return NO_CONVERGENCE


@njit(cache=True)
def integrate_fixed(rhs, method, y0, h, nsteps, stride, params, centers, tol, maxiter):
    """Integrate ``nsteps`` fixed steps, storing every ``stride``-th state.

    Returns ``(samples, n_stored, status, last_step)``. ``method`` 0 is RK4,
    1 is implicit midpoint.
    """
    n = y0.shape[0]
    nout = nsteps // stride + 1
    samples = np.empty((nout, n))
    y = y0.copy()
    ynew = np.empty(n)
    k1 = np.empty(n)
    k2 = np.empty(n)
    k3 = np.empty(n)
    k4 = np.empty(n)
    tmp = np.empty(n)
    samples[0] = y
    stored = 1
    # Validate the starting point.
    st = rhs(y, params, centers, k1)
    if st != OK:
        return samples, stored, st, 0
    for step in range(1, nsteps + 1):
        if method == 0:
            st = rk4_step(rhs, y, h, params, centers, k1, k2, k3, k4, tmp, ynew)
        else:
            st = midpoint_step(rhs, y, h, params, centers, tol, maxiter, k1, tmp, ynew)
        if st == OK and not _finite(ynew):
            st = NONFINITE
        if st == OK:
            st = rhs(ynew, params, centers, k2)
        if st != OK:
            return samples, stored, st, step
        for i in range(n):
            y[i] = ynew[i]
        if step % stride == 0:
            samples[stored] = y
            stored += 1
    return samples, stored, OK, nsteps


@njit(cache=True)
def _section_value(y, point, normal):
    return normal[0] * (y[0] - point[0]) + normal[1] * (y[1] - point[1]) + normal[2] * (y[2] - point[2])


@njit(cache=True)
def _henon_rhs(rhs, y, params, centers, normal, f, out):
    """Flow reparametrised by the section coordinate; last slot is dt/dsigma."""
    st = rhs(y, params, centers, f)
    if st != OK:
        return st
    sdot = normal[0] * f[0] + normal[1] * f[1] + normal[2] * f[2]
    if sdot == 0.0:
        return NONFINITE
    n = y.shape[0]
    for i in range(n):
        out[i] = f[i] / sdot
    out[n] = 1.0 / sdot
    return OK


@njit(cache=True)
def _henon_step(rhs, y, dsigma, params, centers, normal):
    """One RK4 step of size ``dsigma`` in the section coordinate: returns (state, elapsed time, status)."""
    n = y.shape[0]
    f = np.empty(n)
    ya = np.empty(n + 1)
    ya[:n] = y
    ya[n] = 0.0
    k1 = np.empty(n + 1)
    k2 = np.empty(n + 1)
    k3 = np.empty(n + 1)
    k4 = np.empty(n + 1)
    tmp = np.empty(n + 1)
    st = _henon_rhs(rhs, ya[:n], params, centers, normal, f, k1)
    if st != OK:
        return ya, 0.0, st
    for i in range(n + 1):
        tmp[i] = ya[i] + 0.5 * dsigma * k1[i]
    st = _henon_rhs(rhs, tmp[:n], params, centers, normal, f, k2)
    if st != OK:
        return ya, 0.0, st
    for i in range(n + 1):
        tmp[i] = ya[i] + 0.5 * dsigma * k2[i]
    st = _henon_rhs(rhs, tmp[:n], params, centers, normal, f, k3)
    if st != OK:
        return ya, 0.0, st
    for i in range(n + 1):
        tmp[i] = ya[i] + dsigma * k3[i]
    st = _henon_rhs(rhs, tmp[:n], params, centers, normal, f, k4)
    if st != OK:
        return ya, 0.0, st
    for i in range(n + 1):
        ya[i] = ya[i] + dsigma / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i])
    return ya, ya[n], OK


@njit(cache=True)
def poincare_kernel(rhs, y0, h, max_steps, params, centers, point, normal, direction, n_cross, tol):
    n = y0.shape[0]
    out = np.empty((n_cross, n + 1))
    y = y0.copy()
    ynew = np.empty(n)
    yc = np.empty(n)
    f = np.empty(n)
    k1 = np.empty(n)
    k2 = np.empty(n)
    k3 = np.empty(n)
    k4 = np.empty(n)
    tmp = np.empty(n)
    t = 0.0
    sig = _section_value(y, point, normal)
    count = 0
    for step in range(max_steps):
        st = rk4_step(rhs, y, h, params, centers, k1, k2, k3, k4, tmp, ynew)
        if st != OK:
            return out, count, st
        signew = _section_value(ynew, point, normal)
        up = sig < 0.0 and signew >= 0.0
        down = sig > 0.0 and signew <= 0.0
        if (up and direction >= 0) or (down and direction <= 0):
            ya, tau, st = _henon_step(rhs, y, -sig, params, centers, normal)
            if st != OK or not (0.0 <= tau <= 2.0 * h):
                tau = h * sig / (sig - signew)
            # Newton polish of the crossing time along a single RK4 step from y.
            for _ in range(50):
                st = rk4_step(rhs, y, tau, params, centers, k1, k2, k3, k4, tmp, yc)
                if st != OK:
                    return out, count, st
                st = rhs(yc, params, centers, f)
                if st != OK:
                    return out, count, st
                sdot = normal[0] * f[0] + normal[1] * f[1] + normal[2] * f[2]
                if sdot == 0.0:
                    break
                dtau = -_section_value(yc, point, normal) / sdot
                tau += dtau
                if abs(dtau) <= tol:
                    break
            st = rk4_step(rhs, y, tau, params, centers, k1, k2, k3, k4, tmp, yc)
            out[count, 0] = t + tau
            for i in range(n):
                out[count, i + 1] = yc[i]
            count += 1
            if count == n_cross:
                return out, count, OK
        for i in range(n):
            y[i] = ynew[i]
        sig = signew
        t += h
    return out, count, OK
