"""Angular-momentum algebra for monopole harmonics.

Monopole harmonics are built from Wigner small-d functions,

    Y_{s,l,m}(theta, phi) = sqrt((2l+1)/(4 pi)) d^l_{m,s}(theta) exp(i m phi),

defined for ``l >= |s|`` (integer or half-integer, ``l - |s|`` integral).
With this choice ``<cos theta> = m s / (l (l+1))``, matching the classical
cone ``cos theta = s/|J|`` for ``J = x x pi + s x/|x|``.
"""
from __future__ import annotations

import math
from fractions import Fraction
from functools import lru_cache

import numpy as np

from .errors import DomainError

__all__ = [
    "is_half_integer",
    "wigner_3j",
    "wigner_small_d",
    "monopole_harmonic",
    "dipole_matrix_element",
    "COMPONENTS",
]

COMPONENTS = ("z", "plus", "minus")
_Q = {"z": 0, "plus": 1, "minus": -1}
# r_hat components in terms of d^1_{q0}: cos = d^1_00, sin e^{+i phi} = -sqrt2 d^1_10 e^{i phi}, ...
_C = {"z": 1.0, "plus": -math.sqrt(2.0), "minus": math.sqrt(2.0)}


def is_half_integer(x, tol=1e-9) -> bool:
    return abs(2 * x - round(2 * x)) < tol


def _two(x) -> int:
    """Twice a (half-)integer, as an exact int."""
    if not is_half_integer(x):
        raise DomainError(f"{x!r} is not an integer or half-integer")
    return int(round(2 * x))


@lru_cache(maxsize=65536)
def _wigner_3j_twice(tj1, tj2, tj3, tm1, tm2, tm3) -> float:
    if tm1 + tm2 + tm3 != 0:
        return 0.0
    if tj3 > tj1 + tj2 or tj3 < abs(tj1 - tj2):
        return 0.0
    if (tj1 + tj2 + tj3) % 2:
        return 0.0
    for tj, tm in ((tj1, tm1), (tj2, tm2), (tj3, tm3)):
        if abs(tm) > tj or (tj - tm) % 2:
            return 0.0
    # all combinations below are non-negative integers
    a = (tj1 + tj2 - tj3) // 2
    b = (tj1 - tj2 + tj3) // 2
    c = (-tj1 + tj2 + tj3) // 2
    big = (tj1 + tj2 + tj3) // 2 + 1
    j1pm, j1mm = (tj1 + tm1) // 2, (tj1 - tm1) // 2
    j2pm, j2mm = (tj2 + tm2) // 2, (tj2 - tm2) // 2
    j3pm, j3mm = (tj3 + tm3) // 2, (tj3 - tm3) // 2
    f = math.factorial
    tri_sq = Fraction(f(a) * f(b) * f(c), f(big))
    pref_sq = tri_sq * f(j1pm) * f(j1mm) * f(j2pm) * f(j2mm) * f(j3pm) * f(j3mm)
    # Racah sum over k
    t1 = (tj3 - tj2 + tm1) // 2  # j3 - j2 + m1
    t2 = (tj3 - tj1 - tm2) // 2  # j3 - j1 - m2
    kmin = max(0, -t1, -t2)
    kmax = min(a, j1mm, j2pm)
    total = Fraction(0)
    for k in range(kmin, kmax + 1):
        den = f(k) * f(a - k) * f(j1mm - k) * f(j2pm - k) * f(t1 + k) * f(t2 + k)
        total += Fraction((-1) ** k, den)
    if total == 0:
        return 0.0
    phase = -1 if ((tj1 - tj2 - tm3) // 2) % 2 else 1
    # only the final square root of an exact rational is done in floating point
    return math.copysign(math.sqrt(float(total * total * pref_sq)), phase * total)


def wigner_3j(j1, j2, j3, m1, m2, m3) -> float:
    """Wigner 3j symbol by the Racah formula in exact rational arithmetic.

    Arguments outside the physical domain (selection rules violated) give 0.
    """
    return _wigner_3j_twice(_two(j1), _two(j2), _two(j3), _two(m1), _two(m2), _two(m3))


def wigner_small_d(j, mp, m, theta):
    """Wigner ``d^j_{m' m}(theta)`` from the explicit factorial sum (vectorised in theta)."""
    tj, tmp, tm = _two(j), _two(mp), _two(m)
    if abs(tmp) > tj or abs(tm) > tj or (tj - tmp) % 2 or (tj - tm) % 2:
        raise DomainError(f"invalid d-function indices j={j}, m'={mp}, m={m}")
    jpm, jmm = (tj + tm) // 2, (tj - tm) // 2
    jpmp, jmmp = (tj + tmp) // 2, (tj - tmp) // 2
    f = math.factorial
    pref = math.sqrt(f(jpmp) * f(jmmp) * f(jpm) * f(jmm))
    theta = np.asarray(theta, dtype=float)
    c = np.cos(theta / 2)
    s = np.sin(theta / 2)
    dm = (tmp - tm) // 2  # m' - m
    out = np.zeros_like(theta)
    for k in range(max(0, -dm), min(jpm, jmmp) + 1):
        den = f(jpm - k) * f(k) * f(jmmp - k) * f(dm + k)
        out = out + ((-1) ** (dm + k)) / den * c ** (tj - 2 * k - dm) * s ** (dm + 2 * k)
    return pref * out


def monopole_harmonic(s, l, m, theta, phi):
    """``Y_{s,l,m}`` on a grid of angles (complex)."""
    if l < abs(s) - 1e-12 or not is_half_integer(l - s) or not is_half_integer(l):
        raise DomainError(f"monopole harmonic needs l >= |s| with l - s integral (s={s}, l={l})")
    if _two(l - s) % 2:
        raise DomainError(f"l - s must be an integer (s={s}, l={l})")
    return math.sqrt((2 * l + 1) / (4 * math.pi)) * wigner_small_d(l, m, s, theta) * np.exp(1j * m * np.asarray(phi))


def dipole_matrix_element(s, l, m, lp, mp, component: str = "z") -> float:
    """Angular matrix element ``<s,l',m'| rhat_c |s,l,m>`` for ``c`` in ``z, plus, minus``.

    ``plus``/``minus`` are ``(x +- i y)/r``. Closed form via two 3j symbols:

        c_q sqrt((2l+1)(2l'+1)) (-1)^(m'+s-2l) (1 l l'; q m -m') (1 l l'; 0 s -s)
    """
    if component not in _Q:
        raise DomainError(f"unknown dipole component {component!r}")
    for ll in (l, lp):
        if ll < abs(s) - 1e-12 or _two(ll - s) % 2:
            raise DomainError(f"angular momentum {ll} not allowed for monopole number s={s}")
    q = _Q[component]
    if _two(mp) != _two(m) + 2 * q:
        return 0.0
    w1 = wigner_3j(1, l, lp, q, m, -mp)
    if w1 == 0.0:
        return 0.0
    w2 = wigner_3j(1, l, lp, 0, s, -s)
    phase = -1.0 if (_two(mp) + _two(s) - 2 * _two(l)) // 2 % 2 else 1.0
    return _C[component] * math.sqrt((2 * l + 1) * (2 * lp + 1)) * phase * w1 * w2
