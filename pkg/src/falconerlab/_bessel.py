"""Bessel J evaluation for integer and half-integer orders.

The lab only needs J_nu with 2*nu a nonnegative integer (ambient spheres
S^{n-1} give nu = (n-2)/2).  Arguments split at 25:

* x > 25: 4-term Hankel asymptotics,
      J_nu(x) ~ sqrt(2/(pi x)) (P cos chi - Q sin chi),
  chi = x - (nu/2 + 1/4) pi, with P, Q each truncated after four terms.
* x <= 25, integer nu: trapezoid rule on the integral representation
      J_n(x) = (1/pi) int_0^pi cos(n t - x sin t) dt,
  which is exact up to terms J_{2K-n}(x) (K = 64 nodes, negligible for
  x <= 25).  A truncated power series is useless this close to 25: the
  30-term truncation error is O(10) and float64 cancellation caps accuracy
  near 1e-7, so the quadrature form replaces it.
* x <= 25, half-integer nu: ascending series for x < 12 (no cancellation
  there), elementary closed forms plus upward recurrence for 12 <= x <= 25
  (stable since x > nu throughout).
"""
from __future__ import annotations

import math

import numpy as np

from .errors import DomainError

SWITCH_ARGUMENT = 25.0
_QUAD_NODES = 64


def _hankel(nu: float, x: np.ndarray) -> np.ndarray:
    mu = 4.0 * nu * nu
    a = [1.0]
    for k in range(1, 8):
        a.append(a[-1] * (mu - (2 * k - 1) ** 2) / (8.0 * k))
    ix = 1.0 / x
    ix2 = ix * ix
    p = a[0] + ix2 * (-a[2] + ix2 * (a[4] - ix2 * a[6]))
    q = ix * (a[1] + ix2 * (-a[3] + ix2 * (a[5] - ix2 * a[7])))
    chi = x - (0.5 * nu + 0.25) * math.pi
    return np.sqrt(2.0 / (math.pi * x)) * (p * np.cos(chi) - q * np.sin(chi))


def _jn_quadrature(n: int, x: np.ndarray) -> np.ndarray:
    theta = np.linspace(0.0, math.pi, _QUAD_NODES + 1)
    w = np.full(_QUAD_NODES + 1, 1.0 / _QUAD_NODES)
    w[0] *= 0.5
    w[-1] *= 0.5
    phase = n * theta[None, :] - x[:, None] * np.sin(theta)[None, :]
    return np.cos(phase) @ w


def _series(nu: float, x: np.ndarray) -> np.ndarray:
    half = 0.5 * x
    term = half**nu / math.gamma(nu + 1.0)
    out = term.copy()
    h2 = half * half
    for m in range(1, 48):
        term = term * (-h2) / (m * (m + nu))
        out += term
        if np.all(np.abs(term) <= 1e-18 * (np.abs(out) + 1e-30)):
            break
    return out


def _half_integer_recurrence(nu: float, x: np.ndarray) -> np.ndarray:
    pref = np.sqrt(2.0 / (math.pi * x))
    jm = pref * np.sin(x)                       # J_{1/2}
    if nu == 0.5:
        return jm
    jc = pref * (np.sin(x) / x - np.cos(x))     # J_{3/2}
    order = 1.5
    while order < nu - 0.25:
        jm, jc = jc, (2.0 * order / x) * jc - jm
        order += 1.0
    return jc


def bessel_j(nu: float, x) -> np.ndarray:
    """J_nu(x) for nu a nonnegative integer or half-integer, x >= 0 array."""
    twice = 2.0 * nu
    if nu < 0 or abs(twice - round(twice)) > 1e-12:
        raise DomainError("order must be a nonnegative integer or half-integer")
    x = np.asarray(x, dtype=float)
    scalar = x.ndim == 0
    x = np.atleast_1d(x)
    if np.any(x < 0):
        raise DomainError("argument must be nonnegative")
    out = np.empty_like(x)
    small = x <= SWITCH_ARGUMENT
    if np.any(small):
        xs = x[small]
        if float(nu).is_integer():
            out[small] = _jn_quadrature(int(nu), xs)
        else:
            res = np.empty_like(xs)
            lo = xs < 12.0
            if np.any(lo):
                res[lo] = _series(nu, xs[lo])
            if np.any(~lo):
                res[~lo] = _half_integer_recurrence(nu, xs[~lo])
            out[small] = res
    if np.any(~small):
        out[~small] = _hankel(nu, x[~small])
    return out[0] if scalar else out
