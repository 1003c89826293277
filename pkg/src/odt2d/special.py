"""Bessel and Hankel function evaluation.

Self-contained so the package carries no runtime dependency beyond numpy.
Orders 0 and 1 (all the free-space kernel needs) use truncated power
series below the split point and the Hankel asymptotic expansion above
it; the split sits at x = 12, where both branches are accurate to about
1e-11 absolute (the contract is 1e-7).  Higher integer orders, needed
only by the cylindrical-harmonic oracle, come from downward recurrence
(J, Wronskian-normalized) and upward recurrence (Y) and inherit that
accuracy (target 1e-9).
"""

from __future__ import annotations

import math

import numpy as np

__all__ = [
    "bessel_j0y0j1y1",
    "hankel0",
    "hankel1",
    "bessel_jn_table",
    "bessel_yn_table",
    "hankel_n_table",
]

_EULER_GAMMA = 0.5772156649015328606
_SPLIT = 12.0
_SERIES_TERMS = 48
_ASYMPTOTIC_TERMS = 21


def _series_j0y0j1y1(x: np.ndarray) -> tuple[np.ndarray, ...]:
    # Ascending series, adequate to ~1e-11 absolute up to the split point.
    half = 0.5 * x
    q = half * half  # (x/2)^2
    j0 = np.ones_like(x)
    j1 = half.copy()
    s0 = np.zeros_like(x)  # sum H_k (-1)^(k+1) (x/2)^(2k) / (k!)^2
    s1 = np.zeros_like(x)  # sum (H_k + H_{k+1}) (-1)^k (x/2)^(2k+1) / (k! (k+1)!)
    t0 = np.ones_like(x)   # (x/2)^(2k) / (k!)^2
    t1 = half.copy()       # (x/2)^(2k+1) / (k! (k+1)!)
    hk = 0.0
    sign = 1.0
    s1 += t1 * (hk + 1.0)  # k = 0 term of the Y1 sum
    for k in range(1, _SERIES_TERMS):
        t0 = t0 * q / (k * k)
        t1 = t1 * q / (k * (k + 1))
        hk += 1.0 / k
        sign = -sign
        j0 += sign * t0
        j1 += sign * t1
        s0 += -sign * hk * t0
        s1 += sign * (hk + hk + 1.0 / (k + 1)) * t1
    log_half = np.log(half)
    c = log_half + _EULER_GAMMA
    y0 = (2.0 / math.pi) * (c * j0 + s0)
    y1 = (2.0 / math.pi) * (c * j1) - 2.0 / (math.pi * x) - s1 / math.pi
    return j0, y0, j1, y1


def _asymptotic_h0h1(x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    # H_n^(1)(x) ~ sqrt(2/(pi x)) e^{i(x - n pi/2 - pi/4)} sum_m i^m a_m(n) / x^m
    amp = np.sqrt(2.0 / (math.pi * x))
    out = []
    for n in (0, 1):
        mu = 4.0 * n * n
        coef = 1.0
        term = np.ones_like(x, dtype=np.complex128)
        acc = term.copy()
        for m in range(1, _ASYMPTOTIC_TERMS):
            coef *= (mu - (2 * m - 1) ** 2) / (8.0 * m)
            term = term * (1j / x)
            acc += coef * term
        phase = np.exp(1j * (x - n * math.pi / 2.0 - math.pi / 4.0))
        out.append(amp * phase * acc)
    return out[0], out[1]


def _j0y0j1y1_arrays(x: np.ndarray) -> tuple[np.ndarray, ...]:
    x = np.asarray(x, dtype=np.float64)
    if np.any(x <= 0.0) or not np.all(np.isfinite(x)):
        raise ValueError("Bessel evaluation requires x > 0 (Y is singular at 0)")
    j0 = np.empty_like(x)
    y0 = np.empty_like(x)
    j1 = np.empty_like(x)
    y1 = np.empty_like(x)
    small = x <= _SPLIT
    if np.any(small):
        a, b, c, d = _series_j0y0j1y1(x[small])
        j0[small], y0[small], j1[small], y1[small] = a, b, c, d
    big = ~small
    if np.any(big):
        h0, h1 = _asymptotic_h0h1(x[big])
        j0[big], y0[big] = h0.real, h0.imag
        j1[big], y1[big] = h1.real, h1.imag
    return j0, y0, j1, y1


def bessel_j0y0j1y1(x):
    """J0, Y0, J1, Y1 at ``x > 0`` (scalar or array)."""
    arr = np.atleast_1d(np.asarray(x, dtype=np.float64))
    j0, y0, j1, y1 = _j0y0j1y1_arrays(arr)
    if np.isscalar(x) or np.ndim(x) == 0:
        return float(j0[0]), float(y0[0]), float(j1[0]), float(y1[0])
    return j0, y0, j1, y1


def hankel0(x):
    """Outgoing Hankel function of order 0, ``J0(x) + i Y0(x)``, for x > 0."""
    arr = np.atleast_1d(np.asarray(x, dtype=np.float64))
    j0, y0, _, _ = _j0y0j1y1_arrays(arr)
    h = j0 + 1j * y0
    if np.isscalar(x) or np.ndim(x) == 0:
        return complex(h[0])
    return h


def hankel1(x):
    """Outgoing Hankel function of order 1, ``J1(x) + i Y1(x)``, for x > 0."""
    arr = np.atleast_1d(np.asarray(x, dtype=np.float64))
    _, _, j1, y1 = _j0y0j1y1_arrays(arr)
    h = j1 + 1j * y1
    if np.isscalar(x) or np.ndim(x) == 0:
        return complex(h[0])
    return h


_RENORM = 1e250


def bessel_jn_table(m_max: int, x: np.ndarray) -> np.ndarray:
    """J_m(x) for m = 0..m_max, shaped (m_max + 1, len(x)).

    Downward recurrence normalized through the even-order identity
    ``J0 + 2 sum_k J_2k = 1`` (pure-rounding accuracy; the Wronskian
    ``J1 Y0 - J0 Y1 = 2/(pi x)`` would cap it at the Y accuracy near
    the series/asymptotic split).  x must be positive; handle x == 0
    separately (J_0 = 1, J_m = 0).
    """
    x = np.asarray(x, dtype=np.float64).reshape(-1)
    if np.any(x <= 0.0):
        raise ValueError("bessel_jn_table requires x > 0")
    orders = max(m_max, 1)
    start = int(max(orders, math.ceil(float(x.max())))) + 1
    start += max(15, int(math.sqrt(40.0 * start)) + 1)
    if start % 2:
        start += 1
    out = np.zeros((orders + 2, x.size))
    jp = np.zeros_like(x)            # unnormalized J_{k+1}
    jc = np.full_like(x, 1e-30)      # unnormalized J_k
    even_sum = jc.copy()             # accumulates J_0 + 2 sum J_2k
    if start <= orders + 1:
        out[start] = jc
    for k in range(start, 0, -1):
        jm = (2.0 * k / x) * jc - jp
        jp, jc = jc, jm
        if k - 1 <= orders + 1:
            out[k - 1] = jc
        if (k - 1) % 2 == 0:
            even_sum = even_sum + (jc if k == 1 else 2.0 * jc)
        big = np.abs(jc) > _RENORM
        if np.any(big):
            jc = np.where(big, jc / _RENORM, jc)
            jp = np.where(big, jp / _RENORM, jp)
            even_sum = np.where(big, even_sum / _RENORM, even_sum)
            out[:, big] /= _RENORM
    return out[: m_max + 1] / even_sum


def bessel_yn_table(m_max: int, x: np.ndarray) -> np.ndarray:
    """Y_m(x) for m = 0..m_max via upward recurrence (stable: Y grows)."""
    x = np.asarray(x, dtype=np.float64).reshape(-1)
    _, y0, _, y1 = _j0y0j1y1_arrays(x)
    out = np.empty((m_max + 1, x.size))
    out[0] = y0
    if m_max >= 1:
        out[1] = y1
    for k in range(1, m_max):
        out[k + 1] = (2.0 * k / x) * out[k] - out[k - 1]
    return out


def hankel_n_table(m_max: int, x: np.ndarray) -> np.ndarray:
    """H_m^(1)(x) for m = 0..m_max, shaped (m_max + 1, len(x))."""
    return bessel_jn_table(m_max, x) + 1j * bessel_yn_table(m_max, x)
