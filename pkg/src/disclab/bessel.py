"""Bessel functions J_ν of the first kind for ν ∈ {0, 1/2, 1, 3/2}.

Integer orders use the power series for x <= 8, the trapezoidal rule on
Bessel's integral for 8 < x <= 40 (periodic integrand, so it converges
geometrically), and Hankel's asymptotic expansion beyond. Half-integer
orders use their elementary closed forms, with the series near zero.
"""
import math

import numpy as np

SERIES_MAX = 8.0
HANKEL_MIN = 40.0


def _series(nu, x, terms=40):
    x = np.asarray(x, dtype=float)
    h = 0.5 * x
    out = np.zeros_like(x)
    term = h ** nu / math.gamma(nu + 1)
    out = out + term
    hh = h * h
    for k in range(1, terms):
        term = -term * hh / (k * (k + nu))
        out = out + term
    return out


def _integral(n, x, m=None):
    # J_n(x) = (1/π) ∫_0^π cos(nτ − x sin τ) dτ, trapezoid on m panels
    x = np.asarray(x, dtype=float)
    m = m or int(HANKEL_MIN) + 48
    tau = np.pi * np.arange(m + 1) / m
    w = np.full(m + 1, 1.0)
    w[0] = w[-1] = 0.5
    vals = np.cos(n * tau[None, :] - x.reshape(-1, 1) * np.sin(tau)[None, :])
    return (vals @ w / m).reshape(x.shape)


def _hankel(nu, x, max_terms=60):
    x = np.asarray(x, dtype=float)
    mu = 4.0 * nu * nu
    chi = x - (0.5 * nu + 0.25) * np.pi
    P = np.ones_like(x)
    Q = np.zeros_like(x)
    a = 1.0
    last = np.full(x.shape, np.inf)
    active = np.ones(x.shape, dtype=bool)
    for k in range(1, max_terms):
        a = a * (mu - (2 * k - 1) ** 2) / (k * 8.0)
        with np.errstate(over="ignore"):
            term = a / x ** k
        mag = np.abs(term)
        active &= mag < last
        if not active.any() or a == 0:
            break
        sign = (-1) ** (k // 2)
        if k % 2 == 0:
            P = P + np.where(active, sign * term, 0.0)
        else:
            Q = Q + np.where(active, sign * term, 0.0)
        last = mag
    return np.sqrt(2.0 / (np.pi * x)) * (P * np.cos(chi) - Q * np.sin(chi))


def besselj(nu, x):
    """J_ν(x) for ν in {0, 0.5, 1, 1.5}; x may be an array, negative x is folded."""
    x = np.asarray(x, dtype=float)
    ax = np.abs(x)
    if nu in (0.5, 1.5):
        out = np.empty_like(ax)
        small = ax < 1.0
        out[small] = _series(nu, ax[small])
        xs = ax[~small]
        s, c = np.sin(xs), np.cos(xs)
        pref = np.sqrt(2.0 / (np.pi * xs))
        out[~small] = pref * s if nu == 0.5 else pref * (s / xs - c)
        # J_ν(−x) = (−1)^ν J_ν(x) only for integer ν; half-integer orders need x >= 0
        if np.any(x < 0):
            raise ValueError("half-integer order needs x >= 0")
        return out
    if nu not in (0, 1):
        raise ValueError(f"order {nu} not supported")
    n = int(nu)
    out = np.empty_like(ax)
    a = ax <= SERIES_MAX
    b = (ax > SERIES_MAX) & (ax <= HANKEL_MIN)
    c = ax > HANKEL_MIN
    out[a] = _series(n, ax[a])
    out[b] = _integral(n, ax[b])
    out[c] = _hankel(n, ax[c])
    if n == 1:
        out = np.where(x < 0, -out, out)
    return out


def spherical_j1_ratio(x):
    """3 j₁(x)/x = 3(sin x − x cos x)/x³, the normalized 3-ball transform profile."""
    x = np.asarray(x, dtype=float)
    out = np.ones_like(x)
    small = np.abs(x) < 1e-2
    xs = x[small]
    out[small] = 1 - xs ** 2 / 10 + xs ** 4 / 280
    xl = x[~small]
    out[~small] = 3 * (np.sin(xl) - xl * np.cos(xl)) / xl ** 3
    return out


def jinc(x):
    """2 J₁(x)/x with value 1 at 0, the normalized disk transform profile."""
    x = np.asarray(x, dtype=float)
    out = np.ones_like(x)
    nz = x != 0
    out[nz] = 2 * besselj(1, x[nz]) / x[nz]
    return out
