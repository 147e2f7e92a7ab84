"""Independent reference implementations used as test oracles.

None of these share code paths with the package beyond the parameter
dataclasses: the random stream is recomputed with Python integers, jump
times come from thinning instead of inversion, roots from mpmath and the
density from nested adaptive quadrature of the ratio recursion.
"""
from __future__ import annotations

import math

import mpmath
import numpy as np
from scipy.integrate import quad

MASK = (1 << 64) - 1
GOLDEN = 0x9E3779B97F4A7C15


def splitmix_uniform(key: int, counter: int) -> float:
    """Draw ``counter`` (0-based) of the stream with ``key``, in pure Python."""
    z = (key + (counter + 1) * GOLDEN) & MASK
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK
    z ^= z >> 31
    return (z >> 11) / 2.0**53


def lrp_path(gammas, rhos, p_A, p_B, x0, key):
    """Scalar loop over the four-atom recursion driven by :func:`splitmix_uniform`."""
    x = x0
    xs = [x]
    for i, (g, r) in enumerate(zip(gammas, rhos)):
        u = splitmix_uniform(key, i)
        if u < x * p_A:
            x = x + g * (1 - x)
        elif u < x:
            x = x - g * r * x
        elif u < x + (1 - x) * p_B:
            x = x - g * x
        else:
            x = x + g * r * (1 - x)
        x = min(1.0, max(0.0, x))
        xs.append(x)
    return np.array(xs)


def thinning_jump_times(y0, p_A, p_B, g, rng: np.random.Generator, size: int) -> np.ndarray:
    """First jump times from ``y0`` by Lewis-Shedler thinning.

    Along the flow ``y`` moves monotonically towards ``r_A``, so the rate
    ``p_B y / g`` is bounded by ``p_B max(y0, r_A)/g``.
    """
    r_A = (1 - p_A) / p_A
    bound = p_B * max(y0, r_A) / g
    out = np.empty(size)
    for i in range(size):
        t = 0.0
        while True:
            t += rng.exponential(1.0 / bound)
            y = r_A + (y0 - r_A) * math.exp(-p_A * t)
            if rng.random() * bound <= p_B * y / g:
                out[i] = t
                break
    return out


def theta_mp(y: float) -> float:
    """Positive root of ``(e^t - 1)/t = y`` with 40-digit arithmetic."""
    mpmath.mp.dps = 40
    y = mpmath.mpf(y)
    f = lambda t: mpmath.log(mpmath.expm1(t) / t) - mpmath.log(y)
    # theta < 2 log y + 2 keeps the bracket small for large y
    lo, hi = mpmath.log(y), min(2 * (y - 1), 2 * mpmath.log(y) + 2)
    return float(mpmath.findroot(f, (lo * (1 - mpmath.mpf(10) ** -30), hi), solver="anderson"))


def fixed_point_mp(p_A, p_B, rho):
    """Root in (0, 1) of ``pi x(1-x) + rho(-(1-p_A) x^2 + (1-p_B)(1-x)^2)``."""
    mpmath.mp.dps = 40
    pi = mpmath.mpf(p_A) - p_B
    f = lambda x: pi * x * (1 - x) + rho * (-(1 - mpmath.mpf(p_A)) * x**2 + (1 - mpmath.mpf(p_B)) * (1 - x) ** 2)
    return float(mpmath.findroot(f, (mpmath.mpf(0), mpmath.mpf(1)), solver="bisect"))


def psi_rk4(p0, p_A, p_B, g, T, n):
    """Fixed-step RK4 for ``psi' = p_B (e^(g psi) - 1)/g - p_A psi``; returns (t, psi, int psi)."""
    f = lambda u: p_B * math.expm1(g * u) / g - p_A * u
    h = T / n
    t = np.linspace(0, T, n + 1)
    psi = np.empty(n + 1)
    integ = np.zeros(n + 1)
    psi[0] = p0
    for i in range(n):
        u = psi[i]
        k1 = f(u)
        k2 = f(u + 0.5 * h * k1)
        k3 = f(u + 0.5 * h * k2)
        k4 = f(u + h * k3)
        psi[i + 1] = u + h * (k1 + 2 * k2 + 2 * k3 + k4) / 6
        integ[i + 1] = integ[i] + h * (u + psi[i + 1]) / 2
    return t, psi, integ


def ratio_recursion(p_A, p_B, g, k, tau):
    """Unnormalised ``phi/F`` at ``y = r_A + (k + tau) g`` for ``k in {0, 1, 2}``.

    Uses ``(phi/F)' = G(y) e^(-r) ((y - g - r_A)/(y - r_A))^(d-1) (phi/F)(y - g)``
    with ``phi/F = 1`` on the first interval and nested adaptive quadrature.
    """
    r = p_B / p_A
    r_A = (1 - p_A) / p_A
    d = r * r_A / g

    def kern(j, t):
        y = r_A + (j + t) * g
        G = -(r / g) * (y - g) / (y - r_A)
        return G * math.exp(-r) * ((j - 1 + t) / (j + t)) ** (d - 1)

    def psi1(t):
        return 1.0 + g * quad(lambda s: kern(1, s), 0, t, limit=200, epsabs=1e-13, epsrel=1e-12)[0]

    if k == 0:
        return 1.0
    if k == 1:
        return psi1(tau)
    if k == 2:
        end1 = psi1(1.0)
        return end1 + g * quad(lambda s: kern(2, s) * psi1(s), 0, tau, limit=200, epsabs=1e-13, epsrel=1e-12)[0]
    raise ValueError("k must be 0, 1 or 2")


def beta_constant(exponent: float) -> float:
    """``1 / int_{-1}^{1} (1 - y^2)^e dy = 1 / (2^(2e+1) B(e+1, e+1))``."""
    mpmath.mp.dps = 30
    e = mpmath.mpf(exponent)
    return float(1 / (2 ** (2 * e + 1) * mpmath.beta(e + 1, e + 1)))
