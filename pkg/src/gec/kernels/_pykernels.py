"""Vectorised numpy implementations of the scalar kernels.

All functions take equal-length 1-D float64 arrays and return new arrays.
Broadcasting is handled by the dispatcher in :mod:`gec.kernels`.
"""
import numpy as np
from scipy.special import expit, log_ndtr

_LOG_SQRT_2PI = 0.5 * np.log(2.0 * np.pi)


def _inv_mills(t):
    # phi(t) / Phi(t), stable for large negative t
    return np.exp(-0.5 * t * t - _LOG_SQRT_2PI - log_ndtr(t))


def soft_threshold(r, thr):
    return np.sign(r) * np.maximum(np.abs(r) - thr, 0.0)


def bg_denoise(r, gamma, rho, mu, var):
    """Posterior mean and variance under a spike-and-slab prior."""
    s0 = 1.0 / gamma
    sv = var + s0
    with np.errstate(divide="ignore"):
        log_spike = np.log1p(-rho) - 0.5 * np.log(s0) - 0.5 * r * r / s0
        log_slab = np.log(rho) - 0.5 * np.log(sv) - 0.5 * (r - mu) ** 2 / sv
    pi = expit(log_slab - log_spike)
    v = var / (1.0 + gamma * var)
    m = (mu + gamma * var * r) / (1.0 + gamma * var)
    mean = pi * m
    post_var = pi * v + pi * (1.0 - pi) * m * m
    return mean, post_var


def laplace_denoise(r, gamma, lam):
    """Posterior mean and variance under a Laplace prior with rate ``lam``."""
    s2 = 1.0 / gamma
    s = np.sqrt(s2)
    mup = r - lam * s2
    mum = r + lam * s2
    a = mup / s
    b = -mum / s
    log_zp = -lam * r + log_ndtr(a)
    log_zm = lam * r + log_ndtr(b)
    wp = expit(log_zp - log_zm)
    hp = _inv_mills(a)
    hm = _inv_mills(b)
    mp = mup + s * hp
    mm = mum - s * hm
    vp = np.maximum(s2 * (1.0 - a * hp - hp * hp), 0.0)
    vm = np.maximum(s2 * (1.0 - b * hm - hm * hm), 0.0)
    mean = wp * mp + (1.0 - wp) * mm
    post_var = wp * vp + (1.0 - wp) * vm + wp * (1.0 - wp) * (mp - mm) ** 2
    return mean, post_var


def probit_denoise(r, gamma, y, sigma):
    """Moments of Phi(y z / sigma) N(z; r, 1/gamma), normalised."""
    v = 1.0 / gamma
    tot = sigma * sigma + v
    st = np.sqrt(tot)
    u = y * r / st
    h = _inv_mills(u)
    mean = r + y * v * h / st
    post_var = v - v * v * h * (u + h) / tot
    return mean, post_var


def logcosh_prox(r, gamma, a, c, m, tol, max_iter):
    """argmin_x a*logcosh(x - m) + c/2 x^2 + gamma/2 (x - r)^2.

    Returns ``(x, residual, iterations)``; ``residual`` is the final absolute
    gradient per element.
    """
    k = c + gamma
    lo = (gamma * r - a) / k
    hi = (gamma * r + a) / k
    x = np.clip(gamma * r / k, lo, hi)
    g = a * np.tanh(x - m) + k * x - gamma * r
    active = np.abs(g) > tol
    n_it = 0
    polish = True
    while n_it < max_iter and (active.any() or polish):
        if not active.any():
            polish = False
            active = np.ones_like(active)
        n_it += 1
        xa = x[active]
        ga = g[active]
        th = np.tanh(xa - m[active])
        h = a[active] * (1.0 - th * th) + k[active]
        lo_a = np.where(ga < 0, np.maximum(lo[active], xa), lo[active])
        hi_a = np.where(ga > 0, np.minimum(hi[active], xa), hi[active])
        lo[active] = lo_a
        hi[active] = hi_a
        xn = xa - ga / h
        bad = (xn < lo_a) | (xn > hi_a)
        xn = np.where(bad, 0.5 * (lo_a + hi_a), xn)
        x[active] = xn
        g[active] = a[active] * np.tanh(xn - m[active]) + k[active] * xn - gamma[active] * r[active]
        active = np.abs(g) > tol
    return x, np.abs(g), n_it


def probit_prox(r, gamma, y, sigma, tol, max_iter):
    """argmin_z -log Phi(y z / sigma) + gamma/2 (z - r)^2."""
    t0 = y * r / sigma
    step = y * _inv_mills(t0) / (sigma * gamma)
    lo = np.minimum(r, r + step)
    hi = np.maximum(r, r + step)
    z = r + 0.5 * step

    def grad_hess(z_, r_, g_, y_, s_):
        t = y_ * z_ / s_
        h = _inv_mills(t)
        return -(y_ / s_) * h + g_ * (z_ - r_), h * (t + h) / (s_ * s_) + g_

    g, h = grad_hess(z, r, gamma, y, sigma)
    active = np.abs(g) > tol
    n_it = 0
    polish = True
    while n_it < max_iter and (active.any() or polish):
        if not active.any():
            polish = False
            active = np.ones_like(active)
        n_it += 1
        za, ga, ha = z[active], g[active], h[active]
        lo_a = np.where(ga < 0, np.maximum(lo[active], za), lo[active])
        hi_a = np.where(ga > 0, np.minimum(hi[active], za), hi[active])
        lo[active] = lo_a
        hi[active] = hi_a
        zn = za - ga / ha
        bad = (zn < lo_a) | (zn > hi_a)
        zn = np.where(bad, 0.5 * (lo_a + hi_a), zn)
        z[active] = zn
        g[active], h[active] = grad_hess(zn, r[active], gamma[active], y[active], sigma[active])
        active = np.abs(g) > tol
    return z, np.abs(g), n_it
