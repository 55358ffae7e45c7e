# cython: language_level=3
"""Compiled scalar kernels; same contracts as ``_pykernels``."""
import numpy as np

from libc.math cimport exp, fabs, log, log1p, sqrt, tanh
from scipy.special.cython_special cimport log_ndtr

cdef double LOG_SQRT_2PI = 0.9189385332046727


cdef inline double _expit(double t) noexcept nogil:
    if t >= 0:
        return 1.0 / (1.0 + exp(-t))
    cdef double e = exp(t)
    return e / (1.0 + e)


cdef inline double _inv_mills(double t) noexcept nogil:
    return exp(-0.5 * t * t - LOG_SQRT_2PI - log_ndtr(t))


def soft_threshold(double[::1] r, double[::1] thr):
    cdef Py_ssize_t i, n = r.shape[0]
    out = np.empty(n)
    cdef double[::1] o = out
    cdef double a
    with nogil:
        for i in range(n):
            a = fabs(r[i]) - thr[i]
            if a <= 0:
                o[i] = 0.0
            elif r[i] > 0:
                o[i] = a
            else:
                o[i] = -a
    return out


def bg_denoise(double[::1] r, double[::1] gamma, double[::1] rho,
               double[::1] mu, double[::1] var):
    cdef Py_ssize_t i, n = r.shape[0]
    mean_arr = np.empty(n)
    var_arr = np.empty(n)
    cdef double[::1] mo = mean_arr
    cdef double[::1] vo = var_arr
    cdef double s0, sv, ls, ll, pi, v, m, ri
    with nogil:
        for i in range(n):
            ri = r[i]
            s0 = 1.0 / gamma[i]
            sv = var[i] + s0
            if rho[i] >= 1.0:
                pi = 1.0
            elif rho[i] <= 0.0:
                pi = 0.0
            else:
                ls = log1p(-rho[i]) - 0.5 * log(s0) - 0.5 * ri * ri / s0
                ll = log(rho[i]) - 0.5 * log(sv) - 0.5 * (ri - mu[i]) * (ri - mu[i]) / sv
                pi = _expit(ll - ls)
            v = var[i] / (1.0 + gamma[i] * var[i])
            m = (mu[i] + gamma[i] * var[i] * ri) / (1.0 + gamma[i] * var[i])
            mo[i] = pi * m
            vo[i] = pi * v + pi * (1.0 - pi) * m * m
    return mean_arr, var_arr


def laplace_denoise(double[::1] r, double[::1] gamma, double[::1] lam):
    cdef Py_ssize_t i, n = r.shape[0]
    mean_arr = np.empty(n)
    var_arr = np.empty(n)
    cdef double[::1] mo = mean_arr
    cdef double[::1] vo = var_arr
    cdef double s2, s, mup, mum, a, b, wp, hp, hm, mp, mm, vp, vm, l
    with nogil:
        for i in range(n):
            l = lam[i]
            s2 = 1.0 / gamma[i]
            s = sqrt(s2)
            mup = r[i] - l * s2
            mum = r[i] + l * s2
            a = mup / s
            b = -mum / s
            wp = _expit((-l * r[i] + log_ndtr(a)) - (l * r[i] + log_ndtr(b)))
            hp = _inv_mills(a)
            hm = _inv_mills(b)
            mp = mup + s * hp
            mm = mum - s * hm
            vp = s2 * (1.0 - a * hp - hp * hp)
            vm = s2 * (1.0 - b * hm - hm * hm)
            if vp < 0:
                vp = 0.0
            if vm < 0:
                vm = 0.0
            mo[i] = wp * mp + (1.0 - wp) * mm
            vo[i] = wp * vp + (1.0 - wp) * vm + wp * (1.0 - wp) * (mp - mm) * (mp - mm)
    return mean_arr, var_arr


def probit_denoise(double[::1] r, double[::1] gamma, double[::1] y, double[::1] sigma):
    cdef Py_ssize_t i, n = r.shape[0]
    mean_arr = np.empty(n)
    var_arr = np.empty(n)
    cdef double[::1] mo = mean_arr
    cdef double[::1] vo = var_arr
    cdef double v, tot, st, u, h
    with nogil:
        for i in range(n):
            v = 1.0 / gamma[i]
            tot = sigma[i] * sigma[i] + v
            st = sqrt(tot)
            u = y[i] * r[i] / st
            h = _inv_mills(u)
            mo[i] = r[i] + y[i] * v * h / st
            vo[i] = v - v * v * h * (u + h) / tot
    return mean_arr, var_arr


def logcosh_prox(double[::1] r, double[::1] gamma, double[::1] a, double[::1] c,
                 double[::1] m, double tol, int max_iter):
    cdef Py_ssize_t i, n = r.shape[0]
    x_arr = np.empty(n)
    res_arr = np.empty(n)
    cdef double[::1] xo = x_arr
    cdef double[::1] ro = res_arr
    cdef double k, lo, hi, x, g, th, h, xn
    cdef int it, it_max = 0, polish
    with nogil:
        for i in range(n):
            k = c[i] + gamma[i]
            lo = (gamma[i] * r[i] - a[i]) / k
            hi = (gamma[i] * r[i] + a[i]) / k
            x = gamma[i] * r[i] / k
            if x < lo:
                x = lo
            if x > hi:
                x = hi
            g = a[i] * tanh(x - m[i]) + k * x - gamma[i] * r[i]
            polish = 1
            it = 0
            while it < max_iter and (fabs(g) > tol or polish):
                if fabs(g) <= tol:
                    polish = 0
                it += 1
                if g < 0 and x > lo:
                    lo = x
                if g > 0 and x < hi:
                    hi = x
                th = tanh(x - m[i])
                h = a[i] * (1.0 - th * th) + k
                xn = x - g / h
                if xn < lo or xn > hi:
                    xn = 0.5 * (lo + hi)
                x = xn
                g = a[i] * tanh(x - m[i]) + k * x - gamma[i] * r[i]
            if it > it_max:
                it_max = it
            xo[i] = x
            ro[i] = fabs(g)
    return x_arr, res_arr, it_max


cdef inline void _probit_gh(double z, double r, double gam, double y, double s,
                            double* g, double* h) noexcept nogil:
    cdef double t = y * z / s
    cdef double im = _inv_mills(t)
    g[0] = -(y / s) * im + gam * (z - r)
    h[0] = im * (t + im) / (s * s) + gam


def probit_prox(double[::1] r, double[::1] gamma, double[::1] y, double[::1] sigma,
                double tol, int max_iter):
    cdef Py_ssize_t i, n = r.shape[0]
    z_arr = np.empty(n)
    res_arr = np.empty(n)
    cdef double[::1] zo = z_arr
    cdef double[::1] ro = res_arr
    cdef double step, lo, hi, z, g, h, zn
    cdef int it, it_max = 0, polish
    with nogil:
        for i in range(n):
            step = y[i] * _inv_mills(y[i] * r[i] / sigma[i]) / (sigma[i] * gamma[i])
            lo = r[i] if step > 0 else r[i] + step
            hi = r[i] + step if step > 0 else r[i]
            z = r[i] + 0.5 * step
            _probit_gh(z, r[i], gamma[i], y[i], sigma[i], &g, &h)
            polish = 1
            it = 0
            while it < max_iter and (fabs(g) > tol or polish):
                if fabs(g) <= tol:
                    polish = 0
                it += 1
                if g < 0 and z > lo:
                    lo = z
                if g > 0 and z < hi:
                    hi = z
                zn = z - g / h
                if zn < lo or zn > hi:
                    zn = 0.5 * (lo + hi)
                z = zn
                _probit_gh(z, r[i], gamma[i], y[i], sigma[i], &g, &h)
            if it > it_max:
                it_max = it
            zo[i] = z
            ro[i] = fabs(g)
    return z_arr, res_arr, it_max
