"""Scalar hot kernels with an import-time backend choice.

The compiled extension ``_ckernels`` is used when it was built; otherwise, or
when ``GEC_PURE_PYTHON=1`` is set, the numpy implementation in
``_pykernels`` is used. Both expose the same functions; the wrappers here
broadcast arguments and restore the output shape.
"""
import os

import numpy as np

from . import _pykernels

if os.environ.get("GEC_PURE_PYTHON", "") not in ("", "0"):
    _backend = _pykernels
    BACKEND = "python"
else:
    try:
        from . import _ckernels as _backend
        BACKEND = "cython"
    except ImportError:
        _backend = _pykernels
        BACKEND = "python"

__all__ = [
    "BACKEND",
    "available_backends",
    "get_backend",
    "soft_threshold",
    "bg_denoise",
    "laplace_denoise",
    "probit_denoise",
    "logcosh_prox",
    "probit_prox",
]


def available_backends():
    """Names of the backends importable in this environment."""
    names = ["python"]
    try:
        from . import _ckernels  # noqa: F401
        names.append("cython")
    except ImportError:
        pass
    return names


def get_backend(name=None):
    """Return the raw kernel module for ``name`` (default: the active one)."""
    if name is None:
        return _backend
    if name == "python":
        return _pykernels
    if name == "cython":
        from . import _ckernels
        return _ckernels
    raise ValueError(f"unknown kernel backend {name!r}")


def _flat(*args):
    arrs = [np.asarray(a, dtype=float) for a in args]
    shape = np.broadcast_shapes(*[a.shape for a in arrs])
    out = []
    for a in arrs:
        # fresh writeable buffers: typed memoryviews reject broadcast views
        b = np.empty(shape)
        b[...] = a
        out.append(b.ravel())
    return shape, out


def soft_threshold(r, thr, backend=None):
    shape, (r, thr) = _flat(r, thr)
    return get_backend(backend).soft_threshold(r, thr).reshape(shape)


def bg_denoise(r, gamma, rho, mu, var, backend=None):
    shape, args = _flat(r, gamma, rho, mu, var)
    m, v = get_backend(backend).bg_denoise(*args)
    return m.reshape(shape), v.reshape(shape)


def laplace_denoise(r, gamma, lam, backend=None):
    shape, args = _flat(r, gamma, lam)
    m, v = get_backend(backend).laplace_denoise(*args)
    return m.reshape(shape), v.reshape(shape)


def probit_denoise(r, gamma, y, sigma, backend=None):
    shape, args = _flat(r, gamma, y, sigma)
    m, v = get_backend(backend).probit_denoise(*args)
    return m.reshape(shape), v.reshape(shape)


def logcosh_prox(r, gamma, a, c, m, tol=1e-10, max_iter=100, backend=None):
    shape, args = _flat(r, gamma, a, c, m)
    x, res, it = get_backend(backend).logcosh_prox(*args, float(tol), int(max_iter))
    return x.reshape(shape), res.reshape(shape), it


def probit_prox(r, gamma, y, sigma, tol=1e-10, max_iter=100, backend=None):
    shape, args = _flat(r, gamma, y, sigma)
    z, res, it = get_backend(backend).probit_prox(*args, float(tol), int(max_iter))
    return z.reshape(shape), res.reshape(shape), it
