"""Penalty models f_i and their MAP / MMSE estimation functions.

Every penalty exposes the two estimation functions used by GEC:

* ``prox(r, gamma)``: argmin_x f(x) + 1/2 ||x - r||^2_gamma
* ``mmse(r, gamma)``: mean and covariance diagonal of
  p(x | r, gamma) proportional to exp(-f(x) - 1/2 ||x - r||^2_gamma)

and the diagonal of the scaled Jacobian Q = [d g / d r] Diag(gamma)^-1, which
for the MAP estimator equals diag([Hess f(xhat) + Diag(gamma)]^-1) and for
the MMSE estimator is the posterior covariance diagonal.
"""
from dataclasses import dataclass
from functools import cached_property

import numpy as np
from scipy.linalg import LinAlgError, cho_factor, cho_solve

from .diag import Diagonalizer
from .errors import ConfigError, CurvatureError

VAR_FLOOR = 1e-12


def _vec(x, n=None):
    x = np.asarray(x, dtype=float)
    if x.ndim == 0:
        x = np.full(n if n is not None else 1, float(x))
    if n is not None and x.shape != (n,):
        raise ConfigError(f"expected a vector of length {n}, got shape {x.shape}")
    return x


def _is_uniform(gamma):
    return bool(np.all(gamma == gamma[0]))


class Penalty:
    """Base class; concrete penalties override the estimation functions."""

    dim = 0
    is_separable = False
    is_quadratic = False
    is_linear_constraint = False
    has_closed_prox = True
    has_closed_mmse = True
    smooth = True

    def value(self, x):
        raise NotImplementedError

    def grad(self, x):
        raise NotImplementedError

    def hessian(self, x):
        raise NotImplementedError

    def prox(self, r, gamma):
        raise NotImplementedError

    def map_qdiag(self, xhat, gamma):
        """diag([Hess f(xhat) + Diag(gamma)]^-1)."""
        raise NotImplementedError

    def mmse(self, r, gamma):
        """Return ``(mean, cov_diag)`` of p(x | r, gamma)."""
        raise NotImplementedError

    def subgrad_distance(self, x, v):
        """Componentwise distance of -v to the subdifferential at x."""
        return np.abs(self.grad(x) + v)

    def curvature_bounds(self):
        return None

    def capabilities(self):
        return {
            "has_closed_prox": self.has_closed_prox,
            "has_closed_mmse": self.has_closed_mmse,
            "is_separable": self.is_separable,
            "is_quadratic": self.is_quadratic,
            "is_linear_constraint": self.is_linear_constraint,
        }


class SeparablePenalty(Penalty):
    """Sum over components of scalar penalties, possibly in several segments.

    ``SeparablePenalty(prior, n)`` applies one scalar family to all ``n``
    components; :meth:`stack` concatenates segments, e.g. a prior on x and a
    likelihood on z for the GLM.
    """

    is_separable = True

    def __init__(self, scalar, n):
        self._init_segments([(scalar, int(n))])

    @classmethod
    def stack(cls, segments):
        obj = cls.__new__(cls)
        obj._init_segments([(s, int(n)) for s, n in segments])
        return obj

    def _init_segments(self, segments):
        if not segments or any(n <= 0 for _, n in segments):
            raise ConfigError("segments must have positive sizes")
        self.segments = []
        start = 0
        for scalar, n in segments:
            self.segments.append((scalar, slice(start, start + n)))
            start += n
        self.dim = start
        scalars = [s for s, _ in self.segments]
        self.smooth = all(s.smooth for s in scalars)
        self.has_closed_prox = all(s.closed_prox for s in scalars)
        self.has_closed_mmse = all(s.closed_mmse for s in scalars)
        self.is_quadratic = all(s.name == "gaussian" for s in scalars)

    def _map(self, fn, *arrays):
        out = np.empty(self.dim)
        for scalar, sl in self.segments:
            out[sl] = fn(scalar, *(a[sl] for a in arrays))
        return out

    def value(self, x):
        x = _vec(x, self.dim)
        return float(sum(np.sum(s.value(x[sl])) for s, sl in self.segments))

    def grad(self, x):
        return self._map(lambda s, xs: s.grad(xs), _vec(x, self.dim))

    def curvature(self, x):
        return self._map(lambda s, xs: s.curvature(xs), _vec(x, self.dim))

    def hessian(self, x):
        return np.diag(self.curvature(x))

    def prox(self, r, gamma):
        return self._map(lambda s, rs, gs: s.prox(rs, gs), _vec(r, self.dim), _vec(gamma, self.dim))

    def map_qdiag(self, xhat, gamma):
        gamma = _vec(gamma, self.dim)
        total = self.curvature(xhat) + gamma
        if np.any(total <= 0):
            raise CurvatureError("f'' + gamma is not positive at the estimate")
        return 1.0 / total

    def mmse(self, r, gamma):
        r = _vec(r, self.dim)
        gamma = _vec(gamma, self.dim)
        mean = np.empty(self.dim)
        var = np.empty(self.dim)
        for scalar, sl in self.segments:
            mean[sl], var[sl] = scalar.denoise(r[sl], gamma[sl])
        return mean, var

    def subgrad_distance(self, x, v):
        return self._map(lambda s, xs, vs: s.subgrad_distance(xs, vs), _vec(x, self.dim), _vec(v, self.dim))

    def curvature_bounds(self):
        bounds = [s.curvature_bounds() for s, _ in self.segments]
        if any(b is None for b in bounds):
            return None
        return min(b[0] for b in bounds), max(b[1] for b in bounds)

    def __repr__(self):
        segs = ", ".join(f"{s!r}[{sl.start}:{sl.stop}]" for s, sl in self.segments)
        return f"SeparablePenalty({segs})"


class QuadraticPenalty(Penalty):
    """f(x) = 1/2 x^T H x - b^T x + c with H symmetric positive semidefinite."""

    is_quadratic = True

    def __init__(self, H, b, c=0.0):
        H = np.asarray(H, dtype=float)
        if H.ndim != 2 or H.shape[0] != H.shape[1]:
            raise ConfigError("H must be square")
        self.H = 0.5 * (H + H.T)
        self.dim = H.shape[0]
        self.b = _vec(b, self.dim)
        self.c = float(c)

    @classmethod
    def least_squares(cls, A, y, gamma_w):
        """gamma_w / 2 ||y - A x||^2."""
        A = np.asarray(A, dtype=float)
        y = np.asarray(y, dtype=float)
        if A.ndim != 2 or y.shape != (A.shape[0],):
            raise ConfigError("A must be M x N and y of length M")
        if gamma_w < 0:
            raise ConfigError("noise precision must be non-negative")
        obj = cls(gamma_w * A.T @ A, gamma_w * A.T @ y, 0.5 * gamma_w * float(y @ y))
        obj.A = A
        obj.y = y
        obj.gamma_w = float(gamma_w)
        return obj

    @cached_property
    def _eig(self):
        w, V = np.linalg.eigh(self.H)
        return w, V, V * V

    def value(self, x):
        x = _vec(x, self.dim)
        return float(0.5 * x @ self.H @ x - self.b @ x + self.c)

    def grad(self, x):
        return self.H @ _vec(x, self.dim) - self.b

    def hessian(self, x=None):
        return self.H.copy()

    def _solve(self, gamma, rhs):
        if _is_uniform(gamma):
            w, V, V2 = self._eig
            shifted = w + gamma[0]
            if np.any(shifted <= 0):
                raise CurvatureError("H + gamma I is not positive definite")
            d = 1.0 / shifted
            return V @ (d * (V.T @ rhs)), V2 @ d
        try:
            fac = cho_factor(self.H + np.diag(gamma))
        except LinAlgError:
            raise CurvatureError("H + Diag(gamma) is not positive definite") from None
        x = cho_solve(fac, rhs)
        qdiag = np.diag(cho_solve(fac, np.eye(self.dim)))
        return x, qdiag

    def prox(self, r, gamma):
        gamma = _vec(gamma, self.dim)
        return self._solve(gamma, self.b + gamma * _vec(r, self.dim))[0]

    def map_qdiag(self, xhat, gamma):
        gamma = _vec(gamma, self.dim)
        return self._solve(gamma, np.zeros(self.dim))[1]

    def mmse(self, r, gamma):
        gamma = _vec(gamma, self.dim)
        return self._solve(gamma, self.b + gamma * _vec(r, self.dim))

    def curvature_bounds(self):
        w = self._eig[0]
        return float(w[0]), float(w[-1])


class LinearConstraintPenalty(Penalty):
    """Indicator of {u = (x; z) : z = A x} for the stacked GLM variable.

    Both estimation functions reduce to a gamma-weighted projection onto the
    constraint subspace; the Jacobian is the covariance of the degenerate
    Gaussian supported on that subspace.
    """

    is_linear_constraint = True
    smooth = False

    def __init__(self, A, feas_tol=1e-9):
        A = np.asarray(A, dtype=float)
        if A.ndim != 2 or min(A.shape) < 1:
            raise ConfigError("constraint matrix must be a non-empty M x N array")
        self.A = A
        self.m, self.n = A.shape
        self.dim = self.n + self.m
        self.feas_tol = feas_tol

    @cached_property
    def _eig(self):
        w, V = np.linalg.eigh(self.A.T @ self.A)
        AV = self.A @ V
        return w, V, V * V, AV * AV

    def split(self, u):
        u = _vec(u, self.dim)
        return u[:self.n], u[self.n:]

    def value(self, u):
        x, z = self.split(u)
        gap = np.max(np.abs(z - self.A @ x))
        return 0.0 if gap <= self.feas_tol * (1.0 + np.max(np.abs(u))) else np.inf

    def _project(self, r, gamma):
        rx, rz = self.split(r)
        gx, gz = self.split(gamma)
        rhs = gx * rx + self.A.T @ (gz * rz)
        if _is_uniform(gx) and _is_uniform(gz):
            w, V, V2, AV2 = self._eig
            d = 1.0 / (gx[0] + gz[0] * w)
            x = V @ (d * (V.T @ rhs))
            qx, qz = V2 @ d, AV2 @ d
        else:
            K = np.diag(gx) + self.A.T @ (gz[:, None] * self.A)
            try:
                fac = cho_factor(K)
            except LinAlgError:
                raise CurvatureError("weighted projection system is singular") from None
            x = cho_solve(fac, rhs)
            C = cho_solve(fac, np.eye(self.n))
            qx = np.diag(C)
            qz = np.sum((self.A @ C) * self.A, axis=1)
        return np.concatenate([x, self.A @ x]), np.concatenate([qx, qz])

    def prox(self, r, gamma):
        return self._project(r, _vec(gamma, self.dim))[0]

    def map_qdiag(self, xhat, gamma):
        return self._project(np.zeros(self.dim), _vec(gamma, self.dim))[1]

    def mmse(self, r, gamma):
        return self._project(r, _vec(gamma, self.dim))

    def subgrad_distance(self, u, v):
        # normal cone of the subspace is the row space of [A, -I]
        B = np.hstack([self.A, -np.eye(self.m)])
        lam = np.linalg.lstsq(B.T, -_vec(v, self.dim), rcond=None)[0]
        return np.abs(_vec(v, self.dim) + B.T @ lam)


@dataclass
class EstimateInfo:
    """Diagnostics from one estimation-function call."""

    floored: int = 0


def _floor(q, info):
    bad = ~(q > VAR_FLOOR)
    if np.any(bad):
        info.floored += int(np.count_nonzero(bad))
        q = np.where(bad, VAR_FLOOR, q)
    return q


def prox_map(r, gamma, penalty):
    """MAP estimation function: argmin_x f(x) + 1/2 ||x - r||^2_gamma."""
    gamma = _vec(gamma, penalty.dim)
    if np.any(gamma <= 0):
        raise ConfigError("precisions must be positive")
    return penalty.prox(_vec(r, penalty.dim), gamma)


def map_sensitivity_diag(xhat, gamma, penalty, diag=None, info=None):
    """d([Hess f(xhat) + Diag(gamma)]^-1), floored at ``VAR_FLOOR``."""
    diag = diag or Diagonalizer.vector()
    info = info if info is not None else EstimateInfo()
    q = penalty.map_qdiag(_vec(xhat, penalty.dim), _vec(gamma, penalty.dim))
    return _floor(diag.reduce(q), info)


def mmse_mean(r, gamma, penalty):
    """MMSE estimation function E[x | r, gamma]."""
    gamma = _vec(gamma, penalty.dim)
    if np.any(gamma <= 0):
        raise ConfigError("precisions must be positive")
    return penalty.mmse(_vec(r, penalty.dim), gamma)[0]


def mmse_cov_diag(r, gamma, penalty, diag=None, info=None):
    """d(Cov(x | r, gamma)); variances below ``VAR_FLOOR`` are clamped."""
    diag = diag or Diagonalizer.vector()
    info = info if info is not None else EstimateInfo()
    _, q = penalty.mmse(_vec(r, penalty.dim), _vec(gamma, penalty.dim))
    return _floor(diag.reduce(q), info)


def estimate(penalty, r, gamma, mode, diag, info=None):
    """Return ``(xhat, d(Q))`` for one side; ``mode`` is ``"map"`` or ``"mmse"``."""
    info = info if info is not None else EstimateInfo()
    if mode == "map":
        xhat = penalty.prox(r, gamma)
        q = penalty.map_qdiag(xhat, gamma)
    elif mode == "mmse":
        xhat, q = penalty.mmse(r, gamma)
    else:
        raise ConfigError(f"unknown estimation mode {mode!r}")
    return xhat, _floor(diag.reduce(q), info)
