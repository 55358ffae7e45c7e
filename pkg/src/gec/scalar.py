"""Scalar penalty families f(x) = -log p(x) acting componentwise.

Each family is vectorised: parameters may be scalars or arrays broadcastable
against the input, so the same object can describe an i.i.d. prior or a
per-component likelihood (e.g. a Gaussian likelihood with mean ``y``).

A family supplies the MAP estimator (scalar prox), the MMSE denoiser
``(mean, var)`` under a Gaussian pseudo-measurement ``r`` with precision
``gamma``, and a description of its measure for the quadrature oracles.
"""
import numpy as np
from numpy.polynomial.hermite import hermgauss
from numpy.polynomial.hermite_e import hermegauss
from numpy.polynomial.laguerre import laggauss
from numpy.polynomial.legendre import leggauss
from scipy.special import log_ndtr, logsumexp

from . import kernels
from .errors import ConfigError, QuadratureError, SolverError

PROX_TOL = 1e-10
QUAD_TOL = 1e-10
QUAD_START_NODES = 31
QUAD_MAX_NODES = 248  # hermgauss weights underflow beyond about 300 nodes
PANEL_NODES = 16
PANEL_MAX = 1024

_LOG_2PI = np.log(2.0 * np.pi)


def _arr(x):
    return np.asarray(x, dtype=float)


def _probabilist_nodes(n):
    t, w = hermegauss(n)
    return t, w / np.sqrt(2.0 * np.pi)


def _logcosh(u):
    au = np.abs(u)
    return au + np.log1p(np.exp(-2.0 * au)) - np.log(2.0)


def _settled(mean, var, prev, tol):
    if prev is None:
        return False
    sd = np.sqrt(np.maximum(var, 0.0))
    return bool(np.all(np.abs(mean - prev[0]) <= tol * (np.abs(mean) + sd))
                and np.all(np.abs(var - prev[1]) <= tol * var))


def _weighted_moments(x, lw):
    lw = lw - logsumexp(lw, axis=1, keepdims=True)
    p = np.exp(lw)
    mean = np.sum(p * x, axis=1)
    return mean, np.sum(p * (x - mean[:, None]) ** 2, axis=1)


def panel_moments(phi, lo, hi, tol=QUAD_TOL, max_panels=PANEL_MAX):
    """Moments of exp(-phi) on [lo, hi] by composite Gauss-Legendre, halving
    the panel width until both moments settle to ``tol``."""
    lo = _arr(lo)[:, None]
    hi = _arr(hi)[:, None]
    t, w = leggauss(PANEL_NODES)
    prev = None
    n = 8
    while n <= max_panels:
        h = (hi - lo) / n
        left = lo + h * np.arange(n)[None, :]
        x = (left[:, :, None] + 0.5 * h[:, :, None] * (t + 1.0)).reshape(lo.shape[0], -1)
        lw = np.log(np.tile(0.5 * w, n))[None, :] + np.log(h) - phi(x)
        mean, var = _weighted_moments(x, lw)
        if _settled(mean, var, prev, tol):
            return mean, var
        prev = (mean, var)
        n *= 2
    raise QuadratureError(f"panel moments did not converge with {max_panels} panels")


def laplace_gh_moments(phi, center, scale, tol=QUAD_TOL, n0=QUAD_START_NODES,
                       max_nodes=QUAD_MAX_NODES):
    """Mean and variance of the density proportional to ``exp(-phi(x))``.

    Gauss-Hermite quadrature centred at ``center`` with width ``scale``
    (a Laplace approximation of the density); the node count doubles until
    both moments change by less than ``tol`` relative. ``phi`` must accept
    an array of shape ``(n_comp, n_nodes)`` and ``center``/``scale`` are
    ``(n_comp,)``.
    """
    center = _arr(center)[:, None]
    scale = _arr(scale)[:, None]
    prev = None
    n = n0
    while n <= max_nodes:
        t, w = hermgauss(n)
        x = center + np.sqrt(2.0) * scale * t[None, :]
        mean, var = _weighted_moments(x, np.log(w)[None, :] + t[None, :] ** 2 - phi(x))
        if _settled(mean, var, prev, tol):
            return mean, var
        prev = (mean, var)
        n *= 2
    raise QuadratureError(f"Gauss-Hermite moments did not converge with {max_nodes} nodes")


class ScalarPenalty:
    """Base class for componentwise penalties."""

    name = "scalar"
    smooth = True
    closed_prox = True
    closed_mmse = True

    def value(self, x):
        raise NotImplementedError

    def grad(self, x):
        raise NotImplementedError

    def curvature(self, x):
        """Second derivative of f at ``x`` (``inf`` at kinks and atoms)."""
        raise NotImplementedError

    def prox(self, r, gamma):
        raise NotImplementedError

    def denoise(self, r, gamma):
        """Return ``(mean, var)`` of p(x) exp(-gamma (x - r)^2 / 2)."""
        raise NotImplementedError

    def subgrad_distance(self, x, v):
        """Componentwise min over g in the subdifferential at x of |g + v|."""
        return np.abs(self.grad(x) + v)

    def curvature_bounds(self):
        """``(c1, c2)`` with c1 <= f'' <= c2 everywhere, or ``None``."""
        return None

    # measure description used by the quadrature oracles
    def density(self, x):
        """Density of the continuous part of exp(-f)."""
        return np.exp(-self.value(x))

    def atoms(self):
        """Point masses as ``[(location, mass)]``; mass may be an array."""
        return []

    def breakpoints(self):
        return []

    def spread(self):
        """Rough location and scale of the measure for building grids."""
        return 0.0, 1.0

    def prior_nodes(self, n):
        """Nodes and weights integrating against the normalised measure."""
        raise NotImplementedError(f"{self.name} has no prior quadrature rule")

    def sample(self, rng, size):
        raise NotImplementedError(f"{self.name} cannot be sampled")

    def params(self):
        return {}

    def __repr__(self):
        args = ", ".join(f"{k}={v!r}" for k, v in self.params().items())
        return f"{type(self).__name__}({args})"


class Gaussian(ScalarPenalty):
    """Gaussian N(mean, var); also serves as a Gaussian likelihood on z."""

    name = "gaussian"

    def __init__(self, mean=0.0, var=1.0):
        self.mean = _arr(mean)
        self.var = _arr(var)
        if np.any(self.var <= 0):
            raise ConfigError("Gaussian variance must be positive")

    def value(self, x):
        return (x - self.mean) ** 2 / (2 * self.var) + 0.5 * (_LOG_2PI + np.log(self.var))

    def grad(self, x):
        return (x - self.mean) / self.var

    def curvature(self, x):
        return np.broadcast_to(1.0 / self.var, np.shape(x)).astype(float)

    def prox(self, r, gamma):
        return (self.mean / self.var + gamma * r) / (1.0 / self.var + gamma)

    def denoise(self, r, gamma):
        prec = 1.0 / self.var + gamma
        mean = (self.mean / self.var + gamma * r) / prec
        return mean, np.broadcast_to(1.0 / prec, np.shape(mean)).astype(float)

    def curvature_bounds(self):
        p = 1.0 / self.var
        return float(np.min(p)), float(np.max(p))

    def density(self, x):
        return np.exp(-self.value(x))

    def spread(self):
        return float(np.mean(self.mean)), float(np.sqrt(np.max(self.var)))

    def prior_nodes(self, n):
        t, w = _probabilist_nodes(n)
        return float(self.mean) + np.sqrt(float(self.var)) * t, w

    def sample(self, rng, size):
        return rng.normal(self.mean, np.sqrt(self.var), size=size)

    def params(self):
        return {"mean": self.mean.tolist(), "var": self.var.tolist()}


class Laplace(ScalarPenalty):
    """Laplace prior with rate ``lam``: f(x) = lam |x| + log(2 / lam).

    With ``lam`` = 1 this is the plain L1 penalty up to a constant.
    """

    name = "laplace"
    smooth = False

    def __init__(self, lam=1.0):
        self.lam = _arr(lam)
        if np.any(self.lam <= 0):
            raise ConfigError("Laplace rate must be positive")

    def value(self, x):
        return self.lam * np.abs(x) + np.log(2.0 / self.lam)

    def grad(self, x):
        return self.lam * np.sign(x)

    def curvature(self, x):
        x = _arr(x)
        return np.where(x == 0, np.inf, 0.0)

    def prox(self, r, gamma):
        return kernels.soft_threshold(r, self.lam / gamma)

    def denoise(self, r, gamma):
        return kernels.laplace_denoise(r, gamma, self.lam)

    def subgrad_distance(self, x, v):
        x = _arr(x)
        lam = np.broadcast_to(self.lam, x.shape)
        at_kink = np.maximum(np.abs(v) - lam, 0.0)
        return np.where(x == 0, at_kink, np.abs(lam * np.sign(x) + v))

    def density(self, x):
        return 0.5 * self.lam * np.exp(-self.lam * np.abs(x))

    def breakpoints(self):
        return [0.0]

    def spread(self):
        return 0.0, float(np.sqrt(2.0) / np.min(self.lam))

    def prior_nodes(self, n):
        t, w = laggauss(n)
        lam = float(self.lam)
        return np.concatenate([-t[::-1] / lam, t / lam]), 0.5 * np.concatenate([w[::-1], w])

    def sample(self, rng, size):
        return rng.laplace(0.0, 1.0 / self.lam, size=size)

    def params(self):
        return {"lam": self.lam.tolist()}


class BernoulliGaussian(ScalarPenalty):
    """Spike-and-slab prior: 0 with probability 1 - rho, else N(mean, var).

    As a penalty the atom is scored by its mass: f(0) = -log(1 - rho), and
    f(x) = -log(rho N(x; mean, var)) elsewhere. This gives a hard-threshold
    type MAP estimator.
    """

    name = "bernoulli_gaussian"
    smooth = False

    def __init__(self, rho=0.5, mean=0.0, var=1.0):
        self.rho = _arr(rho)
        self.mean = _arr(mean)
        self.var = _arr(var)
        if np.any((self.rho <= 0) | (self.rho > 1)):
            raise ConfigError("activity rho must lie in (0, 1]")
        if np.any(self.var <= 0):
            raise ConfigError("slab variance must be positive")

    def _slab_cost(self, x):
        return -np.log(self.rho) + (x - self.mean) ** 2 / (2 * self.var) + 0.5 * (_LOG_2PI + np.log(self.var))

    def value(self, x):
        x = _arr(x)
        with np.errstate(divide="ignore"):
            spike = -np.log1p(-self.rho) + 0.0 * x
        return np.where(x == 0, spike, self._slab_cost(x))

    def grad(self, x):
        x = _arr(x)
        return np.where(x == 0, 0.0, (x - self.mean) / self.var)

    def curvature(self, x):
        x = _arr(x)
        return np.where(x == 0, np.inf, 1.0 / self.var + 0.0 * x)

    def prox(self, r, gamma):
        r = _arr(r)
        xs = (self.mean / self.var + gamma * r) / (1.0 / self.var + gamma)
        c_slab = self._slab_cost(xs) + 0.5 * gamma * (xs - r) ** 2
        with np.errstate(divide="ignore"):
            c_spike = -np.log1p(-self.rho) + 0.5 * gamma * r * r
        return np.where(c_slab < c_spike, xs, 0.0)

    def denoise(self, r, gamma):
        return kernels.bg_denoise(r, gamma, self.rho, self.mean, self.var)

    def subgrad_distance(self, x, v):
        x = _arr(x)
        return np.where(x == 0, 0.0, np.abs((x - self.mean) / self.var + v))

    def density(self, x):
        return self.rho * np.exp(-(x - self.mean) ** 2 / (2 * self.var)) / np.sqrt(2 * np.pi * self.var)

    def atoms(self):
        return [(0.0, 1.0 - self.rho)]

    def spread(self):
        return float(np.mean(self.mean)), float(np.sqrt(np.max(self.var)))

    def prior_nodes(self, n):
        t, w = _probabilist_nodes(n)
        rho = float(self.rho)
        x = np.concatenate([[0.0], float(self.mean) + np.sqrt(float(self.var)) * t])
        return x, np.concatenate([[1.0 - rho], rho * w])

    def sample(self, rng, size):
        active = rng.random(size) < self.rho
        slab = rng.normal(self.mean, np.sqrt(self.var), size=size)
        return np.where(active, slab, 0.0)

    def params(self):
        return {"rho": self.rho.tolist(), "mean": self.mean.tolist(), "var": self.var.tolist()}


class LogCosh(ScalarPenalty):
    """Smooth strictly convex penalty a*logcosh(x - loc) + c/2 x^2.

    Curvature lies in [c, a + c]. The prox is a safeguarded Newton solve and
    the MMSE moments use adaptive Gauss-Hermite quadrature.
    """

    name = "logcosh"
    closed_prox = False
    closed_mmse = False

    def __init__(self, a=1.0, c=1.0, loc=0.0, prox_tol=PROX_TOL, quad_tol=QUAD_TOL):
        self.a = _arr(a)
        self.c = _arr(c)
        self.loc = _arr(loc)
        self.prox_tol = prox_tol
        self.quad_tol = quad_tol
        if np.any(self.a < 0) or np.any(self.c <= 0):
            raise ConfigError("LogCosh needs a >= 0 and c > 0")

    def value(self, x):
        return self.a * _logcosh(x - self.loc) + 0.5 * self.c * x * x

    def grad(self, x):
        return self.a * np.tanh(x - self.loc) + self.c * x

    def curvature(self, x):
        t = np.tanh(x - self.loc)
        return self.a * (1.0 - t * t) + self.c

    def prox(self, r, gamma):
        x, res, _ = kernels.logcosh_prox(r, gamma, self.a, self.c, self.loc, tol=self.prox_tol)
        if np.any(res > self.prox_tol):
            raise SolverError("logcosh prox Newton solve did not converge", x, float(res.max()))
        return x

    def denoise(self, r, gamma):
        r = np.atleast_1d(_arr(r))
        gamma = np.broadcast_to(_arr(gamma), r.shape)
        xhat = self.prox(r, gamma)
        scale = 1.0 / np.sqrt(self.curvature(xhat) + gamma)
        a = np.broadcast_to(self.a, r.shape)[:, None]
        c = np.broadcast_to(self.c, r.shape)[:, None]
        loc = np.broadcast_to(self.loc, r.shape)[:, None]
        rr = r[:, None]
        gg = gamma[:, None]
        x0 = xhat[:, None]

        def phi(x):
            f = a * _logcosh(x - loc) + 0.5 * c * x * x + 0.5 * gg * (x - rr) ** 2
            f0 = a * _logcosh(x0 - loc) + 0.5 * c * x0 * x0 + 0.5 * gg * (x0 - rr) ** 2
            return f - f0

        try:
            return laplace_gh_moments(phi, xhat, scale, tol=self.quad_tol)
        except QuadratureError:
            # slow algebraic GH convergence near the log-cosh bend; the posterior is
            # log-concave with curvature >= c + gamma, so +-14 of that width holds all mass
            half = 14.0 / np.sqrt(np.broadcast_to(self.c, r.shape) + gamma)
            return panel_moments(phi, xhat - half, xhat + half, tol=self.quad_tol)

    def curvature_bounds(self):
        return float(np.min(self.c)), float(np.max(self.a + self.c))

    def spread(self):
        return 0.0, float(1.0 / np.sqrt(np.min(self.c)))

    def params(self):
        return {"a": self.a.tolist(), "c": self.c.tolist(), "loc": self.loc.tolist()}


class Probit(ScalarPenalty):
    """Probit likelihood on z: f(z) = -log Phi(y z / scale), y in {-1, +1}."""

    name = "probit"
    closed_prox = False

    def __init__(self, y=1.0, scale=1.0, prox_tol=PROX_TOL):
        self.y = _arr(y)
        self.scale = _arr(scale)
        self.prox_tol = prox_tol
        if np.any(self.scale <= 0):
            raise ConfigError("probit scale must be positive")

    def _h(self, z):
        t = self.y * z / self.scale
        return t, np.exp(-0.5 * t * t - 0.5 * _LOG_2PI - log_ndtr(t))

    def value(self, z):
        return -log_ndtr(self.y * z / self.scale)

    def grad(self, z):
        _, h = self._h(z)
        return -(self.y / self.scale) * h

    def curvature(self, z):
        t, h = self._h(z)
        return h * (t + h) / self.scale ** 2

    def prox(self, r, gamma):
        z, res, _ = kernels.probit_prox(r, gamma, self.y, self.scale, tol=self.prox_tol)
        if np.any(res > self.prox_tol):
            raise SolverError("probit prox Newton solve did not converge", z, float(res.max()))
        return z

    def denoise(self, r, gamma):
        return kernels.probit_denoise(r, gamma, self.y, self.scale)

    def density(self, z):
        return np.exp(log_ndtr(self.y * z / self.scale))

    def spread(self):
        return 0.0, float(np.max(self.scale))

    def sample_observation(self, z, rng):
        """Draw y = sign(z + scale * noise)."""
        noise = rng.normal(size=np.shape(z))
        return np.where(z + self.scale * noise >= 0, 1.0, -1.0)

    def params(self):
        return {"y": self.y.tolist(), "scale": self.scale.tolist()}


PRIOR_FAMILIES = {
    "gaussian": Gaussian,
    "laplace": Laplace,
    "bernoulli_gaussian": BernoulliGaussian,
    "logcosh": LogCosh,
}


def make_prior(family, **params):
    """Construct a scalar prior from its config name and parameters."""
    try:
        cls = PRIOR_FAMILIES[family]
    except KeyError:
        raise ConfigError(f"unsupported prior family {family!r}; choose from {sorted(PRIOR_FAMILIES)}") from None
    try:
        return cls(**params)
    except TypeError as exc:
        raise ConfigError(f"bad parameters for prior {family!r}: {exc}") from None
