"""Stieltjes and R-transforms of empirical spectra, curvature prediction and
the replica fixed point for linear regression.

Conventions: S(w) = mean(1 / (lambda - w)) for real w < lambda_min and
R(w) = S^{-1}(-w) - 1/w for w < 0, which is the usual free-cumulant
R-transform R(w) = k1 + k2 w + k3 w^2 + ...
"""
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq

from .diag import Diagonalizer
from .errors import ConfigError, DomainError
from .scalar import _probabilist_nodes


@dataclass(frozen=True)
class SpectralModel:
    eigenvalues: np.ndarray
    source: str = ""

    def __post_init__(self):
        lam = np.sort(np.asarray(self.eigenvalues, dtype=float).ravel())
        if lam.size == 0 or not np.all(np.isfinite(lam)):
            raise ConfigError("spectrum must be a non-empty finite vector")
        object.__setattr__(self, "eigenvalues", lam)

    @classmethod
    def from_matrix(cls, P, source="matrix"):
        P = np.asarray(P, dtype=float)
        return cls(np.linalg.eigvalsh(0.5 * (P + P.T)), source)

    @classmethod
    def from_regression(cls, A, gamma_w):
        """Spectrum of Y = gamma_w A^T A (length N, zeros included)."""
        A = np.asarray(A, dtype=float)
        s = np.linalg.svd(A, compute_uv=False)
        lam = np.zeros(A.shape[1])
        lam[:s.size] = gamma_w * s ** 2
        return cls(lam, "gamma_w A^T A")

    @property
    def n(self):
        return self.eigenvalues.size

    @property
    def lam_min(self):
        return float(self.eigenvalues[0])

    @property
    def lam_max(self):
        return float(self.eigenvalues[-1])

    def moment(self, k):
        return float(np.mean(self.eigenvalues ** k))

    def free_cumulants(self):
        m1, m2, m3, m4 = (self.moment(k) for k in (1, 2, 3, 4))
        return (m1,
                m2 - m1 ** 2,
                m3 - 3 * m1 * m2 + 2 * m1 ** 3,
                m4 - 4 * m1 * m3 - 2 * m2 ** 2 + 10 * m1 ** 2 * m2 - 5 * m1 ** 4)

    def shifted(self, c):
        return SpectralModel(self.eigenvalues + c, f"{self.source}+{c}")


def _as_model(spec):
    return spec if isinstance(spec, SpectralModel) else SpectralModel(spec)


def stieltjes(model, omega):
    model = _as_model(model)
    omega = float(omega)
    if not omega < model.lam_min:
        raise DomainError(f"omega={omega} is not left of the spectrum (lambda_min={model.lam_min})")
    return float(np.mean(1.0 / (model.eigenvalues - omega)))


def _stieltjes_deriv(model, omega):
    return float(np.mean(1.0 / (model.eigenvalues - omega) ** 2))


def stieltjes_inverse(model, s, tol=1e-12):
    """Solve S(w) = s for w < lambda_min (any s > 0 is in range).

    The bracket [lambda_min - 1/s, hi] is analytic: S(lambda_min - 1/s) <= s,
    and S(hi) >= s for hi = mean(lambda) - 1/s (Jensen) when that lies left of
    the spectrum, otherwise hi = lambda_min - 1/(N s).
    """
    model = _as_model(model)
    s = float(s)
    if not s > 0 or not np.isfinite(s):
        raise DomainError(f"s={s} is outside the range (0, inf) of the Stieltjes transform")
    lam = model.eigenvalues
    lo = model.lam_min - 1.0 / s
    hi = float(np.mean(lam)) - 1.0 / s
    if not hi < model.lam_min:
        hi = model.lam_min - 1.0 / (model.n * s)
    if hi <= lo:
        return lo

    def f(w):
        return np.mean(1.0 / (lam - w)) - s

    flo, fhi = f(lo), f(hi)
    if flo >= 0:
        w = lo
    elif fhi <= 0:
        w = hi
    else:
        w = brentq(f, lo, hi, xtol=1e-15 * max(1.0, abs(lo)), rtol=1e-15, maxiter=500)
    for _ in range(3):
        d = _stieltjes_deriv(model, w)
        step = f(w) / d
        wn = w - step
        if not wn < model.lam_min:
            break
        w = wn
        if abs(step) <= tol * max(1.0, abs(w)):
            break
    return float(w)


def r_transform(model, omega):
    """R(w) = S^{-1}(-w) - 1/w for w <= 0; small |w| uses the cumulant series."""
    model = _as_model(model)
    omega = float(omega)
    if omega > 0:
        raise DomainError("the R-transform is evaluated for omega <= 0 only")
    scale = max(abs(model.lam_min), abs(model.lam_max), 1e-300)
    if abs(omega) * scale < 1e-3:
        k1, k2, k3, k4 = model.free_cumulants()
        return k1 + omega * (k2 + omega * (k3 + omega * k4))
    return stieltjes_inverse(model, -omega) - 1.0 / omega


def predicted_curvature(P1, P2, diag=None):
    """eta_hat = 1 ./ d((P1 + P2)^-1) from Hessian diagonals or full matrices."""
    diag = diag or Diagonalizer.vector()
    P1 = np.asarray(P1, dtype=float)
    P2 = np.asarray(P2, dtype=float)
    if P1.ndim == 1 and P2.ndim == 1:
        tot = P1 + P2
        if np.any(tot <= 0):
            raise DomainError("P1 + P2 is singular")
        return 1.0 / diag.reduce(1.0 / tot)
    P1 = np.diag(P1) if P1.ndim == 1 else P1
    P2 = np.diag(P2) if P2.ndim == 1 else P2
    try:
        C = np.linalg.inv(P1 + P2)
    except np.linalg.LinAlgError:
        raise DomainError("P1 + P2 is singular") from None
    q = diag.reduce(np.diag(C))
    if np.any(q <= 0):
        raise DomainError("P1 + P2 is not positive definite")
    return 1.0 / q


def free_curvature(spec1, spec2):
    """Uniform curvature predicted by free addition: eta = R1(-1/eta) + R2(-1/eta)."""
    s1, s2 = _as_model(spec1), _as_model(spec2)
    lo = s1.lam_min + s2.lam_min
    hi = s1.moment(1) + s2.moment(1)
    if not hi > 0:
        raise DomainError("spectra have non-positive mean")
    lo = max(lo, 1e-12 * hi)

    def h(eta):
        return r_transform(s1, -1.0 / eta) + r_transform(s2, -1.0 / eta) - eta

    if hi - lo <= 1e-14 * hi:
        return hi
    hlo, hhi = h(lo), h(hi)
    if hlo <= 0:
        return lo
    if hhi >= 0:
        return hi
    return brentq(h, lo, hi, xtol=1e-14 * hi, rtol=1e-15, maxiter=500)


def freeness_residual(spec1, spec2, spec_sum, omega_grid):
    s1, s2, s12 = _as_model(spec1), _as_model(spec2), _as_model(spec_sum)
    return max(abs(r_transform(s12, w) - r_transform(s1, w) - r_transform(s2, w)) for w in omega_grid)


def marchenko_pastur_moments(n, m, scale=1.0):
    """First two spectral moments of A^T A for an M x N matrix with N(0, 1/M) entries."""
    return scale, scale ** 2 * (1.0 + n / m)


def marchenko_pastur_stieltjes(omega, n, m, scale=1.0):
    """Limiting Stieltjes transform of N^-1 tr(scale A^T A - omega I)^-1 for omega < 0."""
    if omega >= 0:
        raise DomainError("analytic form is provided for omega < 0 only")
    c = n / m
    z = omega / scale
    # limiting spectrum: (1 - 1/c)_+ mass at zero plus MP(ratio c) on the rest
    disc = np.sqrt((z - 1 - c) ** 2 - 4 * c)
    g = (-(z - 1 + c) - disc) / (2 * c * z)
    return float(g / scale)


def prior_variance(prior, n_nodes=64):
    x, w = prior.prior_nodes(n_nodes)
    mean = float(np.sum(w * x))
    return float(np.sum(w * x * x)) - mean ** 2


def expected_posterior_variance(prior, gamma, n_prior=64, n_noise=64):
    """E over x ~ prior and r = x + N(0, 1/gamma) of var(x | r, gamma)."""
    xs, wx = prior.prior_nodes(n_prior)
    t, wt = _probabilist_nodes(n_noise)
    r = xs[:, None] + t[None, :] / np.sqrt(gamma)
    _, var = prior.denoise(r.ravel(), np.full(r.size, float(gamma)))
    return float(np.sum(wx[:, None] * wt[None, :] * var.reshape(r.shape)))


@dataclass
class ReplicaResult:
    eta: float
    gamma1: float
    converged: bool
    iterations: int
    fixed_points: list = field(default_factory=list)
    starts: list = field(default_factory=list)
    bracket: tuple = None

    @property
    def mse(self):
        return 1.0 / self.eta


def _replica_single(prior, model, eta, damping, tol, max_iters, n_prior, n_noise):
    history = []
    for it in range(1, max_iters + 1):
        gamma1 = r_transform(model, -1.0 / eta)
        if not gamma1 > 0:
            raise DomainError(f"R-transform gave non-positive precision {gamma1}")
        v = expected_posterior_variance(prior, gamma1, n_prior, n_noise)
        target = 1.0 / max(v, 1e-300)
        new = damping * target + (1 - damping) * eta
        history.append(new)
        if abs(new - eta) <= tol * new:
            return new, r_transform(model, -1.0 / new), True, it, None
        eta = new
    tail = history[-20:]
    return eta, r_transform(model, -1.0 / eta), False, max_iters, (min(tail), max(tail))


def replica_fixed_point(prior, model, init_eta=None, damping=0.5, tol=1e-10, max_iters=5000,
                        n_prior=64, n_noise=64):
    """Solve gamma_1 = R_Y(-1/eta), 1/eta = E[var(x | r, gamma_1)] by damped iteration.

    Without ``init_eta`` three starts {0.1, 1, 10} x prior precision are run;
    the reported point is the one reached from the smallest start and all
    distinct limits are listed in ``fixed_points``.
    """
    model = _as_model(model)
    if init_eta is None:
        prec = 1.0 / prior_variance(prior, n_prior)
        starts = [0.1 * prec, prec, 10.0 * prec]
    else:
        starts = [float(init_eta)]
    runs = [_replica_single(prior, model, e0, damping, tol, max_iters, n_prior, n_noise) for e0 in starts]
    distinct = []
    for eta, g1, conv, _, _ in runs:
        if conv and not any(abs(eta - d[0]) <= 1e-6 * d[0] for d in distinct):
            distinct.append((eta, g1))
    eta, g1, conv, its, bracket = runs[0]
    return ReplicaResult(eta, g1, conv, its, distinct, starts, bracket)
