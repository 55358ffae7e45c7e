"""Independent reference computations used to validate the GEC engine."""
import itertools
from dataclasses import dataclass

import numpy as np
from numpy.polynomial.legendre import leggauss
from scipy.linalg import LinAlgError, cho_factor, cho_solve

from .engine import run_first_order
from .errors import AccuracyError, ConfigError, DomainError, EquivalenceError


def exact_gaussian_posterior(A, gamma_w, prior_mean, prior_precision_diag, y):
    """Mean and covariance of N(prior_mean, Diag(1/prior_precision)) given y = A x + N(0, 1/gamma_w)."""
    A = np.asarray(A, dtype=float)
    n = A.shape[1]
    mu = np.broadcast_to(np.asarray(prior_mean, dtype=float), (n,))
    p = np.broadcast_to(np.asarray(prior_precision_diag, dtype=float), (n,))
    if np.any(p <= 0) or gamma_w < 0:
        raise DomainError("prior precisions must be positive and gamma_w non-negative")
    prec = gamma_w * A.T @ A + np.diag(p)
    try:
        fac = cho_factor(prec)
    except LinAlgError:
        raise DomainError("posterior precision is singular") from None
    mean = cho_solve(fac, gamma_w * A.T @ np.asarray(y, dtype=float) + p * mu)
    cov = cho_solve(fac, np.eye(n))
    return mean, 0.5 * (cov + cov.T)


# ---------------------------------------------------------------------------
# tensor-grid quadrature for N <= 3


@dataclass
class GridMoments:
    mean: np.ndarray
    var: np.ndarray
    second: np.ndarray
    error: float
    points: int


def _panel_rule(edges, n_per_panel):
    t, w = leggauss(n_per_panel)
    xs, ws = [], []
    for a, b in zip(edges[:-1], edges[1:]):
        if b <= a:
            continue
        xs.append(0.5 * (b - a) * t + 0.5 * (a + b))
        ws.append(0.5 * (b - a) * w)
    return np.concatenate(xs), np.concatenate(ws)


def _axis_rule(prior, lo, hi, n_points):
    """Nodes and log-weights for one axis: atoms plus panelled Gauss-Legendre."""
    n_panels = max(1, n_points // 20)
    edges = np.linspace(lo, hi, n_panels + 1)
    inner = [b for b in prior.breakpoints() if lo < b < hi]
    edges = np.unique(np.concatenate([edges, inner]))
    x, w = _panel_rule(edges, 20)
    with np.errstate(divide="ignore"):
        logw = np.log(w) + np.log(prior.density(x))
    for loc, mass in prior.atoms():
        x = np.append(x, float(loc))
        logw = np.append(logw, np.log(float(np.asarray(mass).ravel()[0])))
    return x, logw


def _ranges(priors, H, b, width):
    """Per-axis integration ranges covering every atom / slab configuration."""
    n = len(priors)
    loc = np.array([p.spread()[0] for p in priors])
    scale = np.array([p.spread()[1] for p in priors])
    lo = loc - width * scale
    hi = loc + width * scale
    choices = [[False] + ([True] if p.atoms() else []) for p in priors]
    for pick in itertools.product(*choices):
        free = [k for k in range(n) if not pick[k]]
        if not free:
            continue
        fixed = np.array([float(priors[k].atoms()[0][0]) if pick[k] else 0.0 for k in range(n)])
        Hf = H[np.ix_(free, free)] + np.diag(1.0 / scale[free] ** 2)
        rhs = b[free] - H[np.ix_(free, range(n))] @ fixed + loc[free] / scale[free] ** 2
        systems = [(Hf, rhs)]
        # the quadratic factor alone covers factors that are flat on one side (probit)
        H0 = H[np.ix_(free, free)]
        if np.all(np.linalg.eigvalsh(H0) > 0):
            systems.append((H0, rhs - loc[free] / scale[free] ** 2))
        for M, v in systems:
            C = np.linalg.inv(M)
            m = C @ v
            s = np.sqrt(np.diag(C))
            lo[free] = np.minimum(lo[free], m - width * s)
            hi[free] = np.maximum(hi[free], m + width * s)
    return lo, hi


def _grid_pass(priors, H, b, lo, hi, n_points):
    axes = [_axis_rule(p, lo[k], hi[k], n_points) for k, p in enumerate(priors)]
    grids = np.meshgrid(*[a[0] for a in axes], indexing="ij")
    logw = sum(np.meshgrid(*[a[1] for a in axes], indexing="ij"))
    X = np.stack([g.ravel() for g in grids], axis=1)
    logw = logw.ravel() - 0.5 * np.einsum("ij,jk,ik->i", X, H, X) + X @ b
    logw -= np.max(logw)
    w = np.exp(logw)
    z = w.sum()
    mean = w @ X / z
    second = w @ (X * X) / z
    return mean, second, X.shape[0]


def grid_moments(priors, H, b, n_points=401, tol=1e-9, width=8.0):
    """Moments of p(x) proportional to prod_n prior_n(x_n) exp(-1/2 x^T H x + b^T x).

    The error estimate compares against a run with about half the nodes per
    axis; :class:`AccuracyError` is raised when it exceeds ``tol``.
    """
    priors = list(priors)
    n = len(priors)
    if n > 3:
        raise ConfigError("grid quadrature is limited to N <= 3")
    H = np.atleast_2d(np.asarray(H, dtype=float))
    b = np.atleast_1d(np.asarray(b, dtype=float))
    lo, hi = _ranges(priors, H, b, width)
    mean, second, pts = _grid_pass(priors, H, b, lo, hi, n_points)
    mean_c, second_c, _ = _grid_pass(priors, H, b, lo, hi, n_points // 2)
    err = float(max(np.max(np.abs(mean - mean_c)), np.max(np.abs(second - second_c))))
    if err > tol:
        raise AccuracyError(f"grid error estimate {err:.2e} exceeds {tol:.2e}")
    return GridMoments(mean, second - mean ** 2, second, err, pts)


def _priors_list(prior, n):
    if isinstance(prior, (list, tuple)):
        if len(prior) != n:
            raise ConfigError("need one prior per component")
        return list(prior)
    return [prior] * n


def grid_mmse(prior, A, gamma_w, y, n_points=401, tol=1e-9):
    """Posterior mean and marginal variances of the linear-regression posterior by tensor quadrature."""
    A = np.atleast_2d(np.asarray(A, dtype=float))
    y = np.atleast_1d(np.asarray(y, dtype=float))
    priors = _priors_list(prior, A.shape[1])
    return grid_moments(priors, gamma_w * A.T @ A, gamma_w * A.T @ y, n_points, tol)


def belief_moments(prior, r, gamma, n_points=401, tol=1e-9):
    """Moments of b(x) proportional to prod_n prior_n(x_n) exp(-1/2 ||x - r||^2_gamma)."""
    r = np.atleast_1d(np.asarray(r, dtype=float))
    gamma = np.broadcast_to(np.asarray(gamma, dtype=float), r.shape)
    priors = _priors_list(prior, r.size)
    return grid_moments(priors, np.diag(gamma), gamma * r, n_points, tol)


# ---------------------------------------------------------------------------
# generic MAP solver


@dataclass
class MapSolveResult:
    x: np.ndarray
    residual: float
    iterations: int
    converged: bool
    method: str


def _total(penalties, x):
    return penalties[0].value(x) + penalties[1].value(x)


def _newton(penalties, x, tol, max_iters):
    f1, f2 = penalties
    it = 0
    g = f1.grad(x) + f2.grad(x)
    for it in range(1, max_iters + 1):
        H = f1.hessian(x) + f2.hessian(x)
        step = np.linalg.solve(H, g)
        t = 1.0
        f0 = _total(penalties, x)
        while t > 1e-12 and _total(penalties, x - t * step) > f0 - 0.25 * t * g @ step + 1e-15 * abs(f0):
            t *= 0.5
        x = x - t * step
        g = f1.grad(x) + f2.grad(x)
        if np.max(np.abs(g)) <= tol:
            return MapSolveResult(x, float(np.max(np.abs(g))), it, True, "newton")
    return MapSolveResult(x, float(np.max(np.abs(g))), it, False, "newton")


def _fista(smooth, other, x, tol, max_iters):
    n = x.size
    L = 1.0
    y = x.copy()
    t = 1.0
    fx = smooth.value(x) + other.value(x)
    res = np.inf
    it = 0
    for it in range(1, max_iters + 1):
        gy = smooth.grad(y)
        fy = smooth.value(y)
        while True:
            xn = other.prox(y - gy / L, np.full(n, L))
            d = xn - y
            if smooth.value(xn) <= fy + gy @ d + 0.5 * L * d @ d + 1e-14 * abs(fy):
                break
            L *= 2.0
        fn = smooth.value(xn) + other.value(xn)
        if fn > fx:
            # adaptive restart
            t = 1.0
            y = x.copy()
            L *= 1.5
            continue
        tn = 0.5 * (1 + np.sqrt(1 + 4 * t * t))
        y = xn + ((t - 1) / tn) * (xn - x)
        x, fx, t = xn, fn, tn
        res = float(np.max(other.subgrad_distance(x, smooth.grad(x))))
        if res <= tol:
            return MapSolveResult(x, res, it, True, "fista")
        L = max(L / 1.1, 1e-12)
    return MapSolveResult(x, res, it, False, "fista")


def generic_map_solve(penalties, x_init=None, tol=1e-10, max_iters=200000):
    """Minimize f1 + f2 independently of GEC.

    Damped Newton when both penalties are smooth; otherwise accelerated
    proximal gradient with backtracking on the smooth side and the prox of the
    other, stopped on the subdifferential distance.
    """
    f1, f2 = penalties
    x = np.zeros(f1.dim) if x_init is None else np.array(x_init, dtype=float)
    if f1.smooth and f2.smooth:
        res = _newton(penalties, x, tol, min(max_iters, 500))
        if res.converged:
            return res
        return _fista(f1, f2, res.x, tol, max_iters)
    if f2.smooth:
        return _fista(f2, f1, x, tol, max_iters)
    if f1.smooth:
        return _fista(f1, f2, x, tol, max_iters)
    raise ConfigError("generic_map_solve needs at least one smooth penalty")


# ---------------------------------------------------------------------------
# ADMM


@dataclass
class AdmmState:
    x1: np.ndarray
    x2: np.ndarray
    s: np.ndarray
    gamma: float

    def __post_init__(self):
        if not self.gamma > 0:
            raise ConfigError("ADMM step must be positive")


def _scalar_gamma(gamma, n):
    if np.ndim(gamma) != 0:
        raise ConfigError("ADMM uses a scalar step size")
    gamma = float(gamma)
    if not gamma > 0:
        raise ConfigError("ADMM step must be positive")
    return gamma, np.full(n, gamma)


def admm_reference(penalties, gamma, iters, init=None):
    """Standard ADMM on L(x1, x2, s) = f1(x1) + f2(x2) + s^T (x1 - x2) + gamma/2 ||x1 - x2||^2.

    ``init`` is ``(x2, s)``; returns the list of :class:`AdmmState` after each iteration.
    """
    f1, f2 = penalties
    n = f1.dim
    gamma, gv = _scalar_gamma(gamma, n)
    x2, s = (np.zeros(n), np.zeros(n)) if init is None else (np.array(init[0], float), np.array(init[1], float))
    out = []
    for _ in range(iters):
        x1 = f1.prox(x2 - s / gamma, gv)
        x2 = f2.prox(x1 + s / gamma, gv)
        s = s + gamma * (x1 - x2)
        out.append(AdmmState(x1, x2, s, gamma))
    return out


def admm_variant(penalties, gamma, iters, x2_init, s1_init):
    """ADMM with two dual updates per iteration.

    Returns arrays ``(x1[k], s2[k], x2[k+1], s1[k+1])`` for k = 0..iters-1.
    """
    f1, f2 = penalties
    n = f1.dim
    gamma, gv = _scalar_gamma(gamma, n)
    x2 = np.array(x2_init, dtype=float)
    s1 = np.array(s1_init, dtype=float)
    X1, S2, X2, S1 = [], [], [], []
    for _ in range(iters):
        x1 = f1.prox(x2 - s1 / gamma, gv)
        s2 = s1 + gamma * (x1 - x2)
        x2 = f2.prox(x1 + s2 / gamma, gv)
        s1 = s2 + gamma * (x1 - x2)
        X1.append(x1)
        S2.append(s2)
        X2.append(x2)
        S1.append(s1)
    return np.array(X1), np.array(S2), np.array(X2), np.array(S1)


@dataclass
class EquivalenceReport:
    max_deviation: float
    deviations: np.ndarray
    iterations: int


def gec_admm_equivalence(penalties, gamma, iters, r1_init=None, tol=1e-10, raise_on_fail=True):
    """Compare frozen-precision MAP-GEC with the two-dual ADMM variant.

    With gamma_1 = gamma_2 = gamma and eta = 2 gamma the GEC sweep k gives
    r_1^k, xhat_1^k, r_2^k, xhat_2^{k+1}. The duals are read off as
    s_1^k = gamma (xhat_2^k - r_1^k) and s_2^k = gamma (r_2^k - xhat_1^k), with
    xhat_2^0 = r_1^0 so that the variant starts from (x_2, s_1) = (r_1^0, 0).
    """
    f1 = penalties[0]
    n = f1.dim
    gamma, gv = _scalar_gamma(gamma, n)
    r1 = np.zeros(n) if r1_init is None else np.array(r1_init, dtype=float)
    fo = run_first_order(gamma * r1, gv, gv, penalties, tol=0.0, max_iters=iters, keep_trajectory=True)
    traj = fo.trajectory
    R1 = np.array([t[0] for t in traj])
    G1 = np.array([t[1] for t in traj])
    R2 = np.array([t[2] for t in traj])
    G2 = np.array([t[3] for t in traj])
    prev_x2 = np.vstack([r1[None, :], G2[:-1]])
    s1 = gamma * (prev_x2 - R1)
    s2 = gamma * (R2 - G1)
    s1_next = gamma * (G2 - np.vstack([R1[1:], fo.r1[None, :]]))
    X1, S2, X2, S1 = admm_variant(penalties, gamma, iters, r1, np.zeros(n))
    dev = np.max(np.stack([
        np.max(np.abs(X1 - G1), axis=1),
        np.max(np.abs(S2 - s2), axis=1),
        np.max(np.abs(X2 - G2), axis=1),
        np.max(np.abs(S1 - s1_next), axis=1),
    ]), axis=0)
    report = EquivalenceReport(float(np.max(dev)), dev, iters)
    if raise_on_fail and report.max_deviation > tol:
        k = int(np.argmax(dev > tol))
        raise EquivalenceError(f"trajectories differ by {dev[k]:.3e} at iteration {k}", k, float(dev[k]))
    return report
