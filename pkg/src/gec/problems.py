"""Linear regression and generalized linear model instances, random matrices
and synthetic data."""
from dataclasses import dataclass, field

import numpy as np

from .diag import Diagonalizer
from .errors import ConfigError
from .penalties import LinearConstraintPenalty, QuadraticPenalty, SeparablePenalty
from .scalar import Gaussian, Probit, ScalarPenalty, make_prior

GAMMA_W_CAP = 1e12
MATRIX_KINDS = ("iid_gaussian", "row_orthogonal", "haar_spectrum")
LIKELIHOODS = ("gaussian", "probit")


@dataclass
class SlrInstance:
    A: np.ndarray
    gamma_w: float
    prior: ScalarPenalty
    y: np.ndarray
    x_true: np.ndarray = None

    def __post_init__(self):
        self.A = np.atleast_2d(np.asarray(self.A, dtype=float))
        self.y = np.atleast_1d(np.asarray(self.y, dtype=float))
        if self.y.shape != (self.A.shape[0],):
            raise ConfigError(f"y has length {self.y.size}, expected M={self.A.shape[0]}")
        if not self.gamma_w > 0:
            raise ConfigError("gamma_w must be positive")

    @property
    def shape(self):
        return self.A.shape


@dataclass
class GlmInstance:
    A: np.ndarray
    prior: ScalarPenalty
    likelihood: str
    y: np.ndarray
    likelihood_params: dict = field(default_factory=dict)
    x_true: np.ndarray = None
    z_true: np.ndarray = None

    def __post_init__(self):
        self.A = np.atleast_2d(np.asarray(self.A, dtype=float))
        self.y = np.atleast_1d(np.asarray(self.y, dtype=float))
        if self.likelihood not in LIKELIHOODS:
            raise ConfigError(f"unsupported likelihood {self.likelihood!r}; choose from {LIKELIHOODS}")
        if self.y.shape != (self.A.shape[0],):
            raise ConfigError(f"y has length {self.y.size}, expected M={self.A.shape[0]}")

    @property
    def partition(self):
        m, n = self.A.shape
        return n, m

    def likelihood_penalty(self):
        p = self.likelihood_params
        if self.likelihood == "gaussian":
            return Gaussian(mean=self.y, var=1.0 / min(float(p.get("gamma_w", 1.0)), GAMMA_W_CAP))
        return Probit(y=self.y, scale=float(p.get("scale", 1.0)))


def build_slr_penalties(instance):
    """f1 = -sum log p(x_n) (separable), f2 = gamma_w/2 ||y - A x||^2."""
    if not isinstance(instance.prior, ScalarPenalty):
        raise ConfigError("SLR prior must be a scalar prior family")
    n = instance.A.shape[1]
    f1 = SeparablePenalty(instance.prior, n)
    f2 = QuadraticPenalty.least_squares(instance.A, instance.y, min(instance.gamma_w, GAMMA_W_CAP))
    return f1, f2


def build_glm_penalties(instance, diag_choice="block"):
    """f1 separable over u = (x; z), f2 the indicator of {z = A x}.

    The default diagonalizer averages within the x- and z-blocks.
    """
    n, m = instance.partition
    if n < 1 or m < 1:
        raise ConfigError("GLM needs N, M >= 1")
    f1 = SeparablePenalty.stack([(instance.prior, n), (instance.likelihood_penalty(), m)])
    f2 = LinearConstraintPenalty(instance.A)
    if isinstance(diag_choice, Diagonalizer):
        diag = diag_choice
    elif diag_choice == "block":
        diag = Diagonalizer.block((n, m))
    else:
        diag = Diagonalizer.from_name(diag_choice)
    diag.check_dim(n + m)
    return f1, f2, diag


def haar_orthogonal(n, rng):
    """Haar-distributed n x n orthogonal matrix (QR of a Gaussian with sign fix)."""
    Z = rng.normal(size=(n, n))
    Q, R = np.linalg.qr(Z)
    return Q * np.sign(np.diag(R))


def generate_matrix(kind, M, N, seed, sigma=None):
    """Deterministic random M x N matrix.

    iid_gaussian: entries N(0, 1/M). row_orthogonal: A A^T = (N/M) I, needs
    M <= N. haar_spectrum: U Diag(sigma) V^T with Haar U, V and
    len(sigma) = min(M, N).
    """
    if M < 1 or N < 1:
        raise ConfigError("matrix dimensions must be positive")
    rng = np.random.default_rng(seed)
    if kind == "iid_gaussian":
        return rng.normal(scale=1.0 / np.sqrt(M), size=(M, N))
    if kind == "row_orthogonal":
        if M > N:
            raise ConfigError("row_orthogonal needs M <= N")
        Q, R = np.linalg.qr(rng.normal(size=(N, M)))
        Q = Q * np.sign(np.diag(R))
        return np.sqrt(N / M) * Q.T
    if kind == "haar_spectrum":
        k = min(M, N)
        sigma = np.ones(k) if sigma is None else np.asarray(sigma, dtype=float)
        if sigma.shape != (k,):
            raise ConfigError(f"sigma must have length min(M, N) = {k}, got {sigma.size}")
        U = haar_orthogonal(M, rng)
        V = haar_orthogonal(N, rng)
        return (U[:, :k] * sigma) @ V[:, :k].T
    raise ConfigError(f"unknown matrix kind {kind!r}; choose from {MATRIX_KINDS}")


@dataclass
class ProblemSpec:
    """Everything needed to synthesize one instance from a seed."""

    problem: str = "slr"
    n: int = 100
    m: int = 50
    prior: str = "bernoulli_gaussian"
    prior_params: dict = field(default_factory=dict)
    matrix: str = "iid_gaussian"
    sigma: list = None
    gamma_w: float = 100.0
    likelihood: str = "gaussian"
    likelihood_params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.problem not in ("slr", "glm"):
            raise ConfigError(f"problem must be 'slr' or 'glm', got {self.problem!r}")
        if self.n < 1 or self.m < 1:
            raise ConfigError("dimensions must be positive")
        if self.matrix not in MATRIX_KINDS:
            raise ConfigError(f"unknown matrix kind {self.matrix!r}")
        if not self.gamma_w > 0:
            raise ConfigError("gamma_w must be positive (use inf for noiseless data)")
        if self.problem == "glm" and self.likelihood not in LIKELIHOODS:
            raise ConfigError(f"unsupported likelihood {self.likelihood!r}")

    def make_prior(self):
        return make_prior(self.prior, **self.prior_params)


def synthesize_data(spec, seed):
    """Draw A, x from the prior and y from the likelihood, deterministically in ``seed``."""
    A = generate_matrix(spec.matrix, spec.m, spec.n, seed, spec.sigma)
    rng = np.random.default_rng([int(seed), 1])
    prior = spec.make_prior()
    x = np.asarray(prior.sample(rng, spec.n), dtype=float)
    z = A @ x
    if spec.problem == "slr":
        if np.isfinite(spec.gamma_w):
            y = z + rng.normal(scale=1.0 / np.sqrt(spec.gamma_w), size=spec.m)
        else:
            y = z.copy()
        return SlrInstance(A, float(spec.gamma_w), prior, y, x)
    params = dict(spec.likelihood_params)
    if spec.likelihood == "gaussian":
        gw = float(params.setdefault("gamma_w", spec.gamma_w))
        y = z + (rng.normal(scale=1.0 / np.sqrt(gw), size=spec.m) if np.isfinite(gw) else 0.0)
    else:
        y = Probit(scale=float(params.setdefault("scale", 1.0))).sample_observation(z, rng)
    return GlmInstance(A, prior, spec.likelihood, y, params, x, z)
