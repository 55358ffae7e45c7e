import numpy as np
import pytest
from scipy import integrate

from gec.diag import Diagonalizer, apply_diagonalizer
from gec.errors import ConfigError, CurvatureError
from gec.penalties import (LinearConstraintPenalty, QuadraticPenalty, SeparablePenalty, map_sensitivity_diag,
                           mmse_cov_diag, mmse_mean, prox_map)
from gec.scalar import BernoulliGaussian, Gaussian, Laplace, LogCosh, Probit, make_prior

BG = BernoulliGaussian(0.5, 0.0, 1.0)


def _quad_moments(prior, r, gamma, lo=-12, hi=12, n=2_000_001):
    # dense trapezoid oracle, with the atom handled analytically
    x = np.linspace(lo, hi, n)
    like = np.exp(-0.5 * gamma * (x - r) ** 2)
    slab = prior.rho * np.exp(-0.5 * (x - prior.mean) ** 2 / prior.var) / np.sqrt(2 * np.pi * prior.var)
    z = integrate.trapezoid(slab * like, x)
    m1 = integrate.trapezoid(x * slab * like, x)
    m2 = integrate.trapezoid(x * x * slab * like, x)
    atom = (1 - prior.rho) * np.exp(-0.5 * gamma * r ** 2)
    z += atom
    mean = m1 / z
    return mean, m2 / z - mean ** 2


# prox_map

def test_prox_quadratic():
    f = SeparablePenalty(Gaussian(0.0, 1.0), 1)
    np.testing.assert_allclose(prox_map([2.0], [1.0], f), [1.0])


def test_prox_l1():
    f = SeparablePenalty(Laplace(1.0), 2)
    np.testing.assert_allclose(prox_map([3.0, 0.5], [1.0, 1.0], f), [2.0, 0.0])


def test_prox_bernoulli_gaussian_vs_grid():
    r, g = 1.7, 2.0
    x = np.arange(-10, 10, 1e-5)
    obj = BG.value(x) + 0.5 * g * (x - r) ** 2
    k = np.argmin(obj)
    fine = np.linspace(x[k] - 2e-5, x[k] + 2e-5, 40001)
    best = fine[np.argmin(BG.value(fine) + 0.5 * g * (fine - r) ** 2)]
    got = prox_map([r], [g], SeparablePenalty(BG, 1))[0]
    assert abs(got - best) < 1e-8


def test_prox_logcosh_optimality(rng):
    f = LogCosh(2.0, 0.7, 0.3)
    r = rng.normal(size=50)
    g = rng.uniform(0.1, 3, 50)
    x = f.prox(r, g)
    np.testing.assert_allclose(f.grad(x) + g * (x - r), 0.0, atol=1e-9)


# map_sensitivity_diag

def test_sensitivity_examples():
    P = QuadraticPenalty(np.eye(2), np.zeros(2))
    np.testing.assert_allclose(map_sensitivity_diag(np.zeros(2), np.ones(2), P, Diagonalizer.vector()), [0.5, 0.5])
    P = QuadraticPenalty(np.diag([1.0, 3.0]), np.zeros(2))
    np.testing.assert_allclose(map_sensitivity_diag(np.zeros(2), np.ones(2), P, Diagonalizer.uniform()), [0.375, 0.375])
    P = QuadraticPenalty(np.array([[2.0, 1.0], [1.0, 2.0]]), np.zeros(2))
    np.testing.assert_allclose(map_sensitivity_diag(np.zeros(2), np.ones(2), P, Diagonalizer.vector()), [0.375, 0.375])


def test_sensitivity_nonconvex_raises():
    f = SeparablePenalty(Gaussian(0.0, 1.0), 1)
    f.segments[0][0].var = -1.0
    with pytest.raises(CurvatureError):
        map_sensitivity_diag(np.zeros(1), np.full(1, 0.5), f)


# mmse_mean / mmse_cov_diag

def test_mmse_gaussian():
    f = SeparablePenalty(Gaussian(0.0, 1.0), 1)
    np.testing.assert_allclose(mmse_mean([2.0], [1.0], f), [1.0])
    np.testing.assert_allclose(mmse_cov_diag([2.0], [1.0], f), [0.5])


def test_mmse_bg_symmetry():
    np.testing.assert_allclose(mmse_mean([0.0], [1.0], SeparablePenalty(BG, 1)), [0.0], atol=1e-15)


def test_mmse_bg_vs_trapezoid():
    mean, var = _quad_moments(BG, 1.5, 2.0)
    f = SeparablePenalty(BG, 1)
    assert abs(mmse_mean([1.5], [2.0], f)[0] - mean) < 1e-8
    assert abs(mmse_cov_diag([1.5], [2.0], f)[0] - var) < 1e-8


def test_mmse_quadratic_uniform():
    f = QuadraticPenalty.least_squares(np.eye(3), np.zeros(3), 1.0)
    np.testing.assert_allclose(mmse_cov_diag(np.zeros(3), np.ones(3), f, Diagonalizer.uniform()), [0.5] * 3)


def test_laplace_and_logcosh_denoisers_vs_quad():
    for prior in (Laplace(1.3), LogCosh(1.5, 0.8, -0.2)):
        for r, g in ((0.4, 1.0), (-2.0, 0.5), (3.0, 4.0)):
            x = np.linspace(-30, 30, 600001)
            w = np.exp(-prior.value(x) - 0.5 * g * (x - r) ** 2)
            z = integrate.trapezoid(w, x)
            mean = integrate.trapezoid(x * w, x) / z
            var = integrate.trapezoid((x - mean) ** 2 * w, x) / z
            m, v = prior.denoise(np.array([r]), np.array([g]))
            assert abs(m[0] - mean) < 1e-8 and abs(v[0] - var) < 1e-8


def test_probit_denoiser_vs_quad():
    p = Probit(y=np.array([1.0]), scale=0.6)
    x = np.linspace(-30, 30, 600001)
    for r, g in ((0.5, 1.0), (-2.0, 3.0)):
        w = np.exp(-p.value(x) - 0.5 * g * (x - r) ** 2)
        z = integrate.trapezoid(w, x)
        mean = integrate.trapezoid(x * w, x) / z
        m, v = p.denoise(np.array([r]), np.array([g]))
        assert abs(m[0] - mean) < 1e-8


# diagonalizers

def test_diagonalizer_examples():
    Q = np.diag([1.0, 3.0])
    np.testing.assert_allclose(apply_diagonalizer(Q, Diagonalizer.vector()), [1, 3])
    np.testing.assert_allclose(apply_diagonalizer(Q, Diagonalizer.uniform()), [2, 2])
    np.testing.assert_allclose(apply_diagonalizer(np.diag([1.0, 3, 5, 7]), Diagonalizer.block((2, 2))), [2, 2, 6, 6])


def test_diagonalizer_validation():
    with pytest.raises(ConfigError):
        Diagonalizer("median")
    with pytest.raises(ConfigError):
        Diagonalizer.block((2, 0))
    with pytest.raises(ConfigError):
        Diagonalizer.block((2, 2)).reduce(np.ones(3))


# linear constraint penalty

def test_projection_idempotent(rng):
    A = rng.normal(size=(4, 6))
    f = LinearConstraintPenalty(A)
    x = rng.normal(size=6)
    u = np.concatenate([x, A @ x])
    np.testing.assert_allclose(f.prox(u, rng.uniform(0.5, 2, 10)), u, atol=1e-12)


def test_projection_identity_average():
    f = LinearConstraintPenalty(np.eye(2))
    out = f.prox(np.array([1.0, 2.0, 3.0, 6.0]), np.ones(4))
    np.testing.assert_allclose(out, [2.0, 4.0, 2.0, 4.0])


def test_projection_matches_kkt(rng):
    A = rng.normal(size=(4, 6))
    f = LinearConstraintPenalty(A)
    r = rng.normal(size=10)
    g = rng.uniform(0.3, 3, 10)
    u = f.prox(r, g)
    x, z = f.split(u)
    assert np.max(np.abs(z - A @ x)) < 1e-10
    # min 1/2 (u-r)^T G (u-r) s.t. [A -I] u = 0
    B = np.hstack([A, -np.eye(4)])
    K = np.block([[np.diag(g), B.T], [B, np.zeros((4, 4))]])
    sol = np.linalg.solve(K, np.concatenate([g * r, np.zeros(4)]))
    np.testing.assert_allclose(u, sol[:10], atol=1e-10)


def test_constraint_value():
    f = LinearConstraintPenalty(np.eye(2))
    assert f.value(np.array([1.0, 2.0, 1.0, 2.0])) == 0
    assert f.value(np.array([1.0, 2.0, 1.0, 3.0])) == np.inf


# penalty flags and families

def test_capability_flags():
    assert SeparablePenalty(Gaussian(), 3).is_quadratic
    assert not SeparablePenalty(Laplace(1.0), 3).is_quadratic
    assert QuadraticPenalty(np.eye(2), np.zeros(2)).is_quadratic
    lc = LinearConstraintPenalty(np.ones((1, 2)))
    assert lc.is_linear_constraint and lc.dim == 3


def test_stacked_penalty():
    f = SeparablePenalty.stack([(Gaussian(0.0, 1.0), 2), (Laplace(1.0), 1)])
    np.testing.assert_allclose(f.prox(np.array([2.0, 2.0, 3.0]), np.ones(3)), [1.0, 1.0, 2.0])


def test_curvature_bounds_logcosh():
    f = SeparablePenalty(LogCosh(a=[1.0, 2.0], c=[0.5, 0.2], loc=0.0), 2)
    lo, hi = f.curvature_bounds()
    x = np.linspace(-5, 5, 101)
    for xi in x:
        c = f.curvature(np.array([xi, -xi]))
        assert np.all(c >= lo - 1e-12) and np.all(c <= hi + 1e-12)


def test_make_prior():
    assert make_prior("bernoulli_gaussian", rho=0.2).rho == 0.2
    with pytest.raises(ConfigError):
        make_prior("cauchy")


def test_logcosh_denoiser_slow_gauss_hermite_case():
    # Gauss-Hermite settles only algebraically here; the panel fallback must take over
    f = LogCosh(0.5133361218599406, 0.2384132465038978, -1.2727803771617725)
    r, g = 6.6758729872914095, 0.16371015320882976

    def w(x):
        return np.exp(-(f.a * np.log(np.cosh(x - f.loc)) + 0.5 * f.c * x * x + 0.5 * g * (x - r) ** 2))

    z = integrate.quad(w, -60, 60, limit=400, epsabs=0, epsrel=1e-13)[0]
    m = integrate.quad(lambda x: x * w(x), -60, 60, limit=400, epsabs=0, epsrel=1e-13)[0] / z
    v = integrate.quad(lambda x: (x - m) ** 2 * w(x), -60, 60, limit=400, epsabs=0, epsrel=1e-13)[0] / z
    mean, var = f.denoise(np.array([r]), np.array([g]))
    assert abs(mean[0] - m) < 1e-8 and abs(var[0] - v) < 1e-8
