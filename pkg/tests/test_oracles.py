import numpy as np
import pytest

from gec.errors import EquivalenceError
from gec.oracles import (admm_reference, belief_moments, exact_gaussian_posterior, gec_admm_equivalence,
                         generic_map_solve, grid_mmse, grid_moments)
from gec.penalties import QuadraticPenalty, SeparablePenalty
from gec.scalar import BernoulliGaussian, Gaussian, Laplace
from gec.harness.checks import smooth_pair


def test_exact_gaussian_examples():
    mean, cov = exact_gaussian_posterior(np.eye(2), 1.0, np.zeros(2), np.ones(2), [2.0, 0.0])
    np.testing.assert_allclose(mean, [1.0, 0.0])
    np.testing.assert_allclose(cov, 0.5 * np.eye(2))
    mean, cov = exact_gaussian_posterior(np.eye(2), 1e-14, np.array([0.3, -1]), np.array([2.0, 4.0]), [5.0, 5.0])
    np.testing.assert_allclose(mean, [0.3, -1], atol=1e-12)
    np.testing.assert_allclose(np.diag(cov), [0.5, 0.25], atol=1e-12)


def test_grid_mmse_gaussian():
    m = grid_mmse([Gaussian(0.0, 1.0)], [[1.0]], 1.0, [2.0])
    assert m.mean[0] == pytest.approx(1.0, abs=1e-10)
    assert m.var[0] == pytest.approx(0.5, abs=1e-10)


def test_grid_mmse_bg_resolution():
    prior = BernoulliGaussian(0.4, 0.0, 1.0)
    a = grid_mmse([prior], [[1.0]], 1.0, [2.0])
    b = grid_mmse([prior], [[1.0]], 1.0, [2.0], n_points=801)
    assert abs(a.mean[0] - b.mean[0]) < 1e-8
    post = prior.denoise(np.array([2.0]), np.array([1.0]))
    assert abs(a.mean[0] - post[0][0]) < 1e-8


def test_grid_two_dim_gaussian_exact(rng):
    A = rng.normal(size=(2, 2))
    y = rng.normal(size=2)
    mean, cov = exact_gaussian_posterior(A, 2.0, np.zeros(2), np.ones(2), y)
    g = grid_mmse([Gaussian(0.0, 1.0)] * 2, A, 2.0, y)
    np.testing.assert_allclose(g.mean, mean, atol=1e-9)
    np.testing.assert_allclose(g.var, np.diag(cov), atol=1e-9)


def test_belief_moments_match_denoiser():
    prior = Laplace(1.5)
    r, g = np.array([0.7, -2.0]), np.array([1.3, 0.4])
    b = belief_moments([prior] * 2, r, g)
    m, v = prior.denoise(r, g)
    np.testing.assert_allclose(b.mean, m, atol=1e-9)
    np.testing.assert_allclose(b.var, v, atol=1e-9)


def test_grid_rejects_large_dimension():
    with pytest.raises(Exception):
        grid_moments([Gaussian()] * 4, np.eye(4), np.zeros(4))


def test_generic_map_examples(rng):
    f = (QuadraticPenalty(np.eye(1), [2.0]), QuadraticPenalty(np.eye(1), [0.0]))
    assert generic_map_solve(f).x[0] == pytest.approx(1.0, abs=1e-10)
    f = (SeparablePenalty(Laplace(1.0), 1), QuadraticPenalty(np.eye(1), [3.0]))
    assert generic_map_solve(f).x[0] == pytest.approx(2.0, abs=1e-9)
    f = smooth_pair(rng, 6)
    x = generic_map_solve(f).x
    assert np.max(np.abs(f[0].grad(x) + f[1].grad(x))) < 1e-9


def test_admm_quadratic():
    f = (QuadraticPenalty(np.eye(1), [2.0]), QuadraticPenalty(np.eye(1), [0.0]))
    last = admm_reference(f, 1.0, 200)[-1]
    assert last.x1[0] == pytest.approx(1.0, abs=1e-10) and last.x2[0] == pytest.approx(1.0, abs=1e-10)


def test_admm_mirror_pair():
    # f2(x) = f1(-x): the reference iterates reach a pair consistent with the mirror symmetry
    f = (QuadraticPenalty(np.eye(1), [1.0]), QuadraticPenalty(np.eye(1), [-1.0]))
    last = admm_reference(f, 1.0, 200)[-1]
    assert abs(last.x1[0]) < 1e-10 and abs(last.x2[0]) < 1e-10
    assert last.s[0] == pytest.approx(1.0, abs=1e-10)


def test_admm_l1_matches_map(rng):
    A = rng.normal(size=(6, 4))
    f = (SeparablePenalty(Laplace(0.7), 4), QuadraticPenalty.least_squares(A, rng.normal(size=6), 1.0))
    ref = generic_map_solve(f)
    st = admm_reference(f, 1.0, 2000)[-1]
    assert np.max(np.abs(st.x1 - ref.x)) < 1e-8


def test_equivalence_examples():
    f = (QuadraticPenalty(np.eye(1), [2.0]), QuadraticPenalty(np.eye(1), [0.0]))
    assert gec_admm_equivalence(f, 1.0, 10).max_deviation < 1e-12
    f = (SeparablePenalty(Laplace(1.0), 1), QuadraticPenalty(np.eye(1), [3.0]))
    assert gec_admm_equivalence(f, 1.0, 50).max_deviation < 1e-10


def test_equivalence_raises_on_mismatch(monkeypatch):
    import gec.oracles as oracles

    f = (QuadraticPenalty(np.eye(2), [2.0, 1.0]), QuadraticPenalty(np.eye(2), [0.0, 0.0]))
    real = oracles.admm_variant

    def broken(*args, **kw):
        x1, s2, x2, s1 = real(*args, **kw)
        return x1 + 1e-6, s2, x2, s1

    monkeypatch.setattr(oracles, "admm_variant", broken)
    with pytest.raises(EquivalenceError):
        oracles.gec_admm_equivalence(f, 1.0, 5)


def test_grid_symmetric_problem_has_symmetric_marginals():
    A = np.array([[1.0, 0.4], [0.4, 1.0]])
    prior = BernoulliGaussian(0.5, 0.0, 1.0)
    g = grid_mmse([prior, prior], A, 2.0, [0.8, 0.8])
    assert abs(g.var[0] - g.var[1]) < 1e-12 and abs(g.mean[0] - g.mean[1]) < 1e-12
