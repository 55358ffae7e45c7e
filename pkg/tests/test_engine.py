import warnings

import numpy as np
import pytest

from gec.diag import Diagonalizer
from gec.engine import (GecConfig, GecSide, GecState, contraction_bound, fixed_point_residuals, gec_half_step,
                        run_first_order, run_gec, run_two_stage_map, second_order_map)
from gec.errors import ConfigError, DivergenceError
from gec.oracles import generic_map_solve
from gec.penalties import QuadraticPenalty, SeparablePenalty
from gec.problems import SlrInstance, build_slr_penalties
from gec.scalar import Gaussian, Laplace, LogCosh
from gec.harness.checks import smooth_pair


def quad_pair():
    # f1 = (x-2)^2/2, f2 = x^2/2
    return QuadraticPenalty(np.eye(1), [2.0]), QuadraticPenalty(np.eye(1), [0.0])


def gaussian_slr():
    inst = SlrInstance(np.eye(2), 1.0, Gaussian(0.0, 1.0), [2.0, 0.0])
    return build_slr_penalties(inst)


def test_half_step_hand_evaluation():
    f = quad_pair()
    st = GecState(GecSide(np.array([2.0]), np.array([1.0])), GecSide(np.zeros(1), np.ones(1)))
    out = gec_half_step(st, 1, f, "map")
    assert out.side1.xhat[0] == pytest.approx(2.0)
    assert out.side1.eta[0] == pytest.approx(2.0)
    assert out.side2.gamma[0] == pytest.approx(1.0)
    assert out.side2.r[0] == pytest.approx(2.0)
    assert st.side1.xhat is None  # input untouched


def test_half_step_eta_is_gamma_sum(rng):
    f = smooth_pair(rng, 5)
    st = GecState(GecSide(rng.normal(size=5), rng.uniform(0.5, 2, 5)), GecSide(np.zeros(5), np.ones(5)))
    out = gec_half_step(st, 1, f, "map")
    np.testing.assert_allclose(out.side1.eta, out.side1.gamma + out.side2.gamma, rtol=1e-14)
    np.testing.assert_allclose(out.side2.beta, out.side1.eta * out.side1.xhat - st.side1.beta, atol=1e-12)


def test_gaussian_slr_run():
    st, tr = run_gec(GecConfig(mode="mmse"), gaussian_slr())
    assert tr.converged
    np.testing.assert_allclose(st.xhat, [1.0, 0.0], atol=1e-10)
    np.testing.assert_allclose(st.eta, [2.0, 2.0], atol=1e-10)
    res = fixed_point_residuals(st, gaussian_slr(), "mmse")
    assert max(res.values()) < 1e-10


def test_perturbed_fixed_point_detected():
    f = gaussian_slr()
    st, _ = run_gec(GecConfig(mode="mmse"), f)
    bad = GecState(GecSide(st.side1.r + 0.1, st.side1.gamma), st.side2)
    assert fixed_point_residuals(bad, f, "mmse")["xhat_consistency"] > 1e-3


def test_l1_map_run():
    f = (SeparablePenalty(Laplace(1.0), 1), QuadraticPenalty(np.eye(1), [3.0]))
    st, tr = run_gec(GecConfig(mode="map", gamma_floor=1e-12), f)
    assert tr.converged
    assert st.xhat[0] == pytest.approx(2.0, abs=1e-8)
    assert fixed_point_residuals(st, f, "map")["gradient"] < 1e-6


def test_l1_ls_stationarity(rng):
    A = rng.normal(size=(8, 5))
    f = (SeparablePenalty(Laplace(0.5), 5), QuadraticPenalty.least_squares(A, rng.normal(size=8), 1.0))
    st, tr = run_gec(GecConfig(mode="map", gamma_floor=1e-12, max_iters=2000), f)
    x = st.xhat
    g = f[1].grad(x)
    # coordinate-wise optimality of the soft-threshold solution
    on = np.abs(x) > 1e-8
    assert np.max(np.abs(g[on] + 0.5 * np.sign(x[on])), initial=0) < 1e-6
    assert np.all(np.abs(g[~on]) <= 0.5 + 1e-6)


def test_moment_matching_example():
    from gec.harness.checks import suite_bfe_moments
    assert suite_bfe_moments(n_random=4).passed


def test_trace_records_and_limits():
    st, tr = run_gec(GecConfig(mode="mmse", max_iters=3, fixed_point_tol=1e-30), gaussian_slr())
    assert len(tr.records) <= 3
    assert tr.termination in ("converged", "max_iters")


def test_divergence_detected():
    f = gaussian_slr()
    bad = (f[0], QuadraticPenalty(np.diag([np.nan, 1.0]), [0.0, 0.0]))
    with pytest.raises(DivergenceError):
        run_gec(GecConfig(mode="mmse"), bad)


def test_config_validation():
    with pytest.raises(ConfigError):
        GecConfig(mode="median")
    with pytest.raises(ConfigError):
        GecConfig(init_gamma1=-1.0)
    with pytest.raises(ConfigError):
        GecConfig(mode="mmse", schedule="two_stage_map")
    with pytest.raises(ConfigError):
        GecConfig(damping_factor=1.5)


def test_first_order_quadratic():
    f = quad_pair()
    a = run_first_order(np.array([0.0]), np.ones(1), np.ones(1), f)
    b = run_first_order(np.array([5.0]), np.array([0.3]), np.array([2.5]), f)
    assert a.converged and b.converged
    assert a.xhat[0] == pytest.approx(1.0, abs=1e-10)
    assert abs(a.xhat[0] - b.xhat[0]) < 1e-8


def test_first_order_smooth_pair(rng):
    f = smooth_pair(rng, 5)
    res = run_first_order(rng.normal(size=5), np.ones(5), np.ones(5), f)
    assert np.max(np.abs(f[0].grad(res.xhat) + f[1].grad(res.xhat))) < 1e-7
    assert max(res.ratios) < 1


def test_first_order_non_contraction_warns():
    # gamma far from both curvatures on a nonconvex-free but badly scaled pair
    f = (QuadraticPenalty(np.eye(1) * 1e-3, [0.0]), QuadraticPenalty(np.eye(1) * 1e3, [0.0]))
    with warnings.catch_warnings(record=True):
        res = run_first_order(np.array([1.0]), np.array([1e4]), np.array([1e-4]), f, max_iters=50)
    assert res.converged or res.non_contraction or len(res.residuals) == 50


def test_contraction_bound_forms():
    g1, g2 = np.array([1.0, 2.0]), np.array([2.0, 0.5])
    c1, c2 = (0.5, 1.0), (0.2, 3.0)
    assert contraction_bound(g1, g2, c1, c2) <= contraction_bound(g1, g2, c1, c2, rigorous=True)
    # uniform gamma equal to the geometric mean of the curvatures gives a small bound
    assert contraction_bound(1.0, 1.0, (1.0, 1.0), (1.0, 1.0)) == 0.0


def test_two_stage_quadratic_diagonal():
    P1, P2 = np.diag([1.0, 2.0]), np.diag([3.0, 0.5])
    f = (QuadraticPenalty(P1, [1.0, 0.0]), QuadraticPenalty(P2, [0.0, 1.0]))
    cfg = GecConfig(mode="map", schedule="two_stage_map", init_gamma1=[0.7, 1.3], init_gamma2=[2.0, 0.4])
    st, tr = run_two_stage_map(cfg, f)
    # for diagonal P, the first Stage-2 update already lands on the Hessian diagonals
    np.testing.assert_allclose(tr.records[0].gamma2, np.diag(P1), atol=1e-12)
    np.testing.assert_allclose(st.side2.eta, np.diag(P1 + P2), atol=1e-10)


def test_two_stage_smooth_pair(rng):
    f = smooth_pair(rng, 6)
    ref = generic_map_solve(f)
    lims = []
    for g0 in (rng.uniform(0.3, 3, 6), rng.uniform(0.3, 3, 6)):
        cfg = GecConfig(mode="map", schedule="two_stage_map", init_r1=np.zeros(6), init_gamma1=g0)
        st, tr = run_two_stage_map(cfg, f)
        for rec in tr.records:
            assert np.max(np.abs(rec.xhat1 - ref.x)) < 1e-8 * (1 + np.max(np.abs(ref.x)))
        lims.append(st.side1.gamma)
    assert np.max(np.abs(lims[0] - lims[1])) < 1e-6


def test_second_order_map_diagonal():
    P = np.diag([1.0, 4.0])
    np.testing.assert_allclose(second_order_map(P, [0.3, 7.0]), [1.0, 4.0], atol=1e-14)


def test_second_order_map_stable_vs_direct(rng):
    A = rng.normal(size=(5, 5))
    P = A @ A.T + np.eye(5)
    g = rng.uniform(0.1, 2, 5)
    np.testing.assert_allclose(second_order_map(P, g), second_order_map(P, g, stable=False), rtol=1e-9)


def test_uniform_diag_runs_on_logcosh(rng):
    n = 8
    f = (SeparablePenalty(LogCosh(1.0, 0.5, 0.0), n), QuadraticPenalty.least_squares(rng.normal(size=(10, n)),
                                                                                    rng.normal(size=10), 2.0))
    st, tr = run_gec(GecConfig(mode="map", diagonalizer=Diagonalizer.uniform()), f)
    assert tr.converged
    assert np.ptp(st.side1.gamma) == 0
