import numpy as np
import pytest
from numpy.testing import assert_allclose

from kfptools import (RegionSet, SamplerState, ScalarField, apply_semigroup,
                      box_probability, chapman_kolmogorov_check, kernel_eval,
                      mt_distance, sample_transition)
from kfptools.kernel import normalization_check


def test_mt_distance_euclidean(heat):
    X = np.array([0.3, -0.2])
    Y = np.array([1.0, 0.7])
    for t in [0.1, 1.0, 4.0]:
        assert_allclose(mt_distance(heat, t, X, Y), np.linalg.norm(Y - X), rtol=1e-12)


def test_mt_distance_vanishes_on_flow(kolmogorov, rotation):
    X = np.array([0.5, 1.5])
    for spec in [kolmogorov, rotation]:
        from kfptools import propagator
        Y = propagator(spec, 0.8) @ X
        assert mt_distance(spec, 0.8, X, Y) < 1e-12


def test_mt_distance_kolmogorov_value(kolmogorov):
    # K(1) = [[1,1/2],[1/2,1/3]]; <K^{-1} e1, e1> = 4
    d = mt_distance(kolmogorov, 1.0, np.zeros(2), np.array([1.0, 0.0]))
    assert_allclose(d, 2.0, rtol=1e-12)


def test_kernel_classical_reduction(heat):
    rng = np.random.default_rng(42)
    for _ in range(100):
        X = rng.normal(size=2)
        Y = rng.normal(size=2)
        t = float(rng.uniform(0.05, 5.0))
        expected = np.exp(-np.sum((X - Y) ** 2) / (4.0 * t)) / (4.0 * np.pi * t)
        assert_allclose(kernel_eval(heat, t, X, Y), expected, rtol=1e-12)


def test_kernel_peak_value(heat):
    assert_allclose(kernel_eval(heat, 1.0, np.zeros(2), np.zeros(2)),
                    1.0 / (4.0 * np.pi), rtol=1e-13)


def test_kernel_positive(kolmogorov, rotation, degenerate_ou):
    rng = np.random.default_rng(3)
    for spec in [kolmogorov, rotation, degenerate_ou]:
        for _ in range(20):
            X, Y = rng.normal(size=2), rng.normal(size=2)
            assert kernel_eval(spec, float(rng.uniform(0.05, 3.0)), X, Y) > 0.0


def test_normalization(heat, kolmogorov, rotation, degenerate_ou):
    # Y-mass one, X-mass e^{-t tr B}
    for spec in [heat, kolmogorov, rotation, degenerate_ou]:
        rep = normalization_check(spec, 0.5, np.array([0.1, -0.3]))
        assert rep.passed, rep


def test_sample_transition_moments(heat, kolmogorov):
    state = SamplerState(seed=123)
    n = 1_000_000
    Y = sample_transition(heat, 1.0, np.zeros(2), n, state)
    cov = np.cov(Y.T)
    assert np.max(np.abs(cov - 2.0 * np.eye(2))) < 5e-3
    Yk = sample_transition(kolmogorov, 1.0, np.zeros(2), n, state.advance())
    expected = np.array([[2.0, 1.0], [1.0, 2.0 / 3.0]])
    assert np.max(np.abs(np.cov(Yk.T) - expected)) < 5e-3


def test_sample_transition_replay(kolmogorov):
    a = sample_transition(kolmogorov, 0.5, np.ones(2), 64, SamplerState(seed=9))
    b = sample_transition(kolmogorov, 0.5, np.ones(2), 64, SamplerState(seed=9))
    assert np.array_equal(a, b)


def test_apply_constant_is_markovian(heat, kolmogorov, degenerate_ou):
    ones = ScalarField.constant(1.0)
    for spec in [heat, kolmogorov, degenerate_ou]:
        for method in ["analytic", "quadrature", "monte_carlo"]:
            val, _ = apply_semigroup(spec, 0.7, ones, np.array([0.2, 0.4]),
                                     method=method)
            assert_allclose(val, 1.0, rtol=1e-12)


def test_apply_gaussian_closed_form(heat):
    # unit-amplitude Gaussian with covariance I at the origin:
    # P_t f(0) = 1/(1+2t) in two dimensions
    f = ScalarField.gaussian_mixture([(1.0, np.zeros(2), np.eye(2))])
    for t in [0.1, 0.5, 2.0]:
        val, _ = apply_semigroup(heat, t, f, np.zeros(2), method="analytic")
        assert_allclose(val, 1.0 / (1.0 + 2.0 * t), rtol=1e-12)


def test_apply_analytic_validated_by_quadrature_and_mc(kolmogorov):
    # the Gaussian-convolution closed form is cross-checked against the
    # other two routes before anything downstream trusts it
    f = ScalarField.gaussian_mixture([(1.0, np.zeros(2), np.eye(2))],
                                     support_hint=(-12 * np.ones(2), 12 * np.ones(2)))
    X = np.array([1.0, 1.0])
    exact, _ = apply_semigroup(kolmogorov, 1.0, f, X, method="analytic")
    quad, _ = apply_semigroup(kolmogorov, 1.0, f, X, method="quadrature")
    assert_allclose(quad, exact, rtol=1e-9)
    mc, half = apply_semigroup(kolmogorov, 1.0, f, X, method="monte_carlo",
                               n_mc=1_000_000, state=SamplerState(seed=5))
    assert abs(mc - exact) < max(3.0 * half, 1e-4)


def test_apply_semigroup_law_analytic(kolmogorov):
    # P_t P_tau f = P_{t+tau} f on mixtures, via explicit composition of
    # the closed form: evaluate P_tau f as a new mixture is not exposed,
    # so check through kernel transport of probe points instead
    f = ScalarField.gaussian_mixture([(0.7, np.array([0.3, -0.1]), 0.5 * np.eye(2))])
    X = np.array([0.4, 0.8])
    t, tau = 0.6, 0.9
    direct, _ = apply_semigroup(kolmogorov, t + tau, f, X, method="analytic")
    # compose: integrate P_tau f against the t-kernel by quadrature
    from kfptools.kernel import gauss_legendre_whitened
    from kfptools.operators import gramian
    kp = gramian(kolmogorov, t)
    z, w = gauss_legendre_whitened(64, 2)
    Z = X @ kp.propagator.T + z @ kp.chol.T
    inner, _ = apply_semigroup(kolmogorov, tau, f, Z, method="analytic")
    assert_allclose(float(inner @ w), direct, rtol=1e-10)


def test_approximation_of_identity(heat, kolmogorov):
    f = ScalarField.gaussian_mixture([(1.0, np.zeros(2), np.eye(2))])
    X = np.array([0.3, 0.7])
    for spec in [heat, kolmogorov]:
        val, _ = apply_semigroup(spec, 1e-6, f, X, method="analytic")
        assert abs(val - f(X)) < 1e-3


def test_linfty_contraction(kolmogorov):
    f = ScalarField.gaussian_mixture([(1.0, np.zeros(2), 0.25 * np.eye(2))])
    rng = np.random.default_rng(0)
    for _ in range(10):
        X = rng.normal(size=2) * 2.0
        val, _ = apply_semigroup(kolmogorov, float(rng.uniform(0.05, 5.0)), f,
                                 X, method="analytic")
        assert -1e-12 <= val <= 1.0 + 1e-12


def test_box_probability_basics(heat, kolmogorov):
    big = RegionSet.box(-60.0 * np.ones(2), 60.0 * np.ones(2))
    assert box_probability(heat, 1.0, np.zeros(2), big) > 1.0 - 1e-12
    quadrant = RegionSet.box(np.zeros(2), 20.0 * np.ones(2))
    assert_allclose(box_probability(heat, 1.0, np.zeros(2), quadrant), 0.25,
                    rtol=1e-12)
    square = RegionSet.box(-np.ones(2), np.ones(2))
    assert box_probability(kolmogorov, 1e-4, np.zeros(2), square) >= 0.999


def test_box_probability_matches_sampling(kolmogorov):
    region = RegionSet.box(np.array([0.2, -0.5]), np.array([1.4, 0.6]))
    X = np.array([0.5, 0.0])
    t = 0.37
    p = box_probability(kolmogorov, t, X, region)
    Y = sample_transition(kolmogorov, t, X, 2_000_000, SamplerState(seed=11))
    frac = region.contains(Y).mean()
    assert abs(p - frac) < 4.0 * np.sqrt(p * (1 - p) / 2e6)


def test_ball_probability_isotropic(heat):
    ball = RegionSet.ball(np.zeros(2), 1.0)
    p = box_probability(heat, 0.5, np.zeros(2), ball)
    # | N(0, I) | < 1 radius: chi2_2 cdf at 1 for cov = 2t I = I
    assert_allclose(p, 1.0 - np.exp(-0.5), rtol=1e-12)


def test_chapman_kolmogorov(heat, kolmogorov):
    rep = chapman_kolmogorov_check(heat, 0.5, 0.5, np.zeros(2),
                                   np.array([0.7, -0.3]))
    assert rep.passed and rep.ratio < 1e-3
    rep = chapman_kolmogorov_check(kolmogorov, 0.3, 0.7, np.zeros(2),
                                   np.array([1.0, 1.0]), method="monte_carlo",
                                   state=SamplerState(seed=21))
    assert rep.passed
    rep = chapman_kolmogorov_check(kolmogorov, 0.5, 1e-12, np.zeros(2), np.ones(2))
    assert rep.passed and rep.details.get("skipped")
