import numpy as np
import pytest
from numpy.testing import assert_allclose

import kfptools as kfp
from kfptools import (DimensionMismatch, NegativeEigenvalueQ, NonSymmetricQ,
                      gramian, hormander_grid_check, kalman_rank, propagator,
                      unit_ball_volume, validate_spec, volume)
from conftest import (volume_degenerate_ou, volume_heat, volume_kolmogorov,
                      volume_rotation)


def test_validate_kolmogorov(kolmogorov):
    assert kolmogorov.hypoelliptic
    assert kolmogorov.trace_B == 0.0
    assert kolmogorov.kalman_rank == 2


def test_validate_heat(heat):
    assert heat.hypoelliptic
    assert heat.trace_B == 0.0


def test_degenerate_without_drift_is_not_hypoelliptic():
    spec = validate_spec([[1.0, 0.0], [0.0, 0.0]], np.zeros((2, 2)))
    assert not spec.hypoelliptic
    assert spec.kalman_rank == 1


def test_validation_errors():
    with pytest.raises(NonSymmetricQ):
        validate_spec([[1.0, 0.5], [0.0, 1.0]], np.zeros((2, 2)))
    with pytest.raises(NegativeEigenvalueQ):
        validate_spec([[1.0, 0.0], [0.0, -1.0]], np.zeros((2, 2)))
    with pytest.raises(DimensionMismatch):
        validate_spec(np.eye(2), np.zeros((3, 3)))
    with pytest.raises(DimensionMismatch):
        validate_spec(np.eye(1), np.zeros((1, 1)))


def test_kalman_rank_cases(kolmogorov):
    assert kalman_rank(kolmogorov) == 2
    assert kalman_rank(np.eye(4), np.random.default_rng(0).normal(size=(4, 4))) == 4
    assert kalman_rank(np.zeros((3, 3)), np.eye(3)) == 0


def test_propagator_kolmogorov(kolmogorov):
    for s in [0.1, 1.0, 7.5]:
        assert_allclose(propagator(kolmogorov, s),
                        [[1.0, 0.0], [s, 1.0]], rtol=0, atol=1e-14)


def test_propagator_identity_and_rotation(heat, rotation):
    assert_allclose(propagator(heat, 3.7), np.eye(2), atol=0)
    assert_allclose(propagator(rotation, np.pi / 2.0),
                    [[0.0, -1.0], [1.0, 0.0]], atol=1e-14)


def test_propagator_group_law(rotation):
    E1 = propagator(rotation, 0.4)
    E2 = propagator(rotation, 1.1)
    assert_allclose(E1 @ E2, propagator(rotation, 1.5), rtol=1e-13, atol=1e-14)


def test_gramian_kolmogorov_closed_form(kolmogorov):
    for t in [0.1, 1.0, 10.0]:
        kp = gramian(kolmogorov, t)
        expected = np.array([[t, t * t / 2.0], [t * t / 2.0, t ** 3 / 3.0]])
        assert_allclose(kp.gramian_t, expected, rtol=1e-10)
        assert_allclose(kp.chol @ kp.chol.T, 2.0 * kp.gramian_t, rtol=1e-12)


def test_gramian_heat(heat):
    kp = gramian(heat, 1.0)
    assert_allclose(kp.gramian_t, np.eye(2), rtol=1e-14)
    assert_allclose(kp.volume, np.pi, rtol=1e-14)


def test_volume_closed_forms(heat, kolmogorov, rotation, degenerate_ou):
    ts = np.logspace(-4, 1, 41)
    for spec, ref in [(heat, volume_heat), (kolmogorov, volume_kolmogorov),
                      (rotation, volume_rotation), (degenerate_ou, volume_degenerate_ou)]:
        for t in ts:
            assert_allclose(volume(spec, t), ref(t), rtol=1e-8)


def test_volume_heat_any_dimension():
    for n in [2, 3, 4]:
        spec = validate_spec(np.eye(n), np.zeros((n, n)))
        for t in [0.25, 1.0, 9.0]:
            assert_allclose(volume(spec, t), unit_ball_volume(n) * t ** (n / 2.0),
                            rtol=1e-12)


def test_gramian_small_time_limit(kolmogorov, rotation):
    # K(t) -> Q entrywise as t -> 0, checked at t = 1e-8
    for spec in [kolmogorov, rotation]:
        K = gramian(spec, 1e-8).gramian_t / 1e-8
        assert np.max(np.abs(K - spec.Q)) < 1e-6


def test_gramian_additivity(kolmogorov, rotation, degenerate_ou):
    # C(t + tau) = C(t) + e^{tB} C(tau) e^{tB^T}
    for spec in [kolmogorov, rotation, degenerate_ou]:
        t, tau = 0.7, 0.4
        Ct = gramian(spec, t).gramian_t
        Ctau = gramian(spec, tau).gramian_t
        E = propagator(spec, t)
        lhs = gramian(spec, t + tau).gramian_t
        rhs = Ct + E @ Ctau @ E.T
        assert_allclose(lhs, rhs, rtol=1e-10, atol=1e-14)


def test_hormander_grid_check_pass(kolmogorov, rotation):
    grid = np.logspace(-6, 3, 40)
    assert hormander_grid_check(kolmogorov, grid).passed
    # rotation volume stays positive through t = pi
    grid_pi = np.concatenate([grid, [np.pi]])
    assert hormander_grid_check(rotation, grid_pi).passed


def test_hormander_grid_check_fail():
    spec = validate_spec(np.zeros((2, 2)), np.zeros((2, 2)))
    rep = hormander_grid_check(spec, np.logspace(-2, 2, 10))
    assert not rep.passed


def test_volume_positive_iff_full_rank():
    full = validate_spec([[1.0, 0.0], [0.0, 0.0]], [[0.0, 0.0], [1.0, 0.0]])
    deficient = validate_spec([[1.0, 0.0], [0.0, 0.0]], np.zeros((2, 2)))
    assert volume(full, 1.0) > 0
    with pytest.raises(kfp.SingularGramian):
        volume(deficient, 1.0)


def test_unit_ball_volume():
    assert_allclose(unit_ball_volume(2), np.pi)
    assert_allclose(unit_ball_volume(3), 4.0 * np.pi / 3.0)
