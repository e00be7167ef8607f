import numpy as np
import pytest
from numpy.testing import assert_allclose

from kfptools import (InvalidDRequest, classify_regime, dim_infinity, dim_zero,
                      volume_lower_constant)


def test_dim_zero_values(heat, kolmogorov, rotation, degenerate_ou):
    assert abs(dim_zero(heat) - 2.0) < 0.04
    assert abs(dim_zero(kolmogorov) - 4.0) < 0.08
    assert abs(dim_zero(degenerate_ou) - 4.0) < 0.08
    assert abs(dim_zero(rotation) - 4.0) < 0.2


def test_dim_infinity_values(heat, kolmogorov, rotation, degenerate_ou):
    assert abs(dim_infinity(heat) - 2.0) < 0.04
    # polynomial volume keeps the slope at its homogeneous value
    assert abs(dim_infinity(kolmogorov) - 4.0) < 0.05
    assert abs(dim_infinity(rotation) - 2.0) < 0.05
    assert np.isinf(dim_infinity(degenerate_ou))


def test_estimators_grid_consistency(kolmogorov, rotation):
    # doubling the grid resolution moves the estimates by well under 0.5%
    for spec in [kolmogorov, rotation]:
        d40 = dim_zero(spec, n=40)
        d80 = dim_zero(spec, n=80)
        assert abs(d80 - d40) / d40 < 5e-3
    r40 = dim_infinity(rotation, n=40)
    r80 = dim_infinity(rotation, n=80)
    assert abs(r80 - r40) / r40 < 5e-3


def test_volume_lower_constant_kolmogorov(kolmogorov):
    grid = np.logspace(-6, 6, 121)
    gamma = volume_lower_constant(kolmogorov, (4.0, 4.0), grid)
    assert_allclose(gamma, np.pi * 12.0 ** -0.5, rtol=1e-6)


def test_volume_lower_constant_rotation(rotation):
    grid = np.logspace(-6, 6, 121)
    assert volume_lower_constant(rotation, (4.0, 2.0), grid) > 0.0
    # pure quartic growth fails at infinity where V is only linear
    assert volume_lower_constant(rotation, (4.0, 4.0), grid) == 0.0


def test_classify_kolmogorov(kolmogorov):
    profile = classify_regime(kolmogorov)
    assert profile.regime == "uniform_growth"
    assert abs(profile.D - 4.0) < 0.08
    assert_allclose(profile.gamma, np.pi * 12.0 ** -0.5, rtol=2e-2)
    assert not profile.inconclusive


def test_classify_rotation_mixed(rotation):
    profile = classify_regime(rotation)
    assert profile.regime == "mixed_growth"
    assert profile.d_zero > profile.d_infinity
    assert profile.gamma > 0.0


def test_classify_ou_with_requested_exponent(degenerate_ou):
    profile = classify_regime(degenerate_ou, D_request=5.0)
    assert profile.regime == "uniform_growth"
    assert profile.D == 5.0
    assert profile.gamma > 0.0


def test_invalid_requests(kolmogorov, rotation, degenerate_ou):
    with pytest.raises(InvalidDRequest):
        classify_regime(kolmogorov, D_request=7.0)
    with pytest.raises(InvalidDRequest):
        classify_regime(degenerate_ou, D_request=3.0)
    with pytest.raises(InvalidDRequest):
        classify_regime(rotation, D_request=4.0)
