import math

import mpmath
import numpy as np
import pytest

from subdiff.special_math import SQRT_2PI, gamma_fn, normal_cdf, normal_pdf

mpmath.mp.dps = 30


@pytest.mark.parametrize("x", [-8.0, -2.5, -0.46, 0.0, 0.54, 1.0, 3.7, 9.0])
def test_normal_cdf_matches_mpmath(x):
    expected = float(mpmath.ncdf(x))
    assert normal_cdf(x) == pytest.approx(expected, rel=1e-13, abs=1e-300)


def test_normal_cdf_reference_points():
    assert normal_cdf(0.54) == pytest.approx(0.7054014838, abs=1e-10)
    assert normal_cdf(-0.46) == pytest.approx(0.3227581103, abs=1e-10)


def test_normal_cdf_deep_tail_keeps_relative_precision():
    # 1 - Phi(x) style cancellation would return 0 here
    assert normal_cdf(-30.0) == pytest.approx(float(mpmath.ncdf(-30)), rel=1e-10)


def test_normal_cdf_vectorised_and_symmetric():
    x = np.linspace(-5, 5, 41)
    out = normal_cdf(x)
    assert out.shape == x.shape
    np.testing.assert_allclose(out + normal_cdf(-x), 1.0, atol=1e-15)
    assert isinstance(normal_cdf(0.3), float)


def test_normal_pdf():
    assert normal_pdf(0.0) == pytest.approx(1.0 / SQRT_2PI)
    assert SQRT_2PI == pytest.approx(math.sqrt(2 * math.pi))


@pytest.mark.parametrize("x", [0.1, 0.5, 1.0, 1.5, 1.7, 2.05, 2.5, 7.3])
def test_gamma_matches_mpmath(x):
    assert gamma_fn(x) == pytest.approx(float(mpmath.gamma(x)), rel=1e-13)


def test_gamma_reference_values():
    assert 1.0 / gamma_fn(1.7) == pytest.approx(1.1005474055, abs=1e-10)
    assert gamma_fn(1.5) == pytest.approx(0.8862269255, abs=1e-10)


@pytest.mark.parametrize("x", [0.0, -1.0, -0.5])
def test_gamma_rejects_nonpositive(x):
    with pytest.raises(ValueError):
        gamma_fn(x)
