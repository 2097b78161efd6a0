import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy.optimize import isotonic_regression

from auctionmetrics.isotonic import pav_nondecreasing


def test_hand_example():
    fitted, adj = pav_nondecreasing([1.0, 3.0, 2.0])
    np.testing.assert_allclose(fitted, [1.0, 2.5, 2.5])
    assert adj == pytest.approx(0.5)


def test_already_monotone_is_unchanged():
    y = np.array([0.1, 0.2, 0.2, 0.9])
    fitted, adj = pav_nondecreasing(y)
    np.testing.assert_array_equal(fitted, y)
    assert adj == 0.0


def test_fully_decreasing_pools_to_mean():
    fitted, adj = pav_nondecreasing([3.0, 2.0, 1.0])
    np.testing.assert_allclose(fitted, 2.0)
    assert adj == pytest.approx(1.0)


def test_empty_input():
    fitted, adj = pav_nondecreasing([])
    assert fitted.size == 0 and adj == 0.0


@given(st.lists(st.floats(min_value=-10, max_value=10,
                          allow_nan=False), min_size=1, max_size=60))
def test_matches_scipy_oracle(ys):
    fitted, adj = pav_nondecreasing(ys)
    ref = isotonic_regression(np.asarray(ys), increasing=True).x
    np.testing.assert_allclose(fitted, ref, atol=1e-10)
    assert np.all(np.diff(fitted) >= -1e-12)
    assert adj == pytest.approx(float(np.max(np.abs(fitted - np.asarray(ys)))))


@given(st.lists(st.floats(min_value=0, max_value=1, allow_nan=False),
                min_size=1, max_size=40))
def test_idempotent(ys):
    once, _ = pav_nondecreasing(ys)
    twice, adj = pav_nondecreasing(once)
    np.testing.assert_allclose(twice, once, atol=1e-12)
    assert adj <= 1e-12
