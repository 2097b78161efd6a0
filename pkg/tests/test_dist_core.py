import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import quad

from auctionmetrics.dist_core import (
    LINEAR,
    STEP,
    BoundedDensityModel,
    PiecewiseCdf,
    dkw_band,
    empirical_cdf,
    kolmogorov,
    levy,
    sample,
    sub_cdf,
    uniform_cdf,
    wasserstein1,
)
from auctionmetrics.errors import ValidationError


def staircase(bp, vals):
    return PiecewiseCdf(bp, vals, interpolation=STEP, is_full_cdf=False)


def random_staircase(rng, full=True):
    m = rng.integers(1, 8)
    bp = np.sort(rng.random(m))
    bp = np.unique(np.round(bp, 6))
    vals = np.sort(rng.random(bp.size))
    if full:
        vals[-1] = 1.0
    return PiecewiseCdf(bp, vals, interpolation=STEP, is_full_cdf=full)


# -- construction / validation ------------------------------------------------


def test_rejects_descending_breakpoints():
    with pytest.raises(ValidationError):
        PiecewiseCdf([0.5, 0.2], [0.1, 1.0])


def test_rejects_decreasing_values():
    with pytest.raises(ValidationError):
        PiecewiseCdf([0.1, 0.5], [0.9, 0.1])


def test_rejects_breakpoints_outside_unit_interval():
    with pytest.raises(ValidationError):
        PiecewiseCdf([0.0, 1.5], [0.0, 1.0])


def test_full_cdf_must_terminate_at_one():
    with pytest.raises(ValidationError):
        PiecewiseCdf([0.0, 1.0], [0.0, 0.7], is_full_cdf=True)
    # the same values are fine as a sub-CDF
    sub_cdf([0.0, 1.0], [0.0, 0.7])


def test_rejects_unknown_interpolation():
    with pytest.raises(ValidationError):
        PiecewiseCdf([0.0, 1.0], [0.0, 1.0], interpolation="cubic")


# -- evaluation ---------------------------------------------------------------


def test_step_eval_matches_hand_values():
    F = staircase([0.2, 0.5, 0.8], [0.1, 0.4, 1.0])
    assert F.eval(0.1) == 0.0
    assert F.eval(0.2) == 0.1
    assert F.eval(0.49999) == 0.1
    assert F.eval(0.5) == 0.4
    assert F.eval(0.8) == 1.0
    assert F.eval(2.0) == 1.0  # clamps above 1
    assert F.eval(-0.5) == 0.0


def test_step_left_limits():
    F = staircase([0.2, 0.5], [0.3, 1.0])
    assert F.eval_left(0.2) == 0.0
    assert F.eval_left(0.5) == 0.3
    assert F.eval_left(0.7) == 1.0


def test_linear_eval_interpolates():
    F = PiecewiseCdf([0.0, 0.5, 1.0], [0.0, 0.2, 1.0], interpolation=LINEAR)
    assert F.eval(0.25) == pytest.approx(0.1)
    assert F.eval(0.75) == pytest.approx(0.6)


def test_eval_is_vectorized():
    F = uniform_cdf()
    xs = np.linspace(0, 1, 11)
    np.testing.assert_allclose(F.eval(xs), xs)


# -- generalized inverse ------------------------------------------------------


def test_ppf_step_hand_values():
    F = staircase([0.2, 0.5, 0.8], [0.1, 0.4, 1.0])
    assert F.ppf(0.05) == 0.2
    assert F.ppf(0.1) == 0.2
    assert F.ppf(0.100001) == 0.5
    assert F.ppf(0.4) == 0.5
    assert F.ppf(1.0) == 0.8
    assert F.ppf(0.0) == 0.0


def test_ppf_linear_matches_bisection_oracle():
    F = PiecewiseCdf([0.0, 0.3, 1.0], [0.0, 0.6, 1.0], interpolation=LINEAR)

    def oracle(q):
        lo, hi = 0.0, 1.0
        for _ in range(80):
            mid = 0.5 * (lo + hi)
            if F.eval(mid) >= q:
                hi = mid
            else:
                lo = mid
        return hi

    for q in [0.05, 0.3, 0.6, 0.75, 0.99]:
        assert F.ppf(q) == pytest.approx(oracle(q), abs=1e-9)


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2**32 - 1), st.floats(0.0, 1.0))
def test_ppf_is_generalized_inverse(seed, q):
    F = random_staircase(np.random.default_rng(seed))
    x = F.ppf(q)
    # inf{x : F(x) >= q}: F at x reaches q (or q exceeds the terminal value
    # and x = 1), and F strictly before x stays below q
    if q <= F.values[-1]:
        assert F.eval(x) >= q - 1e-12
    else:
        assert x == 1.0
    if x > 0 and q > 0:
        assert F.eval_left(x) <= q + 1e-12


def test_ppf_rejects_levels_outside_unit_interval():
    with pytest.raises(ValidationError):
        uniform_cdf().ppf(1.5)


# -- serialization ------------------------------------------------------------


def test_json_round_trip_is_exact():
    rng = np.random.default_rng(7)
    for _ in range(20):
        F = random_staircase(rng, full=False)
        G = PiecewiseCdf.from_json(F.to_json())
        np.testing.assert_array_equal(F.breakpoints, G.breakpoints)
        np.testing.assert_array_equal(F.values, G.values)
        assert G.interpolation == F.interpolation
        assert G.is_full_cdf == F.is_full_cdf


def test_from_dict_missing_field():
    with pytest.raises(ValidationError):
        PiecewiseCdf.from_dict(json.loads('{"values": [1.0]}'))


# -- bounded density models ---------------------------------------------------


def test_density_must_integrate_to_one():
    with pytest.raises(ValidationError):
        BoundedDensityModel(knots=[0.0, 1.0], density=[0.5, 0.6],
                            alpha_lo=0.4, eta_hi=1.0)


def test_density_bounds_enforced():
    with pytest.raises(ValidationError):
        BoundedDensityModel(knots=[0.0, 1.0], density=[0.5, 1.5],
                            alpha_lo=0.6, eta_hi=2.0)


def test_density_lipschitz_enforced():
    with pytest.raises(ValidationError):
        BoundedDensityModel(knots=[0.0, 1.0], density=[0.5, 1.5],
                            alpha_lo=0.5, eta_hi=2.0, lipschitz=0.5)


def test_density_cdf_matches_quadrature_oracle():
    d = BoundedDensityModel(knots=[0.0, 0.4, 1.0], density=[0.6, 1.3, 23.0 / 30.0],
                            alpha_lo=0.5, eta_hi=2.0)
    for x in [0.1, 0.4, 0.55, 0.9, 1.0]:
        ref, _ = quad(d.pdf, 0.0, x)
        assert d.cdf(x) == pytest.approx(ref, abs=1e-10)


def test_density_ppf_inverts_cdf():
    d = BoundedDensityModel(knots=[0.0, 1.0], density=[0.5, 1.5],
                            alpha_lo=0.5, eta_hi=2.0)
    qs = np.linspace(0.001, 0.999, 57)
    np.testing.assert_allclose(d.cdf(d.ppf(qs)), qs, atol=1e-10)


def test_density_to_cdf_close_to_exact():
    d = BoundedDensityModel(knots=[0.0, 1.0], density=[1.5, 0.5],
                            alpha_lo=0.5, eta_hi=2.0)
    F = d.to_cdf()
    xs = np.linspace(0, 1, 999)
    assert np.max(np.abs(F.eval(xs) - d.cdf(xs))) < 1e-6


def test_sampling_respects_dkw_band():
    d = BoundedDensityModel(knots=[0.0, 1.0], density=[0.6, 1.4],
                            alpha_lo=0.5, eta_hi=2.0)
    rng = np.random.default_rng(11)
    n = 20000
    xs = sample(d, rng, n)
    emp = empirical_cdf(xs)
    grid = np.linspace(0, 1, 501)
    dev = np.max(np.abs(emp.eval(grid) - d.cdf(grid)))
    assert dev <= dkw_band(n, 0.001)


def test_sampling_requires_full_cdf():
    with pytest.raises(ValidationError):
        sample(sub_cdf([0.5], [0.4]), np.random.default_rng(0))


# -- distances ----------------------------------------------------------------


def brute_sup(F, G, lo=0.0, hi=1.0, m=20001):
    xs = np.linspace(lo, hi, m)
    return float(np.max(np.abs(F.eval(xs) - G.eval(xs))))


def test_kolmogorov_closed_form_uniform_vs_step():
    # F uniform, G a single step at 0.5: sup gap is 0.5 approached at 0.5-
    G = PiecewiseCdf([0.5], [1.0])
    assert kolmogorov(uniform_cdf(), G) == pytest.approx(0.5)


def test_kolmogorov_matches_brute_force():
    rng = np.random.default_rng(3)
    for _ in range(25):
        F, G = random_staircase(rng), random_staircase(rng)
        exact = kolmogorov(F, G)
        assert exact >= brute_sup(F, G) - 1e-12
        assert exact <= brute_sup(F, G, m=200001) + 1e-4


def test_kolmogorov_window_ignores_left_limit_at_lower_end():
    # F jumps exactly at the window's lower endpoint; values below the window
    # must not contribute
    F = PiecewiseCdf([0.5], [1.0])
    G = staircase([0.5], [1.0])
    assert kolmogorov(F, G, lo=0.5, hi=1.0) == 0.0


def test_wasserstein_closed_form_shifted_uniform():
    # |F(x) - G(x)| = 0.1 on [0.1, 1.0] for a 0.1-shifted uniform
    F = uniform_cdf()
    G = PiecewiseCdf([0.0, 0.1, 1.0], [0.0, 0.0, 0.9],
                     interpolation=LINEAR, is_full_cdf=False)
    # integral of |x - max(x-0.1, 0)| over [0,1] = 0.1*0.9 + 0.005
    assert wasserstein1(F, G) == pytest.approx(0.1 * 0.9 + 0.005, abs=1e-12)


def test_wasserstein_matches_quadrature_oracle():
    rng = np.random.default_rng(5)
    for _ in range(15):
        F, G = random_staircase(rng), random_staircase(rng)
        ref, _ = quad(lambda x: abs(F.eval(x) - G.eval(x)), 0.0, 1.0, limit=400)
        assert wasserstein1(F, G) == pytest.approx(ref, abs=1e-6)


def test_wasserstein_sign_change_segment():
    # crossing within one segment: F linear up, G constant 0.5
    F = uniform_cdf()
    G = PiecewiseCdf([0.0, 1.0], [0.5, 0.5], is_full_cdf=False)
    # integral of |x - 0.5| = 0.25
    assert wasserstein1(F, G) == pytest.approx(0.25, abs=1e-12)


def levy_brute(F, G, m=2001):
    """Grid oracle: smallest e on a grid with both band conditions."""
    es = np.linspace(0, 1, m)
    xs = np.linspace(-0.05, 1.05, 4003)
    Fv = F.eval(xs)
    for e in es:
        Gp = G.eval(np.clip(xs + e, -1, 2)) + e
        Gm = G.eval(np.clip(xs - e, -1, 2)) - e
        if np.all(Fv <= Gp + 1e-9) and np.all(Fv >= Gm - 1e-9):
            return e
    return 1.0


def test_levy_matches_grid_oracle():
    rng = np.random.default_rng(9)
    for _ in range(10):
        F, G = random_staircase(rng), random_staircase(rng)
        assert levy(F, G) == pytest.approx(levy_brute(F, G), abs=2e-3)


def test_levy_identical_is_zero():
    F = staircase([0.3, 0.7], [0.4, 1.0])
    assert levy(F, F) == 0.0


def test_levy_translation_of_point_mass():
    # point masses at 0.3 and 0.5: the band must absorb the full horizontal
    # offset, so the distance equals the shift
    F = PiecewiseCdf([0.3], [1.0])
    G = PiecewiseCdf([0.5], [1.0])
    assert levy(F, G) == pytest.approx(levy_brute(F, G), abs=2e-3)
    assert levy(F, G) == pytest.approx(0.2, abs=1e-9)


def test_metric_chain_on_random_pairs():
    rng = np.random.default_rng(13)
    for _ in range(50):
        F, G = random_staircase(rng), random_staircase(rng)
        lv, ko, wa = levy(F, G), kolmogorov(F, G), wasserstein1(F, G)
        assert lv <= ko + 1e-9
        assert lv <= math.sqrt(wa) + 1e-9


def test_dkw_band_formula():
    assert dkw_band(1000, 0.05) == pytest.approx(math.sqrt(math.log(40.0) / 2000.0))
    with pytest.raises(ValidationError):
        dkw_band(0, 0.05)
    with pytest.raises(ValidationError):
        dkw_band(10, 1.5)


def test_empirical_cdf_steps():
    F = empirical_cdf([0.2, 0.2, 0.8, 0.5])
    assert F.eval(0.1) == 0.0
    assert F.eval(0.2) == 0.5
    assert F.eval(0.5) == 0.75
    assert F.eval(0.8) == 1.0
    with pytest.raises(ValidationError):
        empirical_cdf([])
