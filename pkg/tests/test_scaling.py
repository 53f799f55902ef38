"""Lifetime and power-law fit tests on synthetic series."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hsym.errors import IllConditionedFit
from hsym.scaling import (
    Censored,
    PowerLawFit,
    decay_rate,
    fgr_exponent,
    fit_power_law,
    lifetime,
    lifetime_with_bootstrap,
    threshold_stability,
)


def exp_series(tau, t_max=None, n=400):
    t_max = 8.0 * tau if t_max is None else t_max
    times = np.concatenate([[0.0], np.geomspace(tau * 1e-3, t_max, n)])
    return times, np.exp(-times / tau)


# ----------------------------------------------------------------------
# lifetimes
# ----------------------------------------------------------------------

def test_exponential_crosses_at_tau():
    times, values = exp_series(tau=3.7)
    life = lifetime(times, values, math.exp(-1.0))
    assert life == pytest.approx(3.7, rel=1e-4)


def test_threshold_scales_crossing_time():
    times, values = exp_series(tau=2.0)
    life = lifetime(times, values, math.exp(-0.45))
    assert life == pytest.approx(0.45 * 2.0, rel=1e-4)


def test_constant_series_is_censored():
    times = np.linspace(0.0, 10.0, 50)
    values = np.full(50, 0.95)
    life = lifetime(times, values, math.exp(-1.0))
    assert isinstance(life, Censored)
    assert life.horizon == pytest.approx(10.0)
    assert life.last_value == pytest.approx(0.95)
    with pytest.raises(TypeError):
        float(life)


def test_crossing_in_first_bracket_uses_linear_time():
    times = np.array([0.0, 2.0])
    values = np.array([1.0, 0.0])
    assert lifetime(times, values, 0.5) == pytest.approx(1.0)


def test_already_below_threshold_returns_first_time():
    times = np.array([0.0, 1.0])
    values = np.array([0.1, 0.05])
    assert lifetime(times, values, 0.5) == 0.0


@settings(max_examples=60, deadline=None)
@given(
    st.lists(
        st.floats(min_value=1e-3, max_value=1.0),
        min_size=3,
        max_size=40,
    ),
    st.floats(min_value=0.05, max_value=0.9),
    st.floats(min_value=0.05, max_value=0.9),
)
def test_lower_threshold_never_crosses_earlier(drops, th_a, th_b):
    # build a strictly decreasing positive series from the draws
    values = np.concatenate([[1.0], 1.0 - np.cumsum(drops) / (sum(drops) + 1.0)])
    times = np.arange(values.size, dtype=float)
    lo, hi = sorted((th_a, th_b))
    life_lo = lifetime(times, values, lo)
    life_hi = lifetime(times, values, hi)
    if isinstance(life_hi, Censored):
        assert isinstance(life_lo, Censored)
    elif not isinstance(life_lo, Censored):
        assert life_lo >= life_hi - 1e-12


def test_threshold_stability_reports_all_entries():
    times, values = exp_series(tau=1.0)
    report = threshold_stability(times, values)
    assert len(report) == 3
    for th, life in report.items():
        assert life == pytest.approx(-math.log(th), rel=1e-3)


def test_decay_rate_inverts_lifetime():
    times, values = exp_series(tau=5.0)
    gamma = decay_rate(times, values)
    assert gamma == pytest.approx(1.0 / 5.0, rel=1e-3)
    flat = np.full_like(times, 0.99)
    assert isinstance(decay_rate(times, flat), Censored)


def test_bootstrap_lifetime_is_deterministic():
    rng = np.random.default_rng(3)
    times = np.concatenate([[0.0], np.geomspace(0.01, 40.0, 300)])
    stack = np.exp(-times[None, :] / (4.0 + 0.5 * rng.normal(size=(12, 1))))
    center1, err1, cens1 = lifetime_with_bootstrap(times, stack, math.exp(-1.0))
    center2, err2, cens2 = lifetime_with_bootstrap(times, stack, math.exp(-1.0))
    assert center1 == center2 and err1 == err2 and cens1 == cens2
    assert center1 == pytest.approx(4.0, rel=0.2)
    assert err1 > 0.0


# ----------------------------------------------------------------------
# power-law fits
# ----------------------------------------------------------------------

def synthetic_pairs(alpha, c=3.0, grid=(0.2, 0.3, 0.45, 0.7, 1.0)):
    return [(T, c * T ** (-alpha)) for T in grid]


@pytest.mark.parametrize("alpha", [2.0, 4.0])
def test_fit_recovers_exact_synthetic_exponent(alpha):
    fit = fit_power_law(synthetic_pairs(alpha))
    assert fit.alpha == pytest.approx(alpha, abs=1e-12)
    assert fit.alpha_stderr == pytest.approx(0.0, abs=1e-10)
    assert fit.n_used == 5


def test_fit_alpha_invariant_under_lifetime_rescaling():
    pairs = synthetic_pairs(2.419)
    scaled = [(T, 17.0 * tau) for T, tau in pairs]
    assert fit_power_law(scaled).alpha == pytest.approx(
        fit_power_law(pairs).alpha, abs=1e-12
    )


def test_fit_excludes_censored_and_windowed_points():
    pairs = synthetic_pairs(2.0, grid=(0.2, 0.3, 0.45, 0.7, 1.0, 1.5))
    pairs[0] = (0.2, Censored(threshold=0.3, horizon=100.0, last_value=0.9))
    # T=0.3 has lifetime 3/0.09 = 33.3, beyond the 30-unit window
    fit = fit_power_law(pairs, max_lifetime=30.0)
    assert fit.n_censored == 1
    assert fit.n_windowed == 1
    assert fit.alpha == pytest.approx(2.0, abs=1e-12)


def test_fit_requires_four_points_and_positive_lifetimes():
    with pytest.raises(IllConditionedFit):
        fit_power_law(synthetic_pairs(2.0, grid=(0.3, 0.5, 0.9)))
    with pytest.raises(ValueError):
        fit_power_law([(0.3, 1.0), (0.4, -2.0), (0.5, 1.0), (0.6, 1.0)])
    with pytest.raises(IllConditionedFit):
        fit_power_law([(0.5, 1.0)] * 5)


def test_fit_prediction_round_trip():
    fit = fit_power_law(synthetic_pairs(3.0, c=2.0))
    assert fit.predicted(0.5) == pytest.approx(2.0 * 0.5 ** (-3.0), rel=1e-10)


# ----------------------------------------------------------------------
# golden-rule exponents
# ----------------------------------------------------------------------

def test_fgr_exponent_table():
    assert fgr_exponent(3, 3) == 2
    assert fgr_exponent(3, 2) == 4
    assert fgr_exponent(3, 1) == 6
    assert fgr_exponent(2, 2) == 2
    assert fgr_exponent(2, 1) == 4
    with pytest.raises(ValueError):
        fgr_exponent(2, 3)
    with pytest.raises(ValueError):
        fgr_exponent(2, 0)
