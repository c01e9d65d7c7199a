import json

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy import stats

from nvpair.errors import CalibrationError, InvalidArgument
from nvpair.implant import (CALIBRATED_STRAGGLE_NM, ImplantParams, SpacingHistogram, calibrate_straggle,
                            conversion_yield, fraction_within, maxwell_median, resolve_threads, sample_pair,
                            spacing_distribution, spacing_samples, stream, wilson_interval)


def test_zero_straggle_limit():
    p = ImplantParams(straggle_long=1e-9, straggle_lat=1e-9)
    assert spacing_samples(p, 1000).max() < 1e-6


def test_difference_variance():
    p = ImplantParams(seed=3)
    rng = stream(p.seed, 0, 7)
    diffs = np.array([(lambda s: s.r1 - s.r2)(sample_pair(p, rng)) for _ in range(100_000)])
    expected = 2 * np.array([p.sigma_lat, p.sigma_lat, p.sigma_long]) ** 2
    np.testing.assert_allclose(diffs.var(axis=0), expected, rtol=0.03)


def test_pair_sample_spacing_consistent():
    p = ImplantParams()
    s = sample_pair(p, stream(1, 0))
    assert s.spacing == pytest.approx(np.linalg.norm(s.r1 - s.r2), abs=1e-12)


def test_pair_sample_deterministic():
    p = ImplantParams(seed=11)
    a, b = sample_pair(p, stream(11, 4)), sample_pair(p, stream(11, 4))
    np.testing.assert_array_equal(a.r1, b.r1)
    np.testing.assert_array_equal(a.r2, b.r2)


def test_lateral_isotropy():
    p = ImplantParams(seed=5)
    rng = stream(p.seed, 0, 9)
    d = np.array([(lambda s: s.r1 - s.r2)(sample_pair(p, rng)) for _ in range(100_000)])
    ks = stats.ks_2samp(d[:, 0], d[:, 1])
    n = len(d)
    critical = 1.628 * np.sqrt(2.0 / n)  # two-sample KS at the 1 % level
    assert ks.statistic < critical


def test_spacings_deterministic_and_thread_independent():
    p = ImplantParams(seed=2024)
    n = 3 * 65536 + 17
    a = spacing_samples(p, n, threads=1)
    b = spacing_samples(p, n, threads=4)
    np.testing.assert_array_equal(a, b)
    assert a.shape == (n,)


def test_histogram_counts_and_monotone_fractions():
    h = spacing_distribution(ImplantParams(seed=9), 200_000)
    assert h.counts.sum() == h.n_total == 200_000
    fr = [h.fractions_below[t] for t in (1.5, 2.0, 3.0)]
    assert fr[0] < fr[1] < fr[2]


def test_histogram_overflow_bin():
    p = ImplantParams(straggle_long=50.0, straggle_lat=50.0)
    h = spacing_distribution(p, 5000, max_spacing=10.0)
    assert h.counts.sum() == 5000
    assert h.counts[-1] > 0


def test_histogram_roundtrip():
    h = spacing_distribution(ImplantParams(seed=1), 10_000)
    back = SpacingHistogram.from_dict(json.loads(json.dumps(h.to_dict())))
    np.testing.assert_array_equal(back.counts, h.counts)
    np.testing.assert_array_equal(back.bin_edges, h.bin_edges)
    assert back.fractions_below == h.fractions_below


def test_energy_monotonicity():
    fractions = [spacing_distribution(ImplantParams(dimer_energy=e, seed=1), 200_000).fractions_below
                 for e in (6.0, 10.0, 14.0)]
    for t in (1.5, 2.0, 3.0):
        assert fractions[0][t] > fractions[1][t] > fractions[2][t]


@pytest.mark.slow
def test_calibrated_default_close_pair_fraction():
    h = spacing_distribution(ImplantParams(seed=20060101), 1_000_000)
    assert 0.01 <= h.fractions_below[2.0] <= 0.02


# --- calibration ---------------------------------------------------------------------


def test_calibration_reproduces_default():
    cal = calibrate_straggle(0.015)
    assert cal.straggle_e0 == pytest.approx(CALIBRATED_STRAGGLE_NM, rel=1e-6)
    assert fraction_within(cal.sigma_diff, 2.0) == pytest.approx(0.015, abs=1e-6)


@pytest.mark.slow
def test_calibration_monte_carlo_oracle():
    cal = calibrate_straggle(0.015)
    p = ImplantParams(straggle_long=cal.straggle_e0, straggle_lat=cal.straggle_e0, seed=77)
    frac = np.mean(spacing_samples(p, 1_000_000) < 2.0)
    assert abs(frac - 0.015) <= 0.001


def test_calibration_median():
    cal = calibrate_straggle(0.5 - 1e-9, threshold=3.0)
    assert maxwell_median(cal.sigma_diff) == pytest.approx(3.0, rel=1e-5)


def test_maxwell_median_closed_form():
    rng = np.random.default_rng(0)
    d = np.linalg.norm(rng.standard_normal((200_000, 3)) * 1.7, axis=1)
    assert np.median(d) == pytest.approx(maxwell_median(1.7), rel=0.01)


def test_analytic_matches_monte_carlo():
    p = ImplantParams(seed=31)
    n = 1_000_000
    s = spacing_samples(p, n)
    sigma_diff = np.sqrt(2) * p.sigma_lat
    for t in (1.5, 2.0, 3.0):
        q = fraction_within(sigma_diff, t)
        err = np.sqrt(q * (1 - q) / n)
        assert abs(np.mean(s < t) - q) < 3 * err


@given(st.floats(0.1, 20.0), st.floats(0.1, 10.0))
def test_fraction_within_monotone_in_threshold(sigma, t):
    lo, hi = fraction_within(sigma, t), fraction_within(sigma, 2 * t)
    assert hi >= lo
    if lo < 0.999:
        assert hi > lo


def test_calibration_errors():
    with pytest.raises(InvalidArgument):
        calibrate_straggle(0.7)
    with pytest.raises(CalibrationError):
        calibrate_straggle(0.015, bracket=(10.0, 100.0))


# --- conversion yield --------------------------------------------------------------------


def test_wilson_interval_known_values():
    lo, hi = wilson_interval(10, 100)
    assert lo == pytest.approx(0.0552, abs=1e-4)
    assert hi == pytest.approx(0.1744, abs=1e-4)
    assert wilson_interval(0, 10)[0] == 0.0
    with pytest.raises(InvalidArgument):
        wilson_interval(5, 3)


def test_zero_probability_yield():
    y = conversion_yield(ImplantParams(conversion_prob=0.0), 10_000)
    assert y.n_pairs == 0


def test_yield_contains_probability():
    p = ImplantParams(seed=42)
    warm = conversion_yield(p, 1_000_000)
    cold = conversion_yield(p, 1_000_000, cold=True)
    assert warm.ci95[0] <= 0.01 <= warm.ci95[1]
    assert cold.ci95[0] <= 0.10 <= cold.ci95[1]


def test_yield_thread_independent():
    p = ImplantParams(seed=8)
    assert conversion_yield(p, 300_000, threads=1) == conversion_yield(p, 300_000, threads=3)


def test_params_validation():
    with pytest.raises(InvalidArgument):
        ImplantParams(dimer_energy=0.0)
    with pytest.raises(InvalidArgument):
        ImplantParams(conversion_prob=1.5)
    with pytest.raises(InvalidArgument):
        ImplantParams(seed=-1)
    with pytest.raises(InvalidArgument):
        spacing_samples(ImplantParams(), 0)
    with pytest.raises(InvalidArgument):
        resolve_threads(0)


def test_energy_scaling():
    p = ImplantParams(dimer_energy=28.0, exponent=0.5)
    assert p.sigma_lat == pytest.approx(CALIBRATED_STRAGGLE_NM * np.sqrt(2.0))
