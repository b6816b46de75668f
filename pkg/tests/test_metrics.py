import math

import numpy as np
import pytest

from wavesense import ConfigError, rate_bound, reim_correlation, snr_db, write_snr_report
from wavesense.solvers import ConvergenceTrace
from wavesense.wavelets import WaveletCoefficients


def random_image(rng, shape):
    return rng.standard_normal(shape) + 1j * rng.standard_normal(shape)


# ---------------------------------------------------------------------------
# SNR
# ---------------------------------------------------------------------------

def test_snr_zero_estimate():
    rng = np.random.default_rng(0)
    ref = random_image(rng, (8, 8))
    assert snr_db(ref, np.zeros_like(ref)) == pytest.approx(0.0, abs=1e-12)


def test_snr_exact_match_is_infinite():
    rng = np.random.default_rng(1)
    ref = random_image(rng, (8, 8))
    assert snr_db(ref, ref.copy()) == math.inf


def test_snr_hand_value():
    # reference norm 10, error norm 1: 20 dB
    ref = np.zeros((1, 4), dtype=complex)
    ref[0, 0] = 10.0
    err = np.zeros_like(ref)
    err[0, 1] = 1.0
    assert snr_db(ref, ref - err) == pytest.approx(20.0)


def test_snr_rejects_zero_reference():
    with pytest.raises(ConfigError):
        snr_db(np.zeros((4, 4), dtype=complex), np.ones((4, 4), dtype=complex))
    with pytest.raises(ConfigError):
        snr_db(np.ones((4, 4), dtype=complex), np.ones((2, 2), dtype=complex))


def test_snr_global_phase_invariance():
    rng = np.random.default_rng(2)
    ref, est = random_image(rng, (8, 8)), random_image(rng, (8, 8))
    phase = np.exp(1j * 1.234)
    assert snr_db(phase * ref, phase * est) == pytest.approx(snr_db(ref, est), rel=1e-12)


def test_snr_decreases_with_noise():
    rng = np.random.default_rng(3)
    ref = random_image(rng, (16, 16))
    noise = random_image(rng, (16, 16))
    values = [snr_db(ref, ref + amp * noise) for amp in (0.01, 0.1, 1.0)]
    assert values[0] > values[1] > values[2]


# ---------------------------------------------------------------------------
# real/imaginary correlation
# ---------------------------------------------------------------------------

def test_correlation_perfect_dependence():
    rng = np.random.default_rng(4)
    re = rng.standard_normal((16, 16))
    coeffs = WaveletCoefficients(re + 1j * re, 2)
    out = reim_correlation(coeffs)
    assert out["approximation"] == pytest.approx(1.0)
    for level in (1, 2):
        assert out[("detail", level)] == pytest.approx(1.0)


def test_correlation_anti_dependence():
    rng = np.random.default_rng(5)
    re = rng.standard_normal((16, 16))
    coeffs = WaveletCoefficients(re - 1j * re, 2)
    out = reim_correlation(coeffs)
    assert out[("horizontal", 1)] == pytest.approx(-1.0)


def test_correlation_independent_channels():
    rng = np.random.default_rng(6)
    coeffs = WaveletCoefficients(random_image(rng, (128, 128)), 1)
    out = reim_correlation(coeffs)
    # 3 * 64^2 pooled detail samples: |corr| stays below 0.05
    assert abs(out[("detail", 1)]) < 0.05


def test_correlation_zero_variance_flagged():
    rng = np.random.default_rng(7)
    coeffs = WaveletCoefficients(rng.standard_normal((8, 8)) + 0.0j, 1)
    out = reim_correlation(coeffs)
    assert math.isnan(out["approximation"])
    assert math.isnan(out[("detail", 1)])


# ---------------------------------------------------------------------------
# rate bound
# ---------------------------------------------------------------------------

def geometric_trace(first, rate, count):
    trace = ConvergenceTrace()
    for n in range(1, count + 1):
        trace.append(n, 1.0 / n, first * rate ** (n - 1), 0.0)
    return trace


def test_rate_bound_constant_at_solution():
    trace = ConvergenceTrace()
    for n in range(1, 6):
        trace.append(n, 1.0, 0.0, 0.0)
    result = rate_bound(trace, gamma=0.5, lam=1.0, theta1=0.2)
    assert result.passed and math.isinf(result.margin)


def test_rate_bound_exactly_at_rate():
    gamma, lam, theta1 = 0.5, 1.0, 0.2
    rate = 1.0 - lam * gamma * theta1 / (1.0 + gamma * theta1)
    trace = geometric_trace(3.0, rate, 40)
    result = rate_bound(trace, gamma, lam, theta1)
    assert result.passed
    assert result.margin == pytest.approx(1.0, rel=1e-5)
    assert result.rate == pytest.approx(rate)


def test_rate_bound_detects_violation():
    gamma, lam, theta1 = 0.5, 1.0, 0.2
    rate = 1.0 - lam * gamma * theta1 / (1.0 + gamma * theta1)
    trace = geometric_trace(3.0, min(1.0, rate * 1.05), 40)
    result = rate_bound(trace, gamma, lam, theta1)
    assert not result.passed
    assert result.margin < 1.0


def test_rate_bound_requires_distances():
    trace = ConvergenceTrace()
    trace.append(1, 1.0, float("nan"), 0.0)
    with pytest.raises(ConfigError):
        rate_bound(trace, 0.5, 1.0, 0.2)


# ---------------------------------------------------------------------------
# report
# ---------------------------------------------------------------------------

def test_snr_report(tmp_path):
    path = tmp_path / "report.csv"
    write_snr_report(path, [("s0", "sense", 11.5), ("s0", "wt", math.inf)])
    lines = path.read_text().strip().splitlines()
    assert lines[0] == "slice,method,snr_db"
    assert lines[1] == "s0,sense,11.5"
    assert lines[2] == "s0,wt,inf"
