"""Quantitative evaluation: SNR, real/imaginary correlation, rate-bound audit."""

import csv
import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError
from .wavelets import ORIENTATIONS


def snr_db(ref, est):
    """20 log10(||ref|| / ||ref - est||); +inf when the estimate is exact."""
    ref = np.asarray(ref, dtype=np.complex128)
    est = np.asarray(est, dtype=np.complex128)
    if ref.shape != est.shape:
        raise ConfigError(f"shape mismatch: {ref.shape} vs {est.shape}")
    ref_norm = np.linalg.norm(ref)
    if ref_norm == 0.0:
        raise ConfigError("reference image is identically zero")
    err_norm = np.linalg.norm(ref - est)
    if err_norm == 0.0:
        return math.inf
    return 20.0 * math.log10(ref_norm / err_norm)


def _pearson(re, im):
    re = re.ravel()
    im = im.ravel()
    if re.size < 2:
        return math.nan
    re = re - re.mean()
    im = im - im.mean()
    denom = np.linalg.norm(re) * np.linalg.norm(im)
    if denom == 0.0:
        return math.nan  # flagged missing: a channel has zero variance
    return float(np.dot(re, im) / denom)


def reim_correlation(coeffs):
    """Pearson correlation between real and imaginary channels per subband.

    Returns a dict with the approximation entry, the per-level pooled detail
    entries, and per-(orientation, level) entries. Zero-variance channels are
    reported as NaN.
    """
    out = {}
    approx = coeffs.approx()
    out["approximation"] = _pearson(approx.real, approx.imag)
    for level in range(1, coeffs.levels + 1):
        pooled_re, pooled_im = [], []
        for orientation in ORIENTATIONS:
            block = coeffs.detail(orientation, level)
            out[(orientation, level)] = _pearson(block.real, block.imag)
            pooled_re.append(block.real.ravel())
            pooled_im.append(block.imag.ravel())
        out[("detail", level)] = _pearson(
            np.concatenate(pooled_re), np.concatenate(pooled_im)
        )
    return out


@dataclass
class RateBoundResult:
    passed: bool
    margin: float
    rate: float


def rate_bound(trace, gamma, lam, theta1):
    """Check the linear-convergence envelope against recorded distances.

    The contraction factor is 1 - lam*gamma*theta1/(1 + gamma*theta1); the
    recorded distance at iteration n must not exceed factor^(n-1) times the
    initial distance (with a 1e-6 slack). The margin is the smallest ratio
    bound/distance over the trace (>= 1 means pass).
    """
    dists = np.asarray(trace.dist_to_ref, dtype=np.float64)
    iters = np.asarray(trace.iterations, dtype=np.int64)
    if dists.size == 0 or np.any(np.isnan(dists)):
        raise ConfigError("trace carries no distance-to-reference data")
    rate = 1.0 - lam * gamma * theta1 / (1.0 + gamma * theta1)
    first = dists[0]
    bounds = rate ** (iters - iters[0]) * first * (1.0 + 1e-6)
    with np.errstate(divide="ignore", invalid="ignore"):
        ratios = np.where(dists > 0.0, bounds / dists, math.inf)
    # the first entry anchors the bound, so its ratio is not informative
    margin = float(ratios[1:].min()) if ratios.size > 1 else math.inf
    return RateBoundResult(bool(np.all(dists <= bounds)), margin, rate)


def write_snr_report(path, rows):
    """CSV report: one row per (slice, method) with its SNR in dB."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["slice", "method", "snr_db"])
        for slice_id, method, value in rows:
            writer.writerow([slice_id, method, value])
