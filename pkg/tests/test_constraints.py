import numpy as np
import pytest

from wavesense import (
    ConfigError,
    ConstraintSet,
    build_bounds,
    detect_artifacts,
    dwt2,
    morph_gradient,
    project_C,
    project_Cstar,
    wavelet_basis,
)
from wavesense.wavelets import WaveletCoefficients


def random_image(rng, shape):
    return rng.standard_normal(shape) + 1j * rng.standard_normal(shape)


# ---------------------------------------------------------------------------
# morphology
# ---------------------------------------------------------------------------

def test_gradient_flat_field():
    assert np.all(morph_gradient(np.full((8, 8), 3.0), 1) == 0.0)


def test_gradient_single_bright_pixel():
    image = np.zeros((7, 7))
    image[3, 3] = 1.0
    grad = morph_gradient(image, 1)
    expected = np.zeros((7, 7))
    expected[2:5, 2:5] = 1.0  # dilation spreads the impulse over 3x3; erosion stays 0
    np.testing.assert_array_equal(grad, expected)


def test_gradient_shift_invariance():
    rng = np.random.default_rng(0)
    image = rng.standard_normal((12, 12))
    np.testing.assert_allclose(morph_gradient(image + 5.0, 2), morph_gradient(image, 2))


def test_gradient_replicate_border():
    # a ramp has constant interior gradient; replicate borders must not spike
    image = np.tile(np.arange(8.0), (8, 1))
    grad = morph_gradient(image, 1)
    assert grad.max() == 2.0
    assert grad[:, 0].max() == 1.0  # border column sees only one neighbor step


# ---------------------------------------------------------------------------
# detection
# ---------------------------------------------------------------------------

def test_detect_constant_image_empty():
    assert not detect_artifacts(np.full((8, 8), 2.0 + 1.0j), 1, 0.9).any()


def test_detect_quantile_zero_support():
    rng = np.random.default_rng(1)
    image = np.abs(rng.standard_normal((16, 16)))
    grad = morph_gradient(np.abs(image), 1)
    mask = detect_artifacts(image, 1, 0.0)
    np.testing.assert_array_equal(mask, grad > 0.0)


def test_detect_synthetic_band():
    # one injected two-row aliasing band on a smooth background: every band
    # pixel sits within the radius-1 window of the band boundary
    yy, xx = np.meshgrid(np.arange(32.0), np.arange(32.0), indexing="ij")
    image = 10.0 + 0.05 * yy + 0.05 * xx
    band = np.zeros((32, 32), dtype=bool)
    band[14:16, :] = True
    image[band] += 40.0
    mask = detect_artifacts(image.astype(complex), 1, 0.9)
    assert mask[band].mean() >= 0.9
    assert mask[~band].mean() <= 0.1


# ---------------------------------------------------------------------------
# bounds
# ---------------------------------------------------------------------------

def test_bounds_empty_mask_unconstrained():
    rng = np.random.default_rng(2)
    image = random_image(rng, (8, 8))
    cset = build_bounds(image, np.zeros((8, 8), dtype=bool), 1)
    assert np.all(np.isinf(cset.lower_re)) and np.all(np.isinf(cset.upper_im))
    feasible = random_image(rng, (8, 8)) * 100.0
    np.testing.assert_array_equal(project_C(feasible, cset), feasible)


def test_bounds_constant_image_degenerate_intervals():
    image = np.full((8, 8), 4.0 - 2.0j)
    mask = np.ones((8, 8), dtype=bool)
    cset = build_bounds(image, mask, 1)
    np.testing.assert_allclose(cset.lower_re, 4.0)
    np.testing.assert_allclose(cset.upper_re, 4.0)
    np.testing.assert_allclose(cset.lower_im, -2.0)
    np.testing.assert_allclose(cset.upper_im, -2.0)


def test_bounds_strip_with_impulse():
    # opening removes the bright impulse from the lower bound; closing keeps
    # the plateau in the upper bound, so the bounds bracket the smooth signal
    strip = np.array([[1.0, 1.0, 9.0, 1.0, 1.0]])
    mask = np.ones((1, 5), dtype=bool)
    cset = build_bounds(strip.astype(complex), mask, 1)
    np.testing.assert_array_equal(cset.lower_re, np.ones((1, 5)))
    assert cset.upper_re[0, 2] == 9.0
    assert np.all(cset.lower_re <= strip) and np.all(strip <= cset.upper_re)


def test_bounds_opening_below_closing():
    rng = np.random.default_rng(3)
    image = random_image(rng, (16, 16))
    cset = build_bounds(image, np.ones((16, 16), dtype=bool), 2)
    assert np.all(cset.lower_re <= cset.upper_re)
    assert np.all(cset.lower_im <= cset.upper_im)


def test_bounds_single_channel():
    rng = np.random.default_rng(4)
    image = random_image(rng, (8, 8))
    cset = build_bounds(image, np.ones((8, 8), dtype=bool), 1, channels="re")
    assert np.all(np.isinf(cset.lower_im))
    assert np.isfinite(cset.lower_re).all()


def test_constraint_set_rejects_empty():
    lower = np.ones((4, 4))
    upper = np.zeros((4, 4))
    with pytest.raises(ConfigError, match="empty"):
        ConstraintSet(lower, upper, lower, upper + 2.0, np.ones((4, 4), dtype=bool))


def test_constraint_set_serialization(tmp_path):
    rng = np.random.default_rng(5)
    image = random_image(rng, (8, 8))
    mask = rng.uniform(size=(8, 8)) > 0.5
    cset = build_bounds(image, mask, 1)
    path = tmp_path / "cset.psns"
    cset.save(path)
    loaded = ConstraintSet.load(path)
    np.testing.assert_array_equal(loaded.mask, cset.mask)
    # infinities survive the clamped encoding
    assert np.array_equal(np.isinf(loaded.lower_re), np.isinf(cset.lower_re))
    finite = np.isfinite(cset.lower_re)
    np.testing.assert_allclose(
        loaded.lower_re[finite], cset.lower_re[finite].astype(np.float32), rtol=1e-6
    )


# ---------------------------------------------------------------------------
# projections
# ---------------------------------------------------------------------------

def box_set(rng, shape):
    lo = rng.standard_normal(shape)
    hi = lo + rng.uniform(0.1, 2.0, size=shape)
    lo_im = rng.standard_normal(shape)
    hi_im = lo_im + rng.uniform(0.1, 2.0, size=shape)
    return ConstraintSet(lo, hi, lo_im, hi_im, np.ones(shape, dtype=bool))


def test_project_feasible_point_unchanged():
    rng = np.random.default_rng(6)
    cset = box_set(rng, (6, 6))
    inside = 0.5 * (cset.lower_re + cset.upper_re) + 0.5j * (cset.lower_im + cset.upper_im)
    np.testing.assert_array_equal(project_C(inside, cset), inside)


def test_project_clamps_only_offending_channel():
    cset = ConstraintSet(
        np.zeros((1, 1)), np.ones((1, 1)), -np.ones((1, 1)), np.ones((1, 1)),
        np.ones((1, 1), dtype=bool),
    )
    out = project_C(np.array([[-0.5 + 0.25j]]), cset)
    assert out[0, 0] == 0.0 + 0.25j


def test_project_is_euclidean_projection():
    # brute-force oracle on a dense grid for a 2-pixel instance
    cset = ConstraintSet(
        np.array([[0.0, -1.0]]), np.array([[1.0, 0.5]]),
        np.array([[-0.5, 0.0]]), np.array([[0.5, 2.0]]),
        np.ones((1, 2), dtype=bool),
    )
    rng = np.random.default_rng(7)
    point = random_image(rng, (1, 2)) * 2.0
    projected = project_C(point, cset)
    grid = np.linspace(-3.0, 3.0, 121)
    for idx in range(2):
        best, best_d = None, np.inf
        for re in grid:
            for im in grid:
                if not (cset.lower_re[0, idx] <= re <= cset.upper_re[0, idx]):
                    continue
                if not (cset.lower_im[0, idx] <= im <= cset.upper_im[0, idx]):
                    continue
                dist = abs(re + 1j * im - point[0, idx])
                if dist < best_d:
                    best, best_d = re + 1j * im, dist
        assert abs(projected[0, idx] - best) <= 0.06  # grid resolution
    assert abs(projected[0, 0] - point[0, 0]) <= best_d + 0.06


def test_project_idempotent_and_nonexpansive():
    rng = np.random.default_rng(8)
    cset = box_set(rng, (8, 8))
    a, b = random_image(rng, (8, 8)), random_image(rng, (8, 8))
    pa, pb = project_C(a, cset), project_C(b, cset)
    np.testing.assert_array_equal(project_C(pa, cset), pa)
    assert np.linalg.norm(pa - pb) <= np.linalg.norm(a - b)


def test_project_cstar_unconstrained_identity():
    rng = np.random.default_rng(9)
    basis = wavelet_basis("sym8")
    coeffs = WaveletCoefficients(random_image(rng, (16, 16)), 2)
    out = project_Cstar(coeffs, ConstraintSet.unbounded((16, 16)), basis)
    assert np.abs(out.data - coeffs.data).max() < 1e-10


def test_project_cstar_idempotent():
    rng = np.random.default_rng(10)
    basis = wavelet_basis("haar")
    cset = box_set(rng, (16, 16))
    coeffs = WaveletCoefficients(random_image(rng, (16, 16)), 2)
    once = project_Cstar(coeffs, cset, basis)
    twice = project_Cstar(once, cset, basis)
    assert np.abs(twice.data - once.data).max() < 1e-10


def test_project_cstar_nonexpansive():
    rng = np.random.default_rng(11)
    basis = wavelet_basis("db8")
    cset = box_set(rng, (16, 16))
    for _ in range(10):
        a = WaveletCoefficients(random_image(rng, (16, 16)), 2)
        b = WaveletCoefficients(random_image(rng, (16, 16)), 2)
        pa, pb = project_Cstar(a, cset, basis), project_Cstar(b, cset, basis)
        assert np.linalg.norm(pa.data - pb.data) <= np.linalg.norm(a.data - b.data) * (1 + 1e-12)


def test_project_cstar_preserves_feasible():
    rng = np.random.default_rng(12)
    basis = wavelet_basis("haar")
    cset = box_set(rng, (8, 8))
    feasible_image = project_C(random_image(rng, (8, 8)), cset)
    coeffs = dwt2(feasible_image, basis, 1)
    out = project_Cstar(coeffs, cset, basis)
    assert np.abs(out.data - coeffs.data).max() < 1e-10
