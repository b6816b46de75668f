"""Artifact-region detection and per-pixel box constraints.

Aliasing artifacts show up as well-localized curves of extreme intensity, so
they are found by thresholding a morphological gradient of the magnitude
image, and tamed by interval constraints built from a morphological opening
(lower bound) and closing (upper bound) of each channel. Morphology uses
replicate borders: it runs on magnitudes for detection, where a periodic wrap
would smear opposite borders together.
"""

from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .containers import read_stack, write_stack
from .errors import ConfigError, FormatError
from .wavelets import dwt2, idwt2

# float32 full-scale stands in for an infinite bound inside container files
_INF_SENTINEL = float(np.finfo(np.float32).max)


@dataclass
class ConstraintSet:
    """Per-pixel real/imaginary intervals; inactive pixels are unbounded."""

    lower_re: np.ndarray
    upper_re: np.ndarray
    lower_im: np.ndarray
    upper_im: np.ndarray
    mask: np.ndarray

    def __post_init__(self):
        planes = [self.lower_re, self.upper_re, self.lower_im, self.upper_im]
        shapes = {np.asarray(p).shape for p in planes} | {np.asarray(self.mask).shape}
        if len(shapes) != 1:
            raise ConfigError(f"bound planes disagree in shape: {shapes}")
        self.lower_re = np.asarray(self.lower_re, dtype=np.float64).copy()
        self.upper_re = np.asarray(self.upper_re, dtype=np.float64).copy()
        self.lower_im = np.asarray(self.lower_im, dtype=np.float64).copy()
        self.upper_im = np.asarray(self.upper_im, dtype=np.float64).copy()
        self.mask = np.asarray(self.mask, dtype=bool).copy()
        inactive = ~self.mask
        for plane, value in (
            (self.lower_re, -np.inf),
            (self.lower_im, -np.inf),
            (self.upper_re, np.inf),
            (self.upper_im, np.inf),
        ):
            plane[inactive] = value
        if np.any(np.isnan(self.lower_re)) or np.any(np.isnan(self.upper_re)) \
                or np.any(np.isnan(self.lower_im)) or np.any(np.isnan(self.upper_im)):
            raise ConfigError("constraint bounds contain NaN")
        if np.any(self.lower_re > self.upper_re) or np.any(self.lower_im > self.upper_im):
            raise ConfigError("empty constraint set: a lower bound exceeds its upper bound")

    @property
    def shape(self):
        return self.mask.shape

    @classmethod
    def unbounded(cls, shape):
        """Fully inactive set: every pixel unconstrained."""
        inf = np.full(shape, np.inf)
        return cls(-inf, inf, -inf, inf.copy(), np.zeros(shape, dtype=bool))

    @classmethod
    def fixed(cls, image):
        """Degenerate intervals pinning every pixel to ``image``."""
        image = np.asarray(image)
        return cls(
            image.real, image.real.copy(), image.imag, image.imag.copy(),
            np.ones(image.shape, dtype=bool),
        )

    def save(self, path):
        """Serialize as a five-plane container; infinities clamp to float32 max."""
        planes = np.stack(
            [
                np.clip(self.lower_re, -_INF_SENTINEL, _INF_SENTINEL),
                np.clip(self.upper_re, -_INF_SENTINEL, _INF_SENTINEL),
                np.clip(self.lower_im, -_INF_SENTINEL, _INF_SENTINEL),
                np.clip(self.upper_im, -_INF_SENTINEL, _INF_SENTINEL),
                self.mask.astype(np.float64),
            ]
        ).astype(np.complex128)
        write_stack(planes, path, extra={"content": "constraints", "bounds_inf": "clamped"})

    @classmethod
    def load(cls, path):
        stack, fields = read_stack(path)
        if stack.shape[0] != 5 or fields.get("content") != "constraints":
            raise FormatError(f"{path}: not a constraint-set container")
        planes = stack.real.astype(np.float64)
        if fields.get("bounds_inf") == "clamped":
            for idx, sign in ((0, -1.0), (1, 1.0), (2, -1.0), (3, 1.0)):
                hit = planes[idx] == sign * np.float64(np.float32(_INF_SENTINEL))
                planes[idx][hit] = sign * np.inf
        return cls(planes[0], planes[1], planes[2], planes[3], planes[4] > 0.5)


def morph_gradient(image, se_radius):
    """Dilation minus erosion with a (2r+1)^2 square element, replicate borders."""
    if se_radius < 1:
        raise ConfigError(f"structuring-element radius must be >= 1, got {se_radius}")
    image = np.asarray(image, dtype=np.float64)
    size = 2 * se_radius + 1
    return (
        ndimage.grey_dilation(image, size=(size, size), mode="nearest")
        - ndimage.grey_erosion(image, size=(size, size), mode="nearest")
    )


def detect_artifacts(image, se_radius=1, threshold_quantile=0.9):
    """Pixels whose magnitude morphological gradient exceeds the given quantile.

    The quantile is taken over the strictly positive gradient values, so a
    constant image yields an empty mask.
    """
    if not 0.0 <= threshold_quantile < 1.0:
        raise ConfigError(f"quantile must lie in [0, 1), got {threshold_quantile}")
    grad = morph_gradient(np.abs(np.asarray(image)), se_radius)
    positive = grad[grad > 0.0]
    if positive.size == 0:
        return np.zeros(grad.shape, dtype=bool)
    # inclusive comparison so quantile 0 selects exactly the positive support
    return grad >= np.quantile(positive, threshold_quantile)


def build_bounds(image, mask, se_radius=1, channels="both"):
    """Interval constraints on masked pixels from channelwise opening/closing.

    The opening (erosion then dilation) discards bright impulses and serves
    as the lower bound; the closing fills dark impulses and serves as the
    upper bound. Opening <= closing pointwise, so the set is never empty.
    ``channels`` restricts the bounds to one channel ('re' or 'im'), leaving
    the other unconstrained; useful when one channel carries no signal and a
    noise-derived interval would only fight its prior.
    """
    if channels not in ("both", "re", "im"):
        raise ConfigError(f"channels must be 'both', 're' or 'im', got {channels!r}")
    image = np.asarray(image, dtype=np.complex128)
    mask = np.asarray(mask, dtype=bool)
    if mask.shape != image.shape:
        raise ConfigError(f"mask shape {mask.shape} does not match image {image.shape}")
    size = (2 * se_radius + 1,) * 2
    inf = np.full(image.shape, np.inf)
    lower_re, upper_re = -inf, inf
    lower_im, upper_im = -inf, inf
    if channels in ("both", "re"):
        lower_re = ndimage.grey_opening(image.real, size=size, mode="nearest")
        upper_re = ndimage.grey_closing(image.real, size=size, mode="nearest")
    if channels in ("both", "im"):
        lower_im = ndimage.grey_opening(image.imag, size=size, mode="nearest")
        upper_im = ndimage.grey_closing(image.imag, size=size, mode="nearest")
    return ConstraintSet(lower_re, upper_re, lower_im, upper_im, mask)


def project_C(image, cset):
    """Euclidean projection onto the box set: channelwise clamp per pixel."""
    image = np.asarray(image, dtype=np.complex128)
    if image.shape != cset.shape:
        raise ConfigError(f"image shape {image.shape} does not match constraints {cset.shape}")
    re = np.clip(image.real, cset.lower_re, cset.upper_re)
    im = np.clip(image.imag, cset.lower_im, cset.upper_im)
    return re + 1j * im


def project_Cstar(coeffs, cset, basis):
    """Projection in the coefficient domain.

    For an orthonormal basis this is exactly the decomposition of the
    image-domain projection of the reconstruction.
    """
    return dwt2(project_C(idwt2(coeffs, basis), cset), basis, coeffs.levels)
