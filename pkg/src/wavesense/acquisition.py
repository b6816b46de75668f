"""SENSE acquisition model and synthetic data generation.

The reduced-FOV formulation is implemented directly: undersampling by R along
the phase-encoding (y) direction folds the full field of view so that each
reduced-grid position r = (y, x), y in {0..Y/R-1}, superposes the R true
pixels y + j*(Y/R). Stacking the coil sensitivities at those pixels gives the
per-position L-by-R system matrix; acquisition, data-fidelity gradients and
per-position Gram matrices are all evaluated vectorized over r.
"""

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, NumericalError

PHANTOM_KINDS = ("shepp-logan", "checker", "flat")


@dataclass
class MultiCoilData:
    """Reduced-FOV coil images: ``data`` is (L, Y/R, X), ``reduction`` is R."""

    data: np.ndarray
    reduction: int

    def __post_init__(self):
        self.data = np.asarray(self.data)
        if self.data.ndim != 3:
            raise ConfigError(f"coil data must be (L, Y/R, X), got {self.data.shape}")
        if self.reduction < 1:
            raise ConfigError(f"reduction factor must be >= 1, got {self.reduction}")
        if self.coils < 1:
            raise ConfigError("need at least one coil")

    @property
    def coils(self):
        return self.data.shape[0]

    @property
    def full_shape(self):
        """Shape (Y, X) of the full field of view."""
        return self.data.shape[1] * self.reduction, self.data.shape[2]


@dataclass
class NoiseCovariance:
    """Between-coil noise covariance: Hermitian L-by-L matrix plus the scalar deviation."""

    matrix: np.ndarray
    sigma: float

    def __post_init__(self):
        self.matrix = np.asarray(self.matrix, dtype=np.complex128)
        if self.matrix.ndim != 2 or self.matrix.shape[0] != self.matrix.shape[1]:
            raise ConfigError(f"covariance must be square, got {self.matrix.shape}")
        scale = float(np.linalg.norm(self.matrix))
        if scale == 0.0:
            raise ConfigError("covariance matrix is identically zero")
        if np.linalg.norm(self.matrix - self.matrix.conj().T) > 1e-12 * scale:
            raise ConfigError("covariance matrix is not Hermitian within 1e-12")

    @property
    def coils(self):
        return self.matrix.shape[0]


def build_covariance(maps, sigma):
    """Covariance model coupling the noise deviation with sensitivity overlaps.

    Entry (l1, l2) is sigma^2 * <s_l1, s_l2> normalized by the two map
    energies, the sums running over the full field of view; diagonal entries
    equal sigma^2 exactly.
    """
    maps = np.asarray(maps, dtype=np.complex128)
    if maps.ndim != 3:
        raise ConfigError(f"maps must be (L, Y, X), got {maps.shape}")
    if sigma <= 0.0:
        raise ConfigError(f"noise deviation must be positive, got {sigma}")
    flat = maps.reshape(maps.shape[0], -1)
    overlap = flat @ flat.conj().T
    energy = np.real(np.diag(overlap))
    if np.any(energy == 0.0):
        raise ConfigError("a coil map has zero energy")
    psi = sigma**2 * overlap / np.sqrt(np.outer(energy, energy))
    psi = 0.5 * (psi + psi.conj().T)
    np.fill_diagonal(psi, sigma**2)
    return NoiseCovariance(psi, float(sigma))


class AcquisitionModel:
    """Per-position SENSE systems derived from coil maps and a noise covariance.

    Precomputes the inverse covariance, the (Y/R, X, L, R) stack of system
    matrices and the (Y/R, X, R, R) Gram matrices S^H Psi^-1 S.
    """

    def __init__(self, maps, covariance, reduction):
        maps = np.asarray(maps, dtype=np.complex128)
        if maps.ndim != 3:
            raise ConfigError(f"maps must be (L, Y, X), got {maps.shape}")
        coils, height, width = maps.shape
        if covariance.coils != coils:
            raise ConfigError(
                f"covariance is {covariance.coils}x{covariance.coils} but there are {coils} maps"
            )
        if reduction < 1 or height % reduction:
            raise ConfigError(
                f"FOV height {height} is not divisible by reduction factor {reduction}"
            )
        self.maps = maps
        self.covariance = covariance
        self.reduction = int(reduction)
        self.shape = (height, width)
        try:
            np.linalg.cholesky(covariance.matrix)
        except np.linalg.LinAlgError:
            raise NumericalError("noise covariance is not positive definite") from None
        self.psi_inv = np.linalg.inv(covariance.matrix)
        self.psi_inv = 0.5 * (self.psi_inv + self.psi_inv.conj().T)
        reduced = height // reduction
        # smat[yr, x, l, j] = s_l(yr + j*(Y/R), x)
        self.smat = np.transpose(
            maps.reshape(coils, reduction, reduced, width), (2, 3, 0, 1)
        ).copy()
        whitened = np.einsum("lm,yxmb->yxlb", self.psi_inv, self.smat)
        gram = np.einsum("yxla,yxlb->yxab", self.smat.conj(), whitened)
        self.gram = 0.5 * (gram + np.conj(np.swapaxes(gram, -1, -2)))
        self._whitened = whitened
        self._theta = None

    @property
    def coils(self):
        return self.maps.shape[0]

    @property
    def reduced_shape(self):
        return self.shape[0] // self.reduction, self.shape[1]

    def _stack(self, rho):
        rho = np.asarray(rho, dtype=np.complex128)
        if rho.shape != self.shape:
            raise ConfigError(f"image shape {rho.shape} does not match model {self.shape}")
        reduced = self.shape[0] // self.reduction
        return np.moveaxis(rho.reshape(self.reduction, reduced, self.shape[1]), 0, -1)

    def _unstack(self, stacked):
        return np.moveaxis(stacked, -1, 0).reshape(self.shape)

    def _check_data(self, d):
        if d.reduction != self.reduction or d.coils != self.coils:
            raise ConfigError("coil data does not match the acquisition model")
        if d.data.shape[1:] != self.reduced_shape:
            raise ConfigError(
                f"coil data grid {d.data.shape[1:]} does not match model {self.reduced_shape}"
            )

    def forward(self, rho):
        """Noiseless acquisition: d(r) = S(r) rho(r) on the reduced grid."""
        stacked = self._stack(rho)
        coil_images = np.einsum("yxlj,yxj->yxl", self.smat, stacked)
        return MultiCoilData(np.moveaxis(coil_images, -1, 0), self.reduction)

    def _whitened_residual(self, rho, d):
        self._check_data(d)
        stacked = self._stack(rho)
        resid = np.einsum("yxlj,yxj->yxl", self.smat, stacked) - np.moveaxis(d.data, 0, -1)
        return resid, np.einsum("lm,yxm->yxl", self.psi_inv, resid)

    def gradient(self, rho, d):
        """Gradient image of the data-fidelity term at rho."""
        return self.gradient_and_fidelity(rho, d)[0]

    def fidelity(self, rho, d):
        """Whitened least-squares misfit summed over the reduced grid."""
        return self.gradient_and_fidelity(rho, d)[1]

    def gradient_and_fidelity(self, rho, d):
        """Gradient and misfit in one pass: u(r) = 2 S^H Psi^-1 (S rho(r) - d(r))."""
        resid, whitened = self._whitened_residual(rho, d)
        grad_stack = 2.0 * np.einsum("yxlj,yxl->yxj", self.smat.conj(), whitened)
        misfit = float(np.sum(resid.conj() * whitened).real)
        return self._unstack(grad_stack), misfit

    def spectral_bound(self):
        """Largest Gram eigenvalue over the reduced grid (theta)."""
        if self._theta is None:
            r = self.reduction
            if r == 1:
                lam = self.gram[..., 0, 0].real
            elif r == 2:
                a = self.gram[..., 0, 0].real
                c = self.gram[..., 1, 1].real
                b = self.gram[..., 0, 1]
                lam = 0.5 * (a + c) + np.sqrt(0.25 * (a - c) ** 2 + np.abs(b) ** 2)
            else:
                lam = np.linalg.eigvalsh(self.gram)[..., -1]
            theta = float(lam.max())
            if theta <= 0.0:
                raise NumericalError("all-zero sensitivities: no valid step size exists")
            self._theta = theta
        return self._theta


# ---------------------------------------------------------------------------
# Synthetic phantoms, coil maps and noise
# ---------------------------------------------------------------------------

# Modified Shepp-Logan ellipses: intensity, half-axes (a, b), center (x0, y0),
# rotation in degrees, on the [-1, 1]^2 square.
_SHEPP_LOGAN = (
    (1.0, 0.69, 0.92, 0.0, 0.0, 0.0),
    (-0.8, 0.6624, 0.874, 0.0, -0.0184, 0.0),
    (-0.2, 0.11, 0.31, 0.22, 0.0, -18.0),
    (-0.2, 0.16, 0.41, -0.22, 0.0, 18.0),
    (0.1, 0.21, 0.25, 0.0, 0.35, 0.0),
    (0.1, 0.046, 0.046, 0.0, 0.1, 0.0),
    (0.1, 0.046, 0.046, 0.0, -0.1, 0.0),
    (0.1, 0.046, 0.023, -0.08, -0.605, 0.0),
    (0.1, 0.023, 0.023, 0.0, -0.606, 0.0),
    (0.1, 0.023, 0.046, 0.06, -0.605, 0.0),
)


def _unit_grid(height, width):
    y = (np.arange(height) - (height - 1) / 2.0) / ((height - 1) / 2.0)
    x = (np.arange(width) - (width - 1) / 2.0) / ((width - 1) / 2.0)
    return np.meshgrid(y, x, indexing="ij")


def shepp_logan(height, width):
    """Modified Shepp-Logan phantom scaled to intensity range [0, 255]."""
    yy, xx = _unit_grid(height, width)
    image = np.zeros((height, width))
    for value, a, b, x0, y0, angle in _SHEPP_LOGAN:
        phi = np.deg2rad(angle)
        # image row index grows downward; the table's y axis points up
        xr = (xx - x0) * np.cos(phi) + (-yy - y0) * np.sin(phi)
        yr = (-yy - y0) * np.cos(phi) - (xx - x0) * np.sin(phi)
        image[(xr / a) ** 2 + (yr / b) ** 2 <= 1.0] += value
    return np.clip(image, 0.0, None) * 255.0


def checkerboard(height, width, cells=8):
    """Alternating-intensity board, values 64 and 192."""
    cell_h = max(height // cells, 1)
    cell_w = max(width // cells, 1)
    yy, xx = np.meshgrid(np.arange(height), np.arange(width), indexing="ij")
    parity = (yy // cell_h + xx // cell_w) % 2
    return np.where(parity == 0, 64.0, 192.0)


def flat(height, width):
    return np.full((height, width), 128.0)


def make_phantom(kind, height, width):
    """Dispatch over the built-in phantom kinds."""
    if kind == "shepp-logan":
        return shepp_logan(height, width)
    if kind == "checker":
        return checkerboard(height, width)
    if kind == "flat":
        return flat(height, width)
    raise ConfigError(f"unknown phantom kind {kind!r}; available: {', '.join(PHANTOM_KINDS)}")


def make_coil_maps(height, width, coils, scale, rng):
    """Smooth complex coil profiles.

    Coils sit on a circle just outside the FOV; each profile is a rational
    radial decay (characteristic width ``scale`` pixels) modulated by a
    low-order complex polynomial and a linear phase ramp.
    """
    if coils < 1:
        raise ConfigError(f"need at least one coil, got {coils}")
    if scale <= 0.0:
        raise ConfigError(f"coil scale must be positive, got {scale}")
    yy, xx = _unit_grid(height, width)
    scale_norm = 2.0 * scale / max(height, width)
    maps = np.empty((coils, height, width), dtype=np.complex128)
    for ell in range(coils):
        angle = 2.0 * np.pi * ell / coils + rng.uniform(-0.1, 0.1)
        cy, cx = 1.25 * np.sin(angle), 1.25 * np.cos(angle)
        dist2 = (yy - cy) ** 2 + (xx - cx) ** 2
        decay = 1.0 / (1.0 + dist2 / scale_norm**2)
        c1, c2 = 0.2 * (rng.standard_normal(2) + 1j * rng.standard_normal(2))
        poly = 1.0 + c1 * xx + c2 * yy
        phase0 = rng.uniform(0.0, 2.0 * np.pi)
        ky, kx = rng.uniform(-0.5 * np.pi, 0.5 * np.pi, size=2)
        maps[ell] = decay * poly * np.exp(1j * (phase0 + ky * yy + kx * xx))
    return maps


def draw_noise(covariance, count, rng):
    """``count`` i.i.d. circular complex Gaussian vectors with the given covariance.

    Real and imaginary standard-normal stacks are combined through the
    Hermitian square root of Psi/2.
    """
    evals, evecs = np.linalg.eigh(covariance.matrix)
    evals = np.clip(evals, 0.0, None)
    factor = (evecs * np.sqrt(0.5 * evals)) @ evecs.conj().T
    z = rng.standard_normal((2, count, covariance.coils))
    return (z[0] + 1j * z[1]) @ factor.T


@dataclass
class SimulationConfig:
    """Synthetic acquisition settings; fully deterministic given ``seed``."""

    phantom: str = "shepp-logan"
    height: int = 64
    width: int = 64
    coils: int = 8
    reduction: int = 4
    noise_sigma: float = 1.0
    coil_scale: float = 48.0
    seed: int = 0
    identity_covariance: bool = False
    map_error: float = 0.0

    def __post_init__(self):
        if self.phantom not in PHANTOM_KINDS:
            raise ConfigError(
                f"unknown phantom kind {self.phantom!r}; available: {', '.join(PHANTOM_KINDS)}"
            )
        if self.height < 1 or self.width < 1:
            raise ConfigError("image dimensions must be positive")
        if self.reduction < 1:
            raise ConfigError(f"reduction factor must be >= 1, got {self.reduction}")
        if self.height % self.reduction:
            raise ConfigError(
                f"FOV height {self.height} is not divisible by reduction factor {self.reduction}"
            )
        if self.coils < self.reduction:
            raise ConfigError(f"need L >= R, got L={self.coils}, R={self.reduction}")
        if self.noise_sigma < 0.0:
            raise ConfigError(f"noise deviation must be >= 0, got {self.noise_sigma}")
        if self.coil_scale <= 0.0:
            raise ConfigError(f"coil scale must be positive, got {self.coil_scale}")
        if self.map_error < 0.0:
            raise ConfigError(f"map error must be >= 0, got {self.map_error}")


@dataclass
class SimulationResult:
    """Phantom, the maps handed to reconstruction, noise model, and coil data."""

    rho_ref: np.ndarray
    maps: np.ndarray
    covariance: NoiseCovariance
    data: MultiCoilData
    true_maps: np.ndarray


def simulate(config):
    """Generate (phantom, coil maps, covariance, noisy reduced-FOV data).

    Independent deterministic RNG streams are split from the seed for the
    coil maps, the acquisition noise and the optional map mis-estimation, so
    any of the three can be varied without perturbing the others.
    """
    streams = np.random.SeedSequence(config.seed).spawn(3)
    rng_maps, rng_noise, rng_err = (np.random.default_rng(s) for s in streams)

    rho_ref = make_phantom(config.phantom, config.height, config.width).astype(np.complex128)
    true_maps = make_coil_maps(
        config.height, config.width, config.coils, config.coil_scale, rng_maps
    )

    sigma_model = config.noise_sigma if config.noise_sigma > 0.0 else 1.0
    if config.identity_covariance:
        covariance = NoiseCovariance(
            sigma_model**2 * np.eye(config.coils, dtype=np.complex128), sigma_model
        )
    else:
        covariance = build_covariance(true_maps, sigma_model)

    model = AcquisitionModel(true_maps, covariance, config.reduction)
    data = model.forward(rho_ref)
    if config.noise_sigma > 0.0:
        reduced, width = model.reduced_shape
        noise = draw_noise(covariance, reduced * width, rng_noise)
        data = MultiCoilData(
            data.data + np.moveaxis(noise.reshape(reduced, width, -1), -1, 0),
            config.reduction,
        )

    maps = true_maps
    if config.map_error > 0.0:
        perturb = np.empty_like(true_maps)
        yy, xx = _unit_grid(config.height, config.width)
        for ell in range(config.coils):
            a0, a1, a2 = rng_err.standard_normal(3) + 1j * rng_err.standard_normal(3)
            perturb[ell] = a0 + a1 * xx + a2 * yy
        maps = true_maps * (1.0 + config.map_error * perturb)

    return SimulationResult(rho_ref, maps, covariance, data, true_maps)
