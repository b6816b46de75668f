import numpy as np
import pytest

from wavesense import (
    AcquisitionModel,
    ConfigError,
    MultiCoilData,
    NoiseCovariance,
    NumericalError,
    SimulationConfig,
    build_covariance,
    draw_noise,
    dwt2,
    idwt2,
    make_coil_maps,
    make_phantom,
    simulate,
    wavelet_basis,
)
from wavesense.wavelets import WaveletCoefficients


def identity_cov(coils):
    return NoiseCovariance(np.eye(coils, dtype=complex), 1.0)


def random_model(rng, height=16, width=16, coils=4, reduction=2, sigma=1.0):
    maps = make_coil_maps(height, width, coils, 0.75 * max(height, width), rng)
    cov = build_covariance(maps, sigma)
    return AcquisitionModel(maps, cov, reduction)


def random_image(rng, shape):
    return rng.standard_normal(shape) + 1j * rng.standard_normal(shape)


# ---------------------------------------------------------------------------
# forward
# ---------------------------------------------------------------------------

def test_forward_identity_model():
    maps = np.ones((1, 8, 4), dtype=complex)
    model = AcquisitionModel(maps, identity_cov(1), 1)
    rng = np.random.default_rng(0)
    rho = random_image(rng, (8, 4))
    np.testing.assert_allclose(model.forward(rho).data[0], rho)


def test_forward_hand_folding():
    # Y=4, X=1, R=2, unit map: d(y) = rho(y) + rho(y + 2)
    maps = np.ones((1, 4, 1), dtype=complex)
    model = AcquisitionModel(maps, identity_cov(1), 2)
    d = model.forward(np.array([[1.0], [2.0], [3.0], [4.0]], dtype=complex))
    np.testing.assert_allclose(d.data.ravel(), [4.0, 6.0])


def test_forward_linearity():
    rng = np.random.default_rng(1)
    model = random_model(rng)
    r1, r2 = random_image(rng, (16, 16)), random_image(rng, (16, 16))
    a, b = 1.3 - 0.2j, -0.7 + 2.1j
    lhs = model.forward(a * r1 + b * r2).data
    rhs = a * model.forward(r1).data + b * model.forward(r2).data
    assert np.abs(lhs - rhs).max() < 1e-12 * np.abs(rhs).max()


def test_forward_dimension_mismatch():
    model = AcquisitionModel(np.ones((1, 4, 4), dtype=complex), identity_cov(1), 2)
    with pytest.raises(ConfigError, match="shape"):
        model.forward(np.zeros((8, 4), dtype=complex))


# ---------------------------------------------------------------------------
# gradient
# ---------------------------------------------------------------------------

def test_gradient_zero_at_exact_fit():
    rng = np.random.default_rng(2)
    model = random_model(rng)
    rho = random_image(rng, (16, 16))
    d = model.forward(rho)
    assert np.abs(model.gradient(rho, d)).max() < 1e-12


def test_gradient_matches_central_differences():
    rng = np.random.default_rng(3)
    model = random_model(rng)
    rho = random_image(rng, (16, 16))
    d = MultiCoilData(random_image(rng, (4, 8, 16)), 2)
    u = model.gradient(rho, d)
    step = 1e-6
    for trial in range(3):
        delta = random_image(rng, (16, 16))
        delta /= np.linalg.norm(delta)
        numeric = (
            model.fidelity(rho + step * delta, d) - model.fidelity(rho - step * delta, d)
        ) / (2.0 * step)
        analytic = np.vdot(u, delta).real
        assert abs(numeric - analytic) < 1e-4 * abs(analytic)


def test_gradient_halves_when_covariance_doubles():
    rng = np.random.default_rng(4)
    maps = make_coil_maps(8, 8, 4, 6.0, rng)
    cov1 = build_covariance(maps, 1.0)
    cov2 = NoiseCovariance(2.0 * cov1.matrix, np.sqrt(2.0))
    rho = random_image(rng, (8, 8))
    d = MultiCoilData(random_image(rng, (4, 4, 8)), 2)
    u1 = AcquisitionModel(maps, cov1, 2).gradient(rho, d)
    u2 = AcquisitionModel(maps, cov2, 2).gradient(rho, d)
    np.testing.assert_allclose(u2, 0.5 * u1, atol=1e-12)


def test_fidelity_quadratic_remainder():
    # J(rho + delta) - J(rho) - <grad, delta> must shrink quadratically
    rng = np.random.default_rng(5)
    model = random_model(rng)
    rho = random_image(rng, (16, 16))
    d = MultiCoilData(random_image(rng, (4, 8, 16)), 2)
    u = model.gradient(rho, d)
    delta = random_image(rng, (16, 16))
    delta /= np.linalg.norm(delta)
    remainders = []
    for h in (1e-2, 1e-3, 1e-4):
        r = model.fidelity(rho + h * delta, d) - model.fidelity(rho, d) - h * np.vdot(u, delta).real
        remainders.append(abs(r) / h**2)
    # constant ratio across h confirms O(||delta||^2)
    assert max(remainders) / min(remainders) < 1.5


# ---------------------------------------------------------------------------
# spectral bound
# ---------------------------------------------------------------------------

def test_spectral_bound_scalar_case():
    model = AcquisitionModel(np.ones((1, 4, 4), dtype=complex), identity_cov(1), 1)
    assert model.spectral_bound() == pytest.approx(1.0)


def test_spectral_bound_hand_2x2():
    # S(r) = [[1, 1], [1, -1]] with identity covariance: Gram = 2I
    maps = np.array([[[1.0], [1.0]], [[1.0], [-1.0]]], dtype=complex)
    model = AcquisitionModel(maps, identity_cov(2), 2)
    assert model.spectral_bound() == pytest.approx(2.0, abs=1e-12)


def test_spectral_bound_quadratic_scaling():
    rng = np.random.default_rng(6)
    maps = make_coil_maps(8, 8, 4, 6.0, rng)
    cov = identity_cov(4)
    theta = AcquisitionModel(maps, cov, 2).spectral_bound()
    theta_scaled = AcquisitionModel(3.0 * maps, cov, 2).spectral_bound()
    assert theta_scaled == pytest.approx(9.0 * theta, rel=1e-10)


def test_spectral_bound_against_eigvalsh_r2():
    # closed form for R=2 vs the generic Hermitian eigensolver
    rng = np.random.default_rng(7)
    model = random_model(rng, coils=5, reduction=2)
    dense = np.linalg.eigvalsh(model.gram)[..., -1].max()
    assert model.spectral_bound() == pytest.approx(float(dense), rel=1e-10)


def test_spectral_bound_constructed_spectrum_r4():
    # build Gram stacks with known eigenvalues through random unitaries
    rng = np.random.default_rng(8)
    eigs = rng.uniform(0.1, 4.0, size=(3, 5, 4))
    grams = np.empty((3, 5, 4, 4), dtype=complex)
    for i in range(3):
        for j in range(5):
            q, _ = np.linalg.qr(random_image(rng, (4, 4)))
            grams[i, j] = q @ np.diag(eigs[i, j]) @ q.conj().T
    maps = make_coil_maps(12, 5, 6, 8.0, rng)
    model = AcquisitionModel(maps, identity_cov(6), 4)
    model.gram = grams
    model._theta = None
    assert model.spectral_bound() == pytest.approx(float(eigs.max()), rel=1e-8)


def test_spectral_bound_zero_maps_error():
    model = AcquisitionModel(np.zeros((2, 4, 4), dtype=complex), identity_cov(2), 2)
    with pytest.raises(NumericalError, match="step size"):
        model.spectral_bound()


def test_gram_hermitian_psd():
    rng = np.random.default_rng(9)
    model = random_model(rng, coils=6, reduction=2)
    swapped = np.conj(np.swapaxes(model.gram, -1, -2))
    assert np.abs(model.gram - swapped).max() < 1e-10
    assert np.linalg.eigvalsh(model.gram).min() > -1e-10


# ---------------------------------------------------------------------------
# covariance model
# ---------------------------------------------------------------------------

def test_covariance_identical_maps():
    rng = np.random.default_rng(10)
    one = random_image(rng, (6, 6))
    psi = build_covariance(np.stack([one, one]), 1.5)
    assert psi.matrix[0, 1] == pytest.approx(1.5**2)


def test_covariance_disjoint_supports():
    a = np.zeros((4, 4), dtype=complex)
    b = np.zeros((4, 4), dtype=complex)
    a[:2], b[2:] = 1.0, 1.0
    psi = build_covariance(np.stack([a, b]), 2.0)
    assert abs(psi.matrix[0, 1]) == 0.0
    assert psi.matrix[0, 0] == pytest.approx(4.0)


def test_covariance_hand_example():
    # s1 = (1, 0), s2 = (1, 1): off-diagonal 1/sqrt(2)
    maps = np.array([[[1.0], [0.0]], [[1.0], [1.0]]], dtype=complex)
    psi = build_covariance(maps, 1.0)
    assert psi.matrix[0, 1] == pytest.approx(1.0 / np.sqrt(2.0))


def test_covariance_zero_energy_map_rejected():
    maps = np.stack([np.ones((4, 4), dtype=complex), np.zeros((4, 4), dtype=complex)])
    with pytest.raises(ConfigError, match="zero energy"):
        build_covariance(maps, 1.0)


def test_covariance_hermitian_validation():
    with pytest.raises(ConfigError, match="Hermitian"):
        NoiseCovariance(np.array([[1.0, 1.0], [0.0, 1.0]], dtype=complex), 1.0)


def test_noise_empirical_covariance():
    rng = np.random.default_rng(11)
    maps = make_coil_maps(8, 8, 4, 6.0, rng)
    psi = build_covariance(maps, 0.8)
    draws = draw_noise(psi, 100_000, np.random.default_rng(99))
    empirical = draws.T @ draws.conj() / draws.shape[0]
    scale = psi.sigma**2
    assert np.abs(empirical - psi.matrix).max() < 0.03 * scale
    # circularity: the pseudo-covariance E[n n^T] vanishes
    pseudo = draws.T @ draws / draws.shape[0]
    assert np.abs(pseudo).max() < 0.03 * scale


# ---------------------------------------------------------------------------
# simulator
# ---------------------------------------------------------------------------

def test_simulate_noiseless_equals_forward():
    cfg = SimulationConfig(height=16, width=16, coils=4, reduction=2,
                           noise_sigma=0.0, coil_scale=12.0, seed=5)
    sim = simulate(cfg)
    model = AcquisitionModel(sim.maps, sim.covariance, cfg.reduction)
    np.testing.assert_array_equal(sim.data.data, model.forward(sim.rho_ref).data)


def test_simulate_deterministic():
    cfg = SimulationConfig(height=16, width=16, coils=4, reduction=2,
                           noise_sigma=1.0, coil_scale=12.0, seed=21)
    a, b = simulate(cfg), simulate(cfg)
    assert np.array_equal(a.data.data, b.data.data)
    assert np.array_equal(a.maps, b.maps)
    assert np.array_equal(a.covariance.matrix, b.covariance.matrix)


def test_simulate_seed_changes_noise():
    base = dict(height=16, width=16, coils=4, reduction=2, noise_sigma=1.0, coil_scale=12.0)
    a = simulate(SimulationConfig(seed=1, **base))
    b = simulate(SimulationConfig(seed=2, **base))
    assert not np.array_equal(a.data.data, b.data.data)


def test_simulate_identity_covariance_switch():
    cfg = SimulationConfig(height=16, width=16, coils=4, reduction=2,
                           noise_sigma=2.0, coil_scale=12.0, seed=3,
                           identity_covariance=True)
    sim = simulate(cfg)
    np.testing.assert_allclose(sim.covariance.matrix, 4.0 * np.eye(4))


def test_simulate_map_error_knob():
    base = dict(height=16, width=16, coils=4, reduction=2, noise_sigma=0.0,
                coil_scale=12.0, seed=9)
    clean = simulate(SimulationConfig(**base))
    off = simulate(SimulationConfig(map_error=0.05, **base))
    # data generated with true maps in both cases
    np.testing.assert_array_equal(clean.data.data, off.data.data)
    assert np.array_equal(off.true_maps, clean.maps)
    assert not np.array_equal(off.maps, off.true_maps)


def test_simulation_config_invariants():
    with pytest.raises(ConfigError, match="divisible"):
        SimulationConfig(height=15, width=16, coils=4, reduction=2)
    with pytest.raises(ConfigError, match="L >= R"):
        SimulationConfig(height=16, width=16, coils=2, reduction=4)
    with pytest.raises(ConfigError, match="phantom"):
        SimulationConfig(phantom="cube")


def test_phantom_range_and_kinds():
    for kind in ("shepp-logan", "checker", "flat"):
        img = make_phantom(kind, 32, 32)
        assert img.min() >= 0.0 and img.max() <= 255.0
        assert np.isrealobj(img)
    assert make_phantom("shepp-logan", 64, 64).max() == pytest.approx(255.0)


# ---------------------------------------------------------------------------
# Lipschitz realization in the coefficient domain
# ---------------------------------------------------------------------------

def test_gradient_lipschitz_bound():
    rng = np.random.default_rng(12)
    model = random_model(rng)
    basis = wavelet_basis("haar")
    d = MultiCoilData(random_image(rng, (4, 8, 16)), 2)
    theta = model.spectral_bound()
    for _ in range(5):
        z1 = WaveletCoefficients(random_image(rng, (16, 16)), 2)
        z2 = WaveletCoefficients(random_image(rng, (16, 16)), 2)
        g1 = dwt2(model.gradient(idwt2(z1, basis), d), basis, 2)
        g2 = dwt2(model.gradient(idwt2(z2, basis), d), basis, 2)
        lhs = np.linalg.norm(g1.data - g2.data)
        rhs = 2.0 * theta * np.linalg.norm(z1.data - z2.data)
        assert lhs <= rhs * (1.0 + 1e-12)
