"""Fitting the coefficient priors and exercising their proximity operators.

The mixed absolute/quadratic penalty spans the range from Gaussian to
Laplacian statistics per subband; a piecewise-constant phantom pins the fits
near the Laplacian end, while noisier references move the quadratic weight
up. The prox is a shrunken soft threshold, evaluated coefficientwise.
"""

import numpy as np

import wavesense as ws

rng = np.random.default_rng(3)

# a complex-valued reference: phantom magnitude under a phase ramp steep
# enough to spread energy over both channels, plus the mild noise a real
# reference scan carries - edge sparsity then mixes with a Gaussian floor
yy, xx = np.meshgrid(np.linspace(-1, 1, 64), np.linspace(-1, 1, 64), indexing="ij")
clean = ws.make_phantom("shepp-logan", 64, 64) * np.exp(1j * (2.7 * yy + 4.1 * xx))
ref = clean + 1.5 * (rng.standard_normal((64, 64)) + 1j * rng.standard_normal((64, 64)))

basis = ws.wavelet_basis("sym8")
h = ws.estimate_hyperparameters(ref, basis, 3)

print("fitted detail weights (alpha: absolute-value, beta: quadratic):")
for level in range(1, 4):
    for orientation in ("horizontal", "vertical", "diagonal"):
        p = h.details[(orientation, level)]
        print(f"  level {level} {orientation:10s}  "
              f"alpha_re={p.alpha_re:8.4f}  beta_re={p.beta_re:10.2e}")
a = h.approx
print(f"approximation band: mu=({a.mu_re:.2f}, {a.mu_im:.2f}) "
      f"sigma=({a.sigma_re:.2f}, {a.sigma_im:.2f})")
print(f"strong-convexity modulus of the penalty: {h.strong_convexity():.3g}\n")

# weak correlation between the channels justifies treating them separately,
# which is what makes the channelwise prox exact
coeffs = ws.dwt2(ref, basis, 3)
corr = ws.reim_correlation(coeffs)
print("real/imaginary correlation per level (pooled details):")
for level in range(1, 4):
    print(f"  level {level}: {corr[('detail', level)]:+.3f}")
print(f"  approximation: {corr['approximation']:+.3f}\n")

# the scalar prox in its three regimes
print("scalar prox of gamma*(0.8|x| + 0.25 x^2) at gamma = 1:")
for xi in (0.5, 1.2, 4.0):
    out = ws.prox_scalar(xi, 0.8, 0.5, 0.0, 1.0)
    regime = "dead zone" if out == 0 else "shrunk"
    print(f"  x={xi:4.1f} -> {out:6.3f}  ({regime})")

# one prox application is the exact posterior-mode denoiser for white noise:
# weight the penalty by the per-channel noise variance
sigma_noise = 6.0
noisy = clean + sigma_noise * (rng.standard_normal((64, 64)) + 1j * rng.standard_normal((64, 64)))
den = ws.idwt2(ws.prox_penalty(ws.dwt2(noisy, basis, 3), h, sigma_noise**2), basis)
print(f"\none prox pass as a denoiser: SNR {ws.snr_db(clean, noisy):5.2f} dB -> "
      f"{ws.snr_db(clean, den):5.2f} dB")
