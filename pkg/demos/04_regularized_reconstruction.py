"""The full comparative study: direct, ridge, wavelet, constrained wavelet.

Reproduces the package's benchmark instance: an accelerated acquisition with
moderate noise and mildly mis-estimated coil maps, so the unfold shows
localized ghosting. The wavelet-regularized solver suppresses most of it;
adding box constraints on detected artifact regions removes the rest.
"""

import os
import warnings

import numpy as np

import wavesense as ws

OUT = os.path.join(os.path.dirname(__file__), "output")
os.makedirs(OUT, exist_ok=True)

config = ws.SimulationConfig(
    phantom="shepp-logan", height=64, width=64, coils=8, reduction=4,
    noise_sigma=7.0, coil_scale=48.0, seed=11, map_error=0.01,
)
sim = ws.simulate(config)
model = ws.AcquisitionModel(sim.maps, sim.covariance, config.reduction)
basis = ws.wavelet_basis("sym8")

# priors fitted from the reference; its imaginary channels are identically
# zero, so the degenerate-channel floor stands in for them
h = ws.estimate_hyperparameters(sim.rho_ref, basis, 3, degenerate="floor")

sense = ws.sense_wls(sim.data, model)
tik = ws.tikhonov(sim.data, model, 1e-3, ws.mean_reference(sense))

solver = ws.SolverConfig(max_iter=300)
with warnings.catch_warnings():
    warnings.simplefilter("ignore")
    wt, trace = ws.fb_reconstruct(sim.data, model, basis, h, solver)

    # constrain detected artifact pixels of the real channel to the
    # opening/closing envelope of the unfold
    mask = ws.detect_artifacts(sense, se_radius=1, threshold_quantile=0.85)
    cset = ws.build_bounds(sense, mask, se_radius=1, channels="re")
    cwt, trace_c = ws.cwt_reconstruct(sim.data, model, basis, h, cset, solver)

print(f"theta = {trace.theta:.3f}, step gamma = {trace.gamma:.3f}, "
      f"{trace.iterations[-1]} and {trace_c.iterations[-1]} outer iterations")
print(f"artifact mask covers {mask.mean():.1%} of the field of view\n")

print("method                       SNR (dB)")
for name, image in (("direct unfold", sense), ("ridge (kappa 1e-3)", tik),
                    ("wavelet-regularized", wt), ("constrained wavelet", cwt)):
    print(f"  {name:26s} {ws.snr_db(sim.rho_ref, image):6.2f}")

trace.write_csv(os.path.join(OUT, "convergence_wt.csv"))
trace_c.write_csv(os.path.join(OUT, "convergence_cwt.csv"))
for name, image in (("sense", sense), ("tikhonov", tik), ("wt", wt), ("cwt", cwt)):
    ws.export_magnitude(image, os.path.join(OUT, f"recon_{name}.pgm"))
print(f"\ntraces and magnitudes written to {OUT}/")

try:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, axes = plt.subplots(1, 5, figsize=(16, 3.4))
    for ax, (title, image) in zip(
        axes,
        [("reference", sim.rho_ref), ("unfold", sense), ("ridge", tik),
         ("wavelet", wt), ("constrained", cwt)],
    ):
        ax.imshow(np.abs(image), cmap="gray")
        ax.set_title(title)
        ax.axis("off")
    fig.tight_layout()
    fig.savefig(os.path.join(OUT, "comparison.png"), dpi=130)
    print(f"figure written to {OUT}/comparison.png")
except ImportError:
    print("matplotlib not available; skipping the comparison figure")
