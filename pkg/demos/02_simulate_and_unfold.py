"""Synthetic parallel-MRI acquisition and the two direct reconstructions.

Simulates an 8-coil acquisition accelerated 4x, unfolds with weighted least
squares, compares it against the ridge-regularized variant, and exports the
magnitudes as PGM images.
"""

import os

import numpy as np

import wavesense as ws

OUT = os.path.join(os.path.dirname(__file__), "output")
os.makedirs(OUT, exist_ok=True)

config = ws.SimulationConfig(
    phantom="shepp-logan", height=64, width=64, coils=8, reduction=4,
    noise_sigma=7.0, coil_scale=48.0, seed=11, map_error=0.01,
)
sim = ws.simulate(config)
print(f"acquisition: {config.coils} coils, reduction {config.reduction}, "
      f"noise sigma {config.noise_sigma}, coil map error {config.map_error:.0%}")
print(f"reduced-FOV data: {sim.data.data.shape[1]}x{sim.data.data.shape[2]} per coil\n")

model = ws.AcquisitionModel(sim.maps, sim.covariance, config.reduction)
print(f"spectral bound of the per-position systems: theta = {model.spectral_bound():.3f}")
print(f"between-coil covariance, largest off-diagonal magnitude: "
      f"{np.abs(sim.covariance.matrix - np.diag(np.diag(sim.covariance.matrix))).max():.3f}\n")

sense = ws.sense_wls(sim.data, model)
print(f"weighted-least-squares unfold: SNR {ws.snr_db(sim.rho_ref, sense):6.2f} dB")

rho_r = ws.mean_reference(sense)
for kappa in (1e-4, 1e-3, 1e-2):
    tik = ws.tikhonov(sim.data, model, kappa, rho_r)
    print(f"ridge unfold, kappa={kappa:7.0e}:    SNR {ws.snr_db(sim.rho_ref, tik):6.2f} dB")

ws.export_magnitude(sim.rho_ref, os.path.join(OUT, "phantom.pgm"))
ws.export_magnitude(sim.data.data[0], os.path.join(OUT, "coil0_folded.pgm"))
ws.export_magnitude(sense, os.path.join(OUT, "unfold_wls.pgm"))
print(f"\nmagnitude images written to {OUT}/")
