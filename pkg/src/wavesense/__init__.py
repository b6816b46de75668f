"""Wavelet-regularized SENSE reconstruction for parallel MRI."""

from .acquisition import (
    AcquisitionModel,
    MultiCoilData,
    NoiseCovariance,
    SimulationConfig,
    SimulationResult,
    build_covariance,
    draw_noise,
    make_coil_maps,
    make_phantom,
    simulate,
)
from .constraints import (
    ConstraintSet,
    build_bounds,
    detect_artifacts,
    morph_gradient,
    project_C,
    project_Cstar,
)
from .containers import export_magnitude, read_image, read_stack, write_image, write_stack
from .errors import ConfigError, FormatError, NumericalError, WavesenseError
from .metrics import rate_bound, reim_correlation, snr_db, write_snr_report
from .priors import (
    ApproxParams,
    Hyperparameters,
    SubbandParams,
    estimate_hyperparameters,
    fit_gaussian,
    fit_ggl,
    ggl_logpdf,
    ggl_pdf,
    load_hyperparameters,
    penalty_value,
    prox_complex,
    prox_penalty,
    prox_scalar,
    save_hyperparameters,
)
from .solvers import (
    ConvergenceTrace,
    SolverConfig,
    criterion,
    cwt_reconstruct,
    dr_prox,
    fb_reconstruct,
    mean_reference,
    reconstruct_slices,
    sense_wls,
    tikhonov,
)
from .wavelets import ORIENTATIONS, WaveletBasis, WaveletCoefficients, dwt2, idwt2, wavelet_basis

__version__ = "0.1.0"
