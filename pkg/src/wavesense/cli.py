"""Batch front end: simulate, reconstruct, evaluate.

Exit codes: 0 success, 2 configuration error, 3 numerical failure,
4 I/O or file-format error. Every command writes a JSON manifest capturing
everything needed to reproduce the run bit-exactly.
"""

import argparse
import hashlib
import json
import os
import sys

import numpy as np

from . import __version__
from .acquisition import (
    AcquisitionModel,
    MultiCoilData,
    NoiseCovariance,
    SimulationConfig,
    simulate,
)
from .constraints import ConstraintSet, build_bounds, detect_artifacts
from .containers import export_magnitude, read_image, read_stack, write_image, write_stack
from .errors import ConfigError, FormatError, NumericalError
from .metrics import snr_db, write_snr_report
from .priors import estimate_hyperparameters, load_hyperparameters, save_hyperparameters
from .solvers import (
    SolverConfig,
    cwt_reconstruct,
    fb_reconstruct,
    mean_reference,
    sense_wls,
    tikhonov,
)
from .wavelets import wavelet_basis

FORMAT_VERSION = "PSNS1"

_CONFIG_SCHEMA = {
    "phantom": str,
    "height": int,
    "width": int,
    "coils": int,
    "reduction": int,
    "noise_sigma": float,
    "coil_scale": float,
    "seed": int,
    "identity_covariance": bool,
    "map_error": float,
}


def parse_config(path):
    """Parse flat key=value lines with # comments; unknown keys are errors."""
    values = {}
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"{path}:{lineno}: expected key = value, got {raw.rstrip()!r}")
            key, _, value = line.partition("=")
            key, value = key.strip(), value.strip()
            if key not in _CONFIG_SCHEMA:
                raise ConfigError(f"{path}:{lineno}: unknown key {key!r}")
            if key in values:
                raise ConfigError(f"{path}:{lineno}: duplicate key {key!r}")
            kind = _CONFIG_SCHEMA[key]
            try:
                if kind is bool:
                    if value.lower() not in ("true", "false", "0", "1"):
                        raise ValueError(f"expected a boolean, got {value!r}")
                    values[key] = value.lower() in ("true", "1")
                else:
                    values[key] = kind(value)
            except ValueError as exc:
                raise ConfigError(f"{path}:{lineno}: bad value for {key!r}: {exc}") from None
    try:
        return SimulationConfig(**values)
    except ConfigError as exc:
        raise ConfigError(f"{path}: {exc}") from None


def _sha256(path):
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        digest.update(fh.read())
    return digest.hexdigest()


def _write_manifest(path, payload):
    payload = dict(payload)
    payload["package_version"] = __version__
    payload["format_version"] = FORMAT_VERSION
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


# ---------------------------------------------------------------------------
# simulate
# ---------------------------------------------------------------------------

def cmd_simulate(args):
    config = parse_config(args.config)
    result = simulate(config)
    outdir = args.outdir
    os.makedirs(outdir, exist_ok=True)

    write_image(result.rho_ref, os.path.join(outdir, "rho_ref.psns"))
    write_stack(result.maps, os.path.join(outdir, "maps.psns"))
    write_stack(
        result.covariance.matrix[None, :, :],
        os.path.join(outdir, "psi.psns"),
        extra={"sigma": repr(result.covariance.sigma)},
    )
    write_stack(
        result.data.data,
        os.path.join(outdir, "data.psns"),
        extra={"reduction": str(result.data.reduction)},
    )
    _write_manifest(
        os.path.join(outdir, "manifest.json"),
        {
            "command": "simulate",
            "config_file": os.path.abspath(args.config),
            "config_sha256": _sha256(args.config),
            "seed": config.seed,
            "resolved_config": {k: getattr(config, k) for k in _CONFIG_SCHEMA},
            "outputs": ["rho_ref.psns", "maps.psns", "psi.psns", "data.psns"],
        },
    )
    return 0


# ---------------------------------------------------------------------------
# reconstruct
# ---------------------------------------------------------------------------

def _load_model(args):
    data_stack, data_fields = read_stack(args.data)
    if "reduction" not in data_fields:
        raise FormatError(f"{args.data}: header lacks the 'reduction' field")
    reduction = int(data_fields["reduction"])
    if args.reduction is not None and args.reduction != reduction:
        raise ConfigError(
            f"--reduction {args.reduction} contradicts the data header (R={reduction})"
        )
    d = MultiCoilData(data_stack.astype(np.complex128), reduction)
    maps, _ = read_stack(args.maps)
    psi_stack, psi_fields = read_stack(args.cov)
    sigma = float(psi_fields.get("sigma", "1.0"))
    covariance = NoiseCovariance(psi_stack[0].astype(np.complex128), sigma)
    model = AcquisitionModel(maps.astype(np.complex128), covariance, reduction)
    return d, model


def _resolve_hyperparameters(args, basis):
    if args.hyper:
        h = load_hyperparameters(args.hyper)
        if h.levels != args.levels:
            raise ConfigError(
                f"{args.hyper} covers {h.levels} levels but --levels is {args.levels}"
            )
        return h
    if args.fit_from:
        ref = read_image(args.fit_from).astype(np.complex128)
        return estimate_hyperparameters(ref, basis, args.levels, degenerate="floor")
    raise ConfigError("wt/cwt need --hyper FILE or --fit-from REF")


def _resolve_constraints(args, d, model):
    if args.no_constraints:
        return ConstraintSet.unbounded(model.shape)
    if args.constraints:
        cset = ConstraintSet.load(args.constraints)
        if cset.shape != model.shape:
            raise ConfigError(
                f"{args.constraints}: constraint grid {cset.shape} does not match FOV {model.shape}"
            )
        return cset
    # derive from the plain unfold: detect artifact regions, bound them
    unfold = sense_wls(d, model)
    mask = detect_artifacts(unfold, args.se_radius, args.quantile)
    return build_bounds(unfold, mask, args.se_radius)


def cmd_reconstruct(args):
    d, model = _load_model(args)
    config = SolverConfig(
        gamma=args.gamma,
        lam=getattr(args, "lambda"),
        epsilon=args.epsilon,
        max_iter=args.max_iter,
        tau=args.tau,
        kappa=args.kappa,
    )
    manifest = {
        "command": "reconstruct",
        "method": args.method,
        "inputs": {
            "data": os.path.abspath(args.data),
            "maps": os.path.abspath(args.maps),
            "cov": os.path.abspath(args.cov),
        },
        "reduction": model.reduction,
    }

    trace = None
    if args.method == "sense":
        image = sense_wls(d, model)
    elif args.method == "tikhonov":
        if args.rho_r:
            rho_r = read_image(args.rho_r).astype(np.complex128)
        else:
            rho_r = mean_reference(sense_wls(d, model))
        image = tikhonov(d, model, args.kappa, rho_r)
        manifest["kappa"] = args.kappa
    elif args.method in ("wt", "cwt"):
        basis = wavelet_basis(args.wavelet)
        h = _resolve_hyperparameters(args, basis)
        theta = model.spectral_bound()
        config.validate()
        gamma = config.resolve_gamma(theta)  # surface step-size violations before iterating
        if args.method == "wt":
            image, trace = fb_reconstruct(d, model, basis, h, config)
        else:
            cset = _resolve_constraints(args, d, model)
            image, trace = cwt_reconstruct(d, model, basis, h, cset, config)
        if args.save_hyper:
            save_hyperparameters(h, args.save_hyper)
        manifest.update(
            {
                "wavelet": args.wavelet,
                "levels": args.levels,
                "theta": theta,
                "gamma": gamma,
                "lambda": config.lam,
                "tau": config.tau,
                "epsilon": config.epsilon,
                "max_iter": config.max_iter,
                "iterations_run": trace.iterations[-1] if trace.iterations else 0,
            }
        )
    else:
        raise ConfigError(f"unknown method {args.method!r}")

    write_image(image, args.out, extra={"method": args.method})
    outputs = [args.out]
    if trace is not None:
        trace_path = os.path.splitext(args.out)[0] + "_trace.csv"
        trace.write_csv(trace_path)
        outputs.append(trace_path)
    if args.pgm:
        export_magnitude(image, args.pgm)
        outputs.append(args.pgm)
    manifest["outputs"] = [os.path.abspath(p) for p in outputs]
    _write_manifest(os.path.splitext(args.out)[0] + "_manifest.json", manifest)
    return 0


# ---------------------------------------------------------------------------
# evaluate
# ---------------------------------------------------------------------------

def cmd_evaluate(args):
    ref = read_image(args.ref).astype(np.complex128)
    rows = []
    failures = []
    for path in args.estimates:
        try:
            image, fields = read_stack(path)
            if image.shape[0] != 1:
                raise FormatError(f"{path}: expected a single plane")
            value = snr_db(ref, image[0].astype(np.complex128))
            rows.append((os.path.basename(path), fields.get("method", "unknown"), value))
        except (ConfigError, FormatError, FileNotFoundError) as exc:
            failures.append((path, str(exc)))
            print(f"evaluate: skipping {path}: {exc}", file=sys.stderr)
    write_snr_report(args.out, rows)
    _write_manifest(
        os.path.splitext(args.out)[0] + "_manifest.json",
        {
            "command": "evaluate",
            "reference": os.path.abspath(args.ref),
            "estimates": [os.path.abspath(p) for p in args.estimates],
            "skipped": failures,
            "output": os.path.abspath(args.out),
        },
    )
    return 0


# ---------------------------------------------------------------------------
# entry point
# ---------------------------------------------------------------------------

def build_parser():
    parser = argparse.ArgumentParser(
        prog="wavesense",
        description="Wavelet-regularized SENSE reconstruction toolkit",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="generate a synthetic acquisition")
    sim.add_argument("config", help="flat key=value config file")
    sim.add_argument("-o", "--outdir", default=".", help="output directory")
    sim.set_defaults(func=cmd_simulate)

    rec = sub.add_parser("reconstruct", help="reconstruct a full-FOV image")
    rec.add_argument("method", choices=("sense", "tikhonov", "wt", "cwt"))
    rec.add_argument("--data", required=True, help="reduced-FOV coil data container")
    rec.add_argument("--maps", required=True, help="coil sensitivity maps container")
    rec.add_argument("--cov", required=True, help="noise covariance container")
    rec.add_argument("--out", required=True, help="output image container")
    rec.add_argument("--pgm", help="also export the magnitude as a PGM file")
    rec.add_argument("--reduction", type=int, default=None,
                     help="cross-check against the reduction factor in the data header")
    rec.add_argument("--wavelet", default="sym8", choices=("haar", "db8", "sym8"))
    rec.add_argument("--levels", type=int, default=3)
    rec.add_argument("--hyper", help="hyperparameter file (wt/cwt)")
    rec.add_argument("--fit-from", help="reference image to fit hyperparameters from")
    rec.add_argument("--save-hyper", help="write the hyperparameters used to this file")
    rec.add_argument("--gamma", type=float, default=None,
                     help="step size (default 1.99/(2*theta))")
    rec.add_argument("--lambda", type=float, default=1.0, help="relaxation")
    rec.add_argument("--tau", type=float, default=2.0, help="Douglas-Rachford relaxation")
    rec.add_argument("--epsilon", type=float, default=1e-5, help="stopping tolerance")
    rec.add_argument("--max-iter", type=int, default=500)
    rec.add_argument("--kappa", type=float, default=0.0, help="Tikhonov ridge weight")
    rec.add_argument("--rho-r", help="Tikhonov reference image container")
    rec.add_argument("--constraints", help="constraint-set container (cwt)")
    rec.add_argument("--no-constraints", action="store_true",
                     help="cwt with a fully unbounded constraint set")
    rec.add_argument("--se-radius", type=int, default=1,
                     help="structuring-element radius for derived constraints")
    rec.add_argument("--quantile", type=float, default=0.9,
                     help="gradient quantile for artifact detection")
    rec.set_defaults(func=cmd_reconstruct)

    ev = sub.add_parser("evaluate", help="SNR report against a reference image")
    ev.add_argument("ref", help="reference image container")
    ev.add_argument("estimates", nargs="+", help="reconstructed image containers")
    ev.add_argument("-o", "--out", default="snr_report.csv", help="output CSV")
    ev.set_defaults(func=cmd_evaluate)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"wavesense: config error: {exc}", file=sys.stderr)
        return 2
    except NumericalError as exc:
        print(f"wavesense: numerical failure: {exc}", file=sys.stderr)
        return 3
    except (FormatError, OSError) as exc:
        print(f"wavesense: i/o error: {exc}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
