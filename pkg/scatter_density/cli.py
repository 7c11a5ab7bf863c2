"""Command-line front end: ``scatter-density <command> ...``.

Exit status: 0 success, 1 other failure, 2 config or usage error,
3 provider exhaustion, 4 precision failure, 5 budget cap, 6 singular system.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from fractions import Fraction
from pathlib import Path
from typing import Optional

import numpy as np
from dotenv import load_dotenv

from . import __version__
from .approx import ApproximationPipeline, lp_error
from .command import Command
from .config import RunConfig, load_config
from .errors import ConfigError, ScatterError
from .polybasis import (
    KernelFamily,
    arctan_Bk,
    arctan_binomial_Ck,
    as_rational,
    binomial_Ak,
    classify_basis,
    format_rational,
    log_kernel_series,
    related_series,
)
from .sequences import Sign, extract_doubling, verify_separation
from .solvers import log_alternant_solve, solve_vandermonde, solve_with_retry

logger = logging.getLogger(__name__)

SAMPLES_HEADER = "x,f,s,abs_err"
SAMPLES_FORMAT = "%.17g"
SCAN_HALF_WIDTH = 64


class LoggingObserver:
    """Writes pipeline and command events to the status log."""

    def on_pipeline_state_changed(self, pipeline):
        summary = pipeline.get_status_summary()
        if summary["status"] == "failed":
            logger.error("Pipeline failed in %s: %s", summary["stage"], summary["last_error"])
        else:
            logger.info("Pipeline %s: %s", summary["stage"], summary["status"])

    def on_command_executed(self, command, status, result):
        if status == "success":
            logger.info("Command %s completed in %.2fs", command.name, result.get("elapsed", 0.0))
        else:
            stage = result.get("stage")
            where = f" ({stage})" if stage else ""
            logger.error("Command %s failed%s: %s", command.name, where, result.get("error"))


def _dump(payload, path: Optional[str] = None):
    text = json.dumps(payload, indent=2, sort_keys=True)
    if path:
        Path(path).write_text(text + "\n", encoding="utf-8")
        logger.info("Wrote %s", path)
    else:
        sys.stdout.write(text + "\n")


def _series(polys, start: int = 0) -> list:
    return [{"k": k, **poly.to_dict()} for k, poly in enumerate(polys) if k >= start]


# Command handlers

def cmd_expand(config: RunConfig, k_max: int, path: Optional[str] = None) -> dict:
    kernel = config.kernel
    model = classify_basis(kernel)
    family = kernel.family
    if family is KernelFamily.BINOMIAL_POWER:
        payload = _series([binomial_Ak(kernel, k) for k in range(k_max + 1)])
    elif family is KernelFamily.ARCTAN_SHIFTED:
        payload = {
            "B": [{"k": k, **arctan_Bk(k).to_dict()} for k in range(1, k_max + 2)],
            "A": _series(model.coefficients(k_max + 1)),
        }
    elif family is KernelFamily.ARCTAN_BINOMIAL:
        payload = {
            "C": _series([arctan_binomial_Ck(kernel, k) for k in range(k_max + 1)]),
            "A": _series(model.coefficients(k_max + 1)),
        }
    elif family is KernelFamily.RELATED_ARCTAN:
        payload = {"C": _series(related_series(kernel, k_max)["C"])}
    elif family is KernelFamily.INV_X_LOG:
        A, B = log_kernel_series(max(k_max, 1))
        payload = {"A": _series(A[: k_max + 1]), "B": _series(B[: k_max + 1])}
    else:
        series = related_series(kernel, k_max)
        payload = {"A": _series(series["A"]), "B": _series(series["B"])}
    if isinstance(payload, dict):
        payload["model"] = model.to_dict()
    _dump(payload, path or config.output.get("expansion"))
    return {"k_max": k_max}


def cmd_doubling(config: RunConfig, M: Fraction, N: int, sign: Optional[str] = None) -> dict:
    config.require("provider")
    provider = config.provider
    sign = Sign(sign or classify_basis(config.kernel).preferred_sign)
    Y = extract_doubling(provider, sign, M, N)
    if provider.upper_index is not None:
        window = range(provider.lower_index, provider.upper_index + 1)
    else:
        window = range(-SCAN_HALF_WIDTH, SCAN_HALF_WIDTH + 1)
    payload = {
        "provider": provider.to_dict(),
        "M": format_rational(M),
        **Y.to_dict(),
    }
    if len(window) >= 2:
        payload["separation"] = {
            "window": [window.start, window.stop - 1],
            "min_gap": format_rational(verify_separation(provider, window)),
        }
    _dump(payload, config.output.get("solution"))
    return {"nodes": len(Y)}


def cmd_solve(config: RunConfig, mode: str, N: int, M: Fraction = Fraction(0),
              sign: Optional[str] = None) -> dict:
    config.require("provider")
    model = classify_basis(config.kernel)
    if mode == "vandermonde":
        Y = extract_doubling(config.provider, Sign(sign or model.preferred_sign), M, N)
        solution = solve_vandermonde(Y, model, N, config.precision_bits)
    else:
        if sign == Sign.NEGATIVE.value:
            raise ConfigError("the log alternant needs positive nodes", stage="usage")
        Y = extract_doubling(config.provider, Sign.POSITIVE, M, 2 * N - 1)
        offset = config.kernel.L if config.kernel.family is KernelFamily.RELATED_LOG else 1
        solution = solve_with_retry(
            log_alternant_solve, config.precision_bits, Y=Y, N=N, offset=offset
        )
    payload = {"mode": mode, "kernel": config.kernel.to_dict(), **solution.to_dict()}
    _dump(payload, config.output.get("solution"))
    return {"mode": mode, "N": N}


def write_samples(path: str, samples: np.ndarray):
    np.savetxt(path, samples, delimiter=",", header=SAMPLES_HEADER, comments="", fmt=SAMPLES_FORMAT)
    logger.info("Wrote %s", path)


def cmd_approx(config: RunConfig, certificate: Optional[str] = None, samples: Optional[str] = None,
               observer=None) -> dict:
    config.require("provider", "target", "epsilon")
    pipeline = ApproximationPipeline(
        config.kernel, config.provider, float(config.epsilon), config.interval,
        grid_size=config.grid, precision_bits=config.precision_bits, p_values=config.p,
    )
    if observer is not None:
        pipeline.add_observer(observer)
    combination, result = pipeline.run(config.target)

    certificate_path = certificate or config.output.get("certificate", "certificate.json")
    samples_path = samples or config.output.get("samples", "samples.csv")
    write_samples(samples_path, result.samples)
    payload = result.to_dict()
    payload["samples_file"] = str(samples_path)
    payload["combination"] = combination.to_dict()
    _dump(payload, certificate_path)
    return {"sup_error": result.sup_error, "success": result.success, "exit_code": 0 if result.success else 5}


def cmd_certify(config, certificate: str, samples: Optional[str] = None) -> dict:
    certificate_path = Path(certificate)
    try:
        recorded = json.loads(certificate_path.read_text(encoding="utf-8"))
    except OSError as error:
        raise ConfigError(f"cannot read certificate {certificate_path}: {error.strerror}", stage="certify")
    except json.JSONDecodeError as error:
        raise ConfigError(
            f"invalid certificate JSON at line {error.lineno}, column {error.colno}: {error.msg}",
            stage="certify",
        )
    samples_path = Path(samples or recorded.get("samples_file", "samples.csv"))
    if not samples_path.is_absolute() and not samples_path.exists():
        samples_path = certificate_path.parent / samples_path
    table = np.loadtxt(samples_path, delimiter=",", skiprows=1, ndmin=2)
    if table.shape[1] != 4:
        raise ConfigError(f"{samples_path} must have the columns {SAMPLES_HEADER}", stage="certify")

    xs, fx, sx, stored = table.T
    errors = np.abs(fx - sx)
    sup_error = float(np.max(errors))
    a, b = float(xs[0]), float(xs[-1])
    mismatches = []
    if sup_error != recorded["sup_error"] or float(np.max(stored)) != recorded["sup_error"]:
        mismatches.append(f"sup_error {sup_error!r} != recorded {recorded['sup_error']!r}")
    for key, value in recorded.get("lp_errors", {}).items():
        p = float(key)
        derived = min(lp_error(errors, xs, p), sup_error * (b - a) ** (1.0 / p))
        if not np.isclose(derived, value, rtol=1e-12, atol=0.0):
            mismatches.append(f"L{key} error {derived!r} != recorded {value!r}")
        if value > sup_error * (b - a) ** (1.0 / p) * (1 + 1e-12):
            mismatches.append(f"L{key} error {value!r} exceeds sup * (b - a)^(1/p)")
    if mismatches:
        raise ScatterError("certificate does not match its samples: " + "; ".join(mismatches), stage="certify")
    logger.info("Certificate %s matches %s: sup error %.6g", certificate_path, samples_path, sup_error)
    return {"sup_error": sup_error, "consistent": True}


# Command registry

def build_commands(observer=None) -> dict:
    expand = Command("expand", "expand", "Write the expansion polynomials of the kernel", cmd_expand)
    expand.required_parameters = ["k_max"]
    expand.parameter_types = {"k_max": int, "path": str}
    expand.parameter_ranges = {"k_max": (0, 200)}

    doubling = Command("doubling", "doubling", "Extract a doubling subsequence from the provider", cmd_doubling)
    doubling.required_parameters = ["M", "N"]
    doubling.parameter_types = {"M": Fraction, "N": int, "sign": str}
    doubling.parameter_ranges = {"M": (0, None), "N": (1, 200)}
    doubling.parameter_choices = {"sign": [s.value for s in Sign]}

    solve = Command("solve", "solve", "Solve the Vandermonde or log alternant system", cmd_solve)
    solve.required_parameters = ["mode", "N"]
    solve.parameter_types = {"mode": str, "N": int, "M": Fraction, "sign": str}
    solve.parameter_ranges = {"N": (1, 64), "M": (0, None)}
    solve.parameter_choices = {"mode": ["vandermonde", "log-alternant"], "sign": [s.value for s in Sign]}

    approx = Command("approx", "approx", "Approximate the target and certify the result", cmd_approx,
                     parameters={"observer": observer})

    certify = Command("certify", "certify", "Re-check a certificate against its samples", cmd_certify)
    certify.required_parameters = ["certificate"]
    certify.parameter_types = {"certificate": str, "samples": str}

    commands = {command.command_id: command for command in (expand, doubling, solve, approx, certify)}
    if observer is not None:
        for command in commands.values():
            command.add_observer(observer)
    return commands


def _rational_arg(text: str) -> Fraction:
    try:
        return as_rational(text)
    except (ValueError, ZeroDivisionError):
        raise argparse.ArgumentTypeError(f"not a rational number: {text!r}")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="scatter-density",
        description="Approximate functions by scattered translates of binomial power kernels",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true", help="log debug detail")
    subparsers = parser.add_subparsers(dest="command", required=True)

    expand = subparsers.add_parser("expand", help="write expansion polynomials as JSON")
    expand.add_argument("--config", required=True)
    expand.add_argument("--k-max", dest="k_max", type=int, required=True)
    expand.add_argument("--output", dest="path")

    doubling = subparsers.add_parser("doubling", help="print a doubling subsequence")
    doubling.add_argument("--config", required=True)
    doubling.add_argument("-M", dest="M", type=_rational_arg, default=Fraction(0))
    doubling.add_argument("-N", dest="N", type=int, required=True)
    doubling.add_argument("--sign", choices=[s.value for s in Sign])

    solve = subparsers.add_parser("solve", help="solve a Vandermonde or log alternant system")
    solve.add_argument("--config", required=True)
    solve.add_argument("--mode", choices=["vandermonde", "log-alternant"], default="vandermonde")
    solve.add_argument("-N", dest="N", type=int, required=True)
    solve.add_argument("-M", dest="M", type=_rational_arg, default=Fraction(0))
    solve.add_argument("--sign", choices=[s.value for s in Sign])

    approx = subparsers.add_parser("approx", help="run the approximation pipeline")
    approx.add_argument("--config", required=True)
    approx.add_argument("--certificate")
    approx.add_argument("--samples")

    certify = subparsers.add_parser("certify", help="re-check a certificate against its samples")
    certify.add_argument("certificate")
    certify.add_argument("--samples")
    return parser


def configure_logging(verbose: bool = False):
    logging.basicConfig(
        level=logging.DEBUG if verbose else logging.INFO,
        format="[%(asctime)s] %(message)s",
        datefmt="%H:%M:%S",
    )


def main(argv=None) -> int:
    load_dotenv()
    args = build_parser().parse_args(argv)
    configure_logging(args.verbose)

    params = {key: value for key, value in vars(args).items()
              if key not in ("command", "verbose", "config")}
    observer = LoggingObserver()
    command = build_commands(observer)[args.command]

    config = None
    if args.command != "certify":
        try:
            config = load_config(args.config)
        except ScatterError as error:
            observer.on_command_executed(command, "error", error.to_dict())
            return error.exit_code

    success, result = command.execute(config, params)
    return 0 if success and result.get("exit_code", 0) == 0 else result.get("exit_code", 1) or 1


if __name__ == "__main__":
    sys.exit(main())
