"""
Command-line entry point. Each command reads one JSON run configuration, applies the
command-line overrides, and writes its result as JSON, CSV or (paths only) binary.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Callable, Dict, Optional, Sequence

import numpy as np
import pandas as pd

import acceptance
from basis_systems import SystemId
from config import Config, RunConfig, load_run_config
from errors import ConfigError, NumericalError
from export import (
    ExportError,
    atomic_write_bytes,
    atomic_write_text,
    frame_to_csv,
    matrix_frame,
    paths_frame,
    paths_to_bytes,
    to_json,
)
from moment_engine import (
    MomentSequence,
    gt_from_measure,
    gt_from_moments,
    is_positive,
    pick_solvability,
    recurrence_residual,
)
from orf_core import format_family, laurent_families, orthonormalize
from predictor import (
    asymptotic_energy_limit,
    backward_predict,
    forward_predict,
    mixed_predict,
    trajectory_table,
)
from vgp_sim import (
    SamplePaths,
    covariance_gap,
    empirical_covariance,
    filtered_covariance,
    sample_paths,
    spectral_sample,
    varma_causal_expansion,
)


logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3


@dataclass
class CommandOutput:
    payload: Dict[str, Any]
    table: Optional[pd.DataFrame] = None
    paths: Optional[SamplePaths] = None


# ==============================================================================
# Commands
# ==============================================================================
def cmd_moments(config: RunConfig) -> CommandOutput:
    system = config.system()
    if config.moments is not None:
        moments = MomentSequence(np.array(config.moments[: config.n + 1]), config.system_id)
        gt = gt_from_moments(system, moments)
    else:
        gt = gt_from_measure(system, config.measure)
        moments = MomentSequence.from_gt(gt)
    positivity = is_positive(gt)

    pick = None
    if config.system_id in (SystemId.W1, SystemId.W2) and system.points.is_distinct(config.n):
        report = pick_solvability(config.system_id, system.points, moments)
        pick = {
            "solvable": report.solvable,
            "min_eigenvalue": report.min_eigenvalue,
            "matrix": report.matrix,
            "printed_solvable": report.printed_solvable,
            "printed_min_eigenvalue": report.printed_min_eigenvalue,
        }
        logger.info(f"Pick matrix {'is' if report.solvable else 'is not'} positive semidefinite")
    else:
        logger.info(f"No Pick criterion for system {config.system_id.value} with these points")

    payload = {
        "command": "moments",
        "system": config.system_id,
        "n": config.n,
        "provenance": gt.provenance,
        "matrix": gt.matrix,
        "moments": moments.values,
        "positive": positivity.positive,
        "min_eigenvalue": positivity.min_eigenvalue,
        "recurrence_residual": recurrence_residual(gt, moments),
        "pick": pick,
    }
    return CommandOutput(payload, matrix_frame(gt.matrix))


def cmd_orf(config: RunConfig) -> CommandOutput:
    family = orthonormalize(config.system(), config.measure, config.n)
    logger.debug(f"ORF coefficients:\n{format_family(family)}")
    payload = {
        "command": "orf",
        "system": config.system_id,
        "n": config.n,
        "coeffs": family.coeffs,
        "monic_coeffs": family.monic_coeffs,
        "reversed_coeffs": family.reversed_coeffs,
        "norms": family.norms,
        "reversed_norms": family.reversed_norms,
        "orthonormality_residual": family.orthonormality_residual(),
    }
    return CommandOutput(payload, matrix_frame(family.coeffs))


def _simulate_route(config: RunConfig, route: str) -> SamplePaths:
    if route == "spectral":
        return spectral_sample(
            config.system(), config.measure, config.n, config.paths, config.seed,
            bins=config.bins, workers=config.workers,
        )
    covariance = gt_from_measure(config.system(), config.measure)
    return sample_paths(covariance, config.paths, config.seed, config.block_size, config.workers)


def cmd_simulate(config: RunConfig) -> CommandOutput:
    routes = ("direct", "spectral") if config.route == "both" else (config.route,)
    gaps = []
    paths = None
    for route in routes:
        sampled = _simulate_route(config, route)
        if paths is None:
            paths = sampled
        if sampled.count:
            gap = covariance_gap(empirical_covariance(sampled), sampled.covariance)
            gaps.append({"route": route, "max_gap": gap, "mean_flags": list(sampled.mean_flags)})
            logger.info(f"{route} sampling: max covariance gap {gap:.4g} over {sampled.count} paths")

    payload = {
        "command": "simulate",
        "system": config.system_id,
        "n": config.n,
        "paths": config.paths,
        "seed": config.seed,
        "route": config.route,
        "analytic_covariance": paths.covariance,
        "empirical_covariance": empirical_covariance(paths) if paths.count else None,
        "gaps": gaps,
    }
    return CommandOutput(payload, paths_frame(paths), paths)


def cmd_predict(config: RunConfig) -> CommandOutput:
    if config.kind in ("forward", "backward"):
        family = orthonormalize(config.system(), config.measure, config.n)
        predict = forward_predict if config.kind == "forward" else backward_predict
        report = predict(family, config.n)
    else:
        variant = config.kind.split("_", 1)[1]
        ordering = "x" if variant == "minus" else "chi"
        reach = config.n + (0 if variant == "sym" else 1)
        laurent = laurent_families(config.system(reach), config.measure, reach, ordering)
        report = mixed_predict(laurent, config.n, variant)

    payload = {
        "command": "predict",
        "kind": report.kind,
        "n": report.n,
        "labels": list(report.labels),
        "coefficients": report.coefficients,
        "energy_orf": report.energy_orf,
        "energy_oracle": report.energy_oracle,
        "energy_eval": report.energy_eval,
        "residuals": report.residuals,
    }
    table = pd.DataFrame({
        "label": list(report.labels),
        "re": report.coefficients.real,
        "im": report.coefficients.imag,
    })
    return CommandOutput(payload, table)


def cmd_varma(config: RunConfig) -> CommandOutput:
    if config.filter is None:
        raise ConfigError("filter: the varma command needs a filter {\"theta\", \"phi\", \"R\", \"tol\"}")
    spec = varma_causal_expansion(
        config.filter["theta"], config.filter["phi"], config.filter["R"], config.filter["tol"]
    )
    # the input window must cover n outputs plus the filter support
    order = config.n + spec.upper + spec.lower
    covariance = gt_from_measure(config.system(order), config.measure)
    filtered = filtered_covariance(covariance, spec)
    payload = {
        "command": "varma",
        "psi": spec.psi,
        "J": spec.upper,
        "R": spec.R,
        "tail_bound": spec.tail_bound,
        "weighted_norm": spec.weighted_norm,
        "filtered_covariance": filtered.matrix,
        "filtered_start": filtered.start,
    }
    return CommandOutput(payload, matrix_frame(filtered.matrix))


def cmd_asymptote(config: RunConfig) -> CommandOutput:
    system = config.system(system_id=SystemId.W1)
    table = trajectory_table(system, config.measure, config.n)
    if config.alpha is not None:
        alpha = config.alpha
    elif config.points.kind == "list":
        alpha = system.points[config.n]
    else:
        alpha = config.points.alpha
    limit = asymptotic_energy_limit(config.measure, alpha)
    payload = {
        "command": "asymptote",
        "alpha": alpha,
        "limit": limit,
        "energies": table["energy"].to_numpy(),
        "final_gap": abs(float(table["energy"].iloc[-1]) - limit) if len(table) else None,
        "trajectory": table.to_dict(orient="records"),
    }
    return CommandOutput(payload, table)


def cmd_acceptance(config: RunConfig) -> CommandOutput:
    results = acceptance.run_acceptance(seed=config.seed, workers=config.workers)
    acceptance.append_log(Path(Config.ACCEPTANCE_LOG), results)
    # timings are logged, never emitted
    records = [{"name": result.name, "passed": result.passed, "detail": result.detail} for result in results]
    payload = {
        "command": "acceptance",
        "passed": all(result.passed for result in results),
        "criteria": records,
    }
    return CommandOutput(payload, pd.DataFrame(records, columns=["name", "passed", "detail"]))


COMMANDS: Dict[str, Callable[[RunConfig], CommandOutput]] = {
    "moments": cmd_moments,
    "orf": cmd_orf,
    "simulate": cmd_simulate,
    "predict": cmd_predict,
    "varma": cmd_varma,
    "asymptote": cmd_asymptote,
    "acceptance": cmd_acceptance,
}


# ==============================================================================
# Output and errors
# ==============================================================================
def emit(output: CommandOutput, output_format: str, out: Optional[Path]) -> None:
    if output_format == "binary":
        if output.paths is None:
            raise ConfigError("output.format: binary output is available for simulate only")
        if out is None:
            raise ConfigError("output.path: binary output needs --out")
        atomic_write_bytes(out, paths_to_bytes(output.paths))
        logger.info(f"Wrote {output.paths.count} paths to {out}")
        return

    if output_format == "csv":
        if output.table is None:
            raise ConfigError("output.format: this command has no CSV table")
        text = frame_to_csv(output.table)
    else:
        text = to_json(output.payload)

    if out is None:
        sys.stdout.write(text)
    else:
        atomic_write_text(out, text)
        logger.info(f"Wrote {out}")


def report_error(error: Exception, exit_code: int) -> None:
    """Write a machine-readable error object to stderr."""
    fields = list(getattr(error, "errors", []))
    record = {
        "error": type(error).__name__,
        "exit_code": exit_code,
        "message": str(error),
        "fields": fields,
    }
    sys.stderr.write(json.dumps(record, sort_keys=True) + "\n")


# ==============================================================================
# Parser
# ==============================================================================
def create_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="orf-vgp",
        description=(
            "Orthogonal rational functions, generalized moment problems and varying "
            "Gaussian processes on the unit circle."
        ),
    )
    commands = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        command = commands.add_parser(name, help=f"run the {name} command")
        command.add_argument("--config", type=Path, help="JSON run configuration")

        overrides = command.add_argument_group("overrides")
        overrides.add_argument("--n", type=int)
        overrides.add_argument("--seed", type=int)
        overrides.add_argument("--paths", type=int)
        overrides.add_argument("--grid", type=int, dest="grid_size")
        overrides.add_argument("--workers", type=int)
        overrides.add_argument("--out", type=Path)
        overrides.add_argument("--format", choices=["json", "csv", "binary"])

        verbosity = command.add_mutually_exclusive_group()
        verbosity.add_argument("--verbose", action="store_true")
        verbosity.add_argument("--quiet", action="store_true")

    commands.choices["predict"].add_argument(
        "--kind", choices=["forward", "backward", "mixed_sym", "mixed_plus", "mixed_minus"]
    )
    commands.choices["simulate"].add_argument("--route", choices=["direct", "spectral", "both"])
    return parser


def _overrides(args: argparse.Namespace) -> Dict[str, Any]:
    keys = ("n", "seed", "paths", "grid_size", "workers", "out", "format", "kind", "route")
    values = {key: getattr(args, key, None) for key in keys}
    if values["out"] is not None:
        values["out"] = str(values["out"])
    return values


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = create_parser().parse_args(argv)
    level = logging.DEBUG if args.verbose else logging.WARNING if args.quiet else logging.INFO
    logging.basicConfig(level=level, format="%(asctime)s - %(levelname)s - %(message)s")

    try:
        config = load_run_config(args.config, _overrides(args))
        output = COMMANDS[args.command](config)
        emit(output, config.output_format, config.output_path)
    except ConfigError as error:
        logger.error(f"Invalid configuration: {error}")
        report_error(error, EXIT_CONFIG)
        return EXIT_CONFIG
    except NumericalError as error:
        logger.error(f"Numerical failure: {error}")
        report_error(error, EXIT_NUMERICAL)
        return EXIT_NUMERICAL
    except ExportError as error:
        logger.error(f"Output failure: {error}")
        report_error(error, EXIT_FAILURE)
        return EXIT_FAILURE
    return EXIT_OK


if __name__ == "__main__":
    raise SystemExit(main())
