"""
Acceptance suite: the nine end-to-end criteria at desk scale with fixed seeds.

Each criterion returns (passed, detail). A run appends one row to a CSV log,
newest first: datetime_of_run, criteria_run, criteria_passed, failures.
"""

from __future__ import annotations

import logging
import tempfile
import time
from datetime import datetime
from pathlib import Path
from typing import Callable, Dict, List, NamedTuple, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from basis_systems import (
    BasisSystem,
    PointSequence,
    SystemId,
    change_of_basis_matrix,
    spectral_factor,
)
from circle_measure import DEFAULT_GRID_SIZE, CircleMeasure, LebesgueDensity, arma_spectral_measure
from errors import ConfigError, NumericalError
from export import ExportError, atomic_write_text, to_json
from moment_engine import (
    MomentSequence,
    conjugate_gt,
    gt_from_measure,
    gt_from_moments,
    is_positive,
    pick_solvability,
)
from orf_core import orthonormalize
from predictor import (
    asymptotic_energy_limit,
    empirical_innovation_std,
    energy_trajectory,
    forward_predict,
)
from vgp_sim import (
    covariance_gap,
    empirical_covariance,
    filter_paths,
    filtered_covariance,
    sample_paths,
    spectral_sample,
    varma_causal_expansion,
    white_noise_covariance,
)


logger = logging.getLogger(__name__)

LOG_COLUMNS = ["datetime_of_run", "criteria_run", "criteria_passed", "failures"]


class CriterionResult(NamedTuple):
    name: str
    passed: bool
    detail: str
    seconds: float


Check = Tuple[bool, str]


# ==============================================================================
# Random instances
# ==============================================================================
def _polynomial(rng: np.random.Generator, degree: int, low: float, high: float) -> Tuple[complex, ...]:
    """Increasing-power coefficients, constant term 1, roots with modulus in [low, high]."""
    roots = rng.uniform(low, high, degree) * np.exp(2j * np.pi * rng.uniform(size=degree))
    coefficients = np.poly(roots)[::-1]
    return tuple(coefficients / coefficients[0])


def random_rational_measure(
    rng: np.random.Generator, grid_size: int = DEFAULT_GRID_SIZE, low: float = 1.3, high: float = 3.0
) -> CircleMeasure:
    theta = _polynomial(rng, int(rng.integers(0, 3)), low, high)
    phi = _polynomial(rng, int(rng.integers(1, 3)), low, high)
    return arma_spectral_measure(theta, phi, float(rng.uniform(0.5, 2.0)), grid_size)


def random_points(rng: np.random.Generator, n: int, radius: float = 0.7) -> PointSequence:
    moduli = radius * np.sqrt(rng.uniform(size=n))
    return PointSequence((0j,) + tuple(moduli * np.exp(2j * np.pi * rng.uniform(size=n))))


def random_instances(seed: int, count: int, n: int) -> List[Tuple[CircleMeasure, PointSequence]]:
    rng = np.random.default_rng(seed)
    return [(random_rational_measure(rng), random_points(rng, n)) for _ in range(count)]


def _relative_gap(a: np.ndarray, b: np.ndarray) -> float:
    return float(np.max(np.abs(a - b)) / max(1.0, float(np.max(np.abs(b)))))


# ==============================================================================
# Criteria
# ==============================================================================
def moment_routes(seed: int, instances: int = 50, n: int = 8) -> Check:
    worst, failures = 0.0, []
    for index, (measure, points) in enumerate(random_instances(seed, instances, n)):
        w1 = BasisSystem(SystemId.W1, points, n)
        quadrature = gt_from_measure(w1, measure)
        moments = MomentSequence.from_gt(quadrature)
        worst = max(worst, _relative_gap(gt_from_moments(w1, moments).matrix, quadrature.matrix))
        w2_moments = MomentSequence.from_gt(gt_from_measure(BasisSystem(SystemId.W2, points, n), measure))
        verdicts = (
            is_positive(quadrature).positive,
            pick_solvability(SystemId.W1, points, moments).solvable,
            pick_solvability(SystemId.W2, points, w2_moments).solvable,
        )
        if not all(verdicts):
            failures.append(index)
    passed = worst <= 1e-8 and not failures
    return passed, f"max recurrence gap {worst:.3g}; positivity/Pick failures at {failures or 'none'}"


def change_of_basis_coherence(seed: int, instances: int = 10, n: int = 8) -> Check:
    systems = (SystemId.W1, SystemId.W2, SystemId.W2P)
    worst_transport, worst_round_trip = 0.0, 0.0
    for measure, points in random_instances(seed, instances, n):
        matrices = {s: gt_from_measure(BasisSystem(s, points, n), measure) for s in systems}
        for source in systems:
            for target in systems:
                if source is target:
                    continue
                change = change_of_basis_matrix(matrices[source].system, matrices[target].system)
                moved = conjugate_gt(matrices[source], change)
                worst_transport = max(worst_transport, _relative_gap(moved.matrix, matrices[target].matrix))
                reverse = change_of_basis_matrix(matrices[target].system, matrices[source].system)
                identity = change.then(reverse).matrix
                worst_round_trip = max(worst_round_trip, float(np.max(np.abs(identity - np.eye(n + 1)))))
    passed = worst_transport <= 1e-9 and worst_round_trip <= 1e-9
    return passed, f"transport gap {worst_transport:.3g}, round trip {worst_round_trip:.3g}"


def orf_correctness(seed: int, instances: int = 10, n: int = 12) -> Check:
    worst = 0.0
    for measure, points in random_instances(seed, instances, n):
        family = orthonormalize(BasisSystem(SystemId.W1, points, n), measure, n)
        worst = max(worst, family.orthonormality_residual())
    closed = orthonormalize(
        BasisSystem(SystemId.W1, PointSequence((0, 0.5)), 1), CircleMeasure(LebesgueDensity()), 1
    )
    expected = np.sqrt(0.75)
    closed_gap = max(abs(closed.norms[1] - expected), abs(closed.reversed_norms[1] - expected))
    passed = worst <= 1e-8 and closed_gap <= 1e-12
    return passed, f"orthonormality residual {worst:.3g}; closed-form gap {closed_gap:.3g}"


def energy_routes(seed: int, instances: int = 50, n: int = 12) -> Check:
    worst_eval, worst_oracle, worst_det = 0.0, 0.0, 0.0
    for measure, points in random_instances(seed, instances, n):
        family = orthonormalize(BasisSystem(SystemId.W1, points, n), measure, n)
        _, logdets = zip(*(np.linalg.slogdet(family.gram[:k, :k]) for k in range(1, n + 2)))
        for k in range(1, n + 1):
            report = forward_predict(family, k)
            energy = report.energy_orf
            worst_eval = max(worst_eval, abs(energy - report.energy_eval) / energy)
            worst_oracle = max(worst_oracle, abs(energy - report.energy_oracle) / energy)
            ratio = np.exp(logdets[k] - logdets[k - 1])
            worst_det = max(worst_det, abs(energy**2 - ratio) / ratio)
    passed = worst_eval <= 1e-6 and worst_oracle <= 1e-8 and worst_det <= 1e-8
    return passed, (
        f"starred-evaluation gap {worst_eval:.3g}, oracle gap {worst_oracle:.3g}, "
        f"determinant-ratio gap {worst_det:.3g}"
    )


def spectral_representation(seed: int, paths: int = 100_000, workers: int = 4) -> Check:
    measure = arma_spectral_measure((1.0,), (1.0, -0.5))
    points = PointSequence((0, 0.5, -0.3, 0.2))
    n = 3
    system = BasisSystem(SystemId.W1, points, n)
    analytic = gt_from_measure(system, measure)
    spectral = spectral_sample(system, measure, n, paths, seed, bins=2048, workers=workers)
    direct = sample_paths(analytic, paths, seed, workers=workers)
    spectral_gap = covariance_gap(empirical_covariance(spectral), analytic.matrix)
    direct_gap = covariance_gap(empirical_covariance(direct), analytic.matrix)

    energy = forward_predict(orthonormalize(system, measure, n), n).energy_orf
    innovation_gap = abs(empirical_innovation_std(direct, n) - energy) / energy
    passed = spectral_gap <= 0.05 and direct_gap <= 0.05 and innovation_gap <= 3 / np.sqrt(paths)
    return passed, (
        f"spectral gap {spectral_gap:.3g}, direct gap {direct_gap:.3g}, "
        f"innovation std gap {innovation_gap:.3g}"
    )


def energy_asymptotics(n_constant: int = 20, n_rational: int = 60) -> Check:
    lebesgue = CircleMeasure(LebesgueDensity())
    constant = BasisSystem(SystemId.W1, PointSequence.constant_tail(0.5, n_constant), n_constant)
    energies = energy_trajectory(constant, lebesgue, n_constant)
    constant_gap = float(np.max(np.abs(np.array(energies) - np.sqrt(0.75))))

    measure = arma_spectral_measure((1.0,), (1.0, -0.5))
    rational = BasisSystem(SystemId.W1, PointSequence.constant_tail(0.3, n_rational), n_rational)
    final = energy_trajectory(rational, measure, n_rational)[-1]
    limit = asymptotic_energy_limit(measure, 0.3)
    boundary = asymptotic_energy_limit(measure, np.exp(0.7j))
    passed = constant_gap <= 1e-10 and abs(final - limit) <= 1e-2 and boundary == 0.0
    return passed, (
        f"constant-tail gap {constant_gap:.3g}; E_{n_rational} = {final:.10g} vs limit {limit:.10g}; "
        f"boundary limit {boundary}"
    )


def varma_filters(seed: int, paths: int = 100_000, workers: int = 4, n: int = 4) -> Check:
    theta, phi = (1.0, 0.4), (1.0, -0.5)
    spec = varma_causal_expansion(theta, phi, R=1.0, tol=1e-12)
    z = np.exp(2j * np.pi * np.arange(128) / 128)
    expansion_gap = float(np.max(np.abs(spec.evaluate(z) - np.polyval(theta[::-1], z) / np.polyval(phi[::-1], z))))

    order = n + spec.upper
    white = white_noise_covariance(order)
    filtered = filtered_covariance(white, spec)
    reference = gt_from_measure(
        BasisSystem(SystemId.W1, PointSequence.constant_tail(0, n), n), arma_spectral_measure(theta, phi)
    )
    classical_gap = _relative_gap(filtered.matrix, reference.matrix)

    noise = sample_paths(white, paths, seed, workers=workers)
    monte_carlo_gap = covariance_gap(empirical_covariance(filter_paths(noise, spec)), filtered.matrix)
    passed = expansion_gap <= 1e-10 and classical_gap <= 1e-8 and monte_carlo_gap <= 0.05
    return passed, (
        f"expansion gap {expansion_gap:.3g} (J={spec.upper}), classical gap {classical_gap:.3g}, "
        f"Monte Carlo gap {monte_carlo_gap:.3g}"
    )


def fejer_riesz(seed: int, instances: int = 20, n: int = 6, margin: float = 0.05) -> Check:
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(instances):
        points = random_points(rng, n)
        a = rng.normal(size=n + 1) + 1j * rng.normal(size=n + 1)
        t = np.exp(2j * np.pi * np.arange(1024) / 1024)
        values = 2 * (a @ BasisSystem(SystemId.W1, points, n).values(t)).real
        a[0] += (margin - values.min()) / 2
        worst = max(worst, spectral_factor(points, n, a).residual)
    return worst <= 1e-8, f"max factorization residual {worst:.3g}"


def determinism(seed: int) -> Check:
    import cli

    config = {
        "measure": {"density": {"kind": "rational", "theta": [1.0], "phi": [1.0, -0.5]}},
        "points": {"constant": 0.3},
        "system": "w1",
        "n": 3,
        "seed": seed,
        "paths": 9000,
        "block_size": 4096,
        "filter": {"theta": [1.0, 0.4], "phi": [1.0, -0.5], "R": 1.0, "tol": 1e-12},
    }
    runs = {
        "moments": ["json"],
        "orf": ["json", "csv"],
        "simulate": ["json", "csv", "binary"],
        "predict": ["json"],
        "varma": ["json"],
        "asymptote": ["json"],
    }
    mismatches = []
    with tempfile.TemporaryDirectory() as workspace:
        root = Path(workspace)
        config_path = root / "config.json"
        atomic_write_text(config_path, to_json(config))
        for command, formats in runs.items():
            for output_format in formats:
                outputs = []
                for attempt, workers in enumerate((1, 4)):
                    out = root / f"{command}_{output_format}_{attempt}.out"
                    code = cli.main([
                        command, "--config", str(config_path), "--format", output_format,
                        "--out", str(out), "--workers", str(workers), "--quiet",
                    ])
                    outputs.append(out.read_bytes() if code == 0 and out.exists() else None)
                if outputs[0] is None or outputs[0] != outputs[1]:
                    mismatches.append(f"{command}/{output_format}")
    return not mismatches, f"non-reproducible outputs: {mismatches or 'none'}"


# ==============================================================================
# Runner and log
# ==============================================================================
def criteria(seed: int, workers: int, paths: int, instances: int) -> Dict[str, Callable[[], Check]]:
    return {
        "moment_routes": lambda: moment_routes(seed, instances),
        "change_of_basis": lambda: change_of_basis_coherence(seed),
        "orf_correctness": lambda: orf_correctness(seed),
        "energy_routes": lambda: energy_routes(seed, instances),
        "spectral_representation": lambda: spectral_representation(seed, paths, workers),
        "energy_asymptotics": energy_asymptotics,
        "varma_filters": lambda: varma_filters(seed, paths, workers),
        "fejer_riesz": lambda: fejer_riesz(seed),
        "determinism": lambda: determinism(seed),
    }


def run_acceptance(
    seed: int,
    workers: int = 4,
    paths: int = 100_000,
    instances: int = 50,
    only: Optional[Sequence[str]] = None,
) -> List[CriterionResult]:
    results = []
    for name, check in criteria(seed, workers, paths, instances).items():
        if only is not None and name not in only:
            continue
        started = time.perf_counter()
        try:
            passed, detail = check()
        except (ConfigError, NumericalError) as exc:
            passed, detail = False, f"{type(exc).__name__}: {exc}"
        seconds = time.perf_counter() - started
        logger.info(f"{'PASS' if passed else 'FAIL'} {name} ({seconds:.1f}s): {detail}")
        results.append(CriterionResult(name, bool(passed), detail, seconds))
    return results


def append_log(log_path: Path, results: Sequence[CriterionResult]) -> pd.DataFrame:
    """Prepend one row describing this run to the acceptance log."""
    failures = [result.name for result in results if not result.passed]
    new_log_row = pd.DataFrame({
        "datetime_of_run": [datetime.now()],
        "criteria_run": [len(results)],
        "criteria_passed": [len(results) - len(failures)],
        "failures": [";".join(failures) if failures else "NONE"],
    })
    if log_path.exists():
        try:
            log = pd.read_csv(log_path, parse_dates=["datetime_of_run"])
        except (OSError, ValueError) as exc:
            raise ExportError(f"could not read {log_path}: {exc}") from exc
        updated_log = pd.concat([new_log_row, log[LOG_COLUMNS]], ignore_index=True)
    else:
        updated_log = new_log_row
    atomic_write_text(log_path, updated_log.to_csv(index=False))
    logger.info(f"Updated {log_path}")
    return updated_log
