"""Process defaults and JSON run configurations."""

from __future__ import annotations

import json
import logging
import os
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Dict, List, Mapping, Optional, Tuple

from basis_systems import BasisSystem, PointSequence, SystemId
from circle_measure import (
    Atom,
    CircleMeasure,
    LebesgueDensity,
    RationalDensity,
    TabulatedDensity,
)
from errors import ConfigError


logger = logging.getLogger(__name__)


class Config:
    """Process-level defaults. Every value can be overridden through the environment."""

    BASE_DIR = os.path.abspath(os.path.dirname(__file__))
    PROJECT_ROOT = os.path.dirname(BASE_DIR)

    GRID_SIZE = int(os.environ.get("ORF_GRID_SIZE", "4096"))
    SEED = int(os.environ.get("ORF_SEED", "20240229"))
    WORKERS = int(os.environ.get("ORF_WORKERS", "4"))

    # Paths per random-number block; changing it changes the sampled paths.
    BLOCK_SIZE = int(os.environ.get("ORF_BLOCK_SIZE", "4096"))
    BINS = int(os.environ.get("ORF_BINS", "2048"))

    ACCEPTANCE_LOG = os.environ.get(
        "ORF_ACCEPTANCE_LOG", os.path.join(PROJECT_ROOT, "acceptance_log.csv")
    )


OUTPUT_FORMATS = ("json", "csv", "binary")
PREDICTION_KINDS = ("forward", "backward", "mixed_sym", "mixed_plus", "mixed_minus")
SAMPLING_ROUTES = ("direct", "spectral", "both")


def parse_complex(value: Any, name: str) -> complex:
    """A number, or an object {"re": f, "im": f}."""
    if isinstance(value, Mapping):
        unknown = set(value) - {"re", "im"}
        if unknown:
            raise ConfigError(f"{name}: unexpected keys {sorted(unknown)}")
        try:
            return complex(float(value.get("re", 0.0)), float(value.get("im", 0.0)))
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"{name}: could not read complex number: {exc}") from exc
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"{name}: expected a number or {{\"re\", \"im\"}}, got {value!r}")
    return complex(value)


def _complex_list(values: Any, name: str, errors: List[str]) -> Tuple[complex, ...]:
    if not isinstance(values, list):
        errors.append(f"{name}: expected a list")
        return ()
    parsed = []
    for index, value in enumerate(values):
        try:
            parsed.append(parse_complex(value, f"{name}[{index}]"))
        except ConfigError as exc:
            errors.extend(exc.errors)
    return tuple(parsed)


# ==============================================================================
# Measures
# ==============================================================================
def build_measure(spec: Mapping[str, Any], grid_size: int) -> CircleMeasure:
    """
    {"density": {"kind": "lebesgue"} | {"kind": "rational", "theta": [...], "phi": [...],
    "delta2": f} | {"kind": "tabulated", "samples": [...]},
    "atoms": [{"angle": f, "mass": f} | {"location": c, "mass": f}, ...]}
    """
    errors: List[str] = []
    if not isinstance(spec, Mapping):
        raise ConfigError(f"measure: expected an object with density and atoms, got {spec!r}")
    density_spec = spec.get("density", {"kind": "lebesgue"})
    kind = density_spec.get("kind") if isinstance(density_spec, Mapping) else None
    density = None
    if kind == "lebesgue":
        density = LebesgueDensity()
    elif kind == "rational":
        theta = _complex_list(density_spec.get("theta", [1.0]), "measure.density.theta", errors)
        phi = _complex_list(density_spec.get("phi", [1.0]), "measure.density.phi", errors)
        delta2 = density_spec.get("delta2", 1.0)
        if not isinstance(delta2, (int, float)) or not delta2 > 0:
            errors.append(f"measure.density.delta2: must be positive, got {delta2!r}")
        if not errors:
            try:
                density = RationalDensity(theta, phi, float(delta2))
            except ConfigError as exc:
                errors.extend(exc.errors)
    elif kind == "tabulated":
        samples = density_spec.get("samples")
        try:
            density = TabulatedDensity(tuple(float(v) for v in samples))
        except (TypeError, ValueError) as exc:
            errors.append(f"measure.density.samples: could not read samples: {exc}")
        except ConfigError as exc:
            errors.extend(exc.errors)
    else:
        errors.append(f"measure.density.kind: must be lebesgue, rational or tabulated, got {kind!r}")

    atoms = []
    atom_specs = spec.get("atoms", [])
    if not isinstance(atom_specs, list):
        errors.append(f"measure.atoms: expected a list, got {atom_specs!r}")
        atom_specs = []
    for index, atom in enumerate(atom_specs):
        name = f"measure.atoms[{index}]"
        if not isinstance(atom, Mapping) or "mass" not in atom:
            errors.append(f"{name}: expected an object with mass and angle or location")
            continue
        try:
            if "angle" in atom:
                atoms.append(Atom.from_angle(float(atom["angle"]), float(atom["mass"])))
            else:
                atoms.append(Atom(parse_complex(atom.get("location"), f"{name}.location"), float(atom["mass"])))
        except ConfigError as exc:
            errors.extend(exc.errors)
        except (TypeError, ValueError) as exc:
            errors.append(f"{name}: {exc}")

    if errors:
        raise ConfigError(errors)
    return CircleMeasure(density, tuple(atoms), grid_size)


# ==============================================================================
# Point sequences
# ==============================================================================
@dataclass(frozen=True)
class PointsSource:
    """
    Explicit alphas, a constant tail alpha_k = alpha, or the convergent sequence
    alpha_k = limit * (1 - 1/k).
    """

    kind: str
    alphas: Tuple[complex, ...] = ()
    alpha: complex = 0j

    def sequence(self, count: int) -> PointSequence:
        """alpha_0..alpha_{count-1}."""
        if self.kind == "list":
            if len(self.alphas) < count:
                raise ConfigError(
                    f"points.alphas: {count} points needed, only {len(self.alphas)} given"
                )
            return PointSequence(self.alphas[:count])
        if self.kind == "constant":
            return PointSequence.constant_tail(self.alpha, count - 1)
        return PointSequence((0j,) + tuple(self.alpha * (1 - 1 / k) for k in range(1, count)))


def build_points(spec: Any) -> PointsSource:
    """A list of alphas, or {"constant": c} / {"convergent": c}."""
    errors: List[str] = []
    if isinstance(spec, list):
        source = PointsSource("list", _complex_list(spec, "points", errors))
    elif isinstance(spec, Mapping) and len(spec) == 1 and next(iter(spec)) in ("constant", "convergent"):
        kind = next(iter(spec))
        source = PointsSource(kind, alpha=parse_complex(spec[kind], f"points.{kind}"))
    else:
        raise ConfigError("points: expected a list of alphas or {\"constant\": c} / {\"convergent\": c}")
    if errors:
        raise ConfigError(errors)
    # validates the moduli and alpha_0 early
    if source.kind == "list":
        PointSequence(source.alphas)
    else:
        source.sequence(2)
    return source


# ==============================================================================
# Run configuration
# ==============================================================================
@dataclass(frozen=True, eq=False)
class RunConfig:
    measure: CircleMeasure
    points: PointsSource
    system_id: SystemId = SystemId.W1
    n: int = 1
    seed: int = Config.SEED
    paths: int = 0
    grid_size: int = Config.GRID_SIZE
    output_format: str = "json"
    output_path: Optional[Path] = None
    workers: int = Config.WORKERS
    block_size: int = Config.BLOCK_SIZE
    bins: int = Config.BINS
    moments: Optional[Tuple[complex, ...]] = None
    filter: Optional[Dict[str, Any]] = None
    alpha: Optional[complex] = None
    kind: str = "forward"
    route: str = "direct"

    def point_sequence(self, count: Optional[int] = None) -> PointSequence:
        return self.points.sequence(self.n + 1 if count is None else count)

    def system(self, n: Optional[int] = None, system_id: Optional[SystemId] = None) -> BasisSystem:
        n = self.n if n is None else n
        return BasisSystem(system_id or self.system_id, self.point_sequence(n + 1), n)


def _read_json(path: Path) -> Dict[str, Any]:
    try:
        with Path(path).open("r", encoding="utf-8") as handle:
            data = json.load(handle)
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"config: could not read {path}: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigError(f"config: {path} must contain a JSON object")
    return data


def _integer(data: Mapping[str, Any], key: str, default: int, lowest: int, errors: List[str]) -> int:
    value = data.get(key, default)
    if isinstance(value, bool) or not isinstance(value, int):
        errors.append(f"{key}: expected an integer, got {value!r}")
        return default
    if value < lowest:
        errors.append(f"{key}: must be >= {lowest}, got {value}")
    return value


def _validate_filter(spec: Any, errors: List[str]) -> Optional[Dict[str, Any]]:
    if spec is None:
        return None
    if not isinstance(spec, Mapping):
        errors.append("filter: expected an object {\"theta\", \"phi\", \"R\", \"tol\"}")
        return None
    theta = _complex_list(spec.get("theta", [1.0]), "filter.theta", errors)
    phi = _complex_list(spec.get("phi", [1.0]), "filter.phi", errors)
    R = spec.get("R", 1.0)
    tol = spec.get("tol", 1e-14)
    if not isinstance(R, (int, float)) or R < 1:
        errors.append(f"filter.R: must be a number >= 1, got {R!r}")
    if not isinstance(tol, (int, float)) or not tol > 0:
        errors.append(f"filter.tol: must be positive, got {tol!r}")
    return {"theta": theta, "phi": phi, "R": float(R) if isinstance(R, (int, float)) else 1.0,
            "tol": float(tol) if isinstance(tol, (int, float)) else 1e-14}


def parse_run_config(data: Mapping[str, Any], overrides: Optional[Mapping[str, Any]] = None) -> RunConfig:
    """
    Validate a config object (with command-line overrides applied on top) and collect
    every field-level problem before raising.
    """
    data = dict(data)
    for key, value in (overrides or {}).items():
        if value is not None:
            data[key] = value

    errors: List[str] = []
    n = _integer(data, "n", 1, 0, errors)
    seed = _integer(data, "seed", Config.SEED, 0, errors)
    if seed >= 2**63:
        errors.append(f"seed: must be below 2**63, got {seed}")
    paths = _integer(data, "paths", 0, 0, errors)
    grid_size = _integer(data, "grid_size", Config.GRID_SIZE, 2, errors)
    workers = _integer(data, "workers", Config.WORKERS, 1, errors)
    block_size = _integer(data, "block_size", Config.BLOCK_SIZE, 1, errors)
    bins = _integer(data, "bins", Config.BINS, 1, errors)

    try:
        system_id = SystemId(data.get("system", "w1"))
    except ValueError:
        errors.append(f"system: must be one of {[s.value for s in SystemId]}, got {data.get('system')!r}")
        system_id = SystemId.W1

    output = data.get("output", {}) or {}
    if not isinstance(output, Mapping):
        errors.append(f"output: expected an object with format and path, got {output!r}")
        output = {}
    output_format = data.get("format", output.get("format", "json"))
    if output_format not in OUTPUT_FORMATS:
        errors.append(f"output.format: must be one of {list(OUTPUT_FORMATS)}, got {output_format!r}")
    output_path = data.get("out", output.get("path"))

    kind = data.get("kind", "forward")
    if kind not in PREDICTION_KINDS:
        errors.append(f"kind: must be one of {list(PREDICTION_KINDS)}, got {kind!r}")
    route = data.get("route", "direct")
    if route not in SAMPLING_ROUTES:
        errors.append(f"route: must be one of {list(SAMPLING_ROUTES)}, got {route!r}")

    moments = None
    if data.get("moments") is not None:
        moments = _complex_list(data["moments"], "moments", errors)
    alpha = None
    if data.get("alpha") is not None:
        try:
            alpha = parse_complex(data["alpha"], "alpha")
        except ConfigError as exc:
            errors.extend(exc.errors)
    filter_spec = _validate_filter(data.get("filter"), errors)

    measure = None
    try:
        measure = build_measure(data.get("measure", {}), grid_size)
    except ConfigError as exc:
        errors.extend(exc.errors)
    points = None
    try:
        points = build_points(data.get("points", {"constant": 0.0}))
        if not errors:
            points.sequence(n + 1)
            BasisSystem(system_id, points.sequence(n + 1), n)
    except ConfigError as exc:
        errors.extend(exc.errors)

    if errors:
        raise ConfigError(errors)
    logger.debug(f"Run config: system {system_id.value}, n={n}, seed={seed}, paths={paths}")
    return RunConfig(
        measure=measure,
        points=points,
        system_id=system_id,
        n=n,
        seed=seed,
        paths=paths,
        grid_size=grid_size,
        output_format=output_format,
        output_path=Path(output_path) if output_path else None,
        workers=workers,
        block_size=block_size,
        bins=bins,
        moments=moments,
        filter=filter_spec,
        alpha=alpha,
        kind=kind,
        route=route,
    )


def load_run_config(path: Optional[Path], overrides: Optional[Mapping[str, Any]] = None) -> RunConfig:
    data = _read_json(path) if path is not None else {}
    return parse_run_config(data, overrides)


