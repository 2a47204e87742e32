"""
Forward, backward and mixed (bilateral) one-step prediction in L^2 of the spectral measure.

Each report carries the innovation energy computed from the ORF norms and an independent
least-squares oracle on the Gram normal equations; for W1 forward prediction a third
value comes from the starred ORF at alpha_n.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from basis_systems import BasisSystem, SystemId, UnsupportedSystemError
from circle_measure import CircleMeasure, SzegoClassError, is_szego_class, szego_function
from errors import ConfigError
from orf_core import (
    LaurentOrfFamily,
    OrfFamily,
    SingularGramError,
    eval_starred,
    orthonormalize,
)
from vgp_sim import SamplePaths


logger = logging.getLogger(__name__)

ORACLE_RANK_TOL = 1e-12
ROUTE_AGREEMENT_TOL = 1e-8
BOUNDARY_TOL = 1e-12


class PredictionKind(str, Enum):
    FORWARD = "forward"
    BACKWARD = "backward"
    MIXED_SYM = "mixed_sym"
    MIXED_PLUS = "mixed_plus"
    MIXED_MINUS = "mixed_minus"


@dataclass(frozen=True, eq=False)
class PredictorReport:
    kind: PredictionKind
    n: int
    coefficients: np.ndarray
    labels: Tuple[int, ...]
    energy_orf: float
    energy_oracle: float
    energy_eval: Optional[float] = None
    residuals: Dict[str, float] = field(default_factory=dict)

    @property
    def consistent(self) -> bool:
        return abs(self.energy_orf - self.energy_oracle) <= ROUTE_AGREEMENT_TOL * self.energy_oracle


def least_squares_oracle(gram: np.ndarray, conditioning: Sequence[int], target: int) -> Tuple[np.ndarray, float]:
    """
    Coefficients a minimizing || w_target - sum a_s w_s || over the conditioning
    positions, from G[S, S] a = G[S, target], and the residual norm.
    """
    conditioning = list(conditioning)
    if not conditioning:
        return np.zeros(0, dtype=complex), float(np.sqrt(gram[target, target].real))
    block = gram[np.ix_(conditioning, conditioning)]
    rhs = gram[conditioning, target]
    eigenvalues, eigenvectors = np.linalg.eigh(block)
    cutoff = ORACLE_RANK_TOL * float(np.trace(block).real)
    if eigenvalues[0] <= cutoff:
        raise SingularGramError(
            f"conditioning Gram matrix is numerically singular: eigenvalue {eigenvalues[0]:.3g} "
            f"vs cutoff {cutoff:.3g}"
        )
    coefficients = eigenvectors @ ((eigenvectors.conj().T @ rhs) / eigenvalues)
    energy2 = float((gram[target, target] - gram[target, conditioning] @ coefficients).real)
    return coefficients, float(np.sqrt(max(energy2, 0.0)))


def _relative(a: float, b: float) -> float:
    return abs(a - b) / max(abs(b), np.finfo(float).tiny)


def _report(
    kind: PredictionKind,
    n: int,
    coefficients: np.ndarray,
    labels: Sequence[int],
    energy_orf: float,
    energy_oracle: float,
    energy_eval: Optional[float] = None,
) -> PredictorReport:
    residuals = {"orf_vs_oracle": _relative(energy_orf, energy_oracle)}
    if energy_eval is not None:
        residuals["orf_vs_eval"] = _relative(energy_orf, energy_eval)
    report = PredictorReport(
        kind, n, coefficients, tuple(labels), energy_orf, energy_oracle, energy_eval, residuals
    )
    if not report.consistent:
        logger.warning(
            f"{kind.value} energies disagree at n={n}: ORF {energy_orf:.12g}, oracle {energy_oracle:.12g}"
        )
    return report


def _check_horizon(family_order: int, n: int, lowest: int) -> None:
    if not lowest <= n <= family_order:
        raise ConfigError(f"n: horizon {n} outside {lowest}..{family_order}")


def forward_predict(family: OrfFamily, n: int) -> PredictorReport:
    """Projection of w_n onto span{w_0..w_{n-1}}: coefficients of w_n - Phi_n."""
    _check_horizon(family.n, n, 0)
    coefficients = -family.monic_coeffs[n, :n]
    _, energy_oracle = least_squares_oracle(family.gram, range(n), n)
    energy_eval = None
    if family.system.system_id is SystemId.W1:
        alpha = family.system.points[n]
        energy_eval = 1.0 / abs(eval_starred(family, n, alpha))
    return _report(
        PredictionKind.FORWARD, n, coefficients, range(n), float(family.norms[n]), energy_oracle, energy_eval
    )


def backward_predict(family: OrfFamily, n: int) -> PredictorReport:
    """Projection of w_0 onto span{w_1..w_n}: coefficients of w_0 - Phi*_n."""
    _check_horizon(family.n, n, 1)
    coefficients = -family.reversed_coeffs[n, 1 : n + 1]
    _, energy_oracle = least_squares_oracle(family.gram, range(1, n + 1), 0)
    return _report(
        PredictionKind.BACKWARD,
        n,
        coefficients,
        range(1, n + 1),
        float(family.reversed_norms[n]),
        energy_oracle,
    )


_MIXED = {
    "sym": (PredictionKind.MIXED_SYM, None, 0),
    "plus": (PredictionKind.MIXED_PLUS, "chi", 1),
    "minus": (PredictionKind.MIXED_MINUS, "x", 1),
}


def mixed_predict(laurent: LaurentOrfFamily, n: int, variant: str) -> PredictorReport:
    """
    Projection of w_0 onto the span of w_{+-1}..w_{+-n} (sym), w_{-n}..w_{n+1} (plus)
    or w_{-(n+1)}..w_n (minus). plus needs the chi ordering and minus the x ordering.
    """
    if variant not in _MIXED:
        raise ConfigError(f"variant: must be one of {sorted(_MIXED)}, got {variant!r}")
    kind, ordering, extra = _MIXED[variant]
    if ordering is not None and laurent.ordering != ordering:
        raise ConfigError(f"variant {variant} needs the {ordering} ordering, family is {laurent.ordering}")
    position = 2 * n + extra
    if n < 0 or position >= len(laurent.labels):
        raise ConfigError(
            f"n: variant {variant} at n={n} needs {position + 1} Laurent elements, family has {len(laurent.labels)}"
        )
    if position == 0:
        energy = float(laurent.norms[0])
        return _report(kind, n, np.zeros(0, dtype=complex), (), energy, energy)

    starred, energy_orf = laurent.monic_starred(position)
    conditioning = range(1, position + 1)
    _, energy_oracle = least_squares_oracle(laurent.gram, conditioning, 0)
    labels = [laurent.labels[p] for p in conditioning]
    return _report(kind, n, -starred[1:], labels, energy_orf, energy_oracle)


def asymptotic_energy_limit(measure: CircleMeasure, alpha: complex) -> float:
    """sqrt(1 - |alpha|^2) |S(alpha)| inside the disk and 0 on the circle."""
    modulus = abs(alpha)
    if modulus > 1 + BOUNDARY_TOL:
        raise ConfigError(f"alpha: |alpha| = {modulus:.12g} lies outside the closed unit disk")
    if modulus >= 1 - BOUNDARY_TOL:
        return 0.0
    check = is_szego_class(measure)
    if not check.is_szego:
        raise SzegoClassError(f"energy limit needs a Szegő-class measure: {check.diagnostic}")
    return float(np.sqrt(1 - modulus**2) * abs(szego_function(measure, complex(alpha))))


def energy_trajectory(system: BasisSystem, measure: CircleMeasure, n_max: int) -> List[float]:
    """E_1..E_{n_max} of W1 forward prediction."""
    if system.system_id is not SystemId.W1:
        raise UnsupportedSystemError(f"system: energy trajectories are defined for w1, got {system.system_id.value}")
    family = orthonormalize(system, measure, n_max)
    energies = []
    for n in range(1, n_max + 1):
        energies.append(forward_predict(family, n).energy_orf)
        logger.debug(f"E_{n} = {energies[-1]:.12g}")
    return energies


def trajectory_table(system: BasisSystem, measure: CircleMeasure, n_max: int) -> pd.DataFrame:
    """E_n next to the limit for the constant sequence alpha_k = alpha_n."""
    energies = energy_trajectory(system, measure, n_max)
    rows = []
    for n, energy in enumerate(energies, start=1):
        alpha = system.points[n]
        limit = asymptotic_energy_limit(measure, alpha)
        rows.append({
            "n": n,
            "alpha_re": alpha.real,
            "alpha_im": alpha.imag,
            "energy": energy,
            "limit": limit,
            "gap": abs(energy - limit),
        })
    return pd.DataFrame(rows, columns=["n", "alpha_re", "alpha_im", "energy", "limit", "gap"])


def empirical_innovation_std(paths: SamplePaths, n: int) -> float:
    """sqrt of the mean squared residual of regressing X_n on X_0..X_{n-1} over paths."""
    values = paths.values
    if not 0 <= n < values.shape[1]:
        raise ConfigError(f"n: column {n} outside 0..{values.shape[1] - 1}")
    if values.shape[0] == 0:
        raise ConfigError("paths: need at least one path")
    target = values[:, n]
    if n > 0:
        coefficients, *_ = np.linalg.lstsq(values[:, :n], target, rcond=None)
        target = target - values[:, :n] @ coefficients
    return float(np.sqrt(np.mean(np.abs(target) ** 2)))
