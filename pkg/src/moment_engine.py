"""
Generalized Toeplitz (GT) matrices c_jk = integral of conj(w_j) w_k against a measure.

A GT matrix is built either by quadrature against a CircleMeasure or from a
moment sequence c_k = integral of w_k through the structure coefficients,
c_jk = sum_s beta_{jk,s} c_s with c_{-s} = conj(c_s). Positivity of the matrix is
equivalent to the existence of a representing measure; the Pick matrices give the
same test directly in terms of the moments for W1 and W2.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from enum import Enum
from typing import NamedTuple, Optional, Sequence, Union

import numpy as np
from scipy import optimize

from basis_systems import (
    BasisSystem,
    PointSequence,
    SystemId,
    TriangularMatrix,
    change_of_basis_matrix,
    partial_fraction_coeffs,
    structure_coeffs,
)
from circle_measure import CircleMeasure, gram_matrix, quadrature_nodes
from errors import ConfigError, NumericalError


logger = logging.getLogger(__name__)

POSITIVITY_TOL = 1e-10
QUADRATURE_TOL = 1e-8
CORNER_TOL = 1e-6
WITNESS_CANDIDATES = 720
WITNESS_TOL = 1e-6


class MomentError(ConfigError):
    pass


class QuadratureInstabilityError(NumericalError):
    pass


class InconsistentCornerError(NumericalError):
    pass


class Provenance(str, Enum):
    QUADRATURE = "quadrature"
    RECURRENCE = "recurrence"
    CONJUGATED = "conjugated"


@dataclass(frozen=True, eq=False)
class GtMatrix:
    """GT matrix over the index window start..start+order-1."""

    matrix: np.ndarray
    system: BasisSystem
    provenance: Provenance
    start: int = 0

    def __post_init__(self):
        matrix = np.asarray(self.matrix, dtype=complex)
        if matrix.ndim != 2 or matrix.shape[0] != matrix.shape[1]:
            raise ValueError(f"GT matrix must be square, got shape {matrix.shape}")
        hermitian = (matrix + matrix.conj().T) / 2
        object.__setattr__(self, "matrix", hermitian)
        object.__setattr__(self, "provenance", Provenance(self.provenance))

    @property
    def system_id(self) -> SystemId:
        return self.system.system_id

    @property
    def order(self) -> int:
        return self.matrix.shape[0]

    @property
    def stop(self) -> int:
        return self.start + self.order - 1

    def window(self, start: int, stop: int) -> "GtMatrix":
        if not self.start <= start <= stop <= self.stop:
            raise ValueError(f"window {start}..{stop} outside {self.start}..{self.stop}")
        offset = start - self.start
        size = stop - start + 1
        block = self.matrix[offset : offset + size, offset : offset + size]
        return GtMatrix(block, self.system, self.provenance, start)


@dataclass(frozen=True, eq=False)
class MomentSequence:
    values: np.ndarray
    system_id: SystemId

    def __post_init__(self):
        values = np.asarray(self.values, dtype=complex).ravel()
        errors = []
        if values.size == 0:
            errors.append("moments: sequence is empty")
        elif not np.all(np.isfinite(values)):
            errors.append("moments: entries must be finite")
        elif abs(values[0].imag) > 1e-12 * abs(values[0]) or not values[0].real > 0:
            errors.append(f"moments[0]: c_0 must be real and positive, got {values[0]}")
        if errors:
            raise MomentError(errors)
        values = values.copy()
        values[0] = values[0].real
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "system_id", SystemId(self.system_id))

    def __len__(self) -> int:
        return self.values.size

    @property
    def n(self) -> int:
        return self.values.size - 1

    def bilateral(self, s: int) -> complex:
        return complex(self.values[s]) if s >= 0 else complex(np.conj(self.values[-s]))

    @classmethod
    def from_gt(cls, gt: GtMatrix) -> "MomentSequence":
        if gt.start != 0:
            raise ValueError("moments are the first row of a GT matrix starting at index 0")
        return cls(gt.matrix[0].copy(), gt.system_id)


class PositivityCheck(NamedTuple):
    positive: bool
    min_eigenvalue: float


class PickReport(NamedTuple):
    solvable: bool
    min_eigenvalue: float
    matrix: np.ndarray
    printed_solvable: bool
    printed_min_eigenvalue: float


class Witness(NamedTuple):
    feasible: bool
    residual: float
    locations: np.ndarray
    masses: np.ndarray


# ==============================================================================
# Building GT matrices
# ==============================================================================
def _quadrature_gram(system: BasisSystem, measure: CircleMeasure) -> np.ndarray:
    atom_values = system.values(measure.atom_locations) if measure.has_atoms else None
    return gram_matrix(measure, system.values(measure.nodes), atom_values)


def gt_from_measure(system: BasisSystem, measure: CircleMeasure) -> GtMatrix:
    coarse = _quadrature_gram(system, measure)
    fine = _quadrature_gram(system, measure.refined())
    gap = float(np.max(np.abs(coarse - fine))) / max(1.0, float(np.max(np.abs(fine))))
    if gap > QUADRATURE_TOL:
        message = (
            f"GT matrix changes by {gap:.3g} when the grid doubles from {measure.grid_size}"
        )
        if measure.density.smooth:
            raise QuadratureInstabilityError(message)
        logger.warning(f"{message} (tabulated density)")
    return GtMatrix(coarse, system, Provenance.QUADRATURE)


def _recurrence_entry(system: BasisSystem, moments: MomentSequence, j: int, k: int) -> complex:
    beta = structure_coeffs(system, j, k)
    return complex(sum(beta[s + j] * moments.bilateral(s) for s in range(-j, k + 1)))


def gt_from_moments(system: BasisSystem, moments: MomentSequence) -> GtMatrix:
    n = system.n
    if len(moments) < n + 1:
        raise MomentError(f"moments: need c_0..c_{n}, got {len(moments)} values")
    matrix = np.zeros((n + 1, n + 1), dtype=complex)
    for j in range(n + 1):
        for k in range(j, n + 1):
            matrix[j, k] = _recurrence_entry(system, moments, j, k)
            matrix[k, j] = np.conj(matrix[j, k])
    matrix[np.diag_indices(n + 1)] = matrix.diagonal().real
    return GtMatrix(matrix, system, Provenance.RECURRENCE)


def recurrence_residual(gt: GtMatrix, moments: Optional[MomentSequence] = None) -> float:
    """Largest violation of c_jk = sum_s beta_{jk,s} c_s, relative to max |c_jk|."""
    if moments is None:
        moments = MomentSequence.from_gt(gt)
    system = gt.system if gt.system.n >= gt.stop else gt.system.restricted(gt.stop)
    worst = 0.0
    for row in range(gt.order):
        for col in range(row, gt.order):
            j, k = gt.start + row, gt.start + col
            worst = max(worst, abs(gt.matrix[row, col] - _recurrence_entry(system, moments, j, k)))
    return worst / max(1.0, float(np.max(np.abs(gt.matrix))))


def is_positive(gt: Union[GtMatrix, np.ndarray]) -> PositivityCheck:
    matrix = gt.matrix if isinstance(gt, GtMatrix) else np.asarray(gt, dtype=complex)
    eigenvalues = np.linalg.eigvalsh((matrix + matrix.conj().T) / 2)
    trace = float(np.trace(matrix).real)
    smallest = float(eigenvalues[0])
    return PositivityCheck(smallest >= -POSITIVITY_TOL * abs(trace), smallest)


# ==============================================================================
# Moment conversions and Pick criteria
# ==============================================================================
def w1_to_w2_moments(points: PointSequence, c1: Sequence[complex]) -> np.ndarray:
    """Exact W2 moments of the functional with W1 moments c1: c2 = D^T c1."""
    c1 = np.asarray(c1, dtype=complex)
    n = c1.size - 1
    change = change_of_basis_matrix(
        BasisSystem(SystemId.W1, points, n), BasisSystem(SystemId.W2, points, n)
    )
    return change.matrix.T @ c1


def zeta_moments_to_w2(points: PointSequence, gamma: Sequence[complex]) -> np.ndarray:
    """c2_k = (conj(alpha_k) gamma_k + gamma_0) / rho_k with gamma_k = integral of zeta_k."""
    gamma = np.asarray(gamma, dtype=complex)
    alphas = points.array[: gamma.size]
    rho = 1 - np.abs(alphas) ** 2
    c2 = (np.conj(alphas) * gamma + gamma[0]) / rho
    c2[0] = gamma[0]
    return c2


def w2_to_zeta_moments(points: PointSequence, c2: Sequence[complex]) -> np.ndarray:
    c2 = np.asarray(c2, dtype=complex)
    alphas = points.array[: c2.size]
    gamma = c2.copy()
    rho = 1 - np.abs(alphas[1:]) ** 2
    gamma[1:] = (rho * c2[1:] - c2[0]) / np.conj(alphas[1:])
    return gamma


def _pick_denominators(alphas: np.ndarray, printed: bool) -> np.ndarray:
    if printed:
        return 1 - np.conj(alphas)[:, None] * alphas[None, :]
    return 1 - alphas[:, None] * np.conj(alphas)[None, :]


def pick_matrix(
    system_id: SystemId, points: PointSequence, moments: MomentSequence, printed: bool = False
) -> np.ndarray:
    """
    Pick matrix of the moment problem for W1 or W2.

    The default orientation divides by 1 - alpha_j conj(alpha_k), which makes the
    W2 matrix equal to the GT matrix of the moments. With ``printed=True`` the
    denominators are 1 - alpha_k conj(alpha_j) and the W1 numerator is fed the W1
    moments themselves instead of the integrals of zeta_k.
    """
    system_id = SystemId(system_id)
    n = moments.n
    points.require_distinct(n, "the Pick criterion")
    alphas = points.array[: n + 1]
    c = moments.values
    denominators = _pick_denominators(alphas, printed)
    if system_id is SystemId.W2:
        numerators = c[None, :] + np.conj(c)[:, None] - c[0]
        return numerators / denominators
    if system_id is not SystemId.W1:
        raise ValueError(f"Pick criterion is stated for w1 and w2, not {system_id.value}")

    gamma = c if printed else w2_to_zeta_moments(points, w1_to_w2_moments(points, c))
    rho = 1 - np.abs(alphas) ** 2
    modulus = np.abs(alphas) ** 2
    numerators = (
        rho[:, None] * (np.conj(alphas) * gamma)[None, :]
        + rho[None, :] * (alphas * np.conj(gamma))[:, None]
        + gamma[0].real * (1 - modulus[:, None] * modulus[None, :])
    )
    return numerators / denominators


def pick_solvability(
    system_id: SystemId, points: PointSequence, moments: MomentSequence
) -> PickReport:
    matrix = pick_matrix(system_id, points, moments)
    verdict = is_positive(matrix)
    printed = is_positive(pick_matrix(system_id, points, moments, printed=True))
    if printed.positive != verdict.positive:
        logger.warning(
            f"Printed {SystemId(system_id).value} Pick form disagrees: "
            f"min eigenvalue {printed.min_eigenvalue:.3g} vs {verdict.min_eigenvalue:.3g}"
        )
    return PickReport(
        verdict.positive, verdict.min_eigenvalue, matrix, printed.positive, printed.min_eigenvalue
    )


def discrete_witness(
    system_id: SystemId,
    points: PointSequence,
    moments: MomentSequence,
    candidates: int = WITNESS_CANDIDATES,
) -> Witness:
    """Search for nonnegative masses on equispaced atoms reproducing the moments."""
    system = BasisSystem(system_id, points, moments.n)
    locations = quadrature_nodes(candidates)
    basis = system.values(locations)
    design = np.vstack([basis.real, basis.imag])
    target = np.concatenate([moments.values.real, moments.values.imag])
    masses, residual = optimize.nnls(design, target)
    feasible = residual <= WITNESS_TOL * max(1.0, float(np.linalg.norm(target)))
    support = masses > 0
    return Witness(bool(feasible), float(residual), locations[support], masses[support])


# ==============================================================================
# Transport and windows
# ==============================================================================
def conjugate_gt(gt: GtMatrix, change: TriangularMatrix) -> GtMatrix:
    """D^H C D: the GT matrix of the same measure in the target system of D."""
    if change.order != gt.order:
        raise ValueError(f"order mismatch: GT matrix {gt.order}, change of basis {change.order}")
    if change.source is not None and change.source is not gt.system_id:
        raise ValueError(
            f"change of basis starts from {change.source.value}, GT matrix is {gt.system_id.value}"
        )
    system = gt.system if change.target is None else gt.system.with_id(change.target)
    matrix = change.matrix.conj().T @ gt.matrix @ change.matrix
    return GtMatrix(matrix, system, Provenance.CONJUGATED, gt.start)


def _check_entry(expected: complex, actual: complex, j: int, k: int, scale: float) -> None:
    if abs(expected - actual) > CORNER_TOL * scale:
        raise InconsistentCornerError(
            f"entry ({j}, {k}) violates the recurrence: {actual:.12g} vs {expected:.12g}"
        )


def _w1_entry(points: PointSequence, c00: float, gamma: dict, j: int, k: int) -> complex:
    """c_jk = A_jk c_00 + sum_s coeff_s gamma_s with gamma_s = c_{s-1,s} = integral of zeta_s."""
    if j == k:
        return complex(c00)
    expansion = partial_fraction_coeffs(points, j, k)
    tail = sum(coeff * gamma[s] for coeff, s in zip(expansion.coeffs, range(j + 1, k + 1)))
    return complex(expansion.constant * c00 + tail)


def extend_covariance_block(
    block: GtMatrix, new_corner: complex, moments: Optional[MomentSequence] = None
) -> GtMatrix:
    """
    Grow the window start..stop to start..stop+1.

    With moments the new column follows from the structure recurrence and the corner
    is checked against it. Without moments (W1 only) the window is determined by its
    diagonal value and superdiagonal, and the corner supplies the next superdiagonal entry.
    """
    system = block.system
    start, new = block.start, block.stop + 1
    if system.n < new:
        system = system.restricted(new)
    scale = max(1.0, float(np.max(np.abs(block.matrix))))
    column = np.zeros(block.order + 1, dtype=complex)

    if moments is not None:
        if len(moments) < new + 1:
            raise MomentError(f"moments: need c_0..c_{new} to extend to index {new}")
        for row in range(block.order):
            for col in range(row, block.order):
                j, k = start + row, start + col
                _check_entry(_recurrence_entry(system, moments, j, k), block.matrix[row, col], j, k, scale)
        for row in range(block.order + 1):
            column[row] = _recurrence_entry(system, moments, start + row, new)
        _check_entry(column[-2], new_corner, new - 1, new, scale)
    else:
        if system.system_id is not SystemId.W1:
            raise ValueError("extension without moments is available for w1 only")
        system.points.require_distinct(new, "the partial-fraction extension")
        c00 = float(block.matrix[0, 0].real)
        gamma = {s: block.matrix[s - 1 - start, s - start] for s in range(start + 1, new)}
        gamma[new] = complex(new_corner)
        for row in range(block.order):
            for col in range(row, block.order):
                j, k = start + row, start + col
                expected = _w1_entry(system.points, c00, gamma, j, k)
                _check_entry(expected, block.matrix[row, col], j, k, scale)
        for row in range(block.order + 1):
            column[row] = _w1_entry(system.points, c00, gamma, start + row, new)

    grown = np.zeros((block.order + 1, block.order + 1), dtype=complex)
    grown[:-1, :-1] = block.matrix
    grown[:, -1] = column
    grown[-1, :] = np.conj(column)
    grown[-1, -1] = column[-1].real
    return GtMatrix(grown, system, Provenance.RECURRENCE, start)


def shift_block(block: GtMatrix, l: int = 1) -> GtMatrix:
    """Drop the first l rows and columns."""
    if not 0 <= l < block.order:
        raise ValueError(f"cannot drop {l} leading indices from a window of {block.order}")
    return GtMatrix(block.matrix[l:, l:], block.system, block.provenance, block.start + l)
