"""
Blaschke parameter sequences and the rational basis systems built on them.

Every system spans the same space L_n of rational functions with poles at 1/conj(alpha_k):

    W1   w_k = B_k = zeta_1 * ... * zeta_k
    W2   w_k = 1 / (1 - conj(alpha_k) t)
    W2P  w_k = (1 - |alpha_k|) / (1 - conj(alpha_k) t)
    W3   w_k = t^k / prod_{j<=k} (1 - conj(alpha_j) t)

with zeta_k(t) = (t - alpha_k) / (1 - conj(alpha_k) t) and w_0 = 1 in every system.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from enum import Enum
from functools import cached_property, lru_cache
from typing import NamedTuple, Sequence, Tuple, Union

import numpy as np
from scipy import linalg

from circle_measure import quadrature_nodes
from errors import ConfigError, NumericalError


logger = logging.getLogger(__name__)

MODULUS_LIMIT = 1.0 - 1e-9
DISTINCT_TOL = 1e-9
POLE_TOL = 1e-14
DIAGONAL_TOL = 1e-12
CONDITIONING_LIMIT = 1e8
PARTIAL_FRACTION_TOL = 1e-10
CHANGE_OF_BASIS_TOL = 1e-9
STRUCTURE_FIT_TOL = 1e-9
SUBGRID_SIZE = 64
MIN_FIT_GRID = 256
BOUNDARY_ROOT_TOL = 1e-6
STRUCTURE_CACHE_SIZE = 4096

Scalar = Union[complex, np.ndarray]


class PointsError(ConfigError):
    pass


class RepeatedPointsError(ConfigError):
    pass


class UnsupportedSystemError(ConfigError):
    pass


class PoleError(NumericalError):
    pass


class ExpansionError(NumericalError):
    pass


class StructureFitError(NumericalError):
    pass


class FactorizationError(NumericalError):
    pass


class SystemId(str, Enum):
    W1 = "w1"
    W2 = "w2"
    W2P = "w2p"
    W3 = "w3"


def _as_output(values: np.ndarray, t: Scalar) -> Scalar:
    return complex(values) if np.ndim(t) == 0 else values


def _fit_grid_size(unknowns: int) -> int:
    size = MIN_FIT_GRID
    while size < 8 * unknowns:
        size *= 2
    return size


# ==============================================================================
# Point sequences
# ==============================================================================
@dataclass(frozen=True)
class PointSequence:
    """alpha_0 = 0, alpha_1, ..., alpha_N strictly inside the unit disk."""

    alphas: Tuple[complex, ...]

    def __post_init__(self):
        alphas = tuple(complex(a) for a in self.alphas)
        object.__setattr__(self, "alphas", alphas)
        errors = []
        if not alphas:
            errors.append("points.alphas: sequence is empty")
        elif alphas[0] != 0:
            errors.append(f"points.alphas[0]: must be exactly 0, got {alphas[0]}")
        for index, alpha in enumerate(alphas):
            if not np.isfinite(alpha) or abs(alpha) > MODULUS_LIMIT:
                errors.append(f"points.alphas[{index}]: |alpha| = {abs(alpha):.12g} exceeds {MODULUS_LIMIT}")
        if errors:
            raise PointsError(errors)

    def __len__(self) -> int:
        return len(self.alphas)

    def __getitem__(self, k: int) -> complex:
        return self.alphas[k]

    @cached_property
    def array(self) -> np.ndarray:
        return np.array(self.alphas, dtype=complex)

    @property
    def divergence_sum(self) -> float:
        return float(np.sum(1 - np.abs(self.array)))

    def is_distinct(self, upto: int | None = None) -> bool:
        alphas = self.array if upto is None else self.array[: upto + 1]
        if alphas.size < 2:
            return True
        gaps = np.abs(alphas[:, None] - alphas[None, :])
        np.fill_diagonal(gaps, np.inf)
        return bool(gaps.min() > DISTINCT_TOL)

    def require_distinct(self, upto: int, purpose: str) -> None:
        if not self.is_distinct(upto):
            raise RepeatedPointsError(
                f"points.alphas: {purpose} needs pairwise distinct parameters alpha_0..alpha_{upto}"
            )

    @classmethod
    def constant_tail(cls, alpha: complex, n: int) -> "PointSequence":
        return cls((0j,) + (complex(alpha),) * n)


# ==============================================================================
# Blaschke factors and products
# ==============================================================================
def _denominator(alpha: complex, t: np.ndarray) -> np.ndarray:
    denominator = 1 - np.conj(alpha) * t
    if np.any(np.abs(denominator) < POLE_TOL):
        raise PoleError(f"evaluation at the pole 1/conj({alpha:.6g})")
    return denominator


def blaschke_factor(points: PointSequence, k: int, t: Scalar) -> Scalar:
    if k < 1:
        raise ValueError(f"Blaschke factors start at k = 1, got {k}")
    alpha = points[k]
    values = np.asarray(t, dtype=complex)
    return _as_output((values - alpha) / _denominator(alpha, values), t)


def blaschke_product(points: PointSequence, j: int, k: int, t: Scalar) -> Scalar:
    """B_jk(t) = zeta_{j+1}(t) * ... * zeta_k(t); B_kk = 1."""
    if not 0 <= j <= k:
        raise ValueError(f"need 0 <= j <= k, got j={j}, k={k}")
    values = np.asarray(t, dtype=complex)
    result = np.ones_like(values)
    for s in range(j + 1, k + 1):
        result = result * blaschke_factor(points, s, values)
    return _as_output(result, t)


# ==============================================================================
# Basis systems
# ==============================================================================
@dataclass(frozen=True)
class BasisSystem:
    system_id: SystemId
    points: PointSequence
    n: int

    def __post_init__(self):
        object.__setattr__(self, "system_id", SystemId(self.system_id))
        if not 0 <= self.n <= len(self.points) - 1:
            raise PointsError(
                f"n: {self.n} needs alpha_0..alpha_{self.n} but only {len(self.points)} points are given"
            )
        if self.system_id in (SystemId.W2, SystemId.W2P):
            self.points.require_distinct(self.n, f"system {self.system_id.value}")

    def restricted(self, n: int) -> "BasisSystem":
        return BasisSystem(self.system_id, self.points, n)

    def with_id(self, system_id: SystemId) -> "BasisSystem":
        return BasisSystem(system_id, self.points, self.n)

    def values(self, t: np.ndarray, upto: int | None = None) -> np.ndarray:
        """Rows w_0(t), ..., w_upto(t)."""
        upto = self.n if upto is None else upto
        t = np.asarray(t, dtype=complex).ravel()
        alphas = self.points.array
        rows = np.empty((upto + 1, t.size), dtype=complex)
        rows[0] = 1
        running = np.ones_like(t)
        for k in range(1, upto + 1):
            denominator = _denominator(alphas[k], t)
            if self.system_id is SystemId.W1:
                running = running * (t - alphas[k]) / denominator
                rows[k] = running
            elif self.system_id is SystemId.W2:
                rows[k] = 1 / denominator
            elif self.system_id is SystemId.W2P:
                rows[k] = (1 - abs(alphas[k])) / denominator
            else:
                running = running * t / denominator
                rows[k] = running
        return rows

    def evaluate(self, k: int, t: Scalar) -> Scalar:
        if not 0 <= k <= self.n:
            raise ValueError(f"basis index {k} outside 0..{self.n}")
        row = self.values(np.asarray(t), upto=k)[k]
        return _as_output(row if np.ndim(t) else row[0], t)

    def bilateral(self, s: int, t: Scalar) -> Scalar:
        """w_s for s >= 0, and w_{-s}(t) = conj(w_s(1/conj t)) (= conj(w_s(t)) on T)."""
        if s >= 0:
            return self.evaluate(s, t)
        values = np.asarray(t, dtype=complex)
        return _as_output(np.conj(np.asarray(self.evaluate(-s, 1 / np.conj(values)))), t)

    def bilateral_values(self, labels: Sequence[int], t: np.ndarray) -> np.ndarray:
        """Rows w_s(t) for each signed label s; t must lie on T."""
        top = max((abs(s) for s in labels), default=0)
        forward = self.values(t, upto=top)
        return np.array([forward[s] if s >= 0 else np.conj(forward[-s]) for s in labels])


def eval_basis(system: BasisSystem, k: int, t: Scalar) -> Scalar:
    return system.evaluate(k, t)


@dataclass(frozen=True, eq=False)
class TriangularMatrix:
    """Upper triangular D with target_k = sum_{s<=k} D[s, k] * source_s."""

    matrix: np.ndarray
    source: SystemId | None = None
    target: SystemId | None = None

    def __post_init__(self):
        matrix = np.triu(np.asarray(self.matrix, dtype=complex))
        if matrix.ndim != 2 or matrix.shape[0] != matrix.shape[1]:
            raise ValueError(f"triangular matrix must be square, got shape {matrix.shape}")
        if np.any(np.abs(np.diag(matrix)) <= DIAGONAL_TOL):
            raise ExpansionError("change-of-basis matrix has a vanishing diagonal entry")
        object.__setattr__(self, "matrix", matrix)

    @property
    def order(self) -> int:
        return self.matrix.shape[0]

    def inverse(self) -> "TriangularMatrix":
        identity = np.eye(self.order, dtype=complex)
        inverse = linalg.solve_triangular(self.matrix, identity, lower=False)
        return TriangularMatrix(inverse, self.target, self.source)

    def then(self, other: "TriangularMatrix") -> "TriangularMatrix":
        """Compose source -> target -> other.target."""
        if other.order != self.order:
            raise ValueError(f"cannot compose orders {self.order} and {other.order}")
        return TriangularMatrix(self.matrix @ other.matrix, self.source, other.target)

    @classmethod
    def identity(cls, order: int, system_id: SystemId | None = None) -> "TriangularMatrix":
        return cls(np.eye(order, dtype=complex), system_id, system_id)


class PartialFraction(NamedTuple):
    constant: complex
    coeffs: np.ndarray  # coefficient of zeta_s at position s - (j + 1)
    residual: float


def partial_fraction_coeffs(points: PointSequence, j: int, k: int) -> PartialFraction:
    """
    B_jk = A_jk + sum_{s=j+1}^{k} zeta_s / conj(B_{jk,s-hat}(alpha_s)), where
    B_{jk,s-hat} omits the factor zeta_s. A_jk comes from evaluating both sides at 0.
    """
    if not 0 <= j < k:
        raise ValueError(f"need 0 <= j < k, got j={j}, k={k}")
    points.require_distinct(k, "the partial-fraction expansion")
    indices = range(j + 1, k + 1)
    coeffs = np.empty(k - j, dtype=complex)
    for position, s in enumerate(indices):
        others = np.prod([blaschke_factor(points, r, points[s]) for r in indices if r != s])
        coeffs[position] = 1 / np.conj(others)
    constant = blaschke_product(points, j, k, 0j) + np.sum(coeffs * points.array[j + 1 : k + 1])

    largest = float(np.max(np.abs(coeffs)))
    if largest > CONDITIONING_LIMIT:
        logger.warning(
            f"Partial fractions of B_{j}{k} are ill-conditioned: largest coefficient {largest:.3g}"
        )
    t = quadrature_nodes(SUBGRID_SIZE)
    expansion = constant + sum(c * blaschke_factor(points, s, t) for c, s in zip(coeffs, indices))
    residual = float(np.max(np.abs(blaschke_product(points, j, k, t) - expansion)))
    if residual > PARTIAL_FRACTION_TOL * max(1.0, largest):
        raise ExpansionError(f"partial fractions of B_{j}{k} leave residual {residual:.3g}")
    return PartialFraction(complex(constant), coeffs, residual)


# ==============================================================================
# Change of basis
# ==============================================================================
def _w2_coordinates(system: BasisSystem) -> np.ndarray:
    """Column k holds the coordinates of w_k in the W2 basis, read off from residues."""
    n = system.n
    alphas = system.points.array
    coordinates = np.zeros((n + 1, n + 1), dtype=complex)
    coordinates[0, 0] = 1
    for k in range(1, n + 1):
        if system.system_id is SystemId.W2:
            coordinates[k, k] = 1
            continue
        if system.system_id is SystemId.W2P:
            coordinates[k, k] = 1 - abs(alphas[k])
            continue
        for s in range(1, k + 1):
            others = [r for r in range(1, k + 1) if r != s]
            if system.system_id is SystemId.W1:
                rest = np.prod([blaschke_factor(system.points, r, alphas[s]) for r in others])
                coordinates[s, k] = (1 - abs(alphas[s]) ** 2) / (np.conj(alphas[s]) * np.conj(rest))
            else:
                pole = 1 / np.conj(alphas[s])
                rest = np.prod([1 - np.conj(alphas[r]) * pole for r in others])
                coordinates[s, k] = pole**k / rest
        value_at_zero = 0.0 if system.system_id is SystemId.W3 else system.evaluate(k, 0j)
        coordinates[0, k] = value_at_zero - coordinates[1 : k + 1, k].sum()
    return coordinates


def _least_squares_change(source: BasisSystem, target: BasisSystem) -> np.ndarray:
    t = quadrature_nodes(_fit_grid_size(source.n + 1))
    source_values = source.values(t)
    target_values = target.values(t)
    matrix = np.zeros((source.n + 1, source.n + 1), dtype=complex)
    for k in range(source.n + 1):
        solution, *_ = np.linalg.lstsq(source_values[: k + 1].T, target_values[k], rcond=None)
        matrix[: k + 1, k] = solution
    return matrix


def change_of_basis_matrix(source: BasisSystem, target: BasisSystem) -> TriangularMatrix:
    if source.points != target.points or source.n != target.n:
        raise ValueError("change of basis needs the same point sequence and the same n")
    n = source.n
    if source.system_id is target.system_id:
        return TriangularMatrix.identity(n + 1, source.system_id)

    if source.points.is_distinct(n):
        matrix = linalg.solve_triangular(_w2_coordinates(source), _w2_coordinates(target), lower=False)
    else:
        matrix = _least_squares_change(source, target)

    largest = float(np.max(np.abs(matrix)))
    if largest > CONDITIONING_LIMIT:
        logger.warning(
            f"Change of basis {source.system_id.value}->{target.system_id.value} is "
            f"ill-conditioned: largest entry {largest:.3g}"
        )
    t = quadrature_nodes(SUBGRID_SIZE)
    source_values = source.values(t)
    residual = float(np.max(np.abs(target.values(t) - matrix.T @ source_values)))
    scale = max(1.0, float(np.max(np.abs(matrix).sum(axis=0))) * float(np.max(np.abs(source_values))))
    if residual > CHANGE_OF_BASIS_TOL * scale:
        raise ExpansionError(
            f"change of basis {source.system_id.value}->{target.system_id.value} "
            f"leaves residual {residual:.3g}"
        )
    return TriangularMatrix(matrix, source.system_id, target.system_id)


# ==============================================================================
# Structure coefficients
# ==============================================================================
@lru_cache(maxsize=STRUCTURE_CACHE_SIZE)
def _structure_fit(system: BasisSystem, j: int, k: int) -> np.ndarray:
    labels = list(range(-j, k + 1))
    t = quadrature_nodes(_fit_grid_size(len(labels)))
    design = system.bilateral_values(labels, t).T
    forward = system.values(t, upto=max(j, k))
    target = np.conj(forward[j]) * forward[k]
    coefficients, _, rank, _ = np.linalg.lstsq(design, target, rcond=None)
    if rank < len(labels):
        raise StructureFitError(
            f"structure fit for (j={j}, k={k}) is rank deficient ({rank} < {len(labels)})"
        )
    residual = float(np.max(np.abs(design @ coefficients - target)))
    if residual > STRUCTURE_FIT_TOL * max(1.0, float(np.max(np.abs(target)))):
        raise StructureFitError(f"structure fit for (j={j}, k={k}) leaves residual {residual:.3g}")
    coefficients.setflags(write=False)
    return coefficients


def structure_coeffs(system: BasisSystem, j: int, k: int) -> np.ndarray:
    """
    Coefficients beta_{jk,s}, s = -j..k (position s + j), of
    conj(w_j) w_k = sum_s beta_{jk,s} w_s on T with w_{-s} = conj(w_s).
    """
    if system.system_id is SystemId.W3:
        raise UnsupportedSystemError("system: structure coefficients are not available for w3")
    if not (0 <= j <= system.n and 0 <= k <= system.n):
        raise ValueError(f"indices ({j}, {k}) outside 0..{system.n}")
    return _structure_fit(system, j, k).copy()


# ==============================================================================
# Fejér–Riesz factorization
# ==============================================================================
class SpectralFactor(NamedTuple):
    coeffs: np.ndarray  # W1 coordinates of h
    residual: float


def spectral_factor(points: PointSequence, n: int, a: Sequence[complex]) -> SpectralFactor:
    """
    Factor f = sum_k (a_k B_k + conj(a_k B_k)) >= 0 on T as |h|^2 with h in L_n.

    f * prod |1 - conj(alpha_k) t|^2 is a trigonometric polynomial P of degree <= n;
    its roots come in pairs (r, 1/conj r), and keeping the roots inside the disk
    (half of those on T) gives an analytic q with |q|^2 = P. Then h = q / prod(1 - conj(alpha_k) t).
    """
    system = BasisSystem(SystemId.W1, points, n)
    a = np.asarray(a, dtype=complex)
    if a.size != n + 1:
        raise ValueError(f"expected {n + 1} coefficients, got {a.size}")
    size = _fit_grid_size(2 * n + 1)
    t = quadrature_nodes(size)
    basis = system.values(t)
    f = 2 * (a @ basis).real
    if f.min() < -1e-12 * max(1.0, np.abs(f).max()):
        raise FactorizationError(f"combination is negative on T (minimum {f.min():.3g})")

    denominator = np.prod([1 - np.conj(points[k]) * t for k in range(1, n + 1)], axis=0) * np.ones_like(t)
    trig = f * np.abs(denominator) ** 2
    fourier = np.fft.fft(trig) / size
    coefficients = {m: fourier[m % size] for m in range(-n, n + 1)}
    tolerance = 1e-13 * max(abs(c) for c in coefficients.values())
    degree = max((m for m in range(n + 1) if abs(coefficients[m]) > tolerance), default=0)

    if degree == 0:
        analytic = np.full_like(t, np.sqrt(max(coefficients[0].real, 0.0)))
    else:
        highest_first = [coefficients[m] for m in range(degree, -degree - 1, -1)]
        roots = np.roots(highest_first)
        moduli = np.abs(roots)
        inside = roots[moduli < 1 - BOUNDARY_ROOT_TOL]
        boundary = roots[np.abs(moduli - 1) <= BOUNDARY_ROOT_TOL]
        boundary = boundary[np.argsort(np.angle(boundary))][::2]
        chosen = np.concatenate([inside, boundary])
        if chosen.size != degree:
            raise FactorizationError(
                f"root selection produced {chosen.size} roots for degree {degree}"
            )
        analytic = np.polyval(np.poly(chosen), t)
        analytic *= np.sqrt(trig.sum() / np.sum(np.abs(analytic) ** 2))

    factor = analytic / denominator
    coeffs, *_ = np.linalg.lstsq(basis.T, factor, rcond=None)
    residual = float(np.max(np.abs(f - np.abs(coeffs @ basis) ** 2)))
    logger.debug(f"Spectral factor of degree {degree}: residual {residual:.3g}")
    return SpectralFactor(coeffs, residual)
