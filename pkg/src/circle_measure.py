"""
Finite positive Borel measures on the unit circle.

A measure is an absolutely continuous part (normalized Lebesgue, a rational ARMA
spectral density, or a tabulated density) plus a finite list of atoms. All
integrals use the periodic trapezoidal rule on the uniform angle grid
theta_j = 2*pi*j/M, which is spectrally accurate for the smooth integrands used
throughout; atoms are added exactly.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace
from functools import cached_property
from typing import Callable, NamedTuple, Optional, Sequence, Tuple, Union

import numpy as np

from errors import ConfigError, NumericalError


logger = logging.getLogger(__name__)

DEFAULT_GRID_SIZE = 4096
ROOT_MARGIN = 1e-12
ATOM_MODULUS_TOL = 1e-12
MASS_REFINEMENT_TOL = 1e-10
SZEGO_JUMP_LIMIT = 1.0
SZEGO_FLOOR = -50.0


class MeasureError(ConfigError):
    pass


class GridMismatchError(ValueError):
    pass


class SzegoClassError(NumericalError):
    pass


def quadrature_nodes(grid_size: int) -> np.ndarray:
    """Points t_j = exp(2*pi*i*j/M) of the uniform grid on T."""
    return np.exp(2j * np.pi * np.arange(grid_size) / grid_size)


def polynomial_roots(coeffs: Sequence[complex]) -> np.ndarray:
    """Roots of sum_k coeffs[k] z^k (coefficients in increasing powers)."""
    trimmed = np.trim_zeros(np.asarray(coeffs, dtype=complex), "b")
    if trimmed.size <= 1:
        return np.empty(0, dtype=complex)
    return np.roots(trimmed[::-1])


def _is_power_of_two(value: int) -> bool:
    return value > 0 and value & (value - 1) == 0


# ==============================================================================
# Densities
# ==============================================================================
@dataclass(frozen=True)
class LebesgueDensity:
    kind = "lebesgue"
    smooth = True

    def values(self, grid_size: int) -> np.ndarray:
        return np.ones(grid_size)


@dataclass(frozen=True)
class RationalDensity:
    """delta2 * |theta(conj t)|^2 / |phi(conj t)|^2 with coefficients in increasing powers."""

    theta: Tuple[complex, ...]
    phi: Tuple[complex, ...]
    delta2: float = 1.0

    kind = "rational"
    smooth = True

    def __post_init__(self):
        object.__setattr__(self, "theta", tuple(complex(c) for c in self.theta))
        object.__setattr__(self, "phi", tuple(complex(c) for c in self.phi))
        errors = []
        if not self.delta2 > 0:
            errors.append(f"density.delta2: must be positive, got {self.delta2}")
        if not any(abs(c) > 0 for c in self.theta):
            errors.append("density.theta: polynomial is identically zero")
        if not any(abs(c) > 0 for c in self.phi):
            errors.append("density.phi: polynomial is identically zero")
        else:
            for root in polynomial_roots(self.phi):
                if abs(root) <= 1.0 + ROOT_MARGIN:
                    errors.append(
                        f"density.phi: root {root:.6g} lies in the closed unit disk"
                    )
        if errors:
            raise MeasureError(errors)

    def evaluate(self, t: np.ndarray) -> np.ndarray:
        t_bar = np.conj(np.asarray(t, dtype=complex))
        numerator = np.polyval(np.asarray(self.theta)[::-1], t_bar)
        denominator = np.polyval(np.asarray(self.phi)[::-1], t_bar)
        return self.delta2 * np.abs(numerator) ** 2 / np.abs(denominator) ** 2

    def values(self, grid_size: int) -> np.ndarray:
        return self.evaluate(quadrature_nodes(grid_size))


@dataclass(frozen=True)
class TabulatedDensity:
    """Nonnegative samples on their own uniform grid, linearly interpolated elsewhere."""

    samples: Tuple[float, ...]

    kind = "tabulated"
    smooth = False

    def __post_init__(self):
        object.__setattr__(self, "samples", tuple(float(s) for s in self.samples))
        if not self.samples:
            raise MeasureError("density.samples: at least one sample is required")
        if any(not np.isfinite(s) or s < 0 for s in self.samples):
            raise MeasureError("density.samples: samples must be finite and nonnegative")

    def values(self, grid_size: int) -> np.ndarray:
        samples = np.asarray(self.samples)
        size = samples.size
        if size == grid_size:
            return samples.copy()
        positions = np.arange(grid_size) * size / grid_size
        periodic = np.append(samples, samples[0])
        return np.interp(positions, np.arange(size + 1), periodic)


Density = Union[LebesgueDensity, RationalDensity, TabulatedDensity]


# ==============================================================================
# Measures
# ==============================================================================
@dataclass(frozen=True)
class Atom:
    location: complex
    mass: float

    @classmethod
    def from_angle(cls, angle: float, mass: float) -> "Atom":
        return cls(complex(np.exp(1j * angle)), float(mass))

    @property
    def angle(self) -> float:
        return float(np.angle(self.location) % (2 * np.pi))


@dataclass(frozen=True)
class CircleMeasure:
    density: Density = field(default_factory=LebesgueDensity)
    atoms: Tuple[Atom, ...] = ()
    grid_size: int = DEFAULT_GRID_SIZE

    def __post_init__(self):
        object.__setattr__(self, "atoms", tuple(self.atoms))
        errors = []
        if not _is_power_of_two(self.grid_size):
            errors.append(f"grid_size: must be a power of two, got {self.grid_size}")
        for index, atom in enumerate(self.atoms):
            if not atom.mass > 0:
                errors.append(f"atoms[{index}].mass: must be positive, got {atom.mass}")
            if abs(abs(atom.location) - 1.0) > ATOM_MODULUS_TOL:
                errors.append(f"atoms[{index}].location: not on the unit circle")
        if errors:
            raise MeasureError(errors)
        if not self.weights.mean() + self.atom_masses.sum() > 0:
            raise MeasureError("measure: zero total mass")

    @cached_property
    def nodes(self) -> np.ndarray:
        return quadrature_nodes(self.grid_size)

    @cached_property
    def weights(self) -> np.ndarray:
        """Density values at the grid nodes (w.r.t. normalized Lebesgue measure)."""
        return np.asarray(self.density.values(self.grid_size), dtype=float)

    @cached_property
    def atom_locations(self) -> np.ndarray:
        return np.array([atom.location for atom in self.atoms], dtype=complex)

    @cached_property
    def atom_masses(self) -> np.ndarray:
        return np.array([atom.mass for atom in self.atoms], dtype=float)

    @property
    def has_atoms(self) -> bool:
        return bool(self.atoms)

    def refined(self) -> "CircleMeasure":
        return replace(self, grid_size=2 * self.grid_size)


@dataclass(frozen=True, eq=False)
class GridFunction:
    """Samples of a function on the measure grid plus its values at the atoms."""

    values: np.ndarray
    atom_values: np.ndarray = field(default_factory=lambda: np.empty(0, dtype=complex))

    @property
    def grid_size(self) -> int:
        return int(np.asarray(self.values).shape[-1])

    @classmethod
    def sample(cls, measure: CircleMeasure, func: Callable[[np.ndarray], np.ndarray]) -> "GridFunction":
        values = np.asarray(func(measure.nodes), dtype=complex)
        atom_values = np.asarray(func(measure.atom_locations), dtype=complex)
        return cls(np.broadcast_to(values, measure.nodes.shape).copy(), atom_values.reshape(-1))


class SzegoCheck(NamedTuple):
    is_szego: bool
    log_integral: float
    diagnostic: str


# ==============================================================================
# Quadrature
# ==============================================================================
def _density_mass(measure: CircleMeasure) -> float:
    return float(measure.weights.mean())


def grid_too_coarse(measure: CircleMeasure) -> bool:
    coarse = _density_mass(measure)
    fine = _density_mass(measure.refined())
    scale = max(abs(fine), np.finfo(float).tiny)
    return abs(coarse - fine) / scale > MASS_REFINEMENT_TOL


def total_mass(measure: CircleMeasure) -> float:
    """sigma(T): trapezoidal mass of the density plus the atom masses."""
    if grid_too_coarse(measure):
        logger.warning(
            f"Grid of {measure.grid_size} points is too coarse: total mass changes "
            f"by more than {MASS_REFINEMENT_TOL:g} under refinement"
        )
    return _density_mass(measure) + float(measure.atom_masses.sum())


def _check_grid(measure: CircleMeasure, func: GridFunction, name: str) -> None:
    if func.grid_size != measure.grid_size:
        raise GridMismatchError(
            f"{name} has {func.grid_size} samples but the measure grid has {measure.grid_size}"
        )
    if np.asarray(func.atom_values).size != len(measure.atoms):
        raise GridMismatchError(
            f"{name} carries {np.asarray(func.atom_values).size} atom values for "
            f"{len(measure.atoms)} atoms"
        )


def inner_product(measure: CircleMeasure, f: GridFunction, g: GridFunction) -> complex:
    """Integral of f * conj(g) against the measure."""
    _check_grid(measure, f, "f")
    _check_grid(measure, g, "g")
    continuous = np.mean(f.values * np.conj(g.values) * measure.weights)
    discrete = np.sum(f.atom_values * np.conj(g.atom_values) * measure.atom_masses)
    return complex(continuous + discrete)


def weighted_samples(
    measure: CircleMeasure, grid_values: np.ndarray, atom_values: Optional[np.ndarray] = None
) -> np.ndarray:
    """
    Stack a family of functions into a (M + atoms) x K matrix A with A^H A equal to
    the family's Gram matrix, so Euclidean orthogonalization of the columns of A is
    orthogonalization in L^2 of the measure.

    Args:
        grid_values: K x M samples, one row per function.
        atom_values: K x (number of atoms) values at the atoms.
    """
    grid_values = np.atleast_2d(np.asarray(grid_values, dtype=complex))
    if grid_values.shape[1] != measure.grid_size:
        raise GridMismatchError(
            f"family sampled on {grid_values.shape[1]} points, measure grid has {measure.grid_size}"
        )
    rows = [np.sqrt(measure.weights / measure.grid_size)[:, None] * grid_values.T]
    if measure.has_atoms:
        atom_values = np.atleast_2d(np.asarray(atom_values, dtype=complex))
        rows.append(np.sqrt(measure.atom_masses)[:, None] * atom_values.T)
    return np.vstack(rows)


def gram_matrix(
    measure: CircleMeasure, grid_values: np.ndarray, atom_values: Optional[np.ndarray] = None
) -> np.ndarray:
    """G[j, k] = integral of conj(f_j) * f_k."""
    samples = weighted_samples(measure, grid_values, atom_values)
    gram = samples.conj().T @ samples
    return (gram + gram.conj().T) / 2


# ==============================================================================
# Szegő function
# ==============================================================================
def _log_density_mean(measure: CircleMeasure, grid_size: int) -> Tuple[float, int]:
    values = measure.density.values(grid_size)
    zeros = int(np.count_nonzero(values <= 0))
    if zeros:
        return -np.inf, zeros
    return float(np.mean(np.log(values))), 0


def _polynomial_log_mean(coeffs: Sequence[complex]) -> float:
    """Jensen: integral of log|p| over T = log|leading coefficient| + sum of log max(1, |root|)."""
    trimmed = np.trim_zeros(np.asarray(coeffs, dtype=complex), "b")
    roots = polynomial_roots(trimmed)
    return float(np.log(abs(trimmed[-1])) + np.sum(np.log(np.maximum(1.0, np.abs(roots)))))


def _rational_log_integral(density: RationalDensity) -> float:
    return (
        float(np.log(density.delta2))
        + 2 * _polynomial_log_mean(density.theta)
        - 2 * _polynomial_log_mean(density.phi)
    )


def _rational_outer(density: RationalDensity, z: np.ndarray) -> np.ndarray:
    # |theta(conj t)| = |theta_c(t)| on T; roots of theta_c inside the disk are reflected
    theta_c = np.conj(np.trim_zeros(np.asarray(density.theta, dtype=complex), "b"))
    phi_c = np.conj(np.asarray(density.phi, dtype=complex))
    value = np.full(z.shape, np.sqrt(density.delta2) * abs(theta_c[-1]), dtype=complex)
    for root in polynomial_roots(theta_c):
        value = value * ((z - root) if abs(root) >= 1 else (1 - np.conj(root) * z))
    return value / np.polynomial.polynomial.polyval(z, phi_c)


def is_szego_class(measure: CircleMeasure) -> SzegoCheck:
    if isinstance(measure.density, RationalDensity):
        # zeros of theta on T leave log w integrable
        return SzegoCheck(True, _rational_log_integral(measure.density), "")
    coarse, zeros = _log_density_mean(measure, measure.grid_size)
    fine, _ = _log_density_mean(measure, 2 * measure.grid_size)
    if zeros:
        return SzegoCheck(False, -np.inf, f"density vanishes at {zeros} grid points")
    if coarse < SZEGO_FLOOR or fine < SZEGO_FLOOR:
        return SzegoCheck(False, fine, f"log-integral {fine:.6g} below {SZEGO_FLOOR:g}")
    if abs(coarse - fine) > SZEGO_JUMP_LIMIT:
        return SzegoCheck(
            False, fine, f"log-integral moved from {coarse:.6g} to {fine:.6g} under refinement"
        )
    return SzegoCheck(True, fine, "")


def _log_density_fourier(measure: CircleMeasure) -> np.ndarray:
    """Coefficients c_k = integral of log(w) * conj(t)^k dm, k = 0..M/2-1."""
    check = is_szego_class(measure)
    if not check.is_szego:
        raise SzegoClassError(f"measure is not in the Szegő class: {check.diagnostic}")
    log_weights = np.log(measure.weights)
    coefficients = np.fft.fft(log_weights) / measure.grid_size
    return coefficients[: measure.grid_size // 2]


def szego_function(measure: CircleMeasure, z: Union[complex, np.ndarray]) -> Union[complex, np.ndarray]:
    """
    Outer function S with |S|^2 = w on T and S(0) > 0, for |z| < 1.

    log S(z) = c_0/2 + sum_{k>=1} c_k z^k where c_k are the Fourier coefficients of
    log w; this is the Herglotz integral expanded in powers of z. Rational densities use
    the closed form sqrt(delta2) * theta_outer(z) / phi_c(z) instead, which stays valid
    when theta vanishes on T. Atoms are ignored.
    """
    z_array = np.asarray(z, dtype=complex)
    if np.any(np.abs(z_array) >= 1):
        raise ValueError("szego_function is defined inside the open unit disk only")
    if isinstance(measure.density, RationalDensity):
        at_zero = _rational_outer(measure.density, np.zeros(1, dtype=complex))[0]
        result = _rational_outer(measure.density, z_array) * (abs(at_zero) / at_zero)
        return complex(result) if np.ndim(z) == 0 else result
    coefficients = _log_density_fourier(measure).copy()
    coefficients[0] = coefficients[0].real / 2
    result = np.exp(np.polynomial.polynomial.polyval(z_array, coefficients))
    return complex(result) if np.ndim(z) == 0 else result


def boundary_modulus_gap(measure: CircleMeasure, radius: float = 0.99) -> float:
    """max_j | |S(r t_j)|^2 - w(t_j) | relative to max w."""
    if isinstance(measure.density, RationalDensity):
        modulus = np.abs(szego_function(measure, radius * measure.nodes)) ** 2
        return float(np.max(np.abs(modulus - measure.weights)) / np.max(measure.weights))
    coefficients = _log_density_fourier(measure)
    size = measure.grid_size
    series = np.zeros(size, dtype=complex)
    series[0] = coefficients[0].real / 2
    series[1 : size // 2] = coefficients[1:] * radius ** np.arange(1, size // 2)
    log_values = size * np.fft.ifft(series)
    modulus = np.exp(2 * log_values.real)
    return float(np.max(np.abs(modulus - measure.weights)) / np.max(measure.weights))


# ==============================================================================
# Builders
# ==============================================================================
def arma_spectral_measure(
    theta: Sequence[complex],
    phi: Sequence[complex],
    delta2: float = 1.0,
    grid_size: int = DEFAULT_GRID_SIZE,
) -> CircleMeasure:
    """Spectral measure of the ARMA process phi(Z) X = theta(Z) eps, eps ~ WN(delta2)."""
    return CircleMeasure(RationalDensity(tuple(theta), tuple(phi), delta2), (), grid_size)


def white_noise_measure(delta2: float = 1.0, grid_size: int = DEFAULT_GRID_SIZE) -> CircleMeasure:
    if delta2 == 1.0:
        return CircleMeasure(LebesgueDensity(), (), grid_size)
    return arma_spectral_measure((1.0,), (1.0,), delta2, grid_size)
