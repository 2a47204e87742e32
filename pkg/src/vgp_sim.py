"""
Sampling and filtering of varying Gaussian processes.

Paths are stored as an N x (n+1) complex array, one row per realization, column k holding
X_{start+k}. Covariances follow the GT convention C[j, k] = E(X_k conj(X_j)), so the
empirical estimate is X^H X / N.

Random numbers come from one Philox stream per fixed-size block of paths, keyed by
(seed, block index); blocks are drawn on a thread pool and reassembled in order, so the
output depends only on the seed and the block size.
"""

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor, as_completed
from dataclasses import dataclass, field
from typing import NamedTuple, Optional, Sequence, Tuple, Union

import numpy as np
from scipy import linalg, signal
from tqdm import tqdm

from basis_systems import BasisSystem, TriangularMatrix
from circle_measure import CircleMeasure, polynomial_roots
from errors import ConfigError, NumericalError
from moment_engine import GtMatrix, conjugate_gt, gt_from_measure


logger = logging.getLogger(__name__)

BLOCK_SIZE = 4096
SPECTRAL_BLOCK_SIZE = 512
DEFAULT_WORKERS = 4
DEFAULT_BINS = 2048
MIN_NODES_PER_BIN = 4
CLIP_TOL = 1e-10
MEAN_FLAG_SIGMAS = 5.0
CAUSALITY_MARGIN = 1e-12
RESULTANT_TOL = 1e-10
MAX_EXPANSION_TERMS = 1 << 20


class SamplingError(ConfigError):
    pass


class IndefiniteCovarianceError(NumericalError):
    pass


class OrderMismatchError(ConfigError):
    pass


class NotCausalError(ConfigError):
    pass


class CommonRootError(ConfigError):
    pass


class InsufficientWindowError(ConfigError):
    pass


class SingularSectionError(NumericalError):
    pass


CovarianceLike = Union[GtMatrix, np.ndarray]


def _as_matrix(covariance: CovarianceLike) -> np.ndarray:
    if isinstance(covariance, GtMatrix):
        return covariance.matrix
    matrix = np.asarray(covariance, dtype=complex)
    return (matrix + matrix.conj().T) / 2


# ==============================================================================
# Sample paths
# ==============================================================================
@dataclass(frozen=True, eq=False)
class SamplePaths:
    values: np.ndarray
    seed: int
    covariance: Optional[np.ndarray] = None
    start: int = 0
    mean_flags: Tuple[int, ...] = field(default=(), init=False)

    def __post_init__(self):
        values = np.asarray(self.values, dtype=complex)
        if values.ndim != 2:
            raise ValueError(f"paths must be a 2-d array, got shape {values.shape}")
        object.__setattr__(self, "values", values)
        if self.covariance is not None and values.shape[0] > 0:
            variances = np.abs(np.diag(self.covariance))
            bound = MEAN_FLAG_SIGMAS * np.sqrt(variances / values.shape[0])
            means = np.abs(values.mean(axis=0))
            flags = tuple(int(k) for k in np.flatnonzero(means > bound))
            object.__setattr__(self, "mean_flags", flags)
            if flags:
                logger.warning(f"Empirical means exceed {MEAN_FLAG_SIGMAS:g} sigma at coordinates {list(flags)}")

    @property
    def count(self) -> int:
        return self.values.shape[0]

    @property
    def n(self) -> int:
        return self.values.shape[1] - 1


def _validate_draw(count: int, seed: int) -> None:
    errors = []
    if count < 0:
        errors.append(f"paths: must be >= 0, got {count}")
    if not 0 <= seed < 2**64:
        errors.append(f"seed: must be a 64-bit unsigned integer, got {seed}")
    if errors:
        raise SamplingError(errors)


def block_normals(seed: int, block: int, rows: int, columns: int) -> np.ndarray:
    """Standard circularly-symmetric complex normals (E|z|^2 = 1) of one block."""
    generator = np.random.Generator(np.random.Philox(np.random.SeedSequence([seed, block])))
    real = generator.standard_normal((rows, columns))
    imag = generator.standard_normal((rows, columns))
    return (real + 1j * imag) / np.sqrt(2)


def _draw_block(transform: np.ndarray, seed: int, block: int, rows: int) -> np.ndarray:
    return block_normals(seed, block, rows, transform.shape[0]) @ transform


def _draw(
    transform: np.ndarray, count: int, seed: int, block_size: int, workers: int, desc: str
) -> np.ndarray:
    """Rows z @ transform for ``count`` independent standard complex normal rows z."""
    output = np.empty((count, transform.shape[1]), dtype=complex)
    if count == 0:
        return output
    blocks = [(b, min(block_size, count - b * block_size)) for b in range(-(-count // block_size))]
    logger.debug(f"Drawing {count} paths in {len(blocks)} blocks of {block_size} on {workers} workers")

    with ThreadPoolExecutor(max_workers=workers) as executor:
        future_to_block = {
            executor.submit(_draw_block, transform, seed, block, rows): block
            for block, rows in blocks
        }
        progress_bar = tqdm(
            as_completed(future_to_block),
            total=len(blocks),
            desc=desc,
            disable=len(blocks) < 2,
        )
        for future in progress_bar:
            block = future_to_block[future]
            output[block * block_size : block * block_size + blocks[block][1]] = future.result()
    return output


def covariance_factor(covariance: CovarianceLike) -> np.ndarray:
    """
    A with A A^H = C from the eigendecomposition of C. Eigenvalues above
    -CLIP_TOL * trace are clipped to zero.

    Raises:
        IndefiniteCovarianceError: an eigenvalue lies below the clipping tolerance.
    """
    matrix = _as_matrix(covariance)
    eigenvalues, eigenvectors = np.linalg.eigh(matrix)
    trace = abs(float(np.trace(matrix).real))
    if eigenvalues.size and eigenvalues[0] < -CLIP_TOL * trace:
        raise IndefiniteCovarianceError(
            f"covariance is indefinite: eigenvalue {eigenvalues[0]:.6g} below {-CLIP_TOL * trace:.3g}"
        )
    return eigenvectors * np.sqrt(np.clip(eigenvalues, 0.0, None))


def sample_paths(
    covariance: CovarianceLike,
    count: int,
    seed: int,
    block_size: int = BLOCK_SIZE,
    workers: int = DEFAULT_WORKERS,
) -> SamplePaths:
    """Circularly-symmetric Gaussian vectors with E(X_k conj X_j) = C[j, k]."""
    _validate_draw(count, seed)
    matrix = _as_matrix(covariance)
    factor = covariance_factor(matrix)
    # X^T = conj(A) z gives E(X X^H) = conj(C), i.e. E(X_k conj X_j) = C[j, k]
    values = _draw(factor.conj().T, count, seed, block_size, workers, desc="Sampling paths")
    start = covariance.start if isinstance(covariance, GtMatrix) else 0
    return SamplePaths(values, seed, matrix, start)


class SpectralBins(NamedTuple):
    representatives: np.ndarray
    masses: np.ndarray


def spectral_bins(measure: CircleMeasure, bins: int) -> SpectralBins:
    """
    Arc midpoints and absolutely continuous masses sigma([2 pi b / B, 2 pi (b+1) / B)).
    Atoms are not included.
    """
    if bins < 1:
        raise SamplingError(f"bins: must be >= 1, got {bins}")
    per_bin = max(MIN_NODES_PER_BIN, -(-measure.grid_size // bins))
    weights = measure.density.values(bins * per_bin)
    masses = weights.reshape(bins, per_bin).sum(axis=1) / (bins * per_bin)
    representatives = np.exp(2j * np.pi * (np.arange(bins) + 0.5) / bins)
    return SpectralBins(representatives, masses)


def spectral_sample(
    system: BasisSystem,
    measure: CircleMeasure,
    n: int,
    count: int,
    seed: int,
    bins: int = DEFAULT_BINS,
    block_size: int = SPECTRAL_BLOCK_SIZE,
    workers: int = DEFAULT_WORKERS,
) -> SamplePaths:
    """
    X_k = sum over bins of w_k(xi_b) Z_b plus sum over atoms of w_k(xi) Z_xi, with
    independent Z_b of variance sigma(I_b) and Z_xi of variance equal to the atom mass.
    """
    _validate_draw(count, seed)
    system = system.restricted(n)
    representatives, masses = spectral_bins(measure, bins)
    if measure.has_atoms:
        representatives = np.concatenate([representatives, measure.atom_locations])
        masses = np.concatenate([masses, measure.atom_masses])
    transform = np.sqrt(masses)[:, None] * system.values(representatives).T
    values = _draw(transform, count, seed, block_size, workers, desc="Spectral sampling")
    analytic = gt_from_measure(system, measure).matrix
    return SamplePaths(values, seed, analytic)


def empirical_covariance(paths: Union[SamplePaths, np.ndarray]) -> np.ndarray:
    """C_hat[j, k] = mean over paths of X_k conj(X_j)."""
    values = paths.values if isinstance(paths, SamplePaths) else np.asarray(paths, dtype=complex)
    if values.shape[0] == 0:
        raise SamplingError("paths: empirical covariance needs at least one path")
    return values.conj().T @ values / values.shape[0]


def covariance_gap(empirical: np.ndarray, analytic: np.ndarray) -> float:
    """Max-norm distance relative to c_00."""
    return float(np.max(np.abs(empirical - analytic)) / abs(analytic[0, 0].real))


def white_noise_covariance(n: int, delta2: float = 1.0) -> np.ndarray:
    if delta2 <= 0:
        raise SamplingError(f"delta2: must be positive, got {delta2}")
    return delta2 * np.eye(n + 1, dtype=complex)


# ==============================================================================
# Triangular (non-stationary) filters
# ==============================================================================
def apply_triangular_filter(
    target: Union[SamplePaths, GtMatrix, np.ndarray], change: TriangularMatrix
) -> Union[SamplePaths, GtMatrix, np.ndarray]:
    """
    X_k = sum_{s<=k} D[s, k] Y_s on paths, and D^H C D on covariances.
    """
    order = target.values.shape[1] if isinstance(target, SamplePaths) else np.shape(
        target.matrix if isinstance(target, GtMatrix) else target
    )[0]
    if order != change.order:
        raise OrderMismatchError(f"filter of order {change.order} applied to {order} coordinates")

    if isinstance(target, SamplePaths):
        covariance = None
        if target.covariance is not None:
            covariance = change.matrix.conj().T @ target.covariance @ change.matrix
        return SamplePaths(target.values @ change.matrix, target.seed, covariance, target.start)
    if isinstance(target, GtMatrix):
        return conjugate_gt(target, change)
    matrix = _as_matrix(target)
    return change.matrix.conj().T @ matrix @ change.matrix


# ==============================================================================
# Stationary filters and VARMA expansions
# ==============================================================================
@dataclass(frozen=True, eq=False)
class FilterSpec:
    """psi[i] is the coefficient psi_j with j = i - lower, over j in [-lower, upper]."""

    psi: np.ndarray
    R: float = 1.0
    lower: int = 0
    tail_bound: float = 0.0

    def __post_init__(self):
        psi = np.atleast_1d(np.asarray(self.psi, dtype=complex))
        if psi.size == 0:
            raise ConfigError("filter.psi: needs at least one coefficient")
        if self.R < 1:
            raise ConfigError(f"filter.R: must be >= 1, got {self.R}")
        if not 0 <= self.lower < psi.size:
            raise ConfigError(f"filter.lower: {self.lower} outside 0..{psi.size - 1}")
        object.__setattr__(self, "psi", psi)
        if not np.isfinite(self.weighted_norm):
            raise ConfigError("filter.psi: weighted norm sum |psi_j| R^|j| is not finite")

    @property
    def upper(self) -> int:
        return self.psi.size - 1 - self.lower

    @property
    def indices(self) -> np.ndarray:
        return np.arange(-self.lower, self.upper + 1)

    @property
    def weighted_norm(self) -> float:
        return float(np.sum(np.abs(self.psi) * float(self.R) ** np.abs(self.indices)))

    def evaluate(self, z) -> complex | np.ndarray:
        z = np.asarray(z, dtype=complex)
        powers = z[..., None] ** self.indices
        return powers @ self.psi

    @classmethod
    def identity(cls) -> "FilterSpec":
        return cls(np.array([1.0 + 0j]))


def _sylvester(p: np.ndarray, q: np.ndarray) -> np.ndarray:
    """Sylvester matrix of p and q given in decreasing powers."""
    m, n = p.size - 1, q.size - 1
    matrix = np.zeros((m + n, m + n), dtype=complex)
    for row in range(n):
        matrix[row, row : row + m + 1] = p
    for row in range(m):
        matrix[n + row, row : row + n + 1] = q
    return matrix


def normalized_resultant(theta: Sequence[complex], phi: Sequence[complex]) -> float:
    """|Res(theta, phi)| scaled by ||theta||^deg(phi) ||phi||^deg(theta); 1 when either is constant."""
    p = np.trim_zeros(np.asarray(theta, dtype=complex), "b")[::-1]
    q = np.trim_zeros(np.asarray(phi, dtype=complex), "b")[::-1]
    if p.size <= 1 or q.size <= 1:
        return 1.0
    p = p / np.linalg.norm(p)
    q = q / np.linalg.norm(q)
    return float(abs(np.linalg.det(_sylvester(p, q))))


def _tail_sums(weighted: np.ndarray, remainder: float) -> np.ndarray:
    """tails[J] = sum_{j > J} weighted[j] + remainder."""
    reverse = np.cumsum(weighted[::-1])[::-1]
    return np.append(reverse[1:], 0.0) + remainder


def varma_causal_expansion(
    theta: Sequence[complex], phi: Sequence[complex], R: float = 1.0, tol: float = 1e-14
) -> FilterSpec:
    """
    One-sided expansion psi(z) = theta(z) / phi(z) = sum_j psi_j z^j, truncated at the
    first J with sum_{j>J} |psi_j| R^j < tol. Coefficients are in increasing powers.

    Raises:
        NotCausalError: phi has a root in the closed disk of radius R.
        CommonRootError: theta and phi share a root.
    """
    theta = np.trim_zeros(np.atleast_1d(np.asarray(theta, dtype=complex)), "b")
    phi = np.trim_zeros(np.atleast_1d(np.asarray(phi, dtype=complex)), "b")
    errors = []
    if theta.size == 0:
        errors.append("filter.theta: polynomial is zero")
    if phi.size == 0 or phi[0] == 0:
        errors.append("filter.phi: constant coefficient must be nonzero")
    if R < 1:
        errors.append(f"filter.R: must be >= 1, got {R}")
    if tol <= 0:
        errors.append(f"filter.tol: must be positive, got {tol}")
    if errors:
        raise ConfigError(errors)

    roots = polynomial_roots(phi)
    if roots.size and np.min(np.abs(roots)) <= R + CAUSALITY_MARGIN:
        closest = roots[np.argmin(np.abs(roots))]
        raise NotCausalError(f"filter.phi: root {closest:.6g} lies in |z| <= {R:g}; not causal at this R")
    resultant = normalized_resultant(theta, phi)
    if resultant <= RESULTANT_TOL:
        raise CommonRootError(f"filter: theta and phi share a root (normalized resultant {resultant:.3g})")

    # geometric bound on the terms past the computed window; the length factor covers repeated roots
    q = R / float(np.min(np.abs(roots))) if roots.size else 0.0
    length = 64
    while True:
        impulse = np.zeros(length, dtype=complex)
        impulse[0] = 1
        psi = signal.lfilter(theta, phi, impulse)
        weighted = np.abs(psi) * float(R) ** np.arange(length)
        remainder = 0.0 if q == 0 else float(weighted[-1]) * q / (1 - q) * length
        tails = _tail_sums(weighted, remainder)
        hits = np.flatnonzero(tails < tol)
        if hits.size and tails[-1] < tol * 1e-3 or length >= MAX_EXPANSION_TERMS:
            break
        length *= 2
    if not hits.size:
        raise NumericalError(f"filter: tail bound did not reach {tol:g} within {length} terms")
    cutoff = int(hits[0])
    logger.debug(f"Causal expansion truncated at J={cutoff}, tail {tails[cutoff]:.3g}")
    return FilterSpec(psi[: cutoff + 1], R, 0, float(tails[cutoff]))


class FilteredCovariance(NamedTuple):
    matrix: np.ndarray
    start: int


def band_matrix(psi: FilterSpec, order: int) -> Tuple[np.ndarray, int]:
    """
    Psi with Y = X @ Psi on windows X_{a..a+order-1} -> Y_{a+upper..a+order-1-lower},
    Y_m = sum_j psi_j X_{m-j}. Returns Psi and the offset of the first output index.
    """
    outputs = order - psi.upper - psi.lower
    if outputs < 1:
        raise InsufficientWindowError(
            f"covariance window of {order} indices is too short for a filter supported on "
            f"[{-psi.lower}, {psi.upper}]"
        )
    matrix = np.zeros((order, outputs), dtype=complex)
    for column in range(outputs):
        m = column + psi.upper
        for j, coefficient in zip(psi.indices, psi.psi):
            matrix[m - j, column] = coefficient
    return matrix, psi.upper


def filtered_covariance(covariance: CovarianceLike, psi: FilterSpec, start: int | None = None) -> FilteredCovariance:
    """C_Y = Psi^H C_X Psi on the largest output window the input window supports."""
    if start is None:
        start = covariance.start if isinstance(covariance, GtMatrix) else 0
    matrix = _as_matrix(covariance)
    band, offset = band_matrix(psi, matrix.shape[0])
    output = band.conj().T @ matrix @ band
    return FilteredCovariance((output + output.conj().T) / 2, start + offset)


def filter_paths(paths: SamplePaths, psi: FilterSpec, start: int | None = None) -> SamplePaths:
    """Y_m = sum_j psi_j X_{m-j} applied to every path."""
    start = paths.start if start is None else start
    band, offset = band_matrix(psi, paths.values.shape[1])
    covariance = None
    if paths.covariance is not None:
        covariance = band.conj().T @ paths.covariance @ band
    return SamplePaths(paths.values @ band, paths.seed, covariance, start + offset)


def classical_filtered_autocovariance(
    autocovariance: np.ndarray, psi: FilterSpec, lags: int
) -> np.ndarray:
    """c~_h = sum_{j,k} psi_j conj(psi_k) c_{h-j+k} for h = 0..lags, with c_{-h} = conj(c_h)."""
    support = psi.indices

    def c(h: int) -> complex:
        return autocovariance[h] if h >= 0 else np.conj(autocovariance[-h])

    needed = lags + support.max() - support.min()
    if autocovariance.size <= needed:
        raise InsufficientWindowError(f"autocovariance needs lags up to {needed}, got {autocovariance.size - 1}")
    return np.array([
        sum(pj * np.conj(pk) * c(h - j + k) for j, pj in zip(support, psi.psi) for k, pk in zip(support, psi.psi))
        for h in range(lags + 1)
    ])


# ==============================================================================
# Shift norm
# ==============================================================================
def shift_norm_estimate(system: BasisSystem, measure: CircleMeasure, n: int) -> float:
    """
    Lower bound on the norm of w_k -> w_{k-1}: the largest sqrt of a generalized
    eigenvalue of (Gram(w_0..w_{m-1}), Gram(w_1..w_m)) over m = 1..n.
    """
    if n < 1:
        raise ConfigError(f"n: shift-norm estimate needs n >= 1, got {n}")
    gram = gt_from_measure(system.restricted(n), measure).matrix
    best = 0.0
    for m in range(1, n + 1):
        try:
            eigenvalues = linalg.eigh(gram[:m, :m], gram[1 : m + 1, 1 : m + 1], eigvals_only=True)
        except linalg.LinAlgError as exc:
            raise SingularSectionError(f"could not solve the section of size {m}: {exc}") from exc
        best = max(best, float(eigenvalues[-1]))
    return float(np.sqrt(best))


