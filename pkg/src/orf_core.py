"""
Orthogonal rational functions by measure-weighted Gram–Schmidt.

Functions are represented by coefficient vectors over a basis system. Orthogonalization
runs on the columns of the weighted sample matrix A (rows sqrt(w_j/M) * w_s(t_j) and
sqrt(mass) * w_s(xi) at atoms), whose Euclidean inner product is the L^2(sigma) inner
product, so A = Q R gives the orthonormal family as Q = A R^{-1}.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import NamedTuple, Sequence, Tuple

import numpy as np
import pandas as pd
from scipy import linalg

from basis_systems import BasisSystem
from circle_measure import CircleMeasure, weighted_samples
from errors import NumericalError


logger = logging.getLogger(__name__)

RANK_TOL = 1e-12


class SingularGramError(NumericalError):
    pass


def modified_gram_schmidt(
    samples: np.ndarray, reorthogonalize: bool = True, rank_tol: float = RANK_TOL
) -> Tuple[np.ndarray, np.ndarray]:
    """
    Thin QR of ``samples`` by modified Gram–Schmidt with one full reorthogonalization
    pass. R has a real positive diagonal.

    Raises:
        SingularGramError: a column's residual squared norm falls below rank_tol * trace.
    """
    samples = np.asarray(samples, dtype=complex)
    columns = samples.shape[1]
    q = np.zeros_like(samples)
    r = np.zeros((columns, columns), dtype=complex)
    trace = float(np.sum(np.abs(samples) ** 2))
    passes = 2 if reorthogonalize else 1
    for k in range(columns):
        v = samples[:, k].copy()
        for _ in range(passes):
            for i in range(k):
                h = np.vdot(q[:, i], v)
                r[i, k] += h
                v -= h * q[:, i]
        norm = float(np.linalg.norm(v))
        if norm**2 <= rank_tol * trace:
            condition = np.linalg.cond(samples) ** 2
            raise SingularGramError(
                f"basis element {k} is numerically dependent on its predecessors "
                f"(residual {norm**2:.3g} vs trace {trace:.3g}, Gram condition ~{condition:.3g})"
            )
        r[k, k] = norm
        q[:, k] = v / norm
    return q, r


def _triangular_inverse(r: np.ndarray) -> np.ndarray:
    return linalg.solve_triangular(r, np.eye(r.shape[0], dtype=complex), lower=False)


def _last_monic(samples: np.ndarray) -> Tuple[np.ndarray, float]:
    """Coefficients (over the given column order) of the residual of the last column."""
    _, r = modified_gram_schmidt(samples)
    inverse = _triangular_inverse(r)
    norm = float(r[-1, -1].real)
    return inverse[:, -1] * norm, norm


def _family_samples(system: BasisSystem, measure: CircleMeasure, labels: Sequence[int]) -> np.ndarray:
    grid_values = system.bilateral_values(labels, measure.nodes)
    atom_values = system.bilateral_values(labels, measure.atom_locations) if measure.has_atoms else None
    return weighted_samples(measure, grid_values, atom_values)


# ==============================================================================
# One-sided families
# ==============================================================================
@dataclass(frozen=True, eq=False)
class OrfFamily:
    system: BasisSystem
    measure: CircleMeasure
    coeffs: np.ndarray
    monic_coeffs: np.ndarray
    reversed_coeffs: np.ndarray
    norms: np.ndarray
    reversed_norms: np.ndarray
    gram: np.ndarray

    @property
    def n(self) -> int:
        return self.system.n

    def orthonormality_residual(self) -> float:
        overlaps = self.coeffs.conj() @ self.gram @ self.coeffs.T
        return float(np.max(np.abs(overlaps - np.eye(self.n + 1))))


class ReversedOrf(NamedTuple):
    monic: np.ndarray
    orthonormal: np.ndarray
    norm: float


def reversed(system: BasisSystem, measure: CircleMeasure, n: int) -> ReversedOrf:
    """Phi*_n = w_0 minus its projection onto span{w_1..w_n}: orthonormalize w_n, ..., w_0."""
    system = system.restricted(n)
    samples = _family_samples(system, measure, range(n + 1))
    flipped, norm = _last_monic(samples[:, ::-1])
    monic = flipped[::-1]
    return ReversedOrf(monic, monic / norm, norm)


def orthonormalize(system: BasisSystem, measure: CircleMeasure, n: int) -> OrfFamily:
    system = system.restricted(n)
    samples = _family_samples(system, measure, range(n + 1))
    _, r = modified_gram_schmidt(samples)
    coeffs = _triangular_inverse(r).T
    norms = np.diag(r).real.copy()
    monic = coeffs * norms[:, None]

    reversed_coeffs = np.zeros((n + 1, n + 1), dtype=complex)
    reversed_norms = np.zeros(n + 1)
    for k in range(n + 1):
        flipped, reversed_norms[k] = _last_monic(samples[:, k::-1])
        reversed_coeffs[k, : k + 1] = flipped[::-1]

    gram = samples.conj().T @ samples
    family = OrfFamily(
        system, measure, coeffs, monic, reversed_coeffs, norms, reversed_norms, (gram + gram.conj().T) / 2
    )
    logger.debug(
        f"Orthonormalized {system.system_id.value} up to n={n}: "
        f"residual {family.orthonormality_residual():.3g}"
    )
    return family


def eval_orf(family: "OrfFamily | LaurentOrfFamily", k: int, t) -> complex | np.ndarray:
    """phi_k(t) (or chi_k / x_k for Laurent families, which live on T)."""
    if isinstance(family, LaurentOrfFamily):
        if not 0 <= k < len(family.labels):
            raise ValueError(f"index {k} outside the Laurent family")
        values = family.system.bilateral_values(family.labels[: k + 1], np.atleast_1d(t))
        result = family.coeffs[k, : k + 1] @ values
    else:
        if not 0 <= k <= family.n:
            raise ValueError(f"index {k} outside 0..{family.n}")
        result = family.coeffs[k, : k + 1] @ family.system.values(np.atleast_1d(t), upto=k)
    return complex(result[0]) if np.ndim(t) == 0 else result


# ==============================================================================
# Reproducing kernel and the para-conjugate starred function
# ==============================================================================
def kernel(family: OrfFamily, n: int, z: complex, w: complex) -> complex:
    """k_n(z, w) = sum_{k<=n} phi_k(z) conj(phi_k(w))."""
    at_z = family.coeffs[: n + 1, : n + 1] @ family.system.values(np.array([z]), upto=n)[:, 0]
    at_w = family.coeffs[: n + 1, : n + 1] @ family.system.values(np.array([w]), upto=n)[:, 0]
    return complex(np.sum(at_z * np.conj(at_w)))


def starred_coeffs(family: OrfFamily, n: int) -> np.ndarray:
    """
    Coefficients of k_n(., alpha_n) / sqrt(k_n(alpha_n, alpha_n)): the unit vector of L_n
    orthogonal to every function vanishing at alpha_n, positive at alpha_n.
    """
    alpha = family.system.points[n]
    values = family.coeffs[: n + 1, : n + 1] @ family.system.values(np.array([alpha]), upto=n)[:, 0]
    weight = float(np.sum(np.abs(values) ** 2))
    return (np.conj(values) @ family.coeffs[: n + 1, : n + 1]) / np.sqrt(weight)


def eval_starred(family: OrfFamily, n: int, t) -> complex | np.ndarray:
    coefficients = starred_coeffs(family, n)
    result = coefficients @ family.system.values(np.atleast_1d(t), upto=n)
    return complex(result[0]) if np.ndim(t) == 0 else result


# ==============================================================================
# Laurent families
# ==============================================================================
def ordered_labels(ordering: str, count: int) -> Tuple[int, ...]:
    """chi: 0, 1, -1, 2, -2, ...; x: 0, -1, 1, -2, 2, ..."""
    if ordering not in ("chi", "x"):
        raise ValueError(f"ordering must be 'chi' or 'x', got {ordering!r}")
    sign = 1 if ordering == "chi" else -1
    labels = [0]
    step = 1
    while len(labels) < count:
        labels.append(sign * step)
        labels.append(-sign * step)
        step += 1
    return tuple(labels[:count])


@dataclass(frozen=True, eq=False)
class LaurentOrfFamily:
    system: BasisSystem
    measure: CircleMeasure
    ordering: str
    labels: Tuple[int, ...]
    coeffs: np.ndarray
    monic_coeffs: np.ndarray
    norms: np.ndarray
    samples: np.ndarray

    @property
    def gram(self) -> np.ndarray:
        gram = self.samples.conj().T @ self.samples
        return (gram + gram.conj().T) / 2

    def orthonormality_residual(self) -> float:
        overlaps = self.coeffs.conj() @ self.gram @ self.coeffs.T
        return float(np.max(np.abs(overlaps - np.eye(len(self.labels)))))

    def monic_starred(self, m: int) -> Tuple[np.ndarray, float]:
        """
        w_0 minus its projection onto the elements at positions 1..m; coefficients over
        positions 0..m with coefficient 1 on w_0, and the residual norm.
        """
        if not 1 <= m < len(self.labels):
            raise ValueError(f"position {m} outside 1..{len(self.labels) - 1}")
        order = list(range(1, m + 1)) + [0]
        coefficients, norm = _last_monic(self.samples[:, order])
        result = np.zeros(m + 1, dtype=complex)
        result[order] = coefficients
        return result, norm


def laurent_families(
    system: BasisSystem, measure: CircleMeasure, n: int, ordering: str = "chi"
) -> LaurentOrfFamily:
    """Orthonormalize the 2n+1 bilateral elements w_0, w_{±1}, ..., w_{±n} in the given order."""
    system = system.restricted(n)
    labels = ordered_labels(ordering, 2 * n + 1)
    samples = _family_samples(system, measure, labels)
    _, r = modified_gram_schmidt(samples)
    coeffs = _triangular_inverse(r).T
    norms = np.diag(r).real.copy()
    return LaurentOrfFamily(system, measure, ordering, labels, coeffs, coeffs * norms[:, None], norms, samples)


def format_family(family: OrfFamily) -> str:
    """Plain-text table of phi_k coefficients and norms."""
    columns = {f"w_{s}": [f"{c:.10g}" if s <= k else "" for k, c in enumerate(family.coeffs[:, s])]
               for s in range(family.n + 1)}
    table = pd.DataFrame(columns, index=[f"phi_{k}" for k in range(family.n + 1)])
    table["norm"] = [f"{v:.12g}" for v in family.norms]
    return table.to_string()
