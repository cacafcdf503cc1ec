"""Collective spin operators on the symmetric (Dicke) subspace of N spin-1/2.

Basis index ``k = 0..N`` labels ``|S, m>`` with ``m = k - N/2`` (ascending in m).
Every module and every file output uses this ordering.
"""

from dataclasses import dataclass
from fractions import Fraction

import numpy as np

MAX_SPINS = 512

HERMITIAN_ATOL = 1e-12


class SizeCapError(ValueError):
    pass


@dataclass(frozen=True)
class SpinSector:
    """Maximal-spin sector S = N/2 of ``n_spins`` spin-1/2 particles."""

    n_spins: int
    cap: int = MAX_SPINS

    def __post_init__(self):
        if int(self.n_spins) != self.n_spins or self.n_spins < 1:
            raise ValueError(f"n_spins must be a positive integer, got {self.n_spins!r}")
        if self.n_spins > self.cap:
            raise SizeCapError(f"n_spins={self.n_spins} exceeds cap {self.cap}")

    @property
    def total_spin(self) -> Fraction:
        return Fraction(self.n_spins, 2)

    @property
    def dim(self) -> int:
        return self.n_spins + 1

    def m_of(self, k: int) -> Fraction:
        return Fraction(2 * k - self.n_spins, 2)

    def m_values(self) -> np.ndarray:
        # k - N/2 evaluated once at fill time; exact for half-integers in binary
        return np.arange(self.dim, dtype=float) - self.n_spins / 2


@dataclass(frozen=True)
class ParityPartition:
    even_indices: np.ndarray
    odd_indices: np.ndarray

    def blocks(self):
        return (self.even_indices, self.odd_indices)

    def block_of(self, k: int) -> int:
        return k % 2


def check_hermitian(matrix, atol=HERMITIAN_ATOL, name="operator"):
    """Return ``matrix`` unchanged after asserting it equals its conjugate transpose."""
    matrix = np.asarray(matrix)
    if matrix.ndim != 2 or matrix.shape[0] != matrix.shape[1]:
        raise ValueError(f"{name} must be square, got shape {matrix.shape}")
    err = np.max(np.abs(matrix - matrix.conj().T), initial=0.0)
    if err > atol:
        raise ValueError(f"{name} is not Hermitian (max deviation {err:.3e})")
    return matrix


def build_sz(sector: SpinSector) -> np.ndarray:
    return np.diag(sector.m_values())


def build_splus(sector: SpinSector) -> np.ndarray:
    """Raising operator with <m+1|S+|m> = sqrt(S(S+1) - m(m+1)), real and nonnegative."""
    n = sector.n_spins
    k = np.arange(n)
    # S(S+1) - m(m+1) = (S - m)(S + m + 1) = (N - k)(k + 1), exact in integers
    amp = np.sqrt(((n - k) * (k + 1)).astype(float))
    sp = np.zeros((sector.dim, sector.dim))
    sp[k + 1, k] = amp
    return sp


def build_sminus(sector: SpinSector) -> np.ndarray:
    return build_splus(sector).T.copy()


def build_sx_sy(sector: SpinSector):
    sp = build_splus(sector).astype(complex)
    sm = sp.conj().T
    sx = (sp + sm) / 2
    sy = (sp - sm) / 2j
    return sx, sy


def parity_partition(sector: SpinSector) -> ParityPartition:
    k = np.arange(sector.dim)
    return ParityPartition(even_indices=k[k % 2 == 0], odd_indices=k[k % 2 == 1])
