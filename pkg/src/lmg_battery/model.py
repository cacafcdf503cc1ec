"""Charging Hamiltonian, drive protocols and the counterdiabatic correction.

H0(t) = lambda(t) * H1 + Sz, with

    H1 = [(1+g)(S+S- + S-S+ - N) + (1-g)(S+^2 + S-^2)] / (2N)

The counterdiabatic term uses the off-diagonal spectral form

    Hcd = i * dlambda/dt * sum_{m != n} |m><m|H1|n><n| / (E_n - E_m)

evaluated inside each parity block (H1 has no cross-parity elements).
"""

from dataclasses import dataclass, field
from functools import lru_cache
import math

import numpy as np

from .spin import (
    ParityPartition,
    SpinSector,
    build_splus,
    build_sz,
    parity_partition,
)

GAP_TOL = 1e-10
COUPLING_TOL = 1e-10
CROSS_BLOCK_TOL = 1e-12

PROTOCOLS = ("constant", "sinusoid", "sta")


class DegenerateGapError(ArithmeticError):
    """Two coupled levels in the same parity block are (numerically) degenerate."""


@dataclass(frozen=True)
class DriveProtocol:
    kind: str
    amplitude: float
    frequency: float = 0.0

    def __post_init__(self):
        if self.kind not in ("constant", "sinusoid"):
            raise ValueError(f"unknown drive kind {self.kind!r}")
        if not math.isfinite(self.amplitude):
            raise ValueError("drive amplitude must be finite")
        if self.kind == "sinusoid" and not (self.frequency > 0 and math.isfinite(self.frequency)):
            raise ValueError(f"sinusoid drive needs frequency > 0, got {self.frequency!r}")

    @classmethod
    def constant(cls, amplitude):
        return cls("constant", float(amplitude), 0.0)

    @classmethod
    def sinusoid(cls, amplitude, frequency):
        return cls("sinusoid", float(amplitude), float(frequency))

    @property
    def period(self):
        if self.kind != "sinusoid":
            return math.inf
        return 2 * math.pi / self.frequency


@dataclass(frozen=True)
class BatteryParams:
    sector: SpinSector
    gamma: float
    drive: DriveProtocol
    sta_enabled: bool = False
    gap_tol: float = GAP_TOL

    def __post_init__(self):
        if not math.isfinite(self.gamma):
            raise ValueError("gamma must be finite")

    @classmethod
    def build(cls, n_spins, gamma, amplitude, omega=None, protocol="sta", gap_tol=GAP_TOL):
        """Shorthand for the three charging protocols.

        ``protocol`` is one of ``"constant"`` (lambda = A), ``"sinusoid"``
        (lambda = A sin(omega t)) or ``"sta"`` (sinusoid plus counterdiabatic term).
        """
        if protocol not in PROTOCOLS:
            raise ValueError(f"unknown protocol {protocol!r}; expected one of {PROTOCOLS}")
        if protocol == "constant":
            drive = DriveProtocol.constant(amplitude)
        else:
            drive = DriveProtocol.sinusoid(amplitude, omega)
        return cls(SpinSector(int(n_spins)), float(gamma), drive, protocol == "sta", gap_tol)

    @property
    def n_spins(self):
        return self.sector.n_spins

    @property
    def protocol(self):
        if self.drive.kind == "constant":
            return "constant"
        return "sta" if self.sta_enabled else "sinusoid"


@dataclass
class SpectralBlock:
    indices: np.ndarray
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    tag: str


@dataclass
class SpectralData:
    blocks: list = field(default_factory=list)

    def ground(self):
        """(energy, block position, column) of the lowest level over all blocks."""
        best = min(range(len(self.blocks)), key=lambda b: self.blocks[b].eigenvalues[0])
        return self.blocks[best].eigenvalues[0], best, 0

    def all_eigenvalues(self):
        return np.sort(np.concatenate([b.eigenvalues for b in self.blocks]))


@lru_cache(maxsize=64)
def _h1_cached(n_spins, gamma):
    sector = SpinSector(n_spins)
    sp = build_splus(sector)
    sm = sp.T
    n = n_spins
    h1 = ((1 + gamma) * (sp @ sm + sm @ sp - n * np.eye(sector.dim))
          + (1 - gamma) * (sp @ sp + sm @ sm)) / (2 * n)
    h1 = 0.5 * (h1 + h1.T)
    h1.setflags(write=False)
    return h1


def h1_matrix(sector: SpinSector, gamma: float) -> np.ndarray:
    """Coupling operator multiplying lambda(t); real symmetric, read-only."""
    return _h1_cached(sector.n_spins, float(gamma))


def lambda_and_rate(drive: DriveProtocol, t: float):
    if drive.kind == "constant":
        return drive.amplitude, 0.0
    w = drive.frequency
    return drive.amplitude * math.sin(w * t), drive.amplitude * w * math.cos(w * t)


def h0_at(params: BatteryParams, t: float) -> np.ndarray:
    lam, _ = lambda_and_rate(params.drive, t)
    sz = build_sz(params.sector)
    if lam == 0.0:
        return sz
    return lam * h1_matrix(params.sector, params.gamma) + sz


def diagonalize_blocked(h, partition: ParityPartition) -> SpectralData:
    h = np.asarray(h)
    even, odd = partition.even_indices, partition.odd_indices
    if len(even) and len(odd):
        cross = np.max(np.abs(h[np.ix_(even, odd)]))
        if cross > CROSS_BLOCK_TOL:
            raise ValueError(f"matrix couples parity blocks (max cross entry {cross:.3e})")
    data = SpectralData()
    for tag, idx in (("even", even), ("odd", odd)):
        if len(idx) == 0:
            continue
        block = h[np.ix_(idx, idx)]
        if np.iscomplexobj(block):
            if np.max(np.abs(block.imag)) > CROSS_BLOCK_TOL:
                raise ValueError("diagonalize_blocked expects a real symmetric matrix")
            block = block.real
        e, v = np.linalg.eigh(block)
        data.blocks.append(SpectralBlock(idx, e, v, tag))
    return data


def cd_generator(h1_block, eigenvalues, eigenvectors, gap_tol=GAP_TOL):
    """Real antisymmetric K such that Hcd = i * dlambda/dt * K inside one block."""
    m = eigenvectors.T @ h1_block @ eigenvectors
    m = 0.5 * (m + m.T)
    de = eigenvalues[None, :] - eigenvalues[:, None]  # E_n - E_m at [m, n]
    np.fill_diagonal(de, np.inf)
    small = np.abs(de) < gap_tol
    if np.any(small & (np.abs(m) > COUPLING_TOL)):
        a, b = np.argwhere(small & (np.abs(m) > COUPLING_TOL))[0]
        raise DegenerateGapError(
            f"levels {a} and {b} are degenerate (gap {abs(de[a, b]):.3e}) "
            f"but coupled by H1 ({abs(m[a, b]):.3e})"
        )
    de[small] = np.inf
    f = m / de
    k = eigenvectors @ f @ eigenvectors.T
    return 0.5 * (k - k.T)


def cd_term(params: BatteryParams, t: float, spectral: SpectralData = None) -> np.ndarray:
    _, rate = lambda_and_rate(params.drive, t)
    dim = params.sector.dim
    if rate == 0.0:
        return np.zeros((dim, dim), dtype=complex)
    if spectral is None:
        spectral = diagonalize_blocked(h0_at(params, t), parity_partition(params.sector))
    h1 = h1_matrix(params.sector, params.gamma)
    k = np.zeros((dim, dim))
    for block in spectral.blocks:
        idx = block.indices
        k[np.ix_(idx, idx)] = cd_generator(
            h1[np.ix_(idx, idx)], block.eigenvalues, block.eigenvectors, params.gap_tol
        )
    return 1j * rate * k


def total_h(params: BatteryParams, t: float) -> np.ndarray:
    h0 = h0_at(params, t)
    if not params.sta_enabled:
        return h0
    return h0 + cd_term(params, t)
