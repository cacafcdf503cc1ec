"""Time-ordered propagation of the charging dynamics in the Dicke basis."""

from dataclasses import dataclass
import math

import numpy as np

from . import _kernels
from .model import (
    COUPLING_TOL,
    BatteryParams,
    DegenerateGapError,
    diagonalize_blocked,
    h0_at,
    h1_matrix,
    lambda_and_rate,
    total_h,
)
from .spin import SpinSector, parity_partition

NORM_TOL = 1e-9
STEPS_PER_PERIOD = 2000
CONSTANT_DT = 1e-3
DRIVEN_WINDOW_PERIODS = 10
CONSTANT_WINDOW = 20.0
SAMPLE_STRIDE = 10

# quadrature nodes (fractions of dt) per stepping scheme
SCHEMES = {
    "midpoint": (0.5,),
    "magnus4": (0.5 - math.sqrt(3) / 6, 0.5 + math.sqrt(3) / 6),
    "magnus6": (0.5 - math.sqrt(15) / 10, 0.5, 0.5 + math.sqrt(15) / 10),
}
DEFAULT_SCHEME = "magnus6"


class NormDriftError(RuntimeError):
    pass


@dataclass(frozen=True)
class TimeGrid:
    t_end: float
    n_steps: int
    sample_stride: int = 1

    def __post_init__(self):
        if not (self.t_end > 0 and math.isfinite(self.t_end)):
            raise ValueError(f"t_end must be positive and finite, got {self.t_end!r}")
        if self.n_steps < 1 or self.sample_stride < 1:
            raise ValueError("n_steps and sample_stride must be positive")
        if self.n_steps % self.sample_stride:
            raise ValueError(
                f"n_steps={self.n_steps} is not a multiple of sample_stride={self.sample_stride}"
            )

    @property
    def dt(self):
        return self.t_end / self.n_steps

    @property
    def n_samples(self):
        return self.n_steps // self.sample_stride + 1

    def sample_times(self):
        return np.arange(self.n_samples) * (self.sample_stride * self.dt)

    def midpoints(self):
        return (np.arange(self.n_steps) + 0.5) * self.dt

    @classmethod
    def default_for(cls, drive, periods=DRIVEN_WINDOW_PERIODS, t_end=None,
                    steps_per_period=STEPS_PER_PERIOD, constant_dt=CONSTANT_DT,
                    sample_stride=SAMPLE_STRIDE):
        """Default window and step: 10 drive periods at period/2000, or t in (0, 20] at dt=1e-3."""
        if drive.kind == "sinusoid":
            period = drive.period
            t_end = periods * period if t_end is None else t_end
            n = math.ceil(round(t_end / period * steps_per_period, 6))
        else:
            t_end = CONSTANT_WINDOW if t_end is None else t_end
            n = math.ceil(round(t_end / constant_dt, 6))
        n = -(-n // sample_stride) * sample_stride
        return cls(float(t_end), int(n), int(sample_stride))


@dataclass
class Trajectory:
    params: BatteryParams
    grid: TimeGrid
    times: np.ndarray
    states: np.ndarray
    observables: object = None
    # <H1> and <H1^2> after every integration step (driven runs only)
    step_moments: np.ndarray = None

    def __len__(self):
        return len(self.times)


def initial_state(sector: SpinSector) -> np.ndarray:
    """Fully discharged battery |S, -N/2>."""
    psi = np.zeros(sector.dim, dtype=complex)
    psi[0] = 1.0
    return psi


def _check_norms(states, times):
    drift = np.abs(np.linalg.norm(states, axis=1) - 1.0)
    bad = np.flatnonzero(drift > NORM_TOL)
    if bad.size:
        i = bad[0]
        raise NormDriftError(f"state norm drifted by {drift[i]:.3e} at t={times[i]:.6g}")


def evolve(params: BatteryParams, grid: TimeGrid = None, psi0=None,
           scheme: str = DEFAULT_SCHEME) -> Trajectory:
    """Propagate psi(0) through a time-ordered product of short-time unitaries.

    ``scheme="midpoint"`` uses U_k = exp(-i H(t_k + dt/2) dt); ``"magnus4"``
    and the default ``"magnus6"`` sample H at two or three Gauss points per
    step and are fourth/sixth order. All are unitary by construction. Work is done blockwise
    by parity; blocks on which the initial state has no weight stay exactly
    zero and are not stepped.
    """
    if scheme not in SCHEMES:
        raise ValueError(f"unknown scheme {scheme!r}; expected one of {sorted(SCHEMES)}")
    if grid is None:
        grid = TimeGrid.default_for(params.drive)
    sector = params.sector
    psi0 = initial_state(sector) if psi0 is None else np.asarray(psi0, dtype=complex)
    h1 = np.asarray(h1_matrix(sector, params.gamma))
    sz = sector.m_values()
    states = np.zeros((grid.n_samples, sector.dim), dtype=complex)
    moments = None

    if params.drive.kind == "sinusoid":
        nodes = (np.arange(grid.n_steps)[:, None] + np.array(SCHEMES[scheme])[None, :]) * grid.dt
        w, a = params.drive.frequency, params.drive.amplitude
        lam = np.ascontiguousarray(a * np.sin(w * nodes))
        rate = np.ascontiguousarray(a * w * np.cos(w * nodes))

    for idx in parity_partition(sector).blocks():
        if len(idx) == 0 or not np.any(psi0[idx]):
            continue
        h1b = np.ascontiguousarray(h1[np.ix_(idx, idx)])
        szb = np.ascontiguousarray(sz[idx])
        p0 = np.ascontiguousarray(psi0[idx])
        if params.drive.kind == "constant":
            e, v = np.linalg.eigh(params.drive.amplitude * h1b + np.diag(szb))
            u = (v * np.exp(-1j * e * grid.dt)) @ v.T
            out = _kernels.propagate_fixed(u, p0, grid.n_steps, grid.sample_stride)
        else:
            out, block_moments, status, step = _kernels.propagate_block(
                h1b, szb, p0, lam, rate, grid.dt, params.sta_enabled,
                grid.sample_stride, params.gap_tol, COUPLING_TOL,
            )
            if status != _kernels.OK:
                raise DegenerateGapError(
                    f"degenerate coupled levels near t={nodes[step, 0]:.6g} "
                    f"(gap_tol={params.gap_tol:g})"
                )
            # H1 is block diagonal, so the moments of the full state add up
            moments = block_moments if moments is None else moments + block_moments
        states[:, idx] = out

    times = grid.sample_times()
    _check_norms(states, times)
    return Trajectory(params, grid, times, states, step_moments=moments)


def evolve_rk4(params: BatteryParams, grid: TimeGrid = None, psi0=None) -> Trajectory:
    """Classical 4th-order Runge-Kutta on the full (unblocked) matrices.

    Independent cross-check of :func:`evolve`; not unitary, so the norm check
    only applies loosely and is skipped here.
    """
    if grid is None:
        grid = TimeGrid.default_for(params.drive)
    psi = initial_state(params.sector) if psi0 is None else np.array(psi0, dtype=complex)
    dt = grid.dt
    out = np.empty((grid.n_samples, params.sector.dim), dtype=complex)
    out[0] = psi

    def rhs(t, y):
        return -1j * (total_h(params, t) @ y)

    for step in range(grid.n_steps):
        t = step * dt
        k1 = rhs(t, psi)
        k2 = rhs(t + dt / 2, psi + dt / 2 * k1)
        k3 = rhs(t + dt / 2, psi + dt / 2 * k2)
        k4 = rhs(t + dt, psi + dt * k3)
        psi = psi + dt / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
        if (step + 1) % grid.sample_stride == 0:
            out[(step + 1) // grid.sample_stride] = psi
    return Trajectory(params, grid, grid.sample_times(), out)


def ground_state_track(params: BatteryParams, t: float, block=None) -> np.ndarray:
    """Lowest eigenvector of H0(t), sign fixed so its largest entry is real positive.

    ``block`` picks the parity block ("even"/"odd"); by default the block that
    holds the initial state |S, -N/2> (always "even"), which is the level the
    counterdiabatic protocol follows. ``block="global"`` takes the minimum
    over both blocks; deep in the ordered phase the two block ground states
    are degenerate to machine precision, so that choice is ill-defined there.
    """
    spectral = diagonalize_blocked(h0_at(params, t), parity_partition(params.sector))
    if block == "global":
        _, b, col = spectral.ground()
        chosen = spectral.blocks[b]
    else:
        tag = "even" if block is None else block
        chosen = next(b for b in spectral.blocks if b.tag == tag)
        col = 0
    psi = np.zeros(params.sector.dim, dtype=complex)
    vec = chosen.eigenvectors[:, col]
    vec = vec * np.sign(vec[np.argmax(np.abs(vec))])
    psi[chosen.indices] = vec
    return psi
