"""Protocol comparisons, parameter sweeps, scaling fits and threshold detection."""

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
import math
import os

import numpy as np
from scipy.signal import find_peaks

from .model import GAP_TOL, PROTOCOLS, BatteryParams
from .observables import annotate
from .propagator import (
    CONSTANT_DT,
    DEFAULT_SCHEME,
    DRIVEN_WINDOW_PERIODS,
    SAMPLE_STRIDE,
    STEPS_PER_PERIOD,
    TimeGrid,
    evolve,
)

WORKERS_ENV = "LMG_BATTERY_WORKERS"
SWEEP_PARAMETERS = ("N", "gamma", "A", "omega")


class NonPositiveDataError(ValueError):
    pass


class NoCrossingFound(ValueError):
    pass


@dataclass(frozen=True)
class GridSettings:
    """How a time grid is derived from a drive; one value set per sweep or run."""

    periods: float = DRIVEN_WINDOW_PERIODS
    steps_per_period: int = STEPS_PER_PERIOD
    constant_t_end: float = 20.0
    constant_dt: float = CONSTANT_DT
    sample_stride: int = SAMPLE_STRIDE
    scheme: str = DEFAULT_SCHEME

    def grid_for(self, drive) -> TimeGrid:
        if drive.kind == "sinusoid":
            return TimeGrid.default_for(drive, periods=self.periods,
                                        steps_per_period=self.steps_per_period,
                                        sample_stride=self.sample_stride)
        return TimeGrid.default_for(drive, t_end=self.constant_t_end,
                                    constant_dt=self.constant_dt,
                                    sample_stride=self.sample_stride)


@dataclass
class MaximaRecord:
    c_max: float
    t_c_max: float
    p_max: float
    t_p_max: float
    dw_max: float
    t_dw_max: float
    cost_max: float
    t_cost_max: float

    def as_dict(self):
        return dict(self.__dict__)


def refine_maximum(times, values):
    """Grid maximum refined by a parabola through the three surrounding samples.

    Never returns less than the raw grid maximum; endpoints are not refined.
    """
    values = np.asarray(values, dtype=float)
    i = int(np.argmax(values))
    best_t, best = float(times[i]), float(values[i])
    if 0 < i < len(values) - 1:
        y0, y1, y2 = values[i - 1], values[i], values[i + 1]
        curv = y0 - 2 * y1 + y2
        if curv < 0:
            shift = 0.5 * (y0 - y2) / curv
            peak = y1 - 0.25 * (y0 - y2) * shift
            if peak >= best:
                h = times[i + 1] - times[i]
                best, best_t = float(peak), float(times[i] + shift * h)
    return best_t, best


def maxima_of(series) -> MaximaRecord:
    t = series.t
    t_c, c = refine_maximum(t, series.stored)
    t_p, p = refine_maximum(t, series.power)
    t_w, w = refine_maximum(t, series.fluctuation)
    # first maximum of the cost, no refinement: |cos| kinks make parabolas unreliable
    i = int(np.argmax(series.inst_cost))
    return MaximaRecord(c, t_c, p, t_p, w, t_w, float(series.inst_cost[i]), float(t[i]))


def run_protocol(params: BatteryParams, grid: TimeGrid = None, with_entropy=True,
                 n_a="default", scheme=DEFAULT_SCHEME):
    """Evolve, attach observables and scan the maxima over the window (0, t_end]."""
    if grid is None:
        grid = GridSettings(scheme=scheme).grid_for(params.drive)
    traj = evolve(params, grid, scheme=scheme)
    series = annotate(traj, n_a=n_a, with_entropy=with_entropy)
    return traj, maxima_of(series)


@dataclass
class ProtocolComparison:
    baseline: str
    maxima: dict
    ratios: dict


def compare_protocols(n_spins, gamma, amplitude, omega, protocols=("sinusoid", "sta"),
                      baseline="constant", settings: GridSettings = None):
    """Ratios of C_max, P_max and max dW of each protocol against ``baseline``."""
    settings = settings or GridSettings()
    maxima = {}
    for proto in dict.fromkeys((baseline,) + tuple(protocols)):
        params = BatteryParams.build(n_spins, gamma, amplitude, omega, proto)
        _, rec = run_protocol(params, settings.grid_for(params.drive), with_entropy=False,
                              scheme=settings.scheme)
        maxima[proto] = rec
    base = maxima[baseline]
    ratios = {}
    for proto in protocols:
        rec = maxima[proto]
        ratios[proto] = {
            "C_max": _ratio(rec.c_max, base.c_max),
            "P_max": _ratio(rec.p_max, base.p_max),
            "dW_max": _ratio(rec.dw_max, base.dw_max),
        }
    return ProtocolComparison(baseline, maxima, ratios)


def _ratio(a, b):
    return a / b if b != 0 else math.nan


@dataclass(frozen=True)
class SweepSpec:
    parameter: str
    values: tuple
    n_spins: int = 50
    gamma: float = -0.1
    amplitude: float = 5.0
    omega: float = 5.0
    protocols: tuple = PROTOCOLS
    settings: GridSettings = field(default_factory=GridSettings)
    gap_tol: float = GAP_TOL

    def __post_init__(self):
        if self.parameter not in SWEEP_PARAMETERS:
            raise ValueError(f"cannot sweep {self.parameter!r}; choose from {SWEEP_PARAMETERS}")
        values = tuple(self.values)
        if not values:
            raise ValueError("sweep values must be nonempty")
        diffs = np.diff(np.asarray(values, dtype=float))
        if len(values) > 1 and not (np.all(diffs > 0) or np.all(diffs < 0)):
            raise ValueError("sweep values must be strictly monotone")
        if self.parameter == "N":
            if any(int(v) != v or v < 1 for v in values):
                raise ValueError("N values must be integers >= 1")
            values = tuple(int(v) for v in values)
        else:
            values = tuple(float(v) for v in values)
        object.__setattr__(self, "values", values)
        bad = [p for p in self.protocols if p not in PROTOCOLS]
        if bad:
            raise ValueError(f"unknown protocols {bad}")
        object.__setattr__(self, "protocols", tuple(self.protocols))

    def point(self, protocol, value) -> BatteryParams:
        kw = dict(n_spins=self.n_spins, gamma=self.gamma, amplitude=self.amplitude,
                  omega=self.omega)
        key = {"N": "n_spins", "gamma": "gamma", "A": "amplitude", "omega": "omega"}[self.parameter]
        kw[key] = value
        return BatteryParams.build(kw["n_spins"], kw["gamma"], kw["amplitude"], kw["omega"],
                                   protocol, gap_tol=self.gap_tol)


@dataclass
class SweepRow:
    protocol: str
    parameter: str
    value: float
    maxima: MaximaRecord = None
    error: str = ""


@dataclass
class SweepTable:
    parameter: str
    rows: list

    def select(self, protocol):
        return [r for r in self.rows if r.protocol == protocol]

    def series(self, protocol, quantity):
        """(values, quantity) arrays for one protocol, skipping error rows."""
        attr = _QUANTITY_ATTR[quantity]
        rows = [r for r in self.select(protocol) if r.maxima is not None]
        return (np.array([r.value for r in rows], dtype=float),
                np.array([getattr(r.maxima, attr) for r in rows], dtype=float))


_QUANTITY_ATTR = {"C_max": "c_max", "P_max": "p_max", "dW_max": "dw_max",
                  "cost_max": "cost_max"}


def _run_point(job):
    protocol, value, params, settings = job
    try:
        _, rec = run_protocol(params, settings.grid_for(params.drive), with_entropy=False,
                              scheme=settings.scheme)
        return SweepRow(protocol, "", value, rec)
    except Exception as exc:  # recorded per point, the sweep carries on
        return SweepRow(protocol, "", value, None, f"{type(exc).__name__}: {exc}")


def worker_count():
    raw = os.environ.get(WORKERS_ENV, "1")
    try:
        return max(1, int(raw))
    except ValueError:
        raise ValueError(f"{WORKERS_ENV} must be an integer, got {raw!r}") from None


def sweep(spec: SweepSpec, workers=None) -> SweepTable:
    """One row per (protocol, value), ordered by protocol then swept value."""
    jobs = []
    for proto in spec.protocols:
        for value in sorted(spec.values):
            try:
                params = spec.point(proto, value)
            except ValueError as exc:
                jobs.append(SweepRow(proto, spec.parameter, value, None, f"ValueError: {exc}"))
                continue
            jobs.append((proto, value, params, spec.settings))
    workers = worker_count() if workers is None else workers
    pending = [j for j in jobs if not isinstance(j, SweepRow)]
    if workers > 1 and len(pending) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            done = list(pool.map(_run_point, pending))
    else:
        done = [_run_point(j) for j in pending]
    # reassemble by key, never by completion order
    by_key = {(r.protocol, r.value): r for r in done}
    rows = []
    for j in jobs:
        row = j if isinstance(j, SweepRow) else by_key[(j[0], j[1])]
        rows.append(replace(row, parameter=spec.parameter))
    return SweepTable(spec.parameter, rows)


@dataclass
class ScalingFit:
    exponent: float
    intercept: float
    r_squared: float
    n_range: tuple
    n_points: int


def fit_power_law(x, y, n_range=None) -> ScalingFit:
    """Least squares line through (log x, log y); slope is the scaling exponent."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if n_range is not None:
        lo, hi = n_range
        keep = (x >= lo) & (x <= hi)
        x, y = x[keep], y[keep]
    if len(x) < 4:
        raise ValueError(f"a scaling fit needs at least 4 points, got {len(x)}")
    if np.any(y <= 0) or np.any(x <= 0):
        raise NonPositiveDataError("log-log fit requires strictly positive data")
    lx, ly = np.log(x), np.log(y)
    slope, intercept = np.polyfit(lx, ly, 1)
    resid = ly - (slope * lx + intercept)
    ss_tot = np.sum((ly - ly.mean()) ** 2)
    r2 = 1.0 - np.sum(resid ** 2) / ss_tot if ss_tot > 0 else 1.0
    r2 = min(max(r2, 0.0), 1.0)
    return ScalingFit(float(slope), float(intercept), float(r2),
                      (float(x.min()), float(x.max())), int(len(x)))


def fit_scaling(table: SweepTable, quantity="P_max", n_range=(3, 50), protocol="sta"):
    if table.parameter != "N":
        raise ValueError("scaling fits need an N sweep")
    n, q = table.series(protocol, quantity)
    return fit_power_law(n, q, n_range)


def find_crossings(x, diff):
    """Linearly interpolated sign changes of ``diff`` along ``x``."""
    x = np.asarray(x, dtype=float)
    d = np.asarray(diff, dtype=float)
    out = []
    for i in range(len(x) - 1):
        a, b = d[i], d[i + 1]
        if a == 0.0:
            if not out or out[-1] != x[i]:
                out.append(float(x[i]))
        elif a * b < 0:
            out.append(float(x[i] - a * (x[i + 1] - x[i]) / (b - a)))
    if len(d) and d[-1] == 0.0 and (not out or out[-1] != x[-1]):
        out.append(float(x[-1]))
    return out


def threshold_scan(table: SweepTable, protocol="sta", baseline="constant"):
    """Amplitudes where ``protocol`` loses (or gains) its advantage over ``baseline``.

    Returns {"C_max": [...], "P_max": [...]} crossing lists.
    """
    result = {}
    for quantity in ("C_max", "P_max"):
        xa, qa = table.series(protocol, quantity)
        xb, qb = table.series(baseline, quantity)
        common, ia, ib = np.intersect1d(xa, xb, return_indices=True)
        crossings = find_crossings(common, qa[ia] - qb[ib])
        if not crossings:
            raise NoCrossingFound(f"{quantity}: {protocol} - {baseline} never changes sign")
        result[quantity] = crossings
    return result


def local_minima(t, y, rel_prominence=1e-6):
    """Times of interior local minima of a sampled series.

    Plateaus count once, at their centre. Dips with prominence below
    ``rel_prominence`` times the series range are treated as round-off.
    """
    t = np.asarray(t, dtype=float)
    y = np.asarray(y, dtype=float)
    span = np.ptp(y) if len(y) else 0.0
    if span == 0.0:
        return np.array([])
    idx, _ = find_peaks(-y, prominence=rel_prominence * span)
    return t[idx]


@dataclass
class MinimaPairing:
    entropy_minima: np.ndarray
    fluctuation_minima: np.ndarray
    offsets: np.ndarray

    @property
    def max_offset(self):
        return float(self.offsets.max()) if self.offsets.size else 0.0


def entropy_fluctuation_correlation(trajectory) -> MinimaPairing:
    """Distance from every fluctuation minimum to the nearest entropy minimum."""
    obs = trajectory.observables or annotate(trajectory)
    s_min = local_minima(obs.t, obs.entropy)
    w_min = local_minima(obs.t, obs.fluctuation)
    if s_min.size and w_min.size:
        offsets = np.abs(w_min[:, None] - s_min[None, :]).min(axis=1)
    else:
        offsets = np.full(w_min.shape, np.inf) if w_min.size else np.array([])
    return MinimaPairing(s_min, w_min, offsets)
