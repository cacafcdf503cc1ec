"""Per-time observables of a charging trajectory.

Columns follow the output contract ``t, E, C, P, dW, S, dCost, Cost``:
energy <Sz>, stored energy E(t) - E(0), power C/t, energy fluctuation
(standard deviation of Sz), von Neumann entropy (bits) of a subsystem, the
instantaneous cost sqrt(2)|dlambda/dt| sqrt(Var H1) and its running integral.
"""

from dataclasses import dataclass, fields
import math
from typing import NamedTuple

import numpy as np
from scipy.integrate import cumulative_trapezoid
from scipy.special import gammaln

from .model import BatteryParams, h1_matrix
from .spin import SpinSector

ENTROPY_CUTOFF = 1e-14
COST_RESCALE_DURATION = 0.3 * math.pi

COLUMNS = ("t", "E", "C", "P", "dW", "S", "dCost", "Cost")


class SubsystemRangeError(ValueError):
    pass


class ObservableRecord(NamedTuple):
    t: float
    energy: float
    stored: float
    power: float
    fluctuation: float
    entropy: float
    inst_cost: float
    cumulative_cost: float


@dataclass
class ObservableSeries:
    t: np.ndarray
    energy: np.ndarray
    stored: np.ndarray
    power: np.ndarray
    fluctuation: np.ndarray
    entropy: np.ndarray
    inst_cost: np.ndarray
    cumulative_cost: np.ndarray
    subsystem_size: object = None

    def records(self):
        cols = [getattr(self, f.name) for f in fields(self)[:8]]
        for row in zip(*cols):
            yield ObservableRecord(*map(float, row))

    def as_columns(self):
        """Arrays in output column order."""
        return dict(zip(COLUMNS, (self.t, self.energy, self.stored, self.power,
                                  self.fluctuation, self.entropy, self.inst_cost,
                                  self.cumulative_cost)))


def default_subsystem(n_spins):
    """Balanced split N_A = floor(N/2); None when no bipartition exists (N = 1)."""
    return n_spins // 2 if n_spins >= 2 else None


def _sz_diag(states):
    n = states.shape[-1] - 1
    return np.arange(n + 1) - n / 2


def _probabilities(states):
    # dividing by the norm keeps round-off drift of |psi| out of <Sz>
    p = np.abs(states) ** 2
    return p / p.sum(axis=-1, keepdims=True)


def energy(state) -> float:
    return float(energies(np.asarray(state)[None, :])[0])


def fluctuation(state) -> float:
    return float(fluctuations(np.asarray(state)[None, :])[0])


def energies(states):
    return _probabilities(states) @ _sz_diag(states)


def fluctuations(states):
    # centred second moment: <Sz^2> - <Sz>^2 cancels catastrophically near eigenstates
    p = _probabilities(states)
    m = _sz_diag(states)
    mean = p @ m
    return np.sqrt(np.einsum("ti,ti->t", p, (m[None, :] - mean[:, None]) ** 2))


def stored_and_power(times, energy_series):
    """C(t) = E(t) - E(0) and P(t) = C(t)/t with P(0) = 0."""
    times = np.asarray(times, dtype=float)
    e = np.asarray(energy_series, dtype=float)
    stored = e - e[0]
    power = np.zeros_like(stored)
    pos = times > 0
    power[pos] = stored[pos] / times[pos]
    return stored, power


def _log_binom(n, k):
    return gammaln(n + 1) - gammaln(k + 1) - gammaln(n - k + 1)


def schmidt_coefficients(n_spins, n_a):
    """c[k_A, k_B] = sqrt(binom(N_A,k_A) binom(N_B,k_B) / binom(N, k_A + k_B)).

    Splits |N/2, m> into sum_{k_A} c |N_A/2, k_A - N_A/2> (x) |N_B/2, ...>.
    """
    n_b = n_spins - n_a
    ka = np.arange(n_a + 1)[:, None]
    kb = np.arange(n_b + 1)[None, :]
    logc = 0.5 * (_log_binom(n_a, ka) + _log_binom(n_b, kb) - _log_binom(n_spins, ka + kb))
    return np.exp(logc)


def _check_split(n_spins, n_a):
    if not (1 <= n_a <= n_spins - 1):
        raise SubsystemRangeError(f"subsystem size {n_a} outside 1..{n_spins - 1}")


def _amplitude_matrix(states, n_a):
    states = np.asarray(states)
    n = states.shape[-1] - 1
    _check_split(n, n_a)
    c = schmidt_coefficients(n, n_a)
    idx = np.arange(n_a + 1)[:, None] + np.arange(n - n_a + 1)[None, :]
    return states[..., idx] * c


def reduced_density(state, n_a) -> np.ndarray:
    """Reduced state of the first ``n_a`` spins on their symmetric subspace.

    Indexed by the excitation count of subsystem A, ascending in m_A.
    """
    amp = _amplitude_matrix(state, n_a)
    return amp @ amp.conj().T


def _entropy_from_probs(p):
    p = np.where(p < ENTROPY_CUTOFF, 0.0, p)
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = np.where(p > 0, -p * np.log2(p), 0.0)
    return terms.sum(axis=-1)


def entropy(state, n_a) -> float:
    """Von Neumann entropy in bits of the ``n_a``-spin marginal."""
    s = np.linalg.svd(_amplitude_matrix(state, n_a), compute_uv=False)
    return float(_entropy_from_probs(s ** 2))


def entropies(states, n_a):
    s = np.linalg.svd(_amplitude_matrix(states, n_a), compute_uv=False)
    return _entropy_from_probs(s ** 2)


def _h1_variance(params, states):
    h1 = np.asarray(h1_matrix(params.sector, params.gamma))
    hpsi = states @ h1.T
    mean = np.einsum("...i,...i->...", states.conj(), hpsi).real
    centred = hpsi - mean[..., None] * states
    return np.einsum("...i,...i->...", centred.conj(), centred).real


def _rates(params, times):
    drive = params.drive
    times = np.asarray(times, dtype=float)
    if drive.kind == "constant":
        return np.zeros_like(times)
    return drive.amplitude * drive.frequency * np.cos(drive.frequency * times)


def inst_cost(params: BatteryParams, t: float, state) -> float:
    """sqrt(2) |dlambda/dt| sqrt(Var H1), the Frobenius norm of [dH0/dt, |psi><psi|]."""
    rate = float(_rates(params, [t])[0])
    if rate == 0.0:
        return 0.0
    var = float(_h1_variance(params, np.asarray(state)[None, :])[0])
    return math.sqrt(2.0) * abs(rate) * math.sqrt(var)


def inst_costs(params, times, states):
    rates = _rates(params, times)
    out = np.zeros(len(rates))
    live = rates != 0.0
    if np.any(live):
        out[live] = math.sqrt(2.0) * np.abs(rates[live]) * np.sqrt(
            _h1_variance(params, np.asarray(states)[live]))
    return out


def running_cost(times, costs):
    """Trapezoidal running integral of the instantaneous cost."""
    if len(times) < 2:
        return np.zeros(len(times))
    return cumulative_trapezoid(costs, times, initial=0.0)


def step_costs(params, grid, step_moments):
    """Instantaneous cost after every integration step, from <H1> and <H1^2>."""
    times = np.arange(grid.n_steps + 1) * grid.dt
    var = np.clip(step_moments[:, 1] - step_moments[:, 0] ** 2, 0.0, None)
    return math.sqrt(2.0) * np.abs(_rates(params, times)) * np.sqrt(var)


def fine_running_cost(params, grid, step_moments):
    """Running cost at the sample times, integrated over every integration step.

    Composite Simpson over step pairs (the |dlambda/dt| kinks of the default
    grids fall on even steps); a sample on an odd step adds one trapezoid
    step to the Simpson value at the preceding even step.
    """
    f = step_costs(params, grid, step_moments)
    dt = grid.dt
    pairs = dt / 3.0 * (f[:-2:2] + 4.0 * f[1:-1:2] + f[2::2])
    even_cum = np.concatenate(([0.0], np.cumsum(pairs)))
    steps = np.arange(grid.n_samples) * grid.sample_stride
    half = steps // 2
    out = even_cum[half]
    odd = steps % 2 == 1
    out[odd] += 0.5 * dt * (f[steps[odd] - 1] + f[steps[odd]])
    return out


def rescaled_time(t, duration=COST_RESCALE_DURATION):
    return np.asarray(t) / duration


def compute_series(params, times, states, n_a="default", with_entropy=True,
                   grid=None, step_moments=None):
    """All observables at the sample times.

    With ``grid`` and ``step_moments`` from :func:`evolve`, the cumulative
    cost uses every integration step; otherwise a trapezoid over the samples.
    """
    times = np.asarray(times, dtype=float)
    states = np.asarray(states)
    if n_a == "default":
        n_a = default_subsystem(params.n_spins)
    e = energies(states)
    stored, power = stored_and_power(times, e)
    if with_entropy and n_a is not None:
        s = entropies(states, n_a)
    else:
        s = np.zeros_like(times)
        n_a = None
    costs = inst_costs(params, times, states)
    if grid is not None and step_moments is not None:
        cum = fine_running_cost(params, grid, step_moments)
    else:
        cum = running_cost(times, costs)
    return ObservableSeries(
        t=times, energy=e, stored=stored, power=power,
        fluctuation=fluctuations(states), entropy=s,
        inst_cost=costs, cumulative_cost=cum,
        subsystem_size=n_a,
    )


def annotate(trajectory, n_a="default", with_entropy=True):
    """Fill ``trajectory.observables`` and return the series."""
    trajectory.observables = compute_series(
        trajectory.params, trajectory.times, trajectory.states, n_a, with_entropy,
        trajectory.grid, trajectory.step_moments)
    return trajectory.observables


def cumulative_cost(trajectory) -> float:
    obs = trajectory.observables or annotate(trajectory, with_entropy=False)
    return float(obs.cumulative_cost[-1]) if len(obs.t) else 0.0


def max_inst_cost(trajectory):
    """(t*, max cost) over the samples; the first maximum wins ties."""
    obs = trajectory.observables or annotate(trajectory, with_entropy=False)
    i = int(np.argmax(obs.inst_cost))
    return float(obs.t[i]), float(obs.inst_cost[i])
