"""Brute-force reference in the full 2^N tensor-product space (N <= 12).

Everything here is built from per-site Pauli matrices, independently of the
Dicke-basis engine, and exists only to cross-check it.
"""

from dataclasses import dataclass
from functools import lru_cache
import math

import numpy as np
import scipy.linalg
import scipy.sparse as sp
from scipy.special import comb

from .model import BatteryParams, h0_at, lambda_and_rate
from .propagator import SCHEMES, DEFAULT_SCHEME, TimeGrid, evolve
from .spin import SizeCapError

MAX_ORACLE_SPINS = 12

# local basis (|up>, |down>)
_SX = sp.csr_matrix(np.array([[0.0, 1.0], [1.0, 0.0]]))
_SY = sp.csr_matrix(np.array([[0.0, -1j], [1j, 0.0]]))
_SZ = sp.csr_matrix(np.array([[1.0, 0.0], [0.0, -1.0]]))


def _check_size(n):
    if n > MAX_ORACLE_SPINS:
        raise SizeCapError(f"oracle limited to N <= {MAX_ORACLE_SPINS}, got {n}")


def site_operator(n, site, pauli):
    """Pauli matrix on ``site`` (site 0 is the leftmost tensor factor)."""
    return sp.kron(sp.kron(sp.identity(2 ** site), pauli), sp.identity(2 ** (n - site - 1)),
                   format="csr")


@lru_cache(maxsize=16)
def _pair_terms(n, gamma):
    """(1/N) sum_{i<j} (X_i X_j + gamma Y_i Y_j) as a dense real matrix."""
    dim = 2 ** n
    acc = sp.csr_matrix((dim, dim), dtype=complex)
    xs = [site_operator(n, i, _SX) for i in range(n)]
    ys = [site_operator(n, i, _SY) for i in range(n)]
    for i in range(n):
        for j in range(i + 1, n):
            acc = acc + xs[i] @ xs[j] + gamma * (ys[i] @ ys[j])
    out = (acc / n).toarray()
    assert np.max(np.abs(out.imag), initial=0.0) < 1e-14
    out = out.real
    out.setflags(write=False)
    return out


@lru_cache(maxsize=16)
def _field(n):
    acc = sum(site_operator(n, i, _SZ) for i in range(n)) / 2
    out = acc.toarray().real
    out.setflags(write=False)
    return out


def full_h1(n, gamma):
    _check_size(n)
    return _pair_terms(n, float(gamma))


def full_sz(n):
    _check_size(n)
    return _field(n)


def total_spin_ops(n):
    _check_size(n)
    return tuple(
        (sum(site_operator(n, i, p) for i in range(n)) / 2).toarray()
        for p in (_SX, _SY, _SZ)
    )


def build_full_h(params: BatteryParams, t: float) -> np.ndarray:
    """lambda(t)/N sum_{i<j}(XX + gamma YY) + 1/2 sum Z."""
    n = params.n_spins
    _check_size(n)
    lam, _ = lambda_and_rate(params.drive, t)
    if n == 1:
        return np.array(full_sz(1))
    return lam * full_h1(n, params.gamma) + full_sz(n)


def up_counts(n):
    """Number of up spins in each computational basis state."""
    idx = np.arange(2 ** n)
    bits = (idx[:, None] >> np.arange(n)[None, :]) & 1
    return n - bits.sum(axis=1)


def symmetric_sector_map(n) -> np.ndarray:
    """Isometry W (2^N x (N+1)); column k is the normalized sum of states with k up spins."""
    _check_size(n)
    k = up_counts(n)
    w = np.zeros((2 ** n, n + 1))
    for col in range(n + 1):
        w[k == col, col] = 1.0 / math.sqrt(comb(n, col, exact=True))
    return w


def embed(dicke_state):
    n = len(dicke_state) - 1
    return symmetric_sector_map(n) @ np.asarray(dicke_state)


def all_down(n):
    psi = np.zeros(2 ** n, dtype=complex)
    psi[-1] = 1.0
    return psi


@lru_cache(maxsize=16)
def _spin_sectors(n, block):
    """Orthonormal bases of each total-spin sector inside one flip-parity block.

    ``block`` is the parity of the number of up spins. Returns (indices, [(S, Q)]).
    """
    idx = np.flatnonzero(up_counts(n) % 2 == block)
    sx, sy, sz = total_spin_ops(n)
    s2 = (sx @ sx + sy @ sy + sz @ sz)[np.ix_(idx, idx)].real
    vals, vecs = np.linalg.eigh(s2)
    sectors = []
    for two_s in range(n % 2, n + 1, 2):
        s = two_s / 2
        sel = np.abs(vals - s * (s + 1)) < 1e-8
        if np.any(sel):
            sectors.append((s, vecs[:, sel]))
    return idx, sectors


def full_cd_term(params, t, block_idx, sectors, gap_tol=1e-10):
    """i dlambda/dt sum_{E_m != E_n} |m><m|H1|n><n| / (E_n - E_m) on one parity block.

    Levels are resolved inside each total-spin sector separately; exactly
    degenerate copies of a level carry no H1 coupling by permutation symmetry
    and are skipped.
    """
    lam, rate = lambda_and_rate(params.drive, t)
    dim = len(block_idx)
    if rate == 0.0:
        return np.zeros((dim, dim), dtype=complex)
    n = params.n_spins
    h1 = full_h1(n, params.gamma)[np.ix_(block_idx, block_idx)]
    h0 = lam * h1 + full_sz(n)[np.ix_(block_idx, block_idx)]
    k = np.zeros((dim, dim))
    for _, q in sectors:
        e, w = np.linalg.eigh(q.T @ h0 @ q)
        v = q @ w
        m = v.T @ h1 @ v
        de = e[None, :] - e[:, None]
        skip = np.abs(de) < gap_tol
        if np.any(np.abs(m[skip & ~np.eye(len(e), dtype=bool)]) > 1e-8):
            raise ArithmeticError("degenerate levels coupled by H1 in the full space")
        de[skip] = np.inf
        k += v @ (m / de) @ v.T
    return 1j * rate * 0.5 * (k - k.T)


def _magnus(hs, dt):
    if len(hs) == 1:
        return dt * hs[0]
    if len(hs) == 2:
        a, b = hs
        return 0.5 * dt * (a + b) - 1j * (math.sqrt(3) * dt ** 2 / 12) * (b @ a - a @ b)
    def c(x, y):
        return x @ y - y @ x
    a1 = -1j * dt * hs[1]
    a2 = -1j * math.sqrt(15) * dt / 3 * (hs[2] - hs[0])
    a3 = -1j * 10 * dt / 3 * (hs[2] - 2 * hs[1] + hs[0])
    c1 = c(a1, a2)
    c2 = -c(a1, 2 * a3 + c1) / 60
    return 1j * (a1 + a3 / 12 + c(-20 * a1 - a3 + c1, a2 + c2) / 240)


def evolve_full(params: BatteryParams, grid: TimeGrid, scheme=DEFAULT_SCHEME):
    """Propagate |down...down> in the full space with the same stepper as the Dicke engine.

    Returns (times, states) with states of length 2^N.
    """
    n = params.n_spins
    _check_size(n)
    # all-down has zero up spins, so it lives in the even block
    idx, sectors = _spin_sectors(n, 0)
    sz = full_sz(n)[np.ix_(idx, idx)]
    h1 = full_h1(n, params.gamma)[np.ix_(idx, idx)] if n > 1 else np.zeros_like(sz)
    psi = all_down(n)[idx]
    out = np.zeros((grid.n_samples, 2 ** n), dtype=complex)
    out[0, idx] = psi
    nodes = SCHEMES[scheme]
    dt = grid.dt
    fixed = None
    for step in range(grid.n_steps):
        if params.drive.kind == "constant":
            if fixed is None:
                fixed = scipy.linalg.expm(-1j * dt * (params.drive.amplitude * h1 + sz))
            u = fixed
        else:
            hs = []
            for c in nodes:
                t = (step + c) * dt
                lam, _ = lambda_and_rate(params.drive, t)
                h = (lam * h1 + sz).astype(complex)
                if params.sta_enabled:
                    h = h + full_cd_term(params, t, idx, sectors, params.gap_tol)
                hs.append(h)
            u = scipy.linalg.expm(-1j * _magnus(hs, dt))
        psi = u @ psi
        if (step + 1) % grid.sample_stride == 0:
            out[(step + 1) // grid.sample_stride, idx] = psi
    return grid.sample_times(), out


def partial_trace_first(state, n, n_a):
    """Reduced density matrix of the first ``n_a`` sites."""
    m = np.asarray(state).reshape(2 ** n_a, 2 ** (n - n_a))
    return m @ m.conj().T


def compressed_marginal(state, n, n_a):
    """Partial trace projected onto the symmetric subspace of the ``n_a`` kept spins."""
    w = symmetric_sector_map(n_a)
    return w.T @ partial_trace_first(state, n, n_a) @ w


def full_observables(params, times, states, n_a=None):
    """E, dW, S (bits), inst_cost computed directly in the full space."""
    n = params.n_spins
    sz = full_sz(n)
    h1 = full_h1(n, params.gamma) if n > 1 else np.zeros_like(sz)
    rows = []
    for t, psi in zip(times, states):
        e = np.vdot(psi, sz @ psi).real
        dz = sz @ psi - e * psi
        var = np.vdot(dz, dz).real
        s = 0.0
        if n_a:
            p = np.linalg.eigvalsh(partial_trace_first(psi, n, n_a))
            p = p[p > 1e-14]
            s = float(-(p * np.log2(p)).sum())
        _, rate = lambda_and_rate(params.drive, t)
        rho = np.outer(psi, psi.conj())
        dh = rate * h1
        cost = np.linalg.norm(dh @ rho - rho @ dh)
        rows.append((e, math.sqrt(var), s, cost))
    return np.array(rows)


@dataclass
class OracleCheck:
    name: str
    n_spins: int
    value: float
    tolerance: float
    passed: bool


def spectrum_check(n, gamma, lam, tol=1e-10) -> OracleCheck:
    """Symmetric-sector spectrum of the full Hamiltonian vs the Dicke matrix."""
    params = BatteryParams.build(n, gamma, lam, protocol="constant")
    w = symmetric_sector_map(n)
    full = w.T @ build_full_h(params, 1.0) @ w
    dicke = h0_at(params, 1.0)
    err = float(np.max(np.abs(np.linalg.eigvalsh(full) - np.linalg.eigvalsh(dicke))))
    return OracleCheck(f"spectrum gamma={gamma:.3f} lambda={lam:.3f}", n, err, tol, err <= tol)


def trajectory_check(params, grid, tol=1e-8, scheme=DEFAULT_SCHEME) -> OracleCheck:
    """Worst-case infidelity between full-space and Dicke-basis evolutions on one grid."""
    _, full_states = evolve_full(params, grid, scheme)
    traj = evolve(params, grid, scheme=scheme)
    w = symmetric_sector_map(params.n_spins)
    projected = full_states @ w
    overlaps = np.abs(np.einsum("tk,tk->t", projected.conj(), traj.states)) ** 2
    infidelity = float(np.max(1.0 - overlaps))
    return OracleCheck(f"trajectory {params.protocol}", params.n_spins, infidelity, tol,
                       infidelity <= tol)


def verification_suite(n_values=range(2, 9), steps_per_period=100, seed=0,
                       amplitude=5.0, omega=5.0, gamma=-0.1):
    """Spectra at random (gamma, lambda) and trajectories for every protocol.

    Driven protocols use a coarser step than production runs; both engines
    share the grid, so agreement does not depend on the step size.
    """
    rng = np.random.default_rng(seed)
    checks = []
    for n in n_values:
        for g, lam in rng.uniform((-1.5, -10.0), (1.5, 10.0), size=(3, 2)):
            checks.append(spectrum_check(n, float(g), float(lam)))
        for protocol in ("constant", "sinusoid", "sta"):
            params = BatteryParams.build(n, gamma, amplitude,
                                         None if protocol == "constant" else omega, protocol)
            if protocol == "constant":
                grid = TimeGrid.default_for(params.drive)
            else:
                grid = TimeGrid.default_for(params.drive, steps_per_period=steps_per_period)
            checks.append(trajectory_check(params, grid))
    return checks
