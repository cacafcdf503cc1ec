"""Time-stepping kernels for one parity block.

Each kernel is written once in numba-compatible numpy. With numba present they
are compiled by ``@njit``; setting ``LMG_BATTERY_NUMBA=0`` (or running without
numba installed) executes the identical bodies as plain numpy.
"""

import os

import numpy as np

_FLAG = os.environ.get("LMG_BATTERY_NUMBA", "1").strip().lower()
_WANT_NUMBA = _FLAG not in ("0", "false", "no", "off")

try:
    if not _WANT_NUMBA:
        raise ImportError
    from numba import njit

    USING_NUMBA = True
except ImportError:
    USING_NUMBA = False

    def njit(*args, **kwargs):
        if len(args) == 1 and callable(args[0]) and not kwargs:
            return args[0]
        return lambda f: f


# status codes returned by the kernels
OK = 0
DEGENERATE = 1


@njit(cache=True)
def cd_generator_kernel(h1, e, v, gap_tol, coupling_tol):
    """Antisymmetric K with Hcd = i * rate * K; returns (K, status)."""
    n = e.shape[0]
    m = v.T @ h1 @ v
    f = np.zeros((n, n))
    status = OK
    for a in range(n):
        for b in range(a + 1, n):
            mab = 0.5 * (m[a, b] + m[b, a])
            de = e[b] - e[a]
            if abs(de) < gap_tol:
                if abs(mab) > coupling_tol:
                    status = DEGENERATE
                continue
            f[a, b] = mab / de
            f[b, a] = -f[a, b]
    k = v @ f @ v.T
    return 0.5 * (k - k.T), status


@njit(cache=True)
def block_hamiltonian(h1, sz, lam, rate, sta, gap_tol, coupling_tol):
    """lam * H1 + Sz (+ Hcd when ``sta``) as a complex matrix, plus status."""
    n = sz.shape[0]
    h = np.empty((n, n))
    for i in range(n):
        for j in range(n):
            h[i, j] = lam * h1[i, j]
        h[i, i] += sz[i]
    out = h.astype(np.complex128)
    if sta and rate != 0.0:
        e, v = np.linalg.eigh(h)
        k, status = cd_generator_kernel(h1, e, v, gap_tol, coupling_tol)
        if status != OK:
            return out, status
        out = out + 1j * rate * k
    return out, OK


@njit(cache=True)
def _comm(a, b):
    return a @ b - b @ a


@njit(cache=True)
def magnus_generator(hs, dt):
    """Hermitian G with exp(-i G) the Magnus step built from node Hamiltonians.

    One node: midpoint rule. Two Gauss-Legendre nodes: fourth-order Magnus.
    Three Gauss-Legendre nodes: sixth-order Magnus (Blanes-Casas-Ros form).
    """
    n_nodes = len(hs)
    if n_nodes == 1:
        return dt * hs[0]
    if n_nodes == 2:
        ha, hb = hs[0], hs[1]
        g = 0.5 * dt * (ha + hb) - 1j * (np.sqrt(3.0) * dt * dt / 12.0) * _comm(hb, ha)
    else:
        # work with A = -i H, then G = i * Omega
        a1 = -1j * dt * hs[1]
        a2 = -1j * (np.sqrt(15.0) * dt / 3.0) * (hs[2] - hs[0])
        a3 = -1j * (10.0 * dt / 3.0) * (hs[2] - 2.0 * hs[1] + hs[0])
        c1 = _comm(a1, a2)
        c2 = -_comm(a1, 2.0 * a3 + c1) / 60.0
        omega = a1 + a3 / 12.0 + _comm(-20.0 * a1 - a3 + c1, a2 + c2) / 240.0
        g = 1j * omega
    return 0.5 * (g + np.conj(g.T))


# [6/6] Pade coefficients of exp
_PADE6 = np.array([1.0, 1.0 / 2, 5.0 / 44, 1.0 / 66, 1.0 / 792, 1.0 / 15840, 1.0 / 665280])


@njit(cache=True)
def expm_skew(g):
    """exp(-i g) for Hermitian g by scaled [6/6] Pade plus squaring.

    Diagonal Pade approximants map the imaginary axis onto the unit circle, so
    the result is unitary up to rounding.
    """
    n = g.shape[0]
    norm1 = 0.0
    for j in range(n):
        col = 0.0
        for i in range(n):
            col += abs(g[i, j])
        norm1 = max(norm1, col)
    squarings = 0
    if norm1 > 0.5:
        squarings = int(np.ceil(np.log2(norm1 / 0.5)))
    x = (-1j / 2.0 ** squarings) * g
    x2 = x @ x
    x4 = x2 @ x2
    x6 = x4 @ x2
    ident = np.eye(n, dtype=np.complex128)
    c = _PADE6
    even = c[0] * ident + c[2] * x2 + c[4] * x4 + c[6] * x6
    odd = x @ (c[1] * ident + c[3] * x2 + c[5] * x4)
    u = np.ascontiguousarray(np.linalg.solve(even - odd, even + odd))
    for _ in range(squarings):
        u = u @ u
    return u


@njit(cache=True)
def _h1_moments(h1c, psi):
    hp = h1c @ psi
    return (np.vdot(psi, hp)).real, (np.vdot(hp, hp)).real


@njit(cache=True)
def propagate_block(h1, sz, psi0, lam, rate, dt, sta, stride, gap_tol, coupling_tol):
    """Unitary stepper on one block, psi <- exp(-i G_k) psi.

    ``lam`` and ``rate`` have shape (n_steps, n_nodes), holding lambda and
    dlambda/dt at the quadrature nodes of each step (see magnus_generator).
    Returns (sampled states, <H1> and <H1^2> after every step, status,
    failing step index). The per-step moments let the energy cost be
    integrated at the resolution of the integrator rather than of the samples.
    """
    n_steps, n_nodes = lam.shape
    n = psi0.shape[0]
    n_samples = n_steps // stride + 1
    out = np.empty((n_samples, n), dtype=np.complex128)
    moments = np.zeros((n_steps + 1, 2))
    h1c = h1.astype(np.complex128)
    psi = psi0.copy()
    out[0] = psi
    moments[0, 0], moments[0, 1] = _h1_moments(h1c, psi)
    for step in range(n_steps):
        hs = []
        for q in range(n_nodes):
            h, status = block_hamiltonian(h1, sz, lam[step, q], rate[step, q], sta,
                                          gap_tol, coupling_tol)
            if status != OK:
                return out, moments, status, step
            hs.append(h)
        psi = expm_skew(magnus_generator(hs, dt)) @ psi
        moments[step + 1, 0], moments[step + 1, 1] = _h1_moments(h1c, psi)
        if (step + 1) % stride == 0:
            out[(step + 1) // stride] = psi
    return out, moments, OK, -1


@njit(cache=True)
def propagate_fixed(u, psi0, n_steps, stride):
    """Repeated application of one precomputed step unitary."""
    n_samples = n_steps // stride + 1
    out = np.empty((n_samples, psi0.shape[0]), dtype=np.complex128)
    psi = psi0.copy()
    out[0] = psi
    for step in range(n_steps):
        psi = u @ psi
        if (step + 1) % stride == 0:
            out[(step + 1) // stride] = psi
    return out
