"""Compiled simulation of many small quanvolution patch circuits.

One circuit per patch: ``depth`` repetitions of
``RY(x_q)`` then ``RX(theta[r, q])`` on every qubit, then the CNOT chain
``(0,1), (1,2), ...``; finally ``<Z>`` of every qubit. Same qubit ordering as
:mod:`resqunn.qsim` (qubit 0 is the most significant bit).

The shifted evaluations reuse the state at the start of the repetition that
holds the shifted gate, so only the suffix of the circuit is re-simulated.
"""

import numpy as np
from numba import njit

HALF_PI = np.pi / 2


@njit(cache=True)
def _rep(state, n, cy, sy, theta_row):
    dim = state.size
    for q in range(n):
        cx = np.cos(theta_row[q] * 0.5)
        sx = np.sin(theta_row[q] * 0.5)
        # RX(theta) @ RY(x)
        m00 = complex(cx * cy[q], -sx * sy[q])
        m01 = complex(-cx * sy[q], -sx * cy[q])
        m10 = complex(cx * sy[q], -sx * cy[q])
        m11 = complex(cx * cy[q], sx * sy[q])
        stride = 1 << (n - 1 - q)
        for i in range(dim):
            if i & stride == 0:
                j = i | stride
                a = state[i]
                b = state[j]
                state[i] = m00 * a + m01 * b
                state[j] = m10 * a + m11 * b
    for c in range(n - 1):
        cbit = 1 << (n - 1 - c)
        tbit = 1 << (n - 2 - c)
        for i in range(dim):
            if i & cbit and not i & tbit:
                j = i | tbit
                tmp = state[i]
                state[i] = state[j]
                state[j] = tmp


@njit(cache=True)
def _expz(state, n, out):
    for q in range(n):
        out[q] = 0.0
    for i in range(state.size):
        p = state[i].real ** 2 + state[i].imag ** 2
        for q in range(n):
            if i & (1 << (n - 1 - q)):
                out[q] -= p
            else:
                out[q] += p


@njit(cache=True)
def patch_expvals(angles, theta):
    """angles: (N, n) encoding angles, theta: (depth, n). Returns (N, n) <Z> values."""
    n_patch, n = angles.shape
    depth = theta.shape[0]
    out = np.empty((n_patch, n))
    state = np.empty(1 << n, dtype=np.complex128)
    cy = np.empty(n)
    sy = np.empty(n)
    ez = np.empty(n)
    for k in range(n_patch):
        for q in range(n):
            cy[q] = np.cos(angles[k, q] * 0.5)
            sy[q] = np.sin(angles[k, q] * 0.5)
        state[:] = 0.0
        state[0] = 1.0
        for r in range(depth):
            _rep(state, n, cy, sy, theta[r])
        _expz(state, n, ez)
        out[k, :] = ez
    return out


@njit(cache=True)
def patch_expvals_and_shift_grads(angles, theta):
    """As :func:`patch_expvals`, plus d<Z_q>/d theta[r, p] by the parameter-shift rule.

    Returns ``(expvals (N, n), grads (N, depth * n, n))`` where the middle axis
    of ``grads`` runs over ``theta.ravel()``.
    """
    n_patch, n = angles.shape
    depth = theta.shape[0]
    dim = 1 << n
    out = np.empty((n_patch, n))
    grads = np.zeros((n_patch, depth * n, n))
    snaps = np.empty((depth, dim), dtype=np.complex128)
    state = np.empty(dim, dtype=np.complex128)
    shifted = theta.copy()
    cy = np.empty(n)
    sy = np.empty(n)
    ez = np.empty(n)
    for k in range(n_patch):
        for q in range(n):
            cy[q] = np.cos(angles[k, q] * 0.5)
            sy[q] = np.sin(angles[k, q] * 0.5)
        state[:] = 0.0
        state[0] = 1.0
        for r in range(depth):
            snaps[r, :] = state
            _rep(state, n, cy, sy, theta[r])
        _expz(state, n, ez)
        out[k, :] = ez
        for r in range(depth):
            for p in range(n):
                col = r * n + p
                for sign in (1.0, -1.0):
                    shifted[r, p] = theta[r, p] + sign * HALF_PI
                    state[:] = snaps[r]
                    for rr in range(r, depth):
                        _rep(state, n, cy, sy, shifted[rr])
                    _expz(state, n, ez)
                    for q in range(n):
                        grads[k, col, q] += 0.5 * sign * ez[q]
                shifted[r, p] = theta[r, p]
    return out, grads
