"""Compiled inner loops: pinned partition recursion and backward polymer sampler."""

from __future__ import annotations

import numpy as np
from numba import njit

BLOCK = 64
# rescale a block once a new entry exceeds its shift by this much (e^300 is safe)
_RESCALE = 300.0
# fields beyond this magnitude may underflow inside a block; use the log kernel
FIELD_LIMIT = 100.0


@njit(cache=True)
def _pinned_blocked(K, field, N, block):
    """Blocked linear-space recursion ``Z(n) = e^{field[n]} sum_k K(k) Z(n-k)``.

    Values are stored as ``z[j] * exp(shift[block(j)])`` so that each window
    sum only needs one exponential per block. ``field`` has shape (N+1, S).
    """
    S = field.shape[1]
    kmax = min(K.shape[0] - 1, N)
    logz = np.full((N + 1, S), -np.inf)
    z = np.zeros((N + 1, S))
    nb = N // block + 1
    shift = np.full((nb, S), -np.inf)
    logz[0, :] = 0.0
    shift[0, :] = 0.0
    z[0, :] = 1.0
    acc = np.zeros(S)
    total = np.zeros(S)
    smax = np.empty(S)
    for n in range(1, N + 1):
        lo = max(n - kmax, 0)
        b_lo = lo // block
        b_hi = (n - 1) // block
        smax[:] = -np.inf
        for b in range(b_lo, b_hi + 1):
            for s in range(S):
                if shift[b, s] > smax[s]:
                    smax[s] = shift[b, s]
        total[:] = 0.0
        for b in range(b_lo, b_hi + 1):
            j0 = max(b * block, lo)
            j1 = min((b + 1) * block, n)
            acc[:] = 0.0
            for j in range(j0, j1):
                kk = K[n - j]
                for s in range(S):
                    acc[s] += kk * z[j, s]
            for s in range(S):
                if shift[b, s] != -np.inf:
                    total[s] += acc[s] * np.exp(shift[b, s] - smax[s])
        b = n // block
        for s in range(S):
            if total[s] > 0.0:
                lz = np.log(total[s]) + smax[s] + field[n, s]
                logz[n, s] = lz
                if shift[b, s] == -np.inf:
                    shift[b, s] = lz
                elif lz - shift[b, s] > _RESCALE:
                    scale = np.exp(shift[b, s] - lz)
                    for j in range(b * block, n):
                        z[j, s] *= scale
                    shift[b, s] = lz
                z[n, s] = np.exp(lz - shift[b, s])
    return logz


@njit(cache=True)
def _pinned_logsumexp(logK, field, N):
    """Reference log-space recursion (max-shifted log-sum-exp per term)."""
    S = field.shape[1]
    kmax = min(logK.shape[0] - 1, N)
    logz = np.full((N + 1, S), -np.inf)
    logz[0, :] = 0.0
    for s in range(S):
        for n in range(1, N + 1):
            lo = max(n - kmax, 0)
            m = -np.inf
            for j in range(lo, n):
                v = logK[n - j] + logz[j, s]
                if v > m:
                    m = v
            if m == -np.inf:
                continue
            acc = 0.0
            for j in range(lo, n):
                acc += np.exp(logK[n - j] + logz[j, s] - m)
            logz[n, s] = m + np.log(acc) + field[n, s]
    return logz


def pinned_log_partition(K: np.ndarray, field: np.ndarray, N: int) -> np.ndarray:
    """``logZ[0..N, s]`` for every column ``s`` of ``field`` (row 0 unused)."""
    field = np.ascontiguousarray(field, dtype=float)
    if field.ndim == 1:
        field = field[:, None]
    K = np.ascontiguousarray(K[: N + 1], dtype=float)
    finite = field[1 : N + 1]
    if finite.size and np.max(np.abs(finite)) > FIELD_LIMIT:
        with np.errstate(divide="ignore"):
            logK = np.log(K)
        return _pinned_logsumexp(logK, field, N)
    return _pinned_blocked(K, field, N, BLOCK)


@njit(cache=True)
def _backward_sample(logK, field, logz, N, uniforms):
    """Draw a pinned path from ``N`` back to 0; returns points in decreasing order."""
    kmax = logK.shape[0] - 1
    out = np.empty(N + 1, dtype=np.int64)
    out[0] = N
    m = 1
    j = N
    t = 0
    while j > 0:
        u = uniforms[t]
        t += 1
        base = field[j] - logz[j]
        cum = 0.0
        last = -1
        chosen = -1
        for k in range(1, min(j, kmax) + 1):
            lk = logK[k]
            lzp = logz[j - k]
            if lk == -np.inf or lzp == -np.inf:
                continue
            cum += np.exp(base + lk + lzp)
            last = k
            if cum > u:
                chosen = k
                break
        if chosen < 0:
            # rounding left a sliver of mass: the last admissible gap absorbs it
            chosen = last
        j -= chosen
        out[m] = j
        m += 1
    return out[:m][::-1].copy()


def backward_sample(
    logK: np.ndarray, field: np.ndarray, logz: np.ndarray, N: int, rng: np.random.Generator
) -> np.ndarray:
    uniforms = rng.random(N + 1)
    return _backward_sample(
        np.ascontiguousarray(logK, dtype=float),
        np.ascontiguousarray(field, dtype=float),
        np.ascontiguousarray(logz, dtype=float),
        N,
        uniforms,
    )
