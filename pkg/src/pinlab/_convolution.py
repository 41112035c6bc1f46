"""Online solver for renewal-type convolution equations.

Solves ``x[n] = b[n] + sum_{j=1}^{n} c[j] * x[n - j]`` for ``n = 0..N`` with
divide and conquer: the left half of every block is pushed onto the right
half with one convolution, so the total cost is O(N log^2 N). Small blocks
use direct summation, which keeps moderate sizes exact to rounding.
"""

from __future__ import annotations

import numpy as np
from numba import njit
from scipy.signal import fftconvolve

_LEAF = 64
# direct np.convolve below this many multiply-adds per block push
_DIRECT_WORK = 4_000_000


@njit(cache=True)
def _leaf(x, acc, b, c, lo, hi):
    for n in range(lo, hi):
        s = acc[n]
        for m in range(lo, n):
            s += c[n - m] * x[m]
        x[n] = b[n] + s


def renewal_solve(c: np.ndarray, b: np.ndarray, N: int) -> np.ndarray:
    """Return ``x[0..N]`` solving the convolution equation above.

    ``c[0]`` is ignored; ``c`` may be shorter than ``N + 1`` (implicit zeros).
    ``b`` must have length at least ``N + 1``; ``x[0] = b[0]``.
    """
    size = 1
    while size < N + 1:
        size *= 2
    cc = np.zeros(size + 1)
    m = min(len(c), size + 1)
    cc[1:m] = c[1:m]
    bb = np.zeros(size)
    bb[: N + 1] = b[: N + 1]
    x = np.zeros(size)
    acc = np.zeros(size)

    def solve(lo: int, hi: int) -> None:
        if lo > N:
            return
        if hi - lo <= _LEAF:
            _leaf(x, acc, bb, cc, lo, min(hi, N + 1))
            return
        mid = (lo + hi) // 2
        solve(lo, mid)
        if mid <= N:
            top = min(hi, N + 1)
            left = x[lo:mid]
            kern = cc[: top - lo]
            if len(left) * len(kern) <= _DIRECT_WORK:
                seg = np.convolve(left, kern)
            else:
                seg = fftconvolve(left, kern)
            acc[mid:top] += seg[mid - lo : top - lo]
        solve(mid, hi)

    solve(0, size)
    return x[: N + 1].copy()
