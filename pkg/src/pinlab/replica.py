"""Two-replica diagnostics: intersection counts, overlap moments and the psi functional."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Literal

import numpy as np
from numba import njit
from scipy import signal

from ._convolution import renewal_solve
from .errors import ParameterError, SizeError, UnreliableEstimateError
from .homogeneous import partition_trace, sample_polymers
from .quenched import DisorderBatch, interpolation_gap
from .renewal import RenewalLaw, _check_horizon, _renewal_path, first_intersection_law

EXACT_MAX_N = 10_000
PSI_EXACT_MAX_N = 300
MIN_SIMULATED = 1000
MAX_WEIGHT_SHARE = 0.5
_DIRECT_CONV = 2048


@dataclass(frozen=True, eq=False)
class IntersectionCountDistribution:
    """Law of ``|tau1 ∩ tau2 ∩ [1, N]|`` for two independent free renewals.

    ``tail[k] = P(count >= k)`` for ``k = 0..k_max + 1`` (exact source);
    ``pmf[k]`` for ``k = 0..k_max``. For the simulated source ``counts``
    holds the raw per-pair counts.
    """

    N: int
    pmf: np.ndarray
    tail: np.ndarray
    source: Literal["exact_via_Q", "simulated"]
    counts: np.ndarray | None = None

    @property
    def k_max(self) -> int:
        return self.pmf.size - 1

    def tail_at(self, k: int) -> float:
        return float(self.tail[k]) if k < self.tail.size else 0.0


def _convolve(a: np.ndarray, b: np.ndarray, n: int) -> np.ndarray:
    if a.size <= _DIRECT_CONV:
        out = np.convolve(a, b)[: n + 1]
    else:
        out = signal.fftconvolve(a, b)[: n + 1]
        np.maximum(out, 0.0, out=out)
    return out


def intersection_count_exact(law: RenewalLaw, N: int, k_max: int) -> IntersectionCountDistribution:
    """``P(count >= k)`` as the mass of the ``k``-fold convolution of ``Q`` on ``[1, N]``.

    The last pmf entry is exact; mass beyond ``k_max`` is kept in ``tail[k_max + 1]``.
    """
    if N > EXACT_MAX_N:
        raise SizeError(f"exact intersection counts are limited to N <= {EXACT_MAX_N}")
    if k_max < 1:
        raise ParameterError("k_max must be >= 1")
    Q = np.array(first_intersection_law(law, N))
    tail = np.zeros(k_max + 2)
    tail[0] = 1.0
    conv = Q.copy()
    for k in range(1, k_max + 2):
        tail[k] = math.fsum(conv[1:])
        if tail[k] == 0.0 or k == k_max + 1:
            break
        conv = _convolve(conv, Q, N)
    pmf = tail[:-1] - tail[1:]
    return IntersectionCountDistribution(N, pmf, tail, "exact_via_Q")


def _pair_counts(law: RenewalLaw, N: int, samples: int, rng: np.random.Generator) -> np.ndarray:
    counts = np.empty(samples, dtype=np.int64)
    for i in range(samples):
        a = _renewal_path(law, N, rng)
        b = _renewal_path(law, N, rng)
        counts[i] = np.intersect1d(a, b, assume_unique=True).size - 1
    return counts


def intersection_count_simulated(
    law: RenewalLaw, N: int, samples: int, seed: int
) -> IntersectionCountDistribution:
    """Empirical count law from ``samples`` pairs of independent free renewals."""
    if samples < MIN_SIMULATED:
        raise ParameterError(f"need at least {MIN_SIMULATED} samples")
    _check_horizon(law, N)
    counts = _pair_counts(law, N, samples, np.random.default_rng(seed))
    pmf = np.bincount(counts) / samples
    tail = np.concatenate((np.cumsum(pmf[::-1])[::-1], [0.0]))
    return IntersectionCountDistribution(N, pmf, tail, "simulated", counts)


@dataclass(frozen=True)
class OverlapMoment:
    """``E[exp(c * count)]`` with its error bookkeeping.

    ``remainder`` bounds the neglected part of the exact series
    (``sum_{k > k_max} e^{c k} P(count = k)``); ``max_weight_share`` is the
    largest single-pair share of the total weight (simulated mode).
    """

    value: float
    remainder: float
    std_error: float
    max_weight_share: float
    k_max: int


def overlap_moment(
    law: RenewalLaw,
    c: float,
    N: int,
    mode: Literal["exact", "simulated"] = "exact",
    budget: int | None = None,
    seed: int = 0,
) -> OverlapMoment:
    """Exponential moment of the intersection count under the free pair law.

    In exact mode without ``budget`` the moment comes from the renewal
    equation of the intersection process (no truncation); with ``budget``
    it is summed over the count law up to ``k_max = budget`` and the
    neglected part is bounded in ``remainder``. In simulated mode ``budget``
    is the number of pairs (default 10^4).
    """
    if c == 0:
        return OverlapMoment(1.0, 0.0, 0.0, 0.0, 0)
    if mode == "exact":
        if N > EXACT_MAX_N:
            raise SizeError(f"exact mode is limited to N <= {EXACT_MAX_N}")
        if budget is None:
            # renewal structure of the intersections: exact, O(N log N)
            return OverlapMoment(overlap_moment_generating(law, c, N), 0.0, 0.0, 0.0, N)
        k_max = min(N, budget)
        dist = intersection_count_exact(law, N, k_max)
        k = np.arange(dist.pmf.size)
        value = math.fsum(np.exp(c * k) * dist.pmf)
        beyond = dist.tail_at(k_max + 1)
        # counts never exceed N
        remainder = beyond * (math.exp(c * N) if c > 0 else math.exp(c * (k_max + 1)))
        return OverlapMoment(value, remainder, 0.0, 0.0, k_max)
    if mode == "simulated":
        samples = budget or 10_000
        dist = intersection_count_simulated(law, N, samples, seed)
        x = c * dist.counts.astype(float)
        m = x.max()
        w = np.exp(x - m)
        total = w.sum()
        value = math.exp(m) * total / samples
        se = math.exp(m) * float(np.std(w, ddof=1)) / math.sqrt(samples)
        return OverlapMoment(value, 0.0, se, float(w.max() / total), int(dist.counts.max()))
    raise ParameterError(f"unknown mode {mode!r}")


def overlap_moment_generating(law: RenewalLaw, c: float, N: int) -> float:
    """Same moment from the renewal structure of the intersection process.

    With ``Y(n) = e^c sum_m Q(m) Y(n - m)``, ``Y(0) = 1``, one has
    ``E[e^{c count}] = 1 + (1 - e^{-c}) sum_{n=1}^N Y(n)``; no truncation in ``k``.
    """
    Q = np.array(first_intersection_law(law, N))
    b = np.zeros(N + 1)
    b[0] = 1.0
    Y = renewal_solve(math.exp(c) * Q, b, N)
    return 1.0 - math.expm1(-c) * math.fsum(Y[1:])


@dataclass(frozen=True)
class PsiEstimate:
    value: float
    std_error: float
    max_weight_share: float
    samples: int


def _overlaps(paths: list[np.ndarray]) -> np.ndarray:
    pairs = len(paths) // 2
    out = np.empty(pairs)
    for i in range(pairs):
        out[i] = np.intersect1d(paths[2 * i], paths[2 * i + 1], assume_unique=True).size - 1
    return out


def estimate_psi0(
    law: RenewalLaw,
    delta: float,
    lambda_beta_sq: float,
    N: int,
    samples: int,
    seed: int,
) -> PsiEstimate:
    """``psi_{N,delta}(0, lambda, beta) = (1/2N) log <exp(lambda beta^2 overlap)>_{N,delta}``.

    Pairs of independent pinned polymers are drawn exactly; the standard
    error goes through the logarithm by the delta method.
    """
    if not delta > 0:
        raise ParameterError("delta must be positive")
    if samples < 2:
        raise ParameterError("need at least two pair samples")
    if lambda_beta_sq == 0:
        return PsiEstimate(0.0, 0.0, 0.0, samples)
    paths = sample_polymers(law, delta, N, 2 * samples, seed)
    x = lambda_beta_sq * _overlaps(paths)
    m = float(x.max())
    w = np.exp(x - m)
    total = float(w.sum())
    share = float(w.max()) / total
    if share > MAX_WEIGHT_SHARE:
        raise UnreliableEstimateError(
            f"one pair carries {share:.2f} of the total weight (> {MAX_WEIGHT_SHARE})"
        )
    mean = total / samples
    se_rel = float(np.std(w, ddof=1)) / math.sqrt(samples) / mean
    value = (m + math.log(mean)) / (2 * N)
    return PsiEstimate(value, se_rel / (2 * N), share, samples)


@njit(cache=True)
def _pair_dp(wgap, ec, N):
    # G[a, b]: tilted weight of replica pairs whose last renewals are a and b;
    # the replica that lags behind is always the one extended
    kmax = wgap.shape[0] - 1
    G = np.zeros((N + 1, N + 1))
    G[0, 0] = 1.0
    for s in range(2 * N):
        for a in range(max(0, s - N), min(s, N) + 1):
            b = s - a
            g = G[a, b]
            if g == 0.0:
                continue
            if a <= b:
                for a2 in range(a + 1, min(N, a + kmax) + 1):
                    w = g * wgap[a2 - a]
                    if a2 == b:
                        w *= ec
                    G[a2, b] += w
            else:
                for b2 in range(b + 1, min(N, b + kmax) + 1):
                    w = g * wgap[b2 - b]
                    if b2 == a:
                        w *= ec
                    G[a, b2] += w
    return G[N, N]


def psi0_exact(
    law: RenewalLaw, delta: float, lambda_beta_sq: float, N: int, max_N: int = PSI_EXACT_MAX_N
) -> float:
    """Exact ``psi_{N,delta}(0, lambda, beta)`` by a dynamic program over both replicas, O(N^3)."""
    if N > max_N:
        raise SizeError(f"exact pair transfer is limited to N <= {max_N}")
    logZ = partition_trace(law, 0.0, delta, N).logZ
    theta = float(logZ[N]) / N
    k = np.arange(min(law.N_max, N) + 1)
    wgap = np.exp(delta - theta * k) * law.masses[: k.size]
    wgap[0] = 0.0
    ratio = _pair_dp(wgap, math.exp(lambda_beta_sq), N)
    return math.log(ratio) / (2 * N)


@dataclass(frozen=True)
class IntegratingCheck:
    """``0 <= -R <= (e - 1) psi`` with three-sigma allowances."""

    minus_R: float
    minus_R_se: float
    psi: float
    psi_se: float
    max_weight_share: float

    @property
    def upper_rhs(self) -> float:
        return (math.e - 1) * self.psi + 3 * self.combined_se

    @property
    def combined_se(self) -> float:
        return math.hypot(self.minus_R_se, (math.e - 1) * self.psi_se)

    @property
    def lower_margin(self) -> float:
        return self.minus_R + 3 * self.minus_R_se

    @property
    def upper_margin(self) -> float:
        return self.upper_rhs - self.minus_R

    @property
    def passed(self) -> bool:
        return self.lower_margin >= 0 and self.upper_margin >= 0


def check_integrating_inequality(
    law: RenewalLaw,
    beta: float,
    delta: float,
    N: int,
    batch: DisorderBatch,
    samples: int,
    seed: int,
    workers: int = 1,
) -> IntegratingCheck:
    """Compare ``-R_{N,delta}(beta)`` with ``(e - 1) psi_{N,delta}(0, 2, beta)``."""
    R = interpolation_gap(law, beta, delta, N, batch, workers)
    psi = estimate_psi0(law, delta, 2 * beta * beta, N, samples, seed)
    return IntegratingCheck(-R.mean, R.std_error, psi.value, psi.std_error, psi.max_weight_share)
