"""Renewal inter-arrival laws, mass functions and the intersection renewal.

A law is stored as the array ``K[0..N_max]`` (``K[0] = 0``) plus an optional
``tail_mass`` located beyond ``N_max``. The tail is described by a model so
that Laplace-type sums over the *infinite* law can still be evaluated:

``"none"``
    tail mass sits at infinity (defective or truncated laws);
``"power"``
    ``K(n) ~ c n^{-1-alpha}`` beyond ``N_max``, with ``c`` fixed by the mass;
``"srw1d"``
    the exact generating function ``1 - sqrt(1 - x)`` of 1d SRW returns.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property, lru_cache
from typing import Literal

import numpy as np
from scipy import integrate, special

from ._convolution import renewal_solve
from .errors import BoundViolation, DegenerateLawError, DomainError, ParameterError

RECURRENCE_TOL = 1e-12
NEGATIVE_Q_TOL = 1e-14
# e^{-41.5} < 1e-18: terms beyond n = 41.5 / F are below the series cutoff
_EXP_CUT = 41.5

# Sum_{n>=0} P(S_2n = 0) for the simple random walk on Z^3 (Watson's integral).
WATSON_G = (
    math.sqrt(6.0)
    / (32.0 * math.pi**3)
    * math.gamma(1 / 24)
    * math.gamma(5 / 24)
    * math.gamma(7 / 24)
    * math.gamma(11 / 24)
)


@dataclass(frozen=True)
class SlowlyVarying:
    """Slowly varying modulation ``L(n)`` of a power-law tail.

    ``constant``: ``L(n) = c``. ``log_power``: ``L(n) = c * log(n + offset)**gamma``.
    """

    kind: Literal["constant", "log_power"] = "constant"
    c: float = 1.0
    gamma: float = 0.0
    offset: float = 2.0

    def __post_init__(self) -> None:
        if self.kind not in ("constant", "log_power"):
            raise ParameterError(f"unknown slowly varying kind {self.kind!r}")
        if not (self.c > 0 and math.isfinite(self.c)):
            raise ParameterError("slowly varying prefactor c must be positive")
        if self.kind == "log_power" and not self.offset >= 2:
            raise ParameterError("log_power offset must be >= 2")

    @classmethod
    def constant(cls, c: float = 1.0) -> SlowlyVarying:
        return cls("constant", c=c)

    @classmethod
    def log_power(cls, gamma: float, offset: float = 2.0, c: float = 1.0) -> SlowlyVarying:
        return cls("log_power", c=c, gamma=gamma, offset=offset)

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        if self.kind == "constant":
            return np.full_like(x, self.c) if x.ndim else float(self.c)
        out = self.c * np.log(x + self.offset) ** self.gamma
        return out if x.ndim else float(out)

    def of_log(self, t: float) -> float:
        """``L(e^t)`` without forming ``e^t``."""
        if self.kind == "constant":
            return self.c
        return self.c * (t + math.log1p(self.offset * math.exp(-t))) ** self.gamma

    def derivative(self, x: float) -> float:
        if self.kind == "constant":
            return 0.0
        lg = math.log(x + self.offset)
        return self.c * self.gamma * lg ** (self.gamma - 1.0) / (x + self.offset)

    def describe(self) -> str:
        if self.kind == "constant":
            return f"constant({self.c:g})"
        return f"log_power(gamma={self.gamma:g}, offset={self.offset:g}, c={self.c:g})"


def _upper_gamma(s: float, x: float) -> float:
    """Upper incomplete gamma ``Gamma(s, x)`` for any real ``s`` and ``x > 0``."""
    if s > 0:
        return float(special.gamma(s) * special.gammaincc(s, x))
    if s == 0:
        return float(special.exp1(x))
    return (_upper_gamma(s + 1.0, x) - x**s * math.exp(-x)) / s


@dataclass(frozen=True, eq=False)
class RenewalLaw:
    """Inter-arrival law ``K(n) = P(tau_1 = n)`` truncated at ``N_max``.

    Attributes
    ----------
    masses : ndarray
        ``K[0..N_max]`` with ``K[0] = 0``; read-only.
    alpha : float
        Tail exponent (``nan`` for laws without one).
    L : SlowlyVarying or None
        Shape of the slowly varying function, as specified by the user.
    tail_mass : float
        Probability located beyond ``N_max``.
    tail_model : {"none", "power", "srw1d"}
        How the tail mass is spread (see module docstring).
    scale : float
        Normalisation such that ``K(n) ~ scale * L(n) / n^{1+alpha}``.
    truncation_bias : float
        Pre-normalisation mass discarded by truncation (0 when not truncated).
    """

    masses: np.ndarray
    alpha: float = math.nan
    L: SlowlyVarying | None = None
    tail_mass: float = 0.0
    tail_model: Literal["none", "power", "srw1d"] = "none"
    scale: float = 1.0
    truncation_bias: float = 0.0
    name: str = "custom"

    def __post_init__(self) -> None:
        K = np.array(self.masses, dtype=float)
        if K.ndim != 1 or K.size < 2:
            raise ParameterError("masses must be a 1-d array K[0..N_max] with N_max >= 1")
        if not np.all(np.isfinite(K)) or np.any(K < 0):
            raise ParameterError("masses must be finite and non-negative")
        if K[0] != 0:
            raise ParameterError("K[0] must be 0")
        if not (self.tail_mass >= 0 and math.isfinite(self.tail_mass)):
            raise ParameterError("tail_mass must be finite and non-negative")
        if self.tail_model not in ("none", "power", "srw1d"):
            raise ParameterError(f"unknown tail model {self.tail_model!r}")
        if self.tail_model == "power" and self.tail_mass > 0 and not self.alpha > 0:
            raise ParameterError("power tail model needs alpha > 0")
        K.setflags(write=False)
        object.__setattr__(self, "masses", K)

    @property
    def N_max(self) -> int:
        return self.masses.size - 1

    @cached_property
    def total_mass(self) -> float:
        return math.fsum(self.masses) + self.tail_mass

    @property
    def is_recurrent(self) -> bool:
        return abs(self.total_mass - 1.0) <= RECURRENCE_TOL

    def K(self, n):
        n = np.asarray(n)
        inside = (n >= 0) & (n <= self.N_max)
        return np.where(inside, self.masses[np.clip(n, 0, self.N_max)], 0.0)

    def L_eff(self, x):
        """Slowly varying function of the normalised law, ``K(n) n^{1+alpha}`` asymptotically."""
        if self.L is None:
            raise DomainError(f"law {self.name!r} carries no slowly varying metadata")
        return self.scale * self.L(x)

    @cached_property
    def _n(self) -> np.ndarray:
        return np.arange(self.N_max + 1, dtype=float)

    @cached_property
    def _suffix(self) -> np.ndarray:
        # _suffix[m] = sum_{n >= m, n <= N_max} K(n)
        s = np.cumsum(self.masses[::-1])[::-1]
        return np.append(s, 0.0)

    @cached_property
    def cdf(self) -> np.ndarray:
        c = np.cumsum(self.masses)
        c.setflags(write=False)
        return c

    # ------------------------------------------------------------------
    # Laplace-type sums over the full law, tail included

    def _cut(self, F: float) -> int:
        if F <= 0:
            return self.N_max
        return int(min(self.N_max, math.ceil(_EXP_CUT / F)))

    def laplace_deficit(self, F: float) -> float:
        """``sum_n (1 - e^{-F n}) K(n)``, i.e. ``total_mass - sum_n e^{-F n} K(n)``."""
        if F < 0:
            raise ParameterError("F must be non-negative")
        if self.tail_model == "srw1d":
            return self.total_mass * math.sqrt(-math.expm1(-F))
        m = self._cut(F)
        head = float(np.dot(-np.expm1(-F * self._n[1 : m + 1]), self.masses[1 : m + 1]))
        if m < self.N_max:
            return head + float(self._suffix[m + 1]) + self.tail_mass
        return head + self._tail_deficit(F)

    def laplace_moment(self, F: float, k: int) -> float:
        """``sum_n n^k e^{-F n} K(n)`` for ``k >= 1`` and ``F > 0``."""
        if not F > 0:
            raise ParameterError("moments need F > 0")
        if self.tail_model == "srw1d":
            x = math.exp(-F)
            one = -math.expm1(-F)
            m1 = x / (2.0 * math.sqrt(one))
            if k == 1:
                return self.total_mass * m1
            if k == 2:
                return self.total_mass * (m1 + x * x / (4.0 * one**1.5))
            raise ParameterError("closed-form moments only for k in {1, 2}")
        m = self._cut(F)
        n = self._n[1 : m + 1]
        head = float(np.dot(n**k * np.exp(-F * n), self.masses[1 : m + 1]))
        if m < self.N_max:
            return head
        return head + self._tail_moment(F, k)

    @property
    def _tail_start(self) -> float:
        return self.N_max + 0.5

    @property
    def _tail_coeff(self) -> float:
        a = self._tail_start
        return self.tail_mass * self.alpha * a**self.alpha

    def _tail_deficit(self, F: float) -> float:
        if self.tail_mass == 0.0 or F == 0.0:
            return 0.0
        if self.tail_model == "none":
            return self.tail_mass
        a, al = self._tail_start, self.alpha
        b = F * a
        integral = (b**-al * -math.expm1(-b) + _upper_gamma(1.0 - al, b)) / al
        return self._tail_coeff * F**al * integral

    def _tail_moment(self, F: float, k: int) -> float:
        if self.tail_mass == 0.0 or self.tail_model == "none":
            return 0.0
        a, al = self._tail_start, self.alpha
        return self._tail_coeff * F ** (al - k) * _upper_gamma(k - al, F * a)


def from_masses(
    masses,
    *,
    alpha: float = math.nan,
    L: SlowlyVarying | None = None,
    tail_mass: float = 0.0,
    name: str = "custom",
) -> RenewalLaw:
    """Law with ``K(1), K(2), ...`` given explicitly (tail mass at infinity)."""
    K = np.concatenate(([0.0], np.asarray(masses, dtype=float)))
    return RenewalLaw(K, alpha=alpha, L=L, tail_mass=tail_mass, name=name)


def _power_tail_sum(alpha: float, L: SlowlyVarying, N_max: int) -> float:
    """``sum_{n > N_max} L(n) n^{-1-alpha}``."""
    if L.kind == "constant":
        return L.c * float(special.zeta(1.0 + alpha, N_max + 1))
    # midpoint rule in integral form; error O(f'') relative ~ N_max^-2
    a = N_max + 0.5

    def integrand(t: float) -> float:
        return L.of_log(t) * math.exp(-alpha * t)

    val, _ = integrate.quad(integrand, math.log(a), np.inf, limit=200, epsabs=0, epsrel=1e-13)
    return val


def build_power_law(
    alpha: float,
    L: SlowlyVarying | None = None,
    N_max: int = 2**16,
    normalization: Literal["truncate", "exact_tail"] = "truncate",
) -> RenewalLaw:
    """Power-law inter-arrival law ``K(n) ∝ L(n) / n^{1+alpha}``.

    ``normalization="truncate"`` renormalises the first ``N_max`` masses to one
    and reports the discarded mass as ``truncation_bias``. ``"exact_tail"``
    keeps ``K(n)`` equal to the infinite law for ``n <= N_max`` and stores the
    remainder as a power tail, so sums over the infinite law stay available.
    """
    if not (math.isfinite(alpha) and alpha > 0):
        raise ParameterError("alpha must be a positive finite number")
    if int(N_max) != N_max or N_max < 2:
        raise ParameterError("N_max must be an integer >= 2")
    N_max = int(N_max)
    L = L or SlowlyVarying.constant()
    n = np.arange(1, N_max + 1, dtype=float)
    w = L(n) * n ** (-1.0 - alpha)
    head = math.fsum(w)
    tail = _power_tail_sum(alpha, L, N_max)
    label = f"power(alpha={alpha:g}, L={L.describe()}, N_max={N_max}, {normalization})"
    if normalization == "truncate":
        K = np.concatenate(([0.0], w / head))
        return RenewalLaw(
            K, alpha=alpha, L=L, scale=1.0 / head, truncation_bias=tail / (head + tail), name=label
        )
    if normalization == "exact_tail":
        Z = head + tail
        K = np.concatenate(([0.0], w / Z))
        return RenewalLaw(
            K, alpha=alpha, L=L, tail_mass=tail / Z, tail_model="power", scale=1.0 / Z, name=label
        )
    raise ParameterError(f"unknown normalization {normalization!r}")


def srw3d_return_probabilities(N: int) -> np.ndarray:
    """``P(S_{2n} = 0)`` for ``n = 0..N``, simple random walk on Z^3.

    Uses the three-term recurrence of the closed-walk counts on the cubic
    lattice, scaled by ``36^n``; the wanted solution is the dominant one, so
    forward iteration is stable.
    """
    p = np.zeros(N + 1)
    p[0] = 1.0
    if N >= 1:
        p[1] = 1.0 / 6.0
    for k in range(2, N + 1):
        a = 2.0 * (2 * k - 1) * (10.0 * k * k - 10.0 * k + 3.0) * p[k - 1]
        b = (k - 1.0) * (2 * k - 1.0) * (2 * k - 3.0) * p[k - 2]
        p[k] = (a - b) / (36.0 * k**3)
    return p


def _invert_renewal(v: np.ndarray, N: int) -> np.ndarray:
    """First-occurrence law ``Q`` of a renewal with mass function ``v`` (``v[0] = 1``).

    ``Q(n) = v(n) - sum_{k=1}^{n-1} Q(k) v(n-k)``; small negative rounding
    noise is clamped, anything larger is an error.
    """
    b = v[: N + 1].copy()
    b[0] = 0.0
    Q = renewal_solve(-v[: N + 1], b, N)
    # FFT pushes carry absolute error growing with the block length
    tol = NEGATIVE_Q_TOL * max(1.0, (N + 1) / 4096.0)
    worst = float(Q[1:].min()) if N >= 1 else 0.0
    if worst < -tol:
        raise BoundViolation(f"renewal inversion produced Q = {worst:.3e} < 0")
    np.maximum(Q, 0.0, out=Q)
    Q[0] = 0.0
    return Q


def build_srw_returns(variant: Literal["d1_recurrent", "d3_transient"], N_max: int) -> RenewalLaw:
    """Return-to-origin law of the simple random walk, ``tau = {n : S_{2n} = 0}``."""
    if int(N_max) != N_max or N_max < 2:
        raise ParameterError("N_max must be an integer >= 2")
    N_max = int(N_max)
    n = np.arange(1, N_max + 1, dtype=float)
    if variant == "d1_recurrent":
        # r(n) = binom(2n, n) 4^-n by ratios; K(n) = r(n-1) / (2n)
        r = np.cumprod((2.0 * n - 1.0) / (2.0 * n))
        r_prev = np.concatenate(([1.0], r[:-1]))
        K = np.concatenate(([0.0], r_prev / (2.0 * n)))
        return RenewalLaw(
            K,
            alpha=0.5,
            L=SlowlyVarying.constant(1.0 / (2.0 * math.sqrt(math.pi))),
            tail_mass=float(r[-1]),
            tail_model="srw1d",
            name=f"srw_d1(N_max={N_max})",
        )
    if variant == "d3_transient":
        p = srw3d_return_probabilities(N_max)
        K = _invert_renewal(p, N_max)
        sigma = 1.0 - 1.0 / WATSON_G
        tail = max(sigma - math.fsum(K), 0.0)
        c = float(K[-1] * N_max**1.5)
        return RenewalLaw(
            K,
            alpha=0.5,
            L=SlowlyVarying.constant(c),
            tail_mass=tail,
            tail_model="power",
            name=f"srw_d3(N_max={N_max})",
        )
    raise ParameterError(f"unknown SRW variant {variant!r}")


def recurrent_reduction(law: RenewalLaw) -> tuple[RenewalLaw, float]:
    """Normalise a defective law; returns ``(law / Sigma_K, log Sigma_K)``.

    The free energies satisfy ``F(beta, h) = F_reduced(beta, h + log Sigma_K)``.
    """
    sigma = law.total_mass
    if not sigma > 0:
        raise DegenerateLawError("law has zero total mass")
    if sigma > 1.0 + RECURRENCE_TOL:
        raise DomainError(f"total mass {sigma} exceeds 1")
    if law.is_recurrent:
        return law, 0.0
    reduced = RenewalLaw(
        law.masses / sigma,
        alpha=law.alpha,
        L=law.L,
        tail_mass=law.tail_mass / sigma,
        tail_model=law.tail_model,
        scale=law.scale / sigma,
        truncation_bias=law.truncation_bias,
        name=f"{law.name}/reduced",
    )
    return reduced, math.log(sigma)


@dataclass(frozen=True, eq=False)
class MassFunction:
    """``u(n) = P(n in tau)`` for ``n = 0..N``."""

    u: np.ndarray
    law: RenewalLaw

    @property
    def N(self) -> int:
        return self.u.size - 1

    def recursion_residual(self) -> np.ndarray:
        """Relative defect of ``u(n) = sum_k K(k) u(n-k)`` at every ``n >= 1``."""
        K = self.law.masses
        out = np.zeros(self.N)
        for n in range(1, self.N + 1):
            m = min(n, self.law.N_max)
            rhs = float(np.dot(K[1 : m + 1], self.u[n - 1 :: -1][:m]))
            out[n - 1] = abs(self.u[n] - rhs) / max(abs(self.u[n]), 1e-300)
        return out


def _check_horizon(law: RenewalLaw, N: int) -> None:
    if N > law.N_max and law.tail_mass > 0 and law.tail_model != "none":
        raise DomainError(
            f"N = {N} exceeds N_max = {law.N_max} while tail mass {law.tail_mass:.3e} "
            "has unresolved positions; rebuild the law with a larger N_max"
        )


@lru_cache(maxsize=16)
def _mass_array(law: RenewalLaw, N: int) -> np.ndarray:
    b = np.zeros(N + 1)
    b[0] = 1.0
    u = renewal_solve(law.masses, b, N)
    u.setflags(write=False)
    return u


def mass_function(law: RenewalLaw, N: int) -> MassFunction:
    """Renewal mass function by the defining recursion, ``u(0) = 1``."""
    if int(N) != N or N < 1:
        raise ParameterError("N must be an integer >= 1")
    N = int(N)
    _check_horizon(law, N)
    return MassFunction(_mass_array(law, N), law)


def doney_constant(alpha: float) -> float:
    """``C_alpha = alpha sin(pi alpha) / pi``, the mass-function prefactor."""
    return alpha * math.sin(math.pi * alpha) / math.pi


@lru_cache(maxsize=16)
def _first_intersection(law: RenewalLaw, N: int) -> np.ndarray:
    u = _mass_array(law, N)
    Q = _invert_renewal(u * u, N)
    Q.setflags(write=False)
    return Q


def first_intersection_law(law: RenewalLaw, N: int) -> np.ndarray:
    """Law ``Q[0..N]`` (``Q[0] = 0``) of the first common renewal of two independent copies."""
    if int(N) != N or N < 1:
        raise ParameterError("N must be an integer >= 1")
    N = int(N)
    _check_horizon(law, N)
    return _first_intersection(law, N)


def intersection_tail(law: RenewalLaw, N: int) -> float:
    """``P(first common renewal > N) = 1 - sum_{n<=N} Q(n)``."""
    Q = first_intersection_law(law, N)
    return 1.0 - math.fsum(Q[1:])


_ELL_DIRECT = 2_000_000


def marginal_ell(law: RenewalLaw, N: float) -> float:
    """``ell(N) = sum_{n=1}^{N} 1 / (n L(n)^2)`` for ``alpha = 1/2`` laws.

    Sums directly up to two million terms, then continues with the
    Euler-Maclaurin formula (integral plus two boundary corrections).
    """
    if not abs(law.alpha - 0.5) <= 1e-12:
        raise DomainError(f"ell(N) is defined for alpha = 1/2, got alpha = {law.alpha}")
    if law.L is None:
        raise DomainError("law carries no slowly varying metadata")
    return _ell(law.L, N)


def _ell(L: SlowlyVarying, N: float) -> float:
    N = int(math.floor(N))
    if N < 1:
        return 0.0  # empty sum
    M = min(N, _ELL_DIRECT)
    n = np.arange(1, M + 1, dtype=float)
    head = float(np.sum(1.0 / (n * L(n) ** 2)))
    if N == M:
        return head

    def f(x: float) -> float:
        return 1.0 / (x * L(x) ** 2)

    def fprime(x: float) -> float:
        lx = L(x)
        return -f(x) / x - 2.0 * f(x) * L.derivative(x) / lx

    if L.kind == "constant":
        body = math.log(N / M) / L.c**2
    else:
        body, _ = integrate.quad(
            lambda t: 1.0 / L.of_log(t) ** 2, math.log(M), math.log(N), epsabs=0, epsrel=1e-13
        )
    return head + body + (f(N) - f(M)) / 2.0 + (fprime(N) - fprime(M)) / 12.0


def _terminal_index(law: RenewalLaw) -> int:
    return law.N_max + 1


def _draw_gaps(law: RenewalLaw, rng: np.random.Generator, size: int) -> np.ndarray:
    # gap N_max + 1 encodes a jump into the tail (beyond any horizon <= N_max)
    return np.searchsorted(law.cdf, rng.random(size), side="right")


def _renewal_path(law: RenewalLaw, N: int, rng: np.random.Generator) -> np.ndarray:
    points = [np.zeros(1, dtype=np.int64)]
    pos = 0
    chunk = 32
    stop = _terminal_index(law)
    while True:
        gaps = _draw_gaps(law, rng, chunk)
        hit = np.flatnonzero(gaps >= stop)
        if hit.size:
            gaps = gaps[: hit[0]]
        steps = pos + np.cumsum(gaps)
        inside = steps[steps <= N]
        points.append(inside)
        if hit.size or inside.size < steps.size:
            break
        pos = int(steps[-1]) if steps.size else pos
        chunk *= 2
    return np.concatenate(points)


def sample_renewal(law: RenewalLaw, N: int, seed: int) -> np.ndarray:
    """Sample ``tau ∩ [0, N]`` under the free (unconditioned) law.

    Jumps into the tail mass end the path, which is exact whenever
    ``N <= N_max`` or the tail sits at infinity.
    """
    if int(N) != N or N < 1:
        raise ParameterError("N must be an integer >= 1")
    N = int(N)
    _check_horizon(law, N)
    return _renewal_path(law, N, np.random.default_rng(seed))
