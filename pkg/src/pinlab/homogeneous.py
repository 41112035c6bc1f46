"""Homogeneous (beta = 0) pinning model: exact free energy, finite volume and sampling."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy import optimize

from ._kernels import backward_sample, pinned_log_partition
from .errors import BoundaryError, DomainError, ParameterError
from .renewal import RenewalLaw

SOLVER_RTOL = 4 * np.finfo(float).eps


@dataclass(frozen=True)
class HomogeneousSolution:
    """``F(0, delta)`` with its first two derivatives in ``delta``.

    ``residual`` is ``|sum_n e^{-F n} K(n) - e^{-delta}|`` at the returned F.
    """

    delta: float
    F: float
    dF: float
    d2F: float
    residual: float
    truncation_note: str


@dataclass(frozen=True, eq=False)
class PartitionTrace:
    """``logZ(0..N)`` of the pinned model; ``logZ[0] = 0``."""

    logZ: np.ndarray
    beta: float
    h: float
    boundary: str = "pinned"

    @property
    def N(self) -> int:
        return self.logZ.size - 1

    @property
    def free_energy(self) -> float:
        return float(self.logZ[-1]) / self.N


def _require_recurrent(law: RenewalLaw) -> None:
    if not law.is_recurrent:
        raise DomainError(
            f"law {law.name!r} has total mass {law.total_mass:.15g} != 1; "
            "apply recurrent_reduction and shift delta by log(total_mass)"
        )


def _truncation_note(law: RenewalLaw, F: float) -> str:
    if F <= 0:
        return "delta <= 0: F = 0 without series evaluation"
    cut = math.ceil(41.5 / F)
    if cut < law.N_max:
        return (
            f"series cut at n = {cut} (e^(-F n) < 1e-18), "
            f"remaining mass {float(law._suffix[cut + 1]) + law.tail_mass:.3e} counted exactly"
        )
    if law.tail_mass > 0:
        return f"all {law.N_max} masses summed; {law.tail_model} tail of mass {law.tail_mass:.3e} added"
    note = f"all {law.N_max} masses summed"
    if law.truncation_bias > 0:
        note += (
            f"; 1/F = {1 / F:.3g} reaches the truncation at N_max, so F is that of the "
            f"truncated law (bias {law.truncation_bias:.3e})"
        )
    return note


def _solve(law: RenewalLaw, delta: float) -> float:
    target = -math.expm1(-delta)

    def g(F: float) -> float:
        return law.laplace_deficit(F) - target

    hi = delta + 1.0
    while g(hi) <= 0.0:
        hi *= 2.0
        if hi > 1e6:
            raise DomainError("could not bracket the free energy")
    if g(0.0) >= 0.0:
        return 0.0
    return optimize.brentq(g, 0.0, hi, xtol=1e-300, rtol=SOLVER_RTOL, maxiter=500)


def _derivatives(law: RenewalLaw, F: float, delta: float) -> tuple[float, float]:
    m1 = law.laplace_moment(F, 1)
    m2 = law.laplace_moment(F, 2)
    w = math.exp(-delta)
    dF = w / m1
    d2F = (m2 * dF * dF - w) / m1
    return dF, d2F


def free_energy(law: RenewalLaw, delta: float) -> HomogeneousSolution:
    """Solve ``sum_n e^{-F n} K(n) = e^{-delta}`` for ``F = F(0, delta)``.

    ``F = 0`` for ``delta <= 0``; there the reported derivatives are the
    left derivatives, both 0.
    """
    _require_recurrent(law)
    delta = float(delta)
    if not math.isfinite(delta):
        raise ParameterError("delta must be finite")
    if delta <= 0:
        return HomogeneousSolution(delta, 0.0, 0.0, 0.0, 0.0, _truncation_note(law, 0.0))
    F = _solve(law, delta)
    residual = abs(law.laplace_deficit(F) + math.expm1(-delta))
    if F > 0:
        dF, d2F = _derivatives(law, F, delta)
    else:
        dF, d2F = 0.0, 0.0
    return HomogeneousSolution(delta, F, dF, d2F, residual, _truncation_note(law, F))


def free_energy_derivatives(law: RenewalLaw, delta: float) -> tuple[float, float]:
    """``(dF/d delta, d^2F/d delta^2)`` by implicit differentiation, ``delta > 0``."""
    if not delta > 0:
        raise DomainError("derivatives are only provided for delta > 0")
    sol = free_energy(law, delta)
    return sol.dF, sol.d2F


def partition_trace(law: RenewalLaw, beta: float, h: float, N: int, omega=None) -> PartitionTrace:
    """Pinned ``logZ(0..N)`` with site field ``beta * omega[n] + h``.

    ``omega`` holds ``omega_1..omega_N`` (length ``N``) or is ``None`` for
    ``beta = 0``.
    """
    if int(N) != N or N < 1:
        raise ParameterError("N must be an integer >= 1")
    N = int(N)
    field = np.full(N + 1, float(h))
    if omega is not None:
        omega = np.asarray(omega, dtype=float)
        if omega.shape[0] < N:
            raise ParameterError(f"omega has {omega.shape[0]} sites, need {N}")
        field[1:] += beta * omega[:N]
    field[0] = 0.0
    logZ = pinned_log_partition(law.masses, field, N)[:, 0]
    if not np.isfinite(logZ[N]):
        raise BoundaryError(f"site N = {N} cannot be reached by law {law.name!r}")
    logZ.setflags(write=False)
    return PartitionTrace(logZ, float(beta), float(h))


def finite_volume_free_energy(law: RenewalLaw, delta: float, N: int) -> float:
    """``F_N(0, delta) = log Z_N / N`` from the pinned recursion."""
    return partition_trace(law, 0.0, delta, N).free_energy


def _log_masses(law: RenewalLaw, N: int) -> np.ndarray:
    with np.errstate(divide="ignore"):
        return np.log(law.masses[: N + 1])


def sample_polymers(law: RenewalLaw, delta: float, N: int, num: int, seed: int) -> list[np.ndarray]:
    """``num`` exact draws of the pinned homogeneous polymer (0 and N included)."""
    if num < 1:
        raise ParameterError("num must be >= 1")
    trace = partition_trace(law, 0.0, delta, N)
    field = np.full(N + 1, float(delta))
    logK = _log_masses(law, N)
    rng = np.random.default_rng(seed)
    return [backward_sample(logK, field, trace.logZ, N, rng) for _ in range(num)]


def sample_polymer(law: RenewalLaw, delta: float, N: int, seed: int) -> np.ndarray:
    """One exact draw of the pinned homogeneous polymer measure."""
    return sample_polymers(law, delta, N, 1, seed)[0]


def contact_marginals(law: RenewalLaw, delta: float, N: int) -> np.ndarray:
    """Exact ``P(n in tau)`` for ``n = 0..N`` under the pinned homogeneous measure."""
    logZ = partition_trace(law, 0.0, delta, N).logZ
    with np.errstate(invalid="ignore"):
        p = np.exp(logZ + logZ[::-1] - logZ[N])
    return np.nan_to_num(p, nan=0.0)


@dataclass(frozen=True)
class FiniteSizeFit:
    """Constant ``C`` in ``F - F_N <= C log N / N`` fitted over a set of sizes."""

    C: float
    sizes: tuple[int, ...]
    gaps: tuple[float, ...]
    ratios: tuple[float, ...]


def fit_finite_size_constant(law: RenewalLaw, delta: float, sizes: Sequence[int]) -> FiniteSizeFit:
    """Largest ``(F - F_N) N / log N`` over ``sizes`` (the finite-size slack)."""
    if not sizes:
        raise ParameterError("need at least one size")
    F = free_energy(law, delta).F
    gaps, ratios = [], []
    for N in sizes:
        gap = F - finite_volume_free_energy(law, delta, N)
        gaps.append(gap)
        ratios.append(gap * N / math.log(N))
    return FiniteSizeFit(max(max(ratios), 0.0), tuple(int(n) for n in sizes), tuple(gaps), tuple(ratios))
