"""Deterministic free-energy bounds and the ordering checks built on them.

The replica-symmetric bound is

    inf_{0 <= q <= delta / beta^2}  beta^2 q^2 / 2 + F(0, delta - beta^2 q),

evaluated with the homogeneous solver; the region gates are the explicit
sufficient conditions under which the lower sandwich
``(1 - eps) F(0, delta) <= F(beta, h_c^a + delta)`` is known to hold.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import optimize

from .errors import BoundViolation, DomainError, ParameterError
from .homogeneous import finite_volume_free_energy, free_energy
from .quenched import DisorderBatch, FreeEnergyEstimate, quenched_free_energy
from .renewal import RenewalLaw, _ell, recurrent_reduction

RS_GRID = 1000
RS_LOG_GRID = 200
GOLDEN_TOL = 1e-13
FIXED_POINT_TOL = 1e-10
FIXED_POINT_MAXITER = 200


def annealed_critical_point(law: RenewalLaw, beta: float) -> float:
    """``h_c^a(beta) = h_c(0) - beta^2 / 2`` with ``h_c(0) = -log total_mass``."""
    sigma = law.total_mass
    if not sigma > 0:
        raise DomainError("law has zero total mass")
    return -math.log(sigma) - beta * beta / 2


def rs_objective(law: RenewalLaw, beta: float, delta: float, q: float) -> float:
    """``beta^2 q^2 / 2 + F(0, delta - beta^2 q)``."""
    return beta * beta * q * q / 2 + free_energy(law, delta - beta * beta * q).F


@dataclass(frozen=True)
class RSBound:
    value: float
    q_star: float
    F0: float

    def __iter__(self):
        return iter((self.value, self.q_star))


def _delta_of_F(law: RenewalLaw, F: float) -> float:
    # inverse of the homogeneous solver: e^{-delta} = sum_n e^{-F n} K(n)
    return -math.log1p(-law.laplace_deficit(F))


def rs_upper_bound(law: RenewalLaw, beta: float, delta: float) -> RSBound:
    """Replica-symmetric upper bound and its minimiser ``q_star``.

    The feasible segment is parametrised by ``F' = F(0, delta - beta^2 q)``
    in ``[0, F(0, delta)]``, which turns each objective evaluation into a
    single Laplace sum. A dense grid (uniform plus log-spaced near ``F' = 0``)
    locates the best cell; golden-section search refines inside it.
    """
    if not (beta > 0 and delta > 0):
        raise ParameterError("need beta > 0 and delta > 0")
    F0 = free_energy(law, delta).F
    b2 = beta * beta

    def g(Fp: float) -> float:
        q = (delta - _delta_of_F(law, Fp)) / b2 if Fp > 0 else delta / b2
        q = min(max(q, 0.0), delta / b2)
        return b2 * q * q / 2 + Fp

    grid = np.unique(
        np.concatenate(
            (
                np.linspace(0.0, F0, RS_GRID + 1),
                F0 * np.logspace(-12, 0, RS_LOG_GRID),
            )
        )
    )
    vals = np.array([g(x) for x in grid])
    i = int(np.argmin(vals))
    lo, hi = grid[max(i - 1, 0)], grid[min(i + 1, grid.size - 1)]
    best_F, best = grid[i], vals[i]
    if hi > lo:
        # golden-section refinement on the cells around the best grid point
        a, b = lo, hi
        invphi = (math.sqrt(5) - 1) / 2
        c, d = b - invphi * (b - a), a + invphi * (b - a)
        gc, gd = g(c), g(d)
        while b - a > GOLDEN_TOL * max(F0, 1e-300):
            if gc < gd:
                b, d, gd = d, c, gc
                c = b - invphi * (b - a)
                gc = g(c)
            else:
                a, c, gc = c, d, gd
                d = a + invphi * (b - a)
                gd = g(d)
        for x, v in ((c, gc), (d, gd)):
            if v < best:
                best_F, best = x, v
    q_star = (delta - _delta_of_F(law, best_F)) / b2 if best_F > 0 else delta / b2
    q_star = min(max(q_star, 0.0), delta / b2)
    if not best < F0:
        raise BoundViolation(f"RS bound {best!r} not below F(0, delta) = {F0!r}")
    return RSBound(best, q_star, F0)


def small_beta_expansion(law: RenewalLaw, beta: float, delta: float) -> float:
    """``F(0, delta) - (beta^2 / 2) (dF/d delta)^2``, meaningful for ``alpha < 1/2``."""
    if not (beta > 0 and delta > 0):
        raise ParameterError("need beta > 0 and delta > 0")
    if not law.alpha < 0.5:
        raise DomainError(f"the small-beta expansion needs alpha < 1/2, got {law.alpha}")
    sol = free_energy(law, delta)
    return sol.F - beta * beta / 2 * sol.dF**2


@dataclass(frozen=True)
class RegionConstants:
    """User constants for the region gates; the theorems only assert existence."""

    a1: float = 1.0
    a2: float = 1.0
    epsilon: float = 0.1
    delta0: float = math.inf
    beta0: float = math.inf


@dataclass(frozen=True)
class RegionVerdict:
    """Outcome of a region gate: ``holds`` iff ``lhs <= rhs`` (and ``delta <= delta0``)."""

    regime: str
    holds: bool
    lhs: float
    rhs: float
    threshold: float
    converged: bool
    note: str = ""


def _check_scale(law: RenewalLaw, F: float) -> None:
    if not 0 < F < 1:
        raise DomainError(f"region condition needs 0 < F(0, delta) < 1, got {F}")


def _L_check(law: RenewalLaw, alpha: float, delta: float) -> float:
    """``L_check = L_hat^{-alpha/(2 alpha - 1)}`` evaluated at ``delta``."""
    F = free_energy(law, delta).F
    _check_scale(law, F)
    lg = abs(math.log(F))
    L_tilde = F / delta ** (1 / alpha)
    L_hat = (L_tilde / lg) ** (2 * alpha - 1) * float(law.L_eff(lg / F)) ** 2
    return L_hat ** (-alpha / (2 * alpha - 1))


def _ell_divergent(law: RenewalLaw) -> bool:
    L = law.L
    return L.kind == "constant" or 2 * L.gamma <= 1


def _ell_eff(law: RenewalLaw, x: float) -> float:
    # ell for the normalised law, L_eff = scale * L
    return _ell(law.L, x) / law.scale**2


def _marginal_lhs(law: RenewalLaw, a2: float, delta: float) -> float:
    F = free_energy(law, delta).F
    _check_scale(law, F)
    return a2 * _ell_eff(law, a2 * abs(math.log(F)) / F)


def _max_delta(law: RenewalLaw) -> float:
    # largest delta with F(0, delta) < 1
    return _delta_of_F(law, 1.0)


def theorem_region(
    alpha: float,
    beta: float,
    delta: float,
    law: RenewalLaw,
    constants: RegionConstants | None = None,
) -> RegionVerdict:
    """Evaluate the explicit region condition for ``1/2 <= alpha < 1``.

    For ``1/2 < alpha < 1``: ``delta >= a1 beta^{2a/(2a-1)} L_check(delta)``,
    with ``L_check`` assembled from ``F(0, delta)``; the threshold in ``delta``
    is found by fixed-point iteration. For ``alpha = 1/2`` with divergent
    ``ell``: ``1/beta^2 >= a2 ell(a2 |log F| / F)``, threshold by root finding.
    """
    c = constants or RegionConstants()
    if not (beta > 0 and delta > 0):
        raise ParameterError("need beta > 0 and delta > 0")
    if law.L is None:
        raise DomainError("law carries no slowly varying metadata")
    if abs(alpha - 0.5) <= 1e-12:
        if not _ell_divergent(law):
            raise DomainError("ell(N) converges: the alpha < 1/2 type result applies instead")
        return _marginal_region(law, beta, delta, c)
    if not 0.5 < alpha < 1:
        raise DomainError(f"explicit region conditions cover 1/2 <= alpha < 1, got {alpha}")
    p = 2 * alpha / (2 * alpha - 1)
    pref = c.a1 * beta**p
    try:
        rhs = pref * _L_check(law, alpha, delta)
    except DomainError as exc:
        return RegionVerdict("alpha in (1/2, 1)", False, delta, math.nan, math.nan, False, str(exc))
    threshold, converged, note = math.nan, False, ""
    x = pref
    try:
        for _ in range(FIXED_POINT_MAXITER):
            nxt = pref * _L_check(law, alpha, x)
            if abs(nxt - x) <= FIXED_POINT_TOL * x:
                threshold, converged = nxt, True
                break
            x = nxt
        else:
            note = "threshold fixed-point iteration did not converge"
    except DomainError as exc:
        note = f"threshold iteration left the domain: {exc}"
    holds = rhs <= delta <= c.delta0
    return RegionVerdict("alpha in (1/2, 1)", holds, rhs, delta, threshold, converged, note)


def _marginal_region(law, beta, delta, c) -> RegionVerdict:
    target = 1.0 / (beta * beta)
    try:
        lhs = _marginal_lhs(law, c.a2, delta)
    except DomainError as exc:
        return RegionVerdict("alpha = 1/2", False, math.nan, target, math.nan, False, str(exc))
    threshold, converged, note = marginal_threshold(law, beta, c.a2)
    if not converged:
        note = note or "no threshold found"
    holds = lhs <= target and delta <= c.delta0
    return RegionVerdict("alpha = 1/2", holds, lhs, target, threshold, converged, note)


def marginal_threshold(law: RenewalLaw, beta: float, a2: float = 1.0) -> tuple[float, bool, str]:
    """Smallest ``delta`` with ``a2 ell(a2 |log F| / F) <= 1 / beta^2`` (``alpha = 1/2``)."""
    target = 1.0 / (beta * beta)
    hi = 0.999 * _max_delta(law)
    lo = 1e-100

    def G(t: float) -> float:
        return _marginal_lhs(law, a2, math.exp(t)) - target

    if G(math.log(hi)) > 0:
        return math.nan, False, "condition fails even at the largest delta with F < 1"
    if G(math.log(lo)) <= 0:
        return lo, True, "condition holds down to delta = 1e-100"
    t = optimize.brentq(G, math.log(lo), math.log(hi), xtol=1e-12)
    return math.exp(t), True, ""


def regime_threshold(law: RenewalLaw, alpha: float, beta: float, constants: RegionConstants | None = None):
    """Threshold ``delta`` of the region condition at ``beta`` and its convergence flag."""
    c = constants or RegionConstants()
    if abs(alpha - 0.5) <= 1e-12:
        thr, ok, _ = marginal_threshold(law, beta, c.a2)
        return thr, ok
    v = theorem_region(alpha, beta, beta ** (2 * alpha / (2 * alpha - 1)), law, c)
    return v.threshold, v.converged


@dataclass(frozen=True)
class Verdict:
    """One inequality ``lhs <= rhs``; ``margin = rhs - lhs``."""

    name: str
    lhs: float
    rhs: float
    applicable: bool = True
    note: str = ""

    @property
    def margin(self) -> float:
        return self.rhs - self.lhs

    @property
    def passed(self) -> bool:
        return (not self.applicable) or self.lhs <= self.rhs


@dataclass(frozen=True, eq=False)
class BoundReport:
    """One ``(alpha, beta, delta, N)`` row of the bound chain."""

    alpha: float
    beta: float
    delta: float
    N: int
    h: float
    quenched: FreeEnergyEstimate
    annealed: float
    annealed_finite: float
    rs_bound: float
    rs_q_star: float
    expansion: float
    lower_sandwich: float
    finite_size_slack: float
    region: RegionVerdict | None
    verdicts: tuple[Verdict, ...] = field(default_factory=tuple)

    @property
    def passed(self) -> bool:
        return all(v.passed for v in self.verdicts)

    def as_row(self) -> dict:
        row = {
            "alpha": self.alpha,
            "beta": self.beta,
            "delta": self.delta,
            "N": self.N,
            "h": self.h,
            "quenched_mean": self.quenched.mean,
            "quenched_se": self.quenched.std_error,
            "num_samples": self.quenched.num_samples,
            "annealed_limit": self.annealed,
            "annealed_finite": self.annealed_finite,
            "rs_bound": self.rs_bound,
            "rs_q_star": self.rs_q_star,
            "expansion": self.expansion,
            "lower_sandwich": self.lower_sandwich,
            "finite_size_slack": self.finite_size_slack,
            "region_regime": self.region.regime if self.region else "",
            "region_holds": self.region.holds if self.region else "",
            "region_lhs": self.region.lhs if self.region else math.nan,
            "region_rhs": self.region.rhs if self.region else math.nan,
        }
        for v in self.verdicts:
            row[f"{v.name}_lhs"] = v.lhs
            row[f"{v.name}_rhs"] = v.rhs
            row[f"{v.name}_applicable"] = v.applicable
            row[f"{v.name}_pass"] = v.passed
        return row


def _lower_gate(law, alpha, beta, delta, c) -> tuple[bool, RegionVerdict | None, str]:
    if beta == 0:
        return True, None, "beta = 0"
    if beta > c.beta0 or delta > c.delta0:
        return False, None, "outside beta0 / delta0"
    if 0 < alpha < 0.5 or (abs(alpha - 0.5) <= 1e-12 and law.L is not None and not _ell_divergent(law)):
        return True, None, "alpha < 1/2 type regime: no explicit condition beyond beta0, delta0"
    if 0.5 <= alpha < 1 and law.L is not None:
        v = theorem_region(alpha, beta, delta, law, c)
        return v.holds, v, "" if v.holds else "region condition fails"
    return False, None, f"no lower-bound theorem for alpha = {alpha}"


def bound_report(
    law: RenewalLaw,
    beta: float,
    delta: float,
    N: int,
    batch: DisorderBatch,
    constants: RegionConstants | None = None,
    finite_size_C: float | None = None,
    workers: int = 1,
    quenched: FreeEnergyEstimate | None = None,
) -> BoundReport:
    """Assemble quenched, annealed, RS and expansion values with their ordering verdicts.

    ``h = h_c^a(beta) + delta``. Transient laws are handled through the
    recurrent reduction for the deterministic bounds. A precomputed
    ``quenched`` estimate at the same point may be passed in. The lower
    sandwich subtracts ``finite_size_C log N / N`` or, when
    ``finite_size_C`` is None, the homogeneous gap ``F(0, delta) - F_N(0, delta)``.
    """
    c = constants or RegionConstants()
    if not delta > 0:
        raise ParameterError("delta must be positive")
    reduced, _ = recurrent_reduction(law)
    alpha = law.alpha
    h = annealed_critical_point(law, beta) + delta
    F0 = free_energy(reduced, delta).F
    if quenched is None:
        quenched = quenched_free_energy(law, beta, h, N, batch, workers)
    annealed_finite = finite_volume_free_energy(law, h + beta * beta / 2, N)
    if beta > 0:
        rs = rs_upper_bound(reduced, beta, delta)
        rs_value, q_star = rs.value, rs.q_star
    else:
        rs_value, q_star = F0, 0.0
    if beta > 0 and alpha < 0.5:
        expansion = small_beta_expansion(reduced, beta, delta)
    elif beta == 0:
        expansion = F0
    else:
        expansion = math.nan
    if finite_size_C is None:
        slack = max(F0 - finite_volume_free_energy(reduced, delta, N), 0.0)
    else:
        slack = finite_size_C * math.log(N) / N
    lower = (1 - c.epsilon) * F0
    applicable, region, note = _lower_gate(reduced, alpha, beta, delta, c)
    three = 3 * quenched.std_error
    verdicts = (
        Verdict("jensen", quenched.mean, annealed_finite + three),
        Verdict("quenched_le_rs", quenched.mean, rs_value + three),
        Verdict("rs_le_annealed", rs_value, F0),
        Verdict("lower_sandwich", lower - slack, quenched.mean + three, applicable, note),
    )
    return BoundReport(
        alpha, beta, delta, N, h, quenched, F0, annealed_finite, rs_value, q_star,
        expansion, lower, slack, region, verdicts,
    )
