"""Desk-scale acceptance checks, one function per criterion.

Every check returns a ``CriterionResult`` that records the measured
quantity next to the bound it is compared with, so a failing row can be
inspected without rerunning anything.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable

import numpy as np

from .bounds import rs_upper_bound, small_beta_expansion
from .homogeneous import fit_finite_size_constant, free_energy, partition_trace
from .quenched import DisorderBatch, quenched_free_energy
from .renewal import (
    build_power_law,
    build_srw_returns,
    doney_constant,
    first_intersection_law,
    from_masses,
    intersection_tail,
    mass_function,
)
from .replica import (
    check_integrating_inequality,
    estimate_psi0,
    intersection_count_exact,
    intersection_count_simulated,
    psi0_exact,
)

DESK_N = 2**14
DESK_SAMPLES = 200
LAW_N_MAX = 2**16
BIG_N = 10**6


@dataclass(frozen=True)
class CriterionResult:
    id: int
    name: str
    passed: bool
    value: float
    bound: float
    detail: str

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        return f"[{status}] criterion {self.id:>2} {self.name}: value={self.value:.6g} bound={self.bound:.6g} | {self.detail}"


@lru_cache(maxsize=None)
def power_law(alpha: float, N_max: int = LAW_N_MAX):
    """Power law with exact infinite-law masses (L = 1), shared across checks."""
    return build_power_law(alpha, N_max=N_max, normalization="exact_tail")


@dataclass
class Context:
    seed: int
    workers: int = 1
    sigma: float = 3.0
    finite_size_C: float | None = None


def c1_homogeneous_exactness(ctx: Context) -> CriterionResult:
    law = from_masses([0.5, 0.5])
    sol = free_energy(law, math.log(2))
    exact = -math.log((math.sqrt(5) - 1) / 2)
    err = abs(sol.F - exact)
    ok = err <= 1e-12 and sol.residual <= 1e-12
    return CriterionResult(1, "homogeneous_exactness", ok, err, 1e-12, f"F={sol.F!r} residual={sol.residual:.3e}")


def c2_doney(ctx: Context) -> CriterionResult:
    parts, ok, worst = [], True, 0.0
    for alpha in (0.3, 0.5, 0.7):
        law = power_law(alpha, BIG_N)
        u = mass_function(law, BIG_N).u
        dev = []
        for n in (10**4, 10**5, 10**6):
            ratio = u[n] * n ** (1 - alpha) * float(law.L_eff(n)) / doney_constant(alpha)
            dev.append(abs(ratio - 1))
        mono = dev[0] > dev[1] > dev[2]
        ok &= mono and dev[2] <= 0.02
        worst = max(worst, dev[2])
        parts.append(f"a={alpha}: |r-1|={dev[0]:.2e},{dev[1]:.2e},{dev[2]:.2e}")
    return CriterionResult(2, "doney_asymptotics", ok, worst, 0.02, "; ".join(parts))


def c3_jensen(ctx: Context) -> CriterionResult:
    law = power_law(0.3)
    batch = DisorderBatch(ctx.seed, DESK_N, DESK_SAMPLES)
    worst, parts = math.inf, []
    for beta in (0.1, 0.3, 0.5):
        for h in (-0.05, 0.05, 0.15):
            q = quenched_free_energy(law, beta, h, DESK_N, batch, ctx.workers)
            ann = partition_trace(law, 0.0, h + beta * beta / 2, DESK_N).free_energy
            margin = ann + ctx.sigma * q.std_error - q.mean
            worst = min(worst, margin)
    return CriterionResult(3, "jensen_chain", worst >= 0, worst, 0.0, "min over 3x3 grid of annealed + 3se - quenched")


def finite_size_constant(ctx: Context) -> float:
    if ctx.finite_size_C is None:
        fit = fit_finite_size_constant(power_law(0.3), 0.2, [2**k for k in range(10, 17)])
        ctx.finite_size_C = fit.C
    return ctx.finite_size_C


def c4_sandwich(ctx: Context) -> CriterionResult:
    law = power_law(0.3)
    beta, delta = 0.1, 0.2
    F0 = free_energy(law, delta).F
    C = finite_size_constant(ctx)
    batch = DisorderBatch(ctx.seed + 1, DESK_N, DESK_SAMPLES)
    q = quenched_free_energy(law, beta, -beta * beta / 2 + delta, DESK_N, batch, ctx.workers)
    lo = 0.9 * F0 - C * math.log(DESK_N) / DESK_N
    hi = F0 + ctx.sigma * q.std_error
    ok = lo <= q.mean <= hi
    return CriterionResult(
        4, "quenched_sandwich", ok, q.mean, lo, f"interval [{lo:.8g}, {hi:.8g}], se={q.std_error:.3e}, C={C:.4g}"
    )


def c5_rs_bound(ctx: Context) -> CriterionResult:
    ok, min_margin, worst_q = True, math.inf, math.inf
    parts = []
    for i, alpha in enumerate((0.3, 0.7)):
        law = power_law(alpha)
        for j, beta in enumerate((0.2, 0.5)):
            batch = DisorderBatch(ctx.seed + 10 + 2 * i + j, DESK_N, DESK_SAMPLES)
            for delta in (0.1, 0.3):
                rs = rs_upper_bound(law, beta, delta)
                margin = rs.F0 - rs.value
                min_margin = min(min_margin, margin)
                q = quenched_free_energy(law, beta, -beta * beta / 2 + delta, DESK_N, batch, ctx.workers)
                worst_q = min(worst_q, rs.value + ctx.sigma * q.std_error - q.mean)
    ok = min_margin > 1e-6 and worst_q >= 0
    law = power_law(0.3)
    for delta in (0.1, 0.3):
        gaps = []
        for beta in (0.05, 0.1, 0.2):
            gaps.append((rs_upper_bound(law, beta, delta).value - small_beta_expansion(law, beta, delta)) / beta**4)
        spread = max(gaps) / min(gaps) - 1 if min(gaps) > 0 else math.inf
        ok &= spread < 0.5
        parts.append(f"delta={delta}: gap/beta^4 spread {spread:.3f}")
    detail = f"min F0-rs={min_margin:.3e}; min rs+3se-quenched={worst_q:.3e}; " + "; ".join(parts)
    return CriterionResult(5, "rs_bound", ok, min_margin, 1e-6, detail)


def c6_finite_size(ctx: Context) -> CriterionResult:
    fit = fit_finite_size_constant(power_law(0.3), 0.2, [2**k for k in range(10, 17)])
    ctx.finite_size_C = fit.C
    band = max(fit.ratios) / min(fit.ratios)
    detail = "ratios " + ",".join(f"{r:.4g}" for r in fit.ratios)
    return CriterionResult(6, "finite_size_law", band <= 3, band, 3.0, detail)


def c7_intersection_dichotomy(ctx: Context) -> CriterionResult:
    Q3 = first_intersection_law(power_law(0.3, BIG_N), BIG_N)
    S = {n: math.fsum(Q3[1 : n + 1]) for n in (10**4, 10**5, 10**6)}
    inc = max(abs(S[10**5] - S[10**4]), abs(S[10**6] - S[10**5]))
    Q7 = first_intersection_law(power_law(0.7, BIG_N), BIG_N)
    S7 = math.fsum(Q7[1:])
    ok = S[10**6] < 0.995 and inc < 1e-4 and S7 > 0.99
    detail = (
        f"a=0.3: S(1e4)={S[10**4]:.8f} S(1e5)={S[10**5]:.8f} S(1e6)={S[10**6]:.8f}; "
        f"a=0.7: S(1e6)={S7:.6f}"
    )
    return CriterionResult(7, "intersection_dichotomy", ok, inc, 1e-4, detail)


def c8_geometric_tail(ctx: Context) -> CriterionResult:
    law = power_law(0.7)
    N, kmax = 1000, 10
    exact = intersection_count_exact(law, N, kmax)
    p = 1 - intersection_tail(law, N)
    k = np.arange(1, kmax + 1)
    dev = float(np.max(np.abs(exact.tail[1 : kmax + 1] - p**k)))
    sim = intersection_count_simulated(law, N, 10_000, ctx.seed + 8)
    n = sim.counts.size
    sim_ok = True
    for kk in range(1, kmax + 1):
        pk = exact.tail[kk]
        se = math.sqrt(max(pk * (1 - pk), 1e-300) / n)
        sim_ok &= abs(sim.tail_at(kk) - pk) <= ctx.sigma * se
    ok = dev <= 1e-9 and sim_ok
    detail = f"max |P(count>=k) - p^k| = {dev:.3e} (p={p:.6f}); simulated vs exact within 3se: {sim_ok}"
    return CriterionResult(8, "geometric_tail", ok, dev, 1e-9, detail)


def c9_integrating(ctx: Context) -> CriterionResult:
    N, pairs = 2**10, 500
    cases = (("alpha=0.3", power_law(0.3)), ("srw_d1", build_srw_returns("d1_recurrent", LAW_N_MAX)))
    ok, parts, worst = True, [], math.inf
    for i, (label, law) in enumerate(cases):
        batch = DisorderBatch(ctx.seed + 20 + i, N, pairs)
        chk = check_integrating_inequality(law, 0.1, 0.2, N, batch, pairs, ctx.seed + 30 + i, ctx.workers)
        ok &= chk.passed and chk.max_weight_share < 0.5
        worst = min(worst, chk.lower_margin, chk.upper_margin)
        parts.append(
            f"{label}: -R={chk.minus_R:.4e}+-{chk.minus_R_se:.2e}, (e-1)psi={(math.e - 1) * chk.psi:.4e}, "
            f"share={chk.max_weight_share:.3f}"
        )
    return CriterionResult(9, "interpolation_inequality", ok, worst, 0.0, "; ".join(parts))


def c10_psi_oracle(ctx: Context) -> CriterionResult:
    law = power_law(0.5)
    N, delta = 200, 0.3
    ok, parts, worst = True, [], 0.0
    for i, lb in enumerate((0.01, 0.05)):
        exact = psi0_exact(law, delta, lb, N)
        est = estimate_psi0(law, delta, lb, N, 20_000, ctx.seed + 40 + i)
        z = abs(est.value - exact) / est.std_error
        worst = max(worst, z)
        ok &= z <= ctx.sigma
        parts.append(f"lb2={lb}: est={est.value:.6e}+-{est.std_error:.1e} exact={exact:.6e}")
    return CriterionResult(10, "psi_oracle", ok, worst, ctx.sigma, "; ".join(parts))


def c11_superadditivity(ctx: Context) -> CriterionResult:
    law = power_law(0.3)
    logZ = partition_trace(law, 0.0, 0.2, 2**13).logZ
    sizes = [2**k for k in range(8, 13)]
    hom = min((logZ[2 * n] - 2 * logZ[n]) / max(abs(logZ[2 * n]), 1.0) for n in sizes)
    hom_ok = hom >= -1e-12
    beta, delta = 0.3, 0.2
    batch = DisorderBatch(ctx.seed + 50, 2**13, DESK_SAMPLES)
    est = {
        n: quenched_free_energy(law, beta, -beta * beta / 2 + delta, n, batch, ctx.workers)
        for n in sizes + [2**13]
    }
    worst = min(
        est[2 * n].mean - est[n].mean + ctx.sigma * math.hypot(est[n].std_error, est[2 * n].std_error)
        for n in sizes
    )
    ok = hom_ok and worst >= 0
    detail = f"homogeneous min rel(logZ_2N - 2 logZ_N)={hom:.3e}; quenched min margin={worst:.3e}"
    return CriterionResult(11, "superadditivity", ok, worst, 0.0, detail)


def c12_critical_exponent(ctx: Context) -> CriterionResult:
    law = power_law(0.5)
    deltas = (1e-1, 1e-2, 1e-3)
    F = [free_energy(law, d).F for d in deltas]
    slopes = np.diff(np.log(F)) / np.diff(np.log(deltas))
    dev = float(np.max(np.abs(slopes / 2 - 1)))
    return CriterionResult(
        12, "critical_exponent", dev <= 0.1, dev, 0.1, "local slopes " + ",".join(f"{s:.5f}" for s in slopes)
    )


CHECKS: tuple[Callable[[Context], CriterionResult], ...] = (
    c1_homogeneous_exactness,
    c2_doney,
    c3_jensen,
    c4_sandwich,
    c5_rs_bound,
    c6_finite_size,
    c7_intersection_dichotomy,
    c8_geometric_tail,
    c9_integrating,
    c10_psi_oracle,
    c11_superadditivity,
    c12_critical_exponent,
)


def run_checks(ctx: Context, progress: Callable[[CriterionResult], None] | None = None) -> list[CriterionResult]:
    """Criteria 1-12 (criterion 6 runs first so 4 can reuse its fitted constant)."""
    order = [CHECKS[5]] + [c for i, c in enumerate(CHECKS) if i != 5]
    results = {}
    for check in order:
        r = check(ctx)
        results[r.id] = r
        if progress:
            progress(r)
    return [results[i] for i in sorted(results)]


def determinism_result(first: bytes, second: bytes) -> CriterionResult:
    same = first == second
    return CriterionResult(
        13, "determinism", same, float(same), 1.0, f"rerun CSV bodies identical: {same} ({len(first)} bytes)"
    )
