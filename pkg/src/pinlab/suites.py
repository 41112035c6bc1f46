"""Named experiment suites; each maps a resolved config to CSV rows and checks."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import acceptance
from .bounds import annealed_critical_point, bound_report
from .config import ExperimentConfig
from .errors import PinlabError
from .homogeneous import finite_volume_free_energy, free_energy
from .quenched import DisorderBatch, contact_fraction, quenched_free_energy
from .renewal import (
    doney_constant,
    first_intersection_law,
    mass_function,
    recurrent_reduction,
)
from .replica import check_integrating_inequality


@dataclass
class SuiteResult:
    columns: list[str]
    rows: list[dict]
    checks: list[tuple[str, bool, str]] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(ok for _, ok, _ in self.checks)

    def csv_text(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(self.columns)
        for row in self.rows:
            w.writerow([fmt(row.get(c, "")) for c in self.columns])
        return buf.getvalue()


def fmt(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (float, np.floating)):
        return format(float(x), ".17g")
    return str(x)


def _h_values(cfg: ExperimentConfig, law, beta: float) -> list[tuple[float, float]]:
    """``(h, delta)`` pairs: explicit h grid, else ``h = h_c^a(beta) + delta``."""
    if cfg.grid.h:
        hc = annealed_critical_point(law, beta)
        return [(h, h - hc) for h in cfg.grid.h]
    return [(annealed_critical_point(law, beta) + d, d) for d in cfg.grid.delta]


def run_homogeneous(cfg: ExperimentConfig, log: Callable[[str], None]) -> SuiteResult:
    law = cfg.law.build()
    reduced, shift = recurrent_reduction(law)
    cols = ["delta", "F", "dF", "d2F", "residual", "N", "F_N", "gap"]
    rows, checks = [], []
    for delta in cfg.grid.delta:
        sol = free_energy(reduced, delta)
        checks.append((f"residual(delta={delta})", sol.residual <= cfg.tolerances.residual, f"{sol.residual:.3e}"))
        for N in cfg.grid.N or [None]:
            row = dict(delta=delta, F=sol.F, dF=sol.dF, d2F=sol.d2F, residual=sol.residual)
            if N is not None:
                FN = finite_volume_free_energy(law, delta - shift, N)
                row.update(N=N, F_N=FN, gap=sol.F - FN)
                # superadditivity: F_N never exceeds the limit
                checks.append((f"F_N<=F(delta={delta},N={N})", FN <= sol.F + 1e-12, f"gap {sol.F - FN:.3e}"))
            rows.append(row)
        log(f"delta={delta}: F={sol.F:.12g}")
    return SuiteResult(cols, rows, checks)


def run_asymptotics(cfg: ExperimentConfig, log: Callable[[str], None]) -> SuiteResult:
    law = cfg.law.build()
    cols = ["quantity", "x", "value", "reference", "ratio"]
    rows, checks = [], []
    Ns = sorted(n for n in cfg.grid.N if n <= law.N_max or law.tail_mass == 0)
    if Ns and math.isfinite(law.alpha) and law.L is not None and 0 < law.alpha < 1:
        u = mass_function(law, max(Ns)).u
        Q = first_intersection_law(law, max(Ns))
        cq = np.cumsum(Q)
        for n in Ns:
            ref = doney_constant(law.alpha) / (float(law.L_eff(n)) * n ** (1 - law.alpha))
            rows.append(dict(quantity="mass_function", x=n, value=u[n], reference=ref, ratio=u[n] / ref))
            rows.append(dict(quantity="intersection_mass", x=n, value=cq[n], reference="", ratio=""))
    if law.is_recurrent:
        prev = None
        for d in sorted(cfg.grid.delta, reverse=True):
            F = free_energy(law, d).F
            slope = "" if prev is None else math.log(F / prev[1]) / math.log(d / prev[0])
            rows.append(dict(quantity="free_energy", x=d, value=F, reference=1 / law.alpha, ratio=slope))
            if F > 0:
                prev = (d, F)
    log(f"{len(rows)} asymptotic rows")
    return SuiteResult(cols, rows, checks)


def run_quenched_grid(cfg: ExperimentConfig, log: Callable[[str], None]) -> SuiteResult:
    law = cfg.law.build()
    sig = cfg.tolerances.sigma
    cols = [
        "beta", "h", "delta", "N", "num_samples", "quenched_mean", "quenched_se",
        "annealed_finite", "jensen_pass", "contact_fraction", "contact_fraction_se",
    ]
    rows, checks = [], []
    Nmax = max(cfg.grid.N)
    for i, beta in enumerate(cfg.grid.beta):
        for h, delta in _h_values(cfg, law, beta):
            for N in cfg.grid.N:
                batch = DisorderBatch(cfg.batch.master_seed, Nmax, cfg.batch.num_samples)
                q = quenched_free_energy(law, beta, h, N, batch, cfg.workers)
                ann = finite_volume_free_energy(law, h + beta * beta / 2, N)
                cf = contact_fraction(law, beta, h, N, batch, workers=cfg.workers, richardson=False)
                ok = q.mean <= ann + sig * q.std_error
                checks.append((f"jensen(beta={beta},h={h},N={N})", ok, f"{ann - q.mean:.3e}"))
                rows.append(
                    dict(beta=beta, h=h, delta=delta, N=N, num_samples=q.num_samples,
                         quenched_mean=q.mean, quenched_se=q.std_error, annealed_finite=ann,
                         jensen_pass=ok, contact_fraction=cf.mean, contact_fraction_se=cf.std_error)
                )
                log(f"beta={beta} h={h:.6g} N={N}: F_N={q.mean:.6g} +- {q.std_error:.2g}")
    return SuiteResult(cols, rows, checks)


def run_bounds_grid(cfg: ExperimentConfig, log: Callable[[str], None]) -> SuiteResult:
    law = cfg.law.build()
    rows, checks, cols = [], [], None
    Nmax = max(cfg.grid.N)
    for beta in cfg.grid.beta:
        for delta in cfg.grid.delta:
            for N in cfg.grid.N:
                batch = DisorderBatch(cfg.batch.master_seed, Nmax, cfg.batch.num_samples)
                rep = bound_report(law, beta, delta, N, batch, cfg.gates, cfg.tolerances.finite_size_C, cfg.workers)
                row = rep.as_row()
                cols = cols or list(row)
                rows.append(row)
                for v in rep.verdicts:
                    checks.append((f"{v.name}(beta={beta},delta={delta},N={N})", v.passed, f"margin {v.margin:.3e}"))
                log(f"beta={beta} delta={delta} N={N}: {'pass' if rep.passed else 'FAIL'}")
    return SuiteResult(cols or [], rows, checks)


def run_replica_checks(cfg: ExperimentConfig, log: Callable[[str], None]) -> SuiteResult:
    law = cfg.law.build()
    cols = ["beta", "delta", "N", "minus_R", "minus_R_se", "psi", "psi_se", "upper_rhs",
            "lower_margin", "upper_margin", "max_weight_share", "pass"]
    rows, checks = [], []
    for beta in cfg.grid.beta:
        for delta in cfg.grid.delta:
            for N in cfg.grid.N:
                batch = DisorderBatch(cfg.batch.master_seed, N, cfg.batch.num_samples)
                chk = check_integrating_inequality(
                    law, beta, delta, N, batch, cfg.batch.pair_samples, cfg.batch.master_seed + 1, cfg.workers
                )
                ok = chk.passed and chk.max_weight_share < 0.5
                checks.append((f"integrating(beta={beta},delta={delta},N={N})", ok, ""))
                rows.append(
                    dict(beta=beta, delta=delta, N=N, minus_R=chk.minus_R, minus_R_se=chk.minus_R_se,
                         psi=chk.psi, psi_se=chk.psi_se, upper_rhs=chk.upper_rhs,
                         lower_margin=chk.lower_margin, upper_margin=chk.upper_margin,
                         max_weight_share=chk.max_weight_share, **{"pass": ok})
                )
                log(f"beta={beta} delta={delta} N={N}: {'pass' if ok else 'FAIL'}")
    return SuiteResult(cols, rows, checks)


ACCEPTANCE_COLUMNS = ["criterion", "name", "pass", "value", "bound", "detail"]


def _acceptance_rows(results) -> list[dict]:
    return [
        dict(criterion=r.id, name=r.name, value=r.value, bound=r.bound, detail=r.detail, **{"pass": r.passed})
        for r in results
    ]


def run_acceptance(cfg: ExperimentConfig, log: Callable[[str], None]) -> SuiteResult:
    """Criteria 1-12, then a full rerun with the same seed for criterion 13."""
    def progress(r):
        log(r.line())

    ctx = acceptance.Context(cfg.batch.master_seed, cfg.workers, cfg.tolerances.sigma)
    first = acceptance.run_checks(ctx, progress)
    body1 = SuiteResult(ACCEPTANCE_COLUMNS, _acceptance_rows(first)).csv_text().encode()
    log("rerunning criteria 1-12 for the determinism check")
    ctx2 = acceptance.Context(cfg.batch.master_seed, cfg.workers, cfg.tolerances.sigma)
    second = acceptance.run_checks(ctx2)
    body2 = SuiteResult(ACCEPTANCE_COLUMNS, _acceptance_rows(second)).csv_text().encode()
    det = acceptance.determinism_result(body1, body2)
    log(det.line())
    results = first + [det]
    checks = [(f"criterion {r.id} {r.name}", r.passed, r.detail) for r in results]
    return SuiteResult(ACCEPTANCE_COLUMNS, _acceptance_rows(results), checks)


SUITE_RUNNERS: dict[str, Callable[[ExperimentConfig, Callable[[str], None]], SuiteResult]] = {
    "asymptotics": run_asymptotics,
    "homogeneous": run_homogeneous,
    "quenched_grid": run_quenched_grid,
    "bounds_grid": run_bounds_grid,
    "replica_checks": run_replica_checks,
    "acceptance": run_acceptance,
}


def run_suite(cfg: ExperimentConfig, log: Callable[[str], None] = lambda s: None) -> SuiteResult:
    try:
        runner = SUITE_RUNNERS[cfg.suite]
    except KeyError:
        raise PinlabError(f"unknown suite {cfg.suite!r}") from None
    return runner(cfg, log)
