"""Gaussian disorder and Monte Carlo estimates of quenched quantities."""

from __future__ import annotations

import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Literal

import numpy as np
from scipy import special

from ._kernels import pinned_log_partition
from .errors import BoundaryError, ParameterError
from .homogeneous import finite_volume_free_energy
from .renewal import RenewalLaw

log = logging.getLogger(__name__)

CHUNK = 16
DEFAULT_DH = 1e-2
MAX_DH = 0.1


def _uniform_from_raw(raw: np.ndarray) -> np.ndarray:
    # top 53 bits, shifted half a step so 0 and 1 are excluded
    return ((raw >> np.uint64(11)).astype(float) + 0.5) / 2.0**53


@dataclass(frozen=True)
class DisorderBatch:
    """IID standard Gaussian ``omega[s, n]`` for samples ``s`` and sites ``n = 1..N``.

    Sample ``s`` owns a Philox4x64 stream keyed by ``(master_seed, s)``; site
    ``n`` is the inverse normal CDF of the stream's ``n``-th 64-bit word. Any
    ``(s, n)`` can therefore be regenerated alone, and a shorter batch is a
    prefix of a longer one.
    """

    master_seed: int
    N: int
    num_samples: int
    generator_spec: str = "philox4x64/seedsequence(master_seed, spawn_key=(s,))/ndtri"

    def __post_init__(self) -> None:
        if self.N < 1 or self.num_samples < 0:
            raise ParameterError("need N >= 1 and num_samples >= 0")

    def _bitgen(self, s: int) -> np.random.Philox:
        if not 0 <= s < self.num_samples:
            raise ParameterError(f"sample index {s} outside [0, {self.num_samples})")
        return np.random.Philox(np.random.SeedSequence(self.master_seed, spawn_key=(s,)))

    def omega(self, s: int, N: int | None = None) -> np.ndarray:
        """``omega_1..omega_N`` of sample ``s`` (index 0 is site 1)."""
        N = self.N if N is None else N
        if N > self.N:
            raise ParameterError(f"batch holds {self.N} sites, asked for {N}")
        raw = self._bitgen(s).random_raw(N)
        return special.ndtri(_uniform_from_raw(raw))

    def site(self, s: int, n: int) -> float:
        """Single variate ``omega_n`` of sample ``s`` without generating the prefix."""
        if not 1 <= n <= self.N:
            raise ParameterError(f"site {n} outside [1, {self.N}]")
        bg = self._bitgen(s)
        bg.advance((n - 1) // 4)  # one counter step yields four words
        raw = bg.random_raw((n - 1) % 4 + 1)[-1:]
        return float(special.ndtri(_uniform_from_raw(raw))[0])

    def matrix(self, samples, N: int | None = None) -> np.ndarray:
        """Disorder of several samples as an array of shape ``(N, len(samples))``."""
        return np.stack([self.omega(s, N) for s in samples], axis=1)


@dataclass(frozen=True, eq=False)
class FreeEnergyEstimate:
    """Sample mean and standard error of a per-disorder quantity."""

    mean: float
    std_error: float
    N: int
    num_samples: int
    beta: float
    h: float
    kind: Literal["quenched", "interpolation_gap", "contact_fraction"]
    values: np.ndarray = field(repr=False, default=None)
    diagnostics: dict = field(default_factory=dict)


def _summarize(values: np.ndarray) -> tuple[float, float]:
    n = values.size
    mean = math.fsum(values) / n
    if n < 2:
        return mean, 0.0
    return mean, float(np.std(values, ddof=1)) / math.sqrt(n)


def log_partition(law: RenewalLaw, beta: float, h: float, omega) -> float:
    """``log E[exp(sum_n (beta omega_n + h) delta_n) delta_N]`` with ``N = len(omega)``."""
    omega = np.asarray(omega, dtype=float)
    N = omega.size
    if N < 1:
        raise ParameterError("omega must hold at least one site")
    f = np.empty(N + 1)
    f[0] = 0.0
    f[1:] = beta * omega + h
    val = float(pinned_log_partition(law.masses, f, N)[N, 0])
    if not math.isfinite(val):
        raise BoundaryError(f"site N = {N} cannot be reached by law {law.name!r}")
    return val


def _chunk_logz(masses, beta, hs, N, master_seed, num_samples, samples):
    """``log Z_N`` for each sample in ``samples`` and each ``h`` in ``hs``; shape (len(hs), len)."""
    batch = DisorderBatch(master_seed, N, num_samples)
    omega = batch.matrix(samples, N)
    out = np.empty((len(hs), len(samples)))
    f = np.empty((N + 1, len(samples)))
    f[0] = 0.0
    for i, h in enumerate(hs):
        f[1:] = beta * omega + h
        out[i] = pinned_log_partition(masses, f, N)[N]
    return out


def batch_log_partition(
    law: RenewalLaw, beta: float, hs, N: int, batch: DisorderBatch, workers: int = 1
) -> np.ndarray:
    """``log Z_N(beta, h; omega_s)`` for every ``h`` in ``hs`` and every sample; shape (len(hs), S).

    Samples are processed in fixed chunks, so the result does not depend on
    the number of worker processes.
    """
    if batch.num_samples < 1:
        raise ParameterError("empty disorder batch")
    if N > batch.N:
        raise ParameterError(f"batch holds {batch.N} sites, need N = {N}")
    hs = [float(h) for h in hs]
    chunks = [range(a, min(a + CHUNK, batch.num_samples)) for a in range(0, batch.num_samples, CHUNK)]
    args = (law.masses, float(beta), hs, N, batch.master_seed, batch.num_samples)
    if workers > 1 and len(chunks) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(_chunk_logz, *zip(*[args + (list(c),) for c in chunks])))
    else:
        parts = [_chunk_logz(*args, list(c)) for c in chunks]
    out = np.concatenate(parts, axis=1)
    if not np.all(np.isfinite(out)):
        raise BoundaryError(f"site N = {N} cannot be reached by law {law.name!r}")
    return out


def _deterministic(law, beta, h, N, batch, kind, value, **diag) -> FreeEnergyEstimate:
    values = np.full(batch.num_samples, value)
    return FreeEnergyEstimate(value, 0.0, N, batch.num_samples, beta, h, kind, values, dict(diag))


def quenched_free_energy(
    law: RenewalLaw, beta: float, h: float, N: int, batch: DisorderBatch, workers: int = 1
) -> FreeEnergyEstimate:
    """Monte Carlo ``E[(1/N) log Z_{N,omega}(beta, h)]`` over the batch."""
    if batch.num_samples < 1:
        raise ParameterError("empty disorder batch")
    if beta == 0:
        return _deterministic(
            law, beta, h, N, batch, "quenched", finite_volume_free_energy(law, h, N)
        )
    values = batch_log_partition(law, beta, [h], N, batch, workers)[0] / N
    mean, se = _summarize(values)
    return FreeEnergyEstimate(mean, se, N, batch.num_samples, beta, h, "quenched", values)


def contact_fraction(
    law: RenewalLaw,
    beta: float,
    h: float,
    N: int,
    batch: DisorderBatch,
    dh: float = DEFAULT_DH,
    workers: int = 1,
    richardson: bool = True,
) -> FreeEnergyEstimate:
    """Centered difference ``(F_N(h + dh) - F_N(h - dh)) / (2 dh)`` with common disorder.

    Differences are taken per sample before averaging. With ``richardson``
    the step ``dh / 2`` is also evaluated and the diagnostics record both
    estimates and their extrapolation ``(4 D(dh/2) - D(dh)) / 3``.
    """
    if not dh > 0:
        raise ParameterError("dh must be positive")
    if batch.num_samples < 1:
        raise ParameterError("empty disorder batch")
    diag: dict = {"dh": dh}
    if dh > MAX_DH:
        msg = f"dh = {dh} exceeds {MAX_DH}; curvature bias may dominate"
        diag["warning"] = msg
        log.warning(msg)
    hs = [h + dh, h - dh]
    if richardson:
        hs += [h + dh / 2, h - dh / 2]
    if beta == 0:
        row = np.array([finite_volume_free_energy(law, x, N) * N for x in hs])
        logz = np.repeat(row[:, None], batch.num_samples, axis=1)
    else:
        logz = batch_log_partition(law, beta, hs, N, batch, workers)
    values = (logz[0] - logz[1]) / (2 * dh * N)
    if richardson:
        half = (logz[2] - logz[3]) / (dh * N)
        m_full, m_half = float(values.mean()), float(half.mean())
        diag.update(
            half_step=m_half,
            richardson=(4 * m_half - m_full) / 3,
            richardson_gap=abs(m_full - m_half),
        )
    mean, se = _summarize(values)
    if beta == 0:
        se = 0.0
    return FreeEnergyEstimate(mean, se, N, batch.num_samples, beta, h, "contact_fraction", values, diag)


def interpolation_gap(
    law: RenewalLaw, beta: float, delta: float, N: int, batch: DisorderBatch, workers: int = 1
) -> FreeEnergyEstimate:
    """``R_{N,delta}(beta) = F_N(beta, -beta^2/2 + delta) - F_N(0, delta)``, per sample then averaged."""
    if not delta > 0:
        raise ParameterError("delta must be positive")
    if batch.num_samples < 1:
        raise ParameterError("empty disorder batch")
    h = -beta * beta / 2 + delta
    ref = finite_volume_free_energy(law, delta, N)
    if beta == 0:
        return _deterministic(law, beta, h, N, batch, "interpolation_gap", 0.0, homogeneous=ref)
    values = batch_log_partition(law, beta, [h], N, batch, workers)[0] / N - ref
    mean, se = _summarize(values)
    return FreeEnergyEstimate(
        mean, se, N, batch.num_samples, beta, h, "interpolation_gap", values, {"homogeneous": ref}
    )
