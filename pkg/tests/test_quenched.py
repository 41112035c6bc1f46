import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from pinlab import (
    BoundaryError,
    DisorderBatch,
    ParameterError,
    build_power_law,
    contact_fraction,
    finite_volume_free_energy,
    from_masses,
    interpolation_gap,
    log_partition,
    quenched_free_energy,
)
from pinlab.quenched import batch_log_partition


def _enumerate(K, beta, h, omega):
    """Brute-force ``Z`` and ``sum_n P(n in tau) `` over all contact sets."""
    N = len(omega)
    Z = contacts = 0.0
    for r in range(N):
        for inner in itertools.combinations(range(1, N), r):
            pts = (0,) + inner + (N,)
            w = 1.0
            for a, b in zip(pts, pts[1:]):
                w *= K[b - a] if b - a < len(K) else 0.0
            w *= math.exp(sum(beta * omega[p - 1] + h for p in pts[1:]))
            Z += w
            contacts += w * (len(pts) - 1)
    return Z, contacts / Z if Z else float("nan")


# --- disorder ------------------------------------------------------------------------


def test_disorder_reproducible():
    a = DisorderBatch(7, 100, 4).omega(2)
    b = DisorderBatch(7, 100, 4).omega(2)
    assert np.array_equal(a, b)
    assert not np.array_equal(a, DisorderBatch(7, 100, 4).omega(1))
    assert not np.array_equal(a, DisorderBatch(8, 100, 4).omega(2))


def test_disorder_prefix():
    long = DisorderBatch(11, 1000, 3)
    short = DisorderBatch(11, 50, 3)
    assert np.array_equal(long.omega(1, 50), short.omega(1))
    # the sample count does not change a sample's stream
    assert np.array_equal(DisorderBatch(11, 50, 9).omega(1), short.omega(1))


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 5), st.integers(1, 997))
def test_random_access(s, n):
    batch = DisorderBatch(3, 997, 6)
    assert batch.site(s, n) == batch.omega(s)[n - 1]


def test_disorder_is_gaussian():
    w = DisorderBatch(123, 20000, 2).omega(0)
    assert stats.kstest(w, "norm").pvalue > 1e-3
    assert abs(w.mean()) < 4 / math.sqrt(w.size)
    assert np.all(np.isfinite(w))


def test_disorder_argument_checks():
    with pytest.raises(ParameterError):
        DisorderBatch(1, 0, 3)
    batch = DisorderBatch(1, 10, 3)
    with pytest.raises(ParameterError):
        batch.omega(3)
    with pytest.raises(ParameterError):
        batch.omega(0, 11)
    with pytest.raises(ParameterError):
        batch.site(0, 0)


# --- partition functions ------------------------------------------------------------


@settings(max_examples=40, deadline=None)
@given(
    st.lists(st.floats(0.01, 1.0), min_size=1, max_size=5),
    st.floats(0.0, 2.0),
    st.floats(-1.0, 1.0),
    st.lists(st.floats(-3.0, 3.0), min_size=1, max_size=9),
)
def test_log_partition_enumeration(weights, beta, h, omega):
    law = from_masses(np.asarray(weights) / sum(weights))
    Z, _ = _enumerate(law.masses, beta, h, omega)
    if Z == 0:
        with pytest.raises(BoundaryError):
            log_partition(law, beta, h, omega)
    else:
        assert log_partition(law, beta, h, omega) == pytest.approx(math.log(Z), rel=1e-12, abs=1e-12)


def test_log_partition_two_sites(two_point):
    Z = 0.5 * math.exp(-0.2) + 0.25 * math.exp(0.3)
    assert Z == pytest.approx(0.746830, abs=5e-7)
    assert log_partition(two_point, 1.0, 0.0, [0.5, -0.2]) == pytest.approx(math.log(Z), abs=1e-15)
    # the quoted six-digit value -0.291942 is off in the fifth digit
    assert log_partition(two_point, 1.0, 0.0, [0.5, -0.2]) == pytest.approx(-0.2919176, abs=1e-7)


def test_zero_disorder_reduces_to_homogeneous(law03):
    omega = DisorderBatch(5, 500, 1).omega(0)
    assert log_partition(law03, 0.0, 0.2, omega) / 500 == pytest.approx(
        finite_volume_free_energy(law03, 0.2, 500), rel=1e-13
    )


def test_workers_do_not_change_results():
    law = build_power_law(0.5, N_max=2**10)
    batch = DisorderBatch(99, 512, 40)
    a = batch_log_partition(law, 0.7, [0.0, 0.3], 512, batch, workers=1)
    b = batch_log_partition(law, 0.7, [0.0, 0.3], 512, batch, workers=2)
    assert np.array_equal(a, b)


def test_batch_matches_single_sample(law05):
    batch = DisorderBatch(4, 300, 20)
    rows = batch_log_partition(law05, 0.8, [0.1], 300, batch)[0]
    for s in (0, 13, 19):
        assert rows[s] == log_partition(law05, 0.8, 0.1, batch.omega(s))


def test_annealed_identity():
    # E Z_N(beta, h) = Z_N(0, h + beta^2/2), checked by Monte Carlo at tiny N
    law = from_masses([0.5, 0.3, 0.2])
    N, beta, h = 4, 0.4, -0.1
    batch = DisorderBatch(17, N, 20000)
    Z = np.exp(batch_log_partition(law, beta, [h], N, batch)[0])
    exact = math.exp(N * finite_volume_free_energy(law, h + beta**2 / 2, N))
    assert abs(Z.mean() - exact) <= 4 * Z.std(ddof=1) / math.sqrt(Z.size)


# --- quenched free energy ------------------------------------------------------------


def test_beta_zero_is_exact(law03):
    est = quenched_free_energy(law03, 0.0, 0.1, 1000, DisorderBatch(1, 1000, 5))
    assert est.std_error == 0.0
    assert est.mean == finite_volume_free_energy(law03, 0.1, 1000)


def test_jensen(law05):
    N, beta, h = 2048, 0.6, 0.0
    est = quenched_free_energy(law05, beta, h, N, DisorderBatch(20240601, N, 64))
    ann = finite_volume_free_energy(law05, h + beta**2 / 2, N)
    assert est.mean <= ann + 3 * est.std_error
    assert est.values.shape == (64,) and est.std_error > 0


def test_quenched_monotone_in_h(law05):
    batch = DisorderBatch(2, 1024, 32)
    vals = batch_log_partition(law05, 0.5, [-0.2, 0.0, 0.2], 1024, batch)
    # per sample, log Z is nondecreasing in h
    assert np.all(np.diff(vals, axis=0) >= 0)


def test_empty_batch_rejected(law05):
    with pytest.raises(ParameterError):
        quenched_free_energy(law05, 0.5, 0.0, 10, DisorderBatch(1, 10, 0))
    with pytest.raises(ParameterError):
        quenched_free_energy(law05, 0.5, 0.0, 20, DisorderBatch(1, 10, 3))


# --- contact fraction ----------------------------------------------------------------


def test_contact_fraction_matches_enumeration():
    law = from_masses([0.4, 0.35, 0.25])
    N, beta, h = 9, 0.9, 0.1
    batch = DisorderBatch(8, N, 24)
    est = contact_fraction(law, beta, h, N, batch, dh=1e-3)
    exact = np.array([_enumerate(law.masses, beta, h, batch.omega(s))[1] / N for s in range(24)])
    # centered difference: error O(dh^2)
    assert np.max(np.abs(est.values - exact)) < 1e-5
    r = est.diagnostics["richardson"]
    assert abs(r - exact.mean()) < abs(est.mean - exact.mean()) + 1e-12


def test_contact_fraction_richardson_gap(law05):
    est = contact_fraction(law05, 0.5, 0.05, 1024, DisorderBatch(3, 1024, 16))
    d = est.diagnostics
    assert d["richardson_gap"] == pytest.approx(abs(est.mean - d["half_step"]))
    assert d["richardson_gap"] < 1e-3
    assert "warning" not in d


def test_contact_fraction_large_step_warns(law05, caplog):
    est = contact_fraction(law05, 0.5, 0.0, 64, DisorderBatch(3, 64, 2), dh=0.2, richardson=False)
    assert "warning" in est.diagnostics
    assert any("curvature" in r.message for r in caplog.records)


def test_contact_fraction_bad_step(law05):
    with pytest.raises(ParameterError):
        contact_fraction(law05, 0.5, 0.0, 64, DisorderBatch(3, 64, 2), dh=0.0)


# --- interpolation gap ---------------------------------------------------------------


def test_interpolation_gap_nonpositive_on_average(law05):
    N = 1024
    est = interpolation_gap(law05, 0.4, 0.1, N, DisorderBatch(6, N, 48))
    # annealed comparison: E F_N(beta, -beta^2/2 + delta) <= F_N(0, delta)
    assert est.mean <= 3 * est.std_error
    assert est.diagnostics["homogeneous"] == finite_volume_free_energy(law05, 0.1, N)


def test_interpolation_gap_beta_zero(law05):
    est = interpolation_gap(law05, 0.0, 0.1, 100, DisorderBatch(6, 100, 4))
    assert est.mean == 0.0 and est.std_error == 0.0


def test_interpolation_gap_needs_positive_delta(law05):
    with pytest.raises(ParameterError):
        interpolation_gap(law05, 0.4, 0.0, 100, DisorderBatch(6, 100, 4))
