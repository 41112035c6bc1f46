import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pinlab import (
    BoundaryError,
    DomainError,
    build_power_law,
    contact_marginals,
    finite_volume_free_energy,
    fit_finite_size_constant,
    free_energy,
    free_energy_derivatives,
    from_masses,
    partition_trace,
    sample_polymer,
    sample_polymers,
)
from pinlab._kernels import _pinned_logsumexp

from conftest import golden_F


def test_two_point_free_energy(two_point):
    sol = free_energy(two_point, math.log(2))
    assert sol.F == pytest.approx(-math.log((math.sqrt(5) - 1) / 2), abs=1e-12)
    assert sol.residual <= 1e-12


@settings(max_examples=50, deadline=None)
@given(st.floats(1e-4, 8.0))
def test_two_point_closed_form_everywhere(delta):
    F = free_energy(from_masses([0.5, 0.5]), delta).F
    assert F == pytest.approx(golden_F(delta), rel=1e-12)


@pytest.mark.parametrize("delta", [0.0, -0.1, -5.0])
def test_delocalized_phase(law03, delta):
    sol = free_energy(law03, delta)
    assert sol.F == 0.0 and sol.dF == 0.0


def test_srw_closed_form(srw1):
    for delta in (1e-3, 0.05, 0.5, 3.0):
        exact = -math.log1p(-((-math.expm1(-delta)) ** 2))
        assert free_energy(srw1, delta).F == pytest.approx(exact, rel=1e-12)


def test_nonrecurrent_law_rejected():
    with pytest.raises(DomainError, match="recurrent_reduction"):
        free_energy(from_masses([0.25, 0.25]), 0.3)


@settings(max_examples=30, deadline=None)
@given(st.floats(1e-3, 5.0))
def test_solver_residual(delta):
    law = build_power_law(0.3, N_max=2**12, normalization="exact_tail")
    sol = free_energy(law, delta)
    assert sol.residual <= 1e-12
    assert sol.dF > 0


def test_critical_behaviour_alpha_half(law05):
    deltas = [1e-1, 1e-2, 1e-3]
    ratios = [math.log(free_energy(law05, d).F) / math.log(d) for d in deltas]
    # log F / log delta -> 1 / alpha = 2 as delta -> 0
    assert all(abs(a - 2) > abs(b - 2) for a, b in zip(ratios, ratios[1:]))
    assert abs(ratios[-1] / 2 - 1) <= 0.1


def test_monotone_convex(law03):
    grid = np.linspace(0.01, 1.0, 60)
    F = np.array([free_energy(law03, d).F for d in grid])
    assert np.all(np.diff(F) >= 0)
    assert np.all(np.diff(F, 2) >= -1e-14)


# --- derivatives ----------------------------------------------------------------


def test_unit_steps(unit_step):
    sol = free_energy(unit_step, 0.37)
    assert sol.F == pytest.approx(0.37, abs=1e-15)
    assert sol.dF == pytest.approx(1.0, abs=1e-14)
    assert sol.d2F == pytest.approx(0.0, abs=1e-13)


def test_derivatives_finite_difference(two_point):
    d, h = math.log(2), 1e-5
    dF, d2F = free_energy_derivatives(two_point, d)
    up, mid, dn = (free_energy(two_point, x).F for x in (d + h, d, d - h))
    assert dF == pytest.approx((up - dn) / (2 * h), rel=1e-6)
    h2 = 1e-3
    up, dn = free_energy(two_point, d + h2).F, free_energy(two_point, d - h2).F
    assert d2F == pytest.approx((up - 2 * mid + dn) / h2**2, rel=1e-5)


@pytest.mark.parametrize("delta", [0.01, 0.2])
def test_derivatives_power_law(law03, delta):
    dF, d2F = free_energy_derivatives(law03, delta)
    h = delta * 1e-4
    fd = (free_energy(law03, delta + h).F - free_energy(law03, delta - h).F) / (2 * h)
    assert dF == pytest.approx(fd, rel=1e-6)


def test_derivative_scaling_alpha03(law03):
    # dF ~ delta^{(1 - alpha)/alpha} up to a slowly varying factor
    ratios = [free_energy_derivatives(law03, d)[0] * d ** (-(0.7 / 0.3)) for d in (1e-1, 1e-2, 1e-3)]
    steps = [ratios[i + 1] / ratios[i] for i in range(2)]
    assert all(0.8 < s < 1.25 for s in steps)
    assert abs(steps[1] - 1) < abs(steps[0] - 1)


@pytest.mark.parametrize("delta", [0.0, -0.2])
def test_derivatives_need_positive_delta(law03, delta):
    with pytest.raises(DomainError):
        free_energy_derivatives(law03, delta)


# --- finite volume ------------------------------------------------------------------


def test_finite_volume_unit_steps(unit_step):
    for N in (1, 7, 100):
        assert finite_volume_free_energy(unit_step, 0.25, N) == pytest.approx(0.25, abs=1e-15)


def test_finite_volume_two_point(two_point):
    assert finite_volume_free_energy(two_point, 0.0, 2) == pytest.approx(0.5 * math.log(0.75), abs=1e-15)


def _enumerate_Z(K, delta, N):
    total = 0.0
    for r in range(N):
        for inner in itertools.combinations(range(1, N), r):
            pts = (0,) + inner + (N,)
            w = 1.0
            for a, b in zip(pts, pts[1:]):
                w *= K[b - a] if b - a < len(K) else 0.0
            total += w * math.exp(delta * (len(pts) - 1))
    return total


@settings(max_examples=25, deadline=None)
@given(
    st.lists(st.floats(0.01, 1.0), min_size=1, max_size=6),
    st.floats(-1.0, 1.0),
    st.integers(1, 10),
)
def test_finite_volume_enumeration(weights, delta, N):
    w = np.asarray(weights) / sum(weights)
    law = from_masses(w)
    K = law.masses
    Z = _enumerate_Z(K, delta, N)
    if Z == 0:
        with pytest.raises(BoundaryError):
            finite_volume_free_energy(law, delta, N)
    else:
        assert math.exp(partition_trace(law, 0.0, delta, N).logZ[N]) == pytest.approx(Z, rel=1e-12)


def test_unreachable_site():
    law = from_masses([0.0, 1.0])  # only even gaps
    with pytest.raises(BoundaryError):
        finite_volume_free_energy(law, 0.1, 7)
    assert finite_volume_free_energy(law, 0.1, 8) == pytest.approx(0.05, abs=1e-15)


@settings(max_examples=30, deadline=None)
@given(st.integers(1, 400), st.integers(1, 400), st.floats(-0.5, 0.5))
def test_superadditivity(N, M, delta):
    law = build_power_law(0.4, N_max=1024)
    logZ = partition_trace(law, 0.0, delta, N + M).logZ
    assert logZ[N] + logZ[M] <= logZ[N + M] + 1e-12 * max(1.0, abs(logZ[N + M]))


def test_blocked_kernel_matches_log_sum_exp(law03):
    rng = np.random.default_rng(0)
    N = 3000
    field = rng.normal(0.0, 2.0, size=(N + 1, 3)) + np.array([-3.0, 0.0, 3.0])
    field[0] = 0
    from pinlab._kernels import pinned_log_partition

    a = pinned_log_partition(law03.masses, field, N)
    with np.errstate(divide="ignore"):
        b = _pinned_logsumexp(np.log(law03.masses), field, N)
    assert np.allclose(a, b, rtol=1e-12, atol=1e-10)


def test_extreme_fields_use_log_kernel(law03):
    N = 500
    field = np.full((N + 1, 1), 150.0)
    field[0] = 0
    from pinlab._kernels import pinned_log_partition

    a = pinned_log_partition(law03.masses, field, N)[N, 0]
    # unit steps dominate: log Z_N ~ N (150 + log K(1))
    assert a == pytest.approx(N * (150 + math.log(law03.masses[1])), rel=1e-6)


def test_limit_consistency(law03):
    F = free_energy(law03, 0.2).F
    gaps = [F - finite_volume_free_energy(law03, 0.2, N) for N in (2**10, 2**12, 2**14)]
    assert all(g > 0 for g in gaps) and gaps[0] > gaps[1] > gaps[2]


def test_finite_size_constant_band(law03):
    fit = fit_finite_size_constant(law03, 0.2, [2**k for k in range(10, 17)])
    assert max(fit.ratios) / min(fit.ratios) <= 3
    assert fit.C == max(fit.ratios)


# --- exact sampler ------------------------------------------------------------------


def test_sampler_unit_steps(unit_step):
    assert sample_polymer(unit_step, 0.3, 20, seed=1).tolist() == list(range(21))


def test_sampler_two_point(two_point):
    paths = sample_polymers(two_point, 0.0, 2, 30000, seed=4)
    p = np.mean([len(x) == 3 for x in paths])
    assert abs(p - 1 / 3) <= 3 * math.sqrt(2 / 9 / 30000)


def test_sampler_deterministic(law05):
    a = sample_polymer(law05, 0.3, 2000, seed=9)
    b = sample_polymer(law05, 0.3, 2000, seed=9)
    assert np.array_equal(a, b)
    assert a[0] == 0 and a[-1] == 2000 and np.all(np.diff(a) > 0)


def test_sampler_marginals(law03):
    N, M = 300, 6000
    exact = contact_marginals(law03, 0.1, N)
    assert exact[0] == pytest.approx(1.0) and exact[N] == pytest.approx(1.0)
    hits = np.zeros(N + 1)
    for p in sample_polymers(law03, 0.1, N, M, seed=2):
        hits[p] += 1
    emp = hits / M
    se = np.sqrt(exact * (1 - exact) / M) + 1e-12
    z = np.abs(emp - exact) / se
    # 300 sites: allow the expected handful beyond 3 sigma, none beyond 5
    assert np.mean(z > 3) < 0.02 and z.max() < 5


def test_contact_fraction_matches_derivative(law05):
    N, M, delta = 10**4, 10**4, 0.3
    exact = contact_marginals(law05, delta, N)[1:].sum() / N
    fr = np.array([(len(p) - 1) / N for p in sample_polymers(law05, delta, N, M, seed=12)])
    se = fr.std(ddof=1) / math.sqrt(M)
    assert abs(fr.mean() - exact) <= 3 * se
    # the boundary costs O(1/N) against the infinite-volume derivative
    assert abs(exact - free_energy(law05, delta).dF) < 10 / N
