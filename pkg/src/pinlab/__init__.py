"""Numerical laboratory for disordered pinning models on renewal processes."""

__version__ = "0.1.0"

from .bounds import (
    BoundReport,
    RegionConstants,
    RegionVerdict,
    RSBound,
    Verdict,
    annealed_critical_point,
    bound_report,
    rs_objective,
    rs_upper_bound,
    small_beta_expansion,
    theorem_region,
)
from .errors import (
    BoundaryError,
    BoundViolation,
    DegenerateLawError,
    DomainError,
    ParameterError,
    PinlabError,
    SizeError,
    UnreliableEstimateError,
)
from .homogeneous import (
    HomogeneousSolution,
    PartitionTrace,
    contact_marginals,
    finite_volume_free_energy,
    fit_finite_size_constant,
    free_energy,
    free_energy_derivatives,
    partition_trace,
    sample_polymer,
    sample_polymers,
)
from .quenched import (
    DisorderBatch,
    FreeEnergyEstimate,
    contact_fraction,
    interpolation_gap,
    log_partition,
    quenched_free_energy,
)
from .renewal import (
    MassFunction,
    RenewalLaw,
    SlowlyVarying,
    build_power_law,
    build_srw_returns,
    doney_constant,
    first_intersection_law,
    from_masses,
    intersection_tail,
    marginal_ell,
    mass_function,
    recurrent_reduction,
    sample_renewal,
)
from .replica import (
    IntersectionCountDistribution,
    check_integrating_inequality,
    estimate_psi0,
    intersection_count_exact,
    intersection_count_simulated,
    overlap_moment,
    psi0_exact,
)
