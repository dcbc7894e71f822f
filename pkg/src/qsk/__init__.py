"""Single-step quantum search on random k-SAT.

Exact state-vector simulation, exact ensemble averages of the success
probability, steepest-descent decay rates with optimized phase parameters,
limiting closed forms, and classical baselines.
"""

from .asymptotics import (
    DecayResult,
    ReferenceRates,
    ScaledPoint,
    StrongLimit,
    WeakLimit,
    decay_rate,
    exponent,
    find_stationary_point,
    optimize_parameters,
    prespecified_bound_rate,
    reference_rates,
    scaled_counts,
    strong_limit,
    weak_limit,
    weak_limit_parameters,
    zero_density_point,
)
from .baselines import (
    CostAggregate,
    CostRecord,
    GsatEstimate,
    aggregate_costs,
    gsat_success_probability,
    gsat_trial,
    instance_costs,
    sample_soluble,
)
from .counting import (
    ClauseGroupCounts,
    GroupSizes,
    clause_group_counts,
    exact_mean_psoln,
    n_problems_constrained,
    prespecified_solution_probability,
)
from .errors import CapacityError, NumericalIntegrityError, QskError, UsageError
from .io import from_dimacs, spec_from_json, spec_to_json, to_dimacs
from .sat import (
    Assignment,
    Clause,
    EnsembleSpec,
    SatProblem,
    asymptotic_conflict_variance,
    conflict_moments,
    conflicts,
    count_solutions,
    enumerate_problems,
    expected_solutions,
    hamming,
    is_solution,
    make_rng,
    sample_problem,
    solution_fraction,
)
from .sim import (
    MonteCarloResult,
    PhaseSchedule,
    StateVector,
    amplification_cost,
    apply_conflict_phase,
    apply_mixing,
    fast_walsh,
    grover_optimal_steps,
    mixing_coefficient,
    mixing_coefficient_direct,
    monte_carlo_mean,
    p_solution,
    run,
    run_partial,
    uniform_state,
    unstructured_psoln,
)

__version__ = "0.1.0"
