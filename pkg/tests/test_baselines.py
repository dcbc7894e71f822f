import math

import numpy as np
import pytest

from qsk import (
    Clause,
    EnsembleSpec,
    PhaseSchedule,
    SatProblem,
    UsageError,
    aggregate_costs,
    gsat_success_probability,
    gsat_trial,
    instance_costs,
    make_rng,
    sample_problem,
    sample_soluble,
)
from qsk.baselines import COST_COLUMNS, read_cost_csv, write_cost_csv


def insoluble_problem():
    return SatProblem(2, 1, (Clause((0,), (False,)), Clause((0,), (True,))))


def slow_gsat_trial(problem, rng):
    """Reference implementation: recount conflicts for every candidate flip."""
    n = problem.n
    a = int(rng.integers(0, 1 << n))
    for step in range(2 * n + 1):
        c = problem.conflicts(a)
        if c == 0:
            return True, step
        if step == 2 * n:
            break
        totals = [problem.conflicts(a ^ (1 << v)) for v in range(n)]
        lowest = min(totals)
        best = [v for v, t in enumerate(totals) if t == lowest]
        a ^= 1 << int(best[rng.integers(0, len(best))])
    return False, 2 * n


def test_gsat_trivial_cases():
    rng = make_rng(0)
    empty = SatProblem(4, 3, ())
    ok, steps = gsat_trial(empty, rng)
    assert ok and steps == 0
    for _ in range(50):
        ok, steps = gsat_trial(insoluble_problem(), rng)
        assert not ok
        assert steps == 4  # 2n flips spent


def test_gsat_step_budget():
    rng = make_rng(1)
    p = sample_problem(EnsembleSpec("random", 10, 3, 42, seed=1))
    for _ in range(100):
        _, steps = gsat_trial(p, rng)
        assert steps <= 2 * p.n


def test_gsat_matches_slow_reference_statistically():
    p = sample_problem(EnsembleSpec("random", 8, 3, 28, seed=8))
    assert p.count_solutions() > 0
    trials = 600
    fast = sum(gsat_trial(p, make_rng((2, i)))[0] for i in range(trials)) / trials
    slow = sum(slow_gsat_trial(p, make_rng((3, i)))[0] for i in range(trials)) / trials
    # both estimate the same Bernoulli rate; allow 3-sigma of the difference
    sigma = math.sqrt(fast * (1 - fast) / trials + slow * (1 - slow) / trials)
    assert abs(fast - slow) < 3 * sigma + 1e-9


def test_gsat_success_probability_bounds_and_stability():
    assert gsat_success_probability(SatProblem(3, 2, ()), 100).p == 1.0
    est0 = gsat_success_probability(insoluble_problem(), 200, make_rng(4))
    assert est0.p == 0.0
    p = sample_problem(EnsembleSpec("random", 10, 3, 20, seed=20))
    e1 = gsat_success_probability(p, 400, make_rng(5))
    e2 = gsat_success_probability(p, 400, make_rng(6))
    assert e1.ci_low <= e2.p <= e1.ci_high
    with pytest.raises(UsageError):
        gsat_success_probability(p, 10)


def test_instance_costs_empty_problem():
    p = SatProblem(5, 3, ())
    rec = instance_costs(p, PhaseSchedule.single(0.3, 0.0), gsat_trials=100, rng=make_rng(7))
    assert rec.solutions == 32
    assert rec.p_quantum == pytest.approx(1.0)
    assert rec.p_gsat == 1.0
    assert rec.cost_unstructured == 1.0
    assert rec.cost_quantum_aa == pytest.approx(math.pi / 4)


def test_instance_costs_insoluble_markers():
    rec = instance_costs(insoluble_problem(), PhaseSchedule.single(0.3, 0.2),
                         gsat_trials=100, rng=make_rng(8))
    assert rec.solutions == 0
    assert math.isinf(rec.cost_quantum_aa)
    assert math.isinf(rec.cost_gsat_aa)
    assert math.isinf(rec.cost_unstructured)


def test_cost_aggregate_jensen_and_structured_advantage():
    schedule = PhaseSchedule.single(0.291, 0.260)  # density-2 optimum
    spec = EnsembleSpec("random", 12, 3, 24, seed=123)
    problems, frac = sample_soluble(spec, 80, make_rng(123))
    assert 0 < frac <= 1
    records = [instance_costs(p, schedule, instance_id=i) for i, p in enumerate(problems)]
    agg = aggregate_costs(records)
    assert agg.inv_mean_p <= agg.mean_inv_p  # Jensen
    assert agg.inv_mean_p <= agg.median_inv_p * 1.05
    # structured one-step + amplification beats unstructured amplification
    mean_q = np.mean([r.cost_quantum_aa for r in records])
    mean_u = np.mean([r.cost_unstructured for r in records])
    assert mean_q < mean_u


def test_gsat_cost_fields_populated():
    schedule = PhaseSchedule.single(0.218, 0.286)
    spec = EnsembleSpec("random", 10, 3, 40, seed=321)
    problems, _ = sample_soluble(spec, 10, make_rng(321))
    rng = make_rng(99)
    recs = [instance_costs(p, schedule, gsat_trials=150, rng=rng, instance_id=i)
            for i, p in enumerate(problems)]
    for r in recs:
        assert 0.0 <= r.p_gsat <= 1.0
        assert r.cost_gsat_aa > 0
    # the 2n steps per trial make amplified GSAT pricier than the one-step
    # method on these small instances
    finite = [r for r in recs if math.isfinite(r.cost_gsat_aa)]
    assert np.mean([r.cost_gsat_aa for r in finite]) > np.mean([r.cost_quantum_aa for r in finite])


def test_cost_csv_roundtrip(tmp_path):
    schedule = PhaseSchedule.single(0.291, 0.260)
    spec = EnsembleSpec("random", 8, 3, 16, seed=11)
    problems, _ = sample_soluble(spec, 5, make_rng(11))
    records = [instance_costs(p, schedule, instance_id=i) for i, p in enumerate(problems)]
    path = tmp_path / "costs.csv"
    write_cost_csv(records, path)
    header = path.read_text().splitlines()[0]
    assert header == ",".join(COST_COLUMNS)
    back = read_cost_csv(path)
    assert len(back) == len(records)
    for a, b in zip(back, records):
        assert a.solutions == b.solutions
        assert a.p_quantum == pytest.approx(b.p_quantum, rel=1e-12)


def test_sample_soluble_exhaustion():
    with pytest.raises(UsageError):
        sample_soluble(EnsembleSpec("random", 2, 1, 4, seed=1), 3, make_rng(1), max_draws=50)
