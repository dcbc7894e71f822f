"""Classical comparison methods and per-instance search-cost records.

GSAT here is the bare best-flip variant: start from a uniformly random
assignment and repeatedly flip the variable whose flip minimizes the
resulting conflict count, ties broken uniformly at random; sideways and
uphill moves are taken when they are the minimum.  A trial succeeds when
the conflict count reaches zero within 2n flips.

Cost records combine the one-step quantum success probability, the GSAT
per-trial success probability, and amplitude-amplification cost models,
assuming success probabilities are known a priori (unknown probabilities
raise costs by up to a factor of 4).
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np

from .errors import UsageError
from .sat import EnsembleSpec, SatProblem, make_rng, sample_problem
from .sim import PhaseSchedule, amplification_cost, grover_optimal_steps, p_solution, run, unstructured_psoln

GSAT_Z95 = 1.959963984540054

COST_COLUMNS = [
    "instance_id", "n", "k", "m", "solutions", "p_quantum", "p_gsat",
    "cost_quantum_aa", "cost_gsat_aa", "cost_unstructured",
]


def gsat_trial(problem: SatProblem, rng) -> tuple[bool, int]:
    """One GSAT trial with a 2n flip budget; returns (success, flips used)."""
    n, m = problem.n, problem.m
    if n < 1:
        raise UsageError("need at least one variable")
    masks, pats = problem.masks_patterns()
    a = np.uint64(int(rng.integers(0, 1 << n, dtype=np.uint64)))
    diff = (a ^ pats) & masks
    dist = np.bitwise_count(diff)
    limit = 2 * n
    bits = np.uint64(1) << np.arange(n, dtype=np.uint64)
    for step in range(limit + 1):
        conflicted = dist == 0
        c = int(np.count_nonzero(conflicted))
        if c == 0:
            return True, step
        if step == limit:
            break
        # delta[v]: conflict change if v flips.  Conflicted clauses containing
        # v lose their conflict; distance-1 clauses whose one differing bit is
        # v gain one.
        delta = np.zeros(n, dtype=np.int32)
        for j in np.nonzero(conflicted)[0]:
            for v in problem.clauses[j].vars:
                delta[v] -= 1
        near = np.nonzero(dist == 1)[0]
        if near.size:
            vcrit = np.log2(diff[near].astype(np.float64)).astype(np.int64)
            np.add.at(delta, vcrit, 1)
        best = np.nonzero(delta == delta.min())[0]
        v = int(best[rng.integers(0, best.size)])
        a ^= bits[v]
        touched = (masks >> np.uint64(v)) & np.uint64(1) == 1
        diff[touched] ^= bits[v] & masks[touched]
        dist[touched] = np.bitwise_count(diff[touched])
    return False, limit


@dataclass(frozen=True)
class GsatEstimate:
    p: float
    ci_low: float
    ci_high: float
    trials: int
    mean_steps: float


def gsat_success_probability(problem: SatProblem, trials: int, rng=None) -> GsatEstimate:
    """Bernoulli estimate of the per-trial success rate with Wilson 95% CI."""
    if trials < 100:
        raise UsageError("need at least 100 trials for a stable estimate")
    if rng is None:
        rng = make_rng(0)
    if problem.m == 0:
        return GsatEstimate(1.0, 1.0, 1.0, trials, 0.0)
    wins = 0
    steps_total = 0
    for _ in range(trials):
        ok, steps = gsat_trial(problem, rng)
        wins += ok
        steps_total += steps
    p = wins / trials
    z2 = GSAT_Z95**2
    denom = 1 + z2 / trials
    center = (p + z2 / (2 * trials)) / denom
    half = GSAT_Z95 * math.sqrt(p * (1 - p) / trials + z2 / (4 * trials**2)) / denom
    # the interval contains the point estimate by construction; enforce it
    # against rounding at the endpoints
    lo = min(p, max(0.0, center - half))
    hi = max(p, min(1.0, center + half))
    return GsatEstimate(p, lo, hi, trials, steps_total / trials)


@dataclass
class CostRecord:
    instance_id: int
    n: int
    k: int
    m: int
    solutions: int
    p_quantum: float
    p_gsat: float
    cost_quantum_aa: float
    cost_gsat_aa: float
    cost_unstructured: float

    def row(self) -> list:
        return [self.instance_id, self.n, self.k, self.m, self.solutions,
                self.p_quantum, self.p_gsat, self.cost_quantum_aa,
                self.cost_gsat_aa, self.cost_unstructured]


def instance_costs(problem: SatProblem, schedule: PhaseSchedule,
                   gsat_trials: int = 0, rng=None, instance_id: int = 0) -> CostRecord:
    """All cost fields for one instance.  Insoluble instances carry infinite
    costs; gsat_trials = 0 skips the GSAT estimate (NaN fields).
    """
    if rng is None:
        rng = make_rng(0)
    S = problem.count_solutions()
    state = run(problem, schedule)
    p_q = p_solution(state, problem)
    if gsat_trials > 0:
        p_g = gsat_success_probability(problem, gsat_trials, rng).p
    else:
        p_g = math.nan
    if S == 0:
        return CostRecord(instance_id, problem.n, problem.k, problem.m, 0,
                          p_q, p_g, math.inf, math.inf, math.inf)
    cost_q = amplification_cost(p_q) if p_q > 0 else math.inf
    if math.isnan(p_g):
        cost_g = math.nan
    elif p_g > 0:
        cost_g = amplification_cost(p_g, per_trial_steps=2 * problem.n)
    else:
        cost_g = math.inf
    j = grover_optimal_steps(S, 1 << problem.n)
    p_u = unstructured_psoln(S, 1 << problem.n, j)
    cost_u = max(1.0, j / p_u) if p_u > 0 else math.inf
    return CostRecord(instance_id, problem.n, problem.k, problem.m, S,
                      p_q, p_g, cost_q, cost_g, cost_u)


def sample_soluble(spec: EnsembleSpec, count: int, rng=None,
                   max_draws: int | None = None) -> tuple[list[SatProblem], float]:
    """Rejection-sample soluble instances; returns them plus the observed
    soluble fraction of all draws."""
    if rng is None:
        rng = make_rng(spec.seed)
    if max_draws is None:
        max_draws = max(100, 100 * count)
    out = []
    draws = 0
    while len(out) < count:
        if draws >= max_draws:
            raise UsageError(f"exceeded {max_draws} draws finding {count} soluble instances")
        problem = sample_problem(spec, rng)
        draws += 1
        if problem.count_solutions() > 0:
            out.append(problem)
    return out, len(out) / draws


@dataclass(frozen=True)
class CostAggregate:
    inv_mean_p: float       # 1 / mean(p)
    median_inv_p: float     # median(1/p)
    mean_inv_p: float       # mean(1/p)
    count: int


def aggregate_costs(records) -> CostAggregate:
    """The three cost summaries over soluble records with p_quantum > 0."""
    ps = np.array([r.p_quantum for r in records if r.solutions > 0 and r.p_quantum > 0])
    if ps.size == 0:
        raise UsageError("no soluble records with positive success probability")
    inv = 1.0 / ps
    return CostAggregate(
        inv_mean_p=float(1.0 / np.mean(ps)),
        median_inv_p=float(np.median(inv)),
        mean_inv_p=float(np.mean(inv)),
        count=int(ps.size),
    )


def write_cost_csv(records, path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(COST_COLUMNS)
        for r in records:
            writer.writerow(r.row())


def read_cost_csv(path) -> list[CostRecord]:
    out = []
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        for row in reader:
            out.append(CostRecord(
                instance_id=int(row["instance_id"]), n=int(row["n"]), k=int(row["k"]),
                m=int(row["m"]), solutions=int(row["solutions"]),
                p_quantum=float(row["p_quantum"]), p_gsat=float(row["p_gsat"]),
                cost_quantum_aa=float(row["cost_quantum_aa"]),
                cost_gsat_aa=float(row["cost_gsat_aa"]),
                cost_unstructured=float(row["cost_unstructured"]),
            ))
    return out
