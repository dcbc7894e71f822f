"""k-SAT problems, bit-string assignments, and the two problem ensembles.

Assignments are n-bit integers: bit i (least significant = V_1) holds the
value of variable V_{i+1}.  A clause of width k is falsified by exactly one
setting of its k variables, so conflict counting reduces to a masked
integer comparison per clause.

Ensembles draw m *distinct* clauses uniformly from the pool of
M = C(n,k) * 2^k possible clauses ("random"), or from the pool of clauses
consistent with a stored solution ("prespecified").  Sampling uses Floyd's
algorithm over clause ranks, so the pool is never materialized.

All types are immutable after construction and safe to share read-only
across threads.  The RNG is numpy's counter-based Philox generator; pass
seeds (or generators derived from spawned SeedSequences) for reproducible
parallel streams.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .errors import CapacityError, UsageError

# Full conflict tables are dense over 2^n states; cap the exponent.
MAX_TABLE_BITS = 30

# enumerate_problems is a brute-force oracle; refuse huge index spaces.
MAX_ENUMERATION = 10**7


def make_rng(seed):
    """Counter-based 64-bit generator (Philox) used everywhere for sampling."""
    return np.random.Generator(np.random.Philox(seed))


def popcount(v: int) -> int:
    return v.bit_count()


@dataclass(frozen=True)
class Assignment:
    """A complete truth-value setting encoded as an n-bit integer."""

    bits: int
    n: int

    def __post_init__(self):
        if self.n < 0 or not (0 <= self.bits < (1 << self.n)):
            raise UsageError(f"assignment bits {self.bits} out of range for n={self.n}")

    def ones(self) -> int:
        return self.bits.bit_count()

    def value(self, var: int) -> bool:
        """Value of variable V_{var+1}."""
        return bool((self.bits >> var) & 1)

    @classmethod
    def from_values(cls, values) -> "Assignment":
        bits = 0
        for i, v in enumerate(values):
            if v:
                bits |= 1 << i
        return cls(bits, len(values))


def hamming(r: Assignment, s: Assignment) -> int:
    """Number of positions where r and s differ: |r| + |s| - 2|r AND s|."""
    if r.n != s.n:
        raise UsageError(f"width mismatch: {r.n} != {s.n}")
    return (r.bits ^ s.bits).bit_count()


@dataclass(frozen=True)
class Clause:
    """Disjunction of k literals over distinct variables (ascending indices).

    ``negated[i]`` marks literal i as NOT vars[i].  The clause is falsified
    by the single assignment giving every literal the value false, captured
    by the (mask, pattern) pair: conflict iff (bits & mask) == pattern.
    """

    vars: tuple[int, ...]
    negated: tuple[bool, ...]

    def __post_init__(self):
        if len(self.vars) != len(self.negated):
            raise UsageError("vars and negated must have equal length")
        if any(b < a for a, b in zip(self.vars, self.vars[1:])) or len(set(self.vars)) != len(self.vars):
            raise UsageError(f"variable indices must be strictly ascending: {self.vars}")
        if self.vars and self.vars[0] < 0:
            raise UsageError("negative variable index")

    @property
    def k(self) -> int:
        return len(self.vars)

    @property
    def mask(self) -> int:
        m = 0
        for v in self.vars:
            m |= 1 << v
        return m

    @property
    def pattern(self) -> int:
        """The unique falsifying assignment restricted to the clause variables."""
        p = 0
        for v, neg in zip(self.vars, self.negated):
            if neg:
                p |= 1 << v
        return p

    def conflicts_with(self, bits: int) -> bool:
        return (bits & self.mask) == self.pattern


def _subset_rank(vars: tuple[int, ...], n: int) -> int:
    """Lexicographic rank of an ascending k-subset of range(n)."""
    k = len(vars)
    r = 0
    prev = -1
    for i, v in enumerate(vars):
        for u in range(prev + 1, v):
            r += math.comb(n - u - 1, k - i - 1)
        prev = v
    return r


def _subset_unrank(r: int, n: int, k: int) -> tuple[int, ...]:
    out = []
    v = 0
    for i in range(k):
        while True:
            c = math.comb(n - v - 1, k - i - 1)
            if r < c:
                out.append(v)
                v += 1
                break
            r -= c
            v += 1
    return tuple(out)


def clause_rank(clause: Clause, n: int) -> int:
    """Position of a clause in the canonical pool order (subset-major)."""
    neg_bits = 0
    for j, neg in enumerate(clause.negated):
        if neg:
            neg_bits |= 1 << j
    return _subset_rank(clause.vars, n) * (1 << clause.k) + neg_bits


def clause_unrank(rank: int, n: int, k: int) -> Clause:
    subset_r, neg_bits = divmod(rank, 1 << k)
    vars = _subset_unrank(subset_r, n, k)
    negated = tuple(bool((neg_bits >> j) & 1) for j in range(k))
    return Clause(vars, negated)


def clause_pool_size(n: int, k: int) -> int:
    """M = C(n,k) * 2^k, the number of distinct width-k clauses."""
    return math.comb(n, k) << k


@dataclass(frozen=True)
class SatProblem:
    """A k-SAT instance: n variables and m distinct width-k clauses."""

    n: int
    k: int
    clauses: tuple[Clause, ...]
    _cache: dict = field(default_factory=dict, repr=False, compare=False, hash=False)

    def __post_init__(self):
        if self.k > self.n:
            raise UsageError(f"clause width {self.k} exceeds variable count {self.n}")
        for c in self.clauses:
            if c.k != self.k:
                raise UsageError("mixed clause widths are not supported")
            if c.vars[-1] >= self.n:
                raise UsageError(f"clause variable {c.vars[-1]} out of range for n={self.n}")
        if len(set(self.clauses)) != len(self.clauses):
            raise UsageError("duplicate clauses")

    @property
    def m(self) -> int:
        return len(self.clauses)

    @property
    def mu(self) -> float:
        return self.m / self.n

    @property
    def mean_conflicts(self) -> float:
        """m / 2^k, identical for every instance with the same (m, k)."""
        return self.m / (1 << self.k)

    def masks_patterns(self) -> tuple[np.ndarray, np.ndarray]:
        if "mp" not in self._cache:
            masks = np.array([c.mask for c in self.clauses], dtype=np.uint64)
            pats = np.array([c.pattern for c in self.clauses], dtype=np.uint64)
            self._cache["mp"] = (masks, pats)
        return self._cache["mp"]

    def conflicts(self, s: Assignment | int) -> int:
        bits = s.bits if isinstance(s, Assignment) else int(s)
        if isinstance(s, Assignment) and s.n != self.n:
            raise UsageError(f"assignment width {s.n} != problem width {self.n}")
        return sum(1 for c in self.clauses if (bits & c.mask) == c.pattern)

    def conflict_table(self) -> np.ndarray:
        """Dense table c(s) for all 2^n assignments (built once, cached)."""
        if "table" not in self._cache:
            if self.n > MAX_TABLE_BITS:
                raise CapacityError(f"conflict table needs 2^{self.n} entries (limit 2^{MAX_TABLE_BITS})")
            dtype = np.uint16 if self.m < 65536 else np.uint32
            table = np.zeros(1 << self.n, dtype=dtype)
            grid = table.reshape([2] * self.n) if self.n else table
            for c in self.clauses:
                idx = [slice(None)] * self.n
                for v, neg in zip(c.vars, c.negated):
                    idx[self.n - 1 - v] = 1 if neg else 0
                grid[tuple(idx)] += 1
            self._cache["table"] = table
        return self._cache["table"]

    def is_solution(self, s: Assignment | int) -> bool:
        return self.conflicts(s) == 0

    def count_solutions(self) -> int:
        if self.n > MAX_TABLE_BITS:
            raise CapacityError(f"solution count by enumeration limited to n <= {MAX_TABLE_BITS}")
        return int(np.count_nonzero(self.conflict_table() == 0))


def conflicts(problem: SatProblem, s: Assignment) -> int:
    return problem.conflicts(s)


def is_solution(problem: SatProblem, s: Assignment) -> bool:
    return problem.is_solution(s)


def count_solutions(problem: SatProblem) -> int:
    return problem.count_solutions()


@dataclass(frozen=True)
class EnsembleSpec:
    """Which ensemble to draw from, and its exact size parameters.

    kind "random": m distinct clauses uniform over the full pool.
    kind "prespecified": clauses drawn only from those that do not conflict
    with ``solution``, so the stored assignment always solves the instance.
    """

    kind: str
    n: int
    k: int
    m: int
    seed: int = 0
    solution: Assignment | None = None

    def __post_init__(self):
        if self.kind not in ("random", "prespecified"):
            raise UsageError(f"unknown ensemble kind {self.kind!r}")
        if self.k > self.n:
            raise UsageError("k exceeds n")
        if self.kind == "prespecified":
            if self.solution is None:
                raise UsageError("prespecified ensemble requires a solution assignment")
            if self.solution.n != self.n:
                raise UsageError("solution width mismatch")
        if self.m > self.pool_size():
            raise CapacityError(f"m={self.m} exceeds pool size {self.pool_size()}")

    def pool_size(self) -> int:
        full = clause_pool_size(self.n, self.k)
        if self.kind == "random":
            return full
        return full - math.comb(self.n, self.k)

    def unrank(self, rank: int) -> Clause:
        """Map a pool rank to a clause, skipping excluded patterns if needed."""
        if self.kind == "random":
            return clause_unrank(rank, self.n, self.k)
        per_subset = (1 << self.k) - 1
        subset_r, t = divmod(rank, per_subset)
        vars = _subset_unrank(subset_r, self.n, self.k)
        # the one forbidden pattern: negations that make `solution` falsify it
        forbidden = 0
        for j, v in enumerate(vars):
            if self.solution.value(v):
                forbidden |= 1 << j
        neg_bits = t if t < forbidden else t + 1
        negated = tuple(bool((neg_bits >> j) & 1) for j in range(self.k))
        return Clause(vars, negated)


def sample_problem(spec: EnsembleSpec, rng=None) -> SatProblem:
    """Uniform m-subset of the admissible clause pool (Floyd's algorithm)."""
    if rng is None:
        rng = make_rng(spec.seed)
    pool = spec.pool_size()
    chosen: set[int] = set()
    for j in range(pool - spec.m, pool):
        t = int(rng.integers(0, j + 1))
        chosen.add(j if t in chosen else t)
    clauses = tuple(spec.unrank(r) for r in sorted(chosen))
    return SatProblem(spec.n, spec.k, clauses)


def enumerate_problems(n: int, k: int, m: int):
    """Every m-subset of the clause pool, exactly once.  Brute-force oracle."""
    pool = clause_pool_size(n, k)
    if m > pool:
        raise CapacityError(f"m={m} exceeds pool size {pool}")
    if math.comb(pool, m) > MAX_ENUMERATION:
        raise CapacityError(f"C({pool},{m}) problems exceed enumeration budget {MAX_ENUMERATION}")
    for ranks in itertools.combinations(range(pool), m):
        yield SatProblem(n, k, tuple(clause_unrank(r, n, k) for r in ranks))


def solution_fraction(n: int, k: int, m: int, kind: str = "exact") -> float:
    """Probability that a fixed assignment solves a random-ensemble instance.

    "exact" uses the distinct-clause hypergeometric C(M - C(n,k), m)/C(M, m);
    "asymptotic" uses (1 - 2^-k)^m, the with-replacement / large-n form.
    """
    if kind == "asymptotic":
        return (1.0 - 2.0 ** (-k)) ** m
    if kind != "exact":
        raise UsageError(f"unknown kind {kind!r}")
    pool = clause_pool_size(n, k)
    if m > pool:
        raise CapacityError(f"m={m} exceeds pool size {pool}")
    compatible = pool - math.comb(n, k)
    if m > compatible:
        return 0.0
    return float(Fraction(math.comb(compatible, m), math.comb(pool, m)))


def expected_solutions(n: int, k: int, m: int, kind: str = "exact") -> float:
    return (2.0**n) * solution_fraction(n, k, m, kind)


def conflict_moments(n: int, k: int, m: int) -> tuple[float, float]:
    """Ensemble mean and expected per-instance variance of the conflict count.

    The mean m * 2^-k holds for every instance; the expected variance comes
    from averaging the second moment over the distinct-clause ensemble.
    """
    pool = clause_pool_size(n, k)
    if m > pool:
        raise CapacityError(f"m={m} exceeds pool size {pool}")
    mean = m / (1 << k)
    if m == 0:
        return 0.0, 0.0
    second = Fraction(m, 1 << k) * (1 + Fraction((m - 1) * (pool - (1 << k)), (pool - 1) * (1 << k)))
    var = second - Fraction(m, 1 << k) ** 2
    return mean, float(var)


def asymptotic_conflict_variance(k: int, m: int) -> float:
    """Large-n limit of the expected conflict variance: cbar * (1 - 2^-k)."""
    return (m / (1 << k)) * (1.0 - 2.0 ** (-k))
