"""Exact state-vector simulation of the single-step search operator.

One step multiplies the uniform superposition by a conflict-keyed diagonal
phase exp(i*pi*rho*(c(s) - m/2^k)) and then by the mixing operator
U = W T W, where W is the Walsh transform and T keys a phase to the bit
count, T_rr = exp(i*pi*tau*(|r| - n/2)).  U's entries depend only on
Hamming distance d, with coefficient

    u_d = cos^n(pi*tau/2) * tan^d(pi*tau/2) * (-i)^d.

Mixing is applied as n independent 2x2 single-bit operators (the bit-count
phase factorizes per bit), with the global factor exp(-i*pi*tau*n/2)
applied once so amplitudes match the formulas above exactly, not merely up
to global phase.

State vectors are mutated in place; one worker owns a state at a time.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import CapacityError, NumericalIntegrityError, UsageError
from .sat import EnsembleSpec, SatProblem, make_rng, sample_problem

MAX_QUBITS = 30
# partial-assignment search squares the state space: 4^n amplitudes
MAX_PARTIAL_VARS = 13

NORM_TOL = 1e-9


@dataclass
class PhaseSchedule:
    """Per-step (rho, tau) pairs, plus the set-size phase for partial search.

    The linear rule rho_h = rho_a + h*rho_b, tau_h = tau_a + h*tau_b
    (h = 1..steps) is the canonical multi-step form; ``explicit`` builds
    arbitrary per-step values.
    """

    steps: list[tuple[float, float]]
    sigma: float | None = None

    def __post_init__(self):
        if not self.steps:
            raise UsageError("schedule must contain at least one step")
        for rho, tau in self.steps:
            if not (-1.0 <= rho <= 1.0) or not (0.0 <= tau <= 1.0):
                raise UsageError(f"(rho, tau)=({rho}, {tau}) outside the canonical box [-1,1]x[0,1]")

    @classmethod
    def single(cls, rho: float, tau: float, sigma: float | None = None) -> "PhaseSchedule":
        return cls([(rho, tau)], sigma=sigma)

    @classmethod
    def linear(cls, rho_a: float, rho_b: float, tau_a: float, tau_b: float, steps: int) -> "PhaseSchedule":
        return cls([(rho_a + h * rho_b, tau_a + h * tau_b) for h in range(1, steps + 1)])

    @classmethod
    def explicit(cls, pairs, sigma: float | None = None) -> "PhaseSchedule":
        return cls([(float(r), float(t)) for r, t in pairs], sigma=sigma)


@dataclass
class StateVector:
    """Dense array of 2^n complex amplitudes with unit norm."""

    amplitudes: np.ndarray
    n: int

    def norm_error(self) -> float:
        return abs(float(np.sum(np.abs(self.amplitudes) ** 2)) - 1.0)

    def probabilities(self) -> np.ndarray:
        return np.abs(self.amplitudes) ** 2

    def copy(self) -> "StateVector":
        return StateVector(self.amplitudes.copy(), self.n)


def uniform_state(n: int) -> StateVector:
    if not (1 <= n <= MAX_QUBITS):
        raise CapacityError(f"n={n} outside supported range 1..{MAX_QUBITS}")
    amp = np.full(1 << n, 2.0 ** (-n / 2), dtype=np.complex128)
    return StateVector(amp, n)


def apply_conflict_phase(state: StateVector, problem: SatProblem, rho: float) -> StateVector:
    """psi_s *= exp(i*pi*rho*(c(s) - m/2^k)).  Norm preserved exactly.

    c(s) takes values 0..m, so the exponentials come from an (m+1)-entry
    lookup instead of a full-length exp.
    """
    if state.n != problem.n:
        raise UsageError(f"state width {state.n} != problem width {problem.n}")
    table = problem.conflict_table()
    phases = np.exp(1j * math.pi * rho * (np.arange(problem.m + 1) - problem.mean_conflicts))
    state.amplitudes *= phases[table]
    return state


def fast_walsh(state: StateVector) -> StateVector:
    """In-place Walsh transform, entries 2^(-n/2) * (-1)^|r AND s|.  Involution."""
    a = state.amplitudes
    for bit in range(state.n):
        v = a.reshape(-1, 2, 1 << bit)
        lo = v[:, 0, :].copy()
        hi = v[:, 1, :]
        v[:, 0, :] = lo + hi
        v[:, 1, :] = lo - hi
    a *= 2.0 ** (-state.n / 2)
    return state


def _mix_bits(a: np.ndarray, nbits: int, tau: float) -> None:
    """Apply the per-bit 2x2 mixing operator on each of nbits axes."""
    e = cmath.exp(1j * math.pi * tau)
    c0 = (1 + e) / 2
    c1 = (1 - e) / 2
    for bit in range(nbits):
        v = a.reshape(-1, 2, 1 << bit)
        x0 = v[:, 0, :]
        x1 = v[:, 1, :]
        tot = x0 + x1
        y0 = c0 * x0
        y0 += c1 * x1
        v[:, 1, :] = tot - y0
        v[:, 0, :] = y0
    a *= cmath.exp(-1j * math.pi * tau * nbits / 2)


def apply_mixing(state: StateVector, tau: float) -> StateVector:
    """Multiply by U = W T W using n single-bit operators plus one global phase."""
    _mix_bits(state.amplitudes, state.n, tau)
    return state


def mixing_coefficient(n: int, tau: float, d: int) -> complex:
    """Closed-form u_d.  Written as cos^(n-d) * sin^d to stay finite at tau=1."""
    if not (0 <= d <= n):
        raise UsageError(f"distance d={d} outside 0..{n}")
    th = math.pi * tau / 2
    return (math.cos(th) ** (n - d)) * (math.sin(th) ** d) * (-1j) ** d


def mixing_coefficient_direct(n: int, t_table, d: int) -> complex:
    """Double-sum form of u_d for an arbitrary bit-count phase table t_0..t_n."""
    if len(t_table) != n + 1:
        raise UsageError(f"t_table must have n+1={n + 1} entries")
    if not (0 <= d <= n):
        raise UsageError(f"distance d={d} outside 0..{n}")
    total = 0j
    for z in range(d + 1):
        sign = (-1) ** z
        czd = math.comb(d, z)
        for h in range(z, n - d + z + 1):
            total += sign * czd * math.comb(n - d, h - z) * t_table[h]
    return total / (1 << n)


def run(problem: SatProblem, schedule: PhaseSchedule) -> StateVector:
    """Start uniform, apply (conflict phase, mixing) once per schedule step."""
    state = uniform_state(problem.n)
    for rho, tau in schedule.steps:
        apply_conflict_phase(state, problem, rho)
        apply_mixing(state, tau)
        err = state.norm_error()
        if err > NORM_TOL:
            raise NumericalIntegrityError(f"norm drift {err:.3e} exceeds {NORM_TOL}")
    return state


def p_solution(state: StateVector, problem: SatProblem) -> float:
    """Total probability on zero-conflict assignments."""
    if state.n != problem.n:
        raise UsageError(f"state width {state.n} != problem width {problem.n}")
    sol = problem.conflict_table() == 0
    total = float(np.sum(np.abs(state.amplitudes[sol]) ** 2))
    return min(1.0, total)  # unit norm up to rounding


def unstructured_psoln(S: int, N: int, j: int) -> float:
    """Success probability sin^2((2j+1)*theta) after j amplification steps."""
    if not (0 <= S <= N) or N <= 0:
        raise UsageError(f"need 0 <= S <= N, got S={S}, N={N}")
    if S == 0:
        return 0.0
    theta = math.asin(math.sqrt(S / N))
    return math.sin((2 * j + 1) * theta) ** 2


def grover_optimal_steps(S: int, N: int) -> int:
    """Step count bringing (2j+1)*theta near pi/2, so the success
    probability is at least 1 - S/N."""
    if S <= 0 or S > N:
        raise UsageError(f"need 0 < S <= N, got S={S}, N={N}")
    theta = math.asin(math.sqrt(S / N))
    return max(0, round(math.pi / (4 * theta) - 0.5))


def amplification_cost(p: float, per_trial_steps: float = 1.0) -> float:
    """Expected steps for amplitude amplification on a known success rate p:
    (pi/4) * per_trial_steps / sqrt(p).  Up to 4x more when p is unknown.
    """
    if not (0.0 < p <= 1.0):
        raise UsageError(f"success probability must be in (0, 1], got {p}")
    return (math.pi / 4) * per_trial_steps / math.sqrt(p)


# ---------------------------------------------------------------------------
# partial-assignment variant: search over all sets of variable-value pairs


def _partial_tables(problem: SatProblem) -> tuple[np.ndarray, np.ndarray]:
    """Unique-assignment counts q(s) and conflict counts c(s) over 4^n sets.

    Encoding: bit 2i marks pair (V_{i+1}=true) in the set, bit 2i+1 marks
    (V_{i+1}=false).  A variable is uniquely assigned when exactly one of
    its two bits is set; c(s) counts clauses whose variables are all
    uniquely assigned with falsifying values.
    """
    n = problem.n
    nbits = 2 * n
    size = 1 << nbits
    idx = np.arange(size, dtype=np.uint64)
    even_mask = np.uint64(sum(1 << (2 * i) for i in range(n)))
    unique_pairs = (idx ^ (idx >> np.uint64(1))) & even_mask
    q = np.bitwise_count(unique_pairs).astype(np.uint16)

    dtype = np.uint16 if problem.m < 65536 else np.uint32
    c = np.zeros(size, dtype=dtype)
    grid = c.reshape([2] * nbits)
    for cl in problem.clauses:
        idx_sel = [slice(None)] * nbits
        for v, neg in zip(cl.vars, cl.negated):
            # falsifying value: true if literal negated.  true-pair bit 2v,
            # false-pair bit 2v+1; exactly the falsifying pair present.
            true_bit = 1 if neg else 0
            idx_sel[nbits - 1 - 2 * v] = true_bit
            idx_sel[nbits - 1 - (2 * v + 1)] = 1 - true_bit
        grid[tuple(idx_sel)] += 1
    return q, c


def run_partial(problem: SatProblem, rho: float, tau: float, sigma: float,
                duplicate_phase: float | None = None) -> tuple[StateVector, float]:
    """Single step over all 2^(2n) variable-value-pair sets.

    Phases: exp(i*pi*rho*(c(s) - m/2^k)) * exp(i*pi*sigma*q(s)); mixing is
    the 2n-bit W T W with T keyed to set size.  ``duplicate_phase`` adds an
    optional T phase keyed to the number of doubly-assigned variables
    (applied via explicit W-diagonal-W since it is not per-bit separable).
    Returns the final state and the probability on solution sets
    (q = n, c = 0).
    """
    n = problem.n
    if n > MAX_PARTIAL_VARS:
        raise CapacityError(f"partial-assignment search limited to n <= {MAX_PARTIAL_VARS}")
    q, c = _partial_tables(problem)
    nbits = 2 * n
    amp = np.full(1 << nbits, 2.0 ** (-nbits / 2), dtype=np.complex128)
    state = StateVector(amp, nbits)

    phase = 1j * math.pi * (rho * (c.astype(np.float64) - problem.mean_conflicts)
                            + sigma * q.astype(np.float64))
    amp *= np.exp(phase)

    if duplicate_phase is None:
        _mix_bits(amp, nbits, tau)
    else:
        idx = np.arange(1 << nbits, dtype=np.uint64)
        sizes = np.bitwise_count(idx).astype(np.float64)
        dup = (sizes - q.astype(np.float64)) / 2.0
        fast_walsh(state)
        amp *= np.exp(1j * math.pi * (tau * (sizes - n) + duplicate_phase * dup))
        fast_walsh(state)

    err = state.norm_error()
    if err > NORM_TOL:
        raise NumericalIntegrityError(f"norm drift {err:.3e} exceeds {NORM_TOL}")
    psoln = float(np.sum(np.abs(amp[(q == n) & (c == 0)]) ** 2))
    return state, psoln


# ---------------------------------------------------------------------------
# Monte-Carlo ensemble averaging


@dataclass
class MonteCarloResult:
    mean: float
    std_error: float
    mean_sq: float
    soluble_fraction: float
    samples: int
    mean_soluble: float = math.nan
    std_error_soluble: float = math.nan
    psoln: list = field(default_factory=list, repr=False)


def monte_carlo_mean(spec: EnsembleSpec, schedule: PhaseSchedule, samples: int,
                     rng=None, keep_values: bool = False) -> MonteCarloResult:
    """Mean success probability over i.i.d. ensemble draws.

    Also reports the mean square (for variance studies), the soluble
    fraction, and statistics conditioned on soluble instances.
    """
    if samples < 1:
        raise UsageError("samples must be >= 1")
    if rng is None:
        rng = make_rng(spec.seed)
    vals = np.empty(samples)
    soluble = np.empty(samples, dtype=bool)
    for i in range(samples):
        problem = sample_problem(spec, rng)
        state = run(problem, schedule)
        vals[i] = p_solution(state, problem)
        soluble[i] = problem.count_solutions() > 0
    mean = float(np.mean(vals))
    se = float(np.std(vals, ddof=1) / math.sqrt(samples)) if samples > 1 else 0.0
    sol_frac = float(np.mean(soluble))
    if soluble.any():
        sv = vals[soluble]
        mean_sol = float(np.mean(sv))
        se_sol = float(np.std(sv, ddof=1) / math.sqrt(len(sv))) if len(sv) > 1 else 0.0
    else:
        mean_sol = math.nan
        se_sol = math.nan
    return MonteCarloResult(
        mean=mean, std_error=se, mean_sq=float(np.mean(vals**2)),
        soluble_fraction=sol_frac, samples=samples,
        mean_soluble=mean_sol, std_error_soluble=se_sol,
        psoln=vals.tolist() if keep_values else [],
    )
