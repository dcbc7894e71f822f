"""Exact ensemble averages of the success probability by clause counting.

For three assignments r, s, s' the n variables split into four groups by
agreement pattern (sizes w, x, y, z), and inclusion-exclusion gives the
number of clauses conflicting with s only, s' only, both, or neither,
among those compatible with r.  Weighting selections of b and b' distinct
conflicts by the phase exp(i*pi*rho*(b - b')) and the mixing coefficients
u_{y+z} u*_{x+y} yields the exact mean success probability over the
distinct-clause random ensemble:

    mean = sum_{x,y,z} multinomial(n; w,x,y,z) u_{y+z} u*_{x+y}
           * sum_{b,b'} exp(i*pi*rho*(b-b'))
             C(N_s,b) C(N_s',b') C(N_other, m-b-b') / C(M, m)

Two evaluation paths: exact big-integer binomials at small sizes, and a
vectorized log-factorial path whose dynamic range supports n of a few
hundred.  The same core, with the pool restricted to clauses compatible
with a fixed target assignment, gives the mean probability of finding a
prespecified solution (a lower bound on the prespecified ensemble's mean).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import CapacityError, NumericalIntegrityError, UsageError
from .sat import clause_pool_size
from .sim import mixing_coefficient

# exact big-integer path only while C(M, m) stays well inside float precision
EXACT_DENOMINATOR_LIMIT = 10**18
# (points in the x,y,z simplex) * (inner grid size) budget for the log path
MAX_TERM_BUDGET = 4 * 10**9

IMAG_TOL = 1e-6


@dataclass(frozen=True)
class GroupSizes:
    """Sizes of the four agreement groups; w + x + y + z = n."""

    w: int
    x: int
    y: int
    z: int

    def __post_init__(self):
        if min(self.w, self.x, self.y, self.z) < 0:
            raise UsageError("group sizes must be nonnegative")

    @property
    def n(self) -> int:
        return self.w + self.x + self.y + self.z


@dataclass(frozen=True)
class ClauseGroupCounts:
    """Clause pool split by conflict pattern against (r, s, s')."""

    m_total: int
    n_both: int
    n_s: int
    n_sprime: int
    n_other: int


def clause_group_counts(n: int, k: int, g: GroupSizes) -> ClauseGroupCounts:
    """Inclusion-exclusion counts for a (w,x,y,z) grouping.

    Binomials with upper index below k vanish, which silently handles all
    small groups.
    """
    if g.n != n:
        raise UsageError(f"group sizes sum to {g.n}, expected n={n}")
    if k > n:
        raise UsageError("k exceeds n")
    cnk = math.comb(n, k)
    n_both = math.comb(g.w + g.y, k) - math.comb(g.w, k)
    n_s = cnk - math.comb(g.w + g.x, k) - n_both
    n_sp = cnk - math.comb(g.w + g.z, k) - n_both
    n_other = cnk * ((1 << k) - 1) - n_s - n_sp
    return ClauseGroupCounts(
        m_total=clause_pool_size(n, k),
        n_both=n_both, n_s=n_s, n_sprime=n_sp, n_other=n_other,
    )


def n_problems_constrained(counts: ClauseGroupCounts, m: int, b: int, bp: int) -> int:
    """Number of m-clause problems with b conflicts only on s, b' only on s'.

    Out-of-range selections count zero problems.
    """
    rem = m - b - bp
    if b < 0 or bp < 0 or rem < 0:
        return 0
    if b > counts.n_s or bp > counts.n_sprime or rem > counts.n_other:
        return 0
    return math.comb(counts.n_s, b) * math.comb(counts.n_sprime, bp) * math.comb(counts.n_other, rem)


def _group_iter(n: int):
    for x in range(n + 1):
        for y in range(n + 1 - x):
            for z in range(n + 1 - x - y):
                yield x, y, z, n - x - y - z


def _mean_psoln_exact(n, k, m, rho, tau, denominator, collect=None):
    """Big-integer path; ratios of exact binomials, complex float accumulation."""
    total = 0j
    cnk = math.comb(n, k)
    fact = [math.factorial(i) for i in range(n + 1)]
    for x, y, z, w in _group_iter(n):
        uu = mixing_coefficient(n, tau, y + z) * mixing_coefficient(n, tau, x + y).conjugate()
        if uu == 0:
            continue
        counts = clause_group_counts(n, k, GroupSizes(w, x, y, z))
        mult = fact[n] // (fact[w] * fact[x] * fact[y] * fact[z])
        inner = 0j
        for b in range(min(m, counts.n_s) + 1):
            for bp in range(min(m - b, counts.n_sprime) + 1):
                cnt = n_problems_constrained(counts, m, b, bp)
                if cnt:
                    inner += cmath_exp_pi(rho * (b - bp)) * (cnt / denominator)
        term = mult * uu * inner
        total += term
        if collect is not None:
            collect.append((x, y, z, w, term.real, term.imag))
    return total


def cmath_exp_pi(t: float) -> complex:
    """exp(i*pi*t) with exact special cases at integers."""
    r = t % 2.0
    if r == 0.0:
        return 1.0 + 0j
    if r == 1.0:
        return -1.0 + 0j
    return complex(math.cos(math.pi * t), math.sin(math.pi * t))


def _mean_psoln_log(n, k, m, rho, tau, log_denominator, collect=None):
    """Log-factorial path, vectorized over the inner (b, b') grid."""
    M = clause_pool_size(n, k)
    lf = np.zeros(M + 1)
    lf[1:] = np.cumsum(np.log(np.arange(1, M + 1)))
    th = math.pi * tau / 2
    lcos = math.log(math.cos(th)) if tau < 1.0 else -math.inf
    lsin = math.log(math.sin(th)) if tau > 0.0 else -math.inf
    cnk = math.comb(n, k)
    bs = np.arange(m + 1)
    lfb = lf[: m + 1][bs]
    phase_b = np.exp(1j * math.pi * rho * bs)
    total = 0j
    for x, y, z, w in _group_iter(n):
        d1, d2 = y + z, x + y
        # |u_{d1} u*_{d2}| in logs; phase i^(d2-d1)
        cos_pow = 2 * n - d1 - d2
        sin_pow = d1 + d2
        if (sin_pow and lsin == -math.inf) or (cos_pow and lcos == -math.inf):
            continue
        log_uu = cos_pow * lcos + sin_pow * lsin
        ph_uu = 1j ** ((d2 - d1) % 4)
        log_mult = lf[n] - lf[w] - lf[x] - lf[y] - lf[z]

        n_both = math.comb(w + y, k) - math.comb(w, k)
        n_s = cnk - math.comb(w + x, k) - n_both
        n_sp = cnk - math.comb(w + z, k) - n_both
        n_other = cnk * ((1 << k) - 1) - n_s - n_sp

        bmax = min(m, n_s)
        pmax = min(m, n_sp)
        b = bs[: bmax + 1]
        bp = bs[: pmax + 1]
        log_cs = lf[n_s] - lfb[: bmax + 1] - lf[n_s - b]
        log_csp = lf[n_sp] - lfb[: pmax + 1] - lf[n_sp - bp]
        rem = m - b[:, None] - bp[None, :]
        ok = (rem >= 0) & (rem <= n_other)
        remc = np.clip(rem, 0, n_other)
        log_co = lf[n_other] - lf[remc] - lf[n_other - remc]
        log_w = np.where(ok, log_cs[:, None] + log_csp[None, :] + log_co - log_denominator, -np.inf)
        mx = float(np.max(log_w))
        if mx == -math.inf:
            continue
        inner = complex(np.sum(np.exp(log_w - mx)
                               * (phase_b[: bmax + 1, None] * np.conj(phase_b[None, : pmax + 1]))))
        term = math.exp(log_mult + log_uu + mx) * ph_uu * inner
        total += term
        if collect is not None:
            collect.append((x, y, z, w, term.real, term.imag))
    return total


def _mean_psoln_core(n, k, m, rho, tau, prespecified_target, method, collect):
    if k > n:
        raise UsageError("k exceeds n")
    M = clause_pool_size(n, k)
    pool = M - math.comb(n, k) if prespecified_target else M
    if m > pool:
        raise CapacityError(f"m={m} exceeds pool size {pool}")
    n_points = math.comb(n + 3, 3)
    if n_points * (m + 1) ** 2 > MAX_TERM_BUDGET:
        raise CapacityError(
            f"inner-sum budget exceeded: {n_points} groupings x {(m + 1) ** 2} terms")
    denominator = math.comb(pool, m)
    use_exact = method == "exact" or (method == "auto"
                                      and denominator < EXACT_DENOMINATOR_LIMIT
                                      and n_points * (m + 1) ** 2 <= 2 * 10**6)
    if use_exact:
        total = _mean_psoln_exact(n, k, m, rho, tau, denominator, collect)
    else:
        log_den = float(math.lgamma(pool + 1) - math.lgamma(m + 1) - math.lgamma(pool - m + 1))
        total = _mean_psoln_log(n, k, m, rho, tau, log_den, collect)
    if prespecified_target:
        total *= 2.0 ** (-n)
    if abs(total.imag) > IMAG_TOL:
        raise NumericalIntegrityError(f"imaginary residue {total.imag:.3e} exceeds {IMAG_TOL}")
    return min(1.0, max(0.0, total.real))


def exact_mean_psoln(n: int, k: int, m: int, rho: float, tau: float,
                     method: str = "auto", collect=None) -> float:
    """Exact ensemble mean of the one-step success probability.

    ``method`` is "auto", "exact" (big integers) or "log" (log-factorial).
    ``collect``, if a list, receives per-(x,y,z,w) term diagnostics.
    """
    if method not in ("auto", "exact", "log"):
        raise UsageError(f"unknown method {method!r}")
    return _mean_psoln_core(n, k, m, rho, tau, False, method, collect)


def prespecified_solution_probability(n: int, k: int, m: int, rho: float, tau: float,
                                      method: str = "auto") -> float:
    """Mean probability of measuring the stored solution of a prespecified-
    ensemble instance.  Lower bound on that ensemble's mean success
    probability; tight when clauses greatly outnumber variables.
    """
    if method not in ("auto", "exact", "log"):
        raise UsageError(f"unknown method {method!r}")
    return _mean_psoln_core(n, k, m, rho, tau, True, method, None)
