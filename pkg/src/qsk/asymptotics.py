"""Steepest-descent asymptotics of the mean success probability.

For clause density mu = m/n the mean success probability decays as
exp(-n*A).  The rate comes from a three-variable saddle of the scaled
exponent

    F(x, y, z) = H + U + mu * I,

where (x, y, z) are complex-scaled sizes of three of the four agreement
groups (w = 1 - x - y - z), H is the multinomial entropy, U collects the
mixing-coefficient factors through beta_c = log cos(pi*tau/2) and
beta = log tan(pi*tau/2), and I = log of the phase-weighted scaled clause
counts.  The decay rate is A = -Re F at the stationary point, and the
constant in front of exp(-n*A) is

    prefactor = sqrt(-1 / (w x y z det(Hess F)))

with the Hessian taken with respect to (x, y, z) at the saddle.

Saddles of interest satisfy z = conj(x) with y (and w) real, which makes
F real; the Newton solver works in the reduced real coordinates
(Re x, Im x, y).  Gradients and the Newton Jacobian are analytic; the
reported Hessian uses Richardson-refined central differences of the
analytic gradient.

The solver is seeded from the known limiting saddles: the zero-density
point (x = i*sin(th)cos(th), y = sin^2(th), th = pi*tau/2) and the
symmetric high-density point (1/4, 1/4, 1/4).  Roots are accepted only
when all group fractions have real part in (0, 1) and Im F vanishes;
with several acceptable roots the smallest rate wins.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq, minimize

from .errors import NumericalIntegrityError, UsageError

PI = math.pi

RESIDUAL_TOL = 1e-10
IMAG_TOL = 1e-9
NEWTON_MAX_ITER = 200
HESSIAN_STEP = 1e-5
TAU_EDGE = 1e-4

# local-minimum caveat: optimization restarts cannot certify a global optimum


@dataclass(frozen=True)
class ScaledPoint:
    """Scaled group fractions at a stationary point; w is derived."""

    x: complex
    y: complex
    z: complex

    @property
    def w(self) -> complex:
        return 1 - self.x - self.y - self.z

    def reduced(self) -> tuple[float, float, float]:
        return (self.x.real, self.x.imag, self.y.real)

    def is_symmetric(self, tol: float = 1e-10) -> bool:
        return (abs(self.z - self.x.conjugate()) < tol
                and abs(self.y.imag) < tol and abs(self.w.imag) < tol)


@dataclass
class DecayResult:
    """Decay rate, saddle data, and convergence diagnostics."""

    k: int
    mu: float
    rho: float
    tau: float
    ensemble: str
    A: float
    prefactor: float
    det_hessian: complex
    point: ScaledPoint
    residual: float
    converged: bool


def _check_tau(tau: float) -> None:
    if not (0.0 < tau < 1.0):
        raise UsageError(f"tau={tau} outside (0, 1): log tan(pi*tau/2) is singular")


def _edges(x: complex, y: complex, z: complex):
    """w and the pairwise sums entering the scaled clause counts."""
    w = 1 - x - y - z
    return w, 1 - x - z, 1 - y - z, 1 - x - y  # w, w+y, w+x, w+z


def scaled_counts(k: int, point: ScaledPoint) -> tuple[complex, complex, complex, complex]:
    """Large-n limits of the clause-group counts divided by the pool size."""
    w, e0, e1, e2 = _edges(point.x, point.y, point.z)
    twok = 2.0**k
    n_both = (e0**k - w**k) / twok
    n_s = (1 - e1**k) / twok - n_both
    n_sp = (1 - e2**k) / twok - n_both
    n_other = 1 - 1 / twok - n_s - n_sp
    return n_both, n_s, n_sp, n_other


def exponent(k: int, mu: float, rho: float, tau: float, point: ScaledPoint) -> complex:
    """F = H + U + mu*I on the principal branch."""
    _check_tau(tau)
    x, y, z = point.x, point.y, point.z
    w, e0, e1, e2 = _edges(x, y, z)
    H = -(w * cmath.log(w) + x * cmath.log(x) + y * cmath.log(y) + z * cmath.log(z))
    th = PI * tau / 2
    beta_c = math.log(math.cos(th))
    beta = math.log(math.tan(th))
    U = 2 * beta_c + beta * (x + 2 * y + z) + 1j * PI * (x - z) / 2
    twok = 2.0**k
    n_both = (e0**k - w**k) / twok
    n_s = (1 - e1**k) / twok - n_both
    n_sp = (1 - e2**k) / twok - n_both
    n_other = 1 - 1 / twok - n_s - n_sp
    D = cmath.exp(1j * PI * rho) * n_s + cmath.exp(-1j * PI * rho) * n_sp + n_other
    return H + U + mu * cmath.log(D)


def gradient(k: int, mu: float, rho: float, tau: float, point: ScaledPoint):
    g, _ = _grad_hess(k, mu, rho, tau, point.x, point.y, point.z)
    return g


def _grad_hess(k, mu, rho, tau, x, y, z):
    """Analytic gradient and Hessian of F with respect to (x, y, z)."""
    w, e0, e1, e2 = _edges(x, y, z)
    twok = 2.0**k
    lw = cmath.log(w)
    th = PI * tau / 2
    beta = math.log(math.tan(th))

    gH = (lw - cmath.log(x), lw - cmath.log(y), lw - cmath.log(z))
    gU = (beta + 1j * PI / 2, 2 * beta, beta - 1j * PI / 2)

    wk1, e0k1, e1k1, e2k1 = w ** (k - 1), e0 ** (k - 1), e1 ** (k - 1), e2 ** (k - 1)
    kf = k / twok
    # 2^k * N_s = 1 - e1^k - e0^k + w^k ; 2^k * N_s' = 1 - e2^k - e0^k + w^k
    dns = (kf * (e0k1 - wk1), kf * (e1k1 - wk1), kf * (e1k1 + e0k1 - wk1))
    dnsp = (kf * (e2k1 + e0k1 - wk1), kf * (e2k1 - wk1), kf * (e0k1 - wk1))

    P = cmath.exp(1j * PI * rho) - 1
    Q = cmath.exp(-1j * PI * rho) - 1
    n_both = (e0**k - w**k) / twok
    n_s = (1 - e1**k) / twok - n_both
    n_sp = (1 - e2**k) / twok - n_both
    D = (1 - 1 / twok) + P * n_s + Q * n_sp
    dD = tuple(P * dns[i] + Q * dnsp[i] for i in range(3))
    grad = tuple(gH[i] + gU[i] + mu * dD[i] / D for i in range(3))

    iw = 1.0 / w
    hH = [[-iw, -iw, -iw], [-iw, -iw, -iw], [-iw, -iw, -iw]]
    hH[0][0] -= 1.0 / x
    hH[1][1] -= 1.0 / y
    hH[2][2] -= 1.0 / z

    kk = k * (k - 1) / twok
    wk2, e0k2, e1k2, e2k2 = w ** (k - 2), e0 ** (k - 2), e1 ** (k - 2), e2 ** (k - 2)
    # direction patterns of the edge terms: e1 varies with (y,z), e0 with
    # (x,z), e2 with (x,y), w with all three
    u1 = (0, 1, 1)
    u0 = (1, 0, 1)
    u2 = (1, 1, 0)
    hess = [[0j] * 3 for _ in range(3)]
    for i in range(3):
        for j in range(3):
            hns = kk * (-e1k2 * u1[i] * u1[j] - e0k2 * u0[i] * u0[j] + wk2)
            hnsp = kk * (-e2k2 * u2[i] * u2[j] - e0k2 * u0[i] * u0[j] + wk2)
            hD = P * hns + Q * hnsp
            hess[i][j] = hH[i][j] + mu * (hD / D - dD[i] * dD[j] / (D * D))
    return grad, hess


def _reduced_residual(k, mu, rho, tau, a, b, c):
    x = complex(a, b)
    g, h = _grad_hess(k, mu, rho, tau, x, complex(c), x.conjugate())
    return (g[0].real, g[0].imag, g[1].real), h


def _newton_reduced(k, mu, rho, tau, v0, tol=RESIDUAL_TOL, itmax=NEWTON_MAX_ITER,
                    trace=None):
    """Damped Newton on (Re x, Im x, y); z = conj(x) keeps F real."""
    a, b, c = v0
    res_norm = math.inf
    for _ in range(itmax):
        try:
            r, hess = _reduced_residual(k, mu, rho, tau, a, b, c)
        except (ValueError, ZeroDivisionError, OverflowError):
            return (a, b, c), math.inf, False
        res_norm = max(abs(r[0]), abs(r[1]), abs(r[2]))
        if trace is not None:
            trace.append(((a, b, c), res_norm))
        if not math.isfinite(res_norm):
            return (a, b, c), math.inf, False
        if res_norm < tol:
            return (a, b, c), res_norm, True
        # Jacobian columns: displacement directions of (x, y, z) per reduced coord
        J = np.empty((3, 3))
        for col, d in enumerate(((1, 0, 1), (1j, 0, -1j), (0, 1, 0))):
            gi = [hess[i][0] * d[0] + hess[i][1] * d[1] + hess[i][2] * d[2] for i in range(3)]
            J[0, col] = gi[0].real
            J[1, col] = gi[0].imag
            J[2, col] = gi[1].real
        try:
            step = np.linalg.solve(J, -np.array(r))
        except np.linalg.LinAlgError:
            return (a, b, c), res_norm, False
        lam = 1.0
        base = math.sqrt(r[0] ** 2 + r[1] ** 2 + r[2] ** 2)
        while lam > 1e-8:
            an, bn, cn = a + lam * step[0], b + lam * step[1], c + lam * step[2]
            try:
                rn, _ = _reduced_residual(k, mu, rho, tau, an, bn, cn)
                if math.sqrt(rn[0] ** 2 + rn[1] ** 2 + rn[2] ** 2) < base:
                    break
            except (ValueError, ZeroDivisionError, OverflowError):
                pass
            lam /= 2
        a, b, c = a + lam * step[0], b + lam * step[1], c + lam * step[2]
    return (a, b, c), res_norm, False


def zero_density_point(tau: float) -> ScaledPoint:
    """Closed-form saddle as the clause density vanishes (depends on tau only)."""
    _check_tau(tau)
    th = PI * tau / 2
    x = 1j * math.sin(th) * math.cos(th)
    y = math.sin(th) ** 2
    return ScaledPoint(x, complex(y), x.conjugate())


def _seed_battery(tau: float, guess):
    seeds = []
    if guess is not None:
        if isinstance(guess, ScaledPoint):
            seeds.append(guess.reduced())
        else:
            seeds.append(tuple(guess))
    seeds.append(zero_density_point(tau).reduced())
    seeds.append((0.25, 0.05, 0.25))
    seeds.append((0.25, 0.01, 0.25))
    return seeds


def _point_admissible(a, b, c) -> bool:
    # Re x may touch 0 exactly (it does at rho = 0); x itself must stay off
    # the log singularity
    w = 1 - 2 * a - c
    return -1e-9 < a < 1 and 0 < c < 1 and 0 < w < 1 and abs(complex(a, b)) > 1e-12


def _flip_guess(guess):
    if guess is None:
        return None
    if isinstance(guess, ScaledPoint):
        return ScaledPoint(guess.x.conjugate(), guess.y.conjugate(), guess.z.conjugate())
    a, b, c = guess
    return (a, -b, c)


def find_stationary_point(k: int, mu: float, rho: float, tau: float,
                          guess=None) -> ScaledPoint:
    """Solve grad F = 0 on the conjugate-symmetric manifold.

    Tries the supplied guess (continuation) and the limiting-saddle seeds;
    among admissible converged roots the one with the smallest rate is
    returned.  Raises with the Newton trajectory when nothing converges.

    Negating both phase slopes conjugates every amplitude, so tau < 0 is
    served by reflecting to (-rho, -tau) and conjugating the saddle.
    """
    if -1.0 < tau < 0.0:
        pt = find_stationary_point(k, mu, -rho, -tau, _flip_guess(guess))
        return ScaledPoint(pt.x.conjugate(), pt.y.conjugate(), pt.z.conjugate())
    _check_tau(tau)
    best = None
    traces = []
    trust_guess = guess is not None
    for seed in _seed_battery(tau, guess):
        trace: list = []
        (a, b, c), res, ok = _newton_reduced(k, mu, rho, tau, seed, trace=trace)
        traces.append(trace)
        if not ok or not _point_admissible(a, b, c):
            trust_guess = False
            continue
        x = complex(a, b)
        pt = ScaledPoint(x, complex(c), x.conjugate())
        try:
            F = exponent(k, mu, rho, tau, pt)
        except (ValueError, ZeroDivisionError, OverflowError):
            trust_guess = False
            continue
        if abs(F.imag) > IMAG_TOL:
            trust_guess = False
            continue
        A = -F.real
        if best is None or A < best[0]:
            best = (A, pt, res)
        if trust_guess:
            # continuation seed converged; skip the battery for speed
            return best[1]
    if best is None:
        tails = ["; ".join(f"({p[0]:.3f},{p[1]:.3f},{p[2]:.3f})|r|={r:.2e}" for p, r in t[-3:])
                 for t in traces]
        raise NumericalIntegrityError(
            f"no admissible stationary point at k={k}, mu={mu}, rho={rho}, tau={tau}; "
            f"trajectories: {tails}")
    return best[1]


def _hessian_fd(k, mu, rho, tau, point: ScaledPoint, step: float = HESSIAN_STEP) -> np.ndarray:
    """Central differences of the analytic gradient, one Richardson pass."""
    base = np.array([point.x, point.y, point.z], dtype=complex)

    def at(h):
        H = np.empty((3, 3), dtype=complex)
        for j in range(3):
            vp = base.copy()
            vp[j] += h
            vm = base.copy()
            vm[j] -= h
            gp, _ = _grad_hess(k, mu, rho, tau, *vp)
            gm, _ = _grad_hess(k, mu, rho, tau, *vm)
            H[:, j] = (np.array(gp) - np.array(gm)) / (2 * h)
        return H

    h1 = at(step)
    h2 = at(step / 2)
    return (4 * h2 - h1) / 3


def _prespecified_offset(k: int, mu: float) -> float:
    """Rate shift for the find-the-stored-solution bound: same saddle, the
    exponent gains -log 2 and -mu*log(1 - 2^-k)."""
    return math.log(2) + mu * math.log(1 - 2.0 ** (-k))


def decay_rate(k: int, mu: float, rho: float, tau: float, guess=None,
               ensemble: str = "random", with_hessian: bool = True) -> DecayResult:
    """Decay rate and saddle prefactor at fixed phase parameters.

    ensemble "random" rates the mean success probability over random
    ensembles; "prespecified-bound" rates the probability of finding a
    prespecified solution (sharing the same stationary point).
    """
    if ensemble not in ("random", "prespecified-bound"):
        raise UsageError(f"unknown ensemble {ensemble!r}")
    if -1.0 < tau < 0.0:
        inner = decay_rate(k, mu, -rho, -tau, guess=_flip_guess(guess),
                           ensemble=ensemble, with_hessian=with_hessian)
        point = ScaledPoint(inner.point.x.conjugate(), inner.point.y.conjugate(),
                            inner.point.z.conjugate())
        return DecayResult(k=k, mu=mu, rho=rho, tau=tau, ensemble=ensemble,
                           A=inner.A, prefactor=inner.prefactor,
                           det_hessian=inner.det_hessian.conjugate(), point=point,
                           residual=inner.residual, converged=inner.converged)
    point = find_stationary_point(k, mu, rho, tau, guess)
    F = exponent(k, mu, rho, tau, point)
    if abs(F.imag) > IMAG_TOL:
        raise NumericalIntegrityError(f"Im F = {F.imag:.3e} at accepted saddle")
    (r0, r1, r2), _ = _reduced_residual(k, mu, rho, tau, *point.reduced())
    residual = max(abs(r0), abs(r1), abs(r2))
    A = -F.real
    if ensemble == "prespecified-bound":
        A += _prespecified_offset(k, mu)
    prefactor = math.nan
    det = complex(math.nan)
    if with_hessian:
        hess = _hessian_fd(k, mu, rho, tau, point)
        det = complex(np.linalg.det(hess))
        val = -1.0 / (point.w * point.x * point.y * point.z * det)
        pref = cmath.sqrt(val)
        if abs(pref.imag) > 1e-6 * max(1.0, abs(pref.real)) or pref.real <= 0:
            raise NumericalIntegrityError(
                f"prefactor {pref} not real positive (det={det})")
        prefactor = pref.real
    return DecayResult(k=k, mu=mu, rho=rho, tau=tau, ensemble=ensemble,
                       A=A, prefactor=prefactor, det_hessian=det, point=point,
                       residual=residual, converged=True)


def _rate_only(k, mu, rho, tau, guess):
    """Fast objective for optimization: rate and saddle, no Hessian."""
    try:
        point = find_stationary_point(k, mu, rho, tau, guess)
    except (NumericalIntegrityError, UsageError):
        return None
    F = exponent(k, mu, rho, tau, point)
    return -F.real, point


@dataclass
class OptimizeResult:
    rho: float
    tau: float
    result: DecayResult
    grid_best: tuple[float, float] = field(default=(math.nan, math.nan))
    note: str = "restart optimization; reported optimum could be a local minimum"


def optimize_parameters(k: int, mu: float, seed=None, grid: int = 21,
                        ensemble: str = "random") -> OptimizeResult:
    """Minimize the decay rate over rho in [-1,1], tau in (0,1).

    Nelder-Mead restarted from the best point of a coarse grid and, when
    given, from a continuation seed (rho, tau, point); a seeded call skips
    the grid, which is how density sweeps stay fast.  The prespecified
    bound shares its saddle with the random rate, so the optimizer is
    common and the constant offset is applied afterwards.
    """
    if mu <= 0:
        raise UsageError("mu must be positive")
    best = None
    if seed is None:
        taus = np.linspace(TAU_EDGE, 1 - TAU_EDGE, grid)
        rhos = np.linspace(-1.0, 1.0, grid)
        carry = None
        for tau in taus:
            for rho in rhos:
                r = _rate_only(k, mu, float(rho), float(tau), carry)
                if r is None:
                    continue
                carry = r[1]
                if best is None or r[0] < best[0]:
                    best = (r[0], float(rho), float(tau), r[1])
    starts = []
    if seed is not None:
        starts.append(seed)
    if best is not None:
        starts.append((best[1], best[2], best[3]))
    if not starts:
        raise NumericalIntegrityError(f"optimization grid produced no valid rate at k={k}, mu={mu}")

    chosen = None
    for rho0, tau0, pt0 in starts:
        state = {"pt": pt0}

        def objective(p):
            rho, tau = float(p[0]), float(p[1])
            if not (-1.0 <= rho <= 1.0 and TAU_EDGE <= tau <= 1 - TAU_EDGE):
                return 10.0
            r = _rate_only(k, mu, rho, tau, state["pt"])
            if r is None:
                return 10.0
            state["pt"] = r[1]
            return r[0]

        res = minimize(objective, [rho0, tau0], method="Nelder-Mead",
                       options=dict(xatol=1e-8, fatol=1e-12, maxiter=800))
        if chosen is None or res.fun < chosen[0]:
            chosen = (res.fun, float(res.x[0]), float(res.x[1]), state["pt"])
    _, rho_o, tau_o, pt = chosen
    final = decay_rate(k, mu, rho_o, tau_o, guess=pt, ensemble=ensemble)
    gb = (best[1], best[2]) if best is not None else (math.nan, math.nan)
    return OptimizeResult(rho=rho_o, tau=tau_o, result=final, grid_best=gb)


# ---------------------------------------------------------------------------
# limiting closed forms


@dataclass(frozen=True)
class WeakLimit:
    tau: float
    rho: float
    alpha: float  # rate ~ alpha * mu^2 as mu -> 0


@dataclass(frozen=True)
class StrongLimit:
    tau: float
    rho: float
    rate: float
    prefactor: float


def weak_limit_parameters(k: int) -> tuple[float, float]:
    """Roots of 2 cos^k(pi tau/2) cos(k pi tau/2) = 1 and rho + k tau integer."""
    if k < 2:
        raise UsageError("weak-limit equations require k >= 2")

    def f(t):
        return 2 * math.cos(PI * t / 2) ** k * math.cos(k * PI * t / 2) - 1

    lo = 1e-12
    hi = None
    steps = 4000
    prev_t, prev_v = lo, f(lo)
    for i in range(1, steps + 1):
        t = i / steps * (1 - 1e-12)
        v = f(t)
        if prev_v > 0 >= v:
            lo, hi = prev_t, t
            break
        prev_t, prev_v = t, v
    if hi is None:
        raise UsageError(f"no root of the tau equation in (0,1) for k={k}")
    tau = float(brentq(f, lo, hi, xtol=1e-15, rtol=8.9e-16))
    rho = (-k * tau) % 1.0
    return tau, rho


def weak_limit(k: int) -> WeakLimit:
    """Optimal zero-density parameters and the quadratic rate coefficient.

    alpha is Richardson-extrapolated from A(mu)/mu^2 at mu = 0.2, 0.1, 0.05
    with the saddle continued from the zero-density closed form.
    """
    tau, rho = weak_limit_parameters(k)
    guess = zero_density_point(tau)
    vals = []
    for mu in (0.2, 0.1, 0.05):
        res = decay_rate(k, mu, rho, tau, guess=guess, with_hessian=False)
        guess = res.point
        vals.append(res.A / mu**2)
    r1 = 2 * vals[1] - vals[0]
    r2 = 2 * vals[2] - vals[1]
    return WeakLimit(tau=tau, rho=rho, alpha=(4 * r2 - r1) / 3)


def strong_limit(k: int, mu: float) -> StrongLimit:
    """Closed-form optimum for clause-rich problems (prespecified bound):
    tau = 1/2, rho = 2^(k-2) (2^k - 1)/(k mu), rate (2^k-1)^3 pi^2/(16 k^2 mu).
    """
    if mu < 1:
        raise UsageError("strong-limit expansion assumes mu >= 1")
    rho = 2.0 ** (k - 2) * (2.0**k - 1) / (k * mu)
    rate = (2.0**k - 1) ** 3 * PI**2 / (16 * k**2 * mu)
    pref = 4.0 / math.sqrt(16 + (k - 1) ** 2 * PI**2)
    return StrongLimit(tau=0.5, rho=rho, rate=rate, prefactor=pref)


def prespecified_bound_rate(k: int, mu: float, rho: float, tau: float, guess=None) -> DecayResult:
    return decay_rate(k, mu, rho, tau, guess=guess, ensemble="prespecified-bound")


@dataclass(frozen=True)
class ReferenceRates:
    """Comparison rates at density mu.

    random_selection: decay of the expected solution fraction.
    amplified_random_selection: half of it; the effective rate of
    unstructured search run to its optimal step count.
    markov_bound: lower bound on the soluble-fraction decay, nontrivial
    (positive) only at high density.
    """

    random_selection: float
    amplified_random_selection: float
    markov_bound: float


def reference_rates(k: int, mu: float) -> ReferenceRates:
    if mu < 0:
        raise UsageError("mu must be nonnegative")
    rs = -mu * math.log(1 - 2.0 ** (-k))
    return ReferenceRates(
        random_selection=rs,
        amplified_random_selection=rs / 2,
        markov_bound=-math.log(2) + rs,
    )
