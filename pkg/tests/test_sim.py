import cmath
import math

import numpy as np
import pytest

from qsk import (
    Assignment,
    CapacityError,
    Clause,
    EnsembleSpec,
    PhaseSchedule,
    SatProblem,
    UsageError,
    amplification_cost,
    apply_conflict_phase,
    apply_mixing,
    exact_mean_psoln,
    fast_walsh,
    grover_optimal_steps,
    hamming,
    make_rng,
    mixing_coefficient,
    mixing_coefficient_direct,
    monte_carlo_mean,
    p_solution,
    run,
    run_partial,
    sample_problem,
    uniform_state,
    unstructured_psoln,
)


def dense_walsh(n):
    N = 1 << n
    W = np.empty((N, N), complex)
    for r in range(N):
        for s in range(N):
            W[r, s] = 2.0 ** (-n / 2) * (-1) ** bin(r & s).count("1")
    return W


def dense_mixing_from_direct(n, t_table):
    """Oracle: U entries u_{d(r,s)} from the double-sum coefficient form."""
    u = [mixing_coefficient_direct(n, t_table, d) for d in range(n + 1)]
    N = 1 << n
    return np.array([[u[bin(r ^ s).count("1")] for s in range(N)] for r in range(N)])


def linear_t_table(n, tau):
    return [cmath.exp(1j * math.pi * tau * (h - n / 2)) for h in range(n + 1)]


def test_uniform_state():
    st = uniform_state(1)
    assert np.allclose(st.amplitudes, [2**-0.5, 2**-0.5])
    st10 = uniform_state(10)
    assert st10.norm_error() < 1e-12
    assert np.allclose(st10.probabilities(), 2.0**-10)
    with pytest.raises(CapacityError):
        uniform_state(0)
    with pytest.raises(CapacityError):
        uniform_state(31)


def test_conflict_phase_identity_and_solution_phase():
    p = sample_problem(EnsembleSpec("random", 6, 3, 12, seed=2))
    st = uniform_state(6)
    before = st.amplitudes.copy()
    apply_conflict_phase(st, p, 0.0)
    assert np.allclose(st.amplitudes, before)
    rho = 0.31
    apply_conflict_phase(st, p, rho)
    sol = np.nonzero(p.conflict_table() == 0)[0]
    expected = before[sol] * cmath.exp(-1j * math.pi * rho * p.mean_conflicts)
    assert np.allclose(st.amplitudes[sol], expected)


def test_conflict_phase_elementwise_oracle_rho2():
    p = sample_problem(EnsembleSpec("random", 8, 3, 16, seed=3))
    st = uniform_state(8)
    apply_conflict_phase(st, p, 2.0)
    c = p.conflict_table().astype(float)
    oracle = np.full(256, 2.0**-4, complex) * np.exp(1j * math.pi * 2.0 * (c - p.mean_conflicts))
    assert np.abs(st.amplitudes - oracle).max() < 1e-12
    # integer offsets under rho=2 act as +/-1 signs
    signs = st.amplitudes / np.abs(st.amplitudes) * cmath.exp(1j * math.pi * 2.0 * p.mean_conflicts)
    assert np.allclose(np.abs(signs.real), 1.0, atol=1e-12)


def test_conflict_phase_width_mismatch():
    p = sample_problem(EnsembleSpec("random", 5, 3, 8, seed=1))
    with pytest.raises(UsageError):
        apply_conflict_phase(uniform_state(6), p, 0.1)


def test_fast_walsh_basics_and_dense_oracle():
    st = uniform_state(1)
    st.amplitudes[:] = [1, 0]
    fast_walsh(st)
    assert np.allclose(st.amplitudes, [2**-0.5, 2**-0.5])

    rng = make_rng(8)
    v = rng.normal(size=64) + 1j * rng.normal(size=64)
    v /= np.linalg.norm(v)
    st = uniform_state(6)
    st.amplitudes[:] = v
    fast_walsh(st)
    assert np.abs(st.amplitudes - dense_walsh(6) @ v).max() < 1e-12
    fast_walsh(st)
    assert np.abs(st.amplitudes - v).max() < 1e-12  # involution


@pytest.mark.parametrize("tau", [0.0, 0.17, 0.5, 0.83, 1.0])
def test_mixing_matches_dense_oracle(tau):
    n = 5
    rng = make_rng(int(tau * 100) + 1)
    v = rng.normal(size=32) + 1j * rng.normal(size=32)
    v /= np.linalg.norm(v)
    st = uniform_state(n)
    st.amplitudes[:] = v
    apply_mixing(st, tau)
    dense = dense_mixing_from_direct(n, linear_t_table(n, tau))
    assert np.abs(st.amplitudes - dense @ v).max() < 1e-12


def test_mixing_tau_zero_identity_tau_half_value():
    st = uniform_state(4)
    before = st.amplitudes.copy()
    apply_mixing(st, 0.0)
    assert np.abs(st.amplitudes - before).max() < 1e-12
    assert mixing_coefficient(4, 0.0, 0) == 1.0
    assert mixing_coefficient(4, 0.0, 2) == 0.0
    for d in range(5):
        want = 2.0 ** (-4 / 2) * (-1j) ** d
        assert abs(mixing_coefficient(4, 0.5, d) - want) < 1e-14
    assert abs(mixing_coefficient(2, 0.5, 0) - 0.5) < 1e-15


def test_mixing_coefficient_closed_vs_direct():
    for n in range(1, 9):
        for tau in np.arange(0.1, 0.95, 0.1):
            t = linear_t_table(n, tau)
            for d in range(n + 1):
                closed = mixing_coefficient(n, tau, d)
                direct = mixing_coefficient_direct(n, t, d)
                assert abs(closed - direct) < 1e-12


def test_mixing_unitarity_row_norm():
    for n, tau in [(6, 0.3), (8, 0.77)]:
        total = sum(math.comb(n, d) * abs(mixing_coefficient(n, tau, d)) ** 2 for d in range(n + 1))
        assert abs(total - 1.0) < 1e-12


def test_mixing_direct_arbitrary_phase_table():
    # the double-sum form holds for any unit-modulus t_h, not just linear
    n = 4
    rng = make_rng(9)
    t = [cmath.exp(2j * math.pi * rng.uniform()) for _ in range(n + 1)]
    U = dense_mixing_from_direct(n, t)
    # unitary: U U^dagger = I
    assert np.abs(U @ U.conj().T - np.eye(1 << n)).max() < 1e-12
    # and equals W T W built densely
    W = dense_walsh(n)
    T = np.diag([t[bin(r).count('1')] for r in range(1 << n)])
    assert np.abs(U - W @ T @ W).max() < 1e-12


def test_run_trivial_and_one_sat():
    p0 = SatProblem(4, 3, ())
    st = run(p0, PhaseSchedule.single(0.7, 0.0))
    assert np.allclose(st.amplitudes, 2.0**-2)
    assert p_solution(st, p0) == pytest.approx(1.0)

    # maximally constrained 1-SAT with quarter-turn phases solves exactly
    p1 = SatProblem(2, 1, (Clause((0,), (True,)), Clause((1,), (True,))))
    st = run(p1, PhaseSchedule.single(0.5, 0.5))
    assert p_solution(st, p1) == pytest.approx(1.0, abs=1e-12)
    assert abs(abs(st.amplitudes[0]) - 1.0) < 1e-12


def test_run_two_steps_equals_composition():
    p = sample_problem(EnsembleSpec("random", 7, 3, 14, seed=6))
    two = run(p, PhaseSchedule.explicit([(0.3, 0.25), (0.2, 0.4)]))
    st = uniform_state(7)
    apply_conflict_phase(st, p, 0.3)
    apply_mixing(st, 0.25)
    apply_conflict_phase(st, p, 0.2)
    apply_mixing(st, 0.4)
    assert np.abs(two.amplitudes - st.amplitudes).max() < 1e-12


def test_run_matches_double_loop_oracle():
    # phi_r = 2^{-n/2} sum_s u_{d(r,s)} p_{c(s)} for a single step
    n = 6
    p = sample_problem(EnsembleSpec("random", n, 3, 12, seed=13))
    rho, tau = 0.27, 0.33
    st = run(p, PhaseSchedule.single(rho, tau))
    c = p.conflict_table().astype(float)
    pc = np.exp(1j * math.pi * rho * (c - p.mean_conflicts))
    u = [mixing_coefficient(n, tau, d) for d in range(n + 1)]
    N = 1 << n
    phi = np.zeros(N, complex)
    for r in range(N):
        acc = 0j
        for s in range(N):
            acc += u[bin(r ^ s).count("1")] * pc[s]
        phi[r] = acc * 2.0 ** (-n / 2)
    assert np.abs(st.amplitudes - phi).max() < 1e-10


def test_conjugation_symmetry():
    p = sample_problem(EnsembleSpec("random", 6, 3, 10, seed=21))
    plus = uniform_state(6)
    apply_conflict_phase(plus, p, 0.4)
    apply_mixing(plus, 0.3)
    minus = uniform_state(6)
    apply_conflict_phase(minus, p, -0.4)
    apply_mixing(minus, -0.3)
    assert np.abs(minus.amplitudes - plus.amplitudes.conj()).max() < 1e-12


def test_schedule_validation():
    with pytest.raises(UsageError):
        PhaseSchedule([])
    with pytest.raises(UsageError):
        PhaseSchedule.single(1.5, 0.5)
    with pytest.raises(UsageError):
        PhaseSchedule.single(0.5, -0.1)
    lin = PhaseSchedule.linear(0.1, 0.05, 0.2, 0.05, 3)
    assert len(lin.steps) == 3
    for h, (rho_h, tau_h) in enumerate(lin.steps, start=1):
        assert rho_h == pytest.approx(0.1 + 0.05 * h)
        assert tau_h == pytest.approx(0.2 + 0.05 * h)


def test_p_solution_uniform_and_insoluble():
    p = sample_problem(EnsembleSpec("random", 8, 3, 20, seed=30))
    st = uniform_state(8)
    assert p_solution(st, p) == pytest.approx(p.count_solutions() / 256)
    insol = SatProblem(2, 1, (Clause((0,), (False,)), Clause((0,), (True,))))
    assert insol.count_solutions() == 0
    st2 = run(insol, PhaseSchedule.single(0.3, 0.3))
    assert p_solution(st2, insol) == 0.0


def test_unstructured_search_model():
    assert unstructured_psoln(16, 16, 0) == pytest.approx(1.0)
    assert unstructured_psoln(0, 16, 5) == 0.0
    for frac in [0.001, 0.003, 0.01, 0.05, 0.1, 0.25]:
        N = 1 << 20
        S = max(1, int(frac * N))
        j = grover_optimal_steps(S, N)
        assert unstructured_psoln(S, N, j) >= 1 - S / N - 1e-12
    assert amplification_cost(0.25, 1) == pytest.approx(math.pi / 2)
    with pytest.raises(UsageError):
        amplification_cost(0.0)


def test_norm_preserved_across_random_operations():
    rng = make_rng(55)
    p = sample_problem(EnsembleSpec("random", 9, 3, 18, seed=55))
    st = uniform_state(9)
    for _ in range(200):
        if rng.uniform() < 0.5:
            apply_conflict_phase(st, p, float(rng.uniform(-1, 1)))
        else:
            apply_mixing(st, float(rng.uniform(0, 1)))
        assert st.norm_error() < 1e-9


def test_run_partial_trivial_counts():
    # n=1, no clauses: uniform over 4 sets, two of them are solutions
    p = SatProblem(1, 1, ())
    state, psoln = run_partial(p, 0.0, 0.0, 0.0)
    assert psoln == pytest.approx(0.5)
    assert state.norm_error() < 1e-12


def test_run_partial_solution_sets_counting():
    # with all phases off the output stays uniform: psoln = S / 4^n
    p = sample_problem(EnsembleSpec("random", 4, 3, 6, seed=12))
    S = p.count_solutions()
    _, psoln = run_partial(p, 0.0, 0.0, 0.0)
    assert psoln == pytest.approx(S / 4**4, abs=1e-12)


def test_run_partial_norm_and_duplicate_hook():
    p = sample_problem(EnsembleSpec("random", 4, 3, 8, seed=44))
    state, psoln = run_partial(p, 0.31, 0.27, 0.15)
    assert state.norm_error() < 1e-9
    assert 0.0 <= psoln <= 1.0
    # duplicate-count hook at zero phase reproduces the per-bit mixing path
    state2, psoln2 = run_partial(p, 0.31, 0.27, 0.15, duplicate_phase=0.0)
    assert np.abs(state.amplitudes - state2.amplitudes).max() < 1e-9
    assert psoln2 == pytest.approx(psoln, abs=1e-12)
    # a nonzero duplicate phase changes the state but stays unitary
    state3, _ = run_partial(p, 0.31, 0.27, 0.15, duplicate_phase=0.2)
    assert state3.norm_error() < 1e-9
    assert np.abs(state3.amplitudes - state.amplitudes).max() > 1e-6


def test_run_partial_capacity_guard():
    p = SatProblem(14, 3, ())
    with pytest.raises(CapacityError):
        run_partial(p, 0.1, 0.1, 0.1)


def test_partial_conflict_counts_only_unique_assignments():
    # crafted set states: conflicts counted only when all clause variables
    # are uniquely assigned with falsifying values
    p = SatProblem(2, 2, (Clause((0, 1), (False, False)),))  # falsified by V1=F,V2=F
    from qsk.sim import _partial_tables

    q, c = _partial_tables(p)
    # set {V1=F, V2=F}: bits 1 (false pair of V1) and 3 (false pair of V2)
    falsifying = (1 << 1) | (1 << 3)
    assert q[falsifying] == 2 and c[falsifying] == 1
    # set {V1=F}: V2 unassigned, no conflict yet
    partial = 1 << 1
    assert q[partial] == 1 and c[partial] == 0
    # set {V1=F, V1=T, V2=F}: V1 doubly assigned, not unique, no conflict
    dup = (1 << 0) | (1 << 1) | (1 << 3)
    assert q[dup] == 1 and c[dup] == 0


def test_precision_requirement_quadratic_near_optimum():
    # near a per-instance optimum the success probability is flat to O(eps^2)
    from scipy.optimize import minimize_scalar

    p = sample_problem(EnsembleSpec("random", 8, 3, 16, seed=17))
    tau = 0.260

    def psoln_at(rho):
        return p_solution(run(p, PhaseSchedule.single(rho, tau)), p)

    res = minimize_scalar(lambda r: -psoln_at(r), bounds=(0.1, 0.6), method="bounded",
                          options={"xatol": 1e-10})
    rho_star = res.x
    base = psoln_at(rho_star)
    d1 = abs(psoln_at(rho_star + 0.02) - base)
    d2 = abs(psoln_at(rho_star + 0.04) - base)
    # quadratic: doubling eps quadruples the drop (allow generous slack)
    assert d2 / max(d1, 1e-15) == pytest.approx(4.0, rel=0.35)
    assert d1 < 0.05  # flat near the optimum


def test_monte_carlo_trivial_and_exact_consistency():
    spec0 = EnsembleSpec("random", 5, 3, 0, seed=3)
    r0 = monte_carlo_mean(spec0, PhaseSchedule.single(0.3, 0.2), 10)
    assert r0.mean == pytest.approx(1.0)
    assert r0.std_error == pytest.approx(0.0)
    assert r0.soluble_fraction == 1.0

    spec = EnsembleSpec("random", 6, 3, 8, seed=91)
    rho, tau = 0.33, 0.28
    res = monte_carlo_mean(spec, PhaseSchedule.single(rho, tau), 400)
    exact = exact_mean_psoln(6, 3, 8, rho, tau)
    assert abs(res.mean - exact) < 3 * res.std_error
