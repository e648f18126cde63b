import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from metd.errors import BootstrapError, BudgetError, DimensionError, DivergenceError
from metd.matcore import commutator, expm
from metd.oracles import gauss_integral
from metd.problems import care_problem, fit_slope, lyapunov_problem
from metd.stepper import (MAX_STEPS, MatrixOdeProblem, StepState, build_table, initial_state,
                          integrate, integrate_rk4, reference_solution, step_count, step_metd1,
                          step_metd2, step_metd2rk, vectorized_etd1_step)

from conftest import one_step_defect, poly_in, random_stable


def const(N):
    return lambda Q, t: N


def zero_problem(L, R, Q0):
    return MatrixOdeProblem(L, R, lambda Q, t: np.zeros_like(Q0), Q0, commuting=False)


# --- problem and state -----------------------------------------------------------------

def test_problem_shape_checks():
    with pytest.raises(DimensionError):
        MatrixOdeProblem(np.eye(2), np.eye(3), const(np.zeros((2, 2))), np.zeros((2, 2)))
    with pytest.raises(DimensionError):
        MatrixOdeProblem(np.eye(2), np.eye(2), const(np.zeros((3, 2))), np.zeros((2, 2)))


def test_commuting_flag_is_checked():
    L = np.array([[0.0, 1.0], [0.0, 0.0]])
    with pytest.raises(ValueError, match="commuting"):
        MatrixOdeProblem(L, L.T, const(np.zeros((2, 2))), np.zeros((2, 2)))
    MatrixOdeProblem(L, L.T, const(np.zeros((2, 2))), np.zeros((2, 2)), commuting=False)


def test_step_state_history_invariant():
    with pytest.raises(ValueError):
        StepState(0.0, np.eye(2), prev_N=np.eye(2), step_index=0)
    with pytest.raises(ValueError):
        StepState(0.0, np.eye(2), step_index=3)


def test_nonlinearity_wrong_shape_at_step():
    calls = []

    def bad(Q, t):
        calls.append(t)
        return np.zeros((2, 2)) if len(calls) == 1 else np.zeros((2, 3))

    p = MatrixOdeProblem(-np.eye(2), -np.eye(2), bad, np.zeros((2, 2)))
    with pytest.raises(DimensionError):
        step_metd1(initial_state(p), build_table(p, 0.1), p)


# --- table ---------------------------------------------------------------------------------

def test_scalar_s1():
    p = MatrixOdeProblem(np.array([[-1.0]]), np.array([[-1.0]]), const(np.ones((1, 1))), np.zeros((1, 1)))
    tab = build_table(p, 1.0, np.array([[-2.0]]))
    assert tab.S1[0, 0] == pytest.approx((1 - math.exp(-2)) / 2, rel=1e-14)


def test_commutator_coefficients_at_zero_L():
    dt = 0.3
    p = MatrixOdeProblem(np.zeros((2, 2)), np.zeros((2, 2)), const(np.zeros((2, 2))), np.zeros((2, 2)))
    tab = build_table(p, dt)
    np.testing.assert_allclose(tab.CM1, dt * dt / 2 * np.eye(2), atol=1e-16)
    np.testing.assert_allclose(tab.CM2, dt * dt / 6 * np.eye(2), atol=1e-16)


def test_commutator_coefficients_match_quadrature(rng):
    L = random_stable(rng, 3)
    dt = 0.37
    p = MatrixOdeProblem(L, L.T, const(np.zeros((3, 3))), np.zeros((3, 3)), commuting=False)
    tab = build_table(p, dt, L + L.T)
    I_n = gauss_integral(lambda tau: (dt - tau) * expm((dt - tau) * L), 0.0, dt)
    C_n = gauss_integral(lambda tau: tau * (dt - tau) * expm((dt - tau) * L), 0.0, dt) / dt
    np.testing.assert_allclose(tab.CM1, I_n, atol=1e-10)
    np.testing.assert_allclose(tab.CM2, C_n, atol=1e-10)


def test_table_is_read_only():
    p, _ = lyapunov_problem()
    tab = build_table(p, 0.1)
    with pytest.raises(ValueError):
        tab.PL[0, 0] = 1.0


def test_table_needs_z_for_noncommuting():
    p = zero_problem(np.array([[0.0, 1.0], [0.0, 0.0]]), np.zeros((2, 2)), np.zeros((2, 2)))
    with pytest.raises(ValueError, match="explicit Z"):
        build_table(p, 0.1)


def test_table_reuse_is_bitwise(rng):
    p, _, _ = care_problem(0)
    a = integrate(p, "metd2rk", 0.1, 0.2)
    s = initial_state(p)
    s = step_metd2rk(s, build_table(p, 0.1), p)
    s = step_metd2rk(s, build_table(p, 0.1), p)
    np.testing.assert_array_equal(a.Q, s.Q)


# --- single steps --------------------------------------------------------------------------

@pytest.mark.parametrize("scheme", ["metd1", "metd2", "metd2rk"])
def test_linear_exactness_one_big_step(rng, scheme):
    L, R = random_stable(rng, 3), random_stable(rng, 3)
    p = zero_problem(L, R, rng.standard_normal((3, 3)))
    T = 5.0
    out = integrate(p, scheme, T, T, Z=L + R).Q
    np.testing.assert_allclose(out, expm(T * L) @ p.Q0 @ expm(T * R), atol=1e-10)


def test_metd1_scalar_closed_form():
    p = MatrixOdeProblem(np.array([[-1.0]]), np.array([[-1.0]]), const(np.ones((1, 1))), np.zeros((1, 1)))
    q1 = step_metd1(initial_state(p), build_table(p, 0.5), p).Q[0, 0]
    assert q1 == pytest.approx((1 - math.exp(-1)) / 2, rel=1e-14)


def test_metd1_defect_ratio_on_lyapunov():
    p, _ = lyapunov_problem()
    ref = reference_solution(p, 1.0)
    d1 = one_step_defect(p, "metd1", 0.02, ref)
    d2 = one_step_defect(p, "metd1", 0.01, ref)
    assert d1 / d2 == pytest.approx(4.0, abs=0.4)


def test_metd2_constant_N_is_metd1_plus_cm1():
    p, _ = lyapunov_problem()
    tab = build_table(p, 0.1)
    s = StepState(0.2, np.eye(2), p.N(np.eye(2), 0.1), step_index=1)
    a, b = step_metd2(s, tab, p), step_metd1(s, tab, p)
    Sigma = p.N(None, 0.0)
    np.testing.assert_allclose(a.Q, b.Q + tab.CM1 @ commutator(Sigma, p.R), atol=1e-15)


def test_metd2_reduces_to_metd1_when_corrections_vanish(rng):
    M = random_stable(rng, 3)
    p = MatrixOdeProblem(M, M, const(poly_in(M, [1.0, 0.5])), rng.standard_normal((3, 3)))
    tab = build_table(p, 0.1)
    s = StepState(0.0, p.Q0, p.N(p.Q0, 0.0), step_index=1)
    np.testing.assert_allclose(step_metd2(s, tab, p).Q, step_metd1(s, tab, p).Q, atol=1e-14)


def test_metd2_without_history():
    p, _ = lyapunov_problem()
    with pytest.raises(BootstrapError):
        step_metd2(initial_state(p), build_table(p, 0.1), p)


def test_metd2rk_constant_N_equals_metd2():
    p, _ = lyapunov_problem()
    tab = build_table(p, 0.1)
    s = StepState(0.3, np.eye(2), p.N(np.eye(2), 0.2), step_index=1)
    np.testing.assert_allclose(step_metd2rk(s, tab, p).Q, step_metd2(s, tab, p).Q, atol=1e-15)


def test_evaluation_counts():
    p, _, _ = care_problem(0)
    s1 = integrate(p, "metd1", 0.1, 1.0)
    s2 = integrate(p, "metd2", 0.1, 1.0)
    s3 = integrate(p, "metd2rk", 0.1, 1.0)
    assert (s1.nfev, s2.nfev, s3.nfev) == (10, 11, 20)


@pytest.mark.parametrize("scheme", ["metd1", "metd2", "metd2rk"])
def test_local_order_on_care(scheme):
    p, _, _ = care_problem(0)
    ref = reference_solution(p, 1.0)
    dts = [0.1, 0.05, 0.025, 0.0125]
    slope = fit_slope(dts, [one_step_defect(p, scheme, dt, ref) for dt in dts])
    assert slope == pytest.approx(2.0 if scheme == "metd1" else 3.0, abs=0.3)


# --- integrate --------------------------------------------------------------------------------

def test_final_time_exact():
    p, _ = lyapunov_problem()
    s = integrate(p, "metd1", 0.1, 1.7)
    assert s.t == pytest.approx(1.7, rel=1e-12) and s.step_index == 17


def test_zero_steps_returns_initial_state():
    p, _ = lyapunov_problem()
    s = integrate(p, "metd2", 0.1, 0.0)
    assert s.step_index == 0
    np.testing.assert_array_equal(s.Q, p.Q0)


def test_observer_sees_every_step():
    p, _ = lyapunov_problem()
    seen = []
    integrate(p, "metd2", 0.25, 1.0, observer=lambda t, Q: seen.append(t))
    assert seen == [0.25, 0.5, 0.75, 1.0]


def test_divergence_reports_step():
    p = MatrixOdeProblem(np.eye(1), np.eye(1), lambda Q, t: Q ** 3, np.ones((1, 1)))
    with pytest.raises(DivergenceError) as exc:
        with np.errstate(over="ignore", invalid="ignore"):
            integrate(p, "metd1", 0.5, 50.0)
    assert exc.value.step_index >= 1


def test_step_budget():
    with pytest.raises(BudgetError):
        step_count(0.0, 1.0, 1.0 / (2 * MAX_STEPS))
    with pytest.raises(ValueError):
        step_count(0.0, 1.0, 0.3)
    with pytest.raises(ValueError):
        integrate(lyapunov_problem()[0], "metd9", 0.1, 1.0)


def test_care_symmetry_preserved():
    p, _, _ = care_problem(0, symmetric_initial=True)
    worst = []
    integrate(p, "metd2rk", 0.1, 20.0,
              observer=lambda t, X: worst.append(np.linalg.norm(X - X.T) / np.linalg.norm(X)))
    assert max(worst) <= 1e-8


def test_rk4_matches_reference_on_smooth_problem():
    p, _, _ = care_problem(0)
    ref = reference_solution(p, 1.0)
    np.testing.assert_allclose(integrate_rk4(p, 0.01, 100), ref(1.0), atol=1e-8)


# --- vectorized baseline ----------------------------------------------------------------------

def test_vectorized_scalar():
    p = MatrixOdeProblem(np.array([[-1.0]]), np.array([[-0.5]]), const(np.array([[2.0]])), np.array([[1.0]]))
    dt, a = 0.3, -1.5
    expect = math.exp(dt * a) + 2.0 * (math.exp(dt * a) - 1) / a
    assert vectorized_etd1_step(p, p.Q0, 0.0, dt)[0, 0] == pytest.approx(expect, rel=1e-13)


def test_vectorized_homogeneous(rng):
    L, R = rng.standard_normal((3, 3)), rng.standard_normal((3, 3))
    p = zero_problem(L, R, rng.standard_normal((3, 3)))
    np.testing.assert_allclose(vectorized_etd1_step(p, p.Q0, 0.0, 0.2),
                               expm(0.2 * L) @ p.Q0 @ expm(0.2 * R), atol=1e-10)


@given(st.integers(2, 4), st.integers(0, 2 ** 16))
def test_vectorized_matches_metd1_on_commuting_problem(n, seed):
    rng = np.random.default_rng(seed)
    M = random_stable(rng, n)
    N = poly_in(M, rng.standard_normal(3))
    p = MatrixOdeProblem(poly_in(M, [0.0, 1.0]), poly_in(M, [0.2, 0.5, 0.1]), const(N), rng.standard_normal((n, n)))
    tab = build_table(p, 0.1)
    np.testing.assert_allclose(vectorized_etd1_step(p, p.Q0, 0.0, 0.1),
                               step_metd1(initial_state(p), tab, p).Q, atol=1e-10)


@pytest.mark.xfail(strict=True, reason="N = Sigma does not commute with A^T, so the two ETD1 variants differ at O(dt^2)")
def test_vectorized_matches_metd1_on_lyapunov():
    p, _ = lyapunov_problem()
    tab = build_table(p, 0.1)
    np.testing.assert_allclose(vectorized_etd1_step(p, p.Q0, 0.0, 0.1),
                               step_metd1(initial_state(p), tab, p).Q, atol=1e-10)


def test_vectorized_size_cap():
    n = 9
    p = zero_problem(-np.eye(n), -np.eye(n), np.zeros((n, n)))
    with pytest.raises(BudgetError, match="cubic"):
        vectorized_etd1_step(p, p.Q0, 0.0, 0.1)
