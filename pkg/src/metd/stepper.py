"""Matrix exponential time differencing steppers for ``Q' = LQ + QR + N(Q, t)``.

A :class:`PropagatorTable` holds every ``dt``-dependent matrix a scheme
needs, so a fixed-step run costs only matrix products per step:

    METD1    Q+ = PL Q PR + S1 N
    METD2    Q+ = PL Q PR + S1 N + S2 dN + CM1 [N, R] + CM2 [dN, R]
    METD2RK  predictor A = PL Q PR + S1 N, then the METD2 correction with
             dN = N(A, t + dt) - N(Q, t)

with ``PL = e^{dt L}``, ``PR = e^{dt R}``, ``S1 = dt phi_1(dt Z)``,
``S2 = dt phi_2(dt Z)``, ``CM1 = int_0^dt s e^{sL} ds`` and
``CM2 = (1/dt) int_0^dt s (dt - s) e^{sL} ds``. ``Z`` is ``L + R`` for
commuting operators and a truncated BCH series otherwise.
"""
from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Callable, Optional

import numpy as np
from scipy.integrate import solve_ivp

from .errors import BootstrapError, BudgetError, DimensionError, DivergenceError
from .matcore import as_matrix, commutator, expm, phi_functions, phi_set

__all__ = [
    "MatrixOdeProblem",
    "PropagatorTable",
    "StepState",
    "SCHEMES",
    "build_table",
    "initial_state",
    "step_metd1",
    "step_metd2",
    "step_metd2rk",
    "integrate",
    "vectorized_etd1_step",
    "padded_commutator",
    "commutator_coefficients",
    "step_count",
    "rk4_step",
    "integrate_rk4",
    "reference_solution",
    "MAX_STEPS",
    "MAX_VECTORIZED_N",
]

MAX_STEPS = 10_000_000
MAX_VECTORIZED_N = 8
COMMUTING_RTOL = 1e-10


@dataclass(frozen=True)
class MatrixOdeProblem:
    """``Q' = L Q + Q R + N(Q, t)`` with ``L`` m x m, ``R`` n x n, ``Q`` m x n."""

    L: np.ndarray
    R: np.ndarray
    nonlinearity: Callable[[np.ndarray, float], np.ndarray]
    Q0: np.ndarray
    commuting: bool = True
    t0: float = 0.0
    name: str = ""

    def __post_init__(self):
        L = as_matrix(self.L, square=True, name="L")
        R = as_matrix(self.R, square=True, name="R")
        Q0 = as_matrix(self.Q0, name="Q0")
        object.__setattr__(self, "L", L)
        object.__setattr__(self, "R", R)
        object.__setattr__(self, "Q0", Q0)
        m, n = L.shape[0], R.shape[0]
        if Q0.shape != (m, n):
            raise DimensionError(f"Q0 must be {m}x{n} for L {L.shape} and R {R.shape}, got {Q0.shape}")
        self.N(Q0, self.t0)
        if self.commuting and m == n:
            gap = np.linalg.norm(commutator(L, R))
            if gap > COMMUTING_RTOL * np.linalg.norm(L) * np.linalg.norm(R):
                raise ValueError(f"problem flagged commuting but ||[L,R]||_F = {gap:.3e}")

    @property
    def shape(self) -> tuple[int, int]:
        return self.Q0.shape

    @property
    def square(self) -> bool:
        return self.L.shape == self.R.shape

    def N(self, Q, t) -> np.ndarray:
        out = np.asarray(self.nonlinearity(Q, t))
        if out.shape != self.Q0.shape:
            raise DimensionError(f"nonlinearity returned shape {out.shape}, expected {self.Q0.shape}")
        return out

    def rhs(self, Q, t) -> np.ndarray:
        return self.L @ Q + Q @ self.R + self.N(Q, t)


def _frozen(a):
    a = np.array(a)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class PropagatorTable:
    """Per-``dt`` propagator matrices; immutable and shareable between runs."""

    dt: float
    PL: np.ndarray
    PR: np.ndarray
    S1: np.ndarray
    S2: np.ndarray
    CM1: np.ndarray
    CM2: np.ndarray
    R: np.ndarray  # right operator inside the commutator terms (unpadded when m > n)


@dataclass(frozen=True)
class StepState:
    t: float
    Q: np.ndarray
    prev_N: Optional[np.ndarray] = None
    step_index: int = 0
    nfev: int = 0

    def __post_init__(self):
        if (self.prev_N is None) != (self.step_index == 0):
            raise ValueError("prev_N must be present exactly when step_index >= 1")


def initial_state(problem: MatrixOdeProblem) -> StepState:
    return StepState(t=problem.t0, Q=problem.Q0.copy())


def commutator_coefficients(L, dt: float) -> tuple[np.ndarray, np.ndarray]:
    """``CM1 = dt^2 (phi_1 - phi_2)(dt L)`` and ``CM2 = dt^2 (phi_2 - 2 phi_3)(dt L)``.

    These are the closed forms of ``int_0^dt s e^{sL} ds`` and
    ``(1/dt) int_0^dt s (dt - s) e^{sL} ds``, evaluated without inverting L.
    """
    _, p1, p2, p3 = phi_functions(dt * np.asarray(L), 3)
    return dt * dt * (p1 - p2), dt * dt * (p2 - 2.0 * p3)


def build_table(problem: MatrixOdeProblem, dt: float, Z=None, phi_method: str = "block") -> PropagatorTable:
    """Precompute the propagators for a fixed ``dt``.

    ``Z`` replaces ``L + R`` inside the phi-functions; pass a BCH-truncated
    generator for non-commuting operators.
    """
    if not dt > 0:
        raise ValueError(f"dt must be positive, got {dt}")
    L, R = problem.L, problem.R
    if Z is None:
        if not (problem.commuting and problem.square):
            raise ValueError("non-commuting or non-square problem needs an explicit Z "
                             "(see metd.extensions.scaled_bch)")
        Z = L + R
    Z = as_matrix(Z, square=True, name="Z")
    if Z.shape != L.shape:
        raise DimensionError(f"Z must match L, got {Z.shape} vs {L.shape}")
    phis = phi_set(Z, dt, method=phi_method)
    CM1, CM2 = commutator_coefficients(L, dt)
    return PropagatorTable(
        dt=float(dt),
        PL=_frozen(expm(dt * L)),
        PR=_frozen(expm(dt * R)),
        S1=_frozen(dt * phis.phi1),
        S2=_frozen(dt * phis.phi2),
        CM1=_frozen(CM1),
        CM2=_frozen(CM2),
        R=_frozen(R),
    )


def _linear_part(table, Q):
    return table.PL @ Q @ table.PR


def step_metd1(state: StepState, table: PropagatorTable, problem: MatrixOdeProblem) -> StepState:
    N = problem.N(state.Q, state.t)
    Q = _linear_part(table, state.Q) + table.S1 @ N
    return StepState(state.t + table.dt, Q, N, state.step_index + 1, state.nfev + 1)


def padded_commutator(A, R) -> np.ndarray:
    """``[A, R]`` for square ``A``; for m x n ``A`` with n x n ``R`` the first n
    columns of ``[A (+) 0, R (+) 0]`` (the remaining columns are zero)."""
    out = A @ R
    n = R.shape[0]
    out[:n] -= R @ A[:n]
    return out


_comm = padded_commutator


def step_metd2(state: StepState, table: PropagatorTable, problem: MatrixOdeProblem) -> StepState:
    if state.prev_N is None:
        raise BootstrapError("METD2 needs N from the previous step; take a METD2RK step first")
    N = problem.N(state.Q, state.t)
    dN = N - state.prev_N
    Q = (_linear_part(table, state.Q) + table.S1 @ N + table.S2 @ dN
         + table.CM1 @ _comm(N, table.R) + table.CM2 @ _comm(dN, table.R))
    return StepState(state.t + table.dt, Q, N, state.step_index + 1, state.nfev + 1)


def step_metd2rk(state: StepState, table: PropagatorTable, problem: MatrixOdeProblem) -> StepState:
    N = problem.N(state.Q, state.t)
    A = _linear_part(table, state.Q) + table.S1 @ N
    dN = problem.N(A, state.t + table.dt) - N
    Q = A + table.S2 @ dN + table.CM1 @ _comm(N, table.R) + table.CM2 @ _comm(dN, table.R)
    return StepState(state.t + table.dt, Q, N, state.step_index + 1, state.nfev + 2)


SCHEMES = {
    "metd1": step_metd1,
    "metd2": step_metd2,
    "metd2rk": step_metd2rk,
}


def step_count(t0: float, t_end: float, dt: float) -> int:
    if not dt > 0:
        raise ValueError(f"dt must be positive, got {dt}")
    span = t_end - t0
    if span < 0:
        raise ValueError("t_end must not precede t0")
    steps = int(round(span / dt))
    if abs(steps * dt - span) > 1e-9 * max(abs(span), dt):
        raise ValueError(f"dt={dt} does not divide the interval [{t0}, {t_end}]")
    if steps > MAX_STEPS:
        raise BudgetError(f"{steps} steps exceed the budget of {MAX_STEPS}")
    return steps


def integrate(problem: MatrixOdeProblem, scheme: str, dt: float, t_end: float,
              observer=None, *, Z=None, table: PropagatorTable | None = None,
              state: StepState | None = None) -> StepState:
    """Fixed-step integration from ``problem.t0`` (or ``state``) to ``t_end``.

    METD2 takes its first step with METD2RK. ``observer(t, Q)`` is called after
    every step. Raises :class:`DivergenceError` on non-finite iterates.
    """
    scheme = scheme.lower()
    if scheme not in SCHEMES:
        raise ValueError(f"unknown scheme {scheme!r}; choose from {sorted(SCHEMES)}")
    state = state or initial_state(problem)
    steps = step_count(state.t, t_end, dt)
    if steps == 0:
        return state
    table = table or build_table(problem, dt, Z)
    step = SCHEMES[scheme]
    t_start, k0 = state.t, state.step_index
    for k in range(1, steps + 1):
        # overflow surfaces as DivergenceError below rather than as numpy warnings
        with np.errstate(over="ignore", invalid="ignore"):
            if step is step_metd2 and state.prev_N is None:
                state = step_metd2rk(state, table, problem)
            else:
                state = step(state, table, problem)
        # exact step accounting instead of accumulated additions
        state = replace(state, t=t_start + k * dt if k < steps else float(t_end))
        if not np.all(np.isfinite(state.Q)):
            raise DivergenceError(k0 + k)
        if observer is not None:
            observer(state.t, state.Q)
    return state


def _kron_sum(L, RT):
    """``I kron L + RT kron I`` by broadcasting (np.kron's generic path dominates at small sizes)."""
    m, n = L.shape[0], RT.shape[0]
    dtype = np.result_type(L, RT)
    op = np.zeros((n, m, n, m), dtype=dtype)
    idx_n, idx_m = np.arange(n), np.arange(m)
    op[idx_n, :, idx_n, :] = L
    op += RT[:, None, :, None] * np.eye(m)[None, :, None, :]
    return op.reshape(n * m, n * m)


def vectorized_etd1_step(problem: MatrixOdeProblem, Q_n, t_n: float, dt: float) -> np.ndarray:
    """Classical ETD1 on ``vec(Q)' = (I kron L + R^T kron I) vec(Q) + vec(N)``.

    The n^2 x n^2 exponential is rebuilt on every call; this is the baseline the
    matrix form is compared against, so it is capped at n = 8.
    """
    m, n = problem.shape
    if max(m, n) > MAX_VECTORIZED_N:
        raise BudgetError(
            f"vectorized ETD needs a {m * n}x{m * n} exponential, whose cost is cubic in that "
            f"size; refusing n > {MAX_VECTORIZED_N}")
    op = _kron_sum(problem.L, problem.R.T)
    e, p1 = phi_functions(dt * op, 1)
    q = np.asarray(Q_n).reshape(-1, order="F")
    nvec = problem.N(Q_n, t_n).reshape(-1, order="F")
    return (e @ q + dt * (p1 @ nvec)).reshape((m, n), order="F")


def rk4_step(problem: MatrixOdeProblem, Q, t: float, dt: float) -> np.ndarray:
    """Classical explicit fourth-order Runge-Kutta step on the full right-hand side."""
    k1 = problem.rhs(Q, t)
    k2 = problem.rhs(Q + 0.5 * dt * k1, t + 0.5 * dt)
    k3 = problem.rhs(Q + 0.5 * dt * k2, t + 0.5 * dt)
    k4 = problem.rhs(Q + dt * k3, t + dt)
    return Q + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def integrate_rk4(problem: MatrixOdeProblem, dt: float, steps: int, Q0=None, observer=None) -> np.ndarray:
    Q = problem.Q0 if Q0 is None else np.asarray(Q0)
    t = problem.t0
    with np.errstate(over="ignore", invalid="ignore"):
        for k in range(1, steps + 1):
            Q = rk4_step(problem, Q, t, dt)
            t = problem.t0 + k * dt
            if not np.all(np.isfinite(Q)):
                raise DivergenceError(k, f"RK4 produced non-finite values at step {k}")
            if observer is not None:
                observer(t, Q)
    return Q


def reference_solution(problem: MatrixOdeProblem, t_end: float, *, rtol=1e-13, atol=1e-14):
    """Dense high-accuracy trajectory (DOP853); returns ``Q(t)`` as a callable."""
    shape = problem.shape
    dtype = np.result_type(problem.L, problem.R, problem.Q0)

    def f(t, y):
        return problem.rhs(y.reshape(shape), t).ravel()

    sol = solve_ivp(f, (problem.t0, t_end), problem.Q0.astype(dtype).ravel(), method="DOP853",
                    rtol=rtol, atol=atol, dense_output=True)
    if not sol.success:
        raise RuntimeError(f"reference integration failed: {sol.message}")

    def Q_of_t(t):
        return sol.sol(t).reshape(shape)

    return Q_of_t
