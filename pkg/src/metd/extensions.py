"""Non-commuting and non-square problems.

Non-commuting ``L``, ``R``: ``L + R`` inside the phi-functions is replaced by
a truncated Baker-Campbell-Hausdorff series for ``log(e^L e^R)``.

Non-square ``Q`` (m x n, m > n): ``Q`` and ``N`` are thought of as padded
with ``m - n`` zero columns and ``R`` as ``R (+) 0``. The padded columns never
interact with the original ones, so every product is carried out on the
m x n data directly and ``e^{dt R}`` is only ever computed at size n.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateProblemError, DimensionError, PaddingViolationError
from .matcore import as_matrix, commutator, expm
from .stepper import (MatrixOdeProblem, PropagatorTable, StepState, build_table,
                      padded_commutator, step_metd1)

__all__ = [
    "BCH_GATE",
    "BchExpansion",
    "BchGateWarning",
    "bch_z",
    "scaled_bch",
    "regularize_z",
    "PaddedSystem",
    "pad_columns",
    "pad_operator",
    "strip_padding",
    "padded_expm_R",
    "augment_problem",
    "build_sylvester_table",
    "step_metd1_sylvester",
    "build_regularized_adjacency",
]

BCH_GATE = np.log(2.0) / 2.0
DEFAULT_REG_EPS = 1e-8
PADDING_RTOL = 1e-10


class BchGateWarning(UserWarning):
    """``||L|| + ||R||`` is outside the region where the BCH series is known to converge."""


@dataclass(frozen=True)
class BchExpansion:
    order: int
    Z: np.ndarray
    gate_margin: float
    converged_gate: bool


def bch_z(L, R, order: int = 2, *, warn: bool = False) -> BchExpansion:
    """Truncated BCH series for ``log(e^L e^R)`` up to third order.

    The convergence gate ``||L||_F + ||R||_F < log(2)/2`` is evaluated and
    reported; a failed gate does not stop the computation.
    """
    if order not in (1, 2, 3):
        raise ValueError(f"BCH order must be 1, 2 or 3, got {order}")
    L = np.asarray(L)
    R = np.asarray(R)
    if L.ndim != 2 or L.shape != R.shape or L.shape[0] != L.shape[1]:
        raise DimensionError(f"BCH needs equal square shapes, got {L.shape} and {R.shape}")
    Z = L + R
    if order >= 2:
        LR = commutator(L, R)
        Z = Z + 0.5 * LR
        if order == 3:
            Z = Z + (commutator(L, LR) - commutator(R, LR)) / 12.0
    margin = float(BCH_GATE - (np.linalg.norm(L) + np.linalg.norm(R)))
    ok = margin > 0
    if warn and not ok:
        warnings.warn(f"BCH gate violated: ||L|| + ||R|| exceeds log(2)/2 by {-margin:.3g}",
                      BchGateWarning, stacklevel=2)
    return BchExpansion(order, Z, margin, ok)


def scaled_bch(L, R, dt: float, order: int = 2, *, warn: bool = True):
    """Generator ``Z`` with ``e^{dt Z} ~ e^{dt L} e^{dt R}``.

    The series is taken for the pair ``(dt L, dt R)`` actually exponentiated in
    one step, and divided by ``dt``; the gate therefore refers to that pair.
    Returns ``(Z, expansion)``.
    """
    exp = bch_z(dt * np.asarray(L), dt * np.asarray(R), order, warn=warn)
    return exp.Z / dt, exp


def regularize_z(Z, eps: float = DEFAULT_REG_EPS) -> np.ndarray:
    """Lift singular values of ``Z`` below ``eps ||Z||_F`` up to that floor.

    Well-conditioned input is returned unchanged; the zero matrix maps to
    ``eps * I``. Only needed before explicitly inverting ``Z``.
    """
    Z = as_matrix(Z, square=True, name="Z")
    scale = np.linalg.norm(Z)
    if scale == 0.0:
        return eps * np.eye(Z.shape[0], dtype=Z.dtype)
    floor = eps * scale
    U, s, Vh = np.linalg.svd(Z)
    if s[-1] >= floor:
        return Z
    return (U * np.maximum(s, floor)) @ Vh


@dataclass(frozen=True)
class PaddedSystem:
    L: np.ndarray
    R_small: np.ndarray

    @property
    def m(self) -> int:
        return self.L.shape[0]

    @property
    def n(self) -> int:
        return self.R_small.shape[0]

    @property
    def padded_dim(self) -> int:
        return self.m


def pad_columns(Q, m: int) -> np.ndarray:
    Q = np.asarray(Q)
    out = np.zeros((Q.shape[0], m), dtype=Q.dtype)
    out[:, :Q.shape[1]] = Q
    return out


def pad_operator(R, m: int) -> np.ndarray:
    """``R (+) 0`` at size m; for brute-force comparisons only."""
    R = np.asarray(R)
    out = np.zeros((m, m), dtype=R.dtype)
    n = R.shape[0]
    out[:n, :n] = R
    return out


def strip_padding(Q_aug, n: int) -> np.ndarray:
    """Drop the padded columns, checking that they are (numerically) zero."""
    Q_aug = np.asarray(Q_aug)
    pad = Q_aug[:, n:]
    if pad.size and np.linalg.norm(pad) > PADDING_RTOL * max(np.linalg.norm(Q_aug), 1e-300):
        raise PaddingViolationError(f"padded columns carry norm {np.linalg.norm(pad):.3e}")
    return Q_aug[:, :n].copy()


def padded_expm_R(R_small, m: int, dt: float = 1.0) -> np.ndarray:
    """``expm(dt (R (+) 0))`` as ``e^{dt R} (+) I``, exponentiating only at size n."""
    R_small = as_matrix(R_small, square=True, name="R_small")
    n = R_small.shape[0]
    if m <= n:
        raise DimensionError(f"padded size m={m} must exceed n={n}")
    out = np.eye(m, dtype=R_small.dtype)
    out[:n, :n] = expm(dt * R_small)
    return out


def augment_problem(problem: MatrixOdeProblem) -> MatrixOdeProblem:
    """The square m x m problem with zero-padded ``Q``, ``N`` and ``R``."""
    m, n = problem.shape
    if m <= n:
        raise DimensionError("augmentation needs m > n")
    N = problem.nonlinearity

    def padded_N(Q_aug, t):
        return pad_columns(N(Q_aug[:, :n], t), m)

    return MatrixOdeProblem(problem.L, pad_operator(problem.R, m), padded_N,
                            pad_columns(problem.Q0, m), commuting=False, t0=problem.t0,
                            name=f"{problem.name}-augmented")


def _check_sylvester(problem):
    m, n = problem.shape
    if m <= n:
        raise DimensionError(f"Sylvester path needs m > n (got {m}x{n}); use the square steppers")
    return m, n


def build_sylvester_table(problem: MatrixOdeProblem, dt: float, bch_order: int = 1,
                          phi_method: str = "block", warn: bool = True) -> tuple[PropagatorTable, "BchExpansion"]:
    """Propagators for an m x n problem; ``PR`` is ``e^{dt R}`` at size n."""
    m, _ = _check_sylvester(problem)
    Z, expansion = scaled_bch(problem.L, pad_operator(problem.R, m), dt, bch_order, warn=warn)
    return build_table(problem, dt, Z, phi_method=phi_method), expansion


def step_metd1_sylvester(state: StepState, problem: MatrixOdeProblem, table: PropagatorTable,
                         commutator_correction: bool = False) -> StepState:
    """METD1 for m x n ``Q`` on the implicitly padded system.

    With ``commutator_correction`` the first commutator term
    ``CM1 [N~, R~]`` is added as well.
    """
    _check_sylvester(problem)
    new = step_metd1(state, table, problem)
    if commutator_correction:
        new = StepState(new.t, new.Q + table.CM1 @ padded_commutator(new.prev_N, table.R),
                        new.prev_N, new.step_index, new.nfev)
    return new


def build_regularized_adjacency(A, alpha: float) -> np.ndarray:
    """``(alpha/2) (I + D^{-1/2} A D^{-1/2})`` with ``D`` the degree matrix."""
    A = as_matrix(A, square=True, name="adjacency")
    if not 0.0 < alpha < 1.0:
        raise ValueError(f"alpha must lie in (0, 1), got {alpha}")
    if not np.allclose(A, A.T):
        raise ValueError("adjacency matrix must be symmetric")
    deg = A.sum(axis=1)
    if np.any(deg <= 0):
        raise DegenerateProblemError(f"isolated vertices: {np.flatnonzero(deg <= 0).tolist()}")
    d = 1.0 / np.sqrt(deg)
    return 0.5 * alpha * (np.eye(A.shape[0]) + d[:, None] * A * d[None, :])
