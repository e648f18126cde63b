"""Brute-force reference computations the schemes are checked against.

None of these share code paths with the stepping kernels beyond ``expm``:
the phi oracle integrates by Gauss quadrature, the one-step oracle integrates
the variation-of-constants formula by quadrature, and the stationary
solutions come from dense Kronecker-vectorized solves.
"""
from __future__ import annotations

import warnings
from math import factorial

import mpmath
import numpy as np
import scipy.linalg

from .errors import DegenerateProblemError, DimensionError, OracleFailureError
from .matcore import as_matrix, expm

__all__ = [
    "taylor_expm_oracle",
    "gauss_nodes",
    "gauss_phi_oracle",
    "gauss_integral",
    "kron_sylvester_solve",
    "kron_lyapunov_solve",
    "care_residual",
    "care_solve",
    "quadrature_voc_step",
]

GAUSS_NODES_PER_PANEL = 7


def taylor_expm_oracle(A, terms: int = 30, dps: int = 40) -> np.ndarray:
    """Truncated power series of ``e^A`` summed in ``dps``-digit arithmetic."""
    A = as_matrix(A, square=True)
    with mpmath.workdps(dps):
        M = mpmath.matrix(A.tolist())
        term = mpmath.eye(A.shape[0])
        total = term.copy()
        for k in range(1, terms):
            term = term * M / k
            total += term
        out = np.array(total.tolist(), dtype=complex)
    return out if np.iscomplexobj(A) else out.real.copy()


def gauss_nodes(a: float, b: float, panels: int = 8, per_panel: int = GAUSS_NODES_PER_PANEL):
    """Composite Gauss-Legendre nodes and weights on ``[a, b]``."""
    x, w = np.polynomial.legendre.leggauss(per_panel)
    edges = np.linspace(a, b, panels + 1)
    nodes, weights = [], []
    for lo, hi in zip(edges[:-1], edges[1:]):
        half = 0.5 * (hi - lo)
        nodes.append(lo + half * (x + 1.0))
        weights.append(half * w)
    return np.concatenate(nodes), np.concatenate(weights)


def gauss_integral(f, a: float, b: float, panels: int = 8, per_panel: int = GAUSS_NODES_PER_PANEL):
    """Composite Gauss quadrature of a matrix-valued ``f`` over ``[a, b]``."""
    nodes, weights = gauss_nodes(a, b, panels, per_panel)
    return sum(w * f(x) for x, w in zip(nodes, weights))


def gauss_phi_oracle(X, k: int, points: int = 64) -> np.ndarray:
    """``phi_k(X) = int_0^1 e^{(1-t)X} t^{k-1}/(k-1)! dt`` by Gauss quadrature."""
    X = as_matrix(X, square=True)
    if k == 0:
        return expm(X)
    panels = max(1, points // 8)
    return gauss_integral(lambda th: expm((1.0 - th) * X) * th ** (k - 1) / factorial(k - 1),
                          0.0, 1.0, panels=panels, per_panel=points // panels)


def _solve_vectorized(K, rhs, shape):
    with warnings.catch_warnings():
        # singularity is reported through the pivot check below
        warnings.simplefilter("ignore", scipy.linalg.LinAlgWarning)
        lu, piv = scipy.linalg.lu_factor(K, check_finite=False)
    pivots = np.abs(np.diag(lu))
    if pivots.min() <= np.finfo(float).eps * K.shape[0] * max(pivots.max(), 1e-300):
        raise DegenerateProblemError("vectorized Sylvester operator is singular")
    x = scipy.linalg.lu_solve((lu, piv), rhs, check_finite=False)
    return x.reshape(shape, order="F")


def kron_sylvester_solve(L, R, N) -> np.ndarray:
    """Solve ``L X + X R + N = 0`` through the ``(I kron L + R^T kron I)`` system."""
    L = as_matrix(L, square=True, name="L")
    R = as_matrix(R, square=True, name="R")
    N = as_matrix(N, name="N")
    m, n = L.shape[0], R.shape[0]
    if N.shape != (m, n):
        raise DimensionError(f"N must be {m}x{n}, got {N.shape}")
    K = np.kron(np.eye(n), L) + np.kron(R.T, np.eye(m))
    return _solve_vectorized(K, -N.reshape(-1, order="F"), (m, n))


def kron_lyapunov_solve(A, Sigma) -> np.ndarray:
    """Stationary covariance: solve ``A C + C A^H + Sigma = 0``.

    For real ``A`` this is ``A C + C A^T + Sigma = 0``.
    """
    A = as_matrix(A, square=True, name="A")
    return kron_sylvester_solve(A, A.conj().T, Sigma)


def care_residual(X, L, D, Q) -> np.ndarray:
    """``X L + L^T X - X D X + Q``."""
    return X @ L + L.conj().T @ X - X @ D @ X + Q


def _bass_initial(L, D):
    # (L + bI) Z + Z (L + bI)^T = 2D gives a stabilizing X0 = Z^-1
    beta = 1.0 + np.abs(np.linalg.eigvals(L)).max()
    M = L + beta * np.eye(L.shape[0])
    Z = kron_lyapunov_solve(-M, 2.0 * D)
    return np.linalg.inv(Z)


def care_solve(L, D, Q, *, tol: float = 1e-12, max_iter: int = 100) -> np.ndarray:
    """Stationary point of ``X' = X L + L^T X - X D X + Q`` by Newton iteration.

    Each Newton step is a Lyapunov solve with the closed-loop matrix
    ``L - D X_k``. For stable ``L`` the iteration starts from the ``D = 0``
    Lyapunov solution; otherwise from a stabilizing Bass-type guess, so that
    the iteration lands on the attracting (stabilizing) solution.
    """
    L = as_matrix(L, square=True, name="L")
    D = as_matrix(D, square=True, name="D")
    Q = as_matrix(Q, square=True, name="Q")
    if np.max(np.linalg.eigvals(L).real) < 0:
        X = kron_lyapunov_solve(L.conj().T, Q)
    else:
        X = _bass_initial(L, D)
    scale = max(1.0, np.linalg.norm(Q))
    for _ in range(max_iter):
        F = L - D @ X
        X_new = kron_lyapunov_solve(F.conj().T, Q + X @ D @ X)
        X_new = 0.5 * (X_new + X_new.conj().T)
        step = np.linalg.norm(X_new - X)
        X = X_new
        if step <= tol * max(1.0, np.linalg.norm(X)) and \
                np.linalg.norm(care_residual(X, L, D, Q)) <= 1e3 * tol * scale:
            return X
    raise OracleFailureError(f"Newton iteration for the Riccati oracle did not converge in {max_iter} steps")


def quadrature_voc_step(L, R, N_of_t, Q_n, t_n: float, dt: float, panels: int = 4) -> np.ndarray:
    """One exact step of the variation-of-constants formula.

    ``e^{dt L} Q_n e^{dt R} + int_0^dt e^{(dt-s) L} N(t_n + s) e^{(dt-s) R} ds``
    with composite 7-point Gauss-Legendre quadrature over ``panels`` panels.
    ``N_of_t`` is a function of time only.
    """
    L = np.asarray(L)
    R = np.asarray(R)
    if panels < 1:
        raise ValueError("panels must be >= 1")

    def integrand(s):
        return expm((dt - s) * L) @ N_of_t(t_n + s) @ expm((dt - s) * R)

    return expm(dt * L) @ Q_n @ expm(dt * R) + gauss_integral(integrand, 0.0, dt, panels=panels)
