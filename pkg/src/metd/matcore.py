"""Dense matrix kernels: matrix exponential, phi-functions and commutators.

Matrices are plain 2-D numpy arrays (float64 or complex128). The matrix
exponential is a scaling-and-squaring Pade implementation, and the
phi-functions are read off the exponential of a block companion matrix so
that no inverse of ``dt*A`` is ever formed on the default path.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionError, NumericRangeError

__all__ = [
    "as_matrix",
    "expm",
    "phi_functions",
    "PhiSet",
    "phi_set",
    "commutator",
    "DIRECT_PHI_RCOND",
]

# smallest sigma_min(dt*A) / ||dt*A||_2 for which the inverse-based path is used
DIRECT_PHI_RCOND = 1e-6


def as_matrix(x, *, square=False, name="matrix") -> np.ndarray:
    """Validate ``x`` as a finite 2-D array and return it as float or complex."""
    a = np.asarray(x)
    if a.ndim == 0:
        a = a.reshape(1, 1)
    if a.ndim != 2 or a.shape[0] == 0 or a.shape[1] == 0:
        raise DimensionError(f"{name} must be a non-empty 2-D array, got shape {a.shape}")
    if square and a.shape[0] != a.shape[1]:
        raise DimensionError(f"{name} must be square, got shape {a.shape}")
    a = a.astype(np.complex128 if np.iscomplexobj(a) else np.float64, copy=False)
    if not np.all(np.isfinite(a)):
        raise NumericRangeError(f"{name} has non-finite entries")
    return a


# Higham (2005) backward-error bounds for the [m/m] Pade approximants.
_THETA = {3: 1.495585217958292e-2, 5: 2.539398330063230e-1,
          7: 9.504178996162932e-1, 9: 2.097847961257068e0}
_THETA13 = 5.371920351148152e0

_PADE = {
    3: (120.0, 60.0, 12.0, 1.0),
    5: (30240.0, 15120.0, 3360.0, 420.0, 30.0, 1.0),
    7: (17297280.0, 8648640.0, 1995840.0, 277200.0, 25200.0, 1512.0, 56.0, 1.0),
    9: (17643225600.0, 8821612800.0, 2075673600.0, 302702400.0, 30270240.0,
        2162160.0, 110880.0, 3960.0, 90.0, 1.0),
    13: (64764752532480000.0, 32382376266240000.0, 7771770303897600.0,
         1187353796428800.0, 129060195264000.0, 10559470521600.0,
         670442572800.0, 33522128640.0, 1323241920.0, 40840800.0, 960960.0,
         16380.0, 182.0, 1.0),
}


def _pade_uv(A, m):
    n = A.shape[0]
    ident = np.eye(n, dtype=A.dtype)
    b = _PADE[m]
    A2 = A @ A
    if m == 13:
        A4 = A2 @ A2
        A6 = A4 @ A2
        u = A @ (A6 @ (b[13] * A6 + b[11] * A4 + b[9] * A2)
                 + b[7] * A6 + b[5] * A4 + b[3] * A2 + b[1] * ident)
        v = (A6 @ (b[12] * A6 + b[10] * A4 + b[8] * A2)
             + b[6] * A6 + b[4] * A4 + b[2] * A2 + b[0] * ident)
        return u, v
    powers = [A2]
    for _ in range(2, m // 2 + 1):
        powers.append(powers[-1] @ A2)
    u = b[1] * ident
    v = b[0] * ident
    for k, P in enumerate(powers, start=1):
        u += b[2 * k + 1] * P
        v += b[2 * k] * P
    u = A @ u
    return u, v


def expm(A, hint=None) -> np.ndarray:
    """Matrix exponential by scaling and squaring with a diagonal Pade approximant.

    The Pade degree (3, 5, 7, 9 or 13) and the number of squarings are chosen
    from the 1-norm of ``A``. ``hint`` is accepted for interface stability
    (e.g. ``"normal"``) and currently does not change the algorithm.

    Raises
    ------
    DimensionError
        ``A`` is not square.
    NumericRangeError
        The result overflows.
    """
    A = as_matrix(A, square=True, name="A")
    n = A.shape[0]
    if n == 1:
        with np.errstate(over="ignore"):
            out = np.exp(A)
        if not np.all(np.isfinite(out)):
            raise NumericRangeError("matrix exponential overflowed")
        return out

    norm1 = np.abs(A).sum(axis=0).max()
    s = 0
    for m in (3, 5, 7, 9):
        if norm1 <= _THETA[m]:
            break
    else:
        m = 13
        if norm1 > _THETA13:
            s = int(np.ceil(np.log2(norm1 / _THETA13)))
    As = A / (2.0 ** s) if s else A

    with np.errstate(over="ignore", invalid="ignore"):
        u, v = _pade_uv(As, m)
        R = np.linalg.solve(v - u, v + u)
        for _ in range(s):
            R = R @ R
    if not np.all(np.isfinite(R)):
        raise NumericRangeError("matrix exponential overflowed")
    return R


def phi_functions(X, order: int = 3) -> list[np.ndarray]:
    """Standard phi-functions ``[phi_0(X), ..., phi_order(X)]``.

    ``phi_k(X) = int_0^1 e^{(1-t)X} t^{k-1}/(k-1)! dt`` and ``phi_0 = e^X``.
    All of them are blocks of the first block row of ``expm(W)`` where ``W``
    carries ``X`` in its top-left corner and identities on the block
    superdiagonal. This is exact at singular ``X``.
    """
    X = as_matrix(X, square=True, name="X")
    n = X.shape[0]
    size = (order + 1) * n
    W = np.zeros((size, size), dtype=X.dtype)
    W[:n, :n] = X
    eye = np.eye(n)
    for k in range(order):
        W[k * n:(k + 1) * n, (k + 1) * n:(k + 2) * n] = eye
    E = expm(W)
    return [E[:n, k * n:(k + 1) * n].copy() for k in range(order + 1)]


def _phi_direct(X):
    n = X.shape[0]
    ident = np.eye(n, dtype=X.dtype)
    eX = expm(X)
    phi1 = np.linalg.solve(X, eX - ident)
    phi2 = np.linalg.solve(X, np.linalg.solve(X, eX - X - ident))
    tail = X + X @ eX - 2.0 * eX + 2.0 * ident
    phi3b = np.linalg.solve(X, np.linalg.solve(X, np.linalg.solve(X, tail)))
    return eX, phi1, phi2, phi3b


@dataclass(frozen=True)
class PhiSet:
    """phi-function values at ``argument_scaled = dt*A``.

    ``phi3_bespoke`` is ``(dt A)^-3 (dt A + dt e^{dt A} A - 2 e^{dt A} + 2I)``,
    which equals ``phi_2 - 2 phi_3`` in terms of the standard functions; it is
    the coefficient family that multiplies ``[dN, R]`` in the second-order
    schemes, not the standard ``phi_3``.
    """

    phi0: np.ndarray
    phi1: np.ndarray
    phi2: np.ndarray
    phi3_bespoke: np.ndarray
    argument_scaled: np.ndarray
    dt: float


def _direct_ok(X) -> bool:
    sv = np.linalg.svd(X, compute_uv=False)
    return sv[0] > 0 and sv[-1] > DIRECT_PHI_RCOND * sv[0]


def phi_set(A, dt: float, method: str = "block") -> PhiSet:
    """Evaluate ``phi_0 .. phi_2`` and the bespoke ``phi_3`` at ``dt*A``.

    ``method`` is ``"block"`` (inverse free, default), ``"direct"`` (explicit
    solves against ``dt*A``) or ``"auto"`` (direct only when
    ``sigma_min(dt A) > 1e-6 ||dt A||``).
    """
    A = as_matrix(A, square=True, name="A")
    if not dt > 0:
        raise ValueError(f"dt must be positive, got {dt}")
    X = dt * A
    if method == "auto":
        method = "direct" if _direct_ok(X) else "block"
    if method == "direct":
        p0, p1, p2, p3b = _phi_direct(X)
    elif method == "block":
        p0, p1, p2, p3 = phi_functions(X, 3)
        p3b = p2 - 2.0 * p3
    else:
        raise ValueError(f"unknown phi method {method!r}")
    return PhiSet(p0, p1, p2, p3b, X, float(dt))


def commutator(A, B) -> np.ndarray:
    """``[A, B] = AB - BA`` for square matrices of equal size."""
    A = np.asarray(A)
    B = np.asarray(B)
    if A.ndim != 2 or A.shape[0] != A.shape[1] or A.shape != B.shape:
        raise DimensionError(f"commutator needs equal square shapes, got {A.shape} and {B.shape}")
    return A @ B - B @ A
