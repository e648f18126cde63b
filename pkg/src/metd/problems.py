"""Benchmark systems with their stationary oracles, and the convergence harness.

* ``lyapunov_problem``     C' = A C + C A^T + Sigma (n = 2)
* ``care_problem``         X' = X L + L^T X - X D X + Q (n = 2, seeded D)
* ``ce2_jet_problem``      one zonal Fourier mode of the CE2 fluctuation covariance
* ``cgnn_sylvester_problem``  Q' = (A~ - I) Q + Q (W - I) + E on a random graph
"""
from __future__ import annotations

import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from typing import Callable, Optional, Sequence

import numpy as np

from .errors import ConfigError, DimensionError, DivergenceError, ExcludedModeError, MetdError
from .extensions import build_regularized_adjacency, pad_operator, scaled_bch
from .oracles import care_solve, kron_lyapunov_solve, kron_sylvester_solve
from .stepper import MatrixOdeProblem, integrate

__all__ = [
    "lyapunov_problem",
    "care_problem",
    "riccati_bench_problem",
    "Ce2JetConfig",
    "JetMode",
    "ce2_jet_operator",
    "ce2_jet_forcing",
    "ce2_jet_problem",
    "dft_matrix",
    "physical_diagonal",
    "JetTrajectory",
    "integrate_jets",
    "CgnnInstance",
    "random_graph",
    "cgnn_sylvester_problem",
    "ConvergenceReport",
    "convergence_study",
    "fit_slope",
]


# --- low-dimensional benchmarks -------------------------------------------------

LYAPUNOV_A = -2.0 * np.eye(2) + np.array([[0.0, 1.0], [-1.0, 0.0]])
LYAPUNOV_SIGMA = np.array([[2.0, 1.0], [1.0, 2.0]])

CARE_L = np.array([[-2.0, -2.0], [2.0, -2.0]])
CARE_Q = 2.0 * np.eye(2)


def lyapunov_problem():
    """Normal, negative definite ``A``, SPD ``Sigma``, ``C(0) = 0``.

    Returns ``(problem, C_inf)``. ``[Sigma, A]`` is nonzero, so the commutator
    terms matter even though ``L = A`` and ``R = A^T`` commute.
    """
    A, Sigma = LYAPUNOV_A, LYAPUNOV_SIGMA
    problem = MatrixOdeProblem(A, A.T, lambda C, t: Sigma, np.zeros((2, 2)), name="lyapunov")
    return problem, kron_lyapunov_solve(A, Sigma)


def care_problem(seed: int = 0, symmetric_initial: bool = False):
    """Dynamical Riccati benchmark; returns ``(problem, X_inf, D)``.

    ``D = B B^T`` and ``X(0)`` have standard normal entries from ``seed``.
    The left operator is ``L^T`` and the right one ``L``.
    """
    rng = np.random.default_rng(seed)
    B = rng.standard_normal((2, 2))
    D = B @ B.T
    X0 = rng.standard_normal((2, 2))
    if symmetric_initial:
        X0 = 0.5 * (X0 + X0.T)
    L, Qc = CARE_L, CARE_Q

    def riccati_term(X, t):
        return Qc - X @ D @ X

    problem = MatrixOdeProblem(L.T, L, riccati_term, X0, name=f"care-seed{seed}")
    return problem, care_solve(L, D, Qc), D


def riccati_bench_problem(n: int, seed: int = 0) -> MatrixOdeProblem:
    """Size-``n`` Riccati flow with normal ``L = -2I + skew`` and ``R = L^T``, for timing."""
    if n < 1:
        raise DimensionError("n must be positive")
    rng = np.random.default_rng(seed)
    S = rng.standard_normal((n, n))
    L = -2.0 * np.eye(n) + 0.5 * (S - S.T)
    B = rng.standard_normal((n, n))
    D = B @ B.T / n
    Qc = 2.0 * np.eye(n)

    def riccati_term(X, t):
        return Qc - X @ D @ X

    return MatrixOdeProblem(L, L.T, riccati_term, rng.standard_normal((n, n)), name=f"riccati-n{n}")


# --- CE2 jets ----------------------------------------------------------------------

@dataclass
class Ce2JetConfig:
    Nx: int = 16
    Ny: int = 32
    Lx: float = 2 * math.pi
    Ly: float = 2 * math.pi
    beta: float = 5.0
    alpha_friction: float = 1e-3
    nu: float = 1e-6
    p: int = 4
    jet_count: int = 4
    U_star: Optional[list] = None  # meridional profile on the Ny grid; default cos jets
    forcing_wavenumber: float = 8.0
    forcing_width: float = 1.0
    perturbation_amplitude: Optional[float] = None  # default 0.1 trace(Xi_inf) / Ny
    perturbation_width_cells: float = 3.0
    perturbation_row: Optional[int] = None  # default: the jet maximum at Ny / 4

    def __post_init__(self):
        for name in ("Nx", "Ny"):
            v = getattr(self, name)
            if v <= 0 or v % 2:
                raise ConfigError(f"{name} must be an even positive integer, got {v}")
        if self.p < 1:
            raise ConfigError("hyperviscosity order p must be >= 1")
        if self.alpha_friction < 0 or self.nu < 0:
            raise ConfigError("friction and viscosity must be non-negative")
        if self.U_star is not None and len(self.U_star) != self.Ny:
            raise ConfigError(f"U_star needs {self.Ny} samples, got {len(self.U_star)}")

    @property
    def y(self) -> np.ndarray:
        return np.arange(self.Ny) * self.Ly / self.Ny

    @property
    def ky(self) -> np.ndarray:
        return np.fft.fftfreq(self.Ny, d=1.0 / self.Ny) * 2 * math.pi / self.Ly

    @property
    def modes(self) -> list[int]:
        return list(range(1, self.Nx // 2))

    def profile(self) -> tuple[np.ndarray, np.ndarray]:
        """``U*`` and ``d^2 U*/dy^2`` on the grid."""
        if self.U_star is not None:
            U = np.asarray(self.U_star, dtype=float)
            Upp = np.fft.ifft(-(self.ky ** 2) * np.fft.fft(U)).real
            return U, Upp
        q = self.jet_count * 2 * math.pi / self.Ly
        U = np.cos(q * self.y)
        return U, -q * q * U

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "Ce2JetConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown jets config keys: {sorted(unknown)}")
        return cls(**data)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "Ce2JetConfig":
        return cls.from_dict(json.loads(text))


def dft_matrix(n: int) -> np.ndarray:
    """Unitary DFT: spectral coefficients = F @ grid values."""
    return np.fft.fft(np.eye(n), axis=0) / math.sqrt(n)


def _grid_multiplier(F, values):
    return (F * values[None, :]) @ F.conj().T


def _check_mode(config, kx):
    if kx == 0:
        raise ExcludedModeError("kx = 0 is the zonal mean, which is not a fluctuation mode")
    if abs(kx) > config.Nx // 2 - 1:
        raise DimensionError(f"|kx| must be at most {config.Nx // 2 - 1}, got {kx}")


def ce2_jet_operator(config: Ce2JetConfig, kx: int) -> np.ndarray:
    """``Gamma_k = U d_x + (U'' - beta) d_x Lap^-1 + alpha + nu (-Lap)^p`` for one zonal mode.

    Basis: meridional Fourier modes; multiplication by ``U`` and ``U''`` are
    dense circulant blocks built from the grid profile.
    """
    _check_mode(config, kx)
    k = kx * 2 * math.pi / config.Lx
    K2 = k * k + config.ky ** 2  # > 0 since k != 0
    U, Upp = config.profile()
    F = dft_matrix(config.Ny)
    advect = _grid_multiplier(F, U)
    shear = _grid_multiplier(F, Upp - config.beta)
    return (1j * k * advect
            + 1j * k * shear * (-1.0 / K2)[None, :]
            + config.alpha_friction * np.eye(config.Ny)
            + config.nu * np.diag(K2 ** config.p))


def ce2_jet_forcing(config: Ce2JetConfig, kx: int) -> np.ndarray:
    """Diagonal forcing covariance ``C_k``: an isotropic ring at the forcing
    wavenumber, normalized to unit total trace over the retained modes."""
    _check_mode(config, kx)

    def ring(kxi):
        k = kxi * 2 * math.pi / config.Lx
        kk = np.sqrt(k * k + config.ky ** 2)
        return np.exp(-0.5 * ((kk - config.forcing_wavenumber) / config.forcing_width) ** 2)

    total = sum(ring(m).sum() for m in config.modes)
    return np.diag(ring(abs(kx)) / total).astype(complex)


@dataclass(frozen=True)
class JetMode:
    kx: int
    problem: MatrixOdeProblem
    stationary: np.ndarray
    perturbation: np.ndarray

    def generator(self, dt: float, form: str = "plain") -> np.ndarray:
        """``Z`` for the phi-functions: ``L + R`` (plain) or the dt-scaled BCH2 series."""
        if form == "plain":
            return self.problem.L + self.problem.R
        if form == "bch2":
            return scaled_bch(self.problem.L, self.problem.R, dt, 2, warn=False)[0]
        raise ValueError(f"unknown jets form {form!r}")


def ce2_jet_problem(config: Ce2JetConfig, kx: int) -> JetMode:
    """``Xi' = -(Gamma Xi + Xi Gamma^H) + 2 C`` started from ``Xi_inf`` plus a bump.

    The bump is the rank-one Hermitian field ``a g g^H`` of a Gaussian ``g``
    centred on a jet.
    """
    G = ce2_jet_operator(config, kx)
    C = ce2_jet_forcing(config, kx)
    L, R = -G, -G.conj().T
    forcing = 2.0 * C
    Xi_inf = kron_lyapunov_solve(L, forcing)
    Xi_inf = 0.5 * (Xi_inf + Xi_inf.conj().T)
    row = config.Ny // 4 if config.perturbation_row is None else config.perturbation_row
    width = config.perturbation_width_cells * config.Ly / config.Ny
    dist = config.y - config.y[row]
    dist = (dist + config.Ly / 2) % config.Ly - config.Ly / 2
    g_hat = dft_matrix(config.Ny) @ np.exp(-0.5 * (dist / width) ** 2)
    amp = config.perturbation_amplitude
    if amp is None:
        amp = 0.1 * np.trace(Xi_inf).real / config.Ny
    bump = amp * np.outer(g_hat, g_hat.conj())

    def constant_forcing(Xi, t):
        return forcing

    problem = MatrixOdeProblem(L, R, constant_forcing, Xi_inf + bump, commuting=False,
                               name=f"ce2-kx{kx}")
    return JetMode(kx, problem, Xi_inf, bump)


def physical_diagonal(Xi: np.ndarray) -> np.ndarray:
    """Diagonal of the covariance on the meridional grid (real part)."""
    F = dft_matrix(Xi.shape[0])
    return np.real(np.einsum("ij,jk,ki->i", F.conj().T, Xi, F))


@dataclass
class JetTrajectory:
    """Per-step observables for one zonal mode; ``diverged_at`` is the failing step or None."""
    kx: int
    times: list = field(default_factory=list)
    norms: list = field(default_factory=list)
    distances: list = field(default_factory=list)
    hermitian_errors: list = field(default_factory=list)
    diagonals: list = field(default_factory=list)
    diverged_at: Optional[int] = None
    final: Optional[np.ndarray] = None
    stationary_diagonal: Optional[np.ndarray] = None


def _run_mode(config, kx, dt, steps, form, scheme):
    mode = ce2_jet_problem(config, kx)
    traj = JetTrajectory(kx, stationary_diagonal=physical_diagonal(mode.stationary))

    def observe(t, Xi):
        norm = np.linalg.norm(Xi)
        if not np.isfinite(norm):
            # entries can still be finite when the norm overflows
            raise DivergenceError(len(traj.times), f"covariance norm overflowed at t = {t}")
        traj.times.append(t)
        traj.norms.append(float(norm))
        traj.distances.append(float(np.linalg.norm(Xi - mode.stationary)))
        traj.hermitian_errors.append(float(np.linalg.norm(Xi - Xi.conj().T) / norm))
        traj.diagonals.append(physical_diagonal(Xi))

    observe(mode.problem.t0, mode.problem.Q0)
    try:
        state = integrate(mode.problem, scheme, dt, mode.problem.t0 + steps * dt,
                          observer=observe, Z=mode.generator(dt, form))
        traj.final = state.Q
    except MetdError as exc:
        traj.diverged_at = getattr(exc, "step_index", -1)
    return traj


def integrate_jets(config: Ce2JetConfig, dt: float, steps: int, modes: Sequence[int] | None = None,
                   form: str = "plain", scheme: str = "metd2", parallel: bool = False) -> dict:
    """Integrate every retained zonal mode independently; returns ``{kx: JetTrajectory}``.

    Modes share nothing, so the parallel and serial paths give identical results.
    """
    modes = list(config.modes if modes is None else modes)
    for kx in modes:
        _check_mode(config, kx)
    if parallel:
        with ThreadPoolExecutor() as pool:
            runs = list(pool.map(lambda k: _run_mode(config, k, dt, steps, form, scheme), modes))
    else:
        runs = [_run_mode(config, k, dt, steps, form, scheme) for k in modes]
    return {k: r for k, r in zip(modes, runs)}


# --- CGNN-style Sylvester system ----------------------------------------------------

def random_graph(num_nodes: int, edge_prob: float = 0.3, rng=None) -> np.ndarray:
    """Erdos-Renyi adjacency matrix, resampled until no vertex is isolated."""
    rng = np.random.default_rng(rng)
    for _ in range(10_000):
        upper = np.triu(rng.random((num_nodes, num_nodes)) < edge_prob, 1).astype(float)
        A = upper + upper.T
        if A.sum(axis=1).min() > 0:
            return A
    raise RuntimeError("could not sample a graph without isolated vertices")


@dataclass(frozen=True)
class CgnnInstance:
    problem: MatrixOdeProblem
    adjacency: np.ndarray
    A_reg: np.ndarray
    W: np.ndarray
    E: np.ndarray
    stationary: np.ndarray

    def generator(self, dt: float, bch_order: int = 1):
        """``(Z, expansion)`` for the padded pair ``(dt L, dt (R (+) 0))``."""
        m = self.problem.shape[0]
        return scaled_bch(self.problem.L, pad_operator(self.problem.R, m), dt, bch_order, warn=False)

    def residual(self, Q) -> float:
        """Frobenius norm of the stationary Sylvester residual ``L Q + Q R + E``."""
        return float(np.linalg.norm(self.problem.L @ Q + Q @ self.problem.R + self.E))


def cgnn_sylvester_problem(num_nodes: int = 10, d: int = 4, alpha: float = 0.5, seed: int = 0,
                           w_scale: float = 0.2, edge_prob: float = 0.3) -> CgnnInstance:
    """``Q' = (A~ - I) Q + Q (W - I) + E`` with ``Q(0) = E``.

    ``W`` is a random d x d matrix of Frobenius norm ``w_scale``; ``E`` has
    standard normal entries.
    """
    if not 0 < d < num_nodes:
        raise DimensionError(f"need 0 < d < num_nodes, got d={d}, num_nodes={num_nodes}")
    rng = np.random.default_rng(seed)
    adjacency = random_graph(num_nodes, edge_prob, rng)
    A_reg = build_regularized_adjacency(adjacency, alpha)
    G = rng.standard_normal((d, d))
    W = w_scale * G / np.linalg.norm(G)
    E = rng.standard_normal((num_nodes, d))
    L = A_reg - np.eye(num_nodes)
    R = W - np.eye(d)

    def encoder_input(Q, t):
        return E

    problem = MatrixOdeProblem(L, R, encoder_input, E.copy(), commuting=False, name="cgnn")
    return CgnnInstance(problem, adjacency, A_reg, W, E, kron_sylvester_solve(L, R, E))


# --- convergence harness ---------------------------------------------------------------

EXACT_TOL = 1e-10


@dataclass
class ConvergenceReport:
    scheme: str
    dts: list
    errors: list  # None marks a diverged cell
    slope: Optional[float]
    exact: bool = False

    def __post_init__(self):
        if len(self.dts) != len(self.errors) or len(self.dts) < 3:
            raise ValueError("need at least three (dt, error) cells")
        if any(b >= a for a, b in zip(self.dts, self.dts[1:])):
            raise ValueError("dts must be strictly decreasing")


def fit_slope(dts: Sequence[float], errors: Sequence[float]) -> float:
    """Least-squares slope of log(error) against log(dt)."""
    return float(np.polyfit(np.log(dts), np.log(errors), 1)[0])


def convergence_study(problem: MatrixOdeProblem, schemes: Sequence[str], dts: Sequence[float],
                      t_end: float, reference: str = "stationary", *, stationary=None,
                      generator: Callable[[float], np.ndarray] | None = None,
                      fine_dt: float | None = None, parallel: bool = False) -> list[ConvergenceReport]:
    """Terminal Frobenius error against a reference for every (scheme, dt) cell.

    ``reference`` is ``"stationary"`` (compare with ``stationary``) or
    ``"fine-dt-self"`` (compare with the same scheme at ``fine_dt``, default
    ``min(dts) / 8``). ``generator(dt)`` supplies ``Z`` for non-commuting
    problems.
    """
    dts = sorted((float(d) for d in dts), reverse=True)
    if len(dts) < 3:
        raise ValueError("convergence study needs at least three step sizes")
    if reference == "stationary" and stationary is None:
        raise ValueError("stationary reference requested without a stationary solution")
    if reference not in ("stationary", "fine-dt-self"):
        raise ValueError(f"unknown reference {reference!r}")

    def run(scheme, dt):
        Z = generator(dt) if generator is not None else None
        try:
            return integrate(problem, scheme, dt, t_end, Z=Z).Q
        except MetdError:
            return None

    cells = [(s, dt) for s in schemes for dt in dts]
    if parallel:
        with ThreadPoolExecutor() as pool:
            finals = list(pool.map(lambda c: run(*c), cells))
    else:
        finals = [run(*c) for c in cells]
    results = dict(zip(cells, finals))

    reports = []
    for scheme in schemes:
        if reference == "stationary":
            ref = stationary
        else:
            ref = run(scheme, fine_dt or min(dts) / 8)
        errors = [None if results[(scheme, dt)] is None else float(np.linalg.norm(results[(scheme, dt)] - ref))
                  for dt in dts]
        ok = [(dt, e) for dt, e in zip(dts, errors) if e is not None]
        exact = len(ok) == len(dts) and all(e < EXACT_TOL for _, e in ok)
        slope = None
        if not exact and len(ok) >= 3:
            slope = fit_slope(*zip(*ok))
        reports.append(ConvergenceReport(scheme, dts, errors, slope, exact))
    return reports
