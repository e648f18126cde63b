import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile("metd", deadline=None, max_examples=40,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("metd")

ACCEPTANCE_LINES = []


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def acceptance():
    """Record one PASS/FAIL line for an acceptance criterion, then assert it."""

    def record(number, title, ok, detail=""):
        line = f"ACCEPTANCE {number:2d} {'PASS' if ok else 'FAIL'}  {title}  [{detail}]"
        ACCEPTANCE_LINES.append(line)
        print(line)
        assert ok, line

    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1])):
            terminalreporter.write_line(line)


def random_stable(rng, n, shift=1.0):
    A = rng.standard_normal((n, n)) / np.sqrt(n)
    return A - (np.abs(np.linalg.eigvals(A).real).max() + shift) * np.eye(n)


def poly_in(M, coeffs):
    """sum_k c_k M^k, used to build mutually commuting matrices."""
    out = np.zeros_like(M)
    P = np.eye(M.shape[0])
    for c in coeffs:
        out = out + c * P
        P = P @ M
    return out


def one_step_defect(problem, scheme, dt, ref, t_n=0.3):
    """Distance between one step from the exact state and the quadrature oracle step.

    ``ref`` is a dense reference trajectory; the multistep history is taken from it too.
    """
    from metd.oracles import quadrature_voc_step
    from metd.stepper import SCHEMES, StepState, build_table

    Q_n = ref(t_n)
    state = StepState(t_n, Q_n, problem.N(ref(t_n - dt), t_n - dt), step_index=1)
    new = SCHEMES[scheme](state, build_table(problem, dt), problem)
    exact = quadrature_voc_step(problem.L, problem.R, lambda t: problem.N(ref(t), t), Q_n, t_n, dt)
    return float(np.linalg.norm(new.Q - exact))
