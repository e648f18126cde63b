"""Reduced-grid jets run: METD2 (plain and BCH2 generators) vs RK4 at large dt, plus a dt scan."""
import argparse

import numpy as np

from metd.errors import DivergenceError
from metd.problems import Ce2JetConfig, ce2_jet_problem, integrate_jets
from metd.stepper import integrate, integrate_rk4

if __name__ == "__main__":
    ap = argparse.ArgumentParser()
    ap.add_argument("--dt", type=float, default=0.5)
    ap.add_argument("--steps", type=int, default=200)
    args = ap.parse_args()
    cfg = Ce2JetConfig()

    for form in ("plain", "bch2"):
        runs = integrate_jets(cfg, args.dt, args.steps, form=form)
        for kx, r in runs.items():
            status = f"diverged at step {r.diverged_at}" if r.diverged_at is not None else \
                f"distance {r.distances[0]:.2e} -> {r.distances[-1]:.2e}, hermitian err {max(r.hermitian_errors):.2e}"
            print(f"{form:5s} kx={kx}: {status}")

    for kx in cfg.modes:
        try:
            integrate_rk4(ce2_jet_problem(cfg, kx).problem, args.dt, args.steps)
            print(f"rk4   kx={kx}: bounded")
        except DivergenceError as exc:
            print(f"rk4   kx={kx}: non-finite at step {exc.step_index}")

    print("\ndt scan, kx = 1, t = 100: terminal distance to the stationary covariance")
    mode = ce2_jet_problem(cfg, 1)
    for dt in (0.5, 0.1, 0.02, 0.005):
        Xi = integrate(mode.problem, "metd2", dt, 100.0, Z=mode.generator(dt)).Q
        herm = np.linalg.norm(Xi - Xi.conj().T) / np.linalg.norm(Xi)
        print(f"dt={dt:<6g} distance {np.linalg.norm(Xi - mode.stationary):.3e}  hermitian err {herm:.2e}")
