"""Non-square Sylvester fixed point on a random graph: BCH order vs the exact trajectory."""
import argparse

import numpy as np

from metd.oracles import quadrature_voc_step
from metd.problems import cgnn_sylvester_problem
from metd.stepper import integrate

if __name__ == "__main__":
    ap = argparse.ArgumentParser()
    ap.add_argument("--seed", type=int, default=1)
    ap.add_argument("--t-end", type=float, default=50.0)
    args = ap.parse_args()
    inst = cgnn_sylvester_problem(10, 4, 0.5, seed=args.seed)
    p = inst.problem
    Q = p.Q0
    steps = int(round(args.t_end / 0.5))
    for k in range(steps):
        Q = quadrature_voc_step(p.L, p.R, lambda t: inst.E, Q, 0.5 * k, 0.5, panels=2)
    print("dt       order  residual   distance to exact trajectory  gate")
    for dt in (0.02, 0.01, 0.005, 0.0025):
        for order in (1, 2, 3):
            Z, exp = inst.generator(dt, order)
            Qn = integrate(p, "metd2", dt, args.t_end, Z=Z).Q
            print(f"{dt:<8g} {order:5d}  {inst.residual(Qn):.2e}   {np.linalg.norm(Qn - Q):.3e}"
                  f"                     {'ok' if exp.converged_gate else 'violated'}")
