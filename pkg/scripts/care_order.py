"""Global order on the dynamical Riccati benchmark for several seeds of D and X(0)."""
import argparse

from metd.problems import care_problem, convergence_study

DTS = [0.2, 0.1, 0.05, 0.025, 0.0125]

if __name__ == "__main__":
    ap = argparse.ArgumentParser()
    ap.add_argument("--seeds", type=int, default=5)
    args = ap.parse_args()
    print("seed  metd1  metd2  metd2rk")
    for seed in range(args.seeds):
        p, X, _ = care_problem(seed)
        try:
            reps = convergence_study(p, ["metd1", "metd2", "metd2rk"], DTS, 100.0, stationary=X)
        except Exception as exc:  # some seeds leave the basin of attraction
            print(f"{seed:4d}  failed: {exc}")
            continue
        cells = ["  n/a" if r.slope is None else f"{r.slope:5.2f}" for r in reps]
        print(f"{seed:4d}  " + "  ".join(cells))
