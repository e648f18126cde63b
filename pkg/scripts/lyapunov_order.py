"""Global order on the 2x2 Lyapunov benchmark (error at t = 10 vs the stationary covariance)."""
import argparse

from metd.cli import main

if __name__ == "__main__":
    ap = argparse.ArgumentParser()
    ap.add_argument("--out", default="results/lyapunov_order")
    args = ap.parse_args()
    raise SystemExit(main(["convergence", "--problem", "lyapunov", "--schemes", "metd1,metd2,metd2rk",
                           "--dts", "0.2,0.1,0.05,0.025,0.0125", "--t-end", "10", "--out", args.out, "--force"]))
