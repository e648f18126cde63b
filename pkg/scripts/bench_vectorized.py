"""Per-step cost of the matrix form vs the Kronecker-vectorized ETD1 step."""
import argparse

from metd.cli import bench_sizes

if __name__ == "__main__":
    ap = argparse.ArgumentParser()
    ap.add_argument("--sizes", default="2,4,8")
    ap.add_argument("--repeats", type=int, default=15)
    args = ap.parse_args()
    prev = None
    for r in bench_sizes([int(s) for s in args.sizes.split(",")], args.repeats):
        ratio = r["vectorized"] / r["matrix"]
        grow = "" if prev is None else f"  ratio growth {ratio / prev:.1f}x"
        print(f"n={r['n']}: matrix {r['matrix']:.2e} s  vectorized {r['vectorized']:.2e} s  ratio {ratio:.1f}{grow}")
        prev = ratio
