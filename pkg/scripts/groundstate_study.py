"""Resolution ladder for the sharp constant: descent vs shooting.

    python scripts/groundstate_study.py [--a 1 --b 0.5 --sigma 1] [--ns 1024 2048 4096 8192]
"""
import argparse
import time

from inls.grid import RadialGrid
from inls.groundstate import ground_state
from inls.params import validate_params


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--a", type=float, default=1.0)
    ap.add_argument("--b", type=float, default=0.5)
    ap.add_argument("--sigma", type=float, default=1.0)
    ap.add_argument("--ns", type=int, nargs="+", default=[1024, 2048, 4096, 8192])
    ap.add_argument("--rmax", type=float, default=12.0)
    args = ap.parse_args()
    params = validate_params(args.a, args.b, args.sigma)

    prev = None
    print("n       K_a (descent)   K_a (shooting)  gap       change    iters  wall")
    for n in args.ns:
        t0 = time.perf_counter()
        res = ground_state(params, RadialGrid(args.rmax, n))
        change = "" if prev is None else f"{abs(res.K_a_hat - prev) / res.K_a_hat:.2e}"
        print(f"{n:<7d} {res.K_a_hat:.10f}  {res.shooting['K']:.10f}  {res.method_gap:.2e}  "
              f"{change:8s}  {res.iterations:5d}  {time.perf_counter() - t0:.1f}s")
        prev = res.K_a_hat


if __name__ == "__main__":
    main()
