"""Blow-up time and rate of a preset under dt and n refinement.

    python scripts/blowup_refinement.py [--preset theorem1-radial]
"""
import argparse
from dataclasses import replace

from inls import blowup
from inls.cli import PRESETS
from inls.errors import AnalysisError
from inls.solver import evolve


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--preset", default="theorem1-radial", choices=sorted(PRESETS))
    ap.add_argument("--dts", type=float, nargs="+", default=[1e-4, 5e-5])
    ap.add_argument("--ns", type=int, nargs="+", default=[4096, 8192])
    args = ap.parse_args()
    pre = PRESETS[args.preset]
    params = pre.config.params

    for n in args.ns:
        for dt in args.dts:
            cfg = replace(pre.config, dt0=dt, n=n)
            u0, amp, _ = replace(pre, config=cfg).initial_state()
            traj = evolve(u0, cfg)
            head = f"n = {n:5d} dt = {dt:.1e} A = {amp:.6f} {traj.termination} t = {traj.final_state.t:.7f}"
            try:
                fit = blowup.analyze(traj, params)
            except AnalysisError as exc:
                print(f"{head}  fit failed: {exc}")
                continue
            alpha = "n/a" if fit.alpha_hat is None else f"{fit.alpha_hat:.3f}"
            print(f"{head}  T* = {fit.t_star:.7f} p = {fit.rate_p:.4f} "
                  f"margin = {fit.margin_ratio:.3f} alpha = {alpha}")


if __name__ == "__main__":
    main()
