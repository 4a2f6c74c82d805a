"""Run every preset (or the named ones) and print a one-line summary each.

    python scripts/run_presets.py --out runs/presets [--sweep] [names...]
"""
import argparse
import json
from pathlib import Path

from inls.cli import PRESETS, run_preset


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("names", nargs="*", default=sorted(PRESETS))
    ap.add_argument("--out", default="runs/presets")
    ap.add_argument("--force", action="store_true")
    args = ap.parse_args()
    root = Path(args.out)
    for name in args.names:
        info = run_preset(PRESETS[name], root / name, args.force)
        ana = info["analysis"]
        fit = ana.get("fit", {})
        print(f"{name:20s} {info['termination']:18s} t = {info['t_final']:.6f}  "
              f"steps = {info['steps']:6d}  wall = {info['wall_seconds']:.1f}s  "
              f"T* = {fit.get('t_star', float('nan')):.6f}  p = {fit.get('rate_p', float('nan')):.4f}"
              + (f"  [{ana['fit_error']}]" if "fit_error" in ana else ""))
    (root / "index.json").write_text(json.dumps(sorted(args.names)) + "\n")


if __name__ == "__main__":
    main()
