"""Splitting-error sweep for Example61 at T=1: N = 16 .. 512, CSV + gnuplot script."""
import argparse
import sys

from mvchaos.cli import main, plot_script

ap = argparse.ArgumentParser(description=__doc__)
ap.add_argument("--out", default="runs/finite_horizon")
ap.add_argument("--seed", type=int, default=42)
ap.add_argument("--paper-scale", action="store_true", help="U = 500 instead of 100")
args = ap.parse_args()

argv = ["chaos", "--out", args.out, "--seed", str(args.seed), "--set", "horizon.T=1"]
if args.paper_scale:
    argv.append("--paper-scale")
code = main(argv)
if code == 0:
    with open(f"{args.out}/plot.gp", "w") as fh:
        fh.write(plot_script([f"{args.out}/results.csv"], f"{args.out}/chaos_T1.png"))
sys.exit(code)
