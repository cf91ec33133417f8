"""Assumption audit of the built-in models, plus the exponent bookkeeping for Example61."""
import argparse

from mvchaos import verify as v
from mvchaos.model import BUILTIN_MODELS

ap = argparse.ArgumentParser(description=__doc__)
ap.add_argument("--samples", type=int, default=100_000)
ap.add_argument("--seed", type=int, default=0)
args = ap.parse_args()

for name, factory in BUILTIN_MODELS.items():
    model = factory()
    print(f"\n== {name}")
    for rep in v.run_audit(model, n_samples=args.samples, seed=args.seed):
        print(rep.table_row())
        if rep.note:
            print(f"      note: {rep.note}")
        for viol in rep.violations[:2]:
            print(f"      e.g. lhs={viol.lhs:.6g} rhs={viol.rhs:.6g} inputs={ {k: val for k, val in viol.inputs.items()} }")

m = BUILTIN_MODELS["example61"]()
print(f"\nphi maximum: {v.phi_extremum():.16f}  (4/9 = {4 / 9:.16f})")
print(f"Example61 largest p passing the declared coercivity bound: {v.largest_feasible_p(m)}")
print(f"exponent required by the finite-horizon results: {v.theorem_exponent_requirement(m.growth):g}")
