#!/usr/bin/env python3
"""Reference external-solver driver.

Reads the .meta sidecar written by `molmip build-milp`, solves the model with
scipy's HiGHS-backed MILP interface, and writes a `name value` solution file
that `molmip verify` accepts. Only linear (big-M) models are supported;
bilinear models need a MIQCP-capable solver.

Usage: solve_meta.py model.lp.meta solution.txt
"""

import json
import sys

import numpy as np
from scipy import optimize, sparse


def main() -> int:
    if len(sys.argv) != 3:
        print(__doc__.strip(), file=sys.stderr)
        return 2
    with open(sys.argv[1]) as f:
        meta = json.load(f)

    variables = meta["variables"]
    nvar = len(variables)
    lo = np.array([v["lo"] for v in variables])
    hi = np.array([v["hi"] for v in variables])
    integrality = np.array([1 if v["kind"] == "binary" else 0 for v in variables])

    c = np.zeros(nvar)
    for var, coef in meta["objective"]:
        c[var] += coef

    rows, cols, vals = [], [], []
    lower, upper = [], []
    for i, con in enumerate(meta["constraints"]):
        if con.get("quad"):
            print("bilinear model: not solvable with this driver", file=sys.stderr)
            return 1
        for var, coef in con["lin"]:
            rows.append(i)
            cols.append(var)
            vals.append(coef)
        rhs = con["rhs"]
        sense = con["sense"]
        lower.append(rhs if sense in ("=", ">=") else -np.inf)
        upper.append(rhs if sense in ("=", "<=") else np.inf)

    a = sparse.csc_matrix((vals, (rows, cols)), shape=(len(meta["constraints"]), nvar))
    res = optimize.milp(
        c,
        constraints=optimize.LinearConstraint(a, lower, upper),
        bounds=optimize.Bounds(lo, hi),
        integrality=integrality,
        options={"mip_rel_gap": 0.0},
    )
    if not res.success:
        print(f"solve failed: {res.message}", file=sys.stderr)
        return 1

    with open(sys.argv[2], "w") as out:
        out.write(f"# objective value = {float(res.fun)!r}\n")
        for v, x in zip(variables, res.x):
            value = int(round(x)) if v["kind"] == "binary" else float(x)
            out.write(f"{v['name']} {value!r}\n")
    print(f"objective={float(res.fun)!r}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
