#!/usr/bin/env python3
"""End-to-end round trip through a real solver.

Emits a model with the CLI, solves it with the HiGHS backend shipped in
scipy, verifies the resulting solution file, and compares the solver optimum
against the exhaustive search. Exits 77 (skip) when scipy is unavailable.

Usage: solver_roundtrip.py <molmip-binary> <solve_meta.py>
"""

import json
import os
import re
import subprocess
import sys
import tempfile


def fixed_model():
    # Deterministic small weights; no randomness so the test is reproducible.
    def mat(rows, cols, phase):
        return [[(((r * 7 + c * 3 + phase) % 11) - 5) / 10.0 for c in range(cols)]
                for r in range(rows)]

    return {
        "pooling": "sum",
        "graph_layers": [{
            "w_self": mat(3, 16, 0),
            "w_neigh": mat(3, 16, 4),
            "bias": [0.2, -0.1, 0.3],
            "activation": "relu",
        }],
        "dense_layers": [{
            "w": [[-0.7, 0.4, -0.9]],
            "bias": [0.05],
            "activation": "identity",
        }],
    }


def run(args):
    proc = subprocess.run(args, capture_output=True, text=True)
    return proc.returncode, proc.stdout + proc.stderr


def main():
    try:
        import scipy.optimize  # noqa: F401
    except ImportError:
        print("scipy not available; skipping")
        return 77
    cli, solver = sys.argv[1], sys.argv[2]

    with tempfile.TemporaryDirectory() as tmp:
        model_path = os.path.join(tmp, "model.json")
        with open(model_path, "w") as f:
            json.dump(fixed_model(), f)

        for n in (2, 3):
            lp = os.path.join(tmp, f"model{n}.lp")
            sol = os.path.join(tmp, f"model{n}.sol")
            code, out = run([cli, "build-milp", "--dataset", "qm7", "--n", str(n),
                             "--model", model_path, "--variant", "bigm",
                             "--symmetry", "on", "-o", lp])
            assert code == 0, out
            code, out = run([sys.executable, solver, lp + ".meta", sol])
            assert code == 0, out
            solved = float(re.search(r"objective=(\S+)", out).group(1))

            code, out = run([cli, "verify", "--model-file", lp + ".meta",
                             "--solution", sol])
            assert code == 0 and "pass=true" in out, out

            code, out = run([cli, "brute-opt", "--dataset", "qm7", "--n", str(n),
                             "--level", "s3", "--model", model_path, "-o", os.devnull])
            assert code == 0, out
            brute = float(re.search(r"value=(\S+)", out).group(1))

            gap = abs(solved - brute)
            print(f"n={n}: solver={solved!r} exhaustive={brute!r} gap={gap:.3g}")
            assert gap <= 1e-9, "solver and exhaustive optima disagree"
    print("ok")
    return 0


if __name__ == "__main__":
    sys.exit(main())
