"""Regenerate the shipped experiment files in configs/.

    python3 scripts/make_configs.py [--check]

``--check`` exits 1 if any file on disk differs from what would be written.
"""

import argparse
import json
import math
import sys
from pathlib import Path

import numpy as np

CONFIGS = Path(__file__).resolve().parent.parent / "configs"


def mixture_lipschitz(diag, weight, x0):
    """L for 1/2 x'Dx + weight ||x||^3/3 on the sublevel set of x0.

    mu = min(D) gives ||x||^2 <= 2 F(x0) / mu there, and the cubic term's Hessian
    has norm 2 ||x||.
    """
    x0 = np.asarray(x0, float)
    F0 = 0.5 * x0 @ (np.asarray(diag) * x0) + weight * np.linalg.norm(x0) ** 3 / 3.0
    radius = math.sqrt(2.0 * F0 / min(diag))
    return max(diag) + 2.0 * weight * radius


def build():
    out = {}
    out["quadratic_demo.json"] = {
        "problem": {"kind": "quadratic", "dimension": 5,
                    "A": {"random_spd": {"cond": 10.0}}, "b": {"minimizer": [1, -1, 0.5, 0, 2]},
                    "x0": {"distance": 1.0}},
        "solver": "adaptive_cubic",
        "config": {"H0": 1.0, "epsilon": 1e-6},
        "seed": 0,
        "out": "runs/quadratic_demo",
    }
    out["quadratic_n20.json"] = {
        "problem": {"kind": "quadratic", "dimension": 20,
                    "A": {"random_spd": {"cond": 100.0}},
                    "b": {"minimizer": [float(v) for v in np.linspace(-1.0, 1.0, 20)]},
                    "x0": {"distance": 1.0}},
        "solver": "adaptive_cubic",
        "config": {"H0": 1.0, "epsilon": 1e-8},
        "seed": 1,
        "out": "runs/quadratic_n20",
    }
    for p, nu in ((3.0, 1.0), (2.5, 0.5)):
        tag = f"{p:g}".replace(".", "_")
        out[f"powered_norm_p{tag}.json"] = {
            "problem": {"kind": "powered_norm", "dimension": 10, "p": p,
                        "center": [float(v) for v in np.linspace(-1.0, 1.0, 10)],
                        "x0": {"distance": 5.0}},
            "solver": "adaptive_cubic",
            # H0 = kappa(1) = H_f(1) = 2 for p = 3; the p = 2.5 run starts low to exercise increases
            "config": {"H0": 2.0 if p == 3.0 else 0.01, "epsilon": 1e-8},
            "verify_nu": nu,
            "seed": 0,
            "out": f"runs/powered_norm_p{tag}",
        }
    out["logsumexp.json"] = {
        "kind": "logsumexp", "dimension": 8, "a": {"random": {"m": 20, "scale": 1.0}}, "seed": 0,
    }
    out["quadratic_plus_cubic.json"] = {
        "problem": {"kind": "sum", "dimension": 5, "weights": [1.0, 0.5],
                    "terms": [{"kind": "quadratic", "A": {"random_spd": {"cond": 10.0}}},
                              {"kind": "powered_norm", "p": 3}],
                    "x0": {"distance": 10.0}},
        "solver": "adaptive_cubic",
        "config": {"H0": 1.0, "epsilon": 1e-12},
        "seed": 3,
        "out": "runs/quadratic_plus_cubic",
    }
    diag, weight, x0 = [1e4, 1.0], 0.01, [1.0, 10.0]
    out["mixture_bench.json"] = {
        "problem": {"kind": "sum", "dimension": 2, "weights": [1.0, weight],
                    "terms": [{"kind": "quadratic", "A": {"diag": diag}},
                              {"kind": "powered_norm", "p": 3}],
                    "x0": x0,
                    "known": {"lipschitz_gradient": mixture_lipschitz(diag, weight, x0)}},
        "config": {"H0": 1.0, "epsilon": 1e-6, "max_outer_iters": 1000000},
        "seed": 0,
        "bench_out": "runs/mixture_bench.csv",
    }
    return out


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.split("\n")[0])
    ap.add_argument("--check", action="store_true")
    args = ap.parse_args(argv)
    stale = []
    CONFIGS.mkdir(exist_ok=True)
    for name, doc in build().items():
        text = json.dumps(doc, indent=2) + "\n"
        path = CONFIGS / name
        if args.check:
            if not path.exists() or path.read_text() != text:
                stale.append(name)
        else:
            path.write_text(text)
            print(f"wrote {path}")
    if stale:
        print("stale: " + ", ".join(stale), file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
