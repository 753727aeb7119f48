"""Compute reference values with the independent oracles and freeze them to JSON.

Run from the repository root:  python3 scripts/freeze_oracles.py
The output is tests/data/oracle_values.json; tests compare the package against it.
"""

from __future__ import annotations

import json
import math
import sys
from pathlib import Path

import numpy as np

ROOT = Path(__file__).resolve().parents[1]
sys.path.insert(0, str(ROOT / "tests"))

import oracles  # noqa: E402


def basis_cases(rng):
    cases = []
    # linear hat on {0,0,1,2,2}: N_{1,0}(0.5) = 0.5, C_0 = (t_2 - t_0) = 1
    cases.append({"degree": 1, "a": 0.0, "b": 2.0, "interior": [1.0], "k": 0, "x": 0.5})
    for _ in range(40):
        degree = int(rng.integers(1, 4))
        interior = sorted(rng.uniform(0.05, 0.95, size=int(rng.integers(1, 6))).tolist())
        n = len(interior) + 1
        cases.append(
            {
                "degree": degree,
                "a": 0.0,
                "b": 1.0,
                "interior": interior,
                "k": int(rng.integers(-degree, n)),
                "x": float(rng.uniform(0, 0.999)),
            }
        )
    for c in cases:
        full = [c["a"]] * (c["degree"] + 1) + c["interior"] + [c["b"]] * (c["degree"] + 1)
        idx = c["k"] + c["degree"]  # position in the padded list
        normalized = oracles.cox_de_boor(full, idx, c["degree"], c["x"])
        C = (-1) ** (c["degree"] + 1) * (full[idx + c["degree"] + 1] - full[idx])
        c["normalized"] = normalized
        c["unnormalized"] = normalized / C
    return cases


def divided_difference_cases(rng):
    cases = []
    for _ in range(30):
        degree = int(rng.integers(0, 4))
        nodes = sorted(rng.uniform(0, 1, size=degree + 2).tolist())
        x = float(rng.uniform(0, 1))
        cases.append({"degree": degree, "nodes": nodes, "x": x, "value": oracles.truncated_power_bspline(nodes, degree, x)})
    return cases


def split_cases(rng):
    cases = []
    for _ in range(60):
        L = int(rng.integers(4, 21))
        f = rng.integers(-5, 6, size=L).astype(float) if rng.uniform() < 0.4 else rng.normal(size=L)
        p = [1, 2, math.inf][int(rng.integers(0, 3))]
        best, alphas = oracles.all_split_minima(f, 1.0, p)
        cases.append({"f": f.tolist(), "p": "inf" if p == math.inf else p, "best": best, "argmins": alphas})
    return cases


def lstsq_cases(rng):
    from freeknot.spline import basis_matrix  # design matrix only; the solve is independent

    cases = []
    for _ in range(10):
        N = 50
        x = np.linspace(0, 1, N)
        interior = np.sort(rng.uniform(0.1, 0.9, size=5))
        while np.min(np.diff(interior)) < 0.05:
            interior = np.sort(rng.uniform(0.1, 0.9, size=5))
        f = np.sin(4 * x) + 0.1 * rng.normal(size=N)
        full = np.concatenate([[0.0] * 4, interior, [1.0] * 4])
        phi = basis_matrix(full, 3, x)
        cases.append({"interior": interior.tolist(), "f": f.tolist(), "objective": oracles.lstsq_objective(phi, f)})
    return cases


def main():
    rng = np.random.default_rng(20240601)
    out = {
        "basis": basis_cases(rng),
        "divided_difference": divided_difference_cases(rng),
        "splits": split_cases(rng),
        "lstsq": lstsq_cases(rng),
        # closed forms
        "e2_identity_continuum": {"f": "x on [0,1]", "e2_at_half": -0.3125, "improvement_at_half": -0.0625},
        "bic_example": {"N": 201, "rss": math.e, "n": 6, "degree": 3, "bic": 201 + math.log(201 * 14)},
        "uniform_variance": {"lo": -0.3, "hi": 0.3, "variance": 0.6**2 / 12},
    }
    path = ROOT / "tests" / "data" / "oracle_values.json"
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(out, indent=1, sort_keys=True) + "\n")
    print(f"wrote {path}")


if __name__ == "__main__":
    main()
