"""Freeze Shapiro-Wilk reference values computed with scipy."""
import json

import numpy as np
from scipy import stats

rng = np.random.default_rng(20240229)
cases = {
    "arange10": np.arange(1, 11, dtype=float),
    "normal10": rng.normal(5.0, 2.0, 10),
    "exponential50": rng.exponential(1.0, 50),
    "uniform50": rng.uniform(-1.0, 1.0, 50),
    "normal500": rng.normal(0.0, 1.0, 500),
    "lognormal500": rng.lognormal(0.0, 0.5, 500),
}
out = []
for name, x in cases.items():
    r = stats.shapiro(x)
    out.append({"name": name, "sample": [float(v) for v in x], "w": float(r.statistic), "p": float(r.pvalue)})
with open("shapiro_reference.json", "w") as f:
    json.dump(out, f, indent=1)
for c in out:
    print(c["name"], len(c["sample"]), c["w"], c["p"])
