"""Spearman rho and p values from scipy, plus exact permutation p by
enumerating every ordering of the y ranks."""
import itertools
import json
import random
import sys

import numpy as np
from scipy.stats import rankdata, spearmanr

FIXED = [
    ([1, 2, 2, 4], [1, 3, 2, 4]),
    ([1, 2, 3, 4, 5, 6, 7], [2, 1, 4, 3, 7, 5, 6]),
    ([3, 1, 4, 1, 5, 9, 2, 6], [2, 7, 1, 8, 2, 8, 1, 8]),
    ([10, 20, 30], [3, 1, 2]),
]


def exact_p(x, y):
    rx, ry = rankdata(x), rankdata(y)
    obs = abs(np.corrcoef(rx, ry)[0, 1]) - 1e-12
    hits = total = 0
    for perm in itertools.permutations(ry):
        total += 1
        if abs(np.corrcoef(rx, perm)[0, 1]) >= obs:
            hits += 1
    return hits / total


def main():
    rng = random.Random(7)
    cases = list(FIXED)
    while len(cases) < 40:
        n = rng.randint(3, 30)
        x = [rng.randint(0, 6) for _ in range(n)]
        y = [rng.randint(0, 6) for _ in range(n)]
        if len(set(x)) > 1 and len(set(y)) > 1:
            cases.append((x, y))
    out = []
    for x, y in cases:
        r = spearmanr(x, y)
        row = {"x": x, "y": y, "rho": float(r.statistic), "p": float(r.pvalue)}
        if len(x) <= 8:
            row["p_exact"] = exact_p(x, y)
        out.append(row)
    json.dump(out, sys.stdout, indent=1)
    sys.stdout.write("\n")


if __name__ == "__main__":
    main()
