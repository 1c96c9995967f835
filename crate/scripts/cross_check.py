#!/usr/bin/env python3
"""Re-solve an exported SDPA sparse file with cvxpy and print the objective.

Usage:
    convexsdp export-sdpa --model monopolist --dim 2 --n 8 --output m.dat-s
    python3 scripts/cross_check.py m.dat-s [reference_objective]

With a reference objective the script exits nonzero unless the two values
agree to 1e-5. Note the exported problem minimizes c.x; the monopolist CLI
reports the revenue, which is the negated objective.
"""
import sys

import numpy as np

try:
    import cvxpy as cp
except ImportError:
    sys.exit("cvxpy is required: pip install cvxpy")


def read_sdpa(path):
    tokens = []
    with open(path) as fh:
        for line in fh:
            line = line.split("*")[0].split('"')[0]
            tokens.append(line)
    lines = [l for l in tokens if l.strip()]
    m = int(lines[0].split()[0])
    nblocks = int(lines[1].split()[0])
    sizes = [int(t) for t in lines[2].replace(",", " ").split()[:nblocks]]
    c = np.array([float(t) for t in lines[3].replace(",", " ").split()[:m]])
    mats = [[np.zeros((abs(s), abs(s))) for s in sizes] for _ in range(m + 1)]
    for line in lines[4:]:
        mat, blk, i, j, val = line.split()[:5]
        mat, blk, i, j = int(mat), int(blk) - 1, int(i) - 1, int(j) - 1
        v = float(val)
        mats[mat][blk][i, j] = v
        mats[mat][blk][j, i] = v
    return m, sizes, c, mats


def main():
    if len(sys.argv) < 2:
        sys.exit(__doc__)
    m, sizes, c, mats = read_sdpa(sys.argv[1])
    x = cp.Variable(m)
    constraints = []
    for b, size in enumerate(sizes):
        expr = -mats[0][b]
        for i in range(m):
            expr = expr + x[i] * mats[i + 1][b]
        if size < 0:
            constraints.append(cp.diag(expr) >= 0)
        else:
            constraints.append(expr >> 0)
    prob = cp.Problem(cp.Minimize(c @ x), constraints)
    prob.solve(solver=cp.SCS, eps=1e-9, max_iters=200000)
    if prob.status not in ("optimal", "optimal_inaccurate"):
        sys.exit(f"external solver status: {prob.status}")
    print(f"external objective: {prob.value:.10f}")
    if len(sys.argv) > 2:
        ref = float(sys.argv[2])
        diff = abs(prob.value - ref)
        print(f"reference: {ref:.10f}  |diff| = {diff:.3e}")
        if diff > 1e-5:
            sys.exit("cross-check FAILED: disagreement above 1e-5")
        print("cross-check PASSED (1e-5)")


if __name__ == "__main__":
    main()
