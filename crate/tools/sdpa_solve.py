#!/usr/bin/env python3
"""Solve a dat-s SDP file with cvxpy and print an SDPA-style report.

    minimise c.x  subject to  sum_i F_i x_i - F_0 >= 0 (PSD per block)

Usage: sdpa_solve.py problem.dat-s [--solver CLARABEL]
Prints `phase.value`, `objValPrimal` and `objValDual` lines.
"""
import argparse
import re
import sys

import numpy as np
import scipy.sparse as sp
import cvxpy as cp


def read_dats(path):
    with open(path) as fh:
        lines = [l for l in fh.read().splitlines() if l.strip()]
    while lines and lines[0][0] in '*"':
        lines.pop(0)
    clean = [re.sub(r"[{}(),]", " ", l).split() for l in lines]
    m = int(clean[0][0])
    nblocks = int(clean[1][0])
    sizes = [int(t) for t in clean[2][:nblocks]]
    c = np.array([float(t) for t in clean[3][:m]])
    entries = [(int(a), int(b), int(i), int(j), float(v)) for a, b, i, j, v in clean[4:]]
    return m, sizes, c, entries


def build(m, sizes, c, entries):
    x = cp.Variable(m) if m else None
    per_block = [dict(rows=[], cols=[], vals=[], const={}) for _ in sizes]
    for mat, blk, i, j, v in entries:
        b = per_block[blk - 1]
        n = abs(sizes[blk - 1])
        pairs = {(i - 1, j - 1), (j - 1, i - 1)} if sizes[blk - 1] > 0 else {(i - 1, i - 1)}
        for (r, s) in pairs:
            flat = s * n + r if sizes[blk - 1] > 0 else r
            if mat == 0:
                b["const"][flat] = b["const"].get(flat, 0.0) - v
            else:
                b["rows"].append(flat)
                b["cols"].append(mat - 1)
                b["vals"].append(v)
    constraints, blocks = [], []
    for size, b in zip(sizes, per_block):
        n = abs(size)
        length = n * n if size > 0 else n
        const = np.zeros(length)
        for k, v in b["const"].items():
            const[k] = v
        expr = const
        if m:
            a = sp.csr_matrix((b["vals"], (b["rows"], b["cols"])), shape=(length, m))
            expr = a @ x + const
        if size > 0:
            mat = cp.reshape(expr, (n, n), order="F")
            con = (mat + mat.T) / 2 >> 0
        else:
            con = expr >= 0
        constraints.append(con)
        blocks.append((size, const))
    objective = cp.Minimize(c @ x) if m else cp.Minimize(0)
    return cp.Problem(objective, constraints), blocks


PHASES = {
    cp.OPTIMAL: "pdOPT",
    cp.OPTIMAL_INACCURATE: "pdFEAS",
    cp.INFEASIBLE: "pINF_dFEAS",
    cp.INFEASIBLE_INACCURATE: "pINF",
    cp.UNBOUNDED: "pUNBD",
    cp.UNBOUNDED_INACCURATE: "pUNBD",
}


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("path")
    ap.add_argument("--solver", default="CLARABEL")
    args = ap.parse_args()
    try:
        m, sizes, c, entries = read_dats(args.path)
    except (OSError, ValueError, IndexError) as e:
        print(f"cannot read {args.path}: {e}", file=sys.stderr)
        return 2
    prob, blocks = build(m, sizes, c, entries)
    try:
        prob.solve(solver=args.solver)
    except cp.error.SolverError as e:
        print(f"phase.value = noINFO\n# {e}")
        return 0
    phase = PHASES.get(prob.status, "noINFO")
    print(f"phase.value = {phase}")
    if phase in ("pdOPT", "pdFEAS"):
        primal = float(prob.value)
        # Dual objective F_0 . Y, with F_0 the negated constant parts.
        dual = 0.0
        for con, (size, const) in zip(prob.constraints, blocks):
            y = np.asarray(con.dual_value, dtype=float)
            dual += float(-const @ (y.flatten(order="F") if size > 0 else y))
        print(f"   objValPrimal = {primal:.16e}")
        print(f"   objValDual   = {dual:.16e}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
