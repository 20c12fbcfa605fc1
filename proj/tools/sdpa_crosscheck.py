#!/usr/bin/env python3
# Copyright 2026 The gmecert Authors
#
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
#
#     http://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.

"""Solve an exported sparse SDPA file with an external solver and compare the
optimum with the value recorded by `gmecert export-sdpa`.

Usage: sdpa_crosscheck.py PROBLEM.json [--tol 1e-6] [--solver CLARABEL]

Exit status: 0 agreement, 1 disagreement, 77 when cvxpy is unavailable
(reported as skipped by ctest).
"""

import argparse
import json
import os
import sys


def read_sdpa(path):
    """Returns (constant, c, block_sizes, entries) of
    minimize c^T x + constant  s.t.  sum_i F_i x_i - F_0 >= 0."""
    constant = 0.0
    tokens = []
    with open(path) as f:
        for line in f:
            s = line.strip()
            if s.startswith('"') or s.startswith("*"):
                if "objective constant" in s:
                    constant = float(s.split()[-1])
                continue
            tokens.append(s.replace(",", " ").replace("{", " ").replace("}", " "))
    lines = [t for t in tokens if t]
    m = int(lines[0].split()[0])
    nblocks = int(lines[1].split()[0])
    sizes = [int(v) for v in lines[2].split()[:nblocks]]
    c = [float(v) for v in lines[3].split()[:m]]
    entries = []
    for t in lines[4:]:
        mat, blk, i, j, v = t.split()[:5]
        entries.append((int(mat), int(blk), int(i), int(j), float(v)))
    return constant, c, sizes, entries


def solve(path, solver):
    import numpy as np
    import scipy.sparse as sp
    import cvxpy as cp

    constant, c, sizes, entries = read_sdpa(path)
    m = len(c)
    x = cp.Variable(m)
    per_block = {b: {} for b in range(1, len(sizes) + 1)}
    for mat, blk, i, j, v in entries:
        per_block[blk].setdefault(mat, []).append((i - 1, j - 1, v))
    constraints = []
    for b, size in enumerate(sizes, start=1):
        n = abs(size)
        mats = per_block[b]
        if size < 0:
            # Diagonal block: one scalar inequality per row.
            rows, cols, vals = [], [], []
            f0 = np.zeros(n)
            for mat, items in mats.items():
                for i, _, v in items:
                    if mat == 0:
                        f0[i] += v
                    else:
                        rows.append(i)
                        cols.append(mat - 1)
                        vals.append(v)
            a = sp.csr_matrix((vals, (rows, cols)), shape=(n, m))
            constraints.append(a @ x - f0 >= 0)
            continue
        # Vectorized symmetric block: vec(sum F_i x_i) = G x.
        rows, cols, vals = [], [], []
        f0 = np.zeros((n, n))
        for mat, items in mats.items():
            for i, j, v in items:
                if mat == 0:
                    f0[i, j] += v
                    if i != j:
                        f0[j, i] += v
                else:
                    rows.append(i * n + j)
                    cols.append(mat - 1)
                    vals.append(v)
                    if i != j:
                        rows.append(j * n + i)
                        cols.append(mat - 1)
                        vals.append(v)
        g = sp.csr_matrix((vals, (rows, cols)), shape=(n * n, m))
        expr = cp.reshape(g @ x, (n, n), order="C") - f0
        constraints.append(0.5 * (expr + expr.T) >> 0)
    problem = cp.Problem(cp.Minimize(np.array(c) @ x + constant), constraints)
    problem.solve(solver=solver)
    return problem.value, problem.status


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("meta", help="sidecar JSON written next to the .dat-s file")
    parser.add_argument("--tol", type=float, default=1e-6)
    parser.add_argument("--solver", default="CLARABEL")
    args = parser.parse_args()
    try:
        import cvxpy  # noqa: F401
    except ImportError:
        print("cvxpy not installed; skipping cross-check")
        return 77
    with open(args.meta) as f:
        meta = json.load(f)
    path = os.path.join(os.path.dirname(os.path.abspath(args.meta)), meta["sdpa_file"])
    value, status = solve(path, args.solver)
    # The file minimizes; maximization problems were exported negated.
    external = -value if meta["sense"] == "maximize" else value
    ours = meta["optimal_value"]
    diff = abs(external - ours)
    ok = diff <= args.tol * max(1.0, abs(ours))
    print(f"{meta['problem']} k={meta['k']} state={meta['state']}: gmecert {ours:.9f} "
          f"{args.solver} {external:.9f} ({status}) |diff| {diff:.2e} -> {'PASS' if ok else 'FAIL'}")
    return 0 if ok else 1


if __name__ == "__main__":
    sys.exit(main())
