#!/usr/bin/env python3
"""Benchmark the compiled kernel backend against the pure-Python fallback.

Runs each workload in a subprocess with PATLAS_BACKEND forced, so the whole
stack (including the fit driver) uses the backend under test.

    python benchmarks/bench_kernels.py [--pairs 120000] [--fit-rows 700]
"""

import argparse
import json
import os
import subprocess
import sys
import time


def run_worker(backend: str, args) -> dict:
    env = dict(os.environ, PATLAS_BACKEND=backend)
    cmd = [sys.executable, __file__, "--worker",
           "--pairs", str(args.pairs), "--fit-rows", str(args.fit_rows)]
    out = subprocess.run(cmd, env=env, capture_output=True, text=True, check=True)
    return json.loads(out.stdout.strip().splitlines()[-1])


def worker(args) -> None:
    import numpy as np

    from patlas import coclus, kernels, synth

    results = {"backend": kernels.BACKEND}

    pool = synth.name_pool(n_identities=300, n_junk_codes=260,
                           junk_names_per_code=22, seed=1)
    names = sorted({n for names in pool.names_by_code.values() for n in names})
    rng = np.random.default_rng(0)
    left = rng.integers(0, len(names), size=args.pairs).astype(np.int64)
    right = rng.integers(0, len(names), size=args.pairs).astype(np.int64)
    prepared = [kernels.prepare_name(n) for n in names]
    t0 = time.perf_counter()
    scores = kernels.score_pairs(prepared, left, right)
    results["pair_scoring_s"] = time.perf_counter() - t0
    results["pair_checksum"] = float(scores.sum())

    m, _, _ = synth.planted_matrix(args.fit_rows, args.fit_rows // 10, 7,
                                   0.8, 0.02, seed=3)
    t0 = time.perf_counter()
    fitted = coclus.fit(m, 7, seed=2, restarts=10)
    results["fit_s"] = time.perf_counter() - t0
    results["fit_modularity"] = fitted.modularity

    t0 = time.perf_counter()
    curve = coclus.modularity_curve(m, range(2, 13), seed=2, restarts=10)
    results["curve_s"] = time.perf_counter() - t0
    results["curve_checksum"] = sum(q for _, q in curve.points)
    print(json.dumps(results))


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--pairs", type=int, default=120_000)
    parser.add_argument("--fit-rows", type=int, default=700)
    parser.add_argument("--worker", action="store_true", help=argparse.SUPPRESS)
    args = parser.parse_args()
    if args.worker:
        worker(args)
        return 0

    rows = []
    for backend in ("py", "c"):
        try:
            rows.append(run_worker(backend, args))
        except subprocess.CalledProcessError as exc:
            print(f"backend {backend!r} unavailable:\n{exc.stderr}", file=sys.stderr)
    if not rows:
        return 1

    workloads = [("pair_scoring_s", f"pair scoring ({args.pairs} pairs)"),
                 ("fit_s", f"co-cluster fit ({args.fit_rows} rows, g=7, 10 restarts)"),
                 ("curve_s", "modularity curve (g 2..12)")]
    print(f"\n{'workload':<45}" + "".join(f"{r['backend']:>12}" for r in rows) +
          ("     speedup" if len(rows) == 2 else ""))
    for key, label in workloads:
        line = f"{label:<45}" + "".join(f"{r[key]:>11.3f}s" for r in rows)
        if len(rows) == 2:
            line += f"{rows[0][key] / rows[1][key]:>11.1f}x"
        print(line)
    for check in ("pair_checksum", "fit_modularity", "curve_checksum"):
        values = {round(r[check], 9) for r in rows}
        if len(values) != 1:
            print(f"WARNING: backends disagree on {check}: {values}", file=sys.stderr)
            return 1
    print("\nbackends agree on all checksums")
    return 0


if __name__ == "__main__":
    sys.exit(main())
