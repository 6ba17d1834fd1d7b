"""Compare the compiled and pure-Python search kernels.

Usage::

    python3 benchmarks/bench_kernels.py [--sizes 100 300] [--repeat 3]

Each kernel runs on the same inputs under both backends; the table lists the
best wall time of ``repeat`` runs and the speed-up, and the script checks that
both backends return the same answer.
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from segreg._kernels import compiled_backend, python_backend
from segreg.search import _knot_bound


def _inputs(n: int, m_max: int, seed: int = 0) -> dict:
    rng = np.random.default_rng(seed)
    t = np.sort(rng.random(n))
    y = np.abs(t - 0.5) + 0.3 * rng.standard_normal(n)
    y -= y.mean()
    starts = np.arange(n + 1, dtype=np.int64)
    cand_n = np.arange(3, n - 2, dtype=np.int64)
    cand_t = t[cand_n - 1].copy()
    return {"t": t, "y": y, "starts": starts, "cand_t": cand_t, "cand_n": cand_n,
            "pattern": np.ones(m_max, dtype=np.int8), "m_max": m_max,
            "vbound": _knot_bound(t, cand_t, y)}


def _cases(backend, d):
    cost = python_backend.segment_costs(d["t"], d["y"], 2, d["starts"])
    return {
        "segment_costs": lambda: backend.segment_costs(d["t"], d["y"], 2, d["starts"]),
        "partition_dp": lambda: backend.partition_dp(cost, d["m_max"]),
        "continuous_dp": lambda: backend.continuous_dp(d["t"], d["y"], d["cand_t"], d["cand_n"],
                                                       d["pattern"], 3, d["vbound"]),
    }


def _best_time(fn, repeat: int):
    best, out = np.inf, None
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t0)
    return best, out


def _same(a, b) -> bool:
    a0 = a[0] if isinstance(a, tuple) else a
    b0 = b[0] if isinstance(b, tuple) else b
    return bool(np.allclose(np.asarray(a0), np.asarray(b0), rtol=1e-9, atol=1e-9,
                            equal_nan=True))


def run(sizes=(100, 300), m_max: int = 4, repeat: int = 3) -> list:
    """Timing rows ``(kernel, n, python_s, compiled_s, speedup, agree)``."""
    if compiled_backend is None:
        raise SystemExit("compiled backend not available; build with pip install -e .")
    rows = []
    for n in sizes:
        d = _inputs(n, m_max)
        py, cc = _cases(python_backend, d), _cases(compiled_backend, d)
        for name in py:
            tp, op = _best_time(py[name], repeat)
            tc, oc = _best_time(cc[name], repeat)
            rows.append((name, n, tp, tc, tp / tc if tc > 0 else np.inf, _same(op, oc)))
    return rows


def main(argv=None) -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--sizes", type=int, nargs="+", default=[100, 300])
    ap.add_argument("--m-max", type=int, default=4)
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args(argv)
    rows = run(tuple(args.sizes), args.m_max, args.repeat)
    print(f"{'kernel':<16} {'n':>5} {'python s':>10} {'compiled s':>11} {'speed-up':>9} {'agree':>6}")
    for name, n, tp, tc, sp, ok in rows:
        print(f"{name:<16} {n:>5} {tp:10.4f} {tc:11.5f} {sp:9.1f} {str(ok):>6}")


if __name__ == "__main__":
    main()
