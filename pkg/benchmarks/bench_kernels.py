"""Compare the compiled kernels with the pure-Python fallback.

    python benchmarks/bench_kernels.py [--steps N] [--points N] [--repeat R]

Both backends run the same case-1 orbit and the same invariant evaluation;
the script checks that they agree before reporting timings.  The orbit is
chaotic, so rounding differences between the backends grow; agreement is
checked on a short prefix and on the length and status of the full run.
"""

import argparse
import json
import sys
import timeit

import numpy as np

from addlag import _kernels_py
from addlag.canonical import canonical_model
from addlag.dynamics import POLE_TOL, WINDOW, canonical_map
from addlag.kernels import sparse, sparse_rational

try:
    from addlag import _kernels
except ImportError:
    _kernels = None


def workload(steps, points, seed=0):
    m = canonical_map(1, 1, 2, 3)
    fw = sparse_rational(m.forward, WINDOW)
    I = canonical_model(1, 1, 2, 3).invariants[0]
    inv = sparse(I.num, WINDOW)
    pts = np.random.default_rng(seed).uniform(-0.1, 0.1, size=(points, 4))
    return fw, inv, pts, (0.01, 0.01, 0.01, 0.01), steps


def run(impl, fw, inv, pts, s0, steps):
    orbit, done, status = impl.iterate(*fw, s0, steps, 1, POLE_TOL)
    vals = impl.poly_eval(*inv, pts)
    return orbit, vals, status


PREFIX = 20


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--steps", type=int, default=20_000)
    ap.add_argument("--points", type=int, default=20_000)
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args(argv)
    if _kernels is None:
        print("compiled extension not built; only the fallback is available", file=sys.stderr)
        return 1
    fw, inv, pts, s0, steps = workload(args.steps, args.points)
    o_c, v_c, st_c = run(_kernels, fw, inv, pts, s0, steps)
    o_p, v_p, st_p = run(_kernels_py, fw, inv, pts, s0, steps)
    agree = (
        o_c.shape == o_p.shape
        and st_c == st_p
        and np.allclose(o_c[:PREFIX], o_p[:PREFIX], rtol=1e-9, atol=1e-15)
        and np.allclose(v_c, v_p, rtol=1e-12, atol=1e-15)
    )
    report = {"steps": steps, "points": args.points, "agree": bool(agree)}
    for name, impl in (("cython", _kernels), ("python", _kernels_py)):
        t = min(timeit.repeat(lambda: run(impl, fw, inv, pts, s0, steps), number=1, repeat=args.repeat))
        report[f"{name}_seconds"] = round(t, 5)
    report["speedup"] = round(report["python_seconds"] / report["cython_seconds"], 1)
    print(json.dumps(report, indent=2))
    return 0 if agree else 1


if __name__ == "__main__":
    sys.exit(main())
