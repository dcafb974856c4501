"""Numba versus numpy backend timings for the hot kernels.

Each backend runs in its own interpreter because the choice is fixed at
import time by ``GIGAQBX_BACKEND``. The numba timings exclude the first
(compiling) call.

Usage::

    python benchmarks/bench_kernels.py [--repeat 3] [--json out.json]
"""
import argparse
import json
import os
import subprocess
import sys
import time

import numpy as np


def _time(fn, repeat):
    fn()  # warm-up (numba compile, caches)
    best = np.inf
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def _cases():
    from gigaqbx.expansions.expansion import form_expansion, translate
    from gigaqbx.fmm.near import qbx_direct
    from gigaqbx.kernels import SourceEnsemble, direct_sum

    rng = np.random.default_rng(0)
    src = rng.uniform(-1, 1, (4000, 3))
    w = rng.standard_normal(4000)
    dip = rng.standard_normal((4000, 3))
    tgt = rng.uniform(2, 3, (2000, 3))
    ens = SourceEnsemble(src, w, dip)
    ctr = tgt + 0.05
    e = form_expansion("multipole", SourceEnsemble(src[:200], w[:200]), np.zeros(3), 20)

    return {
        "direct_sum 4000x2000 (dipoles)": lambda: direct_sum(ens, tgt),
        "P2M p=20, 4000 dipole sources": lambda: form_expansion("multipole", ens, np.zeros(3), 20),
        "QBX locals p=5, 4000 sources x 500 centers": lambda: qbx_direct(src, w, dip, tgt[:500], ctr[:500], 5),
        "M2L point-and-shoot p=q=20": lambda: translate(e, "M2L", np.array([5.0, 1.0, 2.0]), 20,
                                                         path="point_and_shoot"),
    }


def _worker(repeat):
    from gigaqbx._jit import BACKEND
    out = {"backend": BACKEND, "timings": {}, "checksums": {}}
    for name, fn in _cases().items():
        out["timings"][name] = _time(fn, repeat)
        val = fn()
        val = getattr(val, "scaled", val)
        out["checksums"][name] = float(np.sum(np.abs(np.asarray(val))))
    json.dump(out, sys.stdout)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--json", help="write raw timings here")
    ap.add_argument("--worker", action="store_true", help=argparse.SUPPRESS)
    args = ap.parse_args()
    if args.worker:
        _worker(args.repeat)
        return
    res = {}
    for backend in ("numba", "numpy"):
        env = dict(os.environ, GIGAQBX_BACKEND=backend)
        proc = subprocess.run([sys.executable, __file__, "--worker", "--repeat", str(args.repeat)],
                              env=env, capture_output=True, text=True, check=True)
        res[backend] = json.loads(proc.stdout)
    names = list(res["numba"]["timings"])
    width = max(len(n) for n in names)
    print(f"{'kernel':<{width}}  {'numba [s]':>10}  {'numpy [s]':>10}  {'speedup':>8}  agree")
    for n in names:
        a, b = res["numba"]["timings"][n], res["numpy"]["timings"][n]
        ca, cb = res["numba"]["checksums"][n], res["numpy"]["checksums"][n]
        agree = abs(ca - cb) <= 1e-10 * max(abs(ca), abs(cb))
        print(f"{n:<{width}}  {a:10.4f}  {b:10.4f}  {b / a:8.1f}  {'yes' if agree else 'NO'}")
    if args.json:
        with open(args.json, "w") as f:
            json.dump(res, f, indent=2)


if __name__ == "__main__":
    main()
