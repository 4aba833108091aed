"""Time the numba kernels against their numpy twins.

Usage: python3 benchmarks/bench_kernels.py [--repeat N] [--skip-e2e]

Kernel timings call both twins directly in one process (numba warmed up
first, so compilation is excluded). The end-to-end timing runs a reduced
benchmark config in two subprocesses, one with PCQM_DISABLE_NUMBA=1.
"""
import argparse
import math
import os
import subprocess
import sys
import tempfile
import time
import timeit

import numpy as np

from pcqm import _kernels as K
from pcqm.model import NbdModel
from pcqm.simulate import StudyWindow, SurveyDesign, gen_poisson, lhs_focal_points, sample_nbd_distances


def best_of(fn, repeat, number):
    return min(timeit.repeat(fn, repeat=repeat, number=number)) / number


def bench_loglik(repeat):
    rows = []
    m = NbdModel(0.05, 2.0)
    for size in (480, 10_000, 100_000):
        r = sample_nbd_distances(m, size, 1)
        C = float(np.quantile(r, 0.8))
        r = r[r <= C]
        n0 = size - r.size
        ll = {b: K.NbdLogLik(r, n0, 1, 4, C, backend=b) for b in ("numba", "numpy")}
        ll["numba"](math.log(0.05), math.log(2.0))
        number = max(1, 200_000 // size)
        t = {b: best_of(lambda f=f: f(math.log(0.05), math.log(2.0)), repeat, number)
             for b, f in ll.items()}
        rows.append((f"nbd_loglik n={size}", t["numba"], t["numpy"]))
    return rows


def bench_pcqm(repeat):
    rows = []
    w = StudyWindow(0, 0, 600, 600)
    pattern = gen_poisson(0.05, w, 3)
    for ell in (1, 3):
        design = SurveyDesign(ell=ell)
        focals = lhs_focal_points(design, w, 4)
        index = K.GridIndex(pattern.points, 0, 0, 600, 600, design.C)
        K.pcqm_distances(index, focals, 4, ell, 10.0, backend="numba")
        t = {b: best_of(lambda b=b: K.pcqm_distances(index, focals, 4, ell, 10.0, backend=b),
                        repeat, 5)
             for b in ("numba", "numpy")}
        rows.append((f"pcqm_distances ell={ell} (120 focals, {len(pattern)} pts)",
                     t["numba"], t["numpy"]))
    return rows


def bench_end_to_end():
    rows = []
    with tempfile.TemporaryDirectory() as tmp:
        for label, env_flag in (("numba", "0"), ("numpy", "1")):
            env = dict(os.environ, PCQM_DISABLE_NUMBA=env_flag)
            cmd = [sys.executable, "-m", "pcqm.cli", "benchmark", "--config", "table1_row_csr050_l1",
                   "--out", os.path.join(tmp, label)]
            # first run fills the numba cache so timing excludes compilation
            subprocess.run(cmd, env=env, check=True, capture_output=True)
            t0 = time.perf_counter()
            subprocess.run(cmd, env=env, check=True, capture_output=True)
            rows.append((label, time.perf_counter() - t0))
    return rows


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--skip-e2e", action="store_true")
    args = ap.parse_args()

    print(f"{'kernel':55s} {'numba':>11s} {'numpy':>11s} {'speedup':>8s}")
    for name, tn, tp in bench_loglik(args.repeat) + bench_pcqm(args.repeat):
        print(f"{name:55s} {tn * 1e3:9.3f}ms {tp * 1e3:9.3f}ms {tp / tn:7.1f}x")
    if not args.skip_e2e:
        print("\nend-to-end: pcqm benchmark --config table1_row_csr050_l1 (200 cells, 7 estimators)")
        for label, secs in bench_end_to_end():
            print(f"  {label:6s} {secs:7.2f}s")


if __name__ == "__main__":
    main()
