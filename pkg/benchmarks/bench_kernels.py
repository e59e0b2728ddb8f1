"""Compare the compiled and pure-numpy elimination kernels.

Usage::

    python benchmarks/bench_kernels.py [--repeat 5] [--no-decode]

Kernel timings run in-process against both backends.  The end-to-end decode
(PB-RAC M=1024, OA decoder) runs once per backend in a subprocess, since the
backend is picked at import time.
"""

from __future__ import annotations

import argparse
import os
import subprocess
import sys
import timeit

import numpy as np

from gnc import kernels

DECODE_SNIPPET = """
import time, numpy as np
from gnc import kernels
from gnc.codes import Encoder, build_code, random_sources
from gnc.decoders import make_decoder
code = build_code("PB_RAC", 1024, 32, seed=0, K=64)
rng = np.random.default_rng(0)
enc = Encoder(code, random_sources(1024, 64, rng), rng)
pkts = [next(enc) for _ in range(1200)]
t = time.perf_counter()
dec = make_decoder("oa", code)
for p in pkts:
    out = dec.receive(p)
    if out.decoded:
        break
dt = time.perf_counter() - t
assert out.decoded
print(kernels.BACKEND, dt)
"""


def echelon_case(rng, n=64):
    basis = np.zeros((n, n), dtype=np.uint8)
    piv = np.full(n, -1, dtype=np.int64)
    for k in range(n - 1):
        basis[k, k] = 1
        basis[k, k + 1:] = rng.integers(0, 256, n - k - 1)
        piv[k] = k
    return basis, piv


def kernel_cases(kb, rng):
    a = rng.integers(0, 256, 1600, dtype=np.uint8)
    b = rng.integers(0, 256, 1600, dtype=np.uint8)
    basis, piv = echelon_case(rng)
    row = rng.integers(0, 256, basis.shape[1], dtype=np.uint8)
    ops_buf = np.zeros((basis.shape[0], 2), dtype=np.int64)
    mat = rng.integers(0, 256, (200, 1600), dtype=np.uint8)
    log = np.stack([rng.integers(0, 200, 2000), rng.integers(0, 200, 2000),
                    rng.integers(1, 256, 2000)], axis=1).astype(np.int64)
    log = log[log[:, 0] != log[:, 1]]
    return {
        "mul_add K=1600": lambda: kb.mul_add(a, b, 0x53),
        "echelon_reduce n=64": lambda: kb.echelon_reduce(row.copy(), basis, piv, ops_buf),
        "back_substitute n=64": lambda: kb.back_substitute(basis.copy(), piv),
        "replay 2000 ops K=1600": lambda: kb.replay(mat, log),
    }


def run_kernels(repeat: int) -> None:
    backends = kernels.available_backends()
    if "cython" not in backends:
        print("compiled extension not built; timing the fallback only")
    rows = {}
    for name, kb in backends.items():
        for case, fn in kernel_cases(kb, np.random.default_rng(1)).items():
            n = 50 if "replay" not in case else 3
            best = min(timeit.repeat(fn, number=n, repeat=repeat)) / n
            rows.setdefault(case, {})[name] = best
    print(f"{'kernel':<26}{'python (us)':>14}{'cython (us)':>14}{'speedup':>10}")
    for case, t in rows.items():
        py, cy = t.get("python"), t.get("cython")
        sp = f"{py / cy:>10.1f}" if cy else f"{'-':>10}"
        cy_s = f"{cy * 1e6:>14.1f}" if cy else f"{'-':>14}"
        print(f"{case:<26}{py * 1e6:>14.1f}{cy_s}{sp}")


def run_decode() -> None:
    print("\nend-to-end OA decode, PB-RAC M=1024 K=64")
    for pure in ("", "1"):
        env = dict(os.environ, GNC_PURE_PYTHON=pure)
        out = subprocess.run([sys.executable, "-c", DECODE_SNIPPET], env=env,
                             capture_output=True, text=True, check=True).stdout.split()
        print(f"  {out[0]:<8}{float(out[1]):8.2f} s")


def main(argv=None) -> int:
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--repeat", type=int, default=5)
    p.add_argument("--no-decode", action="store_true")
    args = p.parse_args(argv)
    run_kernels(args.repeat)
    if not args.no_decode:
        run_decode()
    return 0


if __name__ == "__main__":
    sys.exit(main())
