"""Time the numba kernels against the numpy fallback, and a full nonlinear step under each.

    python3 benchmarks/bench_kernels.py [--sizes 32 64 128] [--repeat 20]

The full-step timing spawns one subprocess per backend because the backend
is fixed at import time by ``RTLAB_NUMBA``.
"""

from __future__ import annotations

import argparse
import json
import os
import subprocess
import sys
import timeit

import numpy as np

from rtlab.kernels import numba_impl, numpy_impl

STEP_SNIPPET = """
import json, timeit
import numpy as np
from rtlab.experiments import ExperimentConfig, setup_mode
from rtlab.initial_data import build_initial_data
from rtlab.nonlinear_sim import FieldState, Stepper
import rtlab.kernels as k
su = setup_mode(ExperimentConfig(nx={n}, nz={n}, dt=0.001))
s = FieldState.from_bundle(build_initial_data(1e-2, su.eigen, su.disc))
st = Stepper(su.disc, 0.001)
st.step(s)
t = min(timeit.repeat(lambda: st.step(s), number=1, repeat={repeat}))
print(json.dumps({{"backend": k.BACKEND, "step_s": t}}))
"""


def _fields(n: int, rng):
    u = rng.standard_normal((n + 1, n))
    w = rng.standard_normal((n, n + 1))
    u[0] = u[-1] = 0
    w[:, 0] = w[:, -1] = 0
    return u, w, rng.standard_normal((n, n))


def bench_kernels(n: int, repeat: int) -> dict:
    u, w, r = _fields(n, np.random.default_rng(0))
    h = 1.0 / n
    out = {"n": n}
    for name, mod in (("numpy", numpy_impl), ("numba", numba_impl)):
        mod.advect_velocity(u, w, h, h, False)  # compile / warm up
        mod.muscl_fluxes(r, u, w, False)
        out[f"advect_{name}"] = min(timeit.repeat(lambda: mod.advect_velocity(u, w, h, h, False), number=10,
                                                  repeat=repeat)) / 10
        out[f"muscl_{name}"] = min(timeit.repeat(lambda: mod.muscl_fluxes(r, u, w, False), number=10,
                                                 repeat=repeat)) / 10
    out["advect_speedup"] = out["advect_numpy"] / out["advect_numba"]
    out["muscl_speedup"] = out["muscl_numpy"] / out["muscl_numba"]
    return out


def bench_step(n: int, repeat: int) -> dict:
    res = {}
    for flag in ("0", "1"):
        env = dict(os.environ, RTLAB_NUMBA=flag)
        p = subprocess.run([sys.executable, "-c", STEP_SNIPPET.format(n=n, repeat=repeat)], env=env,
                           capture_output=True, text=True, check=True)
        d = json.loads(p.stdout.strip().splitlines()[-1])
        res[d["backend"]] = d["step_s"]
    return res


def main(argv=None) -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--sizes", type=int, nargs="+", default=[32, 64, 128, 256])
    ap.add_argument("--repeat", type=int, default=20)
    ap.add_argument("--step-size", type=int, default=64, help="grid for the full-step comparison (0 to skip)")
    args = ap.parse_args(argv)
    print(f"{'n':>5} {'advect numpy':>14} {'advect numba':>14} {'x':>6} {'muscl numpy':>13} {'muscl numba':>13} {'x':>6}")
    for n in args.sizes:
        b = bench_kernels(n, args.repeat)
        print(f"{n:5d} {b['advect_numpy'] * 1e6:12.1f}us {b['advect_numba'] * 1e6:12.1f}us {b['advect_speedup']:6.1f}"
              f" {b['muscl_numpy'] * 1e6:11.1f}us {b['muscl_numba'] * 1e6:11.1f}us {b['muscl_speedup']:6.1f}")
    if args.step_size:
        s = bench_step(args.step_size, max(3, args.repeat // 4))
        print(f"nonlinear step on {args.step_size}^2: numpy {s['numpy'] * 1e3:.2f} ms, numba {s['numba'] * 1e3:.2f} ms")


if __name__ == "__main__":
    main()
