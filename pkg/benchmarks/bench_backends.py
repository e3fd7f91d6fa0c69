#!/usr/bin/env python3
"""Benchmark the numba kernels against the pure-numpy fallback.

Times the individual hot kernels and one full training episode per backend.
Each backend runs in a subprocess so ATTMARL_BACKEND is honored at import.

Usage: python benchmarks/bench_backends.py [--quick]
"""

import argparse
import json
import os
import subprocess
import sys

WORKER = r"""
import json, os, time
import numpy as np

from attmarl.backend import K, backend_name

quick = bool(int(os.environ.get("BENCH_QUICK", "0")))
reps = 200 if quick else 2000
results = {"backend": backend_name()}

rng = np.random.default_rng(0)
B, N, H, D, KH = 128, 90, 32, 32, 4
x = rng.standard_normal((B, N))
w = rng.standard_normal((N, H))
b = rng.standard_normal(H)
gy = rng.standard_normal((B, H))
w1 = rng.standard_normal((KH, H, H)); b1 = rng.standard_normal((KH, H))
w2 = rng.standard_normal((KH, H, D)); b2 = rng.standard_normal((KH, D))
enc = rng.standard_normal((B, H))
hvec = rng.standard_normal((B, D))
p = rng.standard_normal(12000); g = rng.standard_normal(12000)
m = np.zeros(12000); v = np.zeros(12000)


def bench(name, fn, *args):
    fn(*args)  # warm (jit compile)
    t0 = time.perf_counter()
    for _ in range(reps):
        fn(*args)
    dt = (time.perf_counter() - t0) / reps
    results[name] = dt * 1e6  # microseconds


bench("affine_relu", K.affine_relu, x, w, b)
bench("affine_relu_bwd", K.affine_relu_bwd, x, w, np.maximum(x @ w + b, 0), gy, True)
heads, hid = K.heads_mlp(enc, w1, b1, w2, b2)
bench("heads_mlp", K.heads_mlp, enc, w1, b1, w2, b2)
bench("heads_mlp_bwd", K.heads_mlp_bwd, enc, w1, w2, hid, rng.standard_normal(heads.shape))
bench("attn_scores", K.attn_scores, hvec, heads)
bench("softmax_rows", K.softmax_rows, rng.standard_normal((B, KH)))
bench("weighted_sum", K.weighted_sum, K.softmax_rows(rng.standard_normal((B, KH))), heads)
bench("adam_update", K.adam_update, p, g, m, v, 5, 1e-3, 0.9, 0.999, 1e-8)
bench("soft_update", K.lerp_inplace, p, g, 0.001)

# one warm training episode end to end (updates active on every step)
from attmarl.config import ExperimentConfig
from attmarl.training import make_trainer

cfg = ExperimentConfig(env="routing_small", algorithm="att_maddpg",
                       episodes=8, seeds=(1,), warmup=128)
tr = make_trainer(cfg, seed=1)
for ep in range(4):  # fill buffer past warmup + warm the jit
    tr.run_episode(ep)
t0 = time.perf_counter()
tr.run_episode(4)
results["episode_ms"] = (time.perf_counter() - t0) * 1e3

print(json.dumps(results))
"""


def run_backend(backend: str, quick: bool) -> dict:
    env = dict(os.environ, ATTMARL_BACKEND=backend,
               BENCH_QUICK="1" if quick else "0")
    out = subprocess.run([sys.executable, "-c", WORKER], env=env,
                         capture_output=True, text=True, check=True)
    return json.loads(out.stdout.strip().splitlines()[-1])


def main():
    parser = argparse.ArgumentParser()
    parser.add_argument("--quick", action="store_true", help="fewer reps")
    args = parser.parse_args()

    rows = [run_backend("numpy", args.quick), run_backend("numba", args.quick)]
    keys = [k for k in rows[0] if k not in ("backend",)]
    header = f"{'kernel':<18}" + "".join(f"{r['backend']:>12}" for r in rows)
    print(header)
    print("-" * len(header))
    for key in keys:
        unit = "ms" if key.endswith("_ms") else "us"
        line = f"{key:<18}"
        for r in rows:
            line += f"{r[key]:>10.1f}{unit}"
        print(line)
    speedup = rows[0]["episode_ms"] / rows[1]["episode_ms"]
    print(f"\nfull-episode speedup (numba over numpy): {speedup:.2f}x")


if __name__ == "__main__":
    main()
