"""Numba kernels vs their numpy fallbacks.

Part 1 times each kernel pair in-process on shapes used by the agents
(32 episodes x 32 steps, hidden 64, 4 slots of 16). Part 2 trains a B1 agent
for a few episodes end to end, once per backend, in fresh subprocesses so the
``MARKERLAB_NO_NUMBA`` switch takes effect.

    python benchmarks/bench_kernels.py [--repeat 20] [--episodes 20]
"""
from __future__ import annotations

import argparse
import json
import os
import subprocess
import sys
import tempfile
import timeit

import numpy as np

from markerlab import kernels as K
from markerlab.numerics.layers import ENC_CHANNELS, N_PLANES

B, T, H, NS, SD = 32, 32, 64, 4, 16


def kernel_cases(rng):
    x = rng.standard_normal((B, 7, 7, N_PLANES))
    w = rng.standard_normal((3, 3, N_PLANES, ENC_CHANNELS[0]))
    cb = rng.standard_normal(ENC_CHANNELS[0])
    dy = rng.standard_normal((B, 5, 5, ENC_CHANNELS[0]))
    xp = rng.standard_normal((B, T, 3 * H))
    wh = rng.standard_normal((H, 3 * H)) * 0.1
    bh = rng.standard_normal(3 * H)
    h0 = np.zeros((B, H))
    noise = np.zeros((B, T, H))
    hs, cache = K.gru_forward_np(xp, wh, bh, h0, noise)
    dhs = rng.standard_normal(hs.shape)
    ww = rng.standard_normal((B, T, SD))
    flags = rng.random((B, T)) < 0.15
    s0, occ0 = np.zeros((B, NS, SD)), np.zeros((B, NS), bool)
    wnoise = np.zeros((B, T, NS, SD))
    out, _, idx = K.workspace_forward_np(ww, flags, s0, occ0, NS, wnoise)
    dout = rng.standard_normal(out.shape)
    bits = rng.integers(0, 2, 4096).astype(np.uint8)
    return {
        "conv2d_forward": (K.conv2d_forward_np, K.conv2d_forward_nb, (x, w, cb)),
        "conv2d_backward": (K.conv2d_backward_np, K.conv2d_backward_nb, (x, w, dy)),
        "gru_forward": (K.gru_forward_np, K.gru_forward_nb, (xp, wh, bh, h0, noise)),
        "gru_backward": (K.gru_backward_np, K.gru_backward_nb, (dhs, hs, h0, cache, wh)),
        "workspace_forward": (K.workspace_forward_np, K.workspace_forward_nb, (ww, flags, s0, occ0, NS, wnoise)),
        "workspace_backward": (K.workspace_backward_np, K.workspace_backward_nb, (dout, idx)),
        "lz76 (n=4096)": (K.lz76_np, K.lz76_nb, (bits,)),
    }


def bench_kernels(repeat: int) -> list[dict]:
    rows = []
    for name, (f_np, f_nb, args) in kernel_cases(np.random.default_rng(0)).items():
        f_nb(*args)  # compile outside the timing
        t_np = min(timeit.repeat(lambda: f_np(*args), number=1, repeat=repeat))
        t_nb = min(timeit.repeat(lambda: f_nb(*args), number=1, repeat=repeat))
        rows.append({"kernel": name, "numpy_ms": 1e3 * t_np, "numba_ms": 1e3 * t_nb, "speedup": t_np / t_nb})
    return rows


CHILD = """
import json, time
import numpy as np
from markerlab._accel import backend
from markerlab.training.train import TrainConfig, train_agent
train_agent("B1", TrainConfig(episodes=2, val_episodes=2))  # warm-up and compilation
t = time.perf_counter()
res = train_agent("B1", TrainConfig(episodes={episodes}, val_episodes=10))
sec = time.perf_counter() - t
np.savez({path!r}, **{{k: v.data for k, v in res.agent.params.items()}})
print(json.dumps({{"backend": backend(), "seconds": sec}}))
"""


def bench_training(episodes: int) -> tuple[list[dict], float]:
    """Seconds per backend and the largest parameter difference between them."""
    rows, params = [], []
    with tempfile.TemporaryDirectory() as tmp:
        for flag in ("0", "1"):
            path = os.path.join(tmp, f"p{flag}.npz")
            env = dict(os.environ, MARKERLAB_NO_NUMBA=flag)
            out = subprocess.run([sys.executable, "-c", CHILD.format(episodes=episodes, path=path)], env=env,
                                 capture_output=True, text=True)
            if out.returncode:
                raise RuntimeError(out.stderr)
            rows.append(json.loads(out.stdout.strip().splitlines()[-1]))
            with np.load(path) as z:
                params.append({k: z[k] for k in z.files})
    diff = max(float(np.abs(params[0][k] - params[1][k]).max()) for k in params[0])
    return rows, diff


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=20)
    ap.add_argument("--episodes", type=int, default=50)
    args = ap.parse_args(argv)
    print(f"{'kernel':22s} {'numpy ms':>10s} {'numba ms':>10s} {'speedup':>8s}")
    for r in bench_kernels(args.repeat):
        print(f"{r['kernel']:22s} {r['numpy_ms']:10.3f} {r['numba_ms']:10.3f} {r['speedup']:7.1f}x")
    tr, diff = bench_training(args.episodes)
    print(f"\nB1 training, {args.episodes} episodes:")
    for r in tr:
        print(f"  {r['backend']:6s} {r['seconds']:7.2f} s")
    # the backends sum in different orders, so parameters agree to rounding, not bitwise
    print(f"  speedup {tr[1]['seconds'] / tr[0]['seconds']:.1f}x; max |param difference| {diff:.1e}")


if __name__ == "__main__":
    main()
