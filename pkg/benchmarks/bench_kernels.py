"""Compare the compiled conv kernel core against the numpy fallback.

Times im2col / col2im on every conv layer shape of the full 64x64
architecture, plus one full training iteration per backend. Run:

    python benchmarks/bench_kernels.py [--batch 64] [--iters 5]
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from tcwae.kernels import compiled_backend, numpy_backend

# (name, input shape sans batch, kernel, stride, pad) for the Table-style stack
LAYER_SHAPES = [
    ("enc_conv1", (64, 64, 1), 4, 2, 1),
    ("enc_conv2", (32, 32, 32), 4, 2, 1),
    ("enc_conv3", (16, 16, 32), 4, 2, 1),
    ("enc_conv4", (8, 8, 64), 4, 2, 1),
    ("dec_deconv1", (8, 8, 64), 4, 2, 1),
    ("dec_deconv2", (16, 16, 32), 4, 2, 1),
    ("dec_deconv3", (32, 32, 32), 4, 2, 1),
    ("dec_deconv4", (64, 64, 1), 4, 2, 1),
]


def _time(fn, iters):
    fn()  # warm
    t0 = time.perf_counter()
    for _ in range(iters):
        fn()
    return (time.perf_counter() - t0) / iters * 1e3


def bench_kernels(batch: int, iters: int) -> None:
    backends = [("numpy", numpy_backend())]
    if compiled_backend() is not None:
        backends.append(("compiled", compiled_backend()))
    print(f"{'layer':12s} {'op':7s} " + " ".join(f"{n:>9s}" for n, _ in backends) + "   speedup")
    rng = np.random.default_rng(0)
    for name, shape, k, s, p in LAYER_SHAPES:
        x = rng.random((batch, *shape), dtype=np.float32)
        cols = numpy_backend().im2col(x, k, k, s, p)
        g = np.ascontiguousarray(rng.random(cols.shape, dtype=np.float32))
        for op, make in (
            ("im2col", lambda mod: (lambda: mod.im2col(x, k, k, s, p))),
            ("col2im", lambda mod: (lambda: mod.col2im(g, batch, *shape, k, k, s, p))),
        ):
            times = [_time(make(mod), iters) for _, mod in backends]
            speed = times[0] / times[-1] if len(times) > 1 else float("nan")
            print(f"{name:12s} {op:7s} " + " ".join(f"{t:8.2f}m" for t in times) + f"   {speed:5.2f}x")


def bench_train_step(batch: int, iters: int) -> None:
    import os

    from tcwae.datasets import desk_factor_spec, generate_sprites
    from tcwae.objectives import HyperParams
    from tcwae.training import TrainConfig, train

    print(f"\nfull tcwae_mws training iteration, batch {batch} "
          f"(backend: {os.environ.get('TCWAE_KERNELS', 'auto')})")
    ds = generate_sprites(desk_factor_spec(), 64, 0)
    cfg = TrainConfig(
        objective="tcwae_mws",
        hyper=HyperParams(beta=4.0, gamma=4.0),
        batch_size=batch,
        iterations=iters,
        latent_dim=10,
        seed=0,
    )
    t0 = time.perf_counter()
    train(cfg, ds)
    dt = (time.perf_counter() - t0) / iters
    print(f"{dt * 1e3:.1f} ms/iteration")


if __name__ == "__main__":
    parser = argparse.ArgumentParser()
    parser.add_argument("--batch", type=int, default=64)
    parser.add_argument("--iters", type=int, default=5)
    args = parser.parse_args()
    bench_kernels(args.batch, args.iters)
    bench_train_step(args.batch, args.iters)
