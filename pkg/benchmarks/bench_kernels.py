"""Compare the compiled and numpy kernel backends.

    python benchmarks/bench_kernels.py [--repeat N]

Times the raw kernels on U-Net-sized activations, then one full training
step (forward + backward) with each backend swapped in.
"""
import argparse
import time

import numpy as np

from terraseg import kernels
from terraseg.metrics import bce_with_logits
from terraseg.model import UNetConfig, forward, init_params
from terraseg.tensor import Node, backward, constant


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def kernel_cases(rs):
    x = rs.normal(size=(8, 16, 64, 64)).astype(np.float32)
    cols = kernels._fallback.im2col(x, 3, 1, 1)
    pooled, idx = kernels._fallback.maxpool2x2(x)
    g = rs.normal(size=pooled.shape).astype(np.float32)
    return {
        "im2col 8x16x64x64 k3": lambda b: b.im2col(x, 3, 1, 1),
        "col2im 8x16x64x64 k3": lambda b: b.col2im(cols, x.shape, 3, 1, 1),
        "maxpool2x2 forward": lambda b: b.maxpool2x2(x),
        "maxpool2x2 backward": lambda b: b.maxpool2x2_backward(g, idx),
    }


def training_step(config, params, images, masks):
    nodes = {k: Node(v) for k, v in params.items()}
    loss = bce_with_logits(forward(nodes, config, constant(images)), masks)
    backward(loss)


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeat", type=int, default=5)
    args = parser.parse_args()
    backends = kernels.available_backends()
    if "cython" not in backends:
        print("compiled extension not built; only the numpy backend is available")
    rs = np.random.default_rng(0)
    names = list(backends)
    print(f"{'case':32s}" + "".join(f"{n:>12s}" for n in names) + ("     speedup" if len(names) == 2 else ""))
    for case, fn in kernel_cases(rs).items():
        t = [best_of(lambda: fn(backends[n]), args.repeat) for n in names]
        line = f"{case:32s}" + "".join(f"{v * 1e3:10.2f}ms" for v in t)
        if len(t) == 2:
            line += f"{t[0] / t[1]:11.2f}x"
        print(line)

    config = UNetConfig(depth=2, base_width=8, img_size=64)
    params = init_params(config, 0)
    images = rs.random((16, 3, 64, 64)).astype(np.float32)
    masks = (images[:, :1] >= 0.5).astype(np.float32)
    t = []
    for n in names:
        kernels._impl = backends[n]
        t.append(best_of(lambda: training_step(config, params, images, masks), args.repeat))
    kernels._impl = backends[kernels.BACKEND]
    line = f"{'train step depth2 w8 16x64x64':32s}" + "".join(f"{v * 1e3:10.2f}ms" for v in t)
    if len(t) == 2:
        line += f"{t[0] / t[1]:11.2f}x"
    print(line)


if __name__ == "__main__":
    main()
