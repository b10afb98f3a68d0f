"""Timing comparison of the compiled and pure-python conv kernels.

Run:  python3 benchmarks/bench_kernels.py
"""
import time

import numpy as np

from sdrcnn.tensor import kernels_py

try:
    from sdrcnn.tensor import _kernels as compiled
except ImportError:
    compiled = None

SHAPES = [
    # n, cin, cout, h, w, k
    (4, 53, 52, 16, 16, 3),
    (4, 52, 260, 16, 16, 3),
    (1, 52, 52, 64, 64, 3),
    (8, 16, 32, 32, 32, 5),
]


def time_call(fn, *args, repeat=5):
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn(*args)
        best = min(best, time.perf_counter() - t0)
    return best


def bench_one(impl, n, cin, cout, h, w, k):
    rng = np.random.default_rng(0)
    x = rng.normal(size=(n, cin, h, w))
    pw = rng.normal(size=(cout, cin))
    dwk = rng.normal(size=(cin, k, k))
    bias_pw = rng.normal(size=cout)
    bias_dw = rng.normal(size=cin)
    gy_pw = rng.normal(size=(n, cout, h, w))
    gy_dw = rng.normal(size=(n, cin, h, w))
    return {
        "pw fwd": time_call(impl.pointwise_forward, x, pw, bias_pw),
        "pw bwd": time_call(impl.pointwise_backward, x, pw, gy_pw),
        "dw fwd": time_call(impl.depthwise_forward, x, dwk, bias_dw),
        "dw bwd": time_call(impl.depthwise_backward, x, dwk, gy_dw),
    }


def main():
    impls = [("python", kernels_py)]
    if compiled is not None:
        impls.append(("compiled", compiled))
    else:
        print("compiled extension not built; timing the python kernels only")

    for shape in SHAPES:
        n, cin, cout, h, w, k = shape
        print(f"\nbatch {n}, {cin}->{cout} channels, {h}x{w}, k={k}")
        rows = {name: bench_one(impl, *shape) for name, impl in impls}
        for op in ("pw fwd", "pw bwd", "dw fwd", "dw bwd"):
            line = f"  {op}:"
            for name, res in rows.items():
                line += f"  {name} {res[op] * 1e3:8.3f} ms"
            if len(rows) == 2:
                line += f"  speedup {rows['python'][op] / rows['compiled'][op]:5.1f}x"
            print(line)


if __name__ == "__main__":
    main()
