"""Compare the numba kernels against their pure-numpy fallbacks.

Usage: python3 benchmarks/bench_kernels.py [--repeat N]

Prints one line per kernel with the median wall time of each backend and the
max abs difference between their outputs. Shapes mimic one training batch of
32 scenes with up to 7 agents each.
"""

from __future__ import annotations

import argparse
import statistics
import time

import numpy as np

from agentimp.numcore import kernels as K
from agentimp.scenegen import sim


def _median_time(fn, repeat):
    fn()  # warm-up (numba compilation)
    times = []
    for _ in range(repeat):
        t = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t)
    return statistics.median(times)


def _batch_pairs(rng, n_scenes=32, max_agents=7):
    sizes = rng.integers(1, max_agents + 1, n_scenes)
    seg = np.concatenate([[0], np.cumsum(sizes)]).astype(np.int64)  # row boundaries
    tgt, src, off = [], [], 0
    for n in sizes:
        for i in range(n):
            for j in range(n):
                if i != j:
                    tgt.append(off + i)
                    src.append(off + j)
        off += n
    return seg, np.array(tgt, np.int64), np.array(src, np.int64)


def bench_pair(rng, repeat, h=64):
    seg, tgt, src = _batch_pairs(rng)
    m = int(seg[-1])
    a, c = rng.normal(size=(m, h)), rng.normal(size=(m, h))
    d, w = rng.normal(size=(len(tgt), 2)), rng.normal(size=(2, h))
    ds = rng.normal(size=(m, h))
    out = {}
    for name, fwd, bwd in (("numba", K._pair_relu_sum_fwd_nb, K._pair_relu_sum_bwd_nb),
                           ("numpy", K._pair_relu_sum_fwd_np, K._pair_relu_sum_bwd_np)):
        def run():
            s, pre = fwd(a, c, d, w, tgt, src)
            return s, bwd(ds, pre, d, tgt, src, m)
        out[name] = (_median_time(run, repeat), run())
    diff = max(float(np.max(np.abs(x - y))) for x, y in zip(_flat(out["numba"][1]), _flat(out["numpy"][1])))
    return out["numba"][0], out["numpy"][0], diff


def bench_attention(rng, repeat, f=64):
    seg, _, _ = _batch_pairs(rng)
    m = int(seg[-1])
    q, k, v = (rng.normal(size=(m, f)) for _ in range(3))
    dy = rng.normal(size=(m, f))
    scale = 1.0 / np.sqrt(f)
    woff = K.weight_offsets(seg)
    out = {}
    for name, fwd, bwd in (("numba", K._segment_attention_fwd_nb, K._segment_attention_bwd_nb),
                           ("numpy", K._segment_attention_fwd_np, K._segment_attention_bwd_np)):
        def run():
            y, wts = fwd(q, k, v, seg, woff, scale)
            return y, bwd(dy, q, k, v, wts, seg, woff, scale)
        out[name] = (_median_time(run, repeat), run())
    diff = max(float(np.max(np.abs(x - y))) for x, y in zip(_flat(out["numba"][1]), _flat(out["numpy"][1])))
    return out["numba"][0], out["numpy"][0], diff


def bench_simulate(rng, repeat, agents=7, steps=100):
    state0 = np.column_stack([rng.uniform(-50, 80, agents), rng.choice([-3.5, 0.0, 3.5], agents),
                              rng.uniform(5, 15, agents), np.zeros(agents)])
    codes = rng.integers(0, 4, agents).astype(np.int64)
    params = np.column_stack([rng.uniform(8, 15, agents), rng.uniform(0, 3, agents), rng.uniform(1, 3, agents)])
    cfg = sim.SimConfig()
    res = {}
    for name, flag in (("numba", True), ("numpy", False)):
        def run():
            return sim.simulate(state0, codes, params, -2.0, steps, cfg, use_numba=flag)
        res[name] = (_median_time(run, repeat), run())
    return res["numba"][0], res["numpy"][0], float(np.max(np.abs(res["numba"][1] - res["numpy"][1])))


def _flat(x):
    if isinstance(x, (tuple, list)):
        for item in x:
            yield from _flat(item)
    else:
        yield np.asarray(x)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=20)
    args = ap.parse_args()
    rng = np.random.default_rng(0)
    print(f"{'kernel':<20}{'numba ms':>10}{'numpy ms':>10}{'speedup':>9}{'max diff':>11}")
    for name, fn in (("pair_relu_sum", bench_pair), ("segment_attention", bench_attention), ("simulate", bench_simulate)):
        t_nb, t_np, diff = fn(rng, args.repeat)
        print(f"{name:<20}{t_nb * 1e3:>10.3f}{t_np * 1e3:>10.3f}{t_np / t_nb:>8.1f}x{diff:>11.2e}")


if __name__ == "__main__":
    main()
