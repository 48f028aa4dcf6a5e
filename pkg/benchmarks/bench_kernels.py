"""Timing comparison of the compiled and pure-numpy kernel backends.

Shapes mirror what the distance predictor actually runs: a spectrogram
front end (frame + window at fft 1024 / hop 256) followed by kernel-size-3
convolutions over channels-last activations.

Usage: python benchmarks/bench_kernels.py [--batch 8] [--repeats 50]
"""

import argparse
import time

import numpy as np

from npattack import kernels


def time_call(fn, args, repeats):
    fn(*args)  # warm-up (and numba compilation on the first call)
    start = time.perf_counter()
    for _ in range(repeats):
        fn(*args)
    return (time.perf_counter() - start) / repeats * 1e3


def bench_pair(name, np_fn, nb_fn, args, repeats, rows):
    t_np = time_call(np_fn, args, repeats)
    if nb_fn is None:
        rows.append((name, t_np, None))
        return
    t_nb = time_call(nb_fn, args, repeats)
    rows.append((name, t_np, t_nb))


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--batch", type=int, default=8)
    parser.add_argument("--repeats", type=int, default=50)
    parser.add_argument("--signal-len", type=int, default=4096)
    args = parser.parse_args()

    rng = np.random.default_rng(0)
    B = args.batch
    L = args.signal_len
    window = np.hanning(1025)[:-1]
    hop = 256
    frames = (L - window.size) // hop + 1

    signal = rng.standard_normal((B, L))
    gframes = rng.standard_normal((B, frames, window.size))
    spec = rng.standard_normal((B, frames, 513))
    w_in = rng.standard_normal((32, 513, 3))
    b32 = rng.standard_normal(32)
    act = rng.standard_normal((B, frames, 32))
    w_mid = rng.standard_normal((32, 32, 3))
    gy = rng.standard_normal((B, frames, 32))

    have_numba = kernels.njit is not None
    rows = []
    bench_pair(
        f"frame+window [{B},{L}]",
        kernels.frame_window_np,
        kernels.frame_window_nb if have_numba else None,
        (signal, window, hop),
        args.repeats,
        rows,
    )
    bench_pair(
        f"overlap-add [{B},{frames},{window.size}]",
        kernels.overlap_add_np,
        kernels.overlap_add_nb if have_numba else None,
        (gframes, window, hop, L),
        args.repeats,
        rows,
    )
    bench_pair(
        f"conv fwd 513->32 [{B},{frames}]",
        kernels.conv1d_forward_np,
        kernels.conv1d_forward_nb if have_numba else None,
        (spec, w_in, b32),
        args.repeats,
        rows,
    )
    bench_pair(
        f"conv fwd 32->32 [{B},{frames}]",
        kernels.conv1d_forward_np,
        kernels.conv1d_forward_nb if have_numba else None,
        (act, w_mid, b32),
        args.repeats,
        rows,
    )
    bench_pair(
        f"conv bwd-input 32->32 [{B},{frames}]",
        kernels.conv1d_backward_input_np,
        kernels.conv1d_backward_input_nb if have_numba else None,
        (gy, w_mid),
        args.repeats,
        rows,
    )
    bench_pair(
        f"conv bwd-weight 513->32 [{B},{frames}]",
        kernels.conv1d_backward_weight_np,
        kernels.conv1d_backward_weight_nb if have_numba else None,
        (spec, gy),
        args.repeats,
        rows,
    )

    print(f"active backend: {kernels.BACKEND}")
    header = f"{'kernel':<38} {'numpy ms':>10} {'numba ms':>10} {'speedup':>8}"
    print(header)
    print("-" * len(header))
    for name, t_np, t_nb in rows:
        if t_nb is None:
            print(f"{name:<38} {t_np:>10.3f} {'n/a':>10} {'n/a':>8}")
        else:
            print(f"{name:<38} {t_np:>10.3f} {t_nb:>10.3f} {t_np / t_nb:>7.2f}x")


if __name__ == "__main__":
    main()
