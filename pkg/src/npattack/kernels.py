"""Hot numeric kernels: batched 1-D convolution and STFT framing.

Each kernel ships in two equivalent implementations: an explicit-loop version
compiled with numba's ``@njit``, and a vectorized pure-numpy fallback.  The
fallback is selected when numba is unavailable or when the environment flag
``NPATTACK_NO_NUMBA=1`` is set; ``benchmarks/bench_kernels.py`` compares the
two paths.  All kernels are float64 and deterministic (no parallel
reductions, no fastmath).

Layout is channels-last throughout: signals are ``[batch, time, channels]``,
weights ``[out_channels, in_channels, 3]``, STFT frames ``[batch, frames,
window]``.  Convolutions use kernel size 3, stride 1, zero padding 1.
"""

import os

import numpy as np

USE_NUMBA = os.environ.get("NPATTACK_NO_NUMBA", "") not in ("1", "true", "yes")

try:
    from numba import njit
except ImportError:  # pragma: no cover - numba is a declared dependency
    njit = None
    USE_NUMBA = False


# ---------------------------------------------------------------------------
# pure numpy path
# ---------------------------------------------------------------------------


def conv1d_forward_np(x, w, b):
    B, T, Ci = x.shape
    xp = np.zeros((B, T + 2, Ci))
    xp[:, 1 : T + 1, :] = x
    y = np.broadcast_to(b, (B, T, b.shape[0])).copy()
    for k in range(3):
        y += np.matmul(xp[:, k : k + T, :], w[:, :, k].T)
    return y


def conv1d_backward_input_np(gy, w):
    B, T, Co = gy.shape
    Ci = w.shape[1]
    gxp = np.zeros((B, T + 2, Ci))
    for k in range(3):
        gxp[:, k : k + T, :] += np.matmul(gy, w[:, :, k])
    return np.ascontiguousarray(gxp[:, 1 : T + 1, :])


def conv1d_backward_weight_np(x, gy):
    B, T, Ci = x.shape
    Co = gy.shape[2]
    xp = np.zeros((B, T + 2, Ci))
    xp[:, 1 : T + 1, :] = x
    gw = np.empty((Co, Ci, 3))
    for k in range(3):
        gw[:, :, k] = np.tensordot(gy, xp[:, k : k + T, :], axes=([0, 1], [0, 1]))
    gb = gy.sum(axis=(0, 1))
    return gw, gb


def frame_window_np(x, window, hop):
    B, L = x.shape
    n = window.size
    T = (L - n) // hop + 1
    s0, s1 = x.strides
    frames = np.lib.stride_tricks.as_strided(
        x, shape=(B, T, n), strides=(s0, s1 * hop, s1), writeable=False
    )
    return frames * window


def overlap_add_np(gframes, window, hop, out_len):
    B, T, n = gframes.shape
    gx = np.zeros((B, out_len))
    gfw = gframes * window
    for t in range(T):
        start = t * hop
        gx[:, start : start + n] += gfw[:, t]
    return gx


# ---------------------------------------------------------------------------
# numba path
# ---------------------------------------------------------------------------

if njit is not None:

    @njit(cache=True)
    def _conv1d_forward_nb(x, w, b):
        B, T, Ci = x.shape
        Co = w.shape[0]
        xp = np.zeros((B, T + 2, Ci))
        xp[:, 1 : T + 1, :] = x
        # [3, Co, Ci] so the tap rows are contiguous in the inner product.
        wt = np.ascontiguousarray(w.transpose(2, 0, 1))
        y = np.empty((B, T, Co))
        for bi in range(B):
            for t in range(T):
                x0 = xp[bi, t]
                x1 = xp[bi, t + 1]
                x2 = xp[bi, t + 2]
                for o in range(Co):
                    w0 = wt[0, o]
                    w1 = wt[1, o]
                    w2 = wt[2, o]
                    acc = 0.0
                    for i in range(Ci):
                        acc += w0[i] * x0[i] + w1[i] * x1[i] + w2[i] * x2[i]
                    y[bi, t, o] = acc + b[o]
        return y

    @njit(cache=True)
    def _conv1d_backward_input_nb(gy, w):
        B, T, Co = gy.shape
        Ci = w.shape[1]
        gyp = np.zeros((B, T + 2, Co))
        gyp[:, 1 : T + 1, :] = gy
        # [3, Ci, Co] so the output-channel rows are contiguous per input i.
        wt = np.ascontiguousarray(w.transpose(2, 1, 0))
        gx = np.empty((B, T, Ci))
        for bi in range(B):
            for s in range(T):
                g2 = gyp[bi, s]  # tap k=2 pairs with gy[s-1]
                g1 = gyp[bi, s + 1]
                g0 = gyp[bi, s + 2]  # tap k=0 pairs with gy[s+1]
                for i in range(Ci):
                    v0 = wt[0, i]
                    v1 = wt[1, i]
                    v2 = wt[2, i]
                    acc = 0.0
                    for o in range(Co):
                        acc += v0[o] * g0[o] + v1[o] * g1[o] + v2[o] * g2[o]
                    gx[bi, s, i] = acc
        return gx

    @njit(cache=True)
    def _conv1d_backward_weight_nb(x, gy):
        B, T, Ci = x.shape
        Co = gy.shape[2]
        xp = np.zeros((B, T + 2, Ci))
        xp[:, 1 : T + 1, :] = x
        gwt = np.zeros((3, Co, Ci))
        gb = np.zeros(Co)
        for bi in range(B):
            for t in range(T):
                for o in range(Co):
                    g = gy[bi, t, o]
                    gb[o] += g
                    for k in range(3):
                        xr = xp[bi, t + k]
                        gr = gwt[k, o]
                        for i in range(Ci):
                            gr[i] += g * xr[i]
        gw = np.empty((Co, Ci, 3))
        for o in range(Co):
            for i in range(Ci):
                for k in range(3):
                    gw[o, i, k] = gwt[k, o, i]
        return gw, gb

    @njit(cache=True)
    def _frame_window_nb(x, window, hop):
        B, L = x.shape
        n = window.size
        T = (L - n) // hop + 1
        frames = np.empty((B, T, n))
        for bi in range(B):
            for t in range(T):
                start = t * hop
                for j in range(n):
                    frames[bi, t, j] = x[bi, start + j] * window[j]
        return frames

    @njit(cache=True)
    def _overlap_add_nb(gframes, window, hop, out_len):
        B, T, n = gframes.shape
        gx = np.zeros((B, out_len))
        for bi in range(B):
            for t in range(T):
                start = t * hop
                for j in range(n):
                    gx[bi, start + j] += gframes[bi, t, j] * window[j]
        return gx

    def conv1d_forward_nb(x, w, b):
        return _conv1d_forward_nb(
            np.ascontiguousarray(x), np.ascontiguousarray(w), np.ascontiguousarray(b)
        )

    def conv1d_backward_input_nb(gy, w):
        return _conv1d_backward_input_nb(
            np.ascontiguousarray(gy), np.ascontiguousarray(w)
        )

    def conv1d_backward_weight_nb(x, gy):
        return _conv1d_backward_weight_nb(
            np.ascontiguousarray(x), np.ascontiguousarray(gy)
        )

    def frame_window_nb(x, window, hop):
        return _frame_window_nb(
            np.ascontiguousarray(x), np.ascontiguousarray(window), hop
        )

    def overlap_add_nb(gframes, window, hop, out_len):
        return _overlap_add_nb(
            np.ascontiguousarray(gframes), np.ascontiguousarray(window), hop, out_len
        )


if USE_NUMBA and njit is not None:
    conv1d_forward = conv1d_forward_nb
    conv1d_backward_input = conv1d_backward_input_nb
    conv1d_backward_weight = conv1d_backward_weight_nb
    frame_window = frame_window_nb
    overlap_add = overlap_add_nb
    BACKEND = "numba"
else:
    conv1d_forward = conv1d_forward_np
    conv1d_backward_input = conv1d_backward_input_np
    conv1d_backward_weight = conv1d_backward_weight_np
    frame_window = frame_window_np
    overlap_add = overlap_add_np
    BACKEND = "numpy"
