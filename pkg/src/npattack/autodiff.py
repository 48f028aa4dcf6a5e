"""Reverse-mode automatic differentiation on numpy arrays.

A small tape: each op returns a ``Tensor`` that remembers its parents and a
closure that routes the output gradient to them.  ``Tensor.backward`` walks
the graph in reverse topological order.  The op set is exactly what the
magnitude predictor needs; layouts are channels-last (``[batch, time,
channels]``) to match :mod:`npattack.kernels`.

All math is float64.  The STFT uses a periodic Hann window of length 1024
with hop 256, so a signal of length L yields ``(L - 1024) // 256 + 1``
frames of 513 magnitude bins.
"""

import numpy as np

from . import kernels

FFT_SIZE = 1024
HOP = 256
N_BINS = FFT_SIZE // 2 + 1
MAG_EPS = 1e-10


def hann_window(n: int = FFT_SIZE) -> np.ndarray:
    """Periodic Hann window, 0.5 * (1 - cos(2 pi k / n))."""
    k = np.arange(n)
    return 0.5 * (1.0 - np.cos(2.0 * np.pi * k / n))


_HANN = hann_window()


class Tensor:
    """A node in the autodiff graph wrapping a float64 ndarray."""

    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward")

    def __init__(self, data, requires_grad=False, parents=(), backward=None):
        self.data = np.asarray(data, dtype=np.float64)
        self.grad = None
        self.requires_grad = bool(requires_grad) or any(
            p.requires_grad for p in parents
        )
        self._parents = tuple(parents)
        self._backward = backward

    @property
    def shape(self):
        return self.data.shape

    def zero_grad(self):
        self.grad = None

    def backward(self, grad=None):
        """Accumulate gradients into every ``requires_grad`` ancestor."""
        if grad is None:
            if self.data.size != 1:
                raise ValueError("backward() without a gradient needs a scalar")
            grad = np.ones_like(self.data)
        else:
            grad = np.asarray(grad, dtype=np.float64)
            if grad.shape != self.data.shape:
                raise ValueError("gradient shape does not match tensor shape")
        if not self.requires_grad:
            raise ValueError("tensor does not require gradients")

        order = _topo_order(self)
        _accumulate(self, grad)
        for node in reversed(order):
            if node._backward is not None and node.grad is not None:
                node._backward(node.grad)


def _topo_order(root):
    order = []
    seen = set()
    stack = [(root, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            order.append(node)
            continue
        if id(node) in seen:
            continue
        seen.add(id(node))
        stack.append((node, True))
        for p in node._parents:
            if p.requires_grad and id(p) not in seen:
                stack.append((p, False))
    return order


def _accumulate(t, g):
    if not t.requires_grad:
        return
    if t.grad is None:
        t.grad = g.copy()
    else:
        t.grad = t.grad + g


def constant(data):
    return Tensor(data, requires_grad=False)


def parameter(data):
    return Tensor(data, requires_grad=True)


# ---------------------------------------------------------------------------
# signal front end
# ---------------------------------------------------------------------------


def linf_normalize(t: Tensor) -> Tensor:
    """Row-wise x / max|x| for a [B, D] batch.

    The max-norm is attained at the first argmax of |x|; the gradient treats
    that coordinate as the active one, which matches the one-sided
    derivative everywhere except exact ties.
    """
    x = t.data
    if x.ndim != 2:
        raise ValueError("linf_normalize expects a [batch, length] array")
    absx = np.abs(x)
    m = absx.max(axis=1, keepdims=True)
    if np.any(m == 0.0):
        raise ValueError("cannot normalize an all-zero row")
    a = absx.argmax(axis=1)
    u = x / m

    def bwd(gy):
        if t.requires_grad:
            gx = gy / m
            rows = np.arange(x.shape[0])
            dot = (gy * x).sum(axis=1) / (m[:, 0] ** 2)
            gx[rows, a] -= dot * np.sign(x[rows, a])
            _accumulate(t, gx)

    return Tensor(u, parents=(t,), backward=bwd)


def pad_to(t: Tensor, target: int) -> Tensor:
    """Zero-pad rows of a [B, L] batch on the right up to ``target``."""
    x = t.data
    if x.ndim != 2:
        raise ValueError("pad_to expects a [batch, length] array")
    L = x.shape[1]
    if L >= target:
        return t
    y = np.zeros((x.shape[0], target))
    y[:, :L] = x

    def bwd(gy):
        if t.requires_grad:
            _accumulate(t, np.ascontiguousarray(gy[:, :L]))

    return Tensor(y, parents=(t,), backward=bwd)


def stft_magnitude(t: Tensor) -> Tensor:
    """Magnitude spectrogram [B, frames, 513] of a [B, L] batch, L >= 1024.

    Forward is |rfft| of Hann-windowed frames, smoothed as
    sqrt(re^2 + im^2 + MAG_EPS) so the gradient is defined at zero bins.
    The backward maps bin gradients through the rfft adjoint: interior bins
    are halved, then n * irfft recovers the frame gradient, which is
    windowed and overlap-added.
    """
    x = t.data
    if x.ndim != 2:
        raise ValueError("stft_magnitude expects a [batch, length] array")
    L = x.shape[1]
    if L < FFT_SIZE:
        raise ValueError(f"signal length {L} is shorter than the {FFT_SIZE} window")
    frames = kernels.frame_window(x, _HANN, HOP)
    spec = np.fft.rfft(frames, axis=-1)
    re = spec.real
    im = spec.imag
    mag = np.sqrt(re * re + im * im + MAG_EPS)

    def bwd(gy):
        if t.requires_grad:
            scale = gy / mag
            ghat = (re * scale) + 1j * (im * scale)
            ghat[:, :, 1 : FFT_SIZE // 2] *= 0.5
            gframes = FFT_SIZE * np.fft.irfft(ghat, n=FFT_SIZE, axis=-1)
            _accumulate(t, kernels.overlap_add(gframes, _HANN, HOP, L))

    return Tensor(mag, parents=(t,), backward=bwd)


# ---------------------------------------------------------------------------
# network layers
# ---------------------------------------------------------------------------


def weight_norm(v: Tensor, g: Tensor) -> Tensor:
    """Effective weight g_c * v_c / ||v_c||_2, one norm per output channel.

    ``v`` has the output channel on axis 0; the norm runs over all other
    axes.  ``g`` is a vector of per-channel gains.
    """
    vd = v.data
    gd = g.data
    co = vd.shape[0]
    if gd.shape != (co,):
        raise ValueError("gain must be one scalar per output channel")
    flat = vd.reshape(co, -1)
    norms = np.sqrt((flat * flat).sum(axis=1))
    if np.any(norms == 0.0):
        raise ValueError("weight-norm direction has a zero row")
    shape = (co,) + (1,) * (vd.ndim - 1)
    nb = norms.reshape(shape)
    gb = gd.reshape(shape)
    w = gb * vd / nb

    def bwd(gy):
        s = (gy.reshape(co, -1) * flat).sum(axis=1)
        if g.requires_grad:
            _accumulate(g, s / norms)
        if v.requires_grad:
            gv = (gb / nb) * gy - (gb * s.reshape(shape) / nb**3) * vd
            _accumulate(v, gv)

    return Tensor(w, parents=(v, g), backward=bwd)


def conv1d(x: Tensor, w: Tensor, b: Tensor) -> Tensor:
    """Size-3 convolution over time, zero padding 1, stride 1.

    ``x`` is [B, T, C_in], ``w`` is [C_out, C_in, 3], ``b`` is [C_out];
    output is [B, T, C_out].
    """
    xd, wd, bd = x.data, w.data, b.data
    if xd.ndim != 3 or wd.ndim != 3 or wd.shape[2] != 3:
        raise ValueError("conv1d expects x [B,T,Ci] and w [Co,Ci,3]")
    if xd.shape[2] != wd.shape[1]:
        raise ValueError("input channels do not match weight channels")
    if bd.shape != (wd.shape[0],):
        raise ValueError("bias must be one scalar per output channel")
    y = kernels.conv1d_forward(xd, wd, bd)

    def bwd(gy):
        gy = np.ascontiguousarray(gy)
        if x.requires_grad:
            _accumulate(x, kernels.conv1d_backward_input(gy, wd))
        if w.requires_grad or b.requires_grad:
            gw, gbias = kernels.conv1d_backward_weight(xd, gy)
            if w.requires_grad:
                _accumulate(w, gw)
            if b.requires_grad:
                _accumulate(b, gbias)

    return Tensor(y, parents=(x, w, b), backward=bwd)


def leaky_relu(t: Tensor, slope: float = 0.2) -> Tensor:
    x = t.data
    pos = x >= 0.0
    y = np.where(pos, x, slope * x)

    def bwd(gy):
        if t.requires_grad:
            _accumulate(t, np.where(pos, gy, slope * gy))

    return Tensor(y, parents=(t,), backward=bwd)


def avg_pool2(t: Tensor) -> Tensor:
    """Halve the time axis of [B, T, C] by averaging pairs; odd tail dropped."""
    x = t.data
    if x.ndim != 3:
        raise ValueError("avg_pool2 expects a [B, T, C] array")
    B, T, C = x.shape
    if T < 2:
        raise ValueError("avg_pool2 needs at least two time steps")
    half = T // 2
    y = x[:, : 2 * half, :].reshape(B, half, 2, C).mean(axis=2)

    def bwd(gy):
        if t.requires_grad:
            gx = np.zeros_like(x)
            spread = np.repeat(gy * 0.5, 2, axis=1)
            gx[:, : 2 * half, :] = spread
            _accumulate(t, gx)

    return Tensor(y, parents=(t,), backward=bwd)


def global_avg_pool(t: Tensor) -> Tensor:
    """Mean over the time axis: [B, T, C] -> [B, C]."""
    x = t.data
    if x.ndim != 3:
        raise ValueError("global_avg_pool expects a [B, T, C] array")
    T = x.shape[1]
    y = x.mean(axis=1)

    def bwd(gy):
        if t.requires_grad:
            _accumulate(t, np.broadcast_to(gy[:, None, :] / T, x.shape).copy())

    return Tensor(y, parents=(t,), backward=bwd)


def linear(x: Tensor, w: Tensor, b: Tensor) -> Tensor:
    """Affine map: [B, Ci] @ w.T + b with w [Co, Ci], b [Co]."""
    xd, wd, bd = x.data, w.data, b.data
    if xd.ndim != 2 or wd.ndim != 2 or xd.shape[1] != wd.shape[1]:
        raise ValueError("linear expects x [B,Ci] and w [Co,Ci]")
    y = xd @ wd.T + bd

    def bwd(gy):
        if x.requires_grad:
            _accumulate(x, gy @ wd)
        if w.requires_grad:
            _accumulate(w, gy.T @ xd)
        if b.requires_grad:
            _accumulate(b, gy.sum(axis=0))

    return Tensor(y, parents=(x, w, b), backward=bwd)


def exp(t: Tensor) -> Tensor:
    y = np.exp(t.data)

    def bwd(gy):
        if t.requires_grad:
            _accumulate(t, gy * y)

    return Tensor(y, parents=(t,), backward=bwd)


def log(t: Tensor) -> Tensor:
    if np.any(t.data <= 0.0):
        raise ValueError("log needs strictly positive inputs")
    y = np.log(t.data)

    def bwd(gy):
        if t.requires_grad:
            _accumulate(t, gy / t.data)

    return Tensor(y, parents=(t,), backward=bwd)


def squeeze_last(t: Tensor) -> Tensor:
    x = t.data
    if x.shape[-1] != 1:
        raise ValueError("squeeze_last expects a trailing axis of size 1")
    y = x[..., 0]

    def bwd(gy):
        if t.requires_grad:
            _accumulate(t, gy[..., None])

    return Tensor(y, parents=(t,), backward=bwd)


# ---------------------------------------------------------------------------
# loss arithmetic
# ---------------------------------------------------------------------------


def sub_const(t: Tensor, c) -> Tensor:
    y = t.data - np.asarray(c, dtype=np.float64)

    def bwd(gy):
        if t.requires_grad:
            _accumulate(t, gy)

    return Tensor(y, parents=(t,), backward=bwd)


def square(t: Tensor) -> Tensor:
    x = t.data
    y = x * x

    def bwd(gy):
        if t.requires_grad:
            _accumulate(t, 2.0 * x * gy)

    return Tensor(y, parents=(t,), backward=bwd)


def mean_all(t: Tensor) -> Tensor:
    x = t.data
    y = np.asarray(x.mean())

    def bwd(gy):
        if t.requires_grad:
            _accumulate(t, np.broadcast_to(gy / x.size, x.shape).copy())

    return Tensor(y, parents=(t,), backward=bwd)


def sum_all(t: Tensor) -> Tensor:
    x = t.data
    y = np.asarray(x.sum())

    def bwd(gy):
        if t.requires_grad:
            _accumulate(t, np.broadcast_to(gy, x.shape).copy())

    return Tensor(y, parents=(t,), backward=bwd)
