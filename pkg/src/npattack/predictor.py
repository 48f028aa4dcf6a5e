"""Neural magnitude predictor: maps a direction to a boundary distance.

The network scores a direction theta by max-normalizing it, taking a
magnitude STFT, and running a small weight-normalized conv stack:

    stft [B,T,513] -> conv(513->32) -> 4 x [leaky_relu -> conv(32->32)
    -> halve time] -> global average pool -> linear(32->1) -> exp

The exp head keeps predictions positive; training minimizes the mean
squared error between log(prediction) and log(observed distance).  Time
halving is skipped once only a single frame remains, so 1024-sample
inputs (one STFT frame) flow through the same stack.
"""

import dataclasses

import numpy as np

from . import autodiff as ad
from .optim import Adam, exp_decay

HIDDEN_CHANNELS = 32
N_BLOCKS = 4
LEAKY_SLOPE = 0.2


@dataclasses.dataclass
class LayerParams:
    """Weight-normalized layer: direction v, per-channel gain g, bias b."""

    v: ad.Tensor
    g: ad.Tensor
    b: ad.Tensor

    def tensors(self):
        return [self.v, self.g, self.b]


def _init_layer(rng, shape):
    fan_in = int(np.prod(shape[1:]))
    v = rng.standard_normal(shape) / np.sqrt(fan_in)
    g = np.sqrt((v.reshape(shape[0], -1) ** 2).sum(axis=1))
    b = np.zeros(shape[0])
    return LayerParams(ad.parameter(v), ad.parameter(g), ad.parameter(b))


class PredictorParams:
    """All trainable tensors, in a stable order for the optimizer."""

    def __init__(self, seed=0):
        rng = np.random.default_rng(seed)
        self.in_conv = _init_layer(rng, (HIDDEN_CHANNELS, ad.N_BINS, 3))
        self.blocks = [
            _init_layer(rng, (HIDDEN_CHANNELS, HIDDEN_CHANNELS, 3))
            for _ in range(N_BLOCKS)
        ]
        self.head = _init_layer(rng, (1, HIDDEN_CHANNELS))

    def layers(self):
        return [self.in_conv] + self.blocks + [self.head]

    def tensors(self):
        out = []
        for layer in self.layers():
            out.extend(layer.tensors())
        return out

    def zero_grad(self):
        for t in self.tensors():
            t.grad = None

    def named_arrays(self):
        names = ["in_conv"] + [f"block{i}" for i in range(N_BLOCKS)] + ["head"]
        out = {}
        for name, layer in zip(names, self.layers()):
            out[f"{name}_v"] = layer.v.data
            out[f"{name}_g"] = layer.g.data
            out[f"{name}_b"] = layer.b.data
        return out

    def save(self, path):
        np.savez(path, **self.named_arrays())

    @classmethod
    def load(cls, path):
        params = cls()
        with np.load(path) as blob:
            stored = dict(blob)
        for name, arr in params.named_arrays().items():
            if name not in stored:
                raise ValueError(f"checkpoint is missing array {name!r}")
            if stored[name].shape != arr.shape:
                raise ValueError(f"checkpoint array {name!r} has wrong shape")
        names = ["in_conv"] + [f"block{i}" for i in range(N_BLOCKS)] + ["head"]
        for name, layer in zip(names, params.layers()):
            layer.v.data = stored[f"{name}_v"].astype(np.float64)
            layer.g.data = stored[f"{name}_g"].astype(np.float64)
            layer.b.data = stored[f"{name}_b"].astype(np.float64)
        return params


def scores(params: PredictorParams, theta: ad.Tensor) -> ad.Tensor:
    """Pre-exp scores s = log h for a [B, D] direction tensor."""
    u = ad.linf_normalize(theta)
    if u.shape[1] < ad.FFT_SIZE:
        u = ad.pad_to(u, ad.FFT_SIZE)
    h = ad.stft_magnitude(u)
    h = ad.conv1d(
        h, ad.weight_norm(params.in_conv.v, params.in_conv.g), params.in_conv.b
    )
    for blk in params.blocks:
        h = ad.leaky_relu(h, LEAKY_SLOPE)
        h = ad.conv1d(h, ad.weight_norm(blk.v, blk.g), blk.b)
        if h.shape[1] >= 2:
            h = ad.avg_pool2(h)
    z = ad.global_avg_pool(h)
    s = ad.linear(z, ad.weight_norm(params.head.v, params.head.g), params.head.b)
    return ad.squeeze_last(s)


def forward(params: PredictorParams, theta: ad.Tensor) -> ad.Tensor:
    """Predicted distances h = exp(s), always positive."""
    return ad.exp(scores(params, theta))


def predict(params: PredictorParams, thetas: np.ndarray) -> np.ndarray:
    """Plain-array convenience wrapper; accepts [D] or [B, D]."""
    arr = np.asarray(thetas, dtype=np.float64)
    single = arr.ndim == 1
    if single:
        arr = arr[None, :]
    out = forward(params, ad.constant(arr)).data
    return float(out[0]) if single else out


def loss_tensor(params, thetas: np.ndarray, magnitudes: np.ndarray) -> ad.Tensor:
    """Mean squared log error against observed distances (must be > 0).

    The loss compares log(h) with log(lambda) rather than the algebraically
    equal pre-exp score with log(lambda).  Both sides then go through the
    same log, so the loss is exactly zero whenever the predicted distances
    equal the observed ones bit for bit.
    """
    mags = np.asarray(magnitudes, dtype=np.float64)
    if np.any(mags <= 0.0):
        raise ValueError("observed distances must be positive")
    theta_t = ad.constant(np.asarray(thetas, dtype=np.float64))
    log_h = ad.log(forward(params, theta_t))
    return ad.mean_all(ad.square(ad.sub_const(log_h, np.log(mags))))


def loss_value(params, thetas, magnitudes) -> float:
    return float(loss_tensor(params, thetas, magnitudes).data)


@dataclasses.dataclass(frozen=True)
class TrainConfig:
    epochs: int = 300
    batch_size: int = 32
    lr: float = 1e-4
    lr_decay: float = 0.99
    seed: int = 0

    def __post_init__(self):
        if self.epochs < 1 or self.batch_size < 1:
            raise ValueError("epochs and batch_size must be positive")
        if self.lr <= 0.0 or not 0.0 < self.lr_decay <= 1.0:
            raise ValueError("lr must be positive and lr_decay in (0, 1]")


def train(params, thetas, magnitudes, cfg: TrainConfig, optimizer=None):
    """Minibatch Adam on the dataset; returns per-epoch mean losses.

    The learning rate decays by ``lr_decay`` each epoch.  Passing the
    optimizer back in keeps Adam moments across refresh rounds.
    """
    thetas = np.asarray(thetas, dtype=np.float64)
    mags = np.asarray(magnitudes, dtype=np.float64)
    if thetas.ndim != 2 or thetas.shape[0] != mags.shape[0]:
        raise ValueError("need matching [N, D] directions and [N] distances")
    n = thetas.shape[0]
    if n == 0:
        raise ValueError("cannot train on an empty dataset")
    if optimizer is None:
        optimizer = Adam(params.tensors(), lr=cfg.lr)
    rng = np.random.default_rng(cfg.seed)
    history = []
    for epoch in range(cfg.epochs):
        lr = exp_decay(cfg.lr, epoch, cfg.lr_decay)
        perm = rng.permutation(n)
        epoch_losses = []
        for start in range(0, n, cfg.batch_size):
            idx = perm[start : start + cfg.batch_size]
            optimizer.zero_grad()
            loss = loss_tensor(params, thetas[idx], mags[idx])
            loss.backward()
            optimizer.step(lr=lr)
            epoch_losses.append(float(loss.data))
        history.append(float(np.mean(epoch_losses)))
    return history


def optimize_directions(params, dim, count, steps, lr, rng, init=None):
    """Descend predicted distance from random starts; returns the best
    iterate of each run.

    Runs ``count`` starts as one batch; elementwise Adam makes the batch
    exactly equivalent to independent runs.  The objective is the pre-exp
    score, which ranks directions identically to the positive output.
    Returns (directions [count, D], scores [count]).
    """
    if init is None:
        theta = rng.uniform(-1.0, 1.0, size=(count, dim))
    else:
        theta = np.array(init, dtype=np.float64)
        if theta.shape != (count, dim):
            raise ValueError("init must have shape [count, dim]")
    t = ad.parameter(theta.copy())
    opt = Adam([t], lr=lr)
    best = theta.copy()
    best_s = np.full(count, np.inf)
    for _ in range(steps):
        opt.zero_grad()
        s = scores(params, t)
        total = ad.sum_all(s)
        total.backward()
        better = s.data < best_s
        best[better] = t.data[better]
        best_s = np.minimum(best_s, s.data)
        opt.step()
    final = scores(params, ad.constant(t.data)).data
    better = final < best_s
    best[better] = t.data[better]
    best_s = np.minimum(best_s, final)
    return best, best_s


def optimize_direction(params, dim, steps, lr, rng):
    """Single-start convenience wrapper around ``optimize_directions``."""
    best, best_s = optimize_directions(params, dim, 1, steps, lr, rng)
    return best[0], float(best_s[0])
