"""Minimal differentiable compute layer for the inertial classifiers.

Layers follow a forward/backward protocol: ``forward`` records what its
gradient needs, ``backward`` consumes that record, accumulates parameter
gradients and returns the gradient with respect to the layer input.
Arrays are batch-first; a layer is used once per forward pass.
"""
from collections import OrderedDict
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Mapping, MutableMapping, Optional, Sequence, Tuple

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from scipy.special import expit

from app.core.errors import ShapeError, UsageError

DEFAULT_DTYPE = np.float32


class Parameter:
    """A trainable array and its gradient buffer"""

    __slots__ = ("name", "value", "grad")

    def __init__(self, name: str, value: np.ndarray):
        self.name = name
        self.value = value
        self.grad = np.zeros_like(value)

    def zero_grad(self) -> None:
        self.grad.fill(0)

    def __repr__(self) -> str:
        return f"Parameter({self.name}, shape={self.value.shape})"


def _uniform(rng: np.random.Generator, bound: float, shape: Tuple[int, ...], dtype) -> np.ndarray:
    return rng.uniform(-bound, bound, size=shape).astype(dtype)


# ---------------------------------------------------------------------------
# Functional operators
# ---------------------------------------------------------------------------

def _batched(x: np.ndarray, ndim: int) -> Tuple[np.ndarray, bool]:
    x = np.asarray(x)
    if x.ndim == ndim - 1:
        return x[None], True
    if x.ndim != ndim:
        raise ShapeError(f"expected a {ndim - 1}-d or batched {ndim}-d input, got shape {x.shape}")
    return x, False


def conv1d_forward(x: np.ndarray, weight: np.ndarray, bias: np.ndarray) -> np.ndarray:
    """``y_f(t) = ReLU(sum_c sum_i w[f, c, i] * x[c, t + i] + b[f])`` with stride 1

    ``x`` is ``(C, L)`` or ``(B, C, L)``; ``weight`` is ``(F, C, k)``.
    """
    xb, squeeze = _batched(x, 3)
    pre = _conv1d_pre(xb, weight, bias)
    y = np.maximum(pre, 0)
    return y[0] if squeeze else y


def _conv1d_pre(x: np.ndarray, weight: np.ndarray, bias: np.ndarray) -> np.ndarray:
    n_filters, n_in, k = weight.shape
    if x.shape[1] != n_in:
        raise ShapeError(f"conv expects {n_in} input channels, got {x.shape[1]}")
    if x.shape[2] < k:
        raise ShapeError(f"conv input length {x.shape[2]} shorter than kernel {k}")
    cols = sliding_window_view(x, k, axis=2)  # (B, C, L', k)
    out = np.tensordot(cols, weight, axes=([1, 3], [1, 2]))  # (B, L', F)
    return out.transpose(0, 2, 1) + bias[None, :, None]


def maxpool1d(y: np.ndarray, d: int = 3) -> np.ndarray:
    """Non-overlapping max over windows of ``d`` steps; a trailing remainder is discarded"""
    yb, squeeze = _batched(y, 3)
    pooled, _ = _maxpool_with_index(yb, d)
    return pooled[0] if squeeze else pooled


def _maxpool_with_index(y: np.ndarray, d: int) -> Tuple[np.ndarray, np.ndarray]:
    if d < 1:
        raise ShapeError(f"pool depth must be >= 1, got {d}")
    length = y.shape[2]
    if length < d:
        raise ShapeError(f"pool input length {length} shorter than depth {d}")
    steps = length // d
    blocks = y[:, :, : steps * d].reshape(y.shape[0], y.shape[1], steps, d)
    index = blocks.argmax(axis=3)
    pooled = np.take_along_axis(blocks, index[..., None], axis=3)[..., 0]
    return pooled, index


def dropout(
    h: np.ndarray, p: float = 0.25, training: bool = True, rng: Optional[np.random.Generator] = None
) -> Tuple[np.ndarray, Optional[np.ndarray]]:
    """Inverted dropout: survivors scaled by ``1 / (1 - p)``; identity in eval mode"""
    if not 0 <= p < 1:
        raise ShapeError(f"dropout rate must be in [0, 1), got {p}")
    if not training or p == 0:
        return h, None
    rng = rng if rng is not None else np.random.default_rng()
    mask = (rng.random(h.shape) >= p).astype(h.dtype) / np.asarray(1 - p, dtype=h.dtype)
    return h * mask, mask


def dense(h: np.ndarray, W: np.ndarray, b: np.ndarray) -> np.ndarray:
    """``y = h W + b`` for ``h`` of shape ``(N,)`` or ``(B, N)`` and ``W`` of shape ``(N, out)``"""
    if h.shape[-1] != W.shape[0] or b.shape != (W.shape[1],):
        raise ShapeError(f"dense shapes do not match: h {h.shape}, W {W.shape}, b {b.shape}")
    return h @ W + b


def softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=-1, keepdims=True)


def softmax_xent(logits: np.ndarray, labels) -> Tuple[float, np.ndarray]:
    """Mean cross-entropy of a stabilized softmax; returns ``(loss, probs)``"""
    logits = np.asarray(logits)
    single = logits.ndim == 1
    lb = logits[None] if single else logits
    labels = np.atleast_1d(np.asarray(labels, dtype=np.int64))
    if lb.shape[-1] < 2:
        raise ShapeError("softmax cross-entropy needs at least two classes")
    if labels.shape[0] != lb.shape[0]:
        raise ShapeError(f"{lb.shape[0]} logit rows but {labels.shape[0]} labels")
    shifted = lb - lb.max(axis=1, keepdims=True)
    log_norm = np.log(np.exp(shifted).sum(axis=1))
    log_probs = shifted - log_norm[:, None]
    loss = float(-log_probs[np.arange(lb.shape[0]), labels].mean())
    probs = np.exp(log_probs)
    return loss, (probs[0] if single else probs)


def softmax_xent_grad(probs: np.ndarray, labels) -> np.ndarray:
    """Gradient of the mean cross-entropy with respect to the logits"""
    pb = probs[None] if probs.ndim == 1 else probs
    labels = np.atleast_1d(np.asarray(labels, dtype=np.int64))
    grad = pb.copy()
    grad[np.arange(pb.shape[0]), labels] -= 1
    grad /= pb.shape[0]
    return grad[0] if probs.ndim == 1 else grad


# ---------------------------------------------------------------------------
# Layers
# ---------------------------------------------------------------------------

class Layer:
    def __init__(self):
        self._cache = None

    def parameters(self) -> List[Parameter]:
        return []

    def forward(self, x: np.ndarray, training: bool = False, rng: Optional[np.random.Generator] = None) -> np.ndarray:
        raise NotImplementedError

    def backward(self, dout: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def _take_cache(self):
        if self._cache is None:
            raise UsageError(f"{type(self).__name__}.backward called without a recorded forward pass")
        cache, self._cache = self._cache, None
        return cache

    def __call__(self, x, training: bool = False, rng: Optional[np.random.Generator] = None):
        return self.forward(x, training=training, rng=rng)


class Conv1d(Layer):
    """1-D convolution with stride 1 and a fused ReLU; input ``(B, C, L)``"""

    def __init__(self, name: str, in_channels: int, filters: int, kernel: int, rng: np.random.Generator, dtype=DEFAULT_DTYPE):
        super().__init__()
        bound = 1.0 / np.sqrt(in_channels * kernel)
        self.weight = Parameter(f"{name}.weight", _uniform(rng, bound, (filters, in_channels, kernel), dtype))
        self.bias = Parameter(f"{name}.bias", _uniform(rng, bound, (filters,), dtype))

    def parameters(self) -> List[Parameter]:
        return [self.weight, self.bias]

    def forward(self, x, training=False, rng=None):
        pre = _conv1d_pre(x, self.weight.value, self.bias.value)
        self._cache = (x, pre)
        return np.maximum(pre, 0)

    def backward(self, dout):
        x, pre = self._take_cache()
        k = self.weight.value.shape[2]
        dpre = dout * (pre > 0)
        cols = sliding_window_view(x, k, axis=2)  # (B, C, L', k)
        self.weight.grad += np.tensordot(dpre, cols, axes=([0, 2], [0, 2]))
        self.bias.grad += dpre.sum(axis=(0, 2))
        dcols = np.tensordot(dpre, self.weight.value, axes=([1], [0]))  # (B, L', C, k)
        dx = np.zeros_like(x)
        steps = dpre.shape[2]
        for i in range(k):
            dx[:, :, i : i + steps] += dcols[:, :, :, i].transpose(0, 2, 1)
        return dx


class MaxPool1d(Layer):
    def __init__(self, depth: int = 3):
        super().__init__()
        self.depth = depth

    def forward(self, x, training=False, rng=None):
        pooled, index = _maxpool_with_index(x, self.depth)
        self._cache = (x.shape, index)
        return pooled

    def backward(self, dout):
        shape, index = self._take_cache()
        batch, channels, steps = index.shape
        blocks = np.zeros((batch, channels, steps, self.depth), dtype=dout.dtype)
        np.put_along_axis(blocks, index[..., None], dout[..., None], axis=3)
        dx = np.zeros(shape, dtype=dout.dtype)
        dx[:, :, : steps * self.depth] = blocks.reshape(batch, channels, steps * self.depth)
        return dx


class ChannelsLast(Layer):
    """``(B, C, T)`` to ``(B, T, C)``"""

    def forward(self, x, training=False, rng=None):
        self._cache = True
        return x.transpose(0, 2, 1)

    def backward(self, dout):
        self._take_cache()
        return dout.transpose(0, 2, 1)


class _LstmDirection:
    """One direction of an LSTM; gate order is input, forget, candidate, output"""

    def __init__(self, name: str, in_features: int, hidden: int, rng: np.random.Generator, dtype):
        bound = 1.0 / np.sqrt(hidden)
        self.hidden = hidden
        self.wx = Parameter(f"{name}.wx", _uniform(rng, bound, (in_features, 4 * hidden), dtype))
        self.wh = Parameter(f"{name}.wh", _uniform(rng, bound, (hidden, 4 * hidden), dtype))
        b = np.zeros(4 * hidden, dtype=dtype)
        b[hidden : 2 * hidden] = 1
        self.b = Parameter(f"{name}.b", b)

    def parameters(self) -> List[Parameter]:
        return [self.wx, self.wh, self.b]

    def forward(self, x: np.ndarray, reverse: bool):
        batch, steps, _ = x.shape
        H = self.hidden
        xz = x @ self.wx.value + self.b.value  # (B, T, 4H)
        h = np.zeros((batch, H), dtype=x.dtype)
        c = np.zeros((batch, H), dtype=x.dtype)
        out = np.zeros((batch, steps, H), dtype=x.dtype)
        gates = np.zeros((batch, steps, 4 * H), dtype=x.dtype)
        c_prev_all = np.zeros((batch, steps, H), dtype=x.dtype)
        tanh_c_all = np.zeros((batch, steps, H), dtype=x.dtype)
        h_prev_all = np.zeros((batch, steps, H), dtype=x.dtype)
        order = range(steps - 1, -1, -1) if reverse else range(steps)
        for t in order:
            z = xz[:, t] + h @ self.wh.value
            act = np.empty_like(z)
            act[:, : 2 * H] = expit(z[:, : 2 * H])
            act[:, 2 * H : 3 * H] = np.tanh(z[:, 2 * H : 3 * H])
            act[:, 3 * H :] = expit(z[:, 3 * H :])
            i, f, g, o = act[:, :H], act[:, H : 2 * H], act[:, 2 * H : 3 * H], act[:, 3 * H :]
            h_prev_all[:, t] = h
            c_prev_all[:, t] = c
            c = f * c + i * g
            tanh_c = np.tanh(c)
            h = o * tanh_c
            gates[:, t] = act
            tanh_c_all[:, t] = tanh_c
            out[:, t] = h
        cache = (x, gates, c_prev_all, tanh_c_all, h_prev_all, reverse)
        return out, cache

    def backward(self, dout: np.ndarray, cache) -> np.ndarray:
        x, gates, c_prev_all, tanh_c_all, h_prev_all, reverse = cache
        batch, steps, _ = x.shape
        H = self.hidden
        dz_all = np.zeros_like(gates)
        dh_next = np.zeros((batch, H), dtype=dout.dtype)
        dc_next = np.zeros((batch, H), dtype=dout.dtype)
        order = range(steps) if reverse else range(steps - 1, -1, -1)
        for t in order:
            act = gates[:, t]
            i, f, g, o = act[:, :H], act[:, H : 2 * H], act[:, 2 * H : 3 * H], act[:, 3 * H :]
            tanh_c = tanh_c_all[:, t]
            dh = dout[:, t] + dh_next
            dc = dc_next + dh * o * (1 - tanh_c * tanh_c)
            dz = dz_all[:, t]
            dz[:, :H] = dc * g * i * (1 - i)
            dz[:, H : 2 * H] = dc * c_prev_all[:, t] * f * (1 - f)
            dz[:, 2 * H : 3 * H] = dc * i * (1 - g * g)
            dz[:, 3 * H :] = dh * tanh_c * o * (1 - o)
            dc_next = dc * f
            dh_next = dz @ self.wh.value.T
        self.wx.grad += np.tensordot(x, dz_all, axes=([0, 1], [0, 1]))
        self.wh.grad += np.tensordot(h_prev_all, dz_all, axes=([0, 1], [0, 1]))
        self.b.grad += dz_all.sum(axis=(0, 1))
        return dz_all @ self.wx.value.T


class BiLSTM(Layer):
    """Bidirectional LSTM over ``(B, T, C)``; per-step output ``[h_forward ; h_backward]``"""

    def __init__(self, name: str, in_features: int, hidden: int, rng: np.random.Generator, dtype=DEFAULT_DTYPE):
        super().__init__()
        self.hidden = hidden
        self.forward_cell = _LstmDirection(f"{name}.fwd", in_features, hidden, rng, dtype)
        self.backward_cell = _LstmDirection(f"{name}.bwd", in_features, hidden, rng, dtype)

    def parameters(self) -> List[Parameter]:
        return self.forward_cell.parameters() + self.backward_cell.parameters()

    def forward(self, x, training=False, rng=None):
        if x.ndim != 3 or x.shape[1] < 1:
            raise ShapeError(f"Bi-LSTM expects (B, T>=1, C), got {x.shape}")
        out_f, cache_f = self.forward_cell.forward(x, reverse=False)
        out_b, cache_b = self.backward_cell.forward(x, reverse=True)
        self._cache = (cache_f, cache_b)
        return np.concatenate([out_f, out_b], axis=2)

    def backward(self, dout):
        cache_f, cache_b = self._take_cache()
        H = self.hidden
        dx = self.forward_cell.backward(dout[:, :, :H], cache_f)
        dx += self.backward_cell.backward(dout[:, :, H:], cache_b)
        return dx


def bilstm_forward(x: np.ndarray, hidden: int, layer: Optional[BiLSTM] = None, seed: int = 0) -> np.ndarray:
    """Run a Bi-LSTM over ``(L, C)`` or ``(B, L, C)``; returns ``(L, 2H)`` or ``(B, L, 2H)``"""
    xb, squeeze = _batched(x, 3)
    if layer is None:
        layer = BiLSTM("bilstm", xb.shape[2], hidden, np.random.default_rng(seed), dtype=xb.dtype)
    out = layer.forward(xb)
    layer._cache = None
    return out[0] if squeeze else out


class TemporalReduce(Layer):
    """Collapse the Bi-LSTM sequence to one feature vector.

    ``last`` takes the forward state at the last step and the backward state at
    the first step; ``mean`` averages every step.
    """

    def __init__(self, hidden: int, mode: str = "last"):
        super().__init__()
        if mode not in ("last", "mean"):
            raise ShapeError(f"unknown temporal reduction {mode!r}")
        self.hidden = hidden
        self.mode = mode

    def forward(self, x, training=False, rng=None):
        self._cache = x.shape
        if self.mode == "mean":
            return x.mean(axis=1)
        H = self.hidden
        return np.concatenate([x[:, -1, :H], x[:, 0, H:]], axis=1)

    def backward(self, dout):
        shape = self._take_cache()
        if self.mode == "mean":
            return np.broadcast_to(dout[:, None, :] / shape[1], shape).copy()
        H = self.hidden
        dx = np.zeros(shape, dtype=dout.dtype)
        dx[:, -1, :H] = dout[:, :H]
        dx[:, 0, H:] += dout[:, H:]
        return dx


class Dropout(Layer):
    def __init__(self, p: float = 0.25):
        super().__init__()
        if not 0 <= p < 1:
            raise ShapeError(f"dropout rate must be in [0, 1), got {p}")
        self.p = p

    def forward(self, x, training=False, rng=None):
        out, mask = dropout(x, self.p, training=training, rng=rng)
        self._cache = (mask,)
        return out

    def backward(self, dout):
        (mask,) = self._take_cache()
        return dout if mask is None else dout * mask


class Dense(Layer):
    """Fully connected layer ``y = h W + b`` with ``W`` of shape ``(in, out)``"""

    def __init__(self, name: str, in_features: int, out_features: int, rng: np.random.Generator, dtype=DEFAULT_DTYPE):
        super().__init__()
        bound = 1.0 / np.sqrt(in_features)
        self.W = Parameter(f"{name}.W", _uniform(rng, bound, (in_features, out_features), dtype))
        self.b = Parameter(f"{name}.b", _uniform(rng, bound, (out_features,), dtype))

    def parameters(self) -> List[Parameter]:
        return [self.W, self.b]

    def forward(self, x, training=False, rng=None):
        self._cache = x
        return dense(x, self.W.value, self.b.value)

    def backward(self, dout):
        x = self._take_cache()
        self.W.grad += x.T @ dout
        self.b.grad += dout.sum(axis=0)
        return dout @ self.W.value.T


class ReLU(Layer):
    def forward(self, x, training=False, rng=None):
        self._cache = x > 0
        return x * self._cache

    def backward(self, dout):
        return dout * self._take_cache()


class Sequential(Layer):
    def __init__(self, *layers: Layer):
        super().__init__()
        self.layers = list(layers)

    def parameters(self) -> List[Parameter]:
        return [p for layer in self.layers for p in layer.parameters()]

    def forward(self, x, training=False, rng=None):
        for layer in self.layers:
            x = layer.forward(x, training=training, rng=rng)
        return x

    def backward(self, dout):
        for layer in reversed(self.layers):
            dout = layer.backward(dout)
        return dout


# ---------------------------------------------------------------------------
# Gradients and optimizer
# ---------------------------------------------------------------------------

def backward(graph: Layer, dloss: np.ndarray) -> "OrderedDict[str, np.ndarray]":
    """Reverse pass over a graph whose forward pass was just recorded.

    ``dloss`` is the gradient of the loss with respect to the graph output.
    Gradients are reset first, so the result belongs to this pass only.
    """
    params = graph.parameters()
    for p in params:
        p.zero_grad()
    graph.backward(dloss)
    return OrderedDict((p.name, p.grad) for p in params)


@dataclass
class AdamState:
    lr: float = 0.001
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step: int = 0
    m: Dict[str, np.ndarray] = field(default_factory=dict)
    v: Dict[str, np.ndarray] = field(default_factory=dict)


def adam_step(params: MutableMapping[str, np.ndarray], grads: Mapping[str, np.ndarray], state: AdamState) -> None:
    """Bias-corrected Adam update applied to ``params`` in place"""
    for name, value in params.items():
        if name not in grads:
            raise ShapeError(f"no gradient for parameter {name}")
        if grads[name].shape != value.shape:
            raise ShapeError(f"gradient of {name} has shape {grads[name].shape}, parameter {value.shape}")
    state.step += 1
    bc1 = 1.0 - state.beta1 ** state.step
    bc2 = 1.0 - state.beta2 ** state.step
    for name, value in params.items():
        g = grads[name]
        if name not in state.m:
            state.m[name] = np.zeros_like(value)
            state.v[name] = np.zeros_like(value)
        m, v = state.m[name], state.v[name]
        m *= state.beta1
        m += (1.0 - state.beta1) * g
        v *= state.beta2
        v += (1.0 - state.beta2) * (g * g)
        update = state.lr * (m / bc1) / (np.sqrt(v / bc2) + state.eps)
        value -= update.astype(value.dtype, copy=False)


def parameter_arrays(graph: Layer) -> "OrderedDict[str, np.ndarray]":
    return OrderedDict((p.name, p.value) for p in graph.parameters())


def all_finite(arrays: Iterable[np.ndarray]) -> bool:
    return all(bool(np.all(np.isfinite(a))) for a in arrays)


def count_parameters(params: Sequence[Parameter]) -> int:
    return int(sum(p.value.size for p in params))
