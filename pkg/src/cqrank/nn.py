"""From-scratch feed-forward classifier: three linear layers, rectifier
hidden activations, inverted dropout before each linear layer, softmax
output, cross-entropy loss, analytic backprop, Adam updates.

All arithmetic is float64; float32 appears only at storage boundaries.
"""

from __future__ import annotations

import hashlib
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

LOG_FLOOR = 1e-12


class NumericError(ArithmeticError):
    """A non-finite value appeared where finite math was required."""


@dataclass
class DenseLayer:
    weights: np.ndarray  # [out, in]
    bias: np.ndarray  # [out]


@dataclass
class MlpModel:
    layers: list[DenseLayer]
    input_dim: int
    hidden_dims: tuple[int, int]
    output_dim: int = 2
    dropout_rate: float = 0.4

    def shapes(self) -> list[tuple[int, int]]:
        return [l.weights.shape for l in self.layers]


@dataclass
class AdamState:
    m: list[DenseLayer]
    v: list[DenseLayer]
    t: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    learning_rate: float = 0.01


@dataclass
class ForwardCache:
    inputs: list[np.ndarray]  # post-dropout input to each linear layer
    pre_acts: list[np.ndarray]  # z of each linear layer
    masks: list[np.ndarray | None]  # dropout mask (already /keep_prob) per layer
    probs: np.ndarray
    mode: str
    squeezed: bool = False


def init_model(
    input_dim: int,
    hidden_dims: tuple[int, int] = (512, 256),
    dropout_rate: float = 0.4,
    seed: int = 0,
) -> MlpModel:
    """Kaiming-style uniform init scaled by fan-in, zero biases, seeded."""
    rng = np.random.default_rng(seed)
    dims = [input_dim, hidden_dims[0], hidden_dims[1], 2]
    layers = []
    for fan_in, fan_out in zip(dims[:-1], dims[1:]):
        limit = np.sqrt(6.0 / fan_in)
        w = rng.uniform(-limit, limit, size=(fan_out, fan_in))
        layers.append(DenseLayer(w, np.zeros(fan_out)))
    return MlpModel(layers, input_dim, tuple(hidden_dims), 2, dropout_rate)


def softmax(logits: np.ndarray) -> np.ndarray:
    """Max-subtracted stable softmax over the last axis."""
    logits = np.asarray(logits, dtype=np.float64)
    if not np.all(np.isfinite(logits)):
        raise NumericError("non-finite logits")
    shifted = logits - logits.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=-1, keepdims=True)


def cross_entropy(probs: np.ndarray, label) -> float | np.ndarray:
    """-log p[label], probabilities floored at 1e-12 before the log.

    Accepts a single probability vector with an int label, or a batch
    [n, 2] with an int array, returning the per-example losses.
    """
    probs = np.asarray(probs, dtype=np.float64)
    labels = np.asarray(label)
    if np.any((labels != 0) & (labels != 1)):
        raise ValueError(f"label must be 0 or 1, got {label!r}")
    if probs.ndim == 1:
        return -np.log(max(probs[int(labels)], LOG_FLOOR))
    picked = probs[np.arange(probs.shape[0]), labels]
    return -np.log(np.maximum(picked, LOG_FLOOR))


def forward(
    model: MlpModel,
    x: np.ndarray,
    mode: str = "infer",
    rng: np.random.Generator | None = None,
) -> tuple[np.ndarray, ForwardCache]:
    """Run the network; returns (probs, cache).

    ``x`` may be one vector [d] or a batch [n, d]. In train mode an rng must
    be supplied when dropout_rate > 0; inverted dropout is applied before
    each of the three linear layers. Inference applies no dropout.
    """
    if mode not in ("train", "infer"):
        raise ValueError(f"mode must be 'train' or 'infer', got {mode!r}")
    x = np.asarray(x, dtype=np.float64)
    squeezed = x.ndim == 1
    if squeezed:
        x = x[None, :]
    if x.shape[1] != model.input_dim:
        raise ValueError(f"input dim {x.shape[1]} != model input_dim {model.input_dim}")
    drop = mode == "train" and model.dropout_rate > 0.0
    if drop and rng is None:
        raise ValueError("train mode with dropout requires an rng")
    keep = 1.0 - model.dropout_rate

    h = x
    inputs, pre_acts, masks = [], [], []
    for i, layer in enumerate(model.layers):
        if drop:
            mask = (rng.random(h.shape) < keep).astype(np.float64) / keep
            h = h * mask
        else:
            mask = None
        masks.append(mask)
        inputs.append(h)
        z = h @ layer.weights.T + layer.bias
        if not np.all(np.isfinite(z)):
            raise NumericError(f"non-finite activation at linear layer {i}")
        pre_acts.append(z)
        if i < len(model.layers) - 1:
            h = np.maximum(z, 0.0)
    probs = softmax(pre_acts[-1])
    cache = ForwardCache(inputs, pre_acts, masks, probs, mode, squeezed)
    return (probs[0] if squeezed else probs), cache


def backward(
    model: MlpModel,
    cache: ForwardCache,
    label,
    sample_weights: np.ndarray | None = None,
) -> list[DenseLayer]:
    """Analytic gradients of the mean cross-entropy over the cached batch.

    Returns per-layer gradients with the same shapes as the parameters.
    ``sample_weights`` rescales each example's loss (still divided by n).
    """
    labels = np.atleast_1d(np.asarray(label))
    probs = cache.probs
    n = probs.shape[0]
    if labels.shape != (n,):
        raise ValueError(f"got {labels.shape[0] if labels.ndim else 1} labels for batch of {n}")
    onehot = np.zeros_like(probs)
    onehot[np.arange(n), labels] = 1.0
    delta = (probs - onehot) / n
    if sample_weights is not None:
        delta = delta * np.asarray(sample_weights, dtype=np.float64)[:, None]

    grads: list[DenseLayer] = [None] * len(model.layers)  # type: ignore[list-item]
    for i in reversed(range(len(model.layers))):
        inp = cache.inputs[i]
        grads[i] = DenseLayer(delta.T @ inp, delta.sum(axis=0))
        if i > 0:
            dh = delta @ model.layers[i].weights
            if cache.masks[i] is not None:
                dh = dh * cache.masks[i]
            delta = dh * (cache.pre_acts[i - 1] > 0.0)
    return grads


def adam_step(model: MlpModel, grads: list[DenseLayer], state: AdamState) -> tuple[MlpModel, AdamState]:
    """One bias-corrected Adam update, in place; increments state.t."""
    for g in grads:
        if not (np.all(np.isfinite(g.weights)) and np.all(np.isfinite(g.bias))):
            raise NumericError("non-finite gradient; step aborted")
    state.t += 1
    b1, b2 = state.beta1, state.beta2
    bc1 = 1.0 - b1**state.t
    bc2 = 1.0 - b2**state.t
    for layer, g, m, v in zip(model.layers, grads, state.m, state.v):
        for attr in ("weights", "bias"):
            gval = getattr(g, attr)
            mval = getattr(m, attr)
            vval = getattr(v, attr)
            mval *= b1
            mval += (1.0 - b1) * gval
            vval *= b2
            vval += (1.0 - b2) * gval**2
            update = state.learning_rate * (mval / bc1) / (np.sqrt(vval / bc2) + state.epsilon)
            param = getattr(layer, attr)
            param -= update
            if not np.all(np.isfinite(param)):
                raise NumericError("non-finite parameter after update")
    return model, state


def init_adam(model: MlpModel, learning_rate: float = 0.01, **kwargs) -> AdamState:
    zeros = lambda: [
        DenseLayer(np.zeros_like(l.weights), np.zeros_like(l.bias)) for l in model.layers
    ]
    return AdamState(m=zeros(), v=zeros(), learning_rate=learning_rate, **kwargs)


def loss_on(model: MlpModel, x: np.ndarray, label) -> float:
    probs, _ = forward(model, x, mode="infer")
    val = cross_entropy(probs, label)
    return float(np.mean(val))


def grad_check(model: MlpModel, x: np.ndarray, label, h: float = 1e-5) -> float:
    """Max relative error of analytic vs central-finite-difference gradients.

    Dropout must be off (rate 0 or infer-style single pass is used for the
    numeric side, so a nonzero rate would desynchronize the two).
    """
    probs, cache = forward(model, x, mode="infer")
    analytic = backward(model, cache, label)
    worst = 0.0
    for layer, grad in zip(model.layers, analytic):
        for attr in ("weights", "bias"):
            param = getattr(layer, attr)
            g = getattr(grad, attr)
            it = np.nditer(param, flags=["multi_index"])
            for _ in it:
                idx = it.multi_index
                orig = param[idx]
                param[idx] = orig + h
                lp = loss_on(model, x, label)
                param[idx] = orig - h
                lm = loss_on(model, x, label)
                param[idx] = orig
                numeric = (lp - lm) / (2.0 * h)
                a = g[idx]
                denom = max(abs(a), abs(numeric), 1e-8)
                worst = max(worst, abs(a - numeric) / denom)
    return worst


# --- checkpoint format -------------------------------------------------------
#
# magic "CQMLP1", u16 version, u32 input_dim, u32 h1, u32 h2, u32 output_dim,
# f64 dropout_rate, then per layer weights (row-major f64) and bias, then
# u64 t, f64 beta1/beta2/epsilon/learning_rate, then m and v in the same
# per-layer layout, then an 8-byte checksum (first 8 bytes of SHA-256 over
# all prior bytes). Little-endian throughout; round-trips are bit-exact.

CKPT_MAGIC = b"CQMLP1"
CKPT_VERSION = 1
_CKPT_HEADER = struct.Struct("<6sHIIIId")


class CheckpointError(ValueError):
    """The file is not a valid model checkpoint."""


def _pack_layers(layers: list[DenseLayer]) -> bytes:
    parts = []
    for l in layers:
        parts.append(np.ascontiguousarray(l.weights, dtype="<f8").tobytes())
        parts.append(np.ascontiguousarray(l.bias, dtype="<f8").tobytes())
    return b"".join(parts)


def _unpack_layers(data: bytes, off: int, dims: list[int]) -> tuple[list[DenseLayer], int]:
    layers = []
    for fan_in, fan_out in zip(dims[:-1], dims[1:]):
        nw = fan_out * fan_in * 8
        w = np.frombuffer(data, "<f8", fan_out * fan_in, off).reshape(fan_out, fan_in).copy()
        off += nw
        b = np.frombuffer(data, "<f8", fan_out, off).copy()
        off += fan_out * 8
        layers.append(DenseLayer(w, b))
    return layers, off


def save_checkpoint(model: MlpModel, state: AdamState, path) -> None:
    body = bytearray(
        _CKPT_HEADER.pack(
            CKPT_MAGIC,
            CKPT_VERSION,
            model.input_dim,
            model.hidden_dims[0],
            model.hidden_dims[1],
            model.output_dim,
            model.dropout_rate,
        )
    )
    body += _pack_layers(model.layers)
    body += struct.pack("<Qdddd", state.t, state.beta1, state.beta2, state.epsilon, state.learning_rate)
    body += _pack_layers(state.m)
    body += _pack_layers(state.v)
    body += hashlib.sha256(bytes(body)).digest()[:8]
    Path(path).write_bytes(bytes(body))


def load_checkpoint(path) -> tuple[MlpModel, AdamState]:
    path = Path(path)
    data = path.read_bytes()
    if len(data) < _CKPT_HEADER.size + 8:
        raise CheckpointError(f"{path}: truncated checkpoint")
    if hashlib.sha256(data[:-8]).digest()[:8] != data[-8:]:
        raise CheckpointError(f"{path}: checksum failure")
    magic, version, input_dim, h1, h2, output_dim, dropout_rate = _CKPT_HEADER.unpack_from(data, 0)
    if magic != CKPT_MAGIC:
        raise CheckpointError(f"{path}: not a model checkpoint (bad magic)")
    if version != CKPT_VERSION:
        raise CheckpointError(f"{path}: unsupported version {version}")
    dims = [input_dim, h1, h2, output_dim]
    off = _CKPT_HEADER.size
    layers, off = _unpack_layers(data, off, dims)
    t, b1, b2, eps, lr = struct.unpack_from("<Qdddd", data, off)
    off += struct.calcsize("<Qdddd")
    m, off = _unpack_layers(data, off, dims)
    v, off = _unpack_layers(data, off, dims)
    if off != len(data) - 8:
        raise CheckpointError(f"{path}: {len(data) - 8 - off} trailing bytes")
    model = MlpModel(layers, input_dim, (h1, h2), output_dim, dropout_rate)
    state = AdamState(m=m, v=v, t=t, beta1=b1, beta2=b2, epsilon=eps, learning_rate=lr)
    return model, state
