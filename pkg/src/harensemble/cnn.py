"""Third pipeline: a per-axis 1D CNN with concatenated feature maps.

Each channel goes through its own block (valid convolution, ReLU,
non-overlapping max-pool); the flattened maps are concatenated in channel
order and fed to two ReLU dense layers and a softmax output. Gradients are
written out by hand and checked against finite differences in the tests.
"""

from __future__ import annotations

import logging
import struct
import warnings
from dataclasses import dataclass, field, fields, replace
from pathlib import Path

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .core import HarError
from .fusion import compute_class_weights

log = logging.getLogger(__name__)

PARAM_NAMES = ("conv_w", "conv_b", "fc1_w", "fc1_b", "fc2_w", "fc2_b", "out_w", "out_b")
_LOG_FLOOR = 1e-12


@dataclass(frozen=True)
class CnnArchitecture:
    window: int = 64
    n_channels: int = 4
    filters: int = 3
    filter_size: int = 20
    pool_size: int = 3
    fc1: int = 1024
    fc2: int = 30
    n_classes: int = 10

    def __post_init__(self):
        for f in fields(self):
            if getattr(self, f.name) < 1:
                raise HarError(f"{f.name} must be ≥ 1")
        if self.window < self.filter_size:
            raise HarError(f"window ({self.window}) shorter than filter_size ({self.filter_size})")
        if self.pooled_length < 1:
            raise HarError("pool_size exceeds the convolution output length")

    @property
    def conv_length(self) -> int:
        return self.window - self.filter_size + 1

    @property
    def pooled_length(self) -> int:
        return self.conv_length // self.pool_size

    @property
    def axis_width(self) -> int:
        return self.pooled_length * self.filters

    @property
    def concat_width(self) -> int:
        return self.axis_width * self.n_channels

    def shapes(self) -> dict[str, tuple]:
        return {
            "conv_w": (self.n_channels, self.filters, self.filter_size),
            "conv_b": (self.n_channels, self.filters),
            "fc1_w": (self.concat_width, self.fc1),
            "fc1_b": (self.fc1,),
            "fc2_w": (self.fc1, self.fc2),
            "fc2_b": (self.fc2,),
            "out_w": (self.fc2, self.n_classes),
            "out_b": (self.n_classes,),
        }


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 0.01
    momentum: float = 0.9
    epochs: int = 50
    batch_size: int = 32
    seed: int = 0
    class_weighting: bool = True

    def __post_init__(self):
        if self.learning_rate < 0:
            raise HarError("learning_rate must be ≥ 0")
        if not 0.0 <= self.momentum < 1.0:
            raise HarError("momentum must lie in [0, 1)")
        if self.batch_size < 1 or self.epochs < 0:
            raise HarError("batch_size must be ≥ 1 and epochs ≥ 0")


class CnnWeights(dict):
    """Parameter tensors keyed by PARAM_NAMES."""

    @classmethod
    def zeros(cls, arch: CnnArchitecture) -> "CnnWeights":
        return cls({k: np.zeros(s) for k, s in arch.shapes().items()})

    @classmethod
    def he_init(cls, arch: CnnArchitecture, rng: np.random.Generator) -> "CnnWeights":
        fan_in = {"conv_w": arch.filter_size, "fc1_w": arch.concat_width, "fc2_w": arch.fc1, "out_w": arch.fc2}
        w = cls.zeros(arch)
        for name in PARAM_NAMES:
            if name in fan_in:
                w[name] = rng.standard_normal(w[name].shape) * np.sqrt(2.0 / fan_in[name])
        return w

    def copy(self) -> "CnnWeights":
        return CnnWeights({k: v.copy() for k, v in self.items()})

    def check(self, arch: CnnArchitecture) -> None:
        for k, s in arch.shapes().items():
            if k not in self or self[k].shape != s:
                got = None if k not in self else self[k].shape
                raise HarError(f"weight {k} has shape {got}, architecture expects {s}")


def _arch_of(weights: CnnWeights, window: int) -> CnnArchitecture:
    m, f, fs = weights["conv_w"].shape
    return CnnArchitecture(
        window=window,
        n_channels=m,
        filters=f,
        filter_size=fs,
        pool_size=_pool_of(weights, window),
        fc1=weights["fc1_w"].shape[1],
        fc2=weights["fc2_w"].shape[1],
        n_classes=weights["out_w"].shape[1],
    )


def _pool_of(weights: CnnWeights, window: int) -> int:
    m, f, fs = weights["conv_w"].shape
    pooled = weights["fc1_w"].shape[0] // (m * f)
    conv_len = window - fs + 1
    for p in range(1, conv_len + 1):
        if conv_len // p == pooled:
            return p
    raise HarError("cannot infer the pool size from the weight shapes")


@dataclass
class ForwardCache:
    windows: np.ndarray  # B x m x L x fs view of the input
    pre_conv: np.ndarray  # B x m x L x F
    pool_idx: np.ndarray  # B x m x Lp x F, argmax position inside each pool
    z1: np.ndarray
    h0: np.ndarray
    h1: np.ndarray
    z2: np.ndarray
    h2: np.ndarray


def _softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=1, keepdims=True)


def forward(weights: CnnWeights, batch, arch: CnnArchitecture | None = None):
    """Class probabilities (B x l) and the activations needed for backprop."""
    x = np.asarray(batch, dtype=np.float64)
    if x.ndim != 3:
        raise HarError(f"batch must be B x T x m, got shape {x.shape}")
    b, t, m = x.shape
    if arch is None:
        arch = _arch_of(weights, t)
    weights.check(arch)
    if t != arch.window or m != arch.n_channels:
        raise HarError(f"batch windows are {t} x {m}, architecture expects {arch.window} x {arch.n_channels}")
    if b == 0:
        return np.zeros((0, arch.n_classes)), None
    p, lp, nf = arch.pool_size, arch.pooled_length, arch.filters
    # all axes at once: B x m x L x fs windows against m x fs x F filters
    win = sliding_window_view(x.transpose(0, 2, 1), arch.filter_size, axis=2)
    z = win @ weights["conv_w"].transpose(0, 2, 1) + weights["conv_b"][None, :, None, :]
    r = np.maximum(z[:, :, : lp * p], 0.0).reshape(b, m, lp, p, nf)
    idx = np.argmax(r, axis=3)  # first maximum wins ties
    pooled = np.take_along_axis(r, idx[:, :, :, None, :], axis=3)[:, :, :, 0, :]
    # per axis filter-major flattening, axes concatenated in channel order
    h0 = pooled.transpose(0, 1, 3, 2).reshape(b, m * nf * lp)
    z1 = h0 @ weights["fc1_w"] + weights["fc1_b"]
    h1 = np.maximum(z1, 0.0)
    z2 = h1 @ weights["fc2_w"] + weights["fc2_b"]
    h2 = np.maximum(z2, 0.0)
    probs = _softmax(h2 @ weights["out_w"] + weights["out_b"])
    return probs, ForwardCache(win, z, idx, z1, h0, h1, z2, h2)


def _sample_weights(labels: np.ndarray, class_weights) -> np.ndarray:
    if class_weights is None:
        return np.ones(len(labels))
    cw = np.asarray(class_weights, dtype=np.float64)
    return cw[labels]


def loss_and_grads(weights: CnnWeights, batch, labels, class_weights=None, arch: CnnArchitecture | None = None):
    """Class-weighted mean cross-entropy and its gradient for every parameter.

    ``labels`` are output indices 0..l-1; ``class_weights`` is indexed the
    same way (None means unit weights).
    """
    x = np.asarray(batch, dtype=np.float64)
    y = np.asarray(labels, dtype=np.int64).reshape(-1)
    if arch is None:
        arch = _arch_of(weights, x.shape[1])
    probs, cache = forward(weights, x, arch)
    b = len(y)
    if b != len(probs):
        raise HarError("labels and batch disagree on the batch size")
    if b == 0:
        return 0.0, CnnWeights.zeros(arch)
    if y.min() < 0 or y.max() >= arch.n_classes:
        raise HarError(f"labels must lie in 0..{arch.n_classes - 1}")
    sw = _sample_weights(y, class_weights)
    p_true = probs[np.arange(b), y]
    if np.any(p_true == 0.0):
        warnings.warn("true-class probability underflowed to 0; log clamped", RuntimeWarning, stacklevel=2)
    loss = float(np.mean(sw * -np.log(np.maximum(p_true, _LOG_FLOOR))))

    g = CnnWeights()
    d_logits = probs.copy()
    d_logits[np.arange(b), y] -= 1.0
    d_logits *= (sw / b)[:, None]
    g["out_w"] = cache.h2.T @ d_logits
    g["out_b"] = d_logits.sum(axis=0)
    dz2 = (d_logits @ weights["out_w"].T) * (cache.z2 > 0)
    g["fc2_w"] = cache.h1.T @ dz2
    g["fc2_b"] = dz2.sum(axis=0)
    dz1 = (dz2 @ weights["fc2_w"].T) * (cache.z1 > 0)
    g["fc1_w"] = cache.h0.T @ dz1
    g["fc1_b"] = dz1.sum(axis=0)
    dh0 = dz1 @ weights["fc1_w"].T

    p, lp, nf, m = arch.pool_size, arch.pooled_length, arch.filters, arch.n_channels
    d_pooled = dh0.reshape(b, m, nf, lp).transpose(0, 1, 3, 2)
    d_r = np.zeros((b, m, lp, p, nf))
    np.put_along_axis(d_r, cache.pool_idx[:, :, :, None, :], d_pooled[:, :, :, None, :], axis=3)
    z = cache.pre_conv
    dz = np.zeros_like(z)
    dz[:, :, : lp * p] = d_r.reshape(b, m, lp * p, nf)
    dz *= z > 0
    n_pos = b * z.shape[2]
    win = cache.windows.transpose(1, 3, 0, 2).reshape(m, arch.filter_size, n_pos)
    g["conv_w"] = (win @ dz.transpose(1, 0, 2, 3).reshape(m, n_pos, nf)).transpose(0, 2, 1)
    g["conv_b"] = dz.sum(axis=(0, 2))
    return loss, g


@dataclass(eq=False)
class TrainedCnn:
    arch: CnnArchitecture
    weights: CnnWeights
    classes: tuple
    loss_history: list = field(default_factory=list)

    def predict(self, tensor) -> np.ndarray:
        return predict(self, tensor)


def train(tensor, labels=None, arch: CnnArchitecture | None = None, config: TrainConfig = TrainConfig()) -> TrainedCnn:
    """Mini-batch SGD with classical momentum from a seeded He initialization.

    ``tensor`` is a SegmentTensor or a K x T x m array (then ``labels`` is
    required). The output layer covers the classes present in ``labels``.
    ``loss_history[e]`` is the mean batch loss of epoch ``e``.
    """
    data = np.asarray(getattr(tensor, "data", tensor), dtype=np.float64)
    if labels is None:
        labels = tensor.labels
    labels = np.asarray(labels, dtype=np.int64).reshape(-1)
    if len(data) == 0 or len(data) != len(labels):
        raise HarError("CNN training needs at least one labeled window")
    classes = tuple(int(c) for c in np.unique(labels))
    if arch is None:
        arch = CnnArchitecture(window=data.shape[1], n_channels=data.shape[2])
    arch = replace(arch, window=data.shape[1], n_channels=data.shape[2], n_classes=len(classes))
    y = np.searchsorted(np.array(classes), labels)
    cw = None
    if config.class_weighting:
        table = compute_class_weights(labels)
        cw = np.array([table[c] for c in classes])

    rng = np.random.default_rng(config.seed)
    w = CnnWeights.he_init(arch, rng)
    velocity = CnnWeights.zeros(arch)
    history = []
    n = len(data)
    for epoch in range(config.epochs):
        order = rng.permutation(n)
        total, batches = 0.0, 0
        for bi, lo in enumerate(range(0, n, config.batch_size)):
            idx = order[lo : lo + config.batch_size]
            loss, g = loss_and_grads(w, data[idx], y[idx], cw, arch)
            if not np.isfinite(loss):
                raise HarError(f"non-finite CNN loss at epoch {epoch} batch {bi}")
            for name in PARAM_NAMES:
                v = velocity[name]
                v *= config.momentum
                v -= config.learning_rate * g[name]
                w[name] += v
            total += loss
            batches += 1
        history.append(total / batches)
        log.debug("epoch %d loss %.6f", epoch, history[-1])
    return TrainedCnn(arch, w, classes, history)


def predict(model: TrainedCnn, tensor) -> np.ndarray:
    """Argmax of the softmax, mapped back to class ids (ties: lowest id)."""
    data = np.asarray(getattr(tensor, "data", tensor), dtype=np.float64)
    if data.ndim != 3:
        raise HarError(f"expected K x T x m input, got shape {data.shape}")
    if len(data) == 0:
        return np.zeros(0, dtype=np.int64)
    out = np.empty(len(data), dtype=np.int64)
    classes = np.asarray(model.classes, dtype=np.int64)
    for lo in range(0, len(data), 512):
        probs, _ = forward(model.weights, data[lo : lo + 512], model.arch)
        out[lo : lo + len(probs)] = classes[np.argmax(probs, axis=1)]
    return out


_MAGIC = b"HARCNN\x00\x00"
_VERSION = 1


def save_checkpoint(model: TrainedCnn, path) -> None:
    """Versioned header, shape table, then row-major little-endian f64 tensors."""
    a = model.arch
    tensors = [("arch", np.array([a.window, a.n_channels, a.filters, a.filter_size, a.pool_size, a.fc1, a.fc2, a.n_classes], dtype=np.float64)),
               ("classes", np.array(model.classes, dtype=np.float64))]
    tensors += [(name, model.weights[name]) for name in PARAM_NAMES]
    with Path(path).open("wb") as fh:
        fh.write(_MAGIC)
        fh.write(struct.pack("<II", _VERSION, len(tensors)))
        for name, arr in tensors:
            raw = name.encode("ascii")
            fh.write(struct.pack("<I", len(raw)) + raw)
            fh.write(struct.pack("<I", arr.ndim) + struct.pack(f"<{arr.ndim}Q", *arr.shape))
        for _, arr in tensors:
            fh.write(np.ascontiguousarray(arr, dtype="<f8").tobytes())


def load_checkpoint(path) -> TrainedCnn:
    raw = Path(path).read_bytes()
    if raw[: len(_MAGIC)] != _MAGIC:
        raise HarError(f"{path}: not a CNN checkpoint")
    pos = len(_MAGIC)
    version, count = struct.unpack_from("<II", raw, pos)
    pos += 8
    if version != _VERSION:
        raise HarError(f"{path}: unsupported checkpoint version {version}")
    table = []
    for _ in range(count):
        (nlen,) = struct.unpack_from("<I", raw, pos)
        pos += 4
        name = raw[pos : pos + nlen].decode("ascii")
        pos += nlen
        (ndim,) = struct.unpack_from("<I", raw, pos)
        pos += 4
        shape = struct.unpack_from(f"<{ndim}Q", raw, pos)
        pos += 8 * ndim
        table.append((name, shape))
    arrays = {}
    for name, shape in table:
        size = int(np.prod(shape)) if shape else 1
        arrays[name] = np.frombuffer(raw, dtype="<f8", count=size, offset=pos).reshape(shape).astype(np.float64)
        pos += 8 * size
    if pos != len(raw):
        raise HarError(f"{path}: trailing bytes after the last tensor")
    arch = CnnArchitecture(*(int(v) for v in arrays.pop("arch")))
    classes = tuple(int(v) for v in arrays.pop("classes"))
    weights = CnnWeights(arrays)
    weights.check(arch)
    return TrainedCnn(arch, weights, classes)
