"""A small 1-D CNN binary classifier with hand-rolled reverse-mode gradients.

Stride-1 valid convolutions with leaky-ReLU activations feed a single dense
unit whose pre-sigmoid value is the logit ``z``; the classifier output is
``p = sigmoid(z)``. Everything is plain float64 numpy, so forward passes,
input gradients and SGD training are exact, deterministic functions of
(parameters, input, seed).

The training objective is ``beta * BCE(p, y) + lambda * mean(z**2)``: the
second term penalizes large logits, which keeps predictions away from
saturation and leaves usable input gradients for the influence tracer.

Checkpoints are a self-describing binary format: magic ``TSXN``, a format
version, a JSON header (architecture, tensor shapes, training metadata and
a CRC32 of the payload), then all parameters as little-endian float64 in
declared order.
"""

from __future__ import annotations

import json
import struct
import zlib
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .dataset import Dataset, TimeSeries
from .errors import (
    CheckpointError,
    ChecksumError,
    ConfigError,
    LabelError,
    ShapeError,
    TrainingError,
)

CHECKPOINT_MAGIC = b"TSXN"
CHECKPOINT_VERSION = 1

# Predicted probabilities are clipped to this range inside the cross-entropy
# (value only; gradients use the exact p - y form).
BCE_CLIP = 1e-7


@dataclass(frozen=True)
class Architecture:
    """Shape of the classifier: conv stack (filters, kernel) plus one dense unit."""

    input_channels: int
    input_length: int
    conv_layers: tuple[tuple[int, int], ...] = ((16, 5), (32, 5), (64, 5))
    activation_slope: float = 0.01

    def __post_init__(self):
        object.__setattr__(self, "conv_layers", tuple(tuple(l) for l in self.conv_layers))
        if self.input_channels < 1 or self.input_length < 1:
            raise ShapeError(
                f"input shape ({self.input_channels}, {self.input_length}) invalid"
            )
        if not 0.0 < self.activation_slope < 1.0:
            raise ConfigError(
                f"activation_slope must lie in (0, 1), got {self.activation_slope}"
            )
        length = self.input_length
        for i, (filters, kernel) in enumerate(self.conv_layers):
            if filters < 1:
                raise ShapeError(f"conv{i}: filters must be >= 1, got {filters}")
            if kernel < 1 or kernel > length:
                raise ShapeError(
                    f"conv{i}: kernel {kernel} invalid for sequence length {length}"
                )
            length = length - kernel + 1

    def feature_lengths(self) -> list[int]:
        """Sequence length after each conv layer."""
        lengths = []
        length = self.input_length
        for _, kernel in self.conv_layers:
            length = length - kernel + 1
            lengths.append(length)
        return lengths

    def dense_inputs(self) -> int:
        if not self.conv_layers:
            return self.input_channels * self.input_length
        return self.conv_layers[-1][0] * self.feature_lengths()[-1]

    def tensor_shapes(self) -> list[tuple[str, tuple[int, ...]]]:
        """Checkpoint tensor order: conv weights/biases in layer order, then dense."""
        shapes: list[tuple[str, tuple[int, ...]]] = []
        in_ch = self.input_channels
        for i, (filters, kernel) in enumerate(self.conv_layers):
            shapes.append((f"conv{i}.weight", (filters, in_ch, kernel)))
            shapes.append((f"conv{i}.bias", (filters,)))
            in_ch = filters
        shapes.append(("dense.weight", (self.dense_inputs(),)))
        shapes.append(("dense.bias", ()))
        return shapes

    def parameter_count(self) -> int:
        return sum(int(np.prod(shape, dtype=np.int64)) for _, shape in self.tensor_shapes())

    def to_dict(self) -> dict:
        return {
            "input_channels": self.input_channels,
            "input_length": self.input_length,
            "conv_layers": [list(l) for l in self.conv_layers],
            "activation_slope": self.activation_slope,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Architecture":
        return cls(
            input_channels=int(d["input_channels"]),
            input_length=int(d["input_length"]),
            conv_layers=tuple(tuple(int(v) for v in l) for l in d["conv_layers"]),
            activation_slope=float(d["activation_slope"]),
        )


def default_architecture(channels: int = 3, length: int = 50) -> Architecture:
    return Architecture(input_channels=channels, input_length=length)


@dataclass(frozen=True)
class Network:
    """Immutable parameter bundle; training returns a new instance."""

    architecture: Architecture
    params: dict[str, np.ndarray]
    training_meta: dict = field(default_factory=dict)

    def __post_init__(self):
        expected = dict(self.architecture.tensor_shapes())
        if set(self.params) != set(expected):
            raise ShapeError(
                f"parameter names {sorted(self.params)} do not match "
                f"architecture tensors {sorted(expected)}"
            )
        for name, arr in self.params.items():
            if arr.shape != expected[name]:
                raise ShapeError(
                    f"{name}: shape {arr.shape}, expected {expected[name]}"
                )
            if not np.all(np.isfinite(arr)):
                raise ShapeError(f"{name}: non-finite parameters")


@dataclass(frozen=True)
class TrainConfig:
    lr: float = 0.05
    epochs: int = 30
    batch_size: int = 4
    lambda_: float = 1e-3
    beta: float = 1.0
    seed: int = 1
    early_stop_patience: int = 30

    def __post_init__(self):
        if self.lr <= 0:
            raise ConfigError(f"lr must be > 0, got {self.lr}")
        if self.epochs < 0:
            raise ConfigError(f"epochs must be >= 0, got {self.epochs}")
        if self.batch_size < 1:
            raise ConfigError(f"batch_size must be >= 1, got {self.batch_size}")
        if self.lambda_ < 0:
            raise ConfigError(f"lambda must be >= 0, got {self.lambda_}")
        if self.beta <= 0:
            raise ConfigError(f"beta must be > 0, got {self.beta}")
        if self.early_stop_patience < 1:
            raise ConfigError(
                f"early_stop_patience must be >= 1, got {self.early_stop_patience}"
            )


@dataclass(frozen=True)
class Prediction:
    probability: float
    logit: float

    @property
    def label(self) -> int:
        # p = 0.5 counts as anomalous: deterministic boundary behavior.
        return 1 if self.probability >= 0.5 else 0

    @property
    def label_name(self) -> str:
        return "anomalous" if self.label == 1 else "normal"

    def to_dict(self) -> dict:
        return {
            "probability": self.probability,
            "logit": self.logit,
            "label": self.label,
            "label_name": self.label_name,
        }


def init(architecture: Architecture, seed: int) -> Network:
    """He-style uniform init, +-sqrt(6 / fan_in); biases zero."""
    rng = np.random.default_rng(seed)
    params: dict[str, np.ndarray] = {}
    in_ch = architecture.input_channels
    for i, (filters, kernel) in enumerate(architecture.conv_layers):
        bound = np.sqrt(6.0 / (in_ch * kernel))
        params[f"conv{i}.weight"] = rng.uniform(-bound, bound, size=(filters, in_ch, kernel))
        params[f"conv{i}.bias"] = np.zeros(filters)
        in_ch = filters
    fan_in = architecture.dense_inputs()
    bound = np.sqrt(6.0 / fan_in)
    params["dense.weight"] = rng.uniform(-bound, bound, size=fan_in)
    params["dense.bias"] = np.zeros(())
    return Network(architecture=architecture, params=params)


def _sigmoid(z: np.ndarray) -> np.ndarray:
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def _check_input(architecture: Architecture, x: np.ndarray, what: str = "input") -> None:
    want = (architecture.input_channels, architecture.input_length)
    if x.shape[-2:] != want:
        raise ShapeError(f"{what} shape {x.shape[-2:]} does not match {want}")


def _forward(
    network: Network, x: np.ndarray, keep_caches: bool = False
) -> tuple[np.ndarray, np.ndarray, list]:
    """Batched forward pass. x: (B, C, T) -> (p, z, caches)."""
    _check_input(network.architecture, x)
    slope = network.architecture.activation_slope
    caches = []
    cur = x
    for i in range(len(network.architecture.conv_layers)):
        w = network.params[f"conv{i}.weight"]
        b = network.params[f"conv{i}.bias"]
        filters, in_ch, kernel = w.shape
        # im2col: (B, C, T) -> (B, T_out, C*K), then one matmul per layer.
        windows = np.lib.stride_tricks.sliding_window_view(cur, kernel, axis=2)
        cols = windows.transpose(0, 2, 1, 3).reshape(
            cur.shape[0], cur.shape[2] - kernel + 1, in_ch * kernel
        )
        pre = cols @ w.reshape(filters, in_ch * kernel).T + b
        act = np.where(pre >= 0, pre, slope * pre)
        if keep_caches:
            caches.append((cols, pre))
        cur = act.transpose(0, 2, 1)
    flat = cur.reshape(cur.shape[0], -1)
    z = flat @ network.params["dense.weight"] + network.params["dense.bias"]
    p = _sigmoid(z)
    if keep_caches:
        caches.append(flat)
    return p, z, caches


def _backward(
    network: Network,
    caches: list,
    dz: np.ndarray,
    want_param_grads: bool,
    want_input_grad: bool,
) -> tuple[dict[str, np.ndarray] | None, np.ndarray | None]:
    """Reverse pass from dL/dz through dense and conv stack."""
    arch = network.architecture
    slope = arch.activation_slope
    flat = caches[-1]
    grads: dict[str, np.ndarray] = {}
    if want_param_grads:
        grads["dense.weight"] = dz @ flat
        grads["dense.bias"] = np.asarray(dz.sum())
    d_flat = dz[:, None] * network.params["dense.weight"][None, :]

    n_conv = len(arch.conv_layers)
    if n_conv:
        last_filters = arch.conv_layers[-1][0]
        last_len = arch.feature_lengths()[-1]
        d_act = d_flat.reshape(-1, last_filters, last_len)
    else:
        d_input = d_flat.reshape(-1, arch.input_channels, arch.input_length)
        return (grads if want_param_grads else None), (
            d_input if want_input_grad else None
        )

    d_input = None
    for i in range(n_conv - 1, -1, -1):
        cols, pre = caches[i]
        w = network.params[f"conv{i}.weight"]
        filters, in_ch, kernel = w.shape
        d_pre = d_act.transpose(0, 2, 1) * np.where(pre >= 0, 1.0, slope)
        if want_param_grads:
            dw = np.tensordot(d_pre, cols, axes=([0, 1], [0, 1]))
            grads[f"conv{i}.weight"] = dw.reshape(filters, in_ch, kernel)
            grads[f"conv{i}.bias"] = d_pre.sum(axis=(0, 1))
        if i == 0 and not want_input_grad:
            break
        d_cols = d_pre @ w.reshape(filters, in_ch * kernel)
        t_out = d_cols.shape[1]
        d_cols = d_cols.reshape(-1, t_out, in_ch, kernel)
        t_in = t_out + kernel - 1
        d_below = np.zeros((d_cols.shape[0], in_ch, t_in))
        for k in range(kernel):
            d_below[:, :, k : k + t_out] += d_cols[:, :, :, k].transpose(0, 2, 1)
        if i == 0:
            d_input = d_below
        else:
            d_act = d_below
    return (grads if want_param_grads else None), (d_input if want_input_grad else None)


def forward(network: Network, series: TimeSeries | np.ndarray) -> Prediction:
    x = series.values if isinstance(series, TimeSeries) else np.asarray(series, dtype=np.float64)
    p, z, _ = _forward(network, x[None])
    return Prediction(probability=float(p[0]), logit=float(z[0]))


def forward_batch(network: Network, x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Probabilities and logits for a stacked (N, C, T) batch."""
    p, z, _ = _forward(network, x)
    return p, z


def grad_input(network: Network, series: TimeSeries | np.ndarray) -> np.ndarray:
    """Exact gradient of the sigmoid output w.r.t. every input value, (C, T)."""
    x = series.values if isinstance(series, TimeSeries) else np.asarray(series, dtype=np.float64)
    return grad_input_batch(network, x[None])[0]


def grad_input_batch(network: Network, x: np.ndarray) -> np.ndarray:
    """Per-sample input gradients for a stacked (N, C, T) batch."""
    p, _, caches = _forward(network, x, keep_caches=True)
    dz = p * (1.0 - p)
    _, d_input = _backward(network, caches, dz, want_param_grads=False, want_input_grad=True)
    return d_input


def _batch_arrays(batch) -> tuple[np.ndarray, np.ndarray]:
    if isinstance(batch, Dataset):
        if not len(batch):
            raise ConfigError("batch is empty")
        return batch.to_arrays()
    members = list(batch)
    if not members:
        raise ConfigError("batch is empty")
    for s in members:
        if s.label is None:
            raise LabelError(f"series {s.id} is unlabeled")
    return np.stack([s.values for s in members]), np.asarray([s.label for s in members])


def _objective(p: np.ndarray, z: np.ndarray, y: np.ndarray, lambda_: float, beta: float) -> float:
    p_safe = np.clip(p, BCE_CLIP, 1.0 - BCE_CLIP)
    bce = -np.mean(y * np.log(p_safe) + (1.0 - y) * np.log(1.0 - p_safe))
    reg = np.mean(z * z)
    return float(beta * bce + lambda_ * reg)


def loss(network: Network, batch, lambda_: float, beta: float) -> float:
    """Regularized objective: beta * mean BCE + lambda * mean squared logit."""
    x, y = _batch_arrays(batch)
    p, z, _ = _forward(network, x)
    return _objective(p, z, y, lambda_, beta)


def train(
    network: Network,
    train_set: Dataset | Sequence[TimeSeries],
    val_set: Dataset | Sequence[TimeSeries],
    config: TrainConfig,
) -> Network:
    """Mini-batch SGD; returns the parameters with the best validation loss.

    Shuffling, batching and updates are driven by ``config.seed`` only, so
    identical inputs give bit-identical results. The loss curves (epoch 0 is
    the untrained model) are recorded in ``training_meta``.
    """
    x_tr, y_tr = _batch_arrays(train_set)
    x_va, y_va = _batch_arrays(val_set)
    _check_input(network.architecture, x_tr, "train set")
    _check_input(network.architecture, x_va, "val set")

    params = {k: v.copy() for k, v in network.params.items()}
    rng = np.random.default_rng(config.seed)

    def evaluate(xs, ys) -> float:
        live = Network(network.architecture, params, network.training_meta)
        p, z, _ = _forward(live, xs)
        return _objective(p, z, ys, config.lambda_, config.beta)

    train_losses = [evaluate(x_tr, y_tr)]
    val_losses = [evaluate(x_va, y_va)]
    best_val = val_losses[0]
    best_params = {k: v.copy() for k, v in params.items()}
    best_epoch = 0
    stale = 0

    n = x_tr.shape[0]
    for epoch in range(1, config.epochs + 1):
        order = rng.permutation(n)
        live = Network(network.architecture, params, {})
        for start in range(0, n, config.batch_size):
            idx = order[start : start + config.batch_size]
            xb, yb = x_tr[idx], y_tr[idx]
            p, z, caches = _forward(live, xb, keep_caches=True)
            m = len(idx)
            dz = (config.beta * (p - yb) + 2.0 * config.lambda_ * z) / m
            grads, _ = _backward(live, caches, dz, want_param_grads=True, want_input_grad=False)
            for name, g in grads.items():
                params[name] -= config.lr * g

        if any(not np.all(np.isfinite(v)) for v in params.values()):
            raise TrainingError(f"training diverged (non-finite parameters) at epoch {epoch}")
        train_losses.append(evaluate(x_tr, y_tr))
        val_losses.append(evaluate(x_va, y_va))
        if not (np.isfinite(train_losses[-1]) and np.isfinite(val_losses[-1])):
            raise TrainingError(f"non-finite loss at epoch {epoch}")
        if val_losses[-1] < best_val:
            best_val = val_losses[-1]
            best_params = {k: v.copy() for k, v in params.items()}
            best_epoch = epoch
            stale = 0
        else:
            stale += 1
            if stale >= config.early_stop_patience:
                break

    meta = {
        "epochs_trained": len(train_losses) - 1,
        "best_epoch": best_epoch,
        "train_losses": train_losses,
        "val_losses": val_losses,
        "final_train_loss": train_losses[-1],
        "final_val_loss": val_losses[-1],
        "best_val_loss": best_val,
        "config": {
            "lr": config.lr,
            "epochs": config.epochs,
            "batch_size": config.batch_size,
            "lambda": config.lambda_,
            "beta": config.beta,
            "seed": config.seed,
            "early_stop_patience": config.early_stop_patience,
        },
    }
    return Network(network.architecture, best_params, meta)


def save(network: Network, path: str | Path) -> None:
    """Write a versioned, CRC-protected checkpoint."""
    shapes = network.architecture.tensor_shapes()
    payload = b"".join(
        np.ascontiguousarray(network.params[name], dtype="<f8").tobytes() for name, _ in shapes
    )
    header = {
        "format_version": CHECKPOINT_VERSION,
        "architecture": network.architecture.to_dict(),
        "tensors": [{"name": name, "shape": list(shape)} for name, shape in shapes],
        "training_meta": network.training_meta,
        "payload_size": len(payload),
        "payload_crc32": zlib.crc32(payload),
    }
    blob = json.dumps(header, sort_keys=True).encode("utf-8")
    with Path(path).open("wb") as fh:
        fh.write(CHECKPOINT_MAGIC)
        fh.write(struct.pack("<I", CHECKPOINT_VERSION))
        fh.write(struct.pack("<Q", len(blob)))
        fh.write(blob)
        fh.write(payload)


def load(path: str | Path) -> Network:
    raw = Path(path).read_bytes()
    if len(raw) < 16 or raw[:4] != CHECKPOINT_MAGIC:
        raise CheckpointError(f"{path}: not a checkpoint file")
    (version,) = struct.unpack("<I", raw[4:8])
    if version != CHECKPOINT_VERSION:
        raise CheckpointError(
            f"{path}: format version {version}, expected {CHECKPOINT_VERSION}"
        )
    (header_len,) = struct.unpack("<Q", raw[8:16])
    if len(raw) < 16 + header_len:
        raise CheckpointError(f"{path}: truncated header")
    try:
        header = json.loads(raw[16 : 16 + header_len].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise CheckpointError(f"{path}: unreadable header ({exc})") from None
    payload = raw[16 + header_len :]
    if len(payload) != header["payload_size"]:
        raise CheckpointError(
            f"{path}: payload is {len(payload)} bytes, header says {header['payload_size']}"
        )
    if zlib.crc32(payload) != header["payload_crc32"]:
        raise ChecksumError(f"{path}: payload CRC mismatch")

    architecture = Architecture.from_dict(header["architecture"])
    params: dict[str, np.ndarray] = {}
    offset = 0
    for tensor in header["tensors"]:
        shape = tuple(tensor["shape"])
        count = int(np.prod(shape, dtype=np.int64)) if shape else 1
        chunk = payload[offset : offset + 8 * count]
        params[tensor["name"]] = (
            np.frombuffer(chunk, dtype="<f8").astype(np.float64).reshape(shape)
        )
        offset += 8 * count
    return Network(architecture, params, header["training_meta"])
