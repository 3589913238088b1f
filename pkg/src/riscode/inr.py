"""Coordinate-to-codebook network: Fourier features + MLP trained with SGD.

The model maps a normalized 3-D coordinate, optionally lifted to 6L Fourier
features, through a fully connected network to a vector of sigmoid outputs,
one per label bit.  Training minimizes multi-label binary cross entropy
with plain mini-batch SGD; gradients are computed by handwritten
backpropagation (no autodiff framework).  Everything is deterministic for
a given seed: initialization, shuffling, and updates draw from one seeded
generator in a fixed order.

Two label modes are supported: ``"encoded"`` targets the M+N-1 compressed
codebook bits, ``"flat"`` targets all M*N entries row-major (+1 -> 1).
"""

import json
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import erf

from .codebook import Codebook, EncodedLabel, decode
from .dataset import DatasetMeta, normalize
from .errors import ConfigMismatch, DimensionMismatch, ParseError, VersionMismatch

__all__ = [
    "PEConfig",
    "MlpConfig",
    "TrainConfig",
    "ModelParams",
    "EpochStats",
    "ACTIVATIONS",
    "positional_encoding",
    "build_features",
    "build_targets",
    "init_params",
    "forward",
    "bce_loss",
    "backward",
    "train",
    "predict_bits",
    "predict_codebook",
    "save_checkpoint",
    "load_checkpoint",
]

_CKPT_TAG = "riscode-checkpoint"
_CKPT_VERSION = 1
_BCE_CLAMP = 1e-12

_INV_SQRT2 = 1.0 / math.sqrt(2.0)
_INV_SQRT_2PI = 1.0 / math.sqrt(2.0 * math.pi)

# name -> (activation, derivative); leaky slope fixed at 0.01
ACTIVATIONS = {
    "relu": (
        lambda x: np.maximum(x, 0.0),
        lambda x: (x > 0.0).astype(np.float64),
    ),
    "leaky_relu": (
        lambda x: np.where(x > 0.0, x, 0.01 * x),
        lambda x: np.where(x > 0.0, 1.0, 0.01),
    ),
    "gelu": (
        lambda x: 0.5 * x * (1.0 + erf(x * _INV_SQRT2)),
        lambda x: 0.5 * (1.0 + erf(x * _INV_SQRT2))
        + x * _INV_SQRT_2PI * np.exp(-0.5 * x * x),
    ),
    "sin": (np.sin, np.cos),
    "tanh": (np.tanh, lambda x: 1.0 - np.tanh(x) ** 2),
}


@dataclass(frozen=True)
class PEConfig:
    """Fourier feature map: frequencies c^0 .. c^(L-1), output dimension 6L."""

    base_freq: float = 1.35
    levels: int = 40

    def __post_init__(self):
        if not self.base_freq > 1.0:
            raise ValueError("base_freq must be > 1 (strictly increasing frequencies)")
        if self.levels < 1:
            raise ValueError("levels must be >= 1")

    @property
    def output_dim(self) -> int:
        return 6 * self.levels

    def to_dict(self) -> dict:
        return {"base_freq": float(self.base_freq), "levels": int(self.levels)}


@dataclass(frozen=True)
class MlpConfig:
    """Fully connected architecture; the output activation is always sigmoid."""

    input_dim: int
    output_dim: int
    hidden_layers: int = 4
    hidden_width: int = 128
    activation: str = "relu"

    def __post_init__(self):
        for name in ("input_dim", "output_dim", "hidden_layers", "hidden_width"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be positive")
        if self.activation not in ACTIVATIONS:
            raise ValueError(
                f"unknown activation {self.activation!r}, pick from {sorted(ACTIVATIONS)}"
            )

    @property
    def layer_dims(self) -> list:
        """Sizes of consecutive layers, input first."""
        return [self.input_dim] + [self.hidden_width] * self.hidden_layers + [self.output_dim]

    def to_dict(self) -> dict:
        return {
            "input_dim": self.input_dim,
            "output_dim": self.output_dim,
            "hidden_layers": self.hidden_layers,
            "hidden_width": self.hidden_width,
            "activation": self.activation,
        }


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 1e-3
    batch_size: int = 64
    epochs: int = 200
    seed: int = 0

    def __post_init__(self):
        if not self.learning_rate > 0:
            raise ValueError("learning_rate must be > 0")
        if self.batch_size < 1 or self.epochs < 1:
            raise ValueError("batch_size and epochs must be positive")
        if self.seed < 0:
            raise ValueError("seed must be non-negative")

    def to_dict(self) -> dict:
        return {
            "learning_rate": float(self.learning_rate),
            "batch_size": self.batch_size,
            "epochs": self.epochs,
            "seed": self.seed,
        }


@dataclass
class ModelParams:
    """Per-layer weights/biases plus the architecture they belong to.

    ``weights[k]`` has shape (fan_out, fan_in); layer k computes
    ``act(W @ x + b)`` (sigmoid on the last layer).  ``pe`` is None when
    the network consumes raw 3-D coordinates.
    """

    weights: list
    biases: list
    mlp: MlpConfig
    pe: PEConfig | None = None
    label_mode: str = "encoded"

    def __post_init__(self):
        if self.label_mode not in ("encoded", "flat"):
            raise ValueError(f"label_mode must be 'encoded' or 'flat', got {self.label_mode!r}")
        dims = self.mlp.layer_dims
        if len(self.weights) != len(dims) - 1 or len(self.biases) != len(dims) - 1:
            raise DimensionMismatch("params layer count does not match architecture")
        for k, (w, b) in enumerate(zip(self.weights, self.biases)):
            if w.shape != (dims[k + 1], dims[k]) or b.shape != (dims[k + 1],):
                raise DimensionMismatch(f"layer {k} shapes {w.shape}/{b.shape} do not match {dims}")
        if self.pe is not None and self.mlp.input_dim != self.pe.output_dim:
            raise ConfigMismatch(
                f"input_dim {self.mlp.input_dim} != positional encoding dim {self.pe.output_dim}"
            )

    def copy(self) -> "ModelParams":
        return ModelParams(
            weights=[w.copy() for w in self.weights],
            biases=[b.copy() for b in self.biases],
            mlp=self.mlp,
            pe=self.pe,
            label_mode=self.label_mode,
        )


@dataclass
class EpochStats:
    epoch: int
    train_loss: float
    val_bit_accuracy: float  # NaN when no validation samples


def positional_encoding(v_norm, cfg: PEConfig) -> np.ndarray:
    """Lift normalized coordinates to 6L Fourier features in [-1, 1].

    Output order: all sines, then all cosines, each block level-major and
    axis-minor, i.e. sin(pi*c^0*x), sin(pi*c^0*y), sin(pi*c^0*z),
    sin(pi*c^1*x), ...
    """
    v = np.asarray(v_norm, dtype=np.float64)
    single = v.ndim == 1
    v = np.atleast_2d(v)
    if v.shape[-1] != 3:
        raise DimensionMismatch(f"coordinates must have 3 components, got {v.shape[-1]}")
    freqs = cfg.base_freq ** np.arange(cfg.levels, dtype=np.float64)
    args = np.pi * freqs[None, :, None] * v[:, None, :]  # (B, L, 3), level-major
    flat = args.reshape(v.shape[0], 3 * cfg.levels)
    out = np.concatenate([np.sin(flat), np.cos(flat)], axis=1)
    return out[0] if single else out


def build_features(coords_norm, pe_cfg: PEConfig | None) -> np.ndarray:
    """Network input for a batch of normalized coordinates, shape (B, d)."""
    coords = np.atleast_2d(np.asarray(coords_norm, dtype=np.float64))
    return positional_encoding(coords, pe_cfg) if pe_cfg is not None else coords


def build_targets(samples, label_mode: str) -> np.ndarray:
    """Stacked {0,1} target rows for a list of samples.

    ``"encoded"`` uses the stored M+N-1 label bits; ``"flat"`` decodes each
    label and flattens the codebook row-major with +1 -> 1, -1 -> 0.
    """
    if label_mode == "encoded":
        return np.stack([s.label.bits.astype(np.float64) for s in samples])
    if label_mode == "flat":
        return np.stack(
            [(decode(s.label).entries.reshape(-1) > 0).astype(np.float64) for s in samples]
        )
    raise ValueError(f"unknown label_mode {label_mode!r}")


def init_params(
    mlp_cfg: MlpConfig,
    rng: np.random.Generator,
    pe_cfg: PEConfig | None = None,
    label_mode: str = "encoded",
) -> ModelParams:
    """Uniform variance-preserving init: W ~ U(+-sqrt(6/(fan_in+fan_out))), b = 0."""
    weights, biases = [], []
    dims = mlp_cfg.layer_dims
    for fan_in, fan_out in zip(dims[:-1], dims[1:]):
        limit = math.sqrt(6.0 / (fan_in + fan_out))
        weights.append(rng.uniform(-limit, limit, size=(fan_out, fan_in)))
        biases.append(np.zeros(fan_out))
    return ModelParams(weights=weights, biases=biases, mlp=mlp_cfg, pe=pe_cfg, label_mode=label_mode)


def _sigmoid(x: np.ndarray) -> np.ndarray:
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def _forward_cached(params: ModelParams, x: np.ndarray):
    """Returns (post-activations incl. input, pre-activations)."""
    act, _ = ACTIVATIONS[params.mlp.activation]
    last = len(params.weights) - 1
    a = x
    acts, pres = [x], []
    for k, (w, b) in enumerate(zip(params.weights, params.biases)):
        z = a @ w.T + b
        pres.append(z)
        a = _sigmoid(z) if k == last else act(z)
        acts.append(a)
    return acts, pres


def forward(params: ModelParams, x) -> np.ndarray:
    """Network output q in (0, 1), one sigmoid unit per label bit.

    Accepts a single input vector or a (B, input_dim) batch.
    """
    arr = np.asarray(x, dtype=np.float64)
    single = arr.ndim == 1
    arr = np.atleast_2d(arr)
    if arr.shape[1] != params.mlp.input_dim:
        raise DimensionMismatch(
            f"input dim {arr.shape[1]} != configured {params.mlp.input_dim}"
        )
    acts, _ = _forward_cached(params, arr)
    return acts[-1][0] if single else acts[-1]


def bce_loss(q, p) -> float:
    """Multi-label binary cross entropy, -sum[p log q + (1-p) log(1-q)].

    For batches (2-D inputs) returns the mean of the per-sample sums.
    Outputs are clamped away from {0, 1} as a numeric guard; sigmoid
    outputs only hit the clamp when saturated beyond float precision.
    """
    q = np.clip(np.asarray(q, dtype=np.float64), _BCE_CLAMP, 1.0 - _BCE_CLAMP)
    p = np.asarray(p, dtype=np.float64)
    if q.shape != p.shape:
        raise DimensionMismatch(f"prediction shape {q.shape} != label shape {p.shape}")
    per_bit = p * np.log(q) + (1.0 - p) * np.log(1.0 - q)
    if q.ndim == 1:
        return float(-np.sum(per_bit))
    return float(-np.sum(per_bit) / q.shape[0])


def _grads_from_cache(params, acts, pres, targets):
    batch = targets.shape[0]
    _, dact = ACTIVATIONS[params.mlp.activation]
    delta = (acts[-1] - targets) / batch  # d(mean BCE)/dz at the sigmoid head
    grads_w = [None] * len(params.weights)
    grads_b = [None] * len(params.weights)
    for k in range(len(params.weights) - 1, -1, -1):
        grads_w[k] = delta.T @ acts[k]
        grads_b[k] = delta.sum(axis=0)
        if k > 0:
            delta = (delta @ params.weights[k]) * dact(pres[k - 1])
    return grads_w, grads_b


def backward(params: ModelParams, batch_x, batch_p):
    """Exact gradient of the mean batch BCE loss.

    Returns (weight grads, bias grads) with the same shapes as the params.
    """
    x = np.atleast_2d(np.asarray(batch_x, dtype=np.float64))
    p = np.atleast_2d(np.asarray(batch_p, dtype=np.float64))
    if x.shape[0] == 0:
        raise DimensionMismatch("batch must be non-empty")
    if x.shape[1] != params.mlp.input_dim or p.shape[1] != params.mlp.output_dim:
        raise DimensionMismatch(
            f"batch dims {x.shape[1]}/{p.shape[1]} != configured "
            f"{params.mlp.input_dim}/{params.mlp.output_dim}"
        )
    acts, pres = _forward_cached(params, x)
    return _grads_from_cache(params, acts, pres, p)


def train(
    train_samples,
    val_samples,
    mlp_cfg: MlpConfig,
    train_cfg: TrainConfig,
    pe_cfg: PEConfig | None = None,
    label_mode: str = "encoded",
):
    """Mini-batch SGD over the training samples.

    Per epoch: seeded shuffle, consecutive batches (last may be short),
    ``w <- w - lr * grad`` after each batch.  The reported epoch loss is
    the per-sample mean of the batch losses as encountered (pre-update).
    Returns (ModelParams, list of EpochStats); bit-for-bit reproducible
    for a given (seed, configs, samples).
    """
    if not train_samples:
        raise ConfigMismatch("training split is empty")
    targets = build_targets(train_samples, label_mode)
    if targets.shape[1] != mlp_cfg.output_dim:
        raise ConfigMismatch(
            f"label width {targets.shape[1]} != output_dim {mlp_cfg.output_dim}"
        )
    feats = build_features(np.stack([s.coord_norm for s in train_samples]), pe_cfg)
    if feats.shape[1] != mlp_cfg.input_dim:
        raise ConfigMismatch(
            f"feature width {feats.shape[1]} != input_dim {mlp_cfg.input_dim}"
        )
    if val_samples:
        val_feats = build_features(np.stack([s.coord_norm for s in val_samples]), pe_cfg)
        val_targets = build_targets(val_samples, label_mode)

    rng = np.random.default_rng(train_cfg.seed)
    params = init_params(mlp_cfg, rng, pe_cfg=pe_cfg, label_mode=label_mode)
    n = len(train_samples)
    lr = train_cfg.learning_rate
    history = []
    for epoch in range(train_cfg.epochs):
        order = rng.permutation(n)
        loss_sum = 0.0
        for start in range(0, n, train_cfg.batch_size):
            sel = order[start : start + train_cfg.batch_size]
            acts, pres = _forward_cached(params, feats[sel])
            loss_sum += bce_loss(acts[-1], targets[sel]) * sel.size
            grads_w, grads_b = _grads_from_cache(params, acts, pres, targets[sel])
            for k in range(len(params.weights)):
                params.weights[k] -= lr * grads_w[k]
                params.biases[k] -= lr * grads_b[k]
        if val_samples:
            q = forward(params, val_feats)
            val_acc = float(np.mean((q >= 0.5) == (val_targets >= 0.5)))
        else:
            val_acc = float("nan")
        history.append(EpochStats(epoch, loss_sum / n, val_acc))
    return params, history


def predict_bits(params: ModelParams, coords_norm) -> np.ndarray:
    """Thresholded network output for a batch of normalized coordinates.

    q < 0.5 maps to bit 0, q >= 0.5 to bit 1 (ties count as 1).
    """
    feats = build_features(coords_norm, params.pe)
    return (forward(params, feats) >= 0.5).astype(np.uint8)


def predict_codebook(params: ModelParams, v_raw, meta: DatasetMeta) -> Codebook:
    """Full inference path: normalize, encode, forward, threshold, decode."""
    rows, cols = meta.geometry.rows, meta.geometry.cols
    expected = rows + cols - 1 if params.label_mode == "encoded" else rows * cols
    if params.mlp.output_dim != expected:
        raise ConfigMismatch(
            f"model head {params.mlp.output_dim} != {expected} for "
            f"{rows}x{cols} panel in {params.label_mode!r} mode"
        )
    bits = predict_bits(params, normalize(np.asarray(v_raw, dtype=np.float64), meta.grid))
    bits = np.atleast_2d(bits)[0]
    if params.label_mode == "encoded":
        return decode(EncodedLabel(bits, rows, cols))
    return Codebook((2 * bits.astype(np.int8) - 1).reshape(rows, cols))


def save_checkpoint(
    params: ModelParams, path, train_cfg: TrainConfig | None = None
) -> None:
    """Versioned JSON checkpoint; floats keep shortest round-trip form."""
    doc = {
        "format": _CKPT_TAG,
        "version": _CKPT_VERSION,
        "pe": params.pe.to_dict() if params.pe is not None else None,
        "mlp": params.mlp.to_dict(),
        "train": train_cfg.to_dict() if train_cfg is not None else None,
        "label_mode": params.label_mode,
        "layers": [
            {"W": w.tolist(), "b": b.tolist()}
            for w, b in zip(params.weights, params.biases)
        ],
    }
    with open(path, "w", encoding="ascii") as fh:
        json.dump(doc, fh, sort_keys=True, separators=(",", ":"))
        fh.write("\n")


def load_checkpoint(path):
    """Returns (ModelParams, TrainConfig or None)."""
    with open(path, "r", encoding="ascii") as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ParseError(f"{path}: bad checkpoint JSON: {exc}") from exc
    if doc.get("format") != _CKPT_TAG:
        raise VersionMismatch(f"{path}: not a {_CKPT_TAG} file")
    if doc.get("version") != _CKPT_VERSION:
        raise VersionMismatch(f"{path}: unsupported version {doc.get('version')!r}")
    try:
        pe = PEConfig(**doc["pe"]) if doc["pe"] is not None else None
        mlp = MlpConfig(**doc["mlp"])
        params = ModelParams(
            weights=[np.array(layer["W"], dtype=np.float64) for layer in doc["layers"]],
            biases=[np.array(layer["b"], dtype=np.float64) for layer in doc["layers"]],
            mlp=mlp,
            pe=pe,
            label_mode=doc["label_mode"],
        )
        train_cfg = TrainConfig(**doc["train"]) if doc.get("train") else None
    except (KeyError, TypeError) as exc:
        raise ParseError(f"{path}: malformed checkpoint: {exc}") from exc
    return params, train_cfg
