"""Policy/value network written directly in numpy.

Architecture: two 3x3 same-padded convolutions and a dense layer with
dropout, all with SiLU activations, then a softmax policy head over the
game's action space and a tanh value head.  SiLU keeps the loss smooth, so
finite differences stay accurate everywhere.  Forward and backward passes are hand written; ``gradient_check``
compares them against central finite differences.
"""

from __future__ import annotations

import base64
import json
import logging
import math
from collections import deque
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Callable, Iterable, Optional, Sequence

import numpy as np

from .games import SIZE, GameLike, GameState, get_rules

log = logging.getLogger(__name__)

LAYERS = ("conv1_w", "conv1_b", "conv2_w", "conv2_b", "fc_w", "fc_b", "pi_w", "pi_b", "v_w", "v_b")
_OFFSETS = [(i, j) for i in range(3) for j in range(3)]


class TrainingError(RuntimeError):
    pass


class CheckpointError(ValueError):
    pass


@dataclass(frozen=True)
class Architecture:
    action_size: int
    channels: int = 32
    hidden: int = 256
    in_channels: int = 1
    board: int = SIZE

    def shapes(self) -> dict[str, tuple[int, ...]]:
        c, h, a = self.channels, self.hidden, self.action_size
        cells = self.board * self.board
        return {
            "conv1_w": (9 * self.in_channels, c),
            "conv1_b": (c,),
            "conv2_w": (9 * c, c),
            "conv2_b": (c,),
            "fc_w": (cells * c, h),
            "fc_b": (h,),
            "pi_w": (h, a),
            "pi_b": (a,),
            "v_w": (h, 1),
            "v_b": (1,),
        }


@dataclass(frozen=True)
class ModelParams:
    """Immutable weight snapshot; arrays are read-only."""

    arch: Architecture
    weights: dict
    dropout: float = 0.3

    def __post_init__(self):
        shapes = self.arch.shapes()
        frozen = {}
        for name in LAYERS:
            w = np.asarray(self.weights[name]).view()
            if w.shape != shapes[name]:
                raise ValueError(f"{name}: shape {w.shape} does not match architecture {shapes[name]}")
            w.setflags(write=False)
            frozen[name] = w
        object.__setattr__(self, "weights", frozen)

    def __getitem__(self, name: str) -> np.ndarray:
        return self.weights[name]

    def replace(self, weights: dict) -> "ModelParams":
        return ModelParams(self.arch, {k: np.array(weights[k]) for k in LAYERS}, self.dropout)

    def astype(self, dtype) -> "ModelParams":
        return ModelParams(self.arch, {k: self.weights[k].astype(dtype) for k in LAYERS}, self.dropout)

    def flat(self) -> np.ndarray:
        return np.concatenate([self.weights[k].ravel() for k in LAYERS])

    def equals(self, other: "ModelParams") -> bool:
        return self.arch == other.arch and all(np.array_equal(self[k], other[k]) for k in LAYERS)


@dataclass(frozen=True)
class TrainingExample:
    x: np.ndarray
    pi: np.ndarray
    z: float


@dataclass(frozen=True)
class TrainConfig:
    ep: int = 10
    bs: int = 64
    lr: float = 0.005
    d: float = 0.3
    optimizer: str = "sgd"
    seed: int = 0

    def __post_init__(self):
        if self.ep < 1 or self.bs < 1 or not self.lr >= 0 or not 0 <= self.d < 1:
            raise ValueError(f"invalid training config {self}")
        if self.optimizer not in ("sgd", "adam"):
            raise ValueError(f"unknown optimizer {self.optimizer!r}")


class ReplayBuffer:
    """Examples grouped by iteration; only the latest ``capacity`` iterations are kept."""

    def __init__(self, capacity: int = 20):
        if capacity < 1:
            raise ValueError("capacity must be >= 1")
        self.capacity = capacity
        self._iterations: deque = deque()

    def push(self, iteration: int, examples: Sequence[TrainingExample]) -> None:
        self._iterations.append((iteration, list(examples)))
        while len(self._iterations) > self.capacity:
            self._iterations.popleft()

    @property
    def iterations(self) -> list[int]:
        return [it for it, _ in self._iterations]

    def items(self):
        return list(self._iterations)

    def examples(self) -> list[TrainingExample]:
        return [ex for _, exs in self._iterations for ex in exs]

    def __len__(self) -> int:
        return sum(len(exs) for _, exs in self._iterations)


def architecture_for(game: GameLike, channels: int = 32, hidden: int = 256) -> Architecture:
    return Architecture(action_size=get_rules(game).action_size, channels=channels, hidden=hidden)


def init_params(game: GameLike, seed: int, channels: int = 32, hidden: int = 256, dropout: float = 0.3) -> ModelParams:
    arch = architecture_for(game, channels, hidden)
    rng = np.random.default_rng(seed)
    weights = {}
    for name, shape in arch.shapes().items():
        if name.endswith("_b"):
            weights[name] = np.zeros(shape, dtype=np.float32)
        else:
            fan_in = shape[0]
            weights[name] = (rng.standard_normal(shape) * math.sqrt(1.0 / fan_in)).astype(np.float32)
    return ModelParams(arch, weights, dropout)


def _silu(x):
    # x * sigmoid(x), written to avoid overflow in exp for large |x|
    return x * (0.5 * (1.0 + np.tanh(0.5 * x)))


def _silu_grad(pre, out):
    sig = 0.5 * (1.0 + np.tanh(0.5 * pre))
    return sig * (1.0 + pre * (1.0 - sig))


def _im2col(x: np.ndarray) -> np.ndarray:
    b, n, _, c = x.shape
    xp = np.zeros((b, n + 2, n + 2, c), dtype=x.dtype)
    xp[:, 1:-1, 1:-1, :] = x
    cols = np.concatenate([xp[:, i : i + n, j : j + n, :] for i, j in _OFFSETS], axis=-1)
    return cols.reshape(b * n * n, 9 * c)


def _col2im(dcols: np.ndarray, b: int, n: int, c: int) -> np.ndarray:
    d = dcols.reshape(b, n, n, 9, c)
    dxp = np.zeros((b, n + 2, n + 2, c), dtype=dcols.dtype)
    for k, (i, j) in enumerate(_OFFSETS):
        dxp[:, i : i + n, j : j + n, :] += d[:, :, :, k, :]
    return dxp[:, 1:-1, 1:-1, :]


def _softmax(logits):
    e = np.exp(logits - logits.max(axis=-1, keepdims=True))
    return e / e.sum(axis=-1, keepdims=True)


def forward(p: ModelParams, x: np.ndarray, dropout_mask: Optional[np.ndarray] = None):
    """Batch forward pass.  ``x`` has shape (B, 6, 6).  Returns (probs, values, cache)."""
    w = p.weights
    n = p.arch.board
    b = x.shape[0]
    x4 = x.reshape(b, n, n, p.arch.in_channels).astype(w["conv1_w"].dtype, copy=False)
    cols1 = _im2col(x4)
    z1 = cols1 @ w["conv1_w"] + w["conv1_b"]
    a1 = _silu(z1)
    cols2 = _im2col(a1.reshape(b, n, n, -1))
    z2 = cols2 @ w["conv2_w"] + w["conv2_b"]
    a2 = _silu(z2)
    flat = a2.reshape(b, -1)
    z3 = flat @ w["fc_w"] + w["fc_b"]
    a3 = _silu(z3)
    h = a3 * dropout_mask if dropout_mask is not None else a3
    logits = h @ w["pi_w"] + w["pi_b"]
    probs = _softmax(logits)
    v = np.tanh(h @ w["v_w"] + w["v_b"])[:, 0]
    cache = (x4, cols1, z1, a1, cols2, z2, a2, flat, z3, a3, h, dropout_mask)
    return probs, v, cache


def loss_terms(probs, v, pi, z):
    """Mean value loss and mean policy cross-entropy."""
    value_loss = float(np.mean((z - v) ** 2))
    policy_loss = float(-np.mean(np.sum(pi * np.log(np.maximum(probs, 1e-30)), axis=1)))
    return value_loss, policy_loss


def backward(p: ModelParams, probs, v, cache, pi, z) -> dict[str, np.ndarray]:
    """Gradients of mean((z-v)^2) - mean(pi . log p) for every layer."""
    w = p.weights
    x4, cols1, z1, a1, cols2, z2, a2, flat, z3, a3, h, mask = cache
    b = probs.shape[0]
    n = p.arch.board
    g = {}
    dlogits = (probs * pi.sum(axis=1, keepdims=True) - pi) / b
    dv = (-2.0 * (z - v) * (1.0 - v * v) / b)[:, None]
    g["pi_w"] = h.T @ dlogits
    g["pi_b"] = dlogits.sum(axis=0)
    g["v_w"] = h.T @ dv
    g["v_b"] = dv.sum(axis=0)
    dh = dlogits @ w["pi_w"].T + dv @ w["v_w"].T
    if mask is not None:
        dh = dh * mask
    dz3 = dh * _silu_grad(z3, a3)
    g["fc_w"] = flat.T @ dz3
    g["fc_b"] = dz3.sum(axis=0)
    dflat = dz3 @ w["fc_w"].T
    dz2 = dflat.reshape(z2.shape) * _silu_grad(z2, a2)
    g["conv2_w"] = cols2.T @ dz2
    g["conv2_b"] = dz2.sum(axis=0)
    da1 = _col2im(dz2 @ w["conv2_w"].T, b, n, p.arch.channels).reshape(z1.shape)
    dz1 = da1 * _silu_grad(z1, a1)
    g["conv1_w"] = cols1.T @ dz1
    g["conv1_b"] = dz1.sum(axis=0)
    return g


def _mask_policy(raw: np.ndarray, legal: Sequence[int]) -> np.ndarray:
    pol = np.zeros_like(raw)
    idx = np.asarray(legal, dtype=np.int64)
    pol[idx] = raw[idx]
    total = pol.sum()
    if not total > 0 or not np.isfinite(total):
        log.warning("masked policy has no mass; using uniform over %d legal moves", len(idx))
        pol[:] = 0
        pol[idx] = 1.0 / len(idx)
        return pol
    return pol / total


_PAD = SIZE + 2
# gather indices turning a zero-padded (8*8, C) grid into (36*9, C) patches
_PATCH_IDX = np.array(
    [(r + i) * _PAD + (c + j) for r in range(SIZE) for c in range(SIZE) for i, j in _OFFSETS]
)
_INNER_IDX = np.array([(r + 1) * _PAD + (c + 1) for r in range(SIZE) for c in range(SIZE)])


def _infer_one(p: ModelParams, x: np.ndarray) -> tuple[np.ndarray, float]:
    """Single-position inference without dropout; same maths as ``forward``."""
    w = p.weights
    dtype = w["conv1_w"].dtype
    cin = p.arch.in_channels
    pad = np.zeros((_PAD * _PAD, cin), dtype=dtype)
    pad[_INNER_IDX] = np.asarray(x, dtype=dtype).reshape(-1, cin)
    a1 = _silu(pad[_PATCH_IDX].reshape(SIZE * SIZE, 9 * cin) @ w["conv1_w"] + w["conv1_b"])
    pad = np.zeros((_PAD * _PAD, a1.shape[1]), dtype=dtype)
    pad[_INNER_IDX] = a1
    a2 = _silu(pad[_PATCH_IDX].reshape(SIZE * SIZE, -1) @ w["conv2_w"] + w["conv2_b"])
    h = _silu(a2.reshape(-1) @ w["fc_w"] + w["fc_b"])
    logits = h @ w["pi_w"] + w["pi_b"]
    e = np.exp(logits - logits.max())
    v = np.tanh(h @ w["v_w"] + w["v_b"])
    return e / e.sum(), float(v[0])


def predict(p: ModelParams, x: np.ndarray, legal: Sequence[int]) -> tuple[np.ndarray, float]:
    """Masked, renormalized policy over the action space and a value in [-1, 1]."""
    if p.arch.board != SIZE:
        probs, v, _ = forward(p, np.asarray(x)[None])
        return _mask_policy(probs[0].astype(np.float64), legal), float(v[0])
    probs, v = _infer_one(p, x)
    return _mask_policy(probs.astype(np.float64), legal), v


class NetworkEvaluator:
    """State -> (policy, value) through a fixed parameter snapshot, memoized by position."""

    def __init__(self, params: ModelParams, cache_size: int = 200_000):
        self.params = params
        self.cache_size = cache_size
        self._cache: dict = {}

    def __call__(self, state: GameState) -> tuple[np.ndarray, float]:
        key = state.key
        hit = self._cache.get(key)
        if hit is not None:
            return hit
        out = predict(self.params, state.encode(), state.legal_moves())
        if len(self._cache) >= self.cache_size:
            self._cache.clear()
        self._cache[key] = out
        return out


def _stack(examples: Sequence[TrainingExample], dtype):
    x = np.stack([e.x for e in examples]).astype(dtype)
    pi = np.stack([e.pi for e in examples]).astype(dtype)
    z = np.array([e.z for e in examples], dtype=dtype)
    return x, pi, z


def fit(
    p: ModelParams,
    examples: Iterable[TrainingExample],
    cfg: TrainConfig,
) -> tuple[ModelParams, list[float]]:
    """Train on ``examples``; returns new params and the mean loss of every epoch."""
    data = list(examples)
    if not data:
        raise TrainingError("cannot train on an empty buffer")
    dtype = p["fc_w"].dtype
    x_all, pi_all, z_all = _stack(data, dtype)
    rng = np.random.default_rng(cfg.seed)
    weights = {k: p[k].copy() for k in LAYERS}
    work = ModelParams(p.arch, weights, p.dropout)
    adam_m = {k: np.zeros_like(weights[k]) for k in LAYERS}
    adam_v = {k: np.zeros_like(weights[k]) for k in LAYERS}
    step = 0
    history = []
    keep = 1.0 - cfg.d
    for epoch in range(cfg.ep):
        order = rng.permutation(len(data))
        total, batches = 0.0, 0
        for start in range(0, len(data), cfg.bs):
            idx = order[start : start + cfg.bs]
            x, pi, z = x_all[idx], pi_all[idx], z_all[idx]
            mask = None
            if cfg.d > 0:
                mask = ((rng.random((len(idx), p.arch.hidden)) < keep) / keep).astype(dtype)
            probs, v, cache = forward(work, x, mask)
            vl, pl = loss_terms(probs, v, pi, z)
            loss = vl + pl
            if not math.isfinite(loss):
                raise TrainingError(f"non-finite loss {loss} at epoch {epoch + 1}, batch {batches + 1}")
            grads = backward(work, probs, v, cache, pi, z)
            step += 1
            if cfg.optimizer == "sgd":
                for k in LAYERS:
                    weights[k] -= (cfg.lr * grads[k]).astype(dtype)
            else:
                b1, b2, eps = 0.9, 0.999, 1e-8
                for k in LAYERS:
                    adam_m[k] = b1 * adam_m[k] + (1 - b1) * grads[k]
                    adam_v[k] = b2 * adam_v[k] + (1 - b2) * grads[k] ** 2
                    mhat = adam_m[k] / (1 - b1**step)
                    vhat = adam_v[k] / (1 - b2**step)
                    weights[k] -= (cfg.lr * mhat / (np.sqrt(vhat) + eps)).astype(dtype)
            total += loss
            batches += 1
        history.append(total / batches)
    return p.replace(weights), history


def train(p: ModelParams, buf: ReplayBuffer, cfg: TrainConfig) -> ModelParams:
    return fit(p, buf.examples(), cfg)[0]


def example_loss(p: ModelParams, ex: TrainingExample) -> float:
    probs, v, _ = forward(p, ex.x[None])
    vl, pl = loss_terms(probs, v, np.asarray(ex.pi, dtype=probs.dtype)[None], np.array([ex.z], dtype=probs.dtype))
    return vl + pl


def gradient_check(
    p: ModelParams,
    example: TrainingExample,
    n_params: int = 100,
    step: float = 1e-4,
    seed: int = 0,
    grad_fn: Callable = backward,
) -> float:
    """Largest relative error between analytic and central-difference gradients.

    Runs in float64 without dropout.  Parameters are sampled evenly across all
    layers so every head is covered.  The relative error uses a floor of 1e-7
    in the denominator so near-zero gradients compare absolutely.
    """
    p64 = p.astype(np.float64)
    x = np.asarray(example.x, dtype=np.float64)[None]
    pi = np.asarray(example.pi, dtype=np.float64)[None]
    z = np.array([example.z], dtype=np.float64)
    probs, v, cache = forward(p64, x)
    grads = grad_fn(p64, probs, v, cache, pi, z)
    rng = np.random.default_rng(seed)
    per_layer = math.ceil(n_params / len(LAYERS))
    weights = {k: p64[k].copy() for k in LAYERS}
    worst = 0.0

    def loss_at():
        pr, vv, _ = forward(ModelParams(p.arch, weights, p.dropout), x)
        vl, pl = loss_terms(pr, vv, pi, z)
        return vl + pl

    for k in LAYERS:
        flat = weights[k].reshape(-1)
        picks = rng.choice(flat.size, size=min(per_layer, flat.size), replace=False)
        for i in picks:
            orig = flat[i]
            flat[i] = orig + step
            up = loss_at()
            flat[i] = orig - step
            down = loss_at()
            flat[i] = orig
            numeric = (up - down) / (2 * step)
            analytic = float(grads[k].reshape(-1)[i])
            err = abs(analytic - numeric) / max(abs(analytic), abs(numeric), 1e-7)
            worst = max(worst, err)
    return worst


def save_checkpoint(p: ModelParams, path, iteration: int = 0) -> None:
    """JSON envelope with base64 little-endian float32 arrays."""
    doc = {
        "architecture": asdict(p.arch),
        "dropout": p.dropout,
        "iteration": iteration,
        "weights": [
            {
                "name": k,
                "shape": list(p[k].shape),
                "data": base64.b64encode(np.ascontiguousarray(p[k], dtype="<f4").tobytes()).decode("ascii"),
            }
            for k in LAYERS
        ],
    }
    Path(path).write_text(json.dumps(doc))


def load_checkpoint(path) -> tuple[ModelParams, int]:
    try:
        doc = json.loads(Path(path).read_text())
        arch = Architecture(**doc["architecture"])
        weights = {}
        for entry in doc["weights"]:
            raw = base64.b64decode(entry["data"])
            weights[entry["name"]] = np.frombuffer(raw, dtype="<f4").astype(np.float32).reshape(entry["shape"])
        return ModelParams(arch, weights, doc.get("dropout", 0.3)), int(doc["iteration"])
    except FileNotFoundError:
        raise CheckpointError(f"checkpoint {path} does not exist") from None
    except (KeyError, ValueError, TypeError) as e:
        raise CheckpointError(f"checkpoint {path} is corrupt: {e}") from e
