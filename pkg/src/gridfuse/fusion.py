"""Late fusion of two K-class logit branches with a small MLP.

The head consumes the concatenated 2K-vector (image branch, then point
branch), runs it through rectified hidden layers, and emits K class scores.
Training is plain minibatch gradient descent (optional momentum) on mean
softmax cross-entropy, seeded and single-threaded, so fixed seeds give
bit-identical models.

Checkpoint format (little-endian throughout):
    8 bytes   magic b"GFCKPT01"
    uint32    layer count L
    L x (uint32 n_in, uint32 n_out)
    for each layer: weight matrix (n_in * n_out float64, row-major),
                    then bias vector (n_out float64)
"""

import struct
import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import DataError

__all__ = [
    "FusionModel",
    "TrainConfig",
    "fuse_forward",
    "fuse_gradient",
    "train_fusion",
    "save_model",
    "load_model",
    "softmax",
    "cross_entropy",
]

_MAGIC = b"GFCKPT01"
DEFAULT_HIDDEN = (256, 256)


@dataclass
class FusionModel:
    weights: list        # per layer, (n_in, n_out) float64
    biases: list         # per layer, (n_out,) float64

    def __post_init__(self):
        if len(self.weights) != len(self.biases):
            raise ValueError("weights and biases must pair up")
        if not self.weights:
            raise ValueError("model needs at least one layer")
        prev = None
        for w, b in zip(self.weights, self.biases):
            if w.ndim != 2 or b.ndim != 1 or w.shape[1] != b.shape[0]:
                raise ValueError(f"bad layer shapes {w.shape} / {b.shape}")
            if prev is not None and w.shape[0] != prev:
                raise ValueError(
                    f"layer input {w.shape[0]} does not chain with previous output {prev}"
                )
            if not (np.all(np.isfinite(w)) and np.all(np.isfinite(b))):
                raise ValueError("model parameters must be finite")
            prev = w.shape[1]

    @property
    def n_inputs(self):
        return self.weights[0].shape[0]

    @property
    def n_classes(self):
        return self.weights[-1].shape[1]

    @property
    def num_params(self):
        return sum(w.size + b.size for w, b in zip(self.weights, self.biases))

    @classmethod
    def initialize(cls, n_in: int, n_out: int, hidden=DEFAULT_HIDDEN, seed: int = 0):
        """He-style normal init for the rectifier stack, zero biases."""
        rng = np.random.default_rng(seed)
        dims = [n_in, *hidden, n_out]
        weights, biases = [], []
        for a, b in zip(dims[:-1], dims[1:]):
            weights.append(rng.standard_normal((a, b)) * np.sqrt(2.0 / a))
            biases.append(np.zeros(b, dtype=np.float64))
        return cls(weights, biases)

    def forward(self, x: np.ndarray) -> np.ndarray:
        """Scores for an (N, n_inputs) batch; hidden activations rectified."""
        h = np.asarray(x, dtype=np.float64)
        if h.ndim != 2 or h.shape[1] != self.n_inputs:
            raise ValueError(
                f"expected (N, {self.n_inputs}) inputs, got shape {h.shape}"
            )
        last = len(self.weights) - 1
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            h = h @ w + b
            if i != last:
                np.maximum(h, 0.0, out=h)
        return h

    def predict(self, x: np.ndarray) -> np.ndarray:
        return np.argmax(self.forward(x), axis=1)


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 0.05
    epochs: int = 100
    batch_size: int = 64
    seed: int = 0
    momentum: float = 0.0
    hidden: tuple = DEFAULT_HIDDEN
    class_weighting: bool = False

    def __post_init__(self):
        if not (self.learning_rate > 0):
            raise ValueError("learning rate must be positive")
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        if self.batch_size < 1:
            raise ValueError("batch size must be >= 1")
        if not (0.0 <= self.momentum < 1.0):
            raise ValueError("momentum must be in [0, 1)")


def fuse_forward(model: FusionModel, image_logits, point_logits) -> np.ndarray:
    """Score one sample given its two K-vectors."""
    a = np.asarray(image_logits, dtype=np.float64).ravel()
    b = np.asarray(point_logits, dtype=np.float64).ravel()
    if a.shape != b.shape:
        raise ValueError(f"branch lengths differ: {a.shape} vs {b.shape}")
    if a.size * 2 != model.n_inputs:
        raise ValueError(
            f"model expects 2x{model.n_inputs // 2} inputs, got two of {a.size}"
        )
    return model.forward(np.concatenate([a, b])[None, :])[0]


def softmax(scores: np.ndarray) -> np.ndarray:
    z = scores - np.max(scores, axis=-1, keepdims=True)
    e = np.exp(z)
    return e / np.sum(e, axis=-1, keepdims=True)


def cross_entropy(model: FusionModel, x, y, sample_weights=None) -> float:
    """Mean (optionally weighted) negative log-likelihood."""
    p = softmax(model.forward(x))
    n = len(p)
    ll = -np.log(np.maximum(p[np.arange(n), y], 1e-300))
    if sample_weights is None:
        return float(np.mean(ll))
    sw = np.asarray(sample_weights, dtype=np.float64)
    return float(np.sum(sw * ll) / np.sum(sw))


def fuse_gradient(model: FusionModel, x, y, sample_weights=None):
    """Exact gradients of cross_entropy w.r.t. every weight and bias.

    Returns (loss, weight_grads, bias_grads).
    """
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2 or x.shape[0] == 0:
        raise ValueError("batch must be a non-empty (N, D) array")
    y = np.asarray(y)
    if y.shape != (x.shape[0],):
        raise ValueError(f"labels shape {y.shape} does not match batch {x.shape}")
    k = model.n_classes
    if y.min() < 0 or y.max() >= k:
        raise ValueError(f"labels must lie in [0, {k}), got [{y.min()}, {y.max()}]")

    n = x.shape[0]
    if sample_weights is None:
        sw = np.full(n, 1.0 / n)
    else:
        sw = np.asarray(sample_weights, dtype=np.float64)
        sw = sw / np.sum(sw)

    # forward, keeping pre-activation signs for the backward pass
    acts = [x]
    h = x
    last = len(model.weights) - 1
    for i, (w, b) in enumerate(zip(model.weights, model.biases)):
        h = h @ w + b
        if i != last:
            h = np.maximum(h, 0.0)
        acts.append(h)

    p = softmax(acts[-1])
    ll = -np.log(np.maximum(p[np.arange(n), y], 1e-300))
    loss = float(np.sum(sw * ll))

    delta = p.copy()
    delta[np.arange(n), y] -= 1.0
    delta *= sw[:, None]

    wgrads = [None] * len(model.weights)
    bgrads = [None] * len(model.biases)
    for i in range(last, -1, -1):
        wgrads[i] = acts[i].T @ delta
        bgrads[i] = delta.sum(axis=0)
        if i > 0:
            delta = delta @ model.weights[i].T
            delta[acts[i] <= 0.0] = 0.0
    return loss, wgrads, bgrads


def train_fusion(image_logits, point_logits, labels,
                 config: TrainConfig = TrainConfig()):
    """Fit the fusion head; returns (model, history).

    history is a list of per-epoch dicts with loss and training accuracy.
    Samples labeled 255 are dropped before training.
    """
    a = np.asarray(image_logits, dtype=np.float64)
    b = np.asarray(point_logits, dtype=np.float64)
    if a.shape != b.shape or a.ndim != 2:
        raise ValueError(
            f"branch arrays must share an (N, K) shape, got {a.shape} vs {b.shape}"
        )
    y = np.asarray(labels).ravel()
    if len(y) != len(a):
        raise ValueError(f"{len(y)} labels for {len(a)} samples")
    keep = y != 255
    a, b, y = a[keep], b[keep], y[keep].astype(np.int64)
    if len(y) == 0:
        raise ValueError("no trainable samples (all labels are ignore)")
    k = a.shape[1]
    if y.min() < 0 or y.max() >= k:
        raise ValueError(f"labels must lie in [0, {k})")
    classes = np.unique(y)
    if len(classes) < 2:
        warnings.warn("training data contains a single class", stacklevel=2)

    x = np.concatenate([a, b], axis=1)
    n = len(x)
    if config.class_weighting:
        counts = np.bincount(y, minlength=k).astype(np.float64)
        per_class = np.where(counts > 0, 1.0 / np.maximum(counts, 1.0), 0.0)
        sample_w = per_class[y]
    else:
        sample_w = None

    model = FusionModel.initialize(2 * k, k, hidden=config.hidden, seed=config.seed)
    rng = np.random.default_rng(config.seed + 1)
    vel_w = [np.zeros_like(w) for w in model.weights]
    vel_b = [np.zeros_like(bb) for bb in model.biases]
    history = []
    for _ in range(config.epochs):
        order = rng.permutation(n)
        epoch_loss = 0.0
        nbatches = 0
        for start in range(0, n, config.batch_size):
            idx = order[start:start + config.batch_size]
            bw = None if sample_w is None else sample_w[idx]
            loss, gw, gb = fuse_gradient(model, x[idx], y[idx], bw)
            for li in range(len(model.weights)):
                vel_w[li] = config.momentum * vel_w[li] - config.learning_rate * gw[li]
                vel_b[li] = config.momentum * vel_b[li] - config.learning_rate * gb[li]
                model.weights[li] = model.weights[li] + vel_w[li]
                model.biases[li] = model.biases[li] + vel_b[li]
            epoch_loss += loss
            nbatches += 1
        acc = float(np.mean(model.predict(x) == y))
        history.append({"loss": epoch_loss / nbatches, "accuracy": acc})
    return model, history


def save_model(model: FusionModel, path):
    with open(path, "wb") as fh:
        fh.write(_MAGIC)
        fh.write(struct.pack("<I", len(model.weights)))
        for w in model.weights:
            fh.write(struct.pack("<II", w.shape[0], w.shape[1]))
        for w, b in zip(model.weights, model.biases):
            fh.write(np.ascontiguousarray(w, dtype="<f8").tobytes())
            fh.write(np.ascontiguousarray(b, dtype="<f8").tobytes())


def load_model(path) -> FusionModel:
    with open(path, "rb") as fh:
        blob = fh.read()
    if blob[:8] != _MAGIC:
        raise DataError(f"{path}: not a fusion checkpoint (bad magic)")
    off = 8
    try:
        (count,) = struct.unpack_from("<I", blob, off)
        off += 4
        dims = []
        for _ in range(count):
            n_in, n_out = struct.unpack_from("<II", blob, off)
            off += 8
            dims.append((n_in, n_out))
        weights, biases = [], []
        for n_in, n_out in dims:
            wlen = n_in * n_out * 8
            w = np.frombuffer(blob, dtype="<f8", count=n_in * n_out, offset=off)
            off += wlen
            bvec = np.frombuffer(blob, dtype="<f8", count=n_out, offset=off)
            off += n_out * 8
            weights.append(w.reshape(n_in, n_out).copy())
            biases.append(bvec.copy())
    except (struct.error, ValueError) as exc:
        raise DataError(f"{path}: truncated checkpoint") from exc
    if off != len(blob):
        raise DataError(f"{path}: {len(blob) - off} trailing bytes")
    try:
        return FusionModel(weights, biases)
    except ValueError as exc:
        raise DataError(f"{path}: {exc}") from exc
