"""Local classifiers: softmax regression and a one-hidden-layer tanh MLP,
with analytic gradients and plain mini-batch SGD.

Parameters live in a single flat float64 vector so server-side averaging is
one weighted sum. Layouts:
  softmax: W (C, d) row-major, then b (C,)
  mlp1:    W1 (h, d), b1 (h,), W2 (C, h), b2 (C,)
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import Dataset, RngStream, format_float

ARCHS = ("softmax", "mlp1")
PROB_CLAMP = 1e-12
INIT_STD = 0.01


@dataclass
class TrainConfig:
    lr: float = 0.1
    batch_size: int = 128
    local_epochs: int = 5
    shuffle: bool = True

    def __post_init__(self):
        if self.lr < 0:
            raise ValueError(f"lr must be >= 0, got {self.lr}")
        if self.batch_size < 1:
            raise ValueError(f"batch_size must be >= 1, got {self.batch_size}")
        if self.local_epochs < 1:
            raise ValueError(f"local_epochs must be >= 1, got {self.local_epochs}")


@dataclass
class ModelParams:
    arch: str
    theta: np.ndarray  # flat float64
    dim: int
    class_count: int
    hidden: int = 0

    def __post_init__(self):
        if self.arch not in ARCHS:
            raise ValueError(f"unknown arch {self.arch!r}; expected one of {ARCHS}")
        self.theta = np.asarray(self.theta, dtype=np.float64)
        expected = params_size(self.arch, self.dim, self.class_count, self.hidden)
        if self.theta.shape != (expected,):
            raise ValueError(f"theta must have length {expected}, got {self.theta.shape}")
        if not np.all(np.isfinite(self.theta)):
            raise ValueError("theta contains non-finite entries")

    def copy(self) -> "ModelParams":
        return ModelParams(self.arch, self.theta.copy(), self.dim, self.class_count, self.hidden)


def params_size(arch: str, d: int, C: int, h: int = 0) -> int:
    if arch == "softmax":
        return d * C + C
    if arch == "mlp1":
        return d * h + h + h * C + C
    raise ValueError(f"unknown arch {arch!r}")


def init_params(arch: str, d: int, C: int, h: int, stream: RngStream) -> ModelParams:
    """Weights ~ N(0, 0.01^2), biases exactly zero."""
    if d < 1 or C < 1:
        raise ValueError("d and C must be >= 1")
    if arch == "softmax":
        theta = np.concatenate([
            stream.generator.normal(0.0, INIT_STD, d * C),
            np.zeros(C),
        ])
        return ModelParams("softmax", theta, d, C)
    if arch == "mlp1":
        if h < 1:
            raise ValueError(f"hidden width must be >= 1 for mlp1, got {h}")
        theta = np.concatenate([
            stream.generator.normal(0.0, INIT_STD, d * h),
            np.zeros(h),
            stream.generator.normal(0.0, INIT_STD, h * C),
            np.zeros(C),
        ])
        return ModelParams("mlp1", theta, d, C, h)
    raise ValueError(f"unknown arch {arch!r}; expected one of {ARCHS}")


def _unpack(params: ModelParams):
    d, C, h = params.dim, params.class_count, params.hidden
    t = params.theta
    if params.arch == "softmax":
        return t[: d * C].reshape(C, d), t[d * C:]
    w1_end = d * h
    b1_end = w1_end + h
    w2_end = b1_end + h * C
    return (
        t[:w1_end].reshape(h, d),
        t[w1_end:b1_end],
        t[b1_end:w2_end].reshape(C, h),
        t[w2_end:],
    )


def _softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=1, keepdims=True)


def predict_proba(params: ModelParams, X: np.ndarray) -> np.ndarray:
    """Class probabilities for a batch of feature rows, shape (n, C)."""
    X = np.asarray(X, dtype=np.float64)
    if params.arch == "softmax":
        W, b = _unpack(params)
        return _softmax(X @ W.T + b)
    W1, b1, W2, b2 = _unpack(params)
    hidden = np.tanh(X @ W1.T + b1)
    return _softmax(hidden @ W2.T + b2)


def forward(params: ModelParams, x: np.ndarray) -> np.ndarray:
    """Probability vector over classes for one feature vector."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (params.dim,):
        raise ValueError(f"expected a feature vector of length {params.dim}, got {x.shape}")
    if not np.all(np.isfinite(x)):
        raise ValueError("input features must be finite")
    return predict_proba(params, x[None, :])[0]


def ce_loss(params: ModelParams, data: Dataset) -> float:
    """Mean cross-entropy of the true class, probabilities clamped to [1e-12, 1]."""
    if len(data) == 0:
        raise ValueError("ce_loss needs a nonempty batch")
    probs = predict_proba(params, data.features)
    p_true = np.clip(probs[np.arange(len(data)), data.labels], PROB_CLAMP, 1.0)
    return float(-np.mean(np.log(p_true)))


def _gradient_arrays(params: ModelParams, X: np.ndarray, y: np.ndarray) -> np.ndarray:
    n = X.shape[0]
    if params.arch == "softmax":
        W, b = _unpack(params)
        dlogits = _softmax(X @ W.T + b)
        dlogits[np.arange(n), y] -= 1.0
        dlogits /= n
        return np.concatenate([(dlogits.T @ X).ravel(), dlogits.sum(axis=0)])
    W1, b1, W2, b2 = _unpack(params)
    hidden = np.tanh(X @ W1.T + b1)
    dlogits = _softmax(hidden @ W2.T + b2)
    dlogits[np.arange(n), y] -= 1.0
    dlogits /= n
    dhidden = (dlogits @ W2) * (1.0 - hidden ** 2)
    return np.concatenate([
        (dhidden.T @ X).ravel(),
        dhidden.sum(axis=0),
        (dlogits.T @ hidden).ravel(),
        dlogits.sum(axis=0),
    ])


def gradient(params: ModelParams, data: Dataset) -> np.ndarray:
    """Exact analytic gradient of ce_loss over the batch, flat like theta."""
    if len(data) == 0:
        raise ValueError("gradient needs a nonempty batch")
    return _gradient_arrays(params, data.features, data.labels)


def local_update(
    params: ModelParams, data: Dataset, cfg: TrainConfig, stream: RngStream
) -> ModelParams:
    """Run local_epochs of mini-batch SGD and return fresh params.

    Batches are contiguous slices of a per-epoch shuffle drawn from the
    stream; the input params are never modified.
    """
    if len(data) == 0:
        raise ValueError("local_update needs nonempty data")
    theta = params.theta.copy()
    out = ModelParams(params.arch, theta, params.dim, params.class_count, params.hidden)
    n = len(data)
    for _ in range(cfg.local_epochs):
        order = stream.generator.permutation(n) if cfg.shuffle else np.arange(n)
        for start in range(0, n, cfg.batch_size):
            idx = order[start: start + cfg.batch_size]
            grad = _gradient_arrays(out, data.features[idx], data.labels[idx])
            theta -= cfg.lr * grad
    return out


# ---------------------------------------------------------------------------
# Serialization: shape header line, then the flat vector
# ---------------------------------------------------------------------------

def save_params(path, params: ModelParams) -> None:
    with open(path, "w") as fh:
        fh.write(f"{params.arch},{params.dim},{params.class_count},{params.hidden}\n")
        fh.write(",".join(format_float(v) for v in params.theta) + "\n")


def load_params(path) -> ModelParams:
    with open(path) as fh:
        arch, d, C, h = fh.readline().strip().split(",")
        theta = np.array([float(t) for t in fh.readline().strip().split(",")])
    return ModelParams(arch, theta, int(d), int(C), int(h))
