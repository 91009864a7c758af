"""Late-fusion linear head over concatenated image and audio embeddings.

Logits are ``W @ x + b`` with ``W`` of shape (2, 640).  Training minimises
the two-class softmax cross entropy, averaged per mini-batch, with Adam.
"""
import math
import struct
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.utils.validation import check_is_fitted

from .exceptions import FormatError, ValidationError
from .metrics import confusion_counts, precision_recall_f1
from .rng import as_rng
from .validation import (
    AUDIO_DIM,
    FUSED_DIM,
    IMAGE_DIM,
    check_class_labels,
    check_embeddings,
)

NUM_CLASSES = 2
MODEL_MAGIC = b"KDH1"


@dataclass
class HeadParams:
    W: np.ndarray
    b: np.ndarray

    def copy(self):
        return HeadParams(self.W.copy(), self.b.copy())


@dataclass
class AdamState:
    lr: float = 0.001
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step: int = 0
    m_W: np.ndarray = field(default_factory=lambda: np.zeros((NUM_CLASSES, FUSED_DIM)))
    v_W: np.ndarray = field(default_factory=lambda: np.zeros((NUM_CLASSES, FUSED_DIM)))
    m_b: np.ndarray = field(default_factory=lambda: np.zeros(NUM_CLASSES))
    v_b: np.ndarray = field(default_factory=lambda: np.zeros(NUM_CLASSES))

    def __post_init__(self):
        if not (0 <= self.beta1 < 1 and 0 <= self.beta2 < 1):
            raise ValidationError("Adam betas must lie in [0, 1)")
        if self.lr <= 0 or self.eps <= 0 or self.step < 0:
            raise ValidationError("Adam needs lr > 0, eps > 0 and step >= 0")

    @classmethod
    def like(cls, params, **hyper):
        return cls(
            m_W=np.zeros_like(params.W), v_W=np.zeros_like(params.W),
            m_b=np.zeros_like(params.b), v_b=np.zeros_like(params.b), **hyper,
        )


def init_params(seed=0, dim=FUSED_DIM):
    """Uniform fan-in init in ``[-1/sqrt(dim), 1/sqrt(dim))``; W row-major, then b."""
    rng = as_rng(seed)
    bound = 1.0 / math.sqrt(dim)
    u = rng.random_array(NUM_CLASSES * dim + NUM_CLASSES)
    vals = -bound + 2.0 * bound * u
    return HeadParams(vals[:NUM_CLASSES * dim].reshape(NUM_CLASSES, dim), vals[NUM_CLASSES * dim:])


def concat_embeddings(image, audio):
    image = np.asarray(image, dtype=np.float64)
    audio = np.asarray(audio, dtype=np.float64)
    if image.shape[-1] != IMAGE_DIM or audio.shape[-1] != AUDIO_DIM:
        raise ValidationError(
            f"expected {IMAGE_DIM}-d image and {AUDIO_DIM}-d audio embeddings, "
            f"got {image.shape[-1]} and {audio.shape[-1]}"
        )
    if image.shape[:-1] != audio.shape[:-1]:
        raise ValidationError("image and audio embeddings have different row counts")
    return np.concatenate((image, audio), axis=-1)


def forward(x, params):
    """Unnormalised class scores; accepts one embedding or a batch of rows."""
    return np.asarray(x, dtype=np.float64) @ params.W.T + params.b


def log_softmax(logits):
    z = logits - np.max(logits, axis=-1, keepdims=True)
    return z - np.log(np.sum(np.exp(z), axis=-1, keepdims=True))


def cross_entropy_loss(y_hat, c):
    """``-log(exp(y_hat[c]) / sum(exp(y_hat)))``; batched input gives the mean."""
    y_hat = np.asarray(y_hat, dtype=np.float64)
    lp = log_softmax(y_hat)
    if y_hat.ndim == 1:
        return float(-lp[int(c)])
    c = np.asarray(c, dtype=np.int64)
    return float(-np.mean(lp[np.arange(len(c)), c]))


def loss_gradient(x, c, params):
    """Gradients ``(dW, db)`` of the (batch-mean) loss."""
    x = np.asarray(x, dtype=np.float64)
    single = x.ndim == 1
    X = x[None, :] if single else x
    c = np.atleast_1d(np.asarray(c, dtype=np.int64))
    logits = forward(X, params)
    p = np.exp(log_softmax(logits))
    p[np.arange(len(c)), c] -= 1.0
    delta = p / len(c)
    return delta.T @ X, delta.sum(axis=0)


def adam_step(params, grads, state):
    """One bias-corrected Adam update; returns new ``(params, state)``."""
    gW, gb = (np.asarray(g, dtype=np.float64) for g in grads)
    if gW.shape != params.W.shape or gb.shape != params.b.shape:
        raise ValidationError(
            f"gradient shapes {gW.shape}, {gb.shape} do not match "
            f"params {params.W.shape}, {params.b.shape}"
        )
    t = state.step + 1
    b1, b2 = state.beta1, state.beta2
    bc1, bc2 = 1.0 - b1 ** t, 1.0 - b2 ** t

    def update(theta, g, m, v):
        m = b1 * m + (1.0 - b1) * g
        v = b2 * v + (1.0 - b2) * g * g
        theta = theta - state.lr * (m / bc1) / (np.sqrt(v / bc2) + state.eps)
        return theta, m, v

    W, m_W, v_W = update(params.W, gW, state.m_W, state.v_W)
    b, m_b, v_b = update(params.b, gb, state.m_b, state.v_b)
    return HeadParams(W, b), replace(state, step=t, m_W=m_W, v_W=v_W, m_b=m_b, v_b=v_b)


def predict_stream(embeddings, params):
    """Per-row argmax of the logits; an exact tie predicts class 0."""
    X = check_embeddings(embeddings, params.W.shape[1])
    if X.shape[0] == 0:
        return np.zeros(0, dtype=np.int8)
    logits = forward(X, params)
    return (logits[:, 1] > logits[:, 0]).astype(np.int8)


def head_saliency(params, c):
    """``|d y_hat[c] / d x|``, i.e. the absolute weights of class ``c``."""
    return np.abs(params.W[int(c)])


def _f1(params, X, y):
    if len(y) == 0:
        return 0.0
    return precision_recall_f1(confusion_counts(predict_stream(X, params), y))[2]


def train_head(X, y, X_val=None, y_val=None, epochs=10, batch_size=64, seed=0,
               lr=0.001, beta1=0.9, beta2=0.999, eps=1e-8, params=None):
    """Mini-batch Adam training of the head.

    Returns ``(params, history, adam_state)``.  ``history`` holds one dict
    per epoch with ``epoch``, ``train_loss`` (mean of batch losses),
    ``train_f1`` and ``val_f1`` (None without a validation set).  One seeded
    stream draws the initial weights and then the per-epoch shuffles.
    """
    X = check_embeddings(X)
    y = check_class_labels(y, X.shape[0])
    if X.shape[0] == 0:
        raise ValidationError("training set is empty")
    if X_val is not None:
        X_val = check_embeddings(X_val)
        y_val = check_class_labels(y_val, X_val.shape[0])
    if int(batch_size) < 1 or int(epochs) < 0:
        raise ValidationError("batch_size must be >= 1 and epochs >= 0")
    rng = as_rng(seed)
    params = init_params(rng) if params is None else params.copy()
    state = AdamState.like(params, lr=lr, beta1=beta1, beta2=beta2, eps=eps)
    history = []
    n = X.shape[0]
    for epoch in range(1, int(epochs) + 1):
        order = rng.permutation(n)
        losses = []
        for start in range(0, n, batch_size):
            idx = order[start:start + batch_size]
            losses.append(cross_entropy_loss(forward(X[idx], params), y[idx]))
            params, state = adam_step(params, loss_gradient(X[idx], y[idx], params), state)
        history.append({
            "epoch": epoch,
            "train_loss": float(np.mean(losses)),
            "train_f1": _f1(params, X, y),
            "val_f1": None if X_val is None else _f1(params, X_val, y_val),
        })
    return params, history, state


_SCALARS = struct.Struct("<ddddQ")


def save_model(params, path, state=None):
    """``KDH1`` file: u32 dims, float32 W then b, optional Adam checkpoint.

    The checkpoint is a flag byte followed by lr, beta1, beta2, eps (f64),
    step (u64) and the four moment buffers as float32.
    """
    rows, cols = params.W.shape
    with open(path, "wb") as fh:
        fh.write(MODEL_MAGIC + struct.pack("<II", rows, cols))
        fh.write(np.ascontiguousarray(params.W, dtype="<f4").tobytes())
        fh.write(np.ascontiguousarray(params.b, dtype="<f4").tobytes())
        if state is None:
            fh.write(b"\x00")
            return
        fh.write(b"\x01")
        fh.write(_SCALARS.pack(state.lr, state.beta1, state.beta2, state.eps, state.step))
        for buf in (state.m_W, state.v_W, state.m_b, state.v_b):
            fh.write(np.ascontiguousarray(buf, dtype="<f4").tobytes())


def load_model(path):
    """Return ``(params, state_or_None)`` from a ``KDH1`` file."""
    raw = Path(path).read_bytes()
    if raw[:4] != MODEL_MAGIC:
        raise FormatError(f"{path}: bad magic, expected {MODEL_MAGIC!r}")
    if len(raw) < 12:
        raise FormatError(f"{path}: truncated header")
    rows, cols = struct.unpack_from("<II", raw, 4)
    if rows != NUM_CLASSES or cols != FUSED_DIM:
        raise FormatError(f"{path}: unexpected dims ({rows}, {cols})")
    n_w, off = rows * cols, 12
    body = off + 4 * (n_w + rows)
    if len(raw) < body + 1:
        raise FormatError(f"{path}: truncated payload")

    def floats(offset, count, shape):
        return np.frombuffer(raw, dtype="<f4", count=count, offset=offset).astype(np.float64).reshape(shape)

    params = HeadParams(floats(off, n_w, (rows, cols)), floats(off + 4 * n_w, rows, (rows,)))
    flag = raw[body]
    if flag == 0:
        if len(raw) != body + 1:
            raise FormatError(f"{path}: trailing bytes after model")
        return params, None
    pos = body + 1
    if len(raw) != pos + _SCALARS.size + 8 * (n_w + rows):
        raise FormatError(f"{path}: truncated optimizer checkpoint")
    lr, b1, b2, eps, step = _SCALARS.unpack_from(raw, pos)
    pos += _SCALARS.size
    bufs = []
    for count, shape in ((n_w, (rows, cols)), (n_w, (rows, cols)), (rows, (rows,)), (rows, (rows,))):
        bufs.append(floats(pos, count, shape))
        pos += 4 * count
    state = AdamState(lr, b1, b2, eps, step, *bufs)
    return params, state


class FusionHeadClassifier(BaseEstimator, ClassifierMixin):
    """Linear late-fusion classifier on 640-d fused embeddings."""

    def __init__(self, epochs=10, batch_size=64, lr=0.001, beta1=0.9, beta2=0.999,
                 eps=1e-8, seed=0):
        self.epochs = epochs
        self.batch_size = batch_size
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.seed = seed

    def fit(self, X, y, X_val=None, y_val=None):
        self.params_, self.history_, self.optimizer_state_ = train_head(
            X, y, X_val, y_val, epochs=self.epochs, batch_size=self.batch_size,
            seed=self.seed, lr=self.lr, beta1=self.beta1, beta2=self.beta2, eps=self.eps,
        )
        self.classes_ = np.array([0, 1])
        return self

    def decision_function(self, X):
        check_is_fitted(self, "params_")
        logits = forward(check_embeddings(X), self.params_)
        return logits[:, 1] - logits[:, 0]

    def predict_proba(self, X):
        check_is_fitted(self, "params_")
        return np.exp(log_softmax(forward(check_embeddings(X), self.params_)))

    def predict(self, X):
        check_is_fitted(self, "params_")
        return predict_stream(X, self.params_)

    def saliency(self, c=1):
        check_is_fitted(self, "params_")
        return head_saliency(self.params_, c)

    @classmethod
    def from_params(cls, params, **kwargs):
        clf = cls(**kwargs)
        clf.params_ = params
        clf.classes_ = np.array([0, 1])
        clf.history_ = []
        return clf
