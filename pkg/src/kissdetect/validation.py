"""Input validation helpers shared by the estimators and the CLI."""
import numpy as np

from .exceptions import ValidationError

IMAGE_DIM = 512
AUDIO_DIM = 128
FUSED_DIM = IMAGE_DIM + AUDIO_DIM


def check_label_stream(labels):
    """Return ``labels`` as a 1-d int8 array, rejecting anything but 0/1."""
    arr = np.asarray(labels)
    if arr.ndim != 1:
        raise ValidationError(f"label stream must be 1-d, got shape {arr.shape}")
    if arr.size == 0:
        return np.zeros(0, dtype=np.int8)
    if arr.dtype.kind in "biu":
        ok = arr.min() >= 0 and arr.max() <= 1
    else:
        ok = np.all((arr == 0) | (arr == 1))
    if not ok:
        raise ValidationError("label stream entries must be 0 or 1")
    return arr.astype(np.int8)


def check_embeddings(X, dim=FUSED_DIM):
    X = np.asarray(X, dtype=np.float64)
    if X.ndim == 1:
        X = X.reshape(1, -1) if X.size else X.reshape(0, dim)
    if X.ndim != 2 or X.shape[1] != dim:
        raise ValidationError(f"expected embeddings with {dim} columns, got shape {X.shape}")
    if not np.all(np.isfinite(X)):
        raise ValidationError("embeddings contain non-finite values")
    return X


def check_class_labels(y, n=None):
    y = np.asarray(y)
    if y.ndim != 1:
        raise ValidationError("class labels must be 1-d")
    if y.size and not np.all((y == 0) | (y == 1)):
        raise ValidationError("class labels must be 0 or 1")
    if n is not None and y.shape[0] != n:
        raise ValidationError(f"got {y.shape[0]} labels for {n} embeddings")
    return y.astype(np.int64)


def check_fraction(value, name):
    value = float(value)
    if not 0.0 <= value <= 1.0:
        raise ValidationError(f"{name} must lie in [0, 1], got {value}")
    return value


def check_nonnegative_int(value, name):
    if isinstance(value, bool) or int(value) != value or value < 0:
        raise ValidationError(f"{name} must be a nonnegative integer, got {value!r}")
    return int(value)
