"""Still-frame preprocessing for the image branch.

Images are float arrays shaped ``(3, H, W)`` with values in [0, 1] before
standardisation.
"""
import math
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from .exceptions import FormatError, ValidationError
from .rng import as_rng

OUT_SIZE = 224
EVAL_RESIZE = 256
STACK_LEN = 16
AREA_RANGE = (0.08, 1.0)
ASPECT_RANGE = (3 / 4, 4 / 3)
MAX_CROP_TRIES = 10
IMAGE_MAGIC = b"IMG1"


@dataclass(frozen=True)
class CropParams:
    x: int
    y: int
    w: int
    h: int
    flip: bool = False


@dataclass(frozen=True)
class ChannelStats:
    mean: tuple
    std: tuple

    def __post_init__(self):
        if len(self.mean) != 3 or len(self.std) != 3:
            raise ValidationError("channel stats need three means and three stds")
        if min(self.std) <= 0:
            raise ValidationError(f"channel std must be positive, got {self.std}")


def check_image(img):
    img = np.asarray(img, dtype=np.float64)
    if img.ndim != 3 or img.shape[0] != 3 or img.shape[1] < 1 or img.shape[2] < 1:
        raise ValidationError(f"expected a (3, H, W) image, got shape {img.shape}")
    return img


def sample_crop_params(src_h, src_w, rng, area=None, aspect=None):
    """Random resized crop geometry.

    Area fraction and aspect ratio are drawn uniformly (linear scale) from
    ``AREA_RANGE`` and ``ASPECT_RANGE``.  ``area``/``aspect`` pin those draws.
    After ``MAX_CROP_TRIES`` misfits the largest centred square is used.
    """
    rng = as_rng(rng)
    total = src_h * src_w
    for _ in range(MAX_CROP_TRIES):
        a = rng.uniform(*AREA_RANGE) if area is None else area
        r = rng.uniform(*ASPECT_RANGE) if aspect is None else aspect
        w = round(math.sqrt(a * total * r))
        h = round(math.sqrt(a * total / r))
        if 1 <= w <= src_w and 1 <= h <= src_h:
            x = rng.randbelow(src_w - w + 1)
            y = rng.randbelow(src_h - h + 1)
            return CropParams(x, y, w, h, rng.bernoulli(0.5))
    side = min(src_h, src_w)
    return CropParams((src_w - side) // 2, (src_h - side) // 2, side, side, rng.bernoulli(0.5))


def resize_bilinear(img, out_h, out_w):
    """Bilinear resize with half-pixel centres; same-size input is returned as is."""
    _, h, w = img.shape
    if (h, w) == (out_h, out_w):
        return img.copy()

    def coords(n_out, n_in):
        src = (np.arange(n_out) + 0.5) * (n_in / n_out) - 0.5
        src = np.clip(src, 0, n_in - 1)
        lo = np.floor(src).astype(int)
        hi = np.minimum(lo + 1, n_in - 1)
        return lo, hi, src - lo

    y0, y1, fy = coords(out_h, h)
    x0, x1, fx = coords(out_w, w)
    top = img[:, y0][:, :, x0] * (1 - fx) + img[:, y0][:, :, x1] * fx
    bottom = img[:, y1][:, :, x0] * (1 - fx) + img[:, y1][:, :, x1] * fx
    return top * (1 - fy)[:, None] + bottom * fy[:, None]


def apply_crop_resize(img, p, size=OUT_SIZE):
    img = check_image(img)
    _, h, w = img.shape
    if p.w < 1 or p.h < 1 or p.x < 0 or p.y < 0 or p.x + p.w > w or p.y + p.h > h:
        raise IndexError(f"crop {p} does not fit a {h}x{w} image")
    out = resize_bilinear(img[:, p.y:p.y + p.h, p.x:p.x + p.w], size, size)
    return out[:, :, ::-1].copy() if p.flip else out


def standardize(img, stats):
    mean = np.asarray(stats.mean, dtype=np.float64)[:, None, None]
    std = np.asarray(stats.std, dtype=np.float64)[:, None, None]
    if np.any(std <= 0):
        raise ValidationError("channel std must be positive")
    return (check_image(img) - mean) / std


def compute_channel_stats(images):
    """Per-channel mean and population std over every pixel of every image."""
    images = [check_image(im) for im in images]
    if not images:
        raise ValidationError("cannot compute channel stats of an empty collection")
    pixels = np.concatenate([im.reshape(3, -1) for im in images], axis=1)
    mean = pixels.mean(axis=1)
    std = pixels.std(axis=1)
    if np.any(std == 0):
        raise ValidationError(f"zero-variance channel (std={std.tolist()})")
    return ChannelStats(tuple(mean.tolist()), tuple(std.tolist()))


def build_frame_stack(history, index):
    """The 16 frames ending at ``index``, zero-padded on the left.

    Returns ``(stack, valid_count)`` with ``stack`` shaped ``(16, 3, 224, 224)``.
    """
    if not 0 <= index < len(history):
        raise IndexError(f"frame index {index} outside history of {len(history)}")
    valid = min(index + 1, STACK_LEN)
    frames = [check_image(f) for f in history[index - valid + 1:index + 1]]
    stack = np.zeros((STACK_LEN,) + frames[0].shape)
    stack[STACK_LEN - valid:] = frames
    return stack, valid


def center_crop(img, size=OUT_SIZE, resize_to=EVAL_RESIZE):
    _, h, w = img.shape
    scale = resize_to / min(h, w)
    nh, nw = max(size, round(h * scale)), max(size, round(w * scale))
    img = resize_bilinear(img, nh, nw)
    y, x = (nh - size) // 2, (nw - size) // 2
    return img[:, y:y + size, x:x + size]


def train_transform(img, stats, rng):
    img = check_image(img)
    p = sample_crop_params(img.shape[1], img.shape[2], rng)
    return standardize(apply_crop_resize(img, p), stats)


def eval_transform(img, stats, literal=False, rng=None):
    """Test-time transform.

    Default: resize the shorter side to 256, centre-crop 224, standardise.
    ``literal=True`` keeps the random resized crop but never flips.
    """
    img = check_image(img)
    if not literal:
        return standardize(center_crop(img), stats)
    p = sample_crop_params(img.shape[1], img.shape[2], rng)
    p = CropParams(p.x, p.y, p.w, p.h, False)
    return standardize(apply_crop_resize(img, p), stats)


def read_image(path):
    """Load an ``IMG1`` raw file or any Pillow-readable image as ``(3, H, W)``."""
    raw = Path(path).read_bytes()
    if raw[:4] == IMAGE_MAGIC:
        if len(raw) < 16:
            raise FormatError(f"{path}: truncated header")
        h, w, c = struct.unpack_from("<III", raw, 4)
        if c != 3 or len(raw) != 16 + 4 * h * w * c:
            raise FormatError(f"{path}: bad dims or truncated payload")
        hwc = np.frombuffer(raw, dtype="<f4", offset=16).reshape(h, w, c)
        return hwc.transpose(2, 0, 1).astype(np.float64)
    from PIL import Image, UnidentifiedImageError

    try:
        with Image.open(path) as im:
            arr = np.asarray(im.convert("RGB"), dtype=np.float64) / 255.0
    except UnidentifiedImageError as exc:
        raise FormatError(f"{path}: not an IMG1 or readable image") from exc
    return arr.transpose(2, 0, 1)


def write_image(img, path):
    """Write ``(3, H, W)`` as ``IMG1``: magic, u32 H, W, C, then HWC float32."""
    img = check_image(img)
    _, h, w = img.shape
    with open(path, "wb") as fh:
        fh.write(IMAGE_MAGIC + struct.pack("<III", h, w, 3))
        fh.write(np.ascontiguousarray(img.transpose(1, 2, 0), dtype="<f4").tobytes())


class FramePreprocessor(BaseEstimator, TransformerMixin):
    """Fits dataset channel statistics, then crops and standardises frames.

    With ``train=True`` frames get a random resized crop and random flip
    from the seeded generator; otherwise the evaluation transform is used.
    """

    def __init__(self, train=False, literal_eval=False, seed=0):
        self.train = train
        self.literal_eval = literal_eval
        self.seed = seed

    def fit(self, X, y=None):
        self.stats_ = compute_channel_stats(X)
        return self

    def transform(self, X):
        check_is_fitted(self, "stats_")
        rng = as_rng(self.seed)
        out = []
        for img in X:
            if self.train:
                out.append(train_transform(img, self.stats_, rng))
            else:
                out.append(eval_transform(img, self.stats_, self.literal_eval, rng))
        return np.stack(out) if out else np.zeros((0, 3, OUT_SIZE, OUT_SIZE))
