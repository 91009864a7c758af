"""Manifests, dataset splits and the on-disk formats for embeddings and labels."""
import json
import math
import struct
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from .exceptions import FormatError, ValidationError
from .rng import SplitMix64
from .validation import AUDIO_DIM, FUSED_DIM, IMAGE_DIM

EMB_MAGIC = b"EMB1"
ROLE_DIMS = {"image": IMAGE_DIM, "audio": AUDIO_DIM, "fused": FUSED_DIM}
_ROLE_TAGS = {"image": 0, "audio": 1, "fused": 2}
_TAG_ROLES = {v: k for k, v in _ROLE_TAGS.items()}
_EMB_HEADER = struct.Struct("<4sBII")
_MANIFEST_FIELDS = ("video_id", "start_s", "end_s", "label")


@dataclass(frozen=True)
class ManifestEntry:
    video_id: str
    start_s: float
    end_s: float
    label: int

    def to_json(self):
        return json.dumps(asdict(self))


@dataclass(frozen=True)
class SplitSpec:
    train: float = 0.8
    val: float = 0.1
    test: float = 0.1
    seed: int = 0

    def __post_init__(self):
        fracs = (self.train, self.val, self.test)
        if min(fracs) <= 0 or abs(sum(fracs) - 1.0) > 1e-9:
            raise ValidationError(f"split fractions must be positive and sum to 1, got {fracs}")


@dataclass
class EmbeddingFile:
    role: str
    data: np.ndarray

    def __post_init__(self):
        if self.role not in ROLE_DIMS:
            raise ValidationError(f"unknown embedding role {self.role!r}")
        self.data = np.asarray(self.data, dtype=np.float32)
        if self.data.ndim != 2 or self.data.shape[1] != ROLE_DIMS[self.role]:
            raise ValidationError(
                f"{self.role} embeddings need {ROLE_DIMS[self.role]} columns, got shape {self.data.shape}"
            )

    @property
    def count(self):
        return self.data.shape[0]

    @property
    def dim(self):
        return self.data.shape[1]


def _parse_manifest_line(obj, lineno):
    if not isinstance(obj, dict) or set(obj) != set(_MANIFEST_FIELDS):
        raise FormatError(f"line {lineno}: expected exactly the fields {list(_MANIFEST_FIELDS)}")
    if obj["label"] not in (0, 1) or isinstance(obj["label"], bool):
        raise FormatError(f"line {lineno}: label must be 0 or 1")
    start, end = obj["start_s"], obj["end_s"]
    if not all(isinstance(v, (int, float)) and not isinstance(v, bool) for v in (start, end)):
        raise FormatError(f"line {lineno}: start_s and end_s must be numbers")
    if not 0 <= start < end:
        raise FormatError(f"line {lineno}: need 0 <= start_s < end_s, got {start}, {end}")
    return ManifestEntry(str(obj["video_id"]), start, end, obj["label"])


def load_manifest(path):
    """Read a JSON Lines manifest; blank lines are skipped."""
    entries = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise FormatError(f"line {lineno}: malformed JSON ({exc.msg})") from exc
            entries.append(_parse_manifest_line(obj, lineno))
    return entries


def save_manifest(entries, path):
    with open(path, "w", encoding="utf-8") as fh:
        for e in entries:
            fh.write(e.to_json() + "\n")


def split_dataset(entries, spec=SplitSpec()):
    """Shuffle with the seeded generator, then cut into train/val/test.

    Cuts fall at ``floor(train * n)`` and ``floor((train + val) * n)``.
    """
    items = list(entries)
    n = len(items)
    SplitMix64(spec.seed).shuffle(items)
    a = math.floor(spec.train * n)
    b = math.floor((spec.train + spec.val) * n)
    return items[:a], items[a:b], items[b:]


def write_embeddings(emb, path):
    data = np.ascontiguousarray(emb.data, dtype="<f4")
    with open(path, "wb") as fh:
        fh.write(_EMB_HEADER.pack(EMB_MAGIC, _ROLE_TAGS[emb.role], emb.count, emb.dim))
        fh.write(data.tobytes())


def read_embeddings(path):
    raw = Path(path).read_bytes()
    if len(raw) < 4 or raw[:4] != EMB_MAGIC:
        raise FormatError(f"{path}: bad magic, expected {EMB_MAGIC!r}")
    if len(raw) < _EMB_HEADER.size:
        raise FormatError(f"{path}: truncated header")
    _, tag, count, dim = _EMB_HEADER.unpack_from(raw)
    if tag not in _TAG_ROLES:
        raise FormatError(f"{path}: unknown role tag {tag}")
    role = _TAG_ROLES[tag]
    if dim not in (IMAGE_DIM, AUDIO_DIM, FUSED_DIM) or dim != ROLE_DIMS[role]:
        raise FormatError(f"{path}: dim {dim} invalid for role {role}")
    expected = _EMB_HEADER.size + 4 * count * dim
    if len(raw) != expected:
        raise FormatError(f"{path}: truncated payload ({len(raw)} bytes, expected {expected})")
    data = np.frombuffer(raw, dtype="<f4", offset=_EMB_HEADER.size).reshape(count, dim)
    return EmbeddingFile(role, data.astype(np.float32))


def read_label_stream(path):
    """Parse the one-label-per-line text format into an int8 array."""
    labels = []
    text = Path(path).read_bytes().decode("latin-1")
    for lineno, line in enumerate(text.splitlines(keepends=True), start=1):
        value = line[:-1] if line.endswith("\n") else line
        if value not in ("0", "1"):
            raise FormatError(f"line {lineno}: expected '0' or '1', got {value!r}")
        labels.append(int(value))
    return np.asarray(labels, dtype=np.int8)


def write_label_stream(labels, path):
    with open(path, "w", encoding="ascii", newline="") as fh:
        fh.writelines(f"{int(v)}\n" for v in labels)


def segments_to_json(segments):
    return json.dumps([s.to_dict() for s in segments])


def write_segments(segments, path):
    Path(path).write_text(segments_to_json(segments) + "\n", encoding="utf-8")
