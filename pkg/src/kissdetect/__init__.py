"""Scene detection in long videos: feature extraction, a late-fusion
classifier head and a segmentor over per-second labels."""
from .exceptions import FormatError, ValidationError
from .fusion import FusionHeadClassifier, HeadParams, AdamState
from .pipeline import SceneDetector
from .rng import SplitMix64
from .segmentor import SceneSegmentor, Segment, find_segments, find_segments_oracle

__all__ = [
    "AdamState",
    "FormatError",
    "FusionHeadClassifier",
    "HeadParams",
    "SceneDetector",
    "SceneSegmentor",
    "Segment",
    "SplitMix64",
    "ValidationError",
    "find_segments",
    "find_segments_oracle",
]

__version__ = "0.1.0"
