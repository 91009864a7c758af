"""Log-mel patch extraction for the audio branch.

Waveform -> 16 kHz -> trailing 15600 samples -> |STFT| (25 ms Hann window,
10 ms hop, 512-point FFT) -> 64 HTK mel bands over 125-7500 Hz ->
``log(mel + 0.01)``, giving a 96 x 64 patch.
"""
import struct
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path

import numpy as np
from scipy import signal
from scipy.io import wavfile
from sklearn.base import BaseEstimator, TransformerMixin

from .exceptions import FormatError, ValidationError

TARGET_RATE = 16000
PATCH_FRAMES = 96
NUM_BANDS = 64
FMIN_HZ = 125.0
FMAX_HZ = 7500.0
LOG_OFFSET = 0.01
RESAMPLE_BETA = 8.0
RESAMPLE_ZERO_CROSSINGS = 32
PATCH_MAGIC = b"LMP1"


@dataclass(frozen=True)
class StftConfig:
    window_len: int = 400
    hop: int = 160
    fft_len: int = 512

    def __post_init__(self):
        if not 0 < self.hop <= self.window_len <= self.fft_len:
            raise ValidationError("need 0 < hop <= window_len <= fft_len")

    @property
    def num_bins(self):
        return self.fft_len // 2 + 1

    def samples_for(self, frames):
        return self.window_len + (frames - 1) * self.hop


PATCH_SAMPLES = StftConfig().samples_for(PATCH_FRAMES)


@dataclass(frozen=True)
class MelFilterbank:
    weights: np.ndarray  # (num_bands, fft_len // 2 + 1)
    band_edges_mel: np.ndarray  # (num_bands + 2,)

    def apply(self, magnitudes):
        return magnitudes @ self.weights.T


def hz_to_mel(f):
    return 2595.0 * np.log10(1.0 + np.asarray(f, dtype=np.float64) / 700.0)


def mel_to_hz(m):
    return 700.0 * (10.0 ** (np.asarray(m, dtype=np.float64) / 2595.0) - 1.0)


def periodic_hann(n):
    return 0.5 - 0.5 * np.cos(2.0 * np.pi * np.arange(n) / n)


def _resample_kernel(up, down):
    factor = max(up, down)
    half = RESAMPLE_ZERO_CROSSINGS * factor
    h = signal.firwin(2 * half + 1, 1.0 / factor, window=("kaiser", RESAMPLE_BETA))
    return h * up


def resample_to_16k(samples, sample_rate):
    """Polyphase windowed-sinc resampling to 16 kHz.

    Returns the samples unchanged (as a copy) when already at 16 kHz.
    """
    if int(sample_rate) != sample_rate or sample_rate <= 0:
        raise ValidationError(f"sample rate must be a positive integer, got {sample_rate}")
    x = np.asarray(samples, dtype=np.float64)
    if x.ndim != 1:
        raise ValidationError("resampler expects mono samples")
    if sample_rate == TARGET_RATE or x.size == 0:
        if sample_rate == TARGET_RATE:
            return x.copy()
        return np.zeros(0)
    ratio = Fraction(TARGET_RATE, int(sample_rate))
    up, down = ratio.numerator, ratio.denominator
    return signal.resample_poly(x, up, down, window=_resample_kernel(up, down))


def stft_magnitude(samples, cfg=StftConfig()):
    """Magnitudes of the non-negative frequency bins, one row per frame."""
    x = np.asarray(samples, dtype=np.float64)
    if x.ndim != 1 or x.size < cfg.window_len:
        raise ValidationError(f"need at least {cfg.window_len} mono samples, got {x.shape}")
    n_frames = 1 + (x.size - cfg.window_len) // cfg.hop
    frames = np.lib.stride_tricks.sliding_window_view(x, cfg.window_len)[:: cfg.hop][:n_frames]
    return np.abs(np.fft.rfft(frames * periodic_hann(cfg.window_len), n=cfg.fft_len, axis=1))


def build_mel_filterbank(num_bands=NUM_BANDS, fmin_hz=FMIN_HZ, fmax_hz=FMAX_HZ,
                         fft_len=512, rate=TARGET_RATE):
    if not 0 <= fmin_hz < fmax_hz <= rate / 2:
        raise ValidationError(f"need 0 <= fmin < fmax <= rate/2, got {fmin_hz}, {fmax_hz}")
    if num_bands < 1:
        raise ValidationError("num_bands must be positive")
    edges = np.linspace(hz_to_mel(fmin_hz), hz_to_mel(fmax_hz), num_bands + 2)
    bin_mel = hz_to_mel(np.arange(fft_len // 2 + 1) * rate / fft_len)
    lower, center, upper = edges[:-2, None], edges[1:-1, None], edges[2:, None]
    rising = (bin_mel - lower) / (center - lower)
    falling = (upper - bin_mel) / (upper - center)
    weights = np.maximum(0.0, np.minimum(rising, falling))
    return MelFilterbank(weights=weights, band_edges_mel=edges)


_DEFAULT_BANK = build_mel_filterbank()


def log_mel_patch(samples, sample_rate=TARGET_RATE):
    """96 x 64 log-mel patch for the trailing window of ``samples``."""
    x = resample_to_16k(samples, sample_rate)
    if x.size >= PATCH_SAMPLES:
        x = x[-PATCH_SAMPLES:]
    else:
        x = np.concatenate((np.zeros(PATCH_SAMPLES - x.size), x))
    mel = _DEFAULT_BANK.apply(stft_magnitude(x))
    return np.log(mel + LOG_OFFSET)


def read_wav(path):
    """Mono float samples in [-1, 1] and the sample rate of a PCM16/float32 WAV."""
    try:
        rate, data = wavfile.read(path)
    except (ValueError, EOFError, struct.error) as exc:
        raise FormatError(f"{path}: unreadable WAV ({exc})") from exc
    if data.dtype == np.int16:
        data = data.astype(np.float64) / 32768.0
    elif data.dtype == np.float32:
        data = data.astype(np.float64)
    else:
        raise ValidationError(f"{path}: unsupported sample encoding {data.dtype}")
    if data.ndim == 2:
        data = data.mean(axis=1)
    return data, rate


def write_wav(path, samples, rate, encoding="pcm16"):
    x = np.asarray(samples, dtype=np.float64)
    if encoding == "pcm16":
        data = np.clip(np.round(x * 32767.0), -32768, 32767).astype(np.int16)
    else:
        data = x.astype(np.float32)
    wavfile.write(path, rate, data)


def write_patch(patch, path):
    patch = np.asarray(patch)
    rows, cols = patch.shape
    with open(path, "wb") as fh:
        fh.write(PATCH_MAGIC + struct.pack("<II", rows, cols))
        fh.write(np.ascontiguousarray(patch, dtype="<f4").tobytes())


def read_patch(path):
    raw = Path(path).read_bytes()
    if raw[:4] != PATCH_MAGIC:
        raise FormatError(f"{path}: bad magic, expected {PATCH_MAGIC!r}")
    if len(raw) < 12:
        raise FormatError(f"{path}: truncated header")
    rows, cols = struct.unpack_from("<II", raw, 4)
    if len(raw) != 12 + 4 * rows * cols:
        raise FormatError(f"{path}: truncated payload")
    return np.frombuffer(raw, dtype="<f4", offset=12).reshape(rows, cols).copy()


class LogMelExtractor(BaseEstimator, TransformerMixin):
    """Stateless transformer mapping waveforms to log-mel patches.

    ``transform`` takes a sequence of 1-d waveforms, all at ``sample_rate``,
    and returns an array of shape ``(n, 96, 64)``.
    """

    def __init__(self, sample_rate=TARGET_RATE):
        self.sample_rate = sample_rate

    def fit(self, X=None, y=None):
        return self

    def transform(self, X):
        if len(X) == 0:
            return np.zeros((0, PATCH_FRAMES, NUM_BANDS))
        return np.stack([log_mel_patch(x, self.sample_rate) for x in X])
