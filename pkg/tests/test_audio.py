import math

import numpy as np
import pytest

from kissdetect import audio
from kissdetect.audio import (
    LOG_OFFSET,
    LogMelExtractor,
    StftConfig,
    build_mel_filterbank,
    hz_to_mel,
    log_mel_patch,
    resample_to_16k,
    stft_magnitude,
)
from kissdetect.exceptions import FormatError, ValidationError


def tone(freq, rate=16000, seconds=1.0, amp=1.0, delay=0):
    t = np.arange(int(rate * seconds)) / rate
    x = amp * np.sin(2 * np.pi * freq * t)
    if delay:
        x = np.concatenate((np.zeros(delay), x[:-delay]))
    return x


def scalar_mel(f):
    return 2595.0 * math.log10(1.0 + f / 700.0)


def scalar_band_weights(f_hz, num_bands=64, lo=125.0, hi=7500.0):
    """Triangle weights of every band at one frequency, computed one scalar at a time."""
    m_lo, m_hi = scalar_mel(lo), scalar_mel(hi)
    step = (m_hi - m_lo) / (num_bands + 1)
    m = scalar_mel(f_hz)
    weights = []
    for k in range(num_bands):
        left, centre, right = m_lo + k * step, m_lo + (k + 1) * step, m_lo + (k + 2) * step
        if left < m <= centre:
            weights.append((m - left) / (centre - left))
        elif centre < m < right:
            weights.append((right - m) / (right - centre))
        else:
            weights.append(0.0)
    return weights


def naive_dft_magnitudes(frame, n_fft):
    padded = list(frame) + [0.0] * (n_fft - len(frame))
    out = []
    for k in range(n_fft // 2 + 1):
        re = sum(v * math.cos(2 * math.pi * k * i / n_fft) for i, v in enumerate(padded))
        im = sum(v * math.sin(2 * math.pi * k * i / n_fft) for i, v in enumerate(padded))
        out.append(math.hypot(re, im))
    return np.array(out)


def predicted_band(f):
    step = (scalar_mel(7500.0) - scalar_mel(125.0)) / 65
    return int((scalar_mel(f) - scalar_mel(125.0)) // step)


# --- resampling -------------------------------------------------------------

def test_resample_identity_at_16k():
    x = np.random.default_rng(0).uniform(-1, 1, 5000)
    y = resample_to_16k(x, 16000)
    assert y is not x
    assert np.array_equal(y, x)


def test_resample_silence_48k():
    y = resample_to_16k(np.zeros(48000), 48000)
    assert y.shape == (16000,)
    assert not y.any()


def test_resample_empty_and_invalid():
    assert resample_to_16k(np.zeros(0), 44100).size == 0
    with pytest.raises(ValidationError):
        resample_to_16k(np.zeros(10), 0)
    with pytest.raises(ValidationError):
        resample_to_16k(np.zeros(10), -8000)


@pytest.mark.parametrize("rate", [48000, 44100, 22050, 8000])
def test_resample_preserves_tone_frequency(rate):
    y = resample_to_16k(tone(1000, rate=rate), rate)
    assert abs(y.size - 16000) <= 1
    peaks = stft_magnitude(y).argmax(axis=1)
    assert np.all(np.abs(peaks - 32) <= 1)


# --- STFT -------------------------------------------------------------------

def test_stft_frame_count():
    assert stft_magnitude(np.zeros(15600)).shape == (96, 257)
    assert stft_magnitude(np.zeros(400)).shape == (1, 257)
    assert stft_magnitude(np.zeros(559)).shape == (1, 257)
    assert stft_magnitude(np.zeros(560)).shape == (2, 257)


def test_stft_silence_is_zero():
    assert not stft_magnitude(np.zeros(2000)).any()


def test_stft_too_short():
    with pytest.raises(ValidationError):
        stft_magnitude(np.zeros(399))


def test_stft_tone_bin_exact():
    assert np.all(stft_magnitude(tone(1000)).argmax(axis=1) == 32)


def test_stft_matches_naive_dft():
    rng = np.random.default_rng(5)
    x = rng.uniform(-1, 1, 720)
    cfg = StftConfig()
    window = [0.5 - 0.5 * math.cos(2 * math.pi * i / 400) for i in range(400)]
    got = stft_magnitude(x, cfg)
    assert got.shape == (3, 257)
    for f in (0, 2):
        frame = [x[f * 160 + i] * window[i] for i in range(400)]
        np.testing.assert_allclose(got[f], naive_dft_magnitudes(frame, 512), atol=1e-9)


# --- mel filterbank ---------------------------------------------------------

def test_mel_edge_values():
    bank = build_mel_filterbank()
    edges = bank.band_edges_mel
    assert edges.shape == (66,)
    assert edges[0] == pytest.approx(185.17, abs=0.01)
    assert edges[-1] == pytest.approx(2773.32, abs=0.01)
    assert np.diff(edges) == pytest.approx(np.full(65, 39.82), abs=0.01)
    assert np.all(np.diff(edges) > 0)
    assert hz_to_mel(1000.0) == pytest.approx(1000.0, abs=0.05)


def test_filterbank_rows():
    W = build_mel_filterbank().weights
    assert W.shape == (64, 257)
    assert np.all(W >= 0) and np.all(W.max(axis=1) <= 1.0)
    for row in W:
        nz = np.flatnonzero(row)
        assert nz.size >= 1
        assert np.array_equal(nz, np.arange(nz[0], nz[-1] + 1))


def test_filterbank_matches_scalar_triangles():
    W = build_mel_filterbank().weights
    for k_bin in (4, 32, 100, 239):
        expected = scalar_band_weights(k_bin * 16000 / 512)
        np.testing.assert_allclose(W[:, k_bin], expected, atol=1e-12)


def test_filterbank_invalid_range():
    with pytest.raises(ValidationError):
        build_mel_filterbank(fmin_hz=8000, fmax_hz=7500)
    with pytest.raises(ValidationError):
        build_mel_filterbank(fmax_hz=9000)


def test_tone_band_from_scalar_oracle():
    # the 1 kHz bin sits between the centres of bands 19 and 20, nearer 19's
    weights = scalar_band_weights(1000.0)
    oracle_band = int(np.argmax(weights))
    assert oracle_band == 19
    assert predicted_band(1000.0) == 20
    mel = build_mel_filterbank().apply(stft_magnitude(tone(1000)))
    assert np.all(mel.argmax(axis=1) == oracle_band)


# --- patches ----------------------------------------------------------------

@pytest.mark.parametrize("n, rate", [(0, 16000), (100, 16000), (15600, 16000), (40000, 16000),
                                     (48000, 48000), (3000, 44100)])
def test_patch_shape(n, rate):
    x = np.random.default_rng(n).uniform(-1, 1, n)
    assert log_mel_patch(x, rate).shape == (96, 64)


def test_patch_silence():
    p = log_mel_patch(np.zeros(16000))
    assert np.all(p == np.log(LOG_OFFSET))
    assert p[0, 0] == pytest.approx(-4.6052, abs=1e-4)


def test_patch_lower_bound_and_monotone():
    x = np.random.default_rng(1).uniform(-0.4, 0.4, 16000)
    p1, p2 = log_mel_patch(x), log_mel_patch(2.0 * x)
    assert np.all(p1 >= np.log(LOG_OFFSET))
    assert np.all(p2 >= p1)


@pytest.mark.parametrize("freq", [500, 1000, 2000, 4000])
def test_tone_localization(freq):
    p = log_mel_patch(tone(freq))
    band = predicted_band(freq)
    assert np.all(np.abs(p.argmax(axis=1) - band) <= 1)
    mel = np.exp(p) - LOG_OFFSET
    near = mel[:, max(band - 1, 0):band + 2].sum(axis=1) / mel.sum(axis=1)
    assert near.min() >= 0.7


def test_patch_uses_trailing_window():
    x = tone(1000)
    x[:400] = 0.0  # only the leading 25 ms is outside the trailing 15600 samples
    np.testing.assert_array_equal(log_mel_patch(x), log_mel_patch(tone(1000)))


def test_time_shift_by_one_hop():
    onset = 8000
    a = np.zeros(16000)
    a[onset:] = tone(1000, seconds=0.5)
    b = np.zeros(16000)
    b[onset + 160:] = tone(1000, seconds=0.5)[: 8000 - 160]
    pa, pb = log_mel_patch(a), log_mel_patch(b)
    # interior rows move one frame later; rows near the tail still see the same tone prefix
    first = (16000 - 15600 + onset) // 160 - 3
    np.testing.assert_allclose(pb[first + 1:90], pa[first:89], atol=1e-9)


def test_patch_file_round_trip(tmp_path):
    patch = log_mel_patch(tone(700)).astype(np.float32)
    audio.write_patch(patch, tmp_path / "p.lmp")
    raw = (tmp_path / "p.lmp").read_bytes()
    assert raw[:4] == b"LMP1" and len(raw) == 12 + 96 * 64 * 4
    back = audio.read_patch(tmp_path / "p.lmp")
    assert back.dtype == np.float32
    assert back.tobytes() == patch.tobytes()


def test_patch_file_bad_magic(tmp_path):
    (tmp_path / "x").write_bytes(b"NOPE" + bytes(8))
    with pytest.raises(FormatError):
        audio.read_patch(tmp_path / "x")


def test_wav_round_trip_stereo_and_float(tmp_path):
    x = tone(440, seconds=0.2) * 0.5
    audio.write_wav(tmp_path / "f.wav", x, 16000, encoding="float32")
    y, rate = audio.read_wav(tmp_path / "f.wav")
    assert rate == 16000
    np.testing.assert_allclose(y, x, atol=1e-7)
    from scipy.io import wavfile

    stereo = np.stack([x, -x], axis=1).astype(np.float32)
    wavfile.write(tmp_path / "s.wav", 16000, stereo)
    y, _ = audio.read_wav(tmp_path / "s.wav")
    assert np.allclose(y, 0.0)


def test_wav_unsupported_and_truncated(tmp_path):
    from scipy.io import wavfile

    wavfile.write(tmp_path / "u8.wav", 8000, np.full(100, 128, dtype=np.uint8))
    with pytest.raises(ValidationError):
        audio.read_wav(tmp_path / "u8.wav")
    (tmp_path / "t.wav").write_bytes(b"RIFF\x10\x00\x00\x00WAVEfm")
    with pytest.raises(FormatError):
        audio.read_wav(tmp_path / "t.wav")


def test_extractor_estimator():
    ext = LogMelExtractor(sample_rate=16000)
    out = ext.fit_transform([np.zeros(16000), tone(1000)])
    assert out.shape == (2, 96, 64)
    assert ext.transform([]).shape == (0, 96, 64)
    assert ext.get_params() == {"sample_rate": 16000}
