import numpy as np
import pytest

from kissdetect import image
from kissdetect.exceptions import FormatError, ValidationError
from kissdetect.image import (
    ChannelStats,
    CropParams,
    FramePreprocessor,
    apply_crop_resize,
    build_frame_stack,
    compute_channel_stats,
    eval_transform,
    sample_crop_params,
    standardize,
)
from kissdetect.rng import SplitMix64


def rand_img(h, w, seed=0):
    return np.random.default_rng(seed).random((3, h, w))


STATS = ChannelStats((0.4, 0.5, 0.6), (0.2, 0.25, 0.3))


def test_forced_full_crop():
    p = sample_crop_params(300, 300, SplitMix64(1), area=1.0, aspect=1.0)
    assert (p.x, p.y, p.w, p.h) == (0, 0, 300, 300)


def test_forced_quarter_crop():
    p = sample_crop_params(448, 448, SplitMix64(2), area=0.25, aspect=1.0)
    assert (p.w, p.h) == (224, 224)
    assert 0 <= p.x <= 224 and 0 <= p.y <= 224


def test_fallback_centred_square():
    p = sample_crop_params(1000, 10, SplitMix64(3))
    assert (p.x, p.y, p.w, p.h) == (0, 495, 10, 10)


def test_crop_statistics():
    rng = SplitMix64(2024)
    H = W = 2000
    areas, aspects, flips = [], [], 0
    for _ in range(10_000):
        p = sample_crop_params(H, W, rng)
        assert 0 <= p.x and p.x + p.w <= W and 0 <= p.y and p.y + p.h <= H
        areas.append(p.w * p.h / (H * W))
        aspects.append(p.w / p.h)
        flips += p.flip
    assert 0.08 * 0.99 <= min(areas) and max(areas) <= 1.0
    assert 0.74 <= min(aspects) and max(aspects) <= 1.36
    assert 0.47 <= flips / 10_000 <= 0.53


def test_crop_identity_and_constant():
    img = rand_img(224, 224)
    np.testing.assert_array_equal(apply_crop_resize(img, CropParams(0, 0, 224, 224)), img)
    const = np.full((3, 90, 130), 0.3)
    out = apply_crop_resize(const, CropParams(10, 5, 77, 61, True))
    assert out.shape == (3, 224, 224)
    np.testing.assert_allclose(out, 0.3, atol=1e-12)


def test_flip_is_mirror_and_involution():
    img = rand_img(120, 160)
    p = CropParams(7, 3, 100, 90)
    plain = apply_crop_resize(img, p)
    flipped = apply_crop_resize(img, CropParams(7, 3, 100, 90, True))
    np.testing.assert_array_equal(flipped, plain[:, :, ::-1])
    np.testing.assert_array_equal(flipped[:, :, ::-1], plain)


def test_crop_out_of_bounds():
    with pytest.raises(IndexError):
        apply_crop_resize(rand_img(50, 50), CropParams(30, 0, 30, 10))


def test_resize_upsample_interpolates_linearly():
    ramp = np.tile(np.linspace(0, 1, 8), (3, 4, 1))
    out = apply_crop_resize(ramp, CropParams(0, 0, 8, 4))
    assert np.all(np.diff(out[0, 0]) >= -1e-12)
    assert out.min() >= 0 and out.max() <= 1


def test_standardize():
    img = np.broadcast_to(np.array(STATS.mean)[:, None, None], (3, 5, 5))
    assert not standardize(img, STATS).any()
    x = rand_img(6, 6)
    np.testing.assert_array_equal(standardize(x, ChannelStats((0, 0, 0), (1, 1, 1))), x)
    plus = np.broadcast_to((np.array(STATS.mean) + np.array(STATS.std))[:, None, None], (3, 2, 2))
    np.testing.assert_allclose(standardize(plus, STATS), 1.0)
    z = standardize(x, STATS)
    back = z * np.array(STATS.std)[:, None, None] + np.array(STATS.mean)[:, None, None]
    np.testing.assert_allclose(back, x, atol=1e-6)
    with pytest.raises(ValidationError):
        ChannelStats((0, 0, 0), (1, 0, 1))


def test_channel_stats():
    with pytest.raises(ValidationError):
        compute_channel_stats([np.full((3, 4, 4), 0.5)])
    with pytest.raises(ValidationError):
        compute_channel_stats([])
    s = compute_channel_stats([np.zeros((3, 4, 4)), np.ones((3, 4, 4))])
    assert s.mean == (0.5, 0.5, 0.5) and s.std == (0.5, 0.5, 0.5)
    imgs = [rand_img(5, 7, k) for k in range(4)]
    a, b = compute_channel_stats(imgs), compute_channel_stats(imgs[::-1])
    np.testing.assert_allclose(a.mean, b.mean, rtol=1e-12)
    np.testing.assert_allclose(a.std, b.std, rtol=1e-12)


def history(n):
    return [np.full((3, 224, 224), k + 1.0) for k in range(n)]


@pytest.mark.parametrize("index", [0, 5, 14, 15, 30])
def test_frame_stack_padding(index):
    hist = history(31)
    stack, valid = build_frame_stack(hist, index)
    assert stack.shape == (16, 3, 224, 224)
    pad = max(0, 15 - index)
    assert valid == 16 - pad == min(index + 1, 16)
    assert not stack[:pad].any()
    for slot in range(pad, 16):
        assert np.all(stack[slot] == index - 15 + slot + 1.0)


def test_frame_stack_range():
    with pytest.raises(IndexError):
        build_frame_stack(history(3), 3)


def test_eval_transform_modes():
    mean_img = np.broadcast_to(np.array(STATS.mean)[:, None, None], (3, 224, 224))
    assert not eval_transform(mean_img, STATS).any()
    img = rand_img(300, 400, 9)
    a, b = eval_transform(img, STATS), eval_transform(img, STATS)
    assert a.shape == (3, 224, 224)
    np.testing.assert_array_equal(a, b)
    la = eval_transform(img, STATS, literal=True, rng=SplitMix64(4))
    lb = eval_transform(img, STATS, literal=True, rng=SplitMix64(4))
    np.testing.assert_array_equal(la, lb)


def test_img1_round_trip(tmp_path):
    img = rand_img(11, 13).astype(np.float32).astype(np.float64)
    image.write_image(img, tmp_path / "a.img")
    np.testing.assert_array_equal(image.read_image(tmp_path / "a.img"), img)
    (tmp_path / "bad").write_bytes(b"junkjunkjunk")
    with pytest.raises(FormatError):
        image.read_image(tmp_path / "bad")


def test_png_input(tmp_path):
    from PIL import Image

    arr = (np.random.default_rng(0).random((20, 30, 3)) * 255).astype(np.uint8)
    Image.fromarray(arr).save(tmp_path / "a.png")
    img = image.read_image(tmp_path / "a.png")
    assert img.shape == (3, 20, 30)
    np.testing.assert_allclose(img.transpose(1, 2, 0), arr / 255.0)


def test_frame_preprocessor():
    from sklearn.base import clone

    frames = [rand_img(240, 320, k) for k in range(3)]
    pre = FramePreprocessor(train=True, seed=11).fit(frames)
    out = pre.transform(frames)
    assert out.shape == (3, 3, 224, 224)
    np.testing.assert_array_equal(out, clone(pre).fit(frames).transform(frames))
    assert FramePreprocessor().fit(frames).transform(frames).shape == (3, 3, 224, 224)
