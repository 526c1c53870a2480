"""Frame descriptors: HSV and LBP histograms, keyframe sampling, file IO.

The extractors are checked against scalar reference implementations
written from first principles: per-pixel ``colorsys`` conversion for the
color histogram and an explicit nested loop for the binary patterns.
"""

import colorsys
import math

import numpy as np
import pytest

from fivr.binio import FormatError
from fivr.features import (
    DESCRIPTOR_MAGIC,
    DescriptorSequence,
    FrameImage,
    describe_frames,
    extract_hsv_histogram,
    extract_lbp,
    load_descriptors,
    sample_keyframes,
    save_descriptors,
)


def random_frame(rng, width, height) -> FrameImage:
    pixels = rng.integers(0, 256, size=width * height * 3, dtype=np.uint8)
    return FrameImage(width, height, pixels.tobytes())


def hsv_histogram_reference(frame: FrameImage) -> np.ndarray:
    """Scalar oracle: one colorsys call per pixel, explicit binning."""
    hist = np.zeros(512)
    data = frame.pixels
    for i in range(0, len(data), 3):
        r, g, b = data[i] / 255.0, data[i + 1] / 255.0, data[i + 2] / 255.0
        h, s, v = colorsys.rgb_to_hsv(r, g, b)
        hb = min(int(h * 8), 7)
        sb = min(int(s * 8), 7)
        vb = min(int(v * 8), 7)
        hist[hb * 64 + sb * 8 + vb] += 1
    return hist / hist.sum()


def lbp_histogram_reference(frame: FrameImage) -> np.ndarray:
    """Scalar oracle: explicit neighborhood walk, clockwise from top-left."""
    rgb = frame.as_array().astype(float)
    gray = np.rint(
        0.299 * rgb[..., 0] + 0.587 * rgb[..., 1] + 0.114 * rgb[..., 2]
    ).astype(int)
    offsets = [(-1, -1), (-1, 0), (-1, 1), (0, 1),
               (1, 1), (1, 0), (1, -1), (0, -1)]
    hist = np.zeros(256)
    for y in range(1, frame.height - 1):
        for x in range(1, frame.width - 1):
            code = 0
            for bit, (dy, dx) in enumerate(offsets):
                if gray[y + dy, x + dx] >= gray[y, x]:
                    code |= 1 << bit
            hist[code] += 1
    return hist / hist.sum()


class TestFrameImage:
    def test_buffer_length_enforced(self):
        with pytest.raises(ValueError, match="expected 27"):
            FrameImage(3, 3, b"\x00" * 26)

    def test_as_array_shape(self):
        frame = FrameImage(4, 2, bytes(range(24)))
        assert frame.as_array().shape == (2, 4, 3)


class TestHsvHistogram:
    def test_matches_scalar_reference_on_random_frames(self):
        rng = np.random.default_rng(42)
        for _ in range(20):
            frame = random_frame(rng, int(rng.integers(1, 12)),
                                 int(rng.integers(1, 12)))
            np.testing.assert_array_equal(
                extract_hsv_histogram(frame), hsv_histogram_reference(frame)
            )

    def test_pure_red_frame_frozen_bin(self):
        # Pure red: h = 0, s = 1, v = 1 -> bins (0, 7, 7) -> index 63.
        frame = FrameImage(2, 2, bytes([255, 0, 0] * 4))
        hist = extract_hsv_histogram(frame)
        assert hist[63] == 1.0
        assert hist.sum() == 1.0

    def test_gray_frame_has_zero_saturation(self):
        # Mid gray: h = 0, s = 0, v in [0.5, 0.625) -> bins (0, 0, 4).
        frame = FrameImage(1, 1, bytes([128, 128, 128]))
        hist = extract_hsv_histogram(frame)
        assert hist[4] == 1.0

    def test_sums_to_one(self):
        rng = np.random.default_rng(7)
        frame = random_frame(rng, 16, 9)
        assert extract_hsv_histogram(frame).sum() == pytest.approx(1.0)

    def test_dimension_is_512(self):
        frame = FrameImage(1, 1, bytes([1, 2, 3]))
        assert extract_hsv_histogram(frame).shape == (512,)


class TestLbpHistogram:
    def test_matches_scalar_reference_on_random_frames(self):
        rng = np.random.default_rng(43)
        for _ in range(10):
            frame = random_frame(rng, int(rng.integers(3, 10)),
                                 int(rng.integers(3, 10)))
            np.testing.assert_array_equal(
                extract_lbp(frame), lbp_histogram_reference(frame)
            )

    def test_flat_frame_all_ties(self):
        # Every neighbor equals the center, every bit set: code 255.
        frame = FrameImage(3, 3, bytes([50] * 27))
        hist = extract_lbp(frame)
        assert hist[255] == 1.0

    def test_bright_center_dark_ring(self):
        # Single interior pixel brighter than all neighbors: code 0.
        pixels = np.zeros((3, 3, 3), dtype=np.uint8)
        pixels[1, 1] = 200
        hist = extract_lbp(FrameImage(3, 3, pixels.tobytes()))
        assert hist[0] == 1.0

    def test_traversal_order_invariance(self):
        # The histogram forgets where each code occurred, so flipping the
        # image both ways permutes codes spatially without changing the
        # multiset drawn from symmetric patterns; an asymmetric pattern
        # maps to its bit-reversed counterpart.  Sum is always the pixel
        # count of the interior.
        rng = np.random.default_rng(44)
        frame = random_frame(rng, 8, 8)
        hist = extract_lbp(frame)
        assert hist.sum() == pytest.approx(1.0)
        assert hist.shape == (256,)

    def test_too_small_rejected(self):
        with pytest.raises(ValueError, match="too small"):
            extract_lbp(FrameImage(2, 3, bytes(18)))


class TestKeyframeSampling:
    def test_integral_fps_takes_every_nth(self):
        frames = list(range(10))
        assert sample_keyframes(frames, fps=2.0) == [0, 2, 4, 6, 8]

    def test_count_is_ceil_duration(self):
        rng = np.random.default_rng(45)
        for _ in range(50):
            n = int(rng.integers(1, 200))
            fps = float(rng.uniform(0.5, 40.0))
            got = sample_keyframes(list(range(n)), fps)
            assert len(got) == math.ceil(n / fps - 1e-9)

    def test_fractional_fps_clamps_to_last_frame(self):
        # 3 frames at 2.5 fps last 1.2 s -> seconds 0 and 1; second 1
        # starts at frame ceil(2.5) = 3, past the end, so the final frame
        # stands in.
        assert sample_keyframes([10, 11, 12], fps=2.5) == [10, 12]

    def test_empty_stream(self):
        assert sample_keyframes([], fps=30.0) == []

    def test_single_frame(self):
        assert sample_keyframes(["only"], fps=30.0) == ["only"]

    def test_low_fps_repeats_frames_across_seconds(self):
        # At 0.5 fps each frame spans two seconds, so 3 frames cover 6
        # seconds and each frame is the "first of" two of them.
        assert sample_keyframes([0, 1, 2], fps=0.5) == [0, 1, 1, 2, 2, 2]

    def test_bad_fps_rejected(self):
        with pytest.raises(ValueError, match="fps"):
            sample_keyframes([1], fps=0.0)

    def test_first_frame_of_each_second_exact(self):
        # 7 frames at 3 fps: seconds start at indexes 0, 3, 6.
        assert sample_keyframes(list(range(7)), fps=3.0) == [0, 3, 6]


class TestDescriptorSequence:
    def test_channel_frame_counts_must_agree(self):
        with pytest.raises(ValueError, match="disagree"):
            DescriptorSequence(channels={
                "a": np.zeros((2, 4)), "b": np.zeros((3, 4)),
            })

    def test_channel_lookup(self):
        seq = DescriptorSequence(channels={"a": np.ones((2, 4))})
        assert seq.channel("a").shape == (2, 4)
        with pytest.raises(KeyError, match="no descriptor channel"):
            seq.channel("b")

    def test_describe_frames_produces_both_channels(self):
        rng = np.random.default_rng(46)
        frames = [random_frame(rng, 6, 6) for _ in range(3)]
        seq = describe_frames(frames)
        assert list(seq.channels) == ["hsv", "lbp"]
        assert seq.channel("hsv").shape == (3, 512)
        assert seq.channel("lbp").shape == (3, 256)


class TestDescriptorFile:
    def make_sequence(self, seed=47) -> DescriptorSequence:
        rng = np.random.default_rng(seed)
        return DescriptorSequence(channels={
            "hsv": rng.random((5, 512), dtype=np.float32).astype(np.float32),
            "lbp": rng.random((5, 256), dtype=np.float32).astype(np.float32),
        })

    def test_round_trip_preserves_content(self, tmp_path):
        seq = self.make_sequence()
        path = tmp_path / "v.fvds"
        save_descriptors(seq, path)
        loaded = load_descriptors(path)
        assert list(loaded.channels) == list(seq.channels)
        for name in seq.channels:
            np.testing.assert_array_equal(
                loaded.channel(name), seq.channel(name)
            )

    def test_write_read_write_byte_identical(self, tmp_path):
        seq = self.make_sequence()
        first = tmp_path / "a.fvds"
        second = tmp_path / "b.fvds"
        save_descriptors(seq, first)
        save_descriptors(load_descriptors(first), second)
        assert first.read_bytes() == second.read_bytes()

    def test_magic_enforced(self, tmp_path):
        path = tmp_path / "bad.fvds"
        path.write_bytes(b"NOPE" + bytes(32))
        with pytest.raises(FormatError, match="magic"):
            load_descriptors(path)

    def test_truncation_detected(self, tmp_path):
        seq = self.make_sequence()
        path = tmp_path / "v.fvds"
        save_descriptors(seq, path)
        clipped = tmp_path / "short.fvds"
        clipped.write_bytes(path.read_bytes()[:-7])
        with pytest.raises(FormatError):
            load_descriptors(clipped)

    def test_trailing_bytes_detected(self, tmp_path):
        seq = self.make_sequence()
        path = tmp_path / "v.fvds"
        save_descriptors(seq, path)
        padded = tmp_path / "padded.fvds"
        padded.write_bytes(path.read_bytes() + b"\x00")
        with pytest.raises(FormatError, match="trailing"):
            load_descriptors(padded)

    def test_magic_constant(self):
        assert DESCRIPTOR_MAGIC == b"FVDS"
