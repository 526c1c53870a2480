"""Frame-level visual descriptors.

Keyframes are sampled one per second of footage, then summarized by two
histogram channels: an 8x8x8 HSV color histogram and a 256-bin local
binary pattern texture histogram.  Per-video descriptor sequences are
stored in a little-endian binary format (magic ``FVDS``).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .binio import ByteReader, ByteWriter, FormatError

DESCRIPTOR_MAGIC = b"FVDS"
DESCRIPTOR_VERSION = 1

HSV_BINS_PER_AXIS = 8
HSV_DIM = HSV_BINS_PER_AXIS**3
LBP_DIM = 256


@dataclass(frozen=True)
class FrameImage:
    """One decoded frame: row-major RGB bytes."""

    width: int
    height: int
    pixels: bytes

    def __post_init__(self):
        expected = self.width * self.height * 3
        if len(self.pixels) != expected:
            raise ValueError(
                f"frame pixel buffer has {len(self.pixels)} bytes, "
                f"expected {expected} for {self.width}x{self.height} RGB"
            )

    def as_array(self) -> np.ndarray:
        return np.frombuffer(self.pixels, dtype=np.uint8).reshape(
            self.height, self.width, 3
        )


@dataclass
class DescriptorSequence:
    """Per-frame descriptor vectors for one video, in named channels.

    Channels are ordered; every channel must hold the same number of
    frame vectors.
    """

    channels: dict[str, np.ndarray]

    def __post_init__(self):
        counts = set()
        for name, array in self.channels.items():
            if array.ndim != 2:
                raise ValueError(f"channel {name!r}: expected a 2-D array")
            counts.add(array.shape[0])
        if len(counts) > 1:
            raise ValueError(f"channels disagree on frame count: {counts}")

    @property
    def frame_count(self) -> int:
        for array in self.channels.values():
            return array.shape[0]
        return 0

    def channel(self, name: str) -> np.ndarray:
        try:
            return self.channels[name]
        except KeyError:
            raise KeyError(f"no descriptor channel {name!r}") from None


def sample_keyframes(frames, fps: float) -> list:
    """Pick the first frame of each second from a frame stream.

    ``frames`` is any sequence; ``fps`` is the stream's frame rate.  For a
    stream of ``n`` frames the result has ``ceil(n / fps)`` entries.  With a
    fractional frame rate a second may start past the final frame, in which
    case the final frame stands in for it.
    """
    if fps <= 0:
        raise ValueError(f"fps must be positive, got {fps}")
    frames = list(frames)
    n = len(frames)
    if n == 0:
        return []
    seconds = math.ceil(n / fps - 1e-9)
    keyframes = []
    for s in range(seconds):
        index = math.ceil(s * fps - 1e-9)
        keyframes.append(frames[min(index, n - 1)])
    return keyframes


def _rgb_to_hsv_planes(rgb: np.ndarray):
    # Mirrors the classic colorsys formulas so scalar reference
    # implementations agree bin for bin.
    r = rgb[..., 0] / 255.0
    g = rgb[..., 1] / 255.0
    b = rgb[..., 2] / 255.0
    maxc = np.maximum(np.maximum(r, g), b)
    minc = np.minimum(np.minimum(r, g), b)
    v = maxc
    spread = maxc - minc
    gray = spread == 0
    safe_max = np.where(gray, 1.0, maxc)
    safe_spread = np.where(gray, 1.0, spread)
    s = np.where(gray, 0.0, spread / safe_max)
    rc = (maxc - r) / safe_spread
    gc = (maxc - g) / safe_spread
    bc = (maxc - b) / safe_spread
    h = np.where(
        r == maxc, bc - gc, np.where(g == maxc, 2.0 + rc - bc, 4.0 + gc - rc)
    )
    h = np.where(gray, 0.0, (h / 6.0) % 1.0)
    return h, s, v


def extract_hsv_histogram(frame: FrameImage) -> np.ndarray:
    """8x8x8 HSV color histogram, L1-normalized to sum 1.

    Bin index is ``h_bin * 64 + s_bin * 8 + v_bin`` with each axis split
    into 8 equal bins over [0, 1].
    """
    rgb = frame.as_array().reshape(-1, 3)
    if rgb.shape[0] == 0:
        raise ValueError("empty frame")
    h, s, v = _rgb_to_hsv_planes(rgb.astype(np.float64))
    edges = HSV_BINS_PER_AXIS
    hb = np.minimum((h * edges).astype(np.int64), edges - 1)
    sb = np.minimum((s * edges).astype(np.int64), edges - 1)
    vb = np.minimum((v * edges).astype(np.int64), edges - 1)
    flat = hb * edges * edges + sb * edges + vb
    hist = np.bincount(flat, minlength=HSV_DIM).astype(np.float64)
    return hist / hist.sum()


def _grayscale(rgb: np.ndarray) -> np.ndarray:
    luma = 0.299 * rgb[..., 0] + 0.587 * rgb[..., 1] + 0.114 * rgb[..., 2]
    return np.rint(luma).astype(np.int16)


# Neighbor offsets clockwise from top-left; bit i of the code is set when
# that neighbor is >= the center pixel.
_LBP_OFFSETS = (
    (-1, -1),
    (-1, 0),
    (-1, 1),
    (0, 1),
    (1, 1),
    (1, 0),
    (1, -1),
    (0, -1),
)


def extract_lbp(frame: FrameImage) -> np.ndarray:
    """256-bin local binary pattern histogram, L1-normalized.

    Codes are computed on integer luma over the 8-neighborhood; ties count
    as "at least as bright".  Border pixels have no full neighborhood and
    are skipped, so frames smaller than 3x3 are rejected.
    """
    if frame.width < 3 or frame.height < 3:
        raise ValueError(
            f"frame {frame.width}x{frame.height} too small for 3x3 neighborhoods"
        )
    gray = _grayscale(frame.as_array().astype(np.float64))
    center = gray[1:-1, 1:-1]
    codes = np.zeros(center.shape, dtype=np.int64)
    for bit, (dy, dx) in enumerate(_LBP_OFFSETS):
        neighbor = gray[1 + dy : gray.shape[0] - 1 + dy, 1 + dx : gray.shape[1] - 1 + dx]
        codes |= (neighbor >= center).astype(np.int64) << bit
    hist = np.bincount(codes.ravel(), minlength=LBP_DIM).astype(np.float64)
    return hist / hist.sum()


def describe_frames(frames: list) -> DescriptorSequence:
    """Run both extractors over keyframes, producing the two channels."""
    hsv = np.stack([extract_hsv_histogram(f) for f in frames])
    lbp = np.stack([extract_lbp(f) for f in frames])
    return DescriptorSequence(channels={"hsv": hsv, "lbp": lbp})


def save_descriptors(sequence: DescriptorSequence, path) -> None:
    """Write a descriptor sequence file (magic ``FVDS``, f32 payloads)."""
    writer = ByteWriter()
    writer.raw(DESCRIPTOR_MAGIC)
    writer.u16(DESCRIPTOR_VERSION)
    writer.u16(len(sequence.channels))
    for name, array in sequence.channels.items():
        writer.string16(name)
        writer.u32(array.shape[1])
        writer.u32(array.shape[0])
        writer.f32_array(array)
    with open(path, "wb") as handle:
        handle.write(writer.getvalue())


def load_descriptors(path) -> DescriptorSequence:
    with open(path, "rb") as handle:
        data = handle.read()
    reader = ByteReader(data, label=str(path))
    reader.magic(DESCRIPTOR_MAGIC)
    version = reader.u16()
    if version != DESCRIPTOR_VERSION:
        raise FormatError(f"{path}: unsupported version {version}")
    channel_count = reader.u16()
    channels: dict[str, np.ndarray] = {}
    for _ in range(channel_count):
        name = reader.string16()
        dim = reader.u32()
        count = reader.u32()
        if name in channels:
            raise FormatError(f"{path}: duplicate channel {name!r}")
        channels[name] = reader.f32_array(count * dim).reshape(count, dim)
    reader.expect_end()
    return DescriptorSequence(channels=channels)
