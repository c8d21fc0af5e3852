"""Image loading and preprocessing.

Pixels are always stored on the 8-bit scale (0..255) so that images of any
bit depth can be compared directly; a ``bit_depth=b`` image only uses the
levels that are multiples of ``2**(8 - b)``.
"""
from __future__ import annotations

import re
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

SUPPORTED_BIT_DEPTHS = (2, 4, 8)
LUMA_WEIGHTS = (0.299, 0.587, 0.114)


class ImageFormatError(ValueError):
    """Raised when a file cannot be decoded as a supported image."""


class DimensionError(ValueError):
    """Raised when array extents are inconsistent with an operation."""


@dataclass(frozen=True)
class Image:
    """Grayscale image; ``pixels`` has shape ``(height, width)`` (row-major)."""

    pixels: np.ndarray
    bit_depth: int = 8
    source_size: tuple[int, int] | None = field(default=None, compare=False)
    source: str | None = field(default=None, compare=False)

    def __post_init__(self):
        px = np.asarray(self.pixels, dtype=np.float64)
        if px.ndim != 2 or px.size == 0:
            raise DimensionError(f"pixels must be a non-empty 2-D array, got shape {px.shape}")
        if self.bit_depth not in SUPPORTED_BIT_DEPTHS:
            raise ValueError(f"bit_depth must be one of {SUPPORTED_BIT_DEPTHS}")
        if not np.all(np.isfinite(px)) or px.min() < 0 or px.max() > 255:
            raise ValueError("pixel values must lie in [0, 255]")
        step = 2 ** (8 - self.bit_depth)
        if self.bit_depth < 8 and np.any(np.mod(px, step) != 0):
            raise ValueError(f"{self.bit_depth}-bit image has values off the level grid")
        px.setflags(write=False)
        object.__setattr__(self, "pixels", px)
        if self.source_size is None:
            object.__setattr__(self, "source_size", (px.shape[1], px.shape[0]))

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @property
    def shape(self) -> tuple[int, int]:
        return self.pixels.shape

    def __eq__(self, other):
        if not isinstance(other, Image):
            return NotImplemented
        return self.bit_depth == other.bit_depth and np.array_equal(self.pixels, other.pixels)

    __hash__ = None


def _round_half_away(x: np.ndarray) -> np.ndarray:
    return np.sign(x) * np.floor(np.abs(x) + 0.5)


# --- decoding ---------------------------------------------------------------

_PGM_TOKEN = re.compile(rb"#[^\n\r]*|\S+")


def _pgm_header(data: bytes) -> tuple[bytes, int, int, int, int]:
    """Parse magic, width, height and maxval; return them with the raster offset."""
    tokens = []
    pos = 0
    while len(tokens) < 4:
        m = _PGM_TOKEN.search(data, pos)
        if m is None:
            raise ImageFormatError("truncated PGM header")
        pos = m.end()
        if not m.group().startswith(b"#"):
            tokens.append(m.group())
    magic = tokens[0]
    try:
        width, height, maxval = (int(t) for t in tokens[1:])
    except ValueError as exc:
        raise ImageFormatError("malformed PGM header") from exc
    # exactly one whitespace byte separates the header from a binary raster
    return magic, width, height, maxval, pos + 1


def decode_pgm(data: bytes) -> np.ndarray:
    """Decode a P2 (ASCII) or P5 (binary) PGM with maxval <= 255 to a uint8 array."""
    magic, width, height, maxval, offset = _pgm_header(data)
    if magic not in (b"P2", b"P5"):
        raise ImageFormatError(f"not a PGM file (magic {magic!r})")
    if width <= 0 or height <= 0 or not 0 < maxval <= 255:
        raise ImageFormatError(f"unsupported PGM geometry {width}x{height} maxval {maxval}")
    n = width * height
    if magic == b"P5":
        raster = np.frombuffer(data, dtype=np.uint8, count=n, offset=offset) if len(data) - offset >= n else None
        if raster is None:
            raise ImageFormatError("truncated PGM raster")
        values = raster.astype(np.int64)
    else:
        body = re.sub(rb"#[^\n\r]*", b"", data[offset - 1:]).split()
        if len(body) < n:
            raise ImageFormatError("truncated PGM raster")
        values = np.array([int(t) for t in body[:n]], dtype=np.int64)
    if values.max(initial=0) > maxval:
        raise ImageFormatError("PGM sample exceeds maxval")
    if maxval != 255:
        values = _round_half_away(values * (255.0 / maxval)).astype(np.int64)
    return values.reshape(height, width).astype(np.uint8)


def load_image(path) -> Image:
    """Load a PGM, PNG or JPEG file as an 8-bit grayscale :class:`Image`."""
    path = Path(path)
    data = path.read_bytes()
    if data[:2] in (b"P2", b"P5"):
        return Image(decode_pgm(data), 8, source=str(path))

    from PIL import Image as PILImage, UnidentifiedImageError

    try:
        with PILImage.open(path) as im:
            im.load()
            if im.mode in ("L", "1"):
                arr = np.asarray(im.convert("L"), dtype=np.float64)
                return Image(arr, 8, source=str(path))
            rgb = np.asarray(im.convert("RGB"), dtype=np.float64)
    except UnidentifiedImageError as exc:
        raise ImageFormatError(f"unsupported image format: {path}") from exc
    img = grayscale_convert(rgb[..., 0], rgb[..., 1], rgb[..., 2])
    return Image(img.pixels, 8, source=str(path))


# --- pixel operations -------------------------------------------------------

def grayscale_convert(r, g, b) -> Image:
    """Rec. 601 luma, rounded half away from zero and clamped to [0, 255]."""
    r, g, b = (np.asarray(c, dtype=np.float64) for c in (r, g, b))
    if not (r.shape == g.shape == b.shape):
        raise DimensionError(f"channel shapes differ: {r.shape}, {g.shape}, {b.shape}")
    wr, wg, wb = LUMA_WEIGHTS
    luma = np.clip(_round_half_away(wr * r + wg * g + wb * b), 0, 255)
    return Image(np.atleast_2d(luma), 8)


def downsample(img: Image, factor: int) -> Image:
    """Box-filter reduction by an integer factor; partial edge blocks are dropped."""
    if int(factor) != factor or factor < 1:
        raise ValueError(f"factor must be a positive integer, got {factor}")
    factor = int(factor)
    if factor > img.width or factor > img.height:
        raise DimensionError(f"factor {factor} exceeds image size {img.width}x{img.height}")
    if factor == 1:
        return img
    h, w = img.height // factor, img.width // factor
    blocks = img.pixels[: h * factor, : w * factor].reshape(h, factor, w, factor)
    means = blocks.mean(axis=(1, 3))
    return Image(_round_half_away(means), 8, source_size=img.source_size, source=img.source)


def quantize(img: Image, target_bits: int) -> Image:
    """Uniform truncating quantizer: ``v -> floor(v / 2**(8-b)) * 2**(8-b)``."""
    if target_bits not in SUPPORTED_BIT_DEPTHS:
        raise ValueError(f"target_bits must be one of {SUPPORTED_BIT_DEPTHS}")
    if target_bits > img.bit_depth:
        raise ValueError(f"cannot quantize a {img.bit_depth}-bit image to {target_bits} bits")
    step = 2 ** (8 - target_bits)
    out = np.floor(img.pixels / step) * step
    return Image(out, target_bits, source_size=img.source_size, source=img.source)


def pad_to_even(img: Image) -> Image:
    """Replicate the last row and/or column once so both extents are even."""
    pad_rows = img.height % 2
    pad_cols = img.width % 2
    if not (pad_rows or pad_cols):
        return img
    out = np.pad(img.pixels, ((0, pad_rows), (0, pad_cols)), mode="edge")
    return Image(out, img.bit_depth, source_size=img.source_size, source=img.source)


def resolution_factor(width: int, height: int, lo: int = 80, hi: int = 200) -> int:
    """Integer reduction factor bringing the smaller extent into ``[lo, hi]``.

    Images whose smaller side is already <= ``hi`` are left alone (factor 1).
    Otherwise the largest factor that keeps the smaller side >= ``lo`` is used,
    so 640x480 sources reduce by 6 to 106x80.
    """
    small = min(width, height)
    if small <= hi:
        return 1
    candidates = [f for f in range(2, small + 1) if lo <= small // f <= hi]
    if not candidates:
        # no factor lands inside the band; get under hi as gently as possible
        return next(f for f in range(2, small + 1) if small // f <= hi)
    return max(candidates)


def preprocess(img: Image) -> Image:
    """Resolution policy followed by even padding."""
    factor = resolution_factor(img.width, img.height)
    return pad_to_even(downsample(img, factor))


def write_pgm(img: Image, path) -> None:
    """Write a binary (P5) PGM with maxval 255."""
    px = np.clip(_round_half_away(img.pixels), 0, 255).astype(np.uint8)
    header = f"P5\n{img.width} {img.height}\n255\n".encode("ascii")
    Path(path).write_bytes(header + px.tobytes())
