"""Fast discrete curvelet transform via wrapping.

Layout conventions
------------------
* Image arrays are ``(rows, cols)``; frequency index ``k1`` runs along rows and
  ``k2`` along columns, both centered so that ``-n/2 <= k < n/2`` (DC in the
  middle of the grid, as produced by ``fftshift``).
* Scales are numbered from 1 (coarse, low-pass) to ``num_scales`` (finest,
  isotropic).  Intermediate scales carry oriented wedges numbered by
  increasing angle ``l``.
* All FFTs are unitary, and the squared windows sum to one, so the transform
  is a Parseval tight frame and :func:`fdct_inverse` is its exact adjoint and
  inverse.

Each window is supported on a wedge of the frequency grid.  The windowed
Fourier samples are wrapped (indices reduced modulo a rectangle ``L1 x L2``)
into a small array before the inverse FFT.  The rectangle is derived from the
wedge support so that no two support samples collide modulo ``(L1, L2)``,
which keeps wrapping an isometry.
"""
from __future__ import annotations

import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .imaging import DimensionError, Image

DEFAULT_NUM_SCALES = 4
DEFAULT_ANGLES_COARSE = 8
# half-width of an angular transition, as a fraction of the wedge width
ANGULAR_OVERLAP = 1.0 / 3.0


# --- window primitives ------------------------------------------------------

def meyer_nu(t):
    """Meyer's polynomial ramp: 0 below 0, 1 above 1, and nu(t) + nu(1-t) = 1."""
    t = np.clip(t, 0.0, 1.0)
    return t**4 * (35 - 84 * t + 70 * t**2 - 20 * t**3)


def _ramp_pair(t):
    """(rising, falling) halves of a smooth transition with rising**2 + falling**2 = 1."""
    t = np.asarray(t, dtype=np.float64)
    angle = 0.5 * np.pi * meyer_nu(t)
    rising = np.where(t <= 0, 0.0, np.where(t >= 1, 1.0, np.sin(angle)))
    falling = np.where(t <= 0, 1.0, np.where(t >= 1, 0.0, np.cos(angle)))
    return rising, falling


def lowpass_1d(k, flat: float):
    """1 for ``|k| <= flat``, smooth decay to exactly 0 at ``|k| = 2*flat``."""
    t = (np.abs(np.asarray(k, dtype=np.float64)) - flat) / flat
    return _ramp_pair(t)[1]


def pseudo_angle(u, v):
    """Continuous angular coordinate in [0, 4) built from equispaced slopes.

    Each unit interval covers one cone bounded by the diagonals ``|u| = |v|``;
    within a cone the coordinate is affine in the slope, so wedges of equal
    width in this coordinate have equispaced slopes.  ``tau -> tau + 2``
    corresponds to ``(u, v) -> (-u, -v)``.
    """
    u = np.asarray(u, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    tau = np.zeros(np.broadcast(u, v).shape)
    with np.errstate(divide="ignore", invalid="ignore"):
        in_uv = (np.abs(v) <= np.abs(u)) & (u != 0)
        in_vu = np.abs(v) > np.abs(u)
        tau = np.where(in_uv, np.where(u > 0, 0.0, 2.0) + 0.5 * (1 + v / u), tau)
        tau = np.where(in_vu, np.where(v > 0, 1.0, 3.0) + 0.5 * (1 - u / v), tau)
    return np.mod(tau, 4.0)


def _boundary_coordinate(tau, boundary: int, count: int, overlap: float):
    """Transition coordinate across wedge boundary ``boundary``: 0 -> 1 over its overlap zone."""
    width = 4.0 / count
    half = overlap * width
    offset = 2.0 - np.mod(2.0 - (np.asarray(tau) - (boundary % count) * width), 4.0)
    return (offset + half) / (2 * half)


def angular_window(tau, index: int, count: int, overlap: float = ANGULAR_OVERLAP):
    """Window of wedge ``index`` among ``count`` wedges on the periodic coordinate.

    Neighbouring wedges evaluate the same transition coordinate at their shared
    boundary, so their squared windows sum to one there up to rounding.
    """
    rising, _ = _ramp_pair(_boundary_coordinate(tau, index, count, overlap))
    _, falling = _ramp_pair(_boundary_coordinate(tau, index + 1, count, overlap))
    return rising * falling


def num_angles(scale: int, num_scales: int, angles_coarse: int) -> int:
    """Band count at ``scale`` (1-based): 1 at both ends, doubling every second scale."""
    if scale == 1 or scale == num_scales:
        return 1
    return angles_coarse * 2 ** ((scale - 1) // 2)


# --- window family ----------------------------------------------------------

@dataclass(frozen=True, eq=False)
class Wedge:
    """Sparse description of one window and its wrapping rectangle."""

    scale: int
    angle: int
    shape: tuple[int, int]
    flat_index: np.ndarray  # into the centered n1*n2 frequency grid
    weights: np.ndarray
    wrap_index: np.ndarray  # into the L1*L2 wrapped rectangle


@dataclass(frozen=True, eq=False)
class WindowFamily:
    height: int
    width: int
    num_scales: int
    angles_coarse: int
    bands: tuple[tuple[Wedge, ...], ...] = field(repr=False)

    @property
    def shape(self) -> tuple[int, int]:
        return (self.height, self.width)

    @property
    def band_counts(self) -> list[int]:
        return [len(b) for b in self.bands]

    def wedge(self, scale: int, angle: int) -> Wedge:
        return self.bands[scale - 1][angle]

    def window(self, scale: int, angle: int) -> np.ndarray:
        """Dense window on the centered frequency grid."""
        w = self.wedge(scale, angle)
        out = np.zeros(self.height * self.width)
        out[w.flat_index] = w.weights
        return out.reshape(self.shape)

    def partition_sum(self) -> np.ndarray:
        """Sum of squared windows over every (scale, angle); identically 1 for a tight frame."""
        total = np.zeros(self.height * self.width)
        for band in self.bands:
            for w in band:
                total[w.flat_index] += w.weights**2
        return total.reshape(self.shape)

    def coefficient_count(self) -> int:
        return sum(w.shape[0] * w.shape[1] for band in self.bands for w in band)


def _line_spans(mask: np.ndarray) -> int:
    """Largest (last - first + 1) over the rows of ``mask`` that have any support."""
    rows = mask.any(axis=1)
    if not rows.any():
        return 0
    m = mask[rows]
    first = np.argmax(m, axis=1)
    last = m.shape[1] - 1 - np.argmax(m[:, ::-1], axis=1)
    return int(np.max(last - first + 1))


def _wrap_shape(mask: np.ndarray) -> tuple[int, int]:
    """Rectangle onto which the support of ``mask`` wraps without collisions.

    Along the "radial" axis the rectangle spans the full support; along the
    other axis it spans the widest single line.  Two support points that are
    congruent modulo the rectangle then coincide, whichever axis is chosen as
    radial, so the smaller of the two candidates is used.
    """
    rows = np.flatnonzero(mask.any(axis=1))
    cols = np.flatnonzero(mask.any(axis=0))
    by_rows = (int(rows[-1] - rows[0] + 1), _line_spans(mask))
    by_cols = (_line_spans(mask.T), int(cols[-1] - cols[0] + 1))
    if by_cols[0] * by_cols[1] < by_rows[0] * by_rows[1]:
        return by_cols
    return by_rows


def _make_wedge(scale, angle, window, k1, k2) -> Wedge:
    mask = window > 0
    shape = _wrap_shape(mask)
    flat = np.flatnonzero(mask)
    r = np.mod(k1.ravel()[flat], shape[0])
    c = np.mod(k2.ravel()[flat], shape[1])
    return Wedge(
        scale=scale,
        angle=angle,
        shape=shape,
        flat_index=flat,
        weights=window.ravel()[flat].copy(),
        wrap_index=r * shape[1] + c,
    )


def build_windows(width: int, height: int, num_scales: int = DEFAULT_NUM_SCALES,
                  angles_coarse: int = DEFAULT_ANGLES_COARSE) -> WindowFamily:
    """Construct the curvelet window family for a ``height x width`` image.

    Radial windows are differences of nested separable low-pass windows whose
    flat half-widths are ``n/4, n/8, ...`` per axis (finest boundary first), so
    their squares telescope to one.  Angular windows split each oriented scale
    into ``num_angles`` wedges with equispaced slopes.
    """
    if width % 2 or height % 2:
        raise DimensionError(f"image extents must be even, got {width}x{height}")
    if num_scales < 2:
        raise ValueError("num_scales must be at least 2")
    if angles_coarse % 4 or angles_coarse < 8:
        raise ValueError(f"angles_coarse must be a multiple of 4 and >= 8, got {angles_coarse}")
    coarse_flat = min(width, height) / 4 / 2 ** (num_scales - 2)
    if coarse_flat < 1:
        raise DimensionError(f"{width}x{height} is too small for {num_scales} scales")

    k1 = np.arange(-height // 2, height // 2)[:, None] * np.ones((1, width), dtype=np.int64)
    k2 = np.ones((height, 1), dtype=np.int64) * np.arange(-width // 2, width // 2)[None, :]

    # nested low-pass windows, boundary j separates scale j from scale j + 1
    lowpass_sq = []
    for j in range(1, num_scales):
        shrink = 2 ** (num_scales - 1 - j)
        phi = lowpass_1d(k1, height / 4 / shrink) * lowpass_1d(k2, width / 4 / shrink)
        lowpass_sq.append(phi**2)
    radial_sq = [lowpass_sq[0]]
    radial_sq += [hi - lo for lo, hi in zip(lowpass_sq[:-1], lowpass_sq[1:])]
    radial_sq.append(1.0 - lowpass_sq[-1])
    radial = [np.sqrt(np.clip(r, 0.0, None)) for r in radial_sq]

    tau = pseudo_angle(k1 / height, k2 / width)
    bands = []
    for j in range(1, num_scales + 1):
        count = num_angles(j, num_scales, angles_coarse)
        if count == 1:
            bands.append((_make_wedge(j, 0, radial[j - 1], k1, k2),))
            continue
        support = radial[j - 1] > 0
        wedges = []
        for l in range(count):
            win = np.zeros_like(radial[j - 1])
            win[support] = radial[j - 1][support] * angular_window(tau[support], l, count)
            wedges.append(_make_wedge(j, l, win, k1, k2))
        bands.append(tuple(wedges))
    return WindowFamily(height, width, num_scales, angles_coarse, tuple(bands))


# --- coefficients -----------------------------------------------------------

@dataclass
class ScaleBand:
    scale_index: int
    bands: list[np.ndarray]


@dataclass
class CurveletDecomposition:
    scales: list[ScaleBand]
    source_height: int
    source_width: int

    @property
    def band_counts(self) -> list[int]:
        return [len(s.bands) for s in self.scales]

    @property
    def num_scales(self) -> int:
        return len(self.scales)

    def band(self, scale: int, angle: int) -> np.ndarray:
        return self.scales[scale - 1].bands[angle]

    def coefficient_count(self) -> int:
        return sum(b.size for s in self.scales for b in s.bands)

    def energy(self) -> float:
        return float(sum(np.vdot(b, b).real for s in self.scales for b in s.bands))

    def map(self, fn) -> "CurveletDecomposition":
        """New decomposition with ``fn`` applied to every band."""
        return CurveletDecomposition(
            [ScaleBand(s.scale_index, [fn(b) for b in s.bands]) for s in self.scales],
            self.source_height, self.source_width)


def _as_array(img) -> np.ndarray:
    if isinstance(img, Image):
        return img.pixels
    arr = np.asarray(img)
    if arr.ndim != 2:
        raise DimensionError(f"expected a 2-D array, got shape {arr.shape}")
    return arr


def fdct_forward(img, windows: WindowFamily) -> CurveletDecomposition:
    """Curvelet coefficients of an image (``Image`` or 2-D array)."""
    x = _as_array(img)
    if x.shape != windows.shape:
        raise DimensionError(f"image shape {x.shape} does not match windows {windows.shape}")
    if not np.all(np.isfinite(x)):
        raise ValueError("image contains non-finite values")
    fhat = np.fft.fftshift(np.fft.fft2(x, norm="ortho")).ravel()
    scales = []
    for band in windows.bands:
        grids = []
        for w in band:
            buf = np.zeros(w.shape[0] * w.shape[1], dtype=np.complex128)
            buf[w.wrap_index] = fhat[w.flat_index] * w.weights
            grids.append(np.fft.ifft2(buf.reshape(w.shape), norm="ortho"))
        scales.append(ScaleBand(band[0].scale, grids))
    return CurveletDecomposition(scales, windows.height, windows.width)


def _check_structure(coeffs: CurveletDecomposition, windows: WindowFamily):
    if (coeffs.source_height, coeffs.source_width) != windows.shape:
        raise DimensionError("decomposition was computed for a different image size")
    if coeffs.band_counts != windows.band_counts:
        raise DimensionError(f"band counts {coeffs.band_counts} != {windows.band_counts}")
    for s, band in zip(coeffs.scales, windows.bands):
        for grid, w in zip(s.bands, band):
            if grid.shape != w.shape:
                raise DimensionError(
                    f"scale {w.scale} angle {w.angle}: grid {grid.shape} != {w.shape}")


def fdct_inverse(coeffs: CurveletDecomposition, windows: WindowFamily,
                 real: bool = True) -> np.ndarray:
    """Adjoint of :func:`fdct_forward`, which is also its inverse."""
    _check_structure(coeffs, windows)
    acc = np.zeros(windows.height * windows.width, dtype=np.complex128)
    for s, band in zip(coeffs.scales, windows.bands):
        for grid, w in zip(s.bands, band):
            spec = np.fft.fft2(grid, norm="ortho").ravel()
            # flat_index has no repeats within one wedge
            acc[w.flat_index] += w.weights * spec[w.wrap_index]
    x = np.fft.ifft2(np.fft.ifftshift(acc.reshape(windows.shape)), norm="ortho")
    return x.real if real else x


def coefficient_magnitudes(coeffs: CurveletDecomposition, scale: int) -> np.ndarray:
    """Moduli of every coefficient at ``scale``; angle-major, then row-major."""
    if not 1 <= scale <= coeffs.num_scales:
        raise ValueError(f"scale must be in 1..{coeffs.num_scales}, got {scale}")
    return np.concatenate([np.abs(b).ravel() for b in coeffs.scales[scale - 1].bands])


# --- debug container --------------------------------------------------------
#
#   magic    4 bytes  b"CVLT"
#   version  uint32   1
#   height, width, num_scales            uint32 each
#   per scale: band count                uint32
#   per band (scale-major, angle order): rows, cols   uint32 each
#   data: every band in the same order, row-major, complex128 as
#         interleaved (real, imag) float64 pairs
#
# All integers and floats are little-endian.

_MAGIC = b"CVLT"


def write_decomposition(path, coeffs: CurveletDecomposition) -> None:
    parts = [_MAGIC, struct.pack("<4I", 1, coeffs.source_height, coeffs.source_width,
                                 coeffs.num_scales)]
    parts += [struct.pack("<I", n) for n in coeffs.band_counts]
    for s in coeffs.scales:
        parts += [struct.pack("<2I", *b.shape) for b in s.bands]
    for s in coeffs.scales:
        parts += [np.ascontiguousarray(b, dtype="<c16").tobytes() for b in s.bands]
    Path(path).write_bytes(b"".join(parts))


def read_decomposition(path) -> CurveletDecomposition:
    data = Path(path).read_bytes()
    if data[:4] != _MAGIC:
        raise ValueError(f"{path}: not a curvelet dump")
    version, height, width, nscales = struct.unpack_from("<4I", data, 4)
    if version != 1:
        raise ValueError(f"unsupported dump version {version}")
    pos = 20
    counts = struct.unpack_from(f"<{nscales}I", data, pos)
    pos += 4 * nscales
    shapes = []
    for n in counts:
        shapes.append([struct.unpack_from("<2I", data, pos + 8 * i) for i in range(n)])
        pos += 8 * n
    scales = []
    for j, band_shapes in enumerate(shapes, start=1):
        grids = []
        for rows, cols in band_shapes:
            grid = np.frombuffer(data, dtype="<c16", count=rows * cols, offset=pos)
            grids.append(grid.reshape(rows, cols).astype(np.complex128))
            pos += 16 * rows * cols
        scales.append(ScaleBand(j, grids))
    return CurveletDecomposition(scales, height, width)
