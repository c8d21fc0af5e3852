"""Per-scale curvelet feature vectors and PCA reduction."""
from __future__ import annotations

import logging
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .fdct import CurveletDecomposition, coefficient_magnitudes
from .imaging import DimensionError

log = logging.getLogger(__name__)

DEFAULT_PCA_K = 100


def scale_features(coeffs: CurveletDecomposition, scales) -> dict[int, np.ndarray]:
    """Magnitude feature vector for each requested scale."""
    return {j: coefficient_magnitudes(coeffs, j) for j in scales}


@dataclass(frozen=True, eq=False)
class PcaModel:
    mean: np.ndarray
    components: np.ndarray  # (k, d), orthonormal rows
    singular_values: np.ndarray
    requested_k: int

    @property
    def k(self) -> int:
        return self.components.shape[0]

    @property
    def dim(self) -> int:
        return self.mean.shape[0]

    def project(self, x) -> np.ndarray:
        return pca_project(self, x)

    def reconstruct(self, z) -> np.ndarray:
        return self.mean + np.asarray(z) @ self.components


def _effective_rank(s: np.ndarray, shape) -> int:
    if s.size == 0 or s[0] == 0:
        return 0
    tol = s[0] * max(shape) * np.finfo(np.float64).eps
    return int(np.sum(s > tol))


def pca_fit(samples, k: int = DEFAULT_PCA_K) -> PcaModel:
    """Fit PCA by SVD of the centered sample matrix.

    Components are ordered by decreasing singular value and each one is signed
    so that its largest-magnitude entry is non-negative.  When the centered
    data has rank below ``k`` the model keeps only the effective rank; the
    requested value stays available as ``requested_k``.
    """
    X = np.asarray(samples, dtype=np.float64)
    if X.ndim != 2 or X.shape[0] < 2:
        raise ValueError("pca_fit needs at least 2 samples of equal length")
    n, d = X.shape
    if not 1 <= k <= min(n, d):
        raise ValueError(f"k must be in 1..{min(n, d)}, got {k}")
    mean = X.mean(axis=0)
    _, s, vt = np.linalg.svd(X - mean, full_matrices=False)
    rank = _effective_rank(s, X.shape)
    kept = min(k, rank)
    if kept < k:
        log.info("PCA: requested %d components, data has effective rank %d", k, rank)
    comps = vt[:kept].copy()
    flip = np.sign(comps[np.arange(kept), np.argmax(np.abs(comps), axis=1)])
    comps *= np.where(flip == 0, 1.0, flip)[:, None]
    return PcaModel(mean, comps, s[:kept].copy(), k)


def pca_project(model: PcaModel, x) -> np.ndarray:
    """``components @ (x - mean)``; also accepts a 2-D batch of row vectors."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape[-1] != model.dim:
        raise DimensionError(f"expected length {model.dim}, got {x.shape[-1]}")
    return (x - model.mean) @ model.components.T


# --- serialization ----------------------------------------------------------
#
#   magic b"PCAM", then little-endian uint32 version (1), uint64 d, uint64 k,
#   uint64 requested_k, followed by float64 arrays: mean (d),
#   singular values (k), components (k*d, row-major).

_MAGIC = b"PCAM"


def pca_to_bytes(model: PcaModel) -> bytes:
    header = _MAGIC + struct.pack("<I3Q", 1, model.dim, model.k, model.requested_k)
    body = b"".join(np.ascontiguousarray(a, dtype="<f8").tobytes()
                    for a in (model.mean, model.singular_values, model.components))
    return header + body


def pca_from_bytes(data: bytes) -> PcaModel:
    if data[:4] != _MAGIC:
        raise ValueError("not a PCA model file")
    version, d, k, requested = struct.unpack_from("<I3Q", data, 4)
    if version != 1:
        raise ValueError(f"unsupported PCA model version {version}")
    pos = 4 + struct.calcsize("<I3Q")
    expected = pos + 8 * (d + k + k * d)
    if len(data) != expected:
        raise ValueError(f"PCA model file has {len(data)} bytes, expected {expected}")
    mean = np.frombuffer(data, "<f8", d, pos).astype(np.float64)
    pos += 8 * d
    sv = np.frombuffer(data, "<f8", k, pos).astype(np.float64)
    pos += 8 * k
    comps = np.frombuffer(data, "<f8", k * d, pos).astype(np.float64).reshape(k, d)
    return PcaModel(mean, comps, sv, requested)


def save_pca(model: PcaModel, path) -> None:
    Path(path).write_bytes(pca_to_bytes(model))


def load_pca(path) -> PcaModel:
    return pca_from_bytes(Path(path).read_bytes())
