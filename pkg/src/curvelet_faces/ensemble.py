"""Per-scale classifier ensemble fused by majority vote.

Every image is transformed once; each configured curvelet scale feeds its own
PCA + classifier pair, and the per-scale votes are combined by plurality.  A
tie is resolved by the tie-break voter when its vote is among the tied labels,
otherwise the image is rejected.

The alternative ``quantized_ensemble`` mode reproduces the older bit-depth
scheme: the voters are the 8-, 4- and 2-bit versions of the image, each
transformed separately and read at a single scale.
"""
from __future__ import annotations

import io
import json
import logging
import time
from collections import Counter
from contextlib import contextmanager
from dataclasses import asdict, dataclass, field
from typing import Hashable, Sequence

import numpy as np

from . import features
from .classifiers import (Euclidean, Gaussian, KnnClassifier, LabeledSet, OaaSvm,
                          knn_predict, median_pairwise_distance, oaa_predict, oaa_train)
from .fdct import WindowFamily, build_windows, coefficient_magnitudes, fdct_forward
from .features import PcaModel, pca_fit, pca_project
from .imaging import DimensionError, Image, quantize

log = logging.getLogger(__name__)

QUANTIZED_DEPTHS = (8, 4, 2)


@dataclass(frozen=True)
class PipelineConfig:
    num_scales: int = 4
    angles_coarse: int = 8
    scales: tuple[int, ...] = (1, 2, 3, 4)
    pca_k: int = features.DEFAULT_PCA_K
    classifier: str = "knn"
    knn_k: int = 1
    metric: str = "euclidean"
    sigma: float | None = None
    svm_c: float = 1.0
    tie_break_scale: int = 3
    quantized_ensemble: bool = False
    quantized_scale: int = 3

    def __post_init__(self):
        object.__setattr__(self, "scales", tuple(sorted(set(int(s) for s in self.scales))))
        if self.num_scales < 3:
            raise ValueError("num_scales must be at least 3")
        if self.classifier not in ("knn", "svm"):
            raise ValueError(f"unknown classifier {self.classifier!r}")
        if self.metric not in ("euclidean", "gaussian"):
            raise ValueError(f"unknown metric {self.metric!r}")
        if not self.scales or not all(1 <= s <= self.num_scales for s in self.scales):
            raise ValueError(f"scales {self.scales} outside 1..{self.num_scales}")
        if not 1 <= self.quantized_scale <= self.num_scales:
            raise ValueError("quantized_scale out of range")
        if self.pca_k < 1 or self.knn_k < 1 or self.svm_c <= 0:
            raise ValueError("pca_k, knn_k and svm_c must be positive")

    @property
    def voter_keys(self) -> tuple[int, ...]:
        return QUANTIZED_DEPTHS if self.quantized_ensemble else self.scales

    @property
    def tie_break_key(self) -> int | None:
        # the bit-depth scheme rejects any three-way split
        return None if self.quantized_ensemble else self.tie_break_scale

    def to_dict(self) -> dict:
        d = asdict(self)
        d["scales"] = list(self.scales)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "PipelineConfig":
        d = dict(d)
        if "scales" in d:
            d["scales"] = tuple(d["scales"])
        return cls(**d)


@dataclass(frozen=True, eq=False)
class Voter:
    key: int
    pca: PcaModel
    classifier: KnnClassifier | OaaSvm

    def vote(self, x: np.ndarray) -> tuple[Hashable, bool]:
        return self.vote_reduced(pca_project(self.pca, x))

    def vote_reduced(self, z: np.ndarray) -> tuple[Hashable, bool]:
        if isinstance(self.classifier, OaaSvm):
            return oaa_predict(self.classifier, z)
        return knn_predict(self.classifier, z), True


@dataclass(frozen=True, eq=False)
class ScaleEnsembleModel:
    config: PipelineConfig
    windows: WindowFamily
    voters: tuple[Voter, ...]
    classes: tuple

    @property
    def scale_indices(self) -> tuple[int, ...]:
        return tuple(v.key for v in self.voters)


@dataclass(frozen=True)
class Prediction:
    label: Hashable | None
    votes: dict = field(default_factory=dict)
    counts: dict = field(default_factory=dict)
    accepted: dict = field(default_factory=dict)

    @property
    def rejected(self) -> bool:
        return self.label is None


def majority_vote(votes: dict, tie_break_key=None) -> Hashable | None:
    """Plurality winner of ``{voter: label}``; ``None`` means rejected.

    A tie at the top goes to the tie-break voter's label when that label is
    one of the tied ones.
    """
    if not votes:
        return None
    counts = Counter(votes.values())
    top = max(counts.values())
    tied = [lab for lab, n in counts.items() if n == top]
    if len(tied) == 1:
        return tied[0]
    tb = votes.get(tie_break_key)
    if tie_break_key in votes and tb in tied:
        return tb
    return None


# --- feature extraction -----------------------------------------------------

@contextmanager
def _phase(timings: dict | None, name: str):
    if timings is None:
        yield
        return
    t0 = time.perf_counter()
    try:
        yield
    finally:
        timings[name] = timings.get(name, 0.0) + time.perf_counter() - t0


def _voter_features(img: Image, windows: WindowFamily, config: PipelineConfig) -> dict[int, np.ndarray]:
    if img.shape != windows.shape:
        raise DimensionError(f"image {img.shape} does not match model geometry {windows.shape}")
    if config.quantized_ensemble:
        out = {}
        for depth in QUANTIZED_DEPTHS:
            src = img if depth == img.bit_depth else quantize(img, depth)
            coeffs = fdct_forward(src, windows)
            out[depth] = coefficient_magnitudes(coeffs, config.quantized_scale)
        return out
    coeffs = fdct_forward(img, windows)
    return {j: coefficient_magnitudes(coeffs, j) for j in config.scales}


def _fit_classifier(Z: np.ndarray, labels: list, config: PipelineConfig):
    if config.classifier == "svm":
        return oaa_train(Z, labels, C=config.svm_c)
    if config.metric == "gaussian":
        metric = Gaussian(config.sigma if config.sigma else median_pairwise_distance(Z))
    else:
        metric = Euclidean()
    k = min(config.knn_k, len(labels))
    return KnnClassifier(LabeledSet(Z, labels), k, metric)


def ensemble_train(train: Sequence[tuple[Image, Hashable]], config: PipelineConfig | None = None,
                   classes: Sequence[Hashable] | None = None,
                   timings: dict | None = None) -> ScaleEnsembleModel:
    """Train one PCA + classifier per voter from a list of ``(image, label)`` pairs.

    ``timings``, when given, accumulates seconds under ``transform``, ``pca``
    and ``classify``.
    """
    config = config or PipelineConfig()
    if not train:
        raise ValueError("empty training set")
    shapes = {img.shape for img, _ in train}
    if len(shapes) != 1:
        raise DimensionError(f"training images have differing shapes: {sorted(shapes)}")
    labels = [lab for _, lab in train]
    present = set(labels)
    if classes is not None:
        missing = [c for c in classes if c not in present]
        if missing:
            raise ValueError(f"classes without training samples: {missing}")
    (height, width), = shapes
    windows = build_windows(width, height, config.num_scales, config.angles_coarse)

    with _phase(timings, "transform"):
        feats = [_voter_features(img, windows, config) for img, _ in train]
    voters = []
    for key in config.voter_keys:
        X = np.stack([f[key] for f in feats])
        k = min(config.pca_k, X.shape[0], X.shape[1])
        if k < config.pca_k:
            log.info("voter %s: pca_k %d limited to %d by %d samples of length %d",
                     key, config.pca_k, k, X.shape[0], X.shape[1])
        with _phase(timings, "pca"):
            pca = pca_fit(X, k) if X.shape[0] >= 2 else _single_sample_pca(X)
            Z = pca_project(pca, X)
        with _phase(timings, "classify"):
            clf = _fit_classifier(Z, labels, config)
        voters.append(Voter(key, pca, clf))
    ordered = tuple(sorted(present, key=lambda c: (type(c).__name__, c)))
    return ScaleEnsembleModel(config, windows, tuple(voters), ordered)


def _single_sample_pca(X: np.ndarray) -> PcaModel:
    return PcaModel(X[0].copy(), np.zeros((0, X.shape[1])), np.zeros(0), 1)


def ensemble_predict(model: ScaleEnsembleModel, img: Image,
                     timings: dict | None = None) -> Prediction:
    with _phase(timings, "transform"):
        feats = _voter_features(img, model.windows, model.config)
    votes, accepted = {}, {}
    for voter in model.voters:
        with _phase(timings, "pca"):
            z = pca_project(voter.pca, feats[voter.key])
        with _phase(timings, "classify"):
            votes[voter.key], accepted[voter.key] = voter.vote_reduced(z)
    label = majority_vote(votes, model.config.tie_break_key)
    return Prediction(label, votes, dict(Counter(votes.values())), accepted)


# --- bundle serialization ---------------------------------------------------
#
# A model bundle is a NumPy ``.npz`` archive holding:
#   meta            uint8 bytes of a UTF-8 JSON object
#                   {"format": 1, "config": {...}, "classes": [...],
#                    "height": H, "width": W, "voters": [keys...]}
#   v{key}_pca      uint8 bytes of the binary PCA model (see features.py)
#   k-NN voters:    v{key}_points (float64, n x k), v{key}_labels (int64
#                   indices into "classes"), v{key}_sigma (float64 scalar,
#                   NaN for the Euclidean metric)
#   SVM voters:     v{key}_weights, v{key}_biases, v{key}_mean, v{key}_scale
# Windows are rebuilt from the config on load; they are deterministic.

def save_model(model: ScaleEnsembleModel, path) -> None:
    classes = list(model.classes)
    meta = {"format": 1, "config": model.config.to_dict(), "classes": classes,
            "height": model.windows.height, "width": model.windows.width,
            "voters": [v.key for v in model.voters]}
    arrays = {"meta": np.frombuffer(json.dumps(meta).encode(), dtype=np.uint8)}
    for v in model.voters:
        p = f"v{v.key}_"
        arrays[p + "pca"] = np.frombuffer(features.pca_to_bytes(v.pca), dtype=np.uint8)
        c = v.classifier
        if isinstance(c, OaaSvm):
            arrays.update({p + "weights": c.weights, p + "biases": c.biases,
                           p + "mean": c.mean, p + "scale": c.scale})
        else:
            arrays[p + "points"] = c.data.points
            arrays[p + "labels"] = np.array([classes.index(l) for l in c.data.labels], dtype=np.int64)
            arrays[p + "k"] = np.array(c.k)
            sigma = c.metric.sigma if isinstance(c.metric, Gaussian) else np.nan
            arrays[p + "sigma"] = np.array(sigma, dtype=np.float64)
    buf = io.BytesIO()
    np.savez(buf, **arrays)
    with open(path, "wb") as fh:
        fh.write(buf.getvalue())


def load_model(path) -> ScaleEnsembleModel:
    with np.load(path) as z:
        meta = json.loads(z["meta"].tobytes().decode())
        if meta.get("format") != 1:
            raise ValueError(f"unsupported model bundle format {meta.get('format')}")
        config = PipelineConfig.from_dict(meta["config"])
        classes = tuple(meta["classes"])
        voters = []
        for key in meta["voters"]:
            p = f"v{key}_"
            pca = features.pca_from_bytes(z[p + "pca"].tobytes())
            if config.classifier == "svm":
                clf = OaaSvm(classes, z[p + "weights"], z[p + "biases"], z[p + "mean"],
                             z[p + "scale"], config.svm_c)
            else:
                sigma = float(z[p + "sigma"])
                metric = Euclidean() if np.isnan(sigma) else Gaussian(sigma)
                labels = [classes[i] for i in z[p + "labels"]]
                clf = KnnClassifier(LabeledSet(z[p + "points"], labels), int(z[p + "k"]), metric)
            voters.append(Voter(key, pca, clf))
    windows = build_windows(meta["width"], meta["height"], config.num_scales, config.angles_coarse)
    return ScaleEnsembleModel(config, windows, tuple(voters), classes)
