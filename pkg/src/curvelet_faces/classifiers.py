"""k-nearest-neighbour and one-against-all linear SVM classifiers."""
from __future__ import annotations

import logging
from collections import defaultdict
from dataclasses import dataclass, field
from typing import Hashable, Sequence

import numpy as np
from scipy.optimize import minimize_scalar

from .imaging import DimensionError

log = logging.getLogger(__name__)


# --- metrics ----------------------------------------------------------------

@dataclass(frozen=True)
class Euclidean:
    name = "euclidean"

    def from_sq(self, sq):
        return np.sqrt(sq)


@dataclass(frozen=True)
class Gaussian:
    """Dissimilarity ``1 - exp(-|x-y|^2 / (2 sigma^2))``: 0 at x = y, rising towards 1."""

    sigma: float
    name = "gaussian"

    def __post_init__(self):
        if not self.sigma > 0:
            raise ValueError(f"sigma must be positive, got {self.sigma}")

    def from_sq(self, sq):
        return -np.expm1(-np.asarray(sq) / (2.0 * self.sigma**2))


Metric = Euclidean | Gaussian


def knn_distance(metric: Metric, x, y) -> float:
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape != y.shape:
        raise DimensionError(f"length mismatch: {x.shape} vs {y.shape}")
    return float(metric.from_sq(np.sum((x - y) ** 2)))


def median_pairwise_distance(points) -> float:
    """Default Gaussian width; falls back to 1 when all points coincide."""
    X = np.asarray(points, dtype=np.float64)
    if len(X) < 2:
        return 1.0
    sq = np.sum(X**2, axis=1)
    d2 = np.maximum(sq[:, None] + sq[None, :] - 2 * X @ X.T, 0.0)
    iu = np.triu_indices(len(X), 1)
    med = float(np.median(np.sqrt(d2[iu])))
    return med if med > 0 else 1.0


# --- k-NN -------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class LabeledSet:
    points: np.ndarray
    labels: tuple

    def __post_init__(self):
        pts = np.atleast_2d(np.asarray(self.points, dtype=np.float64))
        if len(pts) == 0 or len(pts) != len(self.labels):
            raise ValueError("points and labels must be non-empty and of equal length")
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "labels", tuple(self.labels))

    def __len__(self):
        return len(self.labels)


@dataclass(frozen=True, eq=False)
class KnnClassifier:
    data: LabeledSet
    k: int = 1
    metric: Metric = field(default_factory=Euclidean)

    def __post_init__(self):
        if not 1 <= self.k <= len(self.data):
            raise ValueError(f"k must be in 1..{len(self.data)}, got {self.k}")

    def predict(self, query) -> Hashable:
        return knn_predict(self, query)


def knn_predict(c: KnnClassifier, query) -> Hashable:
    """Plurality label among the ``k`` nearest training points.

    Neighbours are ranked by metric value, then raw Euclidean distance, then
    training index; because both metrics are non-decreasing in Euclidean
    distance this ranking is the same for either metric even where the
    Gaussian form saturates.  Vote ties go to the tied label with the smallest
    summed Euclidean distance, then to the one whose nearest member comes
    first in the ranking.
    """
    q = np.asarray(query, dtype=np.float64)
    X = c.data.points
    if q.shape != (X.shape[1],):
        raise DimensionError(f"query has shape {q.shape}, training dimension is {X.shape[1]}")
    sq = np.sum((X - q) ** 2, axis=1)
    order = np.lexsort((np.arange(len(sq)), sq, c.metric.from_sq(sq)))[: c.k]
    if c.k == 1:
        return c.data.labels[order[0]]
    votes: dict = defaultdict(int)
    summed: dict = defaultdict(float)
    first_rank: dict = {}
    for rank, i in enumerate(order):
        lab = c.data.labels[i]
        votes[lab] += 1
        summed[lab] += float(np.sqrt(sq[i]))
        first_rank.setdefault(lab, rank)
    return min(votes, key=lambda lab: (-votes[lab], summed[lab], first_rank[lab]))


# --- linear SVM -------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class SvmResult:
    """Binary linear SVM trained on ``[x, 1]`` (the bias is the last weight)."""

    w: np.ndarray
    b: float
    converged: bool
    epochs: int
    objective_history: tuple

    def decision(self, X) -> np.ndarray:
        return np.asarray(X, dtype=np.float64) @ self.w + self.b


def svm_objective(w, b, X, y, C) -> float:
    """``0.5 * (|w|^2 + b^2) + C * sum(hinge)``; the bias is regularized like a weight."""
    margins = y * (X @ w + b)
    return 0.5 * (w @ w + b * b) + C * float(np.sum(np.maximum(0.0, 1.0 - margins)))


def svm_train_binary(positives, negatives, C: float = 1.0, tol: float = 1e-6,
                     max_epochs: int = 2000) -> SvmResult:
    """Soft-margin linear SVM.

    Each epoch runs one sweep of dual coordinate descent over the samples
    (random-free, fixed order), then moves the primal iterate along the
    segment towards the dual's primal point, choosing the step by an exact
    one-dimensional minimization of the primal objective.  The primal
    objective therefore never increases between epochs.  Training stops once
    the relative decrease over an epoch falls below ``tol``; hitting
    ``max_epochs`` first is reported through ``converged=False``.
    """
    P = np.atleast_2d(np.asarray(positives, dtype=np.float64))
    N = np.atleast_2d(np.asarray(negatives, dtype=np.float64))
    if P.size == 0 or N.size == 0:
        raise ValueError("both classes need at least one sample")
    if P.shape[1] != N.shape[1]:
        raise DimensionError("positive and negative samples differ in length")
    if not (np.all(np.isfinite(P)) and np.all(np.isfinite(N))):
        raise ValueError("non-finite training input")
    if not C > 0:
        raise ValueError("C must be positive")

    X = np.vstack([P, N])
    y = np.concatenate([np.ones(len(P)), -np.ones(len(N))])
    Xa = np.hstack([X, np.ones((len(X), 1))])
    qii = np.einsum("ij,ij->i", Xa, Xa)

    alpha = np.zeros(len(X))
    dual_w = np.zeros(Xa.shape[1])
    w = np.zeros(Xa.shape[1])

    def primal(v):
        return svm_objective(v[:-1], v[-1], X, y, C)

    obj = primal(w)
    history = [obj]
    converged = False
    epoch = 0
    for epoch in range(1, max_epochs + 1):
        for i in range(len(X)):
            if qii[i] == 0:
                continue
            grad = y[i] * (dual_w @ Xa[i]) - 1.0
            new = min(max(alpha[i] - grad / qii[i], 0.0), C)
            if new != alpha[i]:
                dual_w += (new - alpha[i]) * y[i] * Xa[i]
                alpha[i] = new

        direction = dual_w - w
        if np.any(direction):
            line = minimize_scalar(lambda t: primal(w + t * direction),
                                   bounds=(0.0, 2.0), method="bounded",
                                   options={"xatol": 1e-10})
            candidates = [(obj, 0.0), (primal(dual_w), 1.0), (float(line.fun), float(line.x))]
            best_obj, step = min(candidates, key=lambda c: c[0])
            if step != 0.0:
                w = w + step * direction
            new_obj = best_obj
        else:
            new_obj = obj
        history.append(new_obj)
        decrease = obj - new_obj
        obj = new_obj
        if decrease <= tol * max(abs(obj), 1e-12) and _dual_stationary(alpha, dual_w, Xa, y, C, tol):
            converged = True
            break
    if not converged:
        log.info("SVM stopped at the %d-epoch cap without converging", max_epochs)
    return SvmResult(w[:-1].copy(), float(w[-1]), converged, epoch, tuple(history))


def _dual_stationary(alpha, dual_w, Xa, y, C, tol) -> bool:
    """Projected-gradient optimality check for the box-constrained dual."""
    grad = y * (Xa @ dual_w) - 1.0
    pg = np.where(alpha <= 0, np.minimum(grad, 0.0), np.where(alpha >= C, np.maximum(grad, 0.0), grad))
    return float(np.max(np.abs(pg), initial=0.0)) <= max(tol * 100, 1e-6)


# --- one-against-all --------------------------------------------------------

@dataclass(frozen=True, eq=False)
class OaaSvm:
    classes: tuple
    weights: np.ndarray  # (n_classes, d)
    biases: np.ndarray
    mean: np.ndarray
    scale: np.ndarray
    C: float
    converged: tuple = ()
    objective_histories: tuple = ()

    def decision_values(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        if x.shape[-1] != self.mean.shape[0]:
            raise DimensionError(f"expected length {self.mean.shape[0]}, got {x.shape[-1]}")
        z = (x - self.mean) / self.scale
        return z @ self.weights.T + self.biases

    def predict(self, x) -> Hashable:
        return oaa_predict(self, x)[0]


def standardization(X) -> tuple[np.ndarray, np.ndarray]:
    """Training mean and standard deviation; constant features get scale 1."""
    mean = X.mean(axis=0)
    std = X.std(axis=0)
    return mean, np.where(std > 0, std, 1.0)


def oaa_train(points, labels: Sequence[Hashable], C: float = 1.0, **svm_kw) -> OaaSvm:
    """One binary SVM per class (that class against the rest), on z-scored inputs."""
    X = np.atleast_2d(np.asarray(points, dtype=np.float64))
    labels = list(labels)
    if len(X) != len(labels) or not labels:
        raise ValueError("points and labels must be non-empty and of equal length")
    classes = tuple(sorted(set(labels), key=_label_key))
    mean, scale = standardization(X)
    Z = (X - mean) / scale
    lab = np.array([classes.index(l) for l in labels])
    if len(classes) == 1:
        return OaaSvm(classes, np.zeros((1, X.shape[1])), np.ones(1), mean, scale, C, (True,))
    W, B, conv, hist = [], [], [], []
    for ci in range(len(classes)):
        res = svm_train_binary(Z[lab == ci], Z[lab != ci], C=C, **svm_kw)
        W.append(res.w)
        B.append(res.b)
        conv.append(res.converged)
        hist.append(res.objective_history)
    return OaaSvm(classes, np.array(W), np.array(B), mean, scale, C, tuple(conv), tuple(hist))


def oaa_predict(model: OaaSvm, x) -> tuple[Hashable, bool]:
    """Argmax class plus the unanimity flag (exactly one positive decision value)."""
    scores = model.decision_values(x)
    # np.argmax returns the first maximum, i.e. the earliest class in sorted order
    best = int(np.argmax(scores))
    accepted = int(np.sum(scores > 0)) == 1 and scores[best] > 0
    return model.classes[best], bool(accepted)


def _label_key(label):
    return (type(label).__name__, label)
