"""Datasets, train/test splits, experiment runs and reports."""
from __future__ import annotations

import csv
import hashlib
import json
import logging
import statistics
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Hashable, Sequence

import numpy as np

from .ensemble import PipelineConfig, ensemble_predict, ensemble_train
from .fdct import build_windows, fdct_forward
from .imaging import Image, ImageFormatError, load_image, preprocess

log = logging.getLogger(__name__)

IMAGE_SUFFIXES = {".pgm", ".png", ".jpg", ".jpeg", ".bmp", ".tif", ".tiff"}
DATASET_NAMES = ("orl", "grimace", "gatech", "custom", "synthetic")

Sample = tuple[Image, Hashable]


class DatasetError(ValueError):
    pass


@dataclass(frozen=True)
class DatasetSpec:
    root: Path
    subject_limit: int = 15
    images_per_subject: int | None = None
    name: str = "custom"

    def __post_init__(self):
        object.__setattr__(self, "root", Path(self.root))
        if self.subject_limit < 2:
            raise ValueError("subject_limit must be at least 2")
        if self.name not in DATASET_NAMES:
            raise ValueError(f"unknown dataset name {self.name!r}")


@dataclass(frozen=True)
class SplitPolicy:
    train_count: int
    mode: str = "first-k"
    seed: int | None = None

    def __post_init__(self):
        if self.train_count < 1:
            raise ValueError("train_count must be at least 1")
        if self.mode not in ("first-k", "random"):
            raise ValueError(f"unknown split mode {self.mode!r}")
        if self.mode == "random" and self.seed is None:
            raise ValueError("random split needs a seed")


# --- datasets ---------------------------------------------------------------

def load_dataset(spec: DatasetSpec) -> list[Sample]:
    """Read ``root/<subject>/<image>`` in lexicographic order, preprocessing each image.

    Only the first ``subject_limit`` subject directories are used.  Files that
    cannot be decoded are skipped; a subject left with no images is an error.
    """
    if not spec.root.is_dir():
        raise FileNotFoundError(f"dataset root {spec.root} does not exist")
    subjects = sorted(p for p in spec.root.iterdir() if p.is_dir())[: spec.subject_limit]
    if not subjects:
        raise DatasetError(f"no subject directories under {spec.root}")
    data = []
    for subject in subjects:
        files = sorted(p for p in subject.iterdir()
                       if p.is_file() and p.suffix.lower() in IMAGE_SUFFIXES)
        images = []
        for f in files:
            try:
                images.append(preprocess(load_image(f)))
            except (ImageFormatError, OSError) as exc:
                log.warning("skipping %s: %s", f, exc)
        if not images:
            raise DatasetError(f"subject {subject.name} has no readable images")
        if spec.images_per_subject is not None and len(images) != spec.images_per_subject:
            log.warning("subject %s has %d images, expected %d",
                        subject.name, len(images), spec.images_per_subject)
        data.extend((img, subject.name) for img in images)
    return data


def _smooth_pattern(rng: np.random.Generator, size: int) -> np.ndarray:
    yy, xx = np.mgrid[0:size, 0:size].astype(np.float64)
    out = np.zeros((size, size))
    for _ in range(6):
        cy, cx = rng.uniform(0, size, 2)
        width = rng.uniform(size / 12, size / 5)
        out += rng.uniform(-1, 1) * np.exp(-((yy - cy) ** 2 + (xx - cx) ** 2) / (2 * width**2))
    fy, fx = rng.uniform(0.5, 2.5, 2) * 2 * np.pi / size
    out += 0.3 * np.sin(fy * yy + fx * xx + rng.uniform(0, 2 * np.pi))
    out -= out.min()
    return 40 + 175 * out / out.max()


def synthetic_dataset(n_classes: int = 10, per_class: int = 20, size: int = 64,
                      max_shift: int = 2, snr_db: float = 20.0, seed: int = 0) -> list[Sample]:
    """Separable toy face set: one smooth base pattern per class.

    Each image is the class pattern shifted by up to ``max_shift`` pixels in
    each direction plus white Gaussian noise at ``snr_db`` relative to the
    pattern's variance, rounded and clipped to 8 bits.
    """
    rng = np.random.default_rng(seed)
    canvas = size + 2 * max_shift
    data = []
    for c in range(n_classes):
        base = _smooth_pattern(rng, canvas)
        noise_sd = np.sqrt(base.var() / 10 ** (snr_db / 10))
        for _ in range(per_class):
            dy, dx = rng.integers(0, 2 * max_shift + 1, 2)
            img = base[dy:dy + size, dx:dx + size] + rng.normal(0, noise_sd, (size, size))
            data.append((Image(np.clip(np.round(img), 0, 255)), f"c{c:02d}"))
    return data


# --- splits -----------------------------------------------------------------

def split_indices(labels: Sequence[Hashable], policy: SplitPolicy) -> tuple[list[int], list[int]]:
    groups: dict = {}
    for i, lab in enumerate(labels):
        groups.setdefault(lab, []).append(i)
    rng = np.random.default_rng(policy.seed) if policy.mode == "random" else None
    train, test = [], []
    for lab, idx in groups.items():
        if policy.train_count >= len(idx):
            raise ValueError(f"subject {lab!r} has {len(idx)} images; "
                             f"train_count {policy.train_count} leaves no test image")
        if rng is not None:
            idx = [idx[i] for i in rng.permutation(len(idx))]
        train += idx[: policy.train_count]
        test += idx[policy.train_count:]
    return sorted(train), sorted(test)


def split(data: Sequence[Sample], policy: SplitPolicy) -> tuple[list[Sample], list[Sample]]:
    """Per-subject holdout split; first ``train_count`` images or a seeded shuffle."""
    tr, te = split_indices([lab for _, lab in data], policy)
    return [data[i] for i in tr], [data[i] for i in te]


# --- experiments ------------------------------------------------------------

@dataclass
class EvaluationReport:
    dataset: str
    train_count: int
    split_mode: str
    seed: int | None
    config: dict
    classes: list
    n_test: int
    correct: int
    rejections: int
    accuracy: float
    per_class_accuracy: dict
    confusion: list  # rows: true class, cols: predicted class, in ``classes`` order
    timings_ms: dict = field(default_factory=dict, compare=False)

    @property
    def config_hash(self) -> str:
        echo = {"dataset": self.dataset, "train_count": self.train_count,
                "split_mode": self.split_mode, "config": self.config}
        return hashlib.sha256(json.dumps(echo, sort_keys=True).encode()).hexdigest()[:12]

    def to_row(self) -> dict:
        t = self.timings_ms
        return {
            "config_hash": self.config_hash,
            "dataset": self.dataset,
            "train_count": self.train_count,
            "seed": "" if self.seed is None else self.seed,
            "pca_k": self.config["pca_k"],
            "classifier": self.config["classifier"],
            "scales": " ".join(str(s) for s in self.config["scales"]),
            "accuracy": f"{self.accuracy:.6f}",
            "rejections": self.rejections,
            "n_test": self.n_test,
            "transform_ms": f"{t.get('transform', 0.0):.3f}",
            "pca_ms": f"{t.get('pca', 0.0):.3f}",
            "classify_ms": f"{t.get('classify', 0.0):.3f}",
        }

    def to_json(self) -> dict:
        out = {k: getattr(self, k) for k in (
            "dataset", "train_count", "split_mode", "seed", "config", "classes", "n_test",
            "correct", "rejections", "accuracy", "per_class_accuracy", "confusion", "timings_ms")}
        out["config_hash"] = self.config_hash
        return out


def evaluate_predictions(truth: Sequence[Hashable], predicted: Sequence[Hashable | None],
                         classes: Sequence[Hashable]) -> dict:
    """Accuracy, per-class accuracy and confusion; ``None`` predictions are rejections."""
    classes = list(classes)
    pos = {c: i for i, c in enumerate(classes)}
    confusion = [[0] * len(classes) for _ in classes]
    per_total = dict.fromkeys(classes, 0)
    per_correct = dict.fromkeys(classes, 0)
    rejections = 0
    for t, p in zip(truth, predicted):
        per_total[t] += 1
        if p is None:
            rejections += 1
            continue
        confusion[pos[t]][pos[p]] += 1
        per_correct[t] += p == t
    n = len(truth)
    correct = sum(per_correct.values())
    return {
        "n_test": n,
        "correct": correct,
        "rejections": rejections,
        "accuracy": correct / n if n else 0.0,
        "per_class_accuracy": {str(c): per_correct[c] / per_total[c]
                               for c in classes if per_total[c]},
        "confusion": confusion,
    }


def run_experiment(dataset: DatasetSpec | Sequence[Sample], policy: SplitPolicy,
                   config: PipelineConfig | None = None, dataset_name: str | None = None,
                   resubstitution: bool = False) -> EvaluationReport:
    """Train on the split's training part and score the test part.

    With ``resubstitution`` the training images themselves are scored instead.
    Rejected test images count against accuracy.
    """
    config = config or PipelineConfig()
    if isinstance(dataset, DatasetSpec):
        data = load_dataset(dataset)
        dataset_name = dataset_name or dataset.name
    else:
        data = list(dataset)
    labels = [lab for _, lab in data]
    tr, te = split_indices(labels, policy)
    if set(tr) & set(te):
        raise AssertionError("train and test splits overlap")
    if sorted(tr + te) != list(range(len(data))):
        raise AssertionError("split does not cover the dataset")
    train = [data[i] for i in tr]
    test = train if resubstitution else [data[i] for i in te]

    timings: dict = {}
    model = ensemble_train(train, config, timings=timings)
    predicted = [ensemble_predict(model, img, timings=timings).label for img, _ in test]
    stats = evaluate_predictions([lab for _, lab in test], predicted, model.classes)
    return EvaluationReport(
        dataset=dataset_name or "custom",
        train_count=policy.train_count,
        split_mode=policy.mode,
        seed=policy.seed,
        config=config.to_dict(),
        classes=[str(c) for c in model.classes],
        timings_ms={k: 1000 * v for k, v in sorted(timings.items())},
        **stats,
    )


def run_seeds(dataset: DatasetSpec | Sequence[Sample], train_count: int, seeds: Sequence[int],
              config: PipelineConfig | None = None,
              dataset_name: str | None = None) -> list[EvaluationReport]:
    """One seeded random split per seed; the dataset is loaded once."""
    if isinstance(dataset, DatasetSpec):
        dataset_name = dataset_name or dataset.name
        dataset = load_dataset(dataset)
    return [run_experiment(dataset, SplitPolicy(train_count, "random", s), config, dataset_name)
            for s in seeds]


def summarize(reports: Sequence[EvaluationReport]) -> dict:
    acc = [r.accuracy for r in reports]
    return {
        "runs": len(acc),
        "mean_accuracy": statistics.fmean(acc),
        "std_accuracy": statistics.stdev(acc) if len(acc) > 1 else 0.0,
        "total_rejections": sum(r.rejections for r in reports),
    }


CSV_COLUMNS = ("config_hash", "dataset", "train_count", "seed", "pca_k", "classifier", "scales",
               "accuracy", "rejections", "n_test", "transform_ms", "pca_ms", "classify_ms")


def export_report(reports: EvaluationReport | Sequence[EvaluationReport], path,
                  fmt: str = "csv") -> Path:
    """Write one CSV row or JSON line per report."""
    if isinstance(reports, EvaluationReport):
        reports = [reports]
    path = Path(path)
    if fmt == "csv":
        with path.open("w", newline="") as fh:
            writer = csv.DictWriter(fh, fieldnames=CSV_COLUMNS, lineterminator="\n")
            writer.writeheader()
            for r in reports:
                writer.writerow(r.to_row())
    elif fmt in ("jsonl", "json-lines"):
        with path.open("w") as fh:
            for r in reports:
                fh.write(json.dumps(r.to_json(), sort_keys=True) + "\n")
    else:
        raise ValueError(f"unknown report format {fmt!r}")
    return path


# --- timing -----------------------------------------------------------------

def bench_fft(size: int = 256, runs: int = 20, num_scales: int = 4, angles_coarse: int = 8,
              seed: int = 0) -> dict:
    """Median wall time of the forward transform against one 2-D FFT of the same image."""
    x = np.random.default_rng(seed).uniform(0, 255, (size, size))
    windows = build_windows(size, size, num_scales, angles_coarse)
    np.fft.fft2(x)
    fdct_forward(x, windows)

    def median_time(fn):
        times = []
        for _ in range(runs):
            t0 = time.perf_counter()
            fn()
            times.append(time.perf_counter() - t0)
        return statistics.median(times)

    t_fft = median_time(lambda: np.fft.fft2(x))
    t_fdct = median_time(lambda: fdct_forward(x, windows))
    return {"size": size, "runs": runs, "fft_ms": 1000 * t_fft, "fdct_ms": 1000 * t_fdct,
            "ratio": t_fdct / t_fft}
