"""LOOCV harness, accuracy and per-class sensitivity, confusion matrices.

Accuracy is the exact ratio of correct predictions times 100; sensitivity is
the per-class recall.  Confusion matrices store raw counts (rows =
predicted, columns = actual, both in P/C/H order) plus column-normalized
percentages; zero-count columns report ``None`` rather than dividing by
zero.  Values are only rounded to one decimal at the rendering boundary.
"""

from __future__ import annotations

import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from palsy.classifiers import forest_train, gnb_train, knn_fit, tree_train
from palsy.dataset_io import CLASS_LABELS, CLASS_ORDER
from palsy.errors import EmptyInput, FoldError, ZeroDenominator
from palsy.features import FeatureMatrix
from palsy.svm import KernelSpec, svm_train

N_CLASSES = len(CLASS_ORDER)


def accuracy(c: int, n: int) -> float:
    """Correct-prediction percentage c/n * 100 (exact, unrounded)."""
    if n <= 0:
        raise ZeroDenominator("accuracy needs n > 0")
    if not 0 <= c <= n:
        raise ValueError(f"need 0 <= c <= n, got c={c}, n={n}")
    return 100.0 * c / n


def sensitivity(c1: int, n1: int) -> float:
    """Per-class recall percentage c1/n1 * 100 (exact, unrounded)."""
    if n1 <= 0:
        raise ZeroDenominator("sensitivity needs n1 > 0")
    if not 0 <= c1 <= n1:
        raise ValueError(f"need 0 <= c1 <= n1, got c1={c1}, n1={n1}")
    return 100.0 * c1 / n1


@dataclass(frozen=True)
class ConfusionMatrix:
    """3x3 counts, rows = predicted, columns = actual, order P, C, H."""

    counts: np.ndarray

    def __post_init__(self):
        counts = np.asarray(self.counts, dtype=np.int64)
        if counts.shape != (N_CLASSES, N_CLASSES) or (counts < 0).any():
            raise ValueError("confusion matrix must be 3x3 non-negative counts")
        counts = counts.copy()
        counts.flags.writeable = False
        object.__setattr__(self, "counts", counts)

    @property
    def n(self) -> int:
        return int(self.counts.sum())

    def column_totals(self) -> np.ndarray:
        return self.counts.sum(axis=0)

    def column_percentages(self) -> list[list[float | None]]:
        totals = self.column_totals()
        out: list[list[float | None]] = []
        for r in range(N_CLASSES):
            row: list[float | None] = []
            for c in range(N_CLASSES):
                row.append(100.0 * self.counts[r, c] / totals[c] if totals[c] > 0 else None)
            out.append(row)
        return out

    def diagonal_sensitivities(self) -> list[float | None]:
        totals = self.column_totals()
        return [
            sensitivity(int(self.counts[k, k]), int(totals[k])) if totals[k] > 0 else None
            for k in range(N_CLASSES)
        ]


def confusion(preds: list[tuple[int, int]]) -> ConfusionMatrix:
    """Tally (actual, predicted) class-code pairs."""
    if not preds:
        raise EmptyInput("cannot tally an empty prediction list")
    counts = np.zeros((N_CLASSES, N_CLASSES), dtype=np.int64)
    for actual, predicted in preds:
        counts[predicted, actual] += 1
    return ConfusionMatrix(counts=counts)


def render_confusion(cm: ConfusionMatrix) -> str:
    """Text table in the predicted-rows / actual-columns layout."""
    perc = cm.column_percentages()
    lines = ["                     Actual"]
    lines.append("Diagnosis      " + "".join(f"{label:>9}" for label in CLASS_LABELS))
    for r, label in enumerate(CLASS_LABELS):
        prefix = "Predicted" if r == 0 else "         "
        cells = "".join(
            f"{'-':>9}" if perc[r][c] is None else f"{perc[r][c]:>8.1f}%" for c in range(N_CLASSES)
        )
        lines.append(f"{prefix} {label} " + cells)
    return "\n".join(lines) + "\n"


@dataclass(frozen=True)
class EvalResult:
    accuracy: float
    sensitivities: dict[str, float | None]
    confusion: ConfusionMatrix
    folds: tuple[tuple[str, str, str], ...]  # (id, actual, predicted) labels

    def to_dict(self) -> dict:
        return {
            "accuracy": self.accuracy,
            "sensitivity": self.sensitivities,
            "confusion": {
                "order": list(CLASS_LABELS),
                "counts": self.confusion.counts.tolist(),
                "column_percentages": self.confusion.column_percentages(),
            },
            "folds": [list(f) for f in self.folds],
        }

    def to_json(self, meta: dict | None = None) -> str:
        payload = self.to_dict()
        if meta:
            payload["meta"] = meta
        return json.dumps(payload, indent=2, sort_keys=True) + "\n"


@dataclass(frozen=True)
class Trainer:
    """A model family plus hyperparameters; LOOCV's unit of configuration."""

    family: str
    params: dict = field(default_factory=dict)

    def fit(self, data: FeatureMatrix, seed: int = 0):
        p = self.params
        if self.family == "gnb":
            return gnb_train(data)
        if self.family == "tree":
            return tree_train(data, max_depth=p.get("max_depth", 10), seed=seed)
        if self.family == "knn":
            return knn_fit(data, k=p.get("k", 5))
        if self.family == "forest":
            return forest_train(
                data,
                n_estimators=p.get("n_estimators", 100),
                max_depth=p.get("max_depth", 10),
                seed=seed,
            )
        if self.family == "svm":
            spec = p.get("spec") or KernelSpec(degree=p.get("degree", 4))
            return svm_train(
                data,
                spec,
                C=p.get("C", 1.0),
                balanced=p.get("balanced", True),
                seed=seed,
                tol=p.get("tol", 1e-3),
                max_passes=p.get("max_passes", 1000),
            )
        raise ValueError(f"unknown model family {self.family!r}")


def fold_seed(seed: int, fold: int) -> int:
    return int(np.random.SeedSequence([int(seed), int(fold)]).generate_state(1, np.uint64)[0])


def loocv(data: FeatureMatrix, trainer: Trainer, seed: int = 0, threads: int = 1) -> EvalResult:
    """Leave-one-out cross-validation: fold i trains on all rows but i.

    Per-fold seeds derive from (seed, fold index); folds may run on a thread
    pool, with results assembled in fold order either way.
    """
    n = data.n
    if n < 2:
        raise EmptyInput("LOOCV needs at least 2 samples")
    if len(np.unique(data.labels)) < 2:
        raise ValueError("LOOCV needs at least 2 classes present")
    everything = np.arange(n)

    def run_fold(i: int) -> int:
        try:
            train = data.subset(np.delete(everything, i))
            model = trainer.fit(train, seed=fold_seed(seed, i))
            return int(model.predict(data.rows[i].reshape(1, -1))[0])
        except FoldError:
            raise
        except Exception as e:
            raise FoldError(i, e) from e

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            predictions = list(pool.map(run_fold, range(n)))
    else:
        predictions = [run_fold(i) for i in range(n)]

    pairs = [(int(data.labels[i]), predictions[i]) for i in range(n)]
    cm = confusion(pairs)
    correct = sum(1 for a, p in pairs if a == p)
    sens = {
        CLASS_LABELS[k]: v for k, v in enumerate(cm.diagonal_sensitivities())
    }
    folds = tuple(
        (data.sample_ids[i], CLASS_ORDER[data.labels[i]].value, CLASS_ORDER[predictions[i]].value)
        for i in range(n)
    )
    return EvalResult(accuracy=accuracy(correct, n), sensitivities=sens, confusion=cm, folds=folds)
