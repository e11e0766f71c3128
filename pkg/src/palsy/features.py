"""The three dataset views: landmarks (136), no-chin (102), metrics (52).

The metric catalog is a versioned JSON file shipped with the package.  Each
entry is one of four formula kinds over 1-based landmark index specs (a spec
of several indices means the centroid of those landmarks):

- DISTANCE_RATIO: product of mean distances over the ``num`` groups divided
  by the same over ``den``; left/right paired entries give 1.0 on a
  mirror-symmetric face.
- HEIGHT_DIFF_RATIO: y(left spec) - y(right spec); 0.0 on a symmetric face.
- SLOPE: sum of ordinary-least-squares slopes of the point groups; paired
  entries hold one group per side and give 0.0 on a symmetric face.
- AREA_RATIO: shoelace polygon area of ``num`` over ``den``; 1.0 when
  symmetric.

Ratio denominators below 1e-9 (1e-12 for slope denominators, which are
squared x-spreads) yield the sentinel +/-1e9 instead of raising mid-batch;
the event is logged.
"""

from __future__ import annotations

import csv
import json
import logging
from dataclasses import dataclass
from enum import Enum
from importlib import resources
from pathlib import Path

import numpy as np

from palsy import landmarks as lm
from palsy.dataset_io import CLASS_ORDER, Diagnosis
from palsy.errors import DegenerateMetric, EmptyInput, IoFailure, MalformedRecord
from palsy.preprocess import ProcessedSample

log = logging.getLogger(__name__)

RATIO_GUARD = 1e-9
SLOPE_GUARD = 1e-12
SENTINEL = 1e9

KINDS = ("DISTANCE_RATIO", "HEIGHT_DIFF_RATIO", "SLOPE", "AREA_RATIO")


class View(Enum):
    LANDMARKS = "landmarks"
    NO_CHIN = "nochin"
    METRICS = "metrics"


VIEW_WIDTHS = {View.LANDMARKS: 136, View.NO_CHIN: 102, View.METRICS: 52}


@dataclass(frozen=True, eq=False)
class FeatureMatrix:
    view: View
    rows: np.ndarray  # (n, f) float64
    labels: np.ndarray  # (n,) int64 class codes, order P < C < H
    feature_names: tuple[str, ...]
    sample_ids: tuple[str, ...]

    def __post_init__(self):
        rows = np.asarray(self.rows, dtype=np.float64)
        labels = np.asarray(self.labels, dtype=np.int64)
        if rows.ndim != 2 or rows.shape[1] != VIEW_WIDTHS[self.view]:
            raise ValueError(f"{self.view.value} view must have {VIEW_WIDTHS[self.view]} features, got {rows.shape}")
        if not np.isfinite(rows).all():
            raise ValueError("feature matrix contains non-finite entries")
        if labels.shape != (rows.shape[0],):
            raise ValueError("labels length must match row count")
        if len(self.feature_names) != rows.shape[1] or len(self.sample_ids) != rows.shape[0]:
            raise ValueError("feature_names/sample_ids do not match matrix shape")
        rows = rows.copy()
        rows.flags.writeable = False
        labels = labels.copy()
        labels.flags.writeable = False
        object.__setattr__(self, "rows", rows)
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "feature_names", tuple(self.feature_names))
        object.__setattr__(self, "sample_ids", tuple(self.sample_ids))

    @property
    def n(self) -> int:
        return self.rows.shape[0]

    @property
    def f(self) -> int:
        return self.rows.shape[1]

    def subset(self, indices) -> "FeatureMatrix":
        indices = np.asarray(indices)
        return FeatureMatrix(
            view=self.view,
            rows=self.rows[indices],
            labels=self.labels[indices],
            feature_names=self.feature_names,
            sample_ids=tuple(self.sample_ids[i] for i in indices),
        )

    def diagnoses(self) -> list[Diagnosis]:
        return [CLASS_ORDER[c] for c in self.labels]


def _stack(samples: list[ProcessedSample]) -> tuple[np.ndarray, np.ndarray, tuple[str, ...]]:
    if not samples:
        raise EmptyInput("no samples to featurize")
    pts = np.stack([s.landmarks for s in samples])
    labels = np.array([s.label.code for s in samples], dtype=np.int64)
    ids = tuple(s.id for s in samples)
    return pts, labels, ids


def landmark_feature_names(start: int = 1) -> tuple[str, ...]:
    return tuple(f"{axis}{i}" for i in range(start, lm.N_LANDMARKS + 1) for axis in ("x", "y"))


def to_landmarks_view(samples: list[ProcessedSample]) -> FeatureMatrix:
    """Row i = (x1, y1, ..., x68, y68) of sample i."""
    pts, labels, ids = _stack(samples)
    return FeatureMatrix(
        view=View.LANDMARKS,
        rows=pts.reshape(len(samples), -1),
        labels=labels,
        feature_names=landmark_feature_names(),
        sample_ids=ids,
    )


def to_no_chin_view(samples: list[ProcessedSample]) -> FeatureMatrix:
    """The landmarks view with the 17 chin landmarks (1-17) dropped."""
    pts, labels, ids = _stack(samples)
    return FeatureMatrix(
        view=View.NO_CHIN,
        rows=pts[:, 17:, :].reshape(len(samples), -1),
        labels=labels,
        feature_names=landmark_feature_names(start=18),
        sample_ids=ids,
    )


# ---------------------------------------------------------------------------
# metric catalog


@dataclass(frozen=True)
class MetricDef:
    name: str
    kind: str
    paired: bool
    payload: dict  # parsed, 0-based index arrays


@dataclass(frozen=True)
class MetricCatalog:
    version: str
    metrics: tuple[MetricDef, ...]

    def __len__(self) -> int:
        return len(self.metrics)

    def names(self) -> tuple[str, ...]:
        return tuple(m.name for m in self.metrics)


def _parse_spec(raw) -> np.ndarray:
    arr = np.asarray(raw, dtype=np.intp)
    if arr.ndim != 1 or arr.size == 0 or arr.min() < 1 or arr.max() > lm.N_LANDMARKS:
        raise DegenerateMetric(f"bad landmark spec {raw!r}")
    return arr - 1


def _parse_metric(raw: dict) -> MetricDef:
    kind = raw.get("kind")
    if kind not in KINDS:
        raise DegenerateMetric(f"unknown metric kind {kind!r}")
    name = raw["name"]
    paired = bool(raw.get("paired", False))
    if kind == "DISTANCE_RATIO":
        payload = {
            side: [[(_parse_spec(a), _parse_spec(b)) for a, b in group] for group in raw[side]]
            for side in ("num", "den")
        }
    elif kind == "HEIGHT_DIFF_RATIO":
        payload = {"left": _parse_spec(raw["left"]), "right": _parse_spec(raw["right"])}
    elif kind == "SLOPE":
        groups = [_parse_spec(gr) for gr in raw["groups"]]
        if any(g.size < 2 for g in groups):
            raise DegenerateMetric(f"slope group in {name!r} needs at least 2 points")
        payload = {"groups": groups}
    else:  # AREA_RATIO
        num, den = _parse_spec(raw["num"]), _parse_spec(raw["den"])
        if num.size < 3 or den.size < 3:
            raise DegenerateMetric(f"area loop in {name!r} needs at least 3 points")
        payload = {"num": num, "den": den}
    return MetricDef(name=name, kind=kind, paired=paired, payload=payload)


def load_catalog(path=None) -> MetricCatalog:
    """Load the metric catalog; defaults to the versioned file shipped with
    the package."""
    if path is None:
        text = resources.files("palsy").joinpath("data/metrics_catalog_v1.json").read_text()
    else:
        text = Path(path).read_text()
    raw = json.loads(text)
    metrics = tuple(_parse_metric(m) for m in raw["metrics"])
    names = [m.name for m in metrics]
    if len(set(names)) != len(names):
        raise DegenerateMetric("duplicate metric names in catalog")
    if len(metrics) != 52:
        raise DegenerateMetric(f"catalog must define 52 metrics, found {len(metrics)}")
    return MetricCatalog(version=str(raw["version"]), metrics=metrics)


_DEFAULT_CATALOG: MetricCatalog | None = None


def default_catalog() -> MetricCatalog:
    global _DEFAULT_CATALOG
    if _DEFAULT_CATALOG is None:
        _DEFAULT_CATALOG = load_catalog()
    return _DEFAULT_CATALOG


def _centroid(pts: np.ndarray, spec: np.ndarray) -> np.ndarray:
    return pts[spec].mean(axis=0)


def _distance(pts: np.ndarray, a: np.ndarray, b: np.ndarray) -> float:
    pa = _centroid(pts, a)
    pb = _centroid(pts, b)
    return float(np.hypot(pa[0] - pb[0], pa[1] - pb[1]))


def _guard_ratio(num: float, den: float, name: str, guard: float = RATIO_GUARD) -> float:
    if abs(den) < guard:
        log.warning("degenerate denominator in metric %s; substituting sentinel", name)
        return SENTINEL if num >= 0.0 else -SENTINEL
    return num / den


def ols_slope(xs: np.ndarray, ys: np.ndarray, name: str = "slope") -> float:
    """Least-squares slope via n*Sxy - Sx*Sy over n*Sxx - Sx^2.

    A (near-)vertical point set yields the signed sentinel instead of
    raising; the zero-covariance vertical case returns +1e9.
    """
    n = float(xs.size)
    sx = float(xs.sum())
    sy = float(ys.sum())
    sxy = float((xs * ys).sum())
    sxx = float((xs * xs).sum())
    num = n * sxy - sx * sy
    den = n * sxx - sx * sx
    return _guard_ratio(num, den, name, guard=SLOPE_GUARD)


def _shoelace(pts: np.ndarray, loop: np.ndarray) -> float:
    p = pts[loop]
    x = p[:, 0]
    y = p[:, 1]
    s = x * np.roll(y, -1) - np.roll(x, -1) * y
    return abs(float(s.sum())) / 2.0


def evaluate_metric(mdef: MetricDef, pts: np.ndarray) -> float:
    kind = mdef.kind
    if kind == "DISTANCE_RATIO":
        num = 1.0
        for group in mdef.payload["num"]:
            dists = [_distance(pts, a, b) for a, b in group]
            num *= sum(dists) / len(dists)
        den = 1.0
        for group in mdef.payload["den"]:
            dists = [_distance(pts, a, b) for a, b in group]
            den *= sum(dists) / len(dists)
        return _guard_ratio(num, den, mdef.name)
    if kind == "HEIGHT_DIFF_RATIO":
        return float(_centroid(pts, mdef.payload["left"])[1] - _centroid(pts, mdef.payload["right"])[1])
    if kind == "SLOPE":
        total = 0.0
        for group in mdef.payload["groups"]:
            total += ols_slope(pts[group, 0], pts[group, 1], mdef.name)
        return total
    # AREA_RATIO
    num = _shoelace(pts, mdef.payload["num"])
    den = _shoelace(pts, mdef.payload["den"])
    return _guard_ratio(num, den, mdef.name)


def compute_metrics(pts: np.ndarray, catalog: MetricCatalog | None = None) -> np.ndarray:
    catalog = catalog or default_catalog()
    return np.array([evaluate_metric(m, pts) for m in catalog.metrics])


def to_metrics_view(samples: list[ProcessedSample], catalog: MetricCatalog | None = None) -> FeatureMatrix:
    """Row i = the 52 catalog metrics of sample i, in catalog order."""
    catalog = catalog or default_catalog()
    pts, labels, ids = _stack(samples)
    rows = np.stack([compute_metrics(p, catalog) for p in pts])
    return FeatureMatrix(
        view=View.METRICS,
        rows=rows,
        labels=labels,
        feature_names=catalog.names(),
        sample_ids=ids,
    )


def metric_m4_slope(sample: ProcessedSample) -> float:
    """Slope of the least-squares line through the three leftmost points of
    the left brow (landmarks 18, 19, 20)."""
    i = lm.idx((18, 19, 20))
    return ols_slope(sample.landmarks[i, 0], sample.landmarks[i, 1], "M4")


def build_view(samples: list[ProcessedSample], view: View, catalog: MetricCatalog | None = None) -> FeatureMatrix:
    if view is View.LANDMARKS:
        return to_landmarks_view(samples)
    if view is View.NO_CHIN:
        return to_no_chin_view(samples)
    return to_metrics_view(samples, catalog)


# ---------------------------------------------------------------------------
# feature-matrix files


def save_feature_matrix(fm: FeatureMatrix, path) -> None:
    try:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["id", "label", *fm.feature_names])
            for sid, code, row in zip(fm.sample_ids, fm.labels, fm.rows):
                writer.writerow([sid, CLASS_ORDER[code].value, *(format(v, ".17g") for v in row)])
    except OSError as e:
        raise IoFailure(f"cannot write feature matrix to {path}: {e}") from e


def load_feature_matrix(path) -> FeatureMatrix:
    path = Path(path)
    if not path.exists():
        raise IoFailure(f"feature matrix file not found: {path}")
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if not header or header[:2] != ["id", "label"]:
            raise MalformedRecord(0, "feature CSV must start with id,label columns")
        names = tuple(header[2:])
        widths = {v: k for k, v in VIEW_WIDTHS.items()}
        if len(names) not in widths:
            raise MalformedRecord(0, f"unrecognized feature count {len(names)}")
        view = widths[len(names)]
        ids, labels, rows = [], [], []
        for row_idx, row in enumerate(reader, start=1):
            if not row:
                continue
            if len(row) != len(header):
                raise MalformedRecord(row_idx, f"expected {len(header)} fields, found {len(row)}")
            ids.append(row[0])
            try:
                labels.append(Diagnosis.parse(row[1]).code)
                rows.append([float(v) for v in row[2:]])
            except ValueError as e:
                raise MalformedRecord(row_idx, str(e)) from None
    if not rows:
        raise EmptyInput(f"feature matrix {path} has no data rows")
    return FeatureMatrix(
        view=view,
        rows=np.array(rows),
        labels=np.array(labels, dtype=np.int64),
        feature_names=names,
        sample_ids=tuple(ids),
    )
