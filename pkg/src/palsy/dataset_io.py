"""Cohort file formats, record validation, and seeded synthetic cohorts.

A cohort row is one face: 68 landmark coordinates in image pixels, the face
bounding box, and the diagnosis label.  CSV is the canonical format, JSON the
secondary one.  Coordinates are serialized with 9 significant digits, so a
save/load round trip is bit-exact for any cohort whose coordinates already
carry at most 9 significant digits (the synthetic generator emits such
coordinates).
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass
from enum import Enum
from pathlib import Path

import numpy as np

from palsy import landmarks as lm
from palsy.errors import (
    DegenerateFaceBox,
    IoFailure,
    MalformedRecord,
    NonFiniteCoordinate,
    WrongLandmarkCount,
)


class Diagnosis(Enum):
    PERIPHERAL = "P"
    CENTRAL = "C"
    HEALTHY = "H"

    @property
    def code(self) -> int:
        """Fixed class order used for every tie-break: P < C < H."""
        return _CODES[self]

    @classmethod
    def from_code(cls, code: int) -> "Diagnosis":
        return CLASS_ORDER[code]

    @classmethod
    def parse(cls, text: str) -> "Diagnosis":
        try:
            return cls(text.strip().upper())
        except ValueError:
            raise ValueError(f"unknown diagnosis label {text!r}") from None


CLASS_ORDER = (Diagnosis.PERIPHERAL, Diagnosis.CENTRAL, Diagnosis.HEALTHY)
_CODES = {d: i for i, d in enumerate(CLASS_ORDER)}
CLASS_LABELS = tuple(d.value for d in CLASS_ORDER)

SOURCES = ("manual", "auto")


@dataclass(frozen=True)
class FaceBox:
    """Axis-aligned bounding box, top-left (x1, y1) to bottom-right (x2, y2)."""

    x1: float
    y1: float
    x2: float
    y2: float

    def __post_init__(self):
        vals = (self.x1, self.y1, self.x2, self.y2)
        if not all(math.isfinite(v) for v in vals):
            raise DegenerateFaceBox(f"non-finite face box {vals}")
        if not (self.x2 > self.x1 and self.y2 > self.y1):
            raise DegenerateFaceBox(f"face box has non-positive extent {vals}")

    @property
    def width(self) -> float:
        return self.x2 - self.x1

    @property
    def height(self) -> float:
        return self.y2 - self.y1


@dataclass(frozen=True, eq=False)
class RawSample:
    """One ingested face: 68 pixel-space landmarks, face box, and label."""

    id: str
    landmarks: np.ndarray  # (68, 2) float64
    face_box: FaceBox
    label: Diagnosis
    source: str = "manual"

    def __post_init__(self):
        pts = np.asarray(self.landmarks, dtype=np.float64)
        if pts.shape != (lm.N_LANDMARKS, 2):
            raise WrongLandmarkCount(-1, pts.shape[0] if pts.ndim == 2 else -1)
        if not np.isfinite(pts).all():
            raise NonFiniteCoordinate(-1, f"landmarks of sample {self.id!r}")
        if self.source not in SOURCES:
            raise ValueError(f"landmark source must be one of {SOURCES}, got {self.source!r}")
        pts = pts.copy()
        pts.flags.writeable = False
        object.__setattr__(self, "landmarks", pts)

    def __eq__(self, other):
        if not isinstance(other, RawSample):
            return NotImplemented
        return (
            self.id == other.id
            and self.label is other.label
            and self.source == other.source
            and self.face_box == other.face_box
            and np.array_equal(self.landmarks, other.landmarks)
        )


@dataclass(frozen=True, eq=False)
class Cohort:
    samples: tuple[RawSample, ...]
    provenance: str = ""

    def __post_init__(self):
        object.__setattr__(self, "samples", tuple(self.samples))
        ids = [s.id for s in self.samples]
        if len(set(ids)) != len(ids):
            dupes = sorted({i for i in ids if ids.count(i) > 1})
            raise MalformedRecord(-1, f"duplicate sample ids {dupes}")

    def __len__(self) -> int:
        return len(self.samples)

    def __iter__(self):
        return iter(self.samples)

    def __eq__(self, other):
        if not isinstance(other, Cohort):
            return NotImplemented
        return self.samples == other.samples

    def class_counts(self) -> dict[Diagnosis, int]:
        counts = {d: 0 for d in CLASS_ORDER}
        for s in self.samples:
            counts[s.label] += 1
        return counts


# ---------------------------------------------------------------------------
# file formats


def _fmt(v: float) -> str:
    return format(float(v), ".9g")


def _round9(v: float) -> float:
    """Nearest float representable with 9 significant decimal digits."""
    return float(_fmt(v))


CSV_HEADER = (
    ["id", "label", "box_x1", "box_y1", "box_x2", "box_y2"]
    + [f"{axis}{i}" for i in range(1, lm.N_LANDMARKS + 1) for axis in ("x", "y")]
    + ["source"]
)


def _infer_format(path, format: str | None) -> str:
    if format:
        fmt = format.strip().lower()
    else:
        fmt = Path(path).suffix.lstrip(".").lower() or "csv"
    if fmt not in ("csv", "json"):
        raise IoFailure(f"unsupported cohort format {format!r}")
    return fmt


def _sample_from_fields(row_idx: int, fields: dict) -> RawSample:
    def fval(name):
        raw = fields[name]
        try:
            v = float(raw)
        except (TypeError, ValueError):
            raise MalformedRecord(row_idx, f"cannot parse {name}={raw!r} as a number") from None
        if not math.isfinite(v):
            raise NonFiniteCoordinate(row_idx, name)
        return v

    sid = str(fields["id"]).strip()
    if not sid:
        raise MalformedRecord(row_idx, "empty sample id")
    try:
        label = Diagnosis.parse(str(fields["label"]))
    except ValueError as e:
        raise MalformedRecord(row_idx, str(e)) from None
    source = str(fields.get("source", "manual")).strip().lower()
    if source not in SOURCES:
        raise MalformedRecord(row_idx, f"unknown landmark source {source!r}")
    try:
        box = FaceBox(fval("box_x1"), fval("box_y1"), fval("box_x2"), fval("box_y2"))
    except DegenerateFaceBox as e:
        raise DegenerateFaceBox(f"row {row_idx}: {e}") from None
    pts = np.empty((lm.N_LANDMARKS, 2))
    for i in range(lm.N_LANDMARKS):
        pts[i, 0] = fval(f"x{i + 1}")
        pts[i, 1] = fval(f"y{i + 1}")
    return RawSample(id=sid, landmarks=pts, face_box=box, label=label, source=source)


def load_cohort(path, format: str | None = None, column_order: list[str] | None = None) -> Cohort:
    """Load a cohort file, validating every record.

    ``column_order`` is an adapter hook for CSV files whose columns are
    arranged differently from :data:`CSV_HEADER`; it names the file's columns
    in file order using the canonical names.
    """
    fmt = _infer_format(path, format)
    path = Path(path)
    if not path.exists():
        raise IoFailure(f"cohort file not found: {path}")
    samples = []
    if fmt == "csv":
        header = column_order or CSV_HEADER
        with open(path, newline="") as fh:
            reader = csv.reader(fh)
            try:
                first = next(reader)
            except StopIteration:
                raise MalformedRecord(0, "missing header row") from None
            if [c.strip() for c in first] != list(header):
                raise MalformedRecord(0, "unexpected CSV header")
            for row_idx, row in enumerate(reader, start=1):
                if not row:
                    continue
                if len(row) != len(header):
                    extra = len(row) - (len(header) - 2 * lm.N_LANDMARKS)
                    if extra >= 0 and extra % 2 == 0:
                        raise WrongLandmarkCount(row_idx, extra // 2)
                    raise MalformedRecord(row_idx, f"expected {len(header)} fields, found {len(row)}")
                samples.append(_sample_from_fields(row_idx, dict(zip(header, row))))
    else:
        try:
            with open(path) as fh:
                records = json.load(fh)
        except json.JSONDecodeError as e:
            raise MalformedRecord(0, f"invalid JSON: {e}") from None
        if not isinstance(records, list):
            raise MalformedRecord(0, "top-level JSON value must be an array")
        for row_idx, rec in enumerate(records, start=1):
            if not isinstance(rec, dict):
                raise MalformedRecord(row_idx, "record is not an object")
            pts = rec.get("landmarks")
            if not isinstance(pts, list) or len(pts) != lm.N_LANDMARKS:
                raise WrongLandmarkCount(row_idx, len(pts) if isinstance(pts, list) else 0)
            fields = {k: rec.get(k) for k in ("id", "label", "box_x1", "box_y1", "box_x2", "box_y2", "source")}
            if fields["source"] is None:
                fields["source"] = "manual"
            for i, pair in enumerate(pts):
                if not isinstance(pair, list) or len(pair) != 2:
                    raise MalformedRecord(row_idx, f"landmark {i + 1} is not an [x, y] pair")
                fields[f"x{i + 1}"], fields[f"y{i + 1}"] = pair
            samples.append(_sample_from_fields(row_idx, fields))
    return Cohort(tuple(samples), provenance=str(path))


def save_cohort(cohort: Cohort, path, format: str | None = None) -> None:
    """Write a cohort; coordinates carry 9 significant digits."""
    fmt = _infer_format(path, format)
    try:
        if fmt == "csv":
            with open(path, "w", newline="") as fh:
                writer = csv.writer(fh)
                writer.writerow(CSV_HEADER)
                for s in cohort:
                    row = [s.id, s.label.value]
                    row += [_fmt(v) for v in (s.face_box.x1, s.face_box.y1, s.face_box.x2, s.face_box.y2)]
                    row += [_fmt(v) for v in s.landmarks.ravel()]
                    row.append(s.source)
                    writer.writerow(row)
        else:
            records = []
            for s in cohort:
                records.append(
                    {
                        "id": s.id,
                        "label": s.label.value,
                        "box_x1": _round9(s.face_box.x1),
                        "box_y1": _round9(s.face_box.y1),
                        "box_x2": _round9(s.face_box.x2),
                        "box_y2": _round9(s.face_box.y2),
                        "landmarks": [[_round9(x), _round9(y)] for x, y in s.landmarks],
                        "source": s.source,
                    }
                )
            with open(path, "w") as fh:
                json.dump(records, fh, indent=1)
                fh.write("\n")
    except OSError as e:
        raise IoFailure(f"cannot write cohort to {path}: {e}") from e


# ---------------------------------------------------------------------------
# synthetic cohorts
#
# The template face lives on a 1/1024 grid so that mirrored coordinate
# differences are exact in float64; the symmetry tests in the feature catalog
# rely on that.  Group sums on the x axis are chosen divisible by the group
# size (eyes: 6, brows: 5) so centroids stay on exact grid points too.

_TEMPLATE_LEFT = {
    1: (82, 358), 2: (90, 446), 3: (113, 532), 4: (150, 612), 5: (203, 684),
    6: (271, 745), 7: (352, 793), 8: (434, 836), 9: (512, 858),
    18: (174, 287), 19: (233, 261), 20: (292, 251), 21: (351, 256), 22: (410, 265),
    28: (512, 348), 29: (512, 398), 30: (512, 448), 31: (512, 498),
    32: (446, 560), 33: (478, 576), 34: (512, 584),
    37: (225, 369), 38: (276, 353), 39: (338, 353), 40: (389, 369),
    41: (338, 394), 42: (276, 394),
    49: (368, 678), 50: (420, 655), 51: (472, 645), 52: (512, 650),
    58: (512, 723), 59: (472, 719), 60: (420, 707),
    61: (404, 678), 62: (458, 668), 63: (512, 664),
    67: (512, 692), 68: (458, 688),
}

_GRID = 1024


def symmetric_template() -> np.ndarray:
    """A perfectly left/right symmetric face, coordinates in [0, 1]."""
    grid = np.zeros((lm.N_LANDMARKS, 2), dtype=np.int64)
    for num, (x, y) in _TEMPLATE_LEFT.items():
        grid[num - 1] = (x, y)
    for num in range(1, lm.N_LANDMARKS + 1):
        if num not in _TEMPLATE_LEFT:
            partner = lm.MIRROR[num]
            px, py = _TEMPLATE_LEFT[partner]
            grid[num - 1] = (_GRID - px, py)
    return grid.astype(np.float64) / _GRID


def _droop_mouth(pts: np.ndarray, left_side: bool, d: float) -> None:
    if left_side:
        corner, tops, bots, icorner, iadj = 49, (50, 51), (60, 59), 61, (62, 68)
        pull = d * 0.3
    else:
        corner, tops, bots, icorner, iadj = 55, (54, 53), (56, 57), 65, (64, 66)
        pull = -d * 0.3
    pts[corner - 1, 1] += 1.2 * d
    pts[corner - 1, 0] += pull
    pts[tops[0] - 1, 1] += 0.8 * d
    pts[tops[1] - 1, 1] += 0.5 * d
    pts[bots[0] - 1, 1] += 0.9 * d
    pts[bots[1] - 1, 1] += 0.6 * d
    pts[icorner - 1, 1] += 1.0 * d
    for j in iadj:
        pts[j - 1, 1] += 0.6 * d


def _droop_upper_face(pts: np.ndarray, left_side: bool, d: float) -> None:
    brow = lm.LEFT_BROW if left_side else lm.RIGHT_BROW
    weights = (1.0, 0.9, 0.8, 0.7, 0.6) if left_side else (0.6, 0.7, 0.8, 0.9, 1.0)
    for num, w in zip(brow, weights):
        pts[num - 1, 1] += w * d
    upper = (38, 39) if left_side else (44, 45)
    lower = (41, 42) if left_side else (47, 48)
    corners = (37, 40) if left_side else (43, 46)
    for num in upper:
        pts[num - 1, 1] += 0.35 * d
    for num in lower:
        pts[num - 1, 1] -= 0.15 * d
    for num in corners:
        pts[num - 1, 1] += 0.2 * d


def _synth_sample(sid: str, label: Diagnosis, rng: np.random.Generator) -> RawSample:
    pts = symmetric_template().copy()
    left_side = bool(rng.integers(0, 2))
    severity = rng.uniform(0.5, 1.0)
    if label is Diagnosis.PERIPHERAL:
        _droop_upper_face(pts, left_side, 0.055 * severity)
        _droop_mouth(pts, left_side, 0.055 * severity)
    elif label is Diagnosis.CENTRAL:
        _droop_mouth(pts, left_side, 0.05 * severity)
    pts += rng.normal(0.0, 0.004, size=pts.shape)

    # small in-plane head tilt about the template centre
    phi = rng.uniform(-0.08, 0.08)
    c, s = math.cos(phi), math.sin(phi)
    centered = pts - 0.5
    pts = np.column_stack(
        (centered[:, 0] * c - centered[:, 1] * s, centered[:, 0] * s + centered[:, 1] * c)
    ) + 0.5

    ox, oy = rng.uniform(0.0, 300.0, size=2)
    w, h = rng.uniform(640.0, 1024.0, size=2)
    px = ox + (0.10 + 0.80 * pts[:, 0]) * w
    py = oy + (0.10 + 0.80 * pts[:, 1]) * h
    coords = np.column_stack((px, py))
    coords = np.vectorize(_round9)(coords)
    box = FaceBox(_round9(ox), _round9(oy), _round9(ox + w), _round9(oy + h))
    source = "auto" if label is Diagnosis.HEALTHY else "manual"
    return RawSample(id=sid, landmarks=coords, face_box=box, label=label, source=source)


def generate_synthetic_cohort(n_p: int, n_c: int, n_h: int, seed: int = 0) -> Cohort:
    """Seeded synthetic cohort with a learnable clinical signal.

    HEALTHY faces are symmetric templates plus jitter; PERIPHERAL faces droop
    one whole half-face (brow, eye, mouth); CENTRAL faces droop only the
    lower half on one side.  Deterministic for a fixed (counts, seed).
    """
    if min(n_p, n_c, n_h) < 0:
        raise ValueError("class counts must be non-negative")
    rng = np.random.default_rng(np.random.SeedSequence([0x70A15, int(seed)]))
    samples = []
    for label, count, prefix in (
        (Diagnosis.PERIPHERAL, n_p, "p"),
        (Diagnosis.CENTRAL, n_c, "c"),
        (Diagnosis.HEALTHY, n_h, "h"),
    ):
        for i in range(count):
            samples.append(_synth_sample(f"{prefix}{i + 1:04d}", label, rng))
    return Cohort(tuple(samples), provenance=f"synthetic:seed={seed}")
