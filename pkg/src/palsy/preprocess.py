"""Five-step geometric normalization of raw landmark samples.

Steps, in order: crop to the face box, resize to the 900x900 canonical
frame, rotate so both eye centres share a horizontal line, clamp stray
landmarks back into the frame, and scale coordinates into [0, 1].  Only
coordinates are transformed; no pixels are touched.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from palsy import landmarks as lm
from palsy.dataset_io import Cohort, Diagnosis, FaceBox, RawSample, _fmt  # noqa: F401
from palsy.errors import CoincidentEyeCenters, DegenerateFaceBox, IoFailure, MalformedRecord

CANVAS = 900.0
#: rotation centre: middle of the canonical frame
CENTER = (450.0, 450.0)
DEFAULT_EXCLUSION_THRESHOLD = 20


@dataclass(frozen=True, eq=False)
class ProcessedSample:
    """Normalized landmarks in [0, 1]^2 plus pipeline bookkeeping."""

    id: str
    landmarks: np.ndarray  # (68, 2) float64 in [0, 1]
    label: Diagnosis
    rotation_applied: float = 0.0
    clamp_count: int = 0
    source: str = "manual"

    def __post_init__(self):
        pts = np.asarray(self.landmarks, dtype=np.float64)
        if pts.shape != (lm.N_LANDMARKS, 2):
            raise ValueError(f"expected (68, 2) landmarks, got {pts.shape}")
        if not np.isfinite(pts).all():
            raise ValueError(f"non-finite landmark in sample {self.id!r}")
        if pts.min() < 0.0 or pts.max() > 1.0:
            raise ValueError(f"sample {self.id!r} has coordinates outside [0, 1]")
        pts = pts.copy()
        pts.flags.writeable = False
        object.__setattr__(self, "landmarks", pts)

    def __eq__(self, other):
        if not isinstance(other, ProcessedSample):
            return NotImplemented
        return (
            self.id == other.id
            and self.label is other.label
            and self.source == other.source
            and self.rotation_applied == other.rotation_applied
            and self.clamp_count == other.clamp_count
            and np.array_equal(self.landmarks, other.landmarks)
        )


@dataclass
class PipelineReport:
    """Exclusions and per-sample clamp counts for one pipeline run."""

    excluded: list[tuple[str, str]] = field(default_factory=list)  # (id, reason)
    clamp_counts: dict[str, int] = field(default_factory=dict)

    @property
    def excluded_ids(self) -> list[str]:
        return [sid for sid, _ in self.excluded]

    def to_dict(self) -> dict:
        return {
            "excluded": [{"id": sid, "reason": reason} for sid, reason in self.excluded],
            "clamp_counts": dict(self.clamp_counts),
        }


def _replace_landmarks(sample: RawSample, pts: np.ndarray, box: FaceBox) -> RawSample:
    return RawSample(id=sample.id, landmarks=pts, face_box=box, label=sample.label, source=sample.source)


def crop_to_face_box(sample: RawSample) -> RawSample:
    """Re-express coordinates relative to the face-box origin."""
    box = sample.face_box
    pts = sample.landmarks - np.array([box.x1, box.y1])
    return _replace_landmarks(sample, pts, FaceBox(0.0, 0.0, box.width, box.height))


def resize_to_canonical(sample: RawSample) -> RawSample:
    """Scale a cropped sample onto the 900x900 frame (x and y independently)."""
    box = sample.face_box
    if box.x1 != 0.0 or box.y1 != 0.0:
        raise DegenerateFaceBox("resize expects a cropped sample with box origin at (0, 0)")
    pts = sample.landmarks * np.array([CANVAS / box.width, CANVAS / box.height])
    return _replace_landmarks(sample, pts, FaceBox(0.0, 0.0, CANVAS, CANVAS))


def eye_centers(points: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    left = points[lm.idx(lm.LEFT_EYE)].mean(axis=0)
    right = points[lm.idx(lm.RIGHT_EYE)].mean(axis=0)
    return left, right


def rotate_to_level_eyes(sample: RawSample) -> tuple[RawSample, float]:
    """Rotate all landmarks about the frame centre until the eye centres
    share a y value.  Returns the sample and the applied angle (radians)."""
    left, right = eye_centers(sample.landmarks)
    dx = right[0] - left[0]
    dy = right[1] - left[1]
    if math.hypot(dx, dy) < 1e-12:
        raise CoincidentEyeCenters(f"sample {sample.id!r}: eye centres coincide")
    theta = math.atan2(dy, dx)
    pts = rotate_points(sample.landmarks, -theta, CENTER)
    return _replace_landmarks(sample, pts, sample.face_box), -theta


def rotate_points(points: np.ndarray, angle: float, center: tuple[float, float]) -> np.ndarray:
    c, s = math.cos(angle), math.sin(angle)
    rel = points - np.asarray(center)
    return np.column_stack(
        (rel[:, 0] * c - rel[:, 1] * s, rel[:, 0] * s + rel[:, 1] * c)
    ) + np.asarray(center)


def count_out_of_box(points: np.ndarray) -> int:
    outside = (points < 0.0) | (points > CANVAS)
    return int(outside.any(axis=1).sum())


def clamp_to_face_box(sample: RawSample) -> tuple[RawSample, int]:
    """Move stray landmarks to the nearest point inside the frame.

    For an axis-aligned box the nearest point under Euclidean distance is the
    per-axis clamp.  Returns the sample and the number of landmarks moved.
    """
    pts = np.clip(sample.landmarks, 0.0, CANVAS)
    moved = int((pts != sample.landmarks).any(axis=1).sum())
    return _replace_landmarks(sample, pts, sample.face_box), moved


def normalize(sample: RawSample, rotation_applied: float = 0.0, clamp_count: int = 0) -> ProcessedSample:
    """Scale a clamped canonical sample into the unit square."""
    return ProcessedSample(
        id=sample.id,
        landmarks=sample.landmarks / CANVAS,
        label=sample.label,
        rotation_applied=rotation_applied,
        clamp_count=clamp_count,
        source=sample.source,
    )


def process_sample(sample: RawSample, exclusion_threshold: int = DEFAULT_EXCLUSION_THRESHOLD) -> tuple[ProcessedSample, int]:
    """Run all five steps on one sample.

    Raises ValueError when the sample exceeds the out-of-box exclusion
    threshold (measured after rotation, before clamping).
    """
    cropped = crop_to_face_box(sample)
    canonical = resize_to_canonical(cropped)
    rotated, angle = rotate_to_level_eyes(canonical)
    stray = count_out_of_box(rotated.landmarks)
    if stray > exclusion_threshold:
        raise ValueError(f"{stray} landmarks outside the face box after rotation")
    clamped, moved = clamp_to_face_box(rotated)
    return normalize(clamped, rotation_applied=angle, clamp_count=moved), stray


def run_pipeline(
    cohort: Cohort, exclusion_threshold: int = DEFAULT_EXCLUSION_THRESHOLD
) -> tuple[list[ProcessedSample], PipelineReport]:
    """Process a whole cohort; per-sample failures become exclusions."""
    report = PipelineReport()
    out: list[ProcessedSample] = []
    for sample in cohort:
        try:
            processed, _ = process_sample(sample, exclusion_threshold)
        except Exception as e:  # noqa: BLE001 - any bad sample is an exclusion
            report.excluded.append((sample.id, str(e)))
            continue
        report.clamp_counts[processed.id] = processed.clamp_count
        out.append(processed)
    return out, report


# ---------------------------------------------------------------------------
# processed-cohort files: the raw schema plus rotation/clamp columns

PROCESSED_HEADER = (
    ["id", "label", "box_x1", "box_y1", "box_x2", "box_y2"]
    + [f"{axis}{i}" for i in range(1, lm.N_LANDMARKS + 1) for axis in ("x", "y")]
    + ["source", "rotation_applied", "clamp_count"]
)


def save_processed(samples: list[ProcessedSample], path) -> None:
    try:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(PROCESSED_HEADER)
            for s in samples:
                row = [s.id, s.label.value, "0", "0", "1", "1"]
                row += [_fmt(v) for v in s.landmarks.ravel()]
                row += [s.source, format(s.rotation_applied, ".17g"), str(s.clamp_count)]
                writer.writerow(row)
    except OSError as e:
        raise IoFailure(f"cannot write processed cohort to {path}: {e}") from e


def load_processed(path) -> list[ProcessedSample]:
    path = Path(path)
    if not path.exists():
        raise IoFailure(f"processed cohort file not found: {path}")
    out = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != PROCESSED_HEADER:
            raise MalformedRecord(0, "unexpected processed-cohort header")
        for row_idx, row in enumerate(reader, start=1):
            if not row:
                continue
            if len(row) != len(PROCESSED_HEADER):
                raise MalformedRecord(row_idx, f"expected {len(PROCESSED_HEADER)} fields, found {len(row)}")
            rec = dict(zip(PROCESSED_HEADER, row))
            try:
                pts = np.array(
                    [[float(rec[f"x{i}"]), float(rec[f"y{i}"])] for i in range(1, lm.N_LANDMARKS + 1)]
                )
                out.append(
                    ProcessedSample(
                        id=rec["id"],
                        landmarks=pts,
                        label=Diagnosis.parse(rec["label"]),
                        rotation_applied=float(rec["rotation_applied"]),
                        clamp_count=int(rec["clamp_count"]),
                        source=rec["source"],
                    )
                )
            except (ValueError, KeyError) as e:
                raise MalformedRecord(row_idx, str(e)) from None
    return out


def save_report(report: PipelineReport, path, meta: dict | None = None) -> None:
    payload = report.to_dict()
    if meta:
        payload["meta"] = meta
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")
