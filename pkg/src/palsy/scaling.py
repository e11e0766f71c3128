"""Dataset-size scaling: stratified removal, LOOCV series, curve fit.

Samples are removed one at a time following a repeating 10-step class
pattern holding 5 peripheral, 3 central, and 2 healthy removals.  When the
pattern asks for a class that is down to its last sample, the largest
remaining class is substituted, so no class is ever emptied.  Performance
versus size is then fitted with y = 1 - A*exp(B*x), which the reporting
layer can re-express as y = 1 - a*exp(b*(x - c)) for any chosen c (the
3-coefficient form is over-parameterized; only A and B are identifiable).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from palsy.dataset_io import CLASS_LABELS, CLASS_ORDER
from palsy.errors import DegenerateSeries, EmptyInput, InfeasibleFloor, TargetUnreachable
from palsy.evaluation import Trainer, loocv
from palsy.features import FeatureMatrix

#: class codes removed per 10-step window: 5 P, 3 C, 2 H, interleaved
REMOVAL_PATTERN = (0, 1, 0, 2, 1, 0, 1, 0, 2, 0)


@dataclass(frozen=True)
class RemovalSchedule:
    removals: tuple[int, ...]  # class codes, in removal order
    start_counts: tuple[int, int, int]
    floor: int
    seed: int

    def __len__(self) -> int:
        return len(self.removals)

    def counts_after(self, k: int) -> tuple[int, int, int]:
        remaining = list(self.start_counts)
        for code in self.removals[:k]:
            remaining[code] -= 1
        return tuple(remaining)


def build_schedule(class_counts, floor: int, seed: int = 0) -> RemovalSchedule:
    """Plan which class loses a sample at each step, down to ``floor``."""
    counts = tuple(int(c) for c in class_counts)
    n = sum(counts)
    if floor < 3 or floor >= n:
        raise InfeasibleFloor(f"floor must satisfy 3 <= floor < {n}, got {floor}")
    remaining = list(counts)
    removals = []
    for step in range(n - floor):
        code = REMOVAL_PATTERN[step % len(REMOVAL_PATTERN)]
        if remaining[code] <= 1:
            # never remove the last sample of a class; take from the
            # largest remaining class instead (ties: class order)
            code = int(np.argmax(remaining))
            if remaining[code] <= 1:
                raise InfeasibleFloor("no class has more than one sample left")
        remaining[code] -= 1
        removals.append(code)
    return RemovalSchedule(removals=tuple(removals), start_counts=counts, floor=floor, seed=seed)


@dataclass(frozen=True)
class ScalingSeries:
    points: tuple[tuple[int, float, float], ...]  # (size, accuracy %, central sensitivity %)

    def sizes(self) -> list[int]:
        return [p[0] for p in self.points]

    def to_rows(self) -> list[list]:
        return [[size, acc, sens] for size, acc, sens in self.points]


def run_scaling(
    data: FeatureMatrix,
    trainer: Trainer,
    schedule: RemovalSchedule,
    stride: int = 1,
    seed: int = 0,
    threads: int = 1,
) -> ScalingSeries:
    """LOOCV the shrinking dataset; record (size, accuracy, central
    sensitivity) at the full size and after every ``stride`` removals."""
    if stride < 1:
        raise ValueError("stride must be >= 1")
    if data.n != sum(schedule.start_counts):
        raise ValueError("schedule was built for a different cohort size")
    rng = np.random.default_rng(np.random.SeedSequence([0x5CA1E, int(schedule.seed)]))
    alive = np.ones(data.n, dtype=bool)
    points = []

    def evaluate(size: int):
        sub = data.subset(np.nonzero(alive)[0])
        result = loocv(sub, trainer, seed=seed, threads=threads)
        central = result.sensitivities[CLASS_LABELS[1]]
        points.append((size, result.accuracy, float(central) if central is not None else 0.0))

    evaluate(data.n)
    for step, code in enumerate(schedule.removals, start=1):
        candidates = np.nonzero(alive & (data.labels == code))[0]
        if candidates.size == 0:
            raise InfeasibleFloor(f"schedule removes from empty class {CLASS_ORDER[code].value}")
        victim = int(rng.choice(candidates))
        alive[victim] = False
        if step % stride == 0:
            evaluate(data.n - step)
    return ScalingSeries(points=tuple(points))


@dataclass(frozen=True)
class FitCurve:
    """y = 1 - A*exp(B*x) with A > 0; rises toward 1 when B < 0."""

    A: float
    B: float
    residual_rms: float
    converged: bool = True

    def value(self, x) -> np.ndarray | float:
        return 1.0 - self.A * np.exp(self.B * np.asarray(x, dtype=np.float64))

    def display(self, c: float = 0.0) -> tuple[float, float, float]:
        """Equivalent (a, b, c) coefficients of y = 1 - a*exp(b*(x - c))."""
        return self.A * math.exp(self.B * c), self.B, c

    @classmethod
    def from_display(cls, a: float, b: float, c: float) -> "FitCurve":
        return cls(A=a * math.exp(-b * c), B=b, residual_rms=0.0)

    def to_dict(self) -> dict:
        return {
            "A": self.A,
            "B": self.B,
            "residual_rms": self.residual_rms,
            "converged": self.converged,
        }


def fit_curve(xs, ys, max_iter: int = 200) -> FitCurve:
    """Fit y = 1 - A*exp(B*x) to fractions y < 1.

    The start point comes from a linear regression of ln(1 - y) on x; a
    damped Gauss-Newton refinement then minimizes the squared residuals of
    y itself.  Converged when the step norm drops below 1e-10.
    """
    xs = np.asarray(xs, dtype=np.float64)
    ys = np.asarray(ys, dtype=np.float64)
    if xs.shape != ys.shape or xs.ndim != 1:
        raise ValueError("xs and ys must be equal-length 1-D arrays")
    if xs.size < 3:
        raise EmptyInput("curve fit needs at least 3 points")
    if (ys >= 1.0).any():
        raise ValueError("curve fit needs all y < 1")
    if float(ys.max() - ys.min()) == 0.0:
        raise DegenerateSeries("all y values are equal; B is unidentifiable")

    z = np.log(1.0 - ys)
    B, lnA = np.polyfit(xs, z, 1)
    A = float(np.exp(lnA))
    B = float(B)

    def residuals(a, b):
        return ys - (1.0 - a * np.exp(b * xs))

    r = residuals(A, B)
    ssr = float(r @ r)
    converged = False
    for _ in range(max_iter):
        e = np.exp(B * xs)
        J = np.column_stack((e, A * xs * e))  # d(residual)/d(A, B)
        g = J.T @ r
        H = J.T @ J
        try:
            step = np.linalg.solve(H, g)
        except np.linalg.LinAlgError:
            break
        lam = 1.0
        improved = False
        for _ in range(60):
            a_try = A - lam * step[0]
            b_try = B - lam * step[1]
            r_try = residuals(a_try, b_try)
            ssr_try = float(r_try @ r_try)
            if ssr_try <= ssr:
                improved = True
                break
            lam /= 2.0
        if not improved:
            break
        A, B = float(a_try), float(b_try)
        r, ssr = r_try, ssr_try
        if float(np.hypot(lam * step[0], lam * step[1])) < 1e-10:
            converged = True
            break
    return FitCurve(A=A, B=B, residual_rms=math.sqrt(ssr / xs.size), converged=converged)


def solve_target_size(curve: FitCurve, target: float) -> int:
    """Smallest dataset size (nearest integer) where the curve reaches
    ``target``: x = ln((1 - target)/A) / B."""
    if not 0.0 < target < 1.0:
        raise ValueError("target must be a fraction in (0, 1)")
    if curve.B >= 0.0:
        raise TargetUnreachable("curve is not rising (B >= 0)")
    x = math.log((1.0 - target) / curve.A) / curve.B
    return int(math.floor(x + 0.5))


def series_to_csv(series: ScalingSeries, path) -> None:
    import csv

    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["size", "accuracy", "central_sensitivity"])
        for size, acc, sens in series.points:
            writer.writerow([size, format(acc, ".17g"), format(sens, ".17g")])


def fit_to_json(curve: FitCurve, path, *, target: float | None = None, target_size: int | None = None, display_c: float = 0.0, meta: dict | None = None) -> None:
    payload = curve.to_dict()
    a, b, c = curve.display(display_c)
    payload["display"] = {"a": a, "b": b, "c": c}
    if target is not None:
        payload["target"] = target
        payload["target_size"] = target_size
    if meta:
        payload["meta"] = meta
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")
