"""Soft-margin kernel SVM trained by SMO, with one-vs-one multi-class voting.

One binary machine is trained per unordered class pair; the earlier class in
the fixed order P < C < H takes the +1 side.  Balanced mode scales each
class's box bound inversely to its frequency within the pair.  Kernel
evaluation guards against overflow for extreme polynomial degrees by
clamping to +/-1e300 and counting the events.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from enum import Enum
from itertools import combinations

import numpy as np

from palsy import _core
from palsy.dataset_io import CLASS_ORDER
from palsy.classifiers import unpack_data
from palsy.errors import DimensionMismatch, EmptyInput, SingleClassInput

log = logging.getLogger(__name__)

DEFAULT_TOL = 1e-3
DEFAULT_MAX_PASSES = 1000
_CLAMP = 1e300


class Kernel(Enum):
    LINEAR = "linear"
    POLY = "poly"
    RBF = "rbf"


@dataclass(frozen=True)
class KernelSpec:
    kind: Kernel = Kernel.POLY
    degree: int = 3
    gamma: float | None = None  # None: 1 / (f * pooled feature variance)
    coef0: float = 0.0

    def __post_init__(self):
        if self.kind is Kernel.POLY and self.degree < 1:
            raise ValueError("polynomial degree must be >= 1")
        if self.gamma is not None and self.gamma <= 0.0:
            raise ValueError("gamma must be positive")

    def resolved(self, X: np.ndarray) -> "KernelSpec":
        """Fill in the data-dependent gamma default from the training rows.

        gamma = 1 / (f * variance of all feature values pooled), the
        conventional scale-aware default.
        """
        if self.gamma is not None:
            return self
        var = float(np.asarray(X, dtype=np.float64).var())
        gamma = 1.0 / (X.shape[1] * var) if var > 0.0 else 1.0
        return KernelSpec(kind=self.kind, degree=self.degree, gamma=gamma, coef0=self.coef0)


_overflow_events = 0


def overflow_events() -> int:
    """Number of kernel evaluations clamped for overflow since import."""
    return _overflow_events


def _finite_guard(K: np.ndarray) -> np.ndarray:
    global _overflow_events
    bad = ~np.isfinite(K)
    if bad.any():
        _overflow_events += int(bad.sum())
        log.warning("clamped %d overflowed kernel values", int(bad.sum()))
        K = np.where(np.isposinf(K), _CLAMP, K)
        K = np.where(np.isneginf(K), -_CLAMP, K)
        K = np.nan_to_num(K, nan=0.0)
    return K


def kernel_matrix(spec: KernelSpec, A: np.ndarray, B: np.ndarray) -> np.ndarray:
    A = np.asarray(A, dtype=np.float64)
    B = np.asarray(B, dtype=np.float64)
    if A.shape[1] != B.shape[1]:
        raise DimensionMismatch(f"kernel operands disagree: {A.shape[1]} vs {B.shape[1]} features")
    if spec.kind is Kernel.LINEAR:
        return A @ B.T
    if spec.gamma is None:
        raise ValueError("kernel spec has unresolved gamma; call spec.resolved(X) first")
    if spec.kind is Kernel.POLY:
        base = spec.gamma * (A @ B.T) + spec.coef0
        with np.errstate(over="ignore"):
            K = base ** spec.degree
        return _finite_guard(K)
    # RBF
    sq = ((A ** 2).sum(axis=1)[:, None] + (B ** 2).sum(axis=1)[None, :]) - 2.0 * (A @ B.T)
    np.maximum(sq, 0.0, out=sq)
    return np.exp(-spec.gamma * sq)


def kernel_eval(spec: KernelSpec, u, v) -> float:
    """Kernel value for a single pair of rows."""
    u = np.asarray(u, dtype=np.float64).reshape(1, -1)
    v = np.asarray(v, dtype=np.float64).reshape(1, -1)
    return float(kernel_matrix(spec, u, v)[0, 0])


@dataclass(frozen=True, eq=False)
class BinarySvm:
    """One trained machine for an unordered class pair (pos_class, neg_class)."""

    pos_class: int
    neg_class: int
    spec: KernelSpec
    support_vectors: np.ndarray  # (m, f)
    dual_coef: np.ndarray  # (m,) alpha_i * y_i
    bias: float
    c_pos: float
    c_neg: float
    converged: bool
    n_sweeps: int
    support_idx: np.ndarray | None = None  # training-row indices of the SVs

    def decision(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        if X.ndim == 1:
            X = X.reshape(1, -1)
        K = kernel_matrix(self.spec, X, self.support_vectors)
        return K @ self.dual_coef + self.bias


def _binary_labels(y: np.ndarray, pos: int, neg: int) -> np.ndarray:
    return np.where(y == pos, 1.0, -1.0)


def svm_train_binary(
    data,
    spec: KernelSpec,
    C: float = 1.0,
    class_weights: dict[int, float] | None = None,
    tol: float = DEFAULT_TOL,
    max_passes: int = DEFAULT_MAX_PASSES,
    seed: int = 0,
) -> BinarySvm:
    """Train one soft-margin machine on a two-class subset by SMO.

    The effective box bound for a sample is C times its class weight.
    Non-convergence within ``max_passes`` sweeps is reported on the returned
    machine, which carries the best iterate.
    """
    if C <= 0.0:
        raise ValueError("C must be positive")
    X, y_codes = unpack_data(data)
    present = np.unique(y_codes)
    if len(present) < 2:
        raise SingleClassInput("binary training needs both classes present")
    if len(present) > 2:
        raise ValueError("binary training got more than two classes")
    pos, neg = int(present[0]), int(present[1])
    weights = class_weights or {}
    c_pos = C * float(weights.get(pos, 1.0))
    c_neg = C * float(weights.get(neg, 1.0))
    spec = spec.resolved(X)
    y = _binary_labels(y_codes, pos, neg)
    K = kernel_matrix(spec, X, X)
    alpha, b, sweeps, converged = _core.smo_train(K, y, c_pos, c_neg, tol, max_passes, seed)
    if not converged:
        log.warning(
            "SMO did not converge for pair (%s, %s) after %d sweeps; returning best iterate",
            CLASS_ORDER[pos].value, CLASS_ORDER[neg].value, sweeps,
        )
    sv = alpha > 1e-12
    return BinarySvm(
        pos_class=pos,
        neg_class=neg,
        spec=spec,
        support_vectors=X[sv],
        dual_coef=alpha[sv] * y[sv],
        bias=float(b),
        c_pos=c_pos,
        c_neg=c_neg,
        converged=bool(converged),
        n_sweeps=int(sweeps),
        support_idx=np.nonzero(sv)[0],
    )


def balanced_weights(y: np.ndarray) -> dict[int, float]:
    """Per-class weight n / (n_classes * n_k), over the rows given."""
    present, counts = np.unique(y, return_counts=True)
    n = float(y.shape[0])
    return {int(c): n / (len(present) * float(k)) for c, k in zip(present, counts)}


@dataclass(frozen=True, eq=False)
class SvmModel:
    machines: tuple[BinarySvm, ...]
    spec: KernelSpec
    C: float
    balanced: bool

    @property
    def n_features(self) -> int:
        return self.machines[0].support_vectors.shape[1]

    def predict(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        if X.ndim == 1:
            X = X.reshape(1, -1)
        if X.shape[1] != self.n_features:
            raise DimensionMismatch(f"expected {self.n_features} features, got {X.shape[1]}")
        votes = np.zeros((X.shape[0], len(CLASS_ORDER)))
        mags = np.zeros((X.shape[0], len(CLASS_ORDER)))
        for machine in self.machines:
            f = machine.decision(X)
            chosen = np.where(f >= 0.0, machine.pos_class, machine.neg_class)
            votes[np.arange(X.shape[0]), chosen] += 1.0
            mags[np.arange(X.shape[0]), chosen] += np.abs(f)
        return _aggregate_votes(votes, mags)

    def predict_one(self, row) -> int:
        return int(self.predict(np.asarray(row).reshape(1, -1))[0])


def _aggregate_votes(votes: np.ndarray, mags: np.ndarray) -> np.ndarray:
    """Majority vote; ties broken by summed |decision value|, then class order."""
    out = np.empty(votes.shape[0], dtype=np.int64)
    for i in range(votes.shape[0]):
        top = votes[i].max()
        tied = np.nonzero(votes[i] == top)[0]
        if len(tied) == 1:
            out[i] = tied[0]
        else:
            out[i] = tied[int(np.argmax(mags[i, tied]))]
    return out


def svm_train(
    data,
    spec: KernelSpec,
    C: float = 1.0,
    balanced: bool = True,
    seed: int = 0,
    tol: float = DEFAULT_TOL,
    max_passes: int = DEFAULT_MAX_PASSES,
) -> SvmModel:
    """One-vs-one training: one binary machine per present class pair."""
    X, y = unpack_data(data)
    if X.shape[0] == 0:
        raise EmptyInput("cannot train on an empty matrix")
    present = np.unique(y)
    if len(present) < 2:
        raise SingleClassInput("multi-class training needs at least two classes")
    spec = spec.resolved(X)
    machines = []
    for mi, (a, b) in enumerate(combinations(sorted(int(c) for c in present), 2)):
        rows = np.nonzero((y == a) | (y == b))[0]
        sub = (X[rows], y[rows])
        weights = balanced_weights(y[rows]) if balanced else None
        machine_seed = int(np.random.SeedSequence([seed, mi]).generate_state(1, np.uint64)[0])
        machines.append(
            svm_train_binary(sub, spec, C=C, class_weights=weights, tol=tol, max_passes=max_passes, seed=machine_seed)
        )
    return SvmModel(machines=tuple(machines), spec=spec, C=C, balanced=balanced)


def svm_predict(model: SvmModel, row) -> int:
    return model.predict_one(row)


def kkt_violation(machine: BinarySvm, data) -> float:
    """Maximum KKT violation of a trained machine over its training data.

    For alpha at 0 the margin constraint y*f >= 1 must hold; at the box
    bound y*f <= 1; in between y*f = 1.
    """
    X, y_codes = unpack_data(data)
    y = _binary_labels(y_codes, machine.pos_class, machine.neg_class)
    f = machine.decision(X)
    # recover per-sample alpha from the stored support vectors
    alpha = np.zeros(X.shape[0])
    if machine.support_idx is not None:
        alpha[machine.support_idx] = machine.dual_coef * y[machine.support_idx]
    else:
        # fall back to matching SVs to rows by exact coordinates (in order)
        sv_index = 0
        for i in range(X.shape[0]):
            if sv_index < len(machine.support_vectors) and np.array_equal(X[i], machine.support_vectors[sv_index]):
                alpha[i] = machine.dual_coef[sv_index] * y[i]
                sv_index += 1
    c_i = np.where(y > 0.0, machine.c_pos, machine.c_neg)
    r = y * f - 1.0
    worst = 0.0
    for i in range(X.shape[0]):
        if alpha[i] <= 1e-12:
            v = max(0.0, -r[i])
        elif alpha[i] >= c_i[i] - 1e-12:
            v = max(0.0, r[i])
        else:
            v = abs(r[i])
        worst = max(worst, v)
    return float(worst)


# serialization hooks used by palsy.classifiers.model_to_dict


def svm_state_dict(model: SvmModel) -> dict:
    return {
        "C": model.C,
        "balanced": model.balanced,
        "spec": _spec_dict(model.spec),
        "machines": [
            {
                "pos_class": m.pos_class,
                "neg_class": m.neg_class,
                "spec": _spec_dict(m.spec),
                "support_vectors": m.support_vectors.tolist(),
                "dual_coef": m.dual_coef.tolist(),
                "bias": m.bias,
                "c_pos": m.c_pos,
                "c_neg": m.c_neg,
                "converged": m.converged,
                "n_sweeps": m.n_sweeps,
            }
            for m in model.machines
        ],
    }


def _spec_dict(spec: KernelSpec) -> dict:
    return {"kind": spec.kind.value, "degree": spec.degree, "gamma": spec.gamma, "coef0": spec.coef0}


def _spec_from_dict(d: dict) -> KernelSpec:
    return KernelSpec(kind=Kernel(d["kind"]), degree=d["degree"], gamma=d["gamma"], coef0=d["coef0"])


def svm_from_state(state: dict) -> SvmModel:
    machines = tuple(
        BinarySvm(
            pos_class=m["pos_class"],
            neg_class=m["neg_class"],
            spec=_spec_from_dict(m["spec"]),
            support_vectors=np.array(m["support_vectors"]),
            dual_coef=np.array(m["dual_coef"]),
            bias=m["bias"],
            c_pos=m["c_pos"],
            c_neg=m["c_neg"],
            converged=m["converged"],
            n_sweeps=m["n_sweeps"],
        )
        for m in state["machines"]
    )
    return SvmModel(machines=machines, spec=_spec_from_dict(state["spec"]), C=state["C"], balanced=state["balanced"])
