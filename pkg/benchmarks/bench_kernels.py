"""Benchmark the compiled kernels against the numpy fallback.

Times the two hot kernels in isolation (tree split search, SMO) and two
end-to-end LOOCV runs that exercise them, asserting along the way that both
backends produce identical results.

    python benchmarks/bench_kernels.py [--full]
"""

import argparse
import time

import numpy as np

from palsy import _core
from palsy.classifiers import log2_table
from palsy.dataset_io import generate_synthetic_cohort
from palsy.evaluation import Trainer, loocv
from palsy.features import to_landmarks_view
from palsy.preprocess import run_pipeline
from palsy.svm import Kernel, KernelSpec


def timed(fn, repeats):
    best = float("inf")
    result = None
    for _ in range(repeats):
        start = time.perf_counter()
        result = fn()
        best = min(best, time.perf_counter() - start)
    return best, result


def bench_best_split(backend, n, f, calls, rng_seed=0):
    rng = np.random.default_rng(rng_seed)
    X = rng.normal(size=(n, f))
    y = rng.integers(0, 3, n).astype(np.int64)
    table = log2_table(n)
    feats = np.arange(f, dtype=np.int64)

    def run():
        out = []
        for _ in range(calls):
            out.append(backend.best_split(X, y, feats, 3, table))
        return out

    return run


def bench_smo(backend, n, rng_seed=0):
    rng = np.random.default_rng(rng_seed)
    G = rng.normal(size=(n, 8))
    K = G @ G.T
    y = np.where(rng.integers(0, 2, n) == 1, 1.0, -1.0)

    def run():
        return backend.smo_train(K, y, 2.0, 2.0, 1e-3, 500, 12345)

    return run


def bench_loocv(backend_name, view, trainer):
    def run():
        _core.set_backend(backend_name)
        try:
            return loocv(view, trainer, seed=0).folds
        finally:
            _core.set_backend(_core.available_backends()[0])

    return run


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--full", action="store_true", help="larger workloads (slower)")
    args = parser.parse_args()

    if "compiled" not in _core.available_backends():
        raise SystemExit("compiled extension not built; nothing to compare")
    from palsy._core import _ckernels, _pykernels

    n, f, calls = (202, 136, 60) if args.full else (120, 136, 25)
    smo_n = 160 if args.full else 90
    cohort_counts = (30, 12, 18) if not args.full else (50, 20, 30)

    cohort = generate_synthetic_cohort(*cohort_counts, seed=42)
    processed, _ = run_pipeline(cohort)
    view = to_landmarks_view(processed)

    def same_result(a, b):
        if isinstance(a, (tuple, list)):
            return len(a) == len(b) and all(same_result(x, y) for x, y in zip(a, b))
        if isinstance(a, np.ndarray):
            return np.array_equal(a, b)
        return a == b

    rows = []
    for label, make in (
        (f"best_split (n={n}, f={f}, {calls} calls)",
         lambda b: bench_best_split(b, n, f, calls)),
        (f"smo_train (n={smo_n})",
         lambda b: bench_smo(b, smo_n)),
    ):
        t_c, r_c = timed(make(_ckernels), 3)
        t_p, r_p = timed(make(_pykernels), 3)
        rows.append((label, t_c, t_p, same_result(r_c, r_p)))

    for label, trainer in (
        ("LOOCV tree depth 10", Trainer("tree", {"max_depth": 10})),
        ("LOOCV svm poly-4", Trainer("svm", {"spec": KernelSpec(kind=Kernel.POLY, degree=4)})),
    ):
        t_c, r_c = timed(bench_loocv("compiled", view, trainer), 1)
        t_p, r_p = timed(bench_loocv("fallback", view, trainer), 1)
        rows.append((f"{label} (n={view.n})", t_c, t_p, r_c == r_p))

    width = max(len(r[0]) for r in rows)
    print(f"{'workload':<{width}}  {'compiled':>10}  {'fallback':>10}  {'speedup':>8}  results")
    for label, t_c, t_p, same in rows:
        print(f"{label:<{width}}  {t_c:>9.3f}s  {t_p:>9.3f}s  {t_p / t_c:>7.1f}x  {'equal' if same else 'DIFFER'}")
    if not all(r[3] for r in rows):
        raise SystemExit("backend results differ")


if __name__ == "__main__":
    main()
