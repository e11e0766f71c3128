"""Hot numeric kernels with a compiled core and a pure-numpy fallback.

The compiled extension is preferred when importable; set the environment
variable ``PALSY_FORCE_FALLBACK=1`` to skip it.  Both backends implement the
same deterministic arithmetic, so swapping them does not change results
(asserted bit-for-bit in test_core_parity).
"""

from __future__ import annotations

import os

from palsy._core import _pykernels

_IMPL = _pykernels
backend_name = "fallback"

if not os.environ.get("PALSY_FORCE_FALLBACK"):
    try:
        from palsy._core import _ckernels  # type: ignore[attr-defined]

        _IMPL = _ckernels
        backend_name = "compiled"
    except ImportError:
        pass


def available_backends() -> tuple[str, ...]:
    names = ["fallback"]
    try:
        from palsy._core import _ckernels  # noqa: F401

        names.insert(0, "compiled")
    except ImportError:
        pass
    return tuple(names)


def set_backend(name: str) -> None:
    """Switch kernels at runtime (used by tests and benchmarks)."""
    global _IMPL, backend_name
    if name == "fallback":
        _IMPL = _pykernels
    elif name == "compiled":
        from palsy._core import _ckernels

        _IMPL = _ckernels
    else:
        raise ValueError(f"unknown backend {name!r}")
    backend_name = name


def best_split(X, y, feature_indices, n_classes, log2_table):
    return _IMPL.best_split(X, y, feature_indices, n_classes, log2_table)


def smo_train(K, y, c_pos, c_neg, tol, max_passes, seed):
    return _IMPL.smo_train(K, y, c_pos, c_neg, tol, max_passes, seed)
