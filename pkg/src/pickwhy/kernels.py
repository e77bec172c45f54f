"""Kernel backend selection.

The compiled extension is used when it was built; set ``PICKWHY_PURE_PYTHON=1``
to force the numpy fallback. Both backends return identical results.
"""
import os

from . import _kernels_py

BACKEND = "python"
_impl = _kernels_py
if os.environ.get("PICKWHY_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from . import _kernels as _impl  # type: ignore[no-redef]

        BACKEND = "cython"
    except ImportError:
        _impl = _kernels_py

best_split = _impl.best_split
apply_tree = _impl.apply_tree


def get_backend(name: str):
    """Return the kernel module ``"cython"`` or ``"python"`` (for tests and benchmarks)."""
    if name == "python":
        return _kernels_py
    if name == "cython":
        from . import _kernels

        return _kernels
    raise ValueError(f"unknown kernel backend {name!r}")
