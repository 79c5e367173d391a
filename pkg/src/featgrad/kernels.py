"""Backend selection for the estimator's hot loops.

The compiled ``_ckernels`` extension is used when it imports; otherwise the
blocked NumPy fallback in ``_pykernels`` takes over. Setting the environment
variable ``FEATGRAD_PURE_PYTHON=1`` forces the fallback.
"""
import os

from featgrad import _pykernels

if os.environ.get("FEATGRAD_PURE_PYTHON") == "1":
    _backend = _pykernels
else:
    try:
        from featgrad import _ckernels as _backend
    except ImportError:  # extension not built
        _backend = _pykernels

BACKEND = "cython" if _backend is not _pykernels else "numpy"

operator_apply = _backend.operator_apply
operator_apply_transpose = _backend.operator_apply_transpose
bilinear_accumulate = _backend.bilinear_accumulate


def get_backend(name=None):
    """Return a kernel module by name (``"cython"``, ``"numpy"``) or the active one."""
    if name is None:
        return _backend
    if name == "numpy":
        return _pykernels
    if name == "cython":
        from featgrad import _ckernels

        return _ckernels
    raise ValueError(f"unknown kernel backend {name!r}")
