"""Backend dispatch for the hot numeric kernels.

The numba backend is used when importable. Set ``SPINEMETRICS_BACKEND=numpy``
to force the pure-numpy fallback (results are bit-identical either way; the
flag only trades compile time against throughput).
"""

import os

from . import _kernels_numpy

_requested = os.environ.get("SPINEMETRICS_BACKEND", "auto").strip().lower()

if _requested not in ("auto", "numba", "numpy"):
    raise ValueError(f"SPINEMETRICS_BACKEND must be auto|numba|numpy, got {_requested!r}")

_impl = _kernels_numpy
BACKEND = "numpy"

if _requested in ("auto", "numba"):
    try:
        from . import _kernels_numba as _impl  # noqa: F811
        BACKEND = "numba"
    except ImportError:
        if _requested == "numba":
            raise

fill_polygon = _impl.fill_polygon
confusion_counts = _impl.confusion_counts
erode = _impl.erode
dilate = _impl.dilate
label_components = _impl.label_components
grow_seeds = _impl.grow_seeds


def opening(mask, k):
    """Erosion followed by dilation with a k-by-k square element."""
    return dilate(erode(mask, k), k)


def closing(mask, k):
    """Dilation followed by erosion with a k-by-k square element."""
    return erode(dilate(mask, k), k)
