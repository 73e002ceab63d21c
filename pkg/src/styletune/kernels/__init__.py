"""Convolution hot kernels: compiled extension if available, numpy fallback otherwise.

The only operations hot enough to warrant compiled code are the patch
gather (im2col) and its scatter-add adjoint (col2im); everything else in
the package rides on BLAS through numpy. Both backends produce
bit-identical arrays (same gather layout, same accumulation order), so
the choice is invisible to callers.

Set STYLETUNE_FORCE_REFERENCE=1 to force the numpy fallback.
"""

import os

from . import reference

if os.environ.get("STYLETUNE_FORCE_REFERENCE"):
    _impl = reference
else:
    try:
        from . import _convops as _impl  # type: ignore[no-redef]
    except ImportError:
        _impl = reference

im2col = _impl.im2col
col2im = _impl.col2im

BACKEND = "numpy" if _impl is reference else "cython"


def backends():
    """Return {name: module} for every usable kernel backend."""
    out = {"numpy": reference}
    try:
        from . import _convops

        out["cython"] = _convops
    except ImportError:
        pass
    return out
