"""Convolution backend selection.

The compiled Cython kernels are preferred when built; the numpy reference
implementation is the fallback. ``BLOCKFILL_BACKEND=python`` or
``=compiled`` forces a choice (the latter raises if the extension is
missing). Both backends implement the same two functions:

    conv2d_forward(x[B,Ci,R,C], w[Co,Ci,kh,kw], bias[Co] | None) -> y[B,Co,R,C]
    conv2d_backward(x, w, gy) -> (gx, gw, gbias)

with zero same-padding, so spatial shape is preserved.
"""

import os

from . import reference

_requested = os.environ.get("BLOCKFILL_BACKEND", "auto").lower()

_impl = None
if _requested in ("auto", "compiled"):
    try:
        from . import _fastconv as _impl  # type: ignore[no-redef]
    except ImportError:
        if _requested == "compiled":
            raise ImportError(
                "BLOCKFILL_BACKEND=compiled but the _fastconv extension is not built; "
                "reinstall with a C compiler available"
            ) from None
elif _requested != "python":
    raise ValueError(f"BLOCKFILL_BACKEND must be auto, compiled or python, not {_requested!r}")

if _impl is None:
    _impl = reference

BACKEND = _impl.NAME
conv2d_forward = _impl.conv2d_forward
conv2d_backward = _impl.conv2d_backward


def available_backends() -> list[str]:
    names = ["python"]
    try:
        from . import _fastconv  # noqa: F401

        names.insert(0, "compiled")
    except ImportError:
        pass
    return names
