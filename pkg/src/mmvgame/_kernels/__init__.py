"""Hot kernels with a compiled core and a numpy fallback.

The compiled extension is used when it imports; set ``MMVGAME_PURE_PYTHON=1``
to force the fallback.
"""
import os

from . import _fallback

BACKEND = "python"
_impl = _fallback

if os.environ.get("MMVGAME_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from . import _core as _impl  # noqa: F811
        BACKEND = "cython"
    except ImportError:
        _impl = _fallback

tridiag_solve = _impl.tridiag_solve
cn_step = _impl.cn_step
cn_march = _impl.cn_march
bilinear = _impl.bilinear


def backends():
    """Available implementations keyed by name."""
    out = {"python": _fallback}
    try:
        from . import _core
        out["cython"] = _core
    except ImportError:
        pass
    return out
