"""Select the kernel implementation at import time.

The compiled extension is used when it was built; set
``QUADPROP_PURE_PYTHON=1`` to force the numpy fallback.
"""
import os

from . import _pykernels

BACKEND = "python"
rk4_path = _pykernels.rk4_path
chirp_apply = _pykernels.chirp_apply

if not os.environ.get("QUADPROP_PURE_PYTHON"):
    try:
        from . import _ckernels
    except ImportError:
        pass
    else:
        BACKEND = "cython"
        rk4_path = _ckernels.rk4_path
        chirp_apply = _ckernels.chirp_apply
