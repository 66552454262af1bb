"""Select the compiled kernels when available, else the numpy fallback.

Set ``CRAM_PURE_PYTHON=1`` to force the fallback.
"""

import os

from . import _fallback

BACKEND = "python"
local_linear_weights = _fallback.local_linear_weights
run_sweeps = _fallback.run_sweeps

if os.environ.get("CRAM_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from . import _ext
    except ImportError:
        pass
    else:
        BACKEND = "cython"
        local_linear_weights = _ext.local_linear_weights
        run_sweeps = _ext.run_sweeps
