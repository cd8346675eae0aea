"""Select the compiled kernels when available, else the numpy fallback.

Set ``ASSR_BACKEND=python`` to force the fallback.
"""

import os

from . import _kernels_py

if os.environ.get("ASSR_BACKEND", "").lower() in ("python", "py", "numpy"):
    kernels = _kernels_py
    BACKEND = "python"
else:
    try:
        from . import _kernels as kernels
        BACKEND = "cython"
    except ImportError:
        kernels = _kernels_py
        BACKEND = "python"

python_kernels = _kernels_py
