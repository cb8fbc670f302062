"""Select the compiled kernels when importable, else the numpy fallback.

Set ``NOMAIOT_BACKEND=python`` to force the fallback.
"""
import os

from . import _pykernels

NAME = "python"
kernels = _pykernels

if os.environ.get("NOMAIOT_BACKEND", "").lower() != "python":
    try:
        from . import _kernels as kernels  # noqa: F811
        NAME = "cython"
    except ImportError:
        pass
