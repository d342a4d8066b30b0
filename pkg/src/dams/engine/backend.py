"""Kernel backend selection.

The compiled extension is preferred when it imported cleanly; set
DAMS_KERNELS=py to force the numpy fallback (or DAMS_KERNELS=c to require
the extension and fail loudly if it is missing).
"""

import os

from . import kernels_py

_choice = os.environ.get("DAMS_KERNELS", "auto").lower()

_compiled = None
if _choice in ("auto", "c"):
    try:
        from . import _ckernels as _compiled
    except ImportError:
        _compiled = None
    if _choice == "c" and _compiled is None:
        raise ImportError(
            "DAMS_KERNELS=c but the compiled kernel extension is not built; "
            "reinstall the package or set DAMS_KERNELS=py"
        )

kernels = _compiled if _compiled is not None else kernels_py


def backend_name() -> str:
    return "compiled" if kernels is not kernels_py else "numpy"


def get_backend(name: str):
    """Return a specific kernel module by name ('compiled' or 'numpy')."""
    if name == "numpy":
        return kernels_py
    if name == "compiled":
        if _compiled is None:
            raise ImportError("compiled kernel extension is not available")
        return _compiled
    raise ValueError(f"unknown kernel backend {name!r}")
