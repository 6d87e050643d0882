"""Step-kernel backend selection.

Imports the compiled Cython kernels when they are available and falls back to
the numpy implementations otherwise.  Set ``ACCELSGD_BACKEND=numpy`` (or
``cython``) to force a choice; forcing ``cython`` raises if the extension was
not built.  Both backends produce bit-identical optimizer state.
"""

import os

_FORCE = os.environ.get("ACCELSGD_BACKEND", "").strip().lower()

if _FORCE in ("numpy", "python"):
    from . import _kernels_py as kernels
    BACKEND = "numpy"
elif _FORCE in ("", "cython", "compiled"):
    try:
        from . import _kernels as kernels  # type: ignore[no-redef]
        BACKEND = "cython"
    except ImportError:
        if _FORCE:
            raise
        from . import _kernels_py as kernels  # type: ignore[no-redef]
        BACKEND = "numpy"
else:
    raise RuntimeError(
        f"unrecognised ACCELSGD_BACKEND={_FORCE!r}; use 'cython' or 'numpy'"
    )
