"""Kernel backend selection.

The compiled extension is used when importable; set ``REHABMCTS_PURE=1``
to force the pure-Python kernels.
"""

import os

from . import _core_py

if os.environ.get("REHABMCTS_PURE", "") not in ("", "0"):
    core = _core_py
else:
    try:
        from . import _core as core
    except ImportError:  # extension not built
        core = _core_py

BACKEND = "compiled" if core is not _core_py else "python"


def available_backends() -> dict:
    out = {"python": _core_py}
    try:
        from . import _core
        out["compiled"] = _core
    except ImportError:
        pass
    return out
