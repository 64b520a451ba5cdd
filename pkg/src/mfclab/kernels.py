"""Backend selection for the quadrature kernels.

Prefers the compiled extension; falls back to the pure-Python loops when the
extension was not built or when MFCLAB_PURE_PY=1 is set in the environment.
Both backends are kept bit-identical, so the selection never changes results.
"""

import os

from . import _kernels_py

if os.environ.get("MFCLAB_PURE_PY") == "1":
    _impl = _kernels_py
else:
    try:
        from . import _kernels as _impl  # type: ignore[no-redef]
    except ImportError:
        _impl = _kernels_py

BACKEND = _impl.BACKEND

algebraic_f = _impl.algebraic_f
closedloop_f = _impl.closedloop_f
