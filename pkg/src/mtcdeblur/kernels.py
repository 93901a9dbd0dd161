"""Backend selection for the hot spectral and chain kernels.

The compiled extension is used when it imports; otherwise the pure-Python
implementation is used.  Set ``MTCDEBLUR_BACKEND=python`` to force the
fallback (the benchmark and the backend-equivalence tests do this).
"""

import os

from . import _pykernels as python_backend

compiled_backend = None
if os.environ.get("MTCDEBLUR_BACKEND", "").lower() != "python":
    try:
        from . import _ckernels as compiled_backend
    except ImportError:  # extension not built
        compiled_backend = None

_impl = compiled_backend if compiled_backend is not None else python_backend
BACKEND = "cython" if _impl is compiled_backend else "python"

f_direct = _impl.f_direct
g_direct = _impl.g_direct
band = _impl.band
f_fast = _impl.f_fast
g_fast = _impl.g_fast
mtc1_chain = _impl.mtc1_chain
mtc2_chain = _impl.mtc2_chain
