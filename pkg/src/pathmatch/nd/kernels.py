"""Kernel dispatch: compiled extension when available, numpy fallback otherwise.

Set the environment variable PATHMATCH_PURE_PY to any non-empty value to force
the numpy fallback even when the compiled extension is importable.
"""

import os

if os.environ.get("PATHMATCH_PURE_PY"):
    from . import _pykernels as _impl

    COMPILED = False
else:
    try:
        from . import _ckernels as _impl  # type: ignore[attr-defined]

        COMPILED = True
    except ImportError:
        from . import _pykernels as _impl

        COMPILED = False

relu_fwd = _impl.relu_fwd
relu_bwd = _impl.relu_bwd
sigmoid_fwd = _impl.sigmoid_fwd
sigmoid_bwd = _impl.sigmoid_bwd
softmax_rows_fwd = _impl.softmax_rows_fwd
softmax_rows_bwd = _impl.softmax_rows_bwd
scatter_add_rows = _impl.scatter_add_rows
adam_update = _impl.adam_update
