"""Hot loops, compiled when possible.

``BACKEND`` is ``"cython"`` when the extension imported and ``"python"``
otherwise. Set ``FEATFORGE_PURE_PYTHON=1`` to force the numpy fallback.
"""
import os

from . import _cbow_py

if os.environ.get("FEATFORGE_PURE_PYTHON"):
    _ext = None
else:
    try:
        from . import _cbow_ext as _ext
    except ImportError:
        _ext = None

if _ext is not None:
    train_block = _ext.train_block
    BACKEND = "cython"
else:
    train_block = _cbow_py.train_block
    BACKEND = "python"

python_train_block = _cbow_py.train_block
compiled_train_block = _ext.train_block if _ext is not None else None

__all__ = ["train_block", "python_train_block", "compiled_train_block", "BACKEND"]
