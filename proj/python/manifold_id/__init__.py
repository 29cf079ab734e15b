"""Intrinsic-dimension estimation, fairness diagnostics, and IDR training.

Thin wrapper over the compiled extension; every public name lives in
``manifold_id._core`` and is re-exported here.
"""

from manifold_id._core import *  # noqa: F401,F403
from manifold_id import _core as _core

__version__ = "0.1.0"
__all__ = [name for name in dir(_core) if not name.startswith("_")]
