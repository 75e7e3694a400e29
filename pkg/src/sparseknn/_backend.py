"""Selects the kernel implementation at import time.

The compiled ``_ckernels`` extension is used when importable; setting
``SPARSEKNN_PURE_PYTHON=1`` forces the pure-Python ``_pykernels`` module.
Both expose the same functions with the same signatures.
"""
from __future__ import annotations

import contextlib
import logging
import os

from . import _pykernels

log = logging.getLogger(__name__)

try:
    from . import _ckernels
except ImportError:  # extension not built
    _ckernels = None

_IMPLS = {"python": _pykernels}
if _ckernels is not None:
    _IMPLS["cython"] = _ckernels

if os.environ.get("SPARSEKNN_PURE_PYTHON") or _ckernels is None:
    _current = "python"
    if _ckernels is None:
        log.debug("compiled kernels unavailable, using pure-Python fallback")
else:
    _current = "cython"


def available() -> list[str]:
    return sorted(_IMPLS)


def name() -> str:
    return _current


def impl():
    return _IMPLS[_current]


def set_backend(backend: str) -> None:
    global _current
    if backend not in _IMPLS:
        raise ValueError(f"backend {backend!r} not available (have {available()})")
    _current = backend


@contextlib.contextmanager
def use(backend: str):
    """Temporarily switch backends, e.g. for side-by-side benchmarks."""
    previous = _current
    set_backend(backend)
    try:
        yield
    finally:
        set_backend(previous)
