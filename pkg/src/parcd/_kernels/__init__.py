"""Kernel selection: compiled extension when available, pure Python otherwise.

The hot scalar kernels (closed-form proximal step, surrogate evaluation,
row inner products) exist twice: in ``_core.pyx`` (Cython) and in
``_pure.py`` (reference). Both expose the same functions; the package works
unchanged with either. Set ``PARCD_PURE_PYTHON=1`` to force the fallback,
e.g. for benchmarking one against the other.
"""

from __future__ import annotations

import os

from . import _pure

if os.environ.get("PARCD_PURE_PYTHON", "") not in ("", "0"):
    impl = _pure
else:
    try:
        from . import _core as impl  # type: ignore[attr-defined]
    except ImportError:
        impl = _pure

KIND_ZERO = _pure.KIND_ZERO
KIND_ABS = _pure.KIND_ABS
KIND_QUAD = _pure.KIND_QUAD
KIND_HINGE = _pure.KIND_HINGE

psi_value = impl.psi_value
w_value = impl.w_value
prox_step = impl.prox_step
row_dot = impl.row_dot
dense_row_dot = impl.dense_row_dot
IS_COMPILED = bool(getattr(impl, "IS_COMPILED", False))
