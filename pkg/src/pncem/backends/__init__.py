"""Kernel backend selection.

The compiled extension (:mod:`pncem.backends._core`) is preferred; the
scipy-backed fallback (:mod:`pncem.backends._ref`) is selected when the
extension was not built.  Set ``PNCEM_BACKEND=ref`` or ``PNCEM_BACKEND=core``
to force a choice (forcing ``core`` raises if the extension is missing).

Both backends expose the same five kernels:

    ldl_factor(diag, off)        -> (d, l, info)
    ldl_solve(d, l, b)           -> x with (L D L^T) x = b
    selected_inverse(d, l)       -> (inv_diag, inv_offdiag)
    sqrt_solve(d, l, xi)         -> L^{-T} D^{-1/2} xi
    ar1_scan(phi, x0c, eta)      -> AR(1) scan of the innovations
"""

import os

_requested = os.environ.get("PNCEM_BACKEND", "").strip().lower()

if _requested == "ref":
    from . import _ref as impl

    BACKEND = "ref"
elif _requested == "core":
    from . import _core as impl  # type: ignore[no-redef]

    BACKEND = "core"
elif _requested:
    raise ImportError(f"PNCEM_BACKEND must be 'core' or 'ref', got {_requested!r}")
else:
    try:
        from . import _core as impl  # type: ignore[no-redef]

        BACKEND = "core"
    except ImportError:
        from . import _ref as impl  # type: ignore[no-redef]

        BACKEND = "ref"

PIVOT_MIN = impl.PIVOT_MIN
ldl_factor = impl.ldl_factor
ldl_solve = impl.ldl_solve
selected_inverse = impl.selected_inverse
sqrt_solve = impl.sqrt_solve
ar1_scan = impl.ar1_scan

__all__ = [
    "BACKEND",
    "PIVOT_MIN",
    "ldl_factor",
    "ldl_solve",
    "selected_inverse",
    "sqrt_solve",
    "ar1_scan",
]
