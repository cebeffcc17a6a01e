"""Kernel backend selection.

Imports the compiled extension when it is present and usable, otherwise
falls back to the NumPy reference implementation.  Set the environment
variable ``TORUSMFG_FORCE_REFERENCE=1`` to force the fallback (used by
the benchmark and the backend-agreement tests).
"""

import os

from . import reference

if os.environ.get("TORUSMFG_FORCE_REFERENCE"):
    _impl = reference
    BACKEND = "reference"
else:
    try:
        from . import _speedups as _impl  # type: ignore[no-redef]

        BACKEND = "compiled"
    except ImportError:
        _impl = reference
        BACKEND = "reference"

pairwise_sq_torus_dist = _impl.pairwise_sq_torus_dist
rk4_sweep = _impl.rk4_sweep
mix_velocity = reference.mix_velocity

__all__ = ["BACKEND", "pairwise_sq_torus_dist", "rk4_sweep", "mix_velocity", "reference"]
