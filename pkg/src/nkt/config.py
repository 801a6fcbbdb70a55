"""Global limits.

The jet order bound keeps runaway derivative towers from exhausting memory.
It can be raised per-process through the NKT_MAX_JET_ORDER environment
variable; every operation that raises a jet order checks it.
"""

from __future__ import annotations

import os

DEFAULT_MAX_JET_ORDER = 8

_ENV_VAR = "NKT_MAX_JET_ORDER"


def max_jet_order() -> int:
    """Return the current jet order bound (entries per multi-index)."""
    raw = os.environ.get(_ENV_VAR)
    if raw is None:
        return DEFAULT_MAX_JET_ORDER
    try:
        value = int(raw)
    except ValueError:
        return DEFAULT_MAX_JET_ORDER
    return value if value > 0 else DEFAULT_MAX_JET_ORDER
