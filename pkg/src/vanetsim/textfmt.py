"""Canonical number rendering for CSV / JSONL outputs.

All emitted artifacts must be byte-reproducible, so every float is
rendered the same way everywhere: shortest round-trip decimal, with
integral values collapsed to bare integers (0.0 -> "0", 0.5 -> "0.5").
"""

import math


def fmt_num(x) -> str:
    if isinstance(x, bool):
        raise TypeError("bool is not a numeric field")
    if isinstance(x, int):
        return str(x)
    x = float(x)
    if -1e16 < x < 1e16:  # finite by construction of this bound
        i = int(x)
        if i == x:
            return str(i)
        return repr(x)
    if math.isfinite(x):
        return repr(x)
    raise ValueError(f"non-finite value {x!r} in output")
