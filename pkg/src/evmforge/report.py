"""Deterministic text rendering for CSV/JSON outputs."""
import json

import numpy as np

from evmforge.frameio import atomic_write_bytes


def fmt(v) -> str:
    """Fixed 9-significant-digit rendering of a real."""
    return format(float(v), ".9g")


def _rounded(obj):
    if isinstance(obj, dict):
        return {str(k): _rounded(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_rounded(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_rounded(v) for v in obj.tolist()]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        return float(fmt(v)) if np.isfinite(v) else None
    return obj


def dumps(obj) -> str:
    """JSON with sorted keys and every float rounded to 9 significant digits."""
    return json.dumps(_rounded(obj), indent=2, sort_keys=True) + "\n"


def write_text(path, text: str):
    atomic_write_bytes(path, text.encode("utf-8"))
