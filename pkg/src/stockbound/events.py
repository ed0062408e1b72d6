"""Stockout event patterns shared by bound computation and simulation.

A pattern names which joint shortfall event is being bounded or simulated:

``all_exceed``
    every commodity's lead-time demand exceeds its threshold
``union``
    at least one commodity exceeds its threshold (two commodities)
``orthant``
    commodities with sign +1 exceed, commodities with sign -1 stay below
``fungible``
    the pooled demand across commodities exceeds a single threshold
"""

from __future__ import annotations

import numpy as np

ALL_EXCEED = "all_exceed"
UNION = "union"
ORTHANT = "orthant"
FUNGIBLE = "fungible"
PATTERNS = (ALL_EXCEED, UNION, ORTHANT, FUNGIBLE)

__all__ = ["ALL_EXCEED", "FUNGIBLE", "ORTHANT", "PATTERNS", "UNION", "check_pattern", "event_mask"]


def check_pattern(pattern: str, dim: int, signs=None) -> np.ndarray | None:
    """Validate a pattern name against the dimension; returns cleaned signs."""
    if pattern not in PATTERNS:
        raise ValueError(f"unknown stockout pattern {pattern!r}")
    if pattern == UNION and dim != 2:
        raise ValueError("the union pattern is defined for exactly two commodities")
    if pattern == ORTHANT:
        if signs is None:
            raise ValueError("the orthant pattern requires a sign vector")
        arr = np.asarray(signs, dtype=float).reshape(-1)
        if arr.shape[0] != dim or not np.all(np.abs(arr) == 1.0):
            raise ValueError("signs must be a vector of +1/-1, one per commodity")
        return arr
    return None


def event_mask(x: np.ndarray, thresholds, pattern: str, signs=None) -> np.ndarray:
    """Boolean mask of rows of ``x`` (draws by commodities) hitting the event."""
    if pattern == FUNGIBLE:
        return x.sum(axis=1) >= float(np.asarray(thresholds).reshape(()))
    t = np.asarray(thresholds, dtype=float).reshape(-1)
    if pattern == ALL_EXCEED:
        return np.all(x >= t, axis=1)
    if pattern == UNION:
        return np.any(x >= t, axis=1)
    if pattern == ORTHANT:
        s = np.asarray(signs, dtype=float).reshape(-1)
        return np.all(np.where(s > 0, x >= t, x <= t), axis=1)
    raise ValueError(f"unknown stockout pattern {pattern!r}")
