"""Scalar diagnostics over force time series."""

from __future__ import annotations

import numpy as np

from ..errors import ConfigurationError


def step_differences(series):
    s = np.asarray(series, dtype=float).reshape(-1)
    return np.abs(np.diff(s))


def jump_metric(series, move_flags):
    """``(median |dC|, max |dC| at move steps, ratio)``.

    ``move_flags[k]`` marks that sample ``k`` was taken right after a CV move;
    the jump at that sample is ``|series[k] - series[k-1]|``.
    """
    s = np.asarray(series, dtype=float).reshape(-1)
    flags = np.asarray(move_flags, dtype=bool).reshape(-1)
    if s.size != flags.size:
        raise ConfigurationError("series and move flags differ in length")
    if s.size < 10:
        raise ConfigurationError("jump metric needs at least 10 samples")
    d = np.abs(np.diff(s))
    moves = flags[1:]
    if not moves.any():
        raise ConfigurationError("jump metric undefined without CV move steps")
    med = float(np.median(d))
    peak = float(d[moves].max())
    if med == 0.0:
        ratio = 0.0 if peak == 0.0 else np.inf
    else:
        ratio = peak / med
    return med, peak, ratio


def smoothness_ratio(series):
    """Largest step difference over the median step difference."""
    d = step_differences(series)
    if d.size == 0:
        return 0.0
    med = float(np.median(d))
    peak = float(d.max())
    return 0.0 if peak == 0.0 else (np.inf if med == 0.0 else peak / med)


def relative_linf(a, b, scale=None):
    """``max|a - b| / max|b|`` (or over ``scale`` when given)."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    s = float(np.abs(b).max()) if scale is None else float(scale)
    if s == 0.0:
        return 0.0 if np.all(a == b) else np.inf
    return float(np.abs(a - b).max()) / s


def series_stats(series):
    s = np.asarray(series, dtype=float)
    if s.size == 0:
        return {"mean": None, "min": None, "max": None, "amplitude": None, "rms": None, "max_step_jump": None}
    d = step_differences(s)
    return {
        "mean": float(s.mean()),
        "min": float(s.min()),
        "max": float(s.max()),
        "amplitude": float(0.5 * (s.max() - s.min())),
        "rms": float(np.sqrt(np.mean(s * s))),
        "max_step_jump": float(d.max()) if d.size else 0.0,
        "median_step_jump": float(np.median(d)) if d.size else 0.0,
    }
