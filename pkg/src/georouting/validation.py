"""Input validation helpers shared by the estimators and the numeric code."""

from __future__ import annotations

import numbers

import numpy as np


def check_probability_vector(theta, *, name="theta", allow_zero=False):
    """Return ``theta`` as a read-only float array with entries in (0, 1].

    Parameters
    ----------
    theta : array-like of shape (n_links,)
    name : str
        Used in error messages.
    allow_zero : bool
        Accept exact zeros (empirical estimates may be 0).
    """
    arr = np.array(theta, dtype=float).ravel()
    if arr.size == 0:
        raise ValueError(f"{name} must be non-empty")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite values")
    low_ok = arr >= 0 if allow_zero else arr > 0
    if not np.all(low_ok & (arr <= 1)):
        bound = "[0, 1]" if allow_zero else "(0, 1]"
        raise ValueError(f"{name} entries must lie in {bound}, got {arr.tolist()}")
    arr.setflags(write=False)
    return arr


def check_weights(weights, n_links):
    weights = np.asarray(weights, dtype=float)
    if weights.shape != (n_links,):
        raise ValueError(f"expected {n_links} weights, got shape {weights.shape}")
    if np.any(np.isnan(weights)) or np.any(weights < 0):
        raise ValueError("weights must be nonnegative")
    return weights


def check_positive_int(value, name, minimum=1):
    if isinstance(value, bool) or not isinstance(value, numbers.Integral):
        raise TypeError(f"{name} must be an integer, got {type(value).__name__}")
    if value < minimum:
        raise ValueError(f"{name} must be >= {minimum}, got {value}")
    return int(value)


def check_random_state(seed):
    """Turn ``seed`` into a ``numpy.random.Generator``.

    Accepts None, an int, a SeedSequence or an existing Generator.
    """
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)
