"""Input checking shared by the public functions and estimators."""

from __future__ import annotations

import numbers

import numpy as np


class DegeneratePatternError(ValueError):
    """A probe pattern produced an all-zero row in ``D^H B``."""


def check_positive_int(value, name, minimum=1):
    if isinstance(value, bool) or not isinstance(value, numbers.Integral):
        raise TypeError(f"{name} must be an integer, got {type(value).__name__}")
    if value < minimum:
        raise ValueError(f"{name} must be >= {minimum}, got {value}")
    return int(value)


def check_complex_array(x, name="array", ndim=None, shape=None):
    """Return ``x`` as a finite complex128 array, optionally checking its shape."""
    arr = np.asarray(x)
    if arr.dtype == object or not np.issubdtype(arr.dtype, np.number):
        raise TypeError(f"{name} must be numeric")
    arr = arr.astype(np.complex128, copy=False)
    if ndim is not None and arr.ndim != ndim:
        raise ValueError(f"{name} must be {ndim}-D, got shape {arr.shape}")
    if shape is not None:
        for axis, (got, want) in enumerate(zip(arr.shape, shape)):
            if want is not None and got != want:
                raise ValueError(
                    f"{name} has size {got} along axis {axis}, expected {want}"
                )
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains NaN or inf")
    return arr


def check_square(G, name="G", min_size=1):
    G = np.asarray(G, dtype=float)
    if G.ndim != 2 or G.shape[0] != G.shape[1]:
        raise ValueError(f"{name} must be a square matrix, got shape {G.shape}")
    if G.shape[0] < min_size:
        raise ValueError(f"{name} must be at least {min_size}x{min_size}")
    return G


def as_generator(rng):
    """Accept a Generator, a seed, or a SeedSequence."""
    if isinstance(rng, np.random.Generator):
        return rng
    return np.random.default_rng(rng)
