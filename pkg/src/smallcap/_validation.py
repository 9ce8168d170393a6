"""Small input checks shared by the estimators and the command line."""

from __future__ import annotations

import math
import numbers

import numpy as np
from sklearn.utils.validation import check_array

from .engine import MAX_SPACING


def check_positive(name, value, integer=False):
    """Return ``value`` if it is a finite positive number (an int when asked)."""
    kind = numbers.Integral if integer else numbers.Real
    if isinstance(value, bool) or not isinstance(value, kind):
        raise TypeError(f"{name} must be {'an integer' if integer else 'a number'}, got {value!r}")
    if not math.isfinite(value) or value <= 0:
        raise ValueError(f"{name} must be positive and finite, got {value!r}")
    return value


def check_spacing(spacing):
    check_positive("spacing", spacing)
    if spacing > MAX_SPACING:
        raise ValueError(f"spacing must be <= {MAX_SPACING} to resolve frequencies up to 1")
    return float(spacing)


def check_frequencies(X, y=None):
    """Frequencies as a 1D float array in [-1, 1] and optional complex weights."""
    pts = check_array(np.asarray(X, dtype=float).reshape(-1, 1), ensure_2d=True).ravel()
    if np.any(np.abs(pts) > 1 + 1e-12):
        raise ValueError("frequencies must lie in [-1, 1]")
    if y is None:
        return pts, None
    coeffs = np.asarray(y, dtype=complex).ravel()
    if coeffs.shape != pts.shape:
        raise ValueError("coefficients must match the frequencies")
    if not np.all(np.isfinite(coeffs)):
        raise ValueError("coefficients must be finite")
    return pts, coeffs


def check_points(X):
    """(n, 2) array of (x, t) sample points."""
    P = check_array(X, dtype=float, ensure_2d=True)
    if P.shape[1] != 2:
        raise ValueError("points must have two columns (x, t)")
    return P


def check_alphas(alphas):
    a = np.atleast_1d(np.asarray(alphas, dtype=float))
    if a.ndim != 1 or a.size == 0:
        raise ValueError("alphas must be a non-empty 1D sequence")
    if np.any(~np.isfinite(a)) or np.any(a < 0):
        raise ValueError("alphas must be finite and non-negative")
    return a
