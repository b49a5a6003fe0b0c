"""Input validation helpers.

Small checks shared by the game types, estimators, and learners. All helpers
raise :class:`~mgx.errors.DimensionMismatch` or ``ValueError`` with a message
naming the offending argument, and return the validated ``ndarray`` so they
can be used inline.
"""

import numpy as np

from .errors import DimensionMismatch, NonFinitePayoff


def as_float_array(x, name="array"):
    """Convert to a float ndarray and verify all entries are finite."""
    arr = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite entries")
    return arr


def check_payoff_matrix(Q):
    """Validate a 2-D payoff matrix; non-finite entries are a hard error."""
    Q = np.asarray(Q, dtype=float)
    if Q.ndim != 2 or Q.shape[0] < 1 or Q.shape[1] < 1:
        raise DimensionMismatch(f"payoff matrix must be 2-D and nonempty, got shape {Q.shape}")
    if not np.all(np.isfinite(Q)):
        raise NonFinitePayoff("payoff matrix contains NaN or infinite entries")
    return Q


def check_prob_rows(arr, name="distribution", tol=1e-10, axis=-1):
    """Verify that slices along ``axis`` are probability vectors."""
    arr = as_float_array(arr, name)
    if np.any(arr < -tol):
        raise ValueError(f"{name} has negative entries (min {arr.min():.3e})")
    sums = arr.sum(axis=axis)
    if not np.allclose(sums, 1.0, atol=tol, rtol=0.0):
        worst = np.abs(sums - 1.0).max()
        raise ValueError(f"{name} rows do not sum to 1 (max deviation {worst:.3e} > {tol:.0e})")
    return arr


def check_shape(arr, shape, name="array"):
    arr = np.asarray(arr)
    if arr.shape != tuple(shape):
        raise DimensionMismatch(f"{name} has shape {arr.shape}, expected {tuple(shape)}")
    return arr


def check_regression_data(X, y):
    """Validate an (X, y) regression pair: 2-D finite X, matching 1-D y."""
    X = as_float_array(X, "X")
    y = as_float_array(y, "y")
    if X.ndim != 2:
        raise DimensionMismatch(f"X must be 2-D, got ndim={X.ndim}")
    if y.ndim != 1 or y.shape[0] != X.shape[0]:
        raise DimensionMismatch(f"y has shape {y.shape}, expected ({X.shape[0]},)")
    return X, y


def normalize_rows(arr, axis=-1):
    """Clip negatives to zero and renormalize onto the simplex.

    All-zero slices fall back to the uniform distribution.
    """
    arr = np.clip(np.asarray(arr, dtype=float), 0.0, None)
    sums = arr.sum(axis=axis, keepdims=True)
    n = arr.shape[axis]
    uniform = np.full_like(arr, 1.0 / n)
    with np.errstate(invalid="ignore", divide="ignore"):
        out = np.where(sums > 0.0, arr / np.where(sums > 0.0, sums, 1.0), uniform)
    return out
