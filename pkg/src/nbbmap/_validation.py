"""Input validation helpers shared by the estimators and the CLI."""

from __future__ import annotations

import numpy as np
from sklearn.utils.validation import check_array

from .errors import RangeError, ShapeError
from .fractal import FractalSpec, get_spec


def check_spec(spec) -> FractalSpec:
    if isinstance(spec, FractalSpec):
        return spec
    return get_spec(spec)


def check_coords(X, name: str = "X") -> np.ndarray:
    """Validate an ``(m, 2)`` array of non-negative integer coordinates."""
    X = check_array(X, dtype=None, ensure_2d=True, input_name=name)
    if X.shape[1] != 2:
        raise ShapeError(f"{name} must have 2 columns (x, y), got {X.shape[1]}")
    if not np.issubdtype(X.dtype, np.integer):
        if not np.all(np.equal(np.mod(X, 1), 0)):
            raise ShapeError(f"{name} must hold integer coordinates")
    X = X.astype(np.int64)
    if X.size and X.min() < 0:
        raise RangeError(f"{name} holds negative coordinates")
    return X


def check_square_grid(X, name: str = "X") -> np.ndarray:
    X = check_array(X, dtype=None, ensure_2d=True, input_name=name)
    if X.shape[0] != X.shape[1]:
        raise ShapeError(f"{name} must be square, got {X.shape}")
    return X
