"""scikit-learn compatible wrappers around the block map and the compact codec."""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from ._validation import check_coords, check_spec, check_square_grid
from .blockmap import BlockGeometry, lambda_array, lambda_inverse_array
from .codec import compact_load, compact_store
from .errors import RangeError, ShapeError
from .fractal import orthotope_dims, scale_level


class LambdaMap(TransformerMixin, BaseEstimator):
    """Map orthotope block coordinates to embedded block coordinates.

    Parameters
    ----------
    spec : str, path or FractalSpec, default="sierpinski"
    r_b : int or None
        Block-space level.  If ``None``, ``fit`` picks the smallest level
        whose orthotope contains every row of ``X``.
    rho : int, default=1
        Block edge.  ``transform`` returns block coordinates; multiply by
        ``rho`` for the block's first cell.

    Attributes
    ----------
    spec_ : FractalSpec
    r_b_ : int
    geometry_ : BlockGeometry
    orthotope_shape_ : (int, int)
        ``(width, height)`` of the launch grid.
    """

    def __init__(self, spec="sierpinski", r_b=None, rho=1):
        self.spec = spec
        self.r_b = r_b
        self.rho = rho

    def fit(self, X=None, y=None):
        spec = check_spec(self.spec)
        r_b = self.r_b
        if r_b is None:
            if X is None:
                raise ValueError("either set r_b or pass block coordinates to fit")
            X = check_coords(X)
            r_b = 0
            while True:
                w, h = orthotope_dims(spec, r_b)
                if (X[:, 0] < w).all() and (X[:, 1] < h).all():
                    break
                r_b += 1
        self.spec_ = spec
        self.r_b_ = int(r_b)
        self.geometry_ = BlockGeometry.from_level(spec, self.r_b_, self.rho)
        self.orthotope_shape_ = orthotope_dims(spec, self.r_b_)
        return self

    def transform(self, X):
        check_is_fitted(self, "geometry_")
        X = check_coords(X)
        w, h = self.orthotope_shape_
        if (X[:, 0] >= w).any() or (X[:, 1] >= h).any():
            raise RangeError(f"block coordinates outside the {w}x{h} orthotope")
        x, y = lambda_array(self.spec_, self.r_b_, X[:, 0], X[:, 1])
        return np.column_stack([x, y])

    def inverse_transform(self, X):
        check_is_fitted(self, "geometry_")
        X = check_coords(X)
        n_b = self.geometry_.n_b
        if X.size and X.max() >= n_b:
            raise RangeError(f"cells outside the {n_b}x{n_b} block space")
        wx, wy = lambda_inverse_array(self.spec_, self.r_b_, X[:, 0], X[:, 1])
        return np.column_stack([wx, wy])


class CompactCodec(TransformerMixin, BaseEstimator):
    """Pack square embedded grids into their orthotope and back.

    ``fit`` reads the level from the grid side; ``transform`` returns the
    ``(height, width)`` compact grid and ``inverse_transform`` restores the
    embedded grid with non-member cells set to ``fill``.
    """

    def __init__(self, spec="sierpinski", fill=0):
        self.spec = spec
        self.fill = fill

    def fit(self, X, y=None):
        X = check_square_grid(X)
        spec = check_spec(self.spec)
        self.spec_ = spec
        self.r_ = scale_level(X.shape[0], spec.s)
        self.geometry_ = BlockGeometry.from_level(spec, self.r_)
        self.compact_shape_ = orthotope_dims(spec, self.r_)[::-1]
        return self

    def transform(self, X):
        check_is_fitted(self, "geometry_")
        X = check_square_grid(X)
        if X.shape[0] != self.geometry_.n_b:
            raise ShapeError(f"codec fitted for side {self.geometry_.n_b}, got {X.shape[0]}")
        return compact_store(self.spec_, self.geometry_, X)

    def inverse_transform(self, X):
        check_is_fitted(self, "geometry_")
        return compact_load(self.spec_, self.geometry_, np.asarray(X), fill=self.fill)
