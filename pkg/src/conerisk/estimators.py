"""scikit-learn style wrapper around the projection estimator.

Each row of ``X`` is one observation ``Y`` in R^n and ``transform`` returns
its least squares projection onto the constraint set.
"""
from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_array, check_is_fitted

from . import sets as S
from .exceptions import InvalidInputError

# set kinds whose only parameter is the dimension
_DIM_ONLY = ("orthant", "ball", "monotone")


def resolve_constraint(constraint, n_features: int):
    """Turn a set spec (``"monotone"``, ``"blockmonotone:sizes=2,3"``, ...) or
    a set object into a set of dimension ``n_features``."""
    if isinstance(constraint, str):
        spec = constraint.strip()
        if spec.lower() in _DIM_ONLY:
            spec = f"{spec}:n={n_features}"
        cset = S.parse_set_spec(spec)
    else:
        cset = constraint
    if not hasattr(cset, "project_many"):
        raise InvalidInputError(f"not a constraint set: {constraint!r}")
    if cset.dim != n_features:
        raise InvalidInputError(f"constraint has dimension {cset.dim}, X has {n_features} columns")
    return cset


class ConstrainedLeastSquares(TransformerMixin, BaseEstimator):
    """Least squares projection onto a closed convex set.

    Parameters
    ----------
    constraint : str or constraint set, default="monotone"
        A set spec; ``"orthant"``, ``"ball"`` and ``"monotone"`` take their
        dimension from the data.

    Attributes
    ----------
    constraint_ : constraint set
    n_features_in_ : int
    """

    def __init__(self, constraint="monotone"):
        self.constraint = constraint

    def fit(self, X, y=None):
        X = check_array(X, dtype=np.float64)
        self.constraint_ = resolve_constraint(self.constraint, X.shape[1])
        self.n_features_in_ = X.shape[1]
        return self

    def transform(self, X):
        check_is_fitted(self, "constraint_")
        X = check_array(X, dtype=np.float64)
        if X.shape[1] != self.n_features_in_:
            raise ValueError(f"X has {X.shape[1]} features, expected {self.n_features_in_}")
        return self.constraint_.project_many(X)

    def residual(self, X) -> np.ndarray:
        """``X - transform(X)``, the component removed by the projection."""
        X = check_array(X, dtype=np.float64)
        return X - self.transform(X)
