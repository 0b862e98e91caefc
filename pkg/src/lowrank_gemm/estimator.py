"""scikit-learn compatible front end for the low-rank approximation core.

`LowRankApproximator` follows the TruncatedSVD conventions (fit stores
``components_``; transform projects onto them) so the decomposition drops
into sklearn pipelines, grid search and clone() unchanged, while delegating
the numerics to :mod:`lowrank_gemm.decomposition`.
"""

from __future__ import annotations

import numbers

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_array, check_is_fitted

from .decomposition import (
    EnergyThreshold,
    ErrorConstrained,
    HardwareAware,
    RankPolicy,
    decompose,
    reconstruct,
    truncated_svd,
)
from .matrices import DenseMatrix

__all__ = ["LowRankApproximator"]


class LowRankApproximator(BaseEstimator, TransformerMixin):
    """Truncated low-rank approximation with pluggable rank selection.

    Exactly one of ``rank``, ``energy``, ``max_error`` or
    ``memory_budget_bytes`` chooses the truncation; with none given, 99%
    energy retention is used.

    Parameters
    ----------
    rank : int, optional
        Fixed truncation rank.
    energy : float, optional
        Retained squared-singular-value fraction, in (0, 1].
    max_error : float, optional
        Relative Frobenius reconstruction error ceiling.
    memory_budget_bytes : int, optional
        Factor-storage budget; combine with ``bytes_per_element``.
    bytes_per_element : int, default=8
        Element width assumed by the memory budget.
    method : {"exact", "randomized"}, default="exact"
        Decomposition backend.
    random_state : int, default=0
        Seed for the randomized range finder.

    Attributes
    ----------
    components_ : ndarray of shape (rank_, n_features)
        Right singular rows Vt.
    singular_values_ : ndarray of shape (rank_,)
    rank_ : int
        Selected rank.
    factors_ : SvdFactors
        The full truncated triple, for use with the multiply pipeline.
    """

    def __init__(
        self,
        rank=None,
        energy=None,
        max_error=None,
        memory_budget_bytes=None,
        bytes_per_element=8,
        method="exact",
        random_state=0,
    ):
        self.rank = rank
        self.energy = energy
        self.max_error = max_error
        self.memory_budget_bytes = memory_budget_bytes
        self.bytes_per_element = bytes_per_element
        self.method = method
        self.random_state = random_state

    def _policy(self) -> RankPolicy | None:
        chosen = [
            name
            for name, value in (
                ("rank", self.rank),
                ("energy", self.energy),
                ("max_error", self.max_error),
                ("memory_budget_bytes", self.memory_budget_bytes),
            )
            if value is not None
        ]
        if len(chosen) > 1:
            raise ValueError(f"rank selection knobs are mutually exclusive, got {chosen}")
        if self.rank is not None:
            if not isinstance(self.rank, numbers.Integral) or self.rank < 1:
                raise ValueError(f"rank must be a positive integer, got {self.rank!r}")
            return None
        if self.energy is not None:
            return EnergyThreshold(float(self.energy))
        if self.max_error is not None:
            return ErrorConstrained(float(self.max_error))
        if self.memory_budget_bytes is not None:
            return HardwareAware(int(self.memory_budget_bytes), int(self.bytes_per_element))
        return EnergyThreshold(0.99)

    def fit(self, X, y=None):
        """Factorize ``X`` and store the truncated triple.

        Returns self.
        """
        X = check_array(X, dtype=np.float64, ensure_min_samples=1, ensure_min_features=1)
        policy = self._policy()
        matrix = DenseMatrix(X)
        if policy is None:
            factors = truncated_svd(matrix, min(self.rank, min(X.shape)))
        else:
            factors = decompose(matrix, policy, method=self.method, seed=self.random_state)
        self.factors_ = factors
        self.components_ = np.asarray(factors.vt.data)
        self.singular_values_ = np.asarray(factors.s)
        self.rank_ = factors.rank
        self.n_features_in_ = X.shape[1]
        return self

    def transform(self, X):
        """Project rows of ``X`` onto the fitted right singular basis."""
        check_is_fitted(self, "components_")
        X = check_array(X, dtype=np.float64)
        if X.shape[1] != self.n_features_in_:
            raise ValueError(
                f"X has {X.shape[1]} features, estimator was fitted with {self.n_features_in_}"
            )
        return X @ self.components_.T

    def inverse_transform(self, X):
        """Map projected rows back to the original feature space."""
        check_is_fitted(self, "components_")
        X = check_array(X, dtype=np.float64)
        if X.shape[1] != self.rank_:
            raise ValueError(f"X has {X.shape[1]} columns, expected rank_ = {self.rank_}")
        return X @ self.components_

    def reconstruction(self) -> np.ndarray:
        """The rank-``rank_`` approximation of the fitted matrix."""
        check_is_fitted(self, "factors_")
        return np.asarray(reconstruct(self.factors_).data)
