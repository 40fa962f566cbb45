"""Input validation helpers shared by the estimators."""

from __future__ import annotations

import numpy as np
import scipy.sparse as sp
from sklearn.exceptions import NotFittedError


def check_count_matrix(X) -> sp.csr_matrix:
    """Coerce X to a CSR matrix of non-negative integer counts."""
    if sp.issparse(X):
        X = X.tocsr()
    else:
        X = sp.csr_matrix(np.asarray(X))
    if X.ndim != 2:
        raise ValueError(f"expected a 2-d count matrix, got ndim={X.ndim}")
    if X.nnz and X.data.min() < 0:
        raise ValueError("count matrix has negative entries")
    if not np.issubdtype(X.dtype, np.integer):
        data = X.data
        if X.nnz and not np.array_equal(data, np.round(data)):
            raise ValueError("count matrix has non-integer entries")
        X = X.astype(np.int64)
    X.sort_indices()
    return X


def check_labels(y, n_rows: int) -> np.ndarray:
    y = np.asarray(y)
    if y.ndim != 1:
        raise ValueError(f"labels must be 1-d, got shape {y.shape}")
    if len(y) != n_rows:
        raise ValueError(f"X has {n_rows} rows but y has {len(y)} labels")
    if not np.issubdtype(y.dtype, np.integer):
        raise ValueError(f"labels must be integers, got dtype {y.dtype}")
    y = y.astype(np.int64)
    if len(y) and y.min() < 0:
        raise ValueError("labels must be non-negative class indices")
    return y


def check_fraction(value: float, name: str = "test_fraction") -> float:
    value = float(value)
    if not 0.0 < value < 1.0:
        raise ValueError(f"{name} must be in (0, 1), got {value}")
    return value


def check_fitted(estimator, attribute: str) -> None:
    if not hasattr(estimator, attribute):
        raise NotFittedError(
            f"{type(estimator).__name__} is not fitted yet; call fit() first"
        )
