"""Input checks shared by the estimator wrappers."""

import numpy as np
from sklearn.utils.validation import check_array

from .exceptions import DomainError


def check_signals(X, n=None):
    """Validate a batch of sampled signals, one per row.

    Real input goes through :func:`sklearn.utils.validation.check_array`;
    complex input (which scikit-learn refuses) is checked by hand.

    Returns
    -------
    ndarray of complex, shape (n_samples, n_points)
    """
    arr = np.asarray(X)
    if np.iscomplexobj(arr):
        if arr.ndim == 1:
            raise DomainError("expected a 2-D array of signals, one per row")
        if arr.ndim != 2 or arr.shape[0] == 0:
            raise DomainError(f"expected a nonempty 2-D array, got shape {arr.shape}")
        if not np.all(np.isfinite(arr)):
            raise DomainError("signals contain NaN or infinity")
        out = arr.astype(complex)
    else:
        out = check_array(arr, dtype=np.float64).astype(complex)
    if n is not None and out.shape[1] != n:
        raise DomainError(f"signals have {out.shape[1]} samples, the grid has {n}")
    return out


def check_grid_size(n):
    n = int(n)
    if n < 4 or n & (n - 1):
        raise DomainError(f"grid_n must be a power of two >= 4, got {n}")
    return n
