"""Input checks shared by the estimators and pipeline stages."""
from __future__ import annotations

from typing import Optional

import numpy as np
import scipy.sparse as sp
from sklearn.utils.validation import check_array


def check_nonnegative(M, what: str = "operation"):
    """Raise if ``M`` (sparse or dense) holds a negative entry."""
    data = M.data if sp.issparse(M) else np.asarray(M)
    if data.size and np.nanmin(data) < 0:
        raise ValueError(f"negative entry not allowed for {what}")


def check_count_matrix(X) -> sp.csc_matrix:
    """Validate a finite 2-D array or sparse matrix and return it as CSC float64."""
    X = check_array(X, accept_sparse=("csr", "csc", "coo"), dtype=np.float64,
                    ensure_min_samples=1, ensure_min_features=1)
    return sp.csc_matrix(X)


def check_random_state_seed(seed: Optional[int], salt: int = 0) -> Optional[int]:
    """Derive an independent stage seed from a run seed.

    ``None`` stays ``None`` (fresh entropy); otherwise ``(seed, salt)`` is
    hashed through :class:`numpy.random.SeedSequence`.
    """
    if seed is None:
        return None
    return int(np.random.SeedSequence([int(seed), int(salt)]).generate_state(1)[0])


def check_positive_int(value, name: str, minimum: int = 1) -> int:
    if isinstance(value, bool) or int(value) != value or value < minimum:
        raise ValueError(f"{name} must be an integer >= {minimum}, got {value!r}")
    return int(value)
