"""Randomized SVD of an implicitly mean-centred matrix.

Everything here works on ``X - E 1^T`` without ever forming it: products go
through :func:`apply` / :func:`apply_t`, the random sketch is corrected for
the centring with a rank-one QR update, and the projection onto the basis
subtracts ``Q^T E`` from every column of ``Q^T X``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp


@dataclass(frozen=True)
class SketchParams:
    """Target rank ``k``, sketch width ``K``, power iterations ``q``."""

    k: int
    K: int | None = None
    q: int = 2
    seed: int | None = 0

    def __post_init__(self):
        if self.k < 1:
            raise ValueError("rank k must be >= 1")
        if self.K is None:
            object.__setattr__(self, "K", self.k + 10)
        if self.K < self.k:
            raise ValueError(f"sketch width K={self.K} smaller than rank k={self.k}")
        if self.q < 0:
            raise ValueError("power iterations q must be >= 0")


@dataclass(frozen=True)
class SvdFactors:
    U: np.ndarray
    S: np.ndarray
    V: np.ndarray

    @property
    def k(self):
        return len(self.S)


class CenteredOperator:
    """The matrix ``X - E 1^T`` represented by ``X`` (sparse or dense) and ``E``."""

    def __init__(self, X, E):
        if sp.issparse(X):
            X = sp.csr_matrix(X, dtype=np.float64)
        else:
            X = np.asarray(X, dtype=np.float64)
            if X.ndim != 2:
                raise ValueError("X must be two-dimensional")
        E = np.asarray(E, dtype=np.float64).ravel()
        if E.shape[0] != X.shape[0]:
            raise ValueError(f"centring vector has length {E.shape[0]}, expected {X.shape[0]}")
        self.X = X
        self.E = E

    @property
    def shape(self):
        return self.X.shape

    def dense(self):
        """Materialize the centred matrix. For tests and small problems only."""
        X = self.X.toarray() if sp.issparse(self.X) else self.X
        return X - self.E[:, None]


def apply(op: CenteredOperator, W) -> np.ndarray:
    """``(X - E 1^T) W``."""
    W = np.asarray(W, dtype=np.float64)
    if W.ndim != 2 or W.shape[0] != op.shape[1]:
        raise ValueError(f"cannot multiply {op.shape} operator by {W.shape}")
    return np.asarray(op.X @ W) - np.outer(op.E, W.sum(axis=0))


def apply_t(op: CenteredOperator, U) -> np.ndarray:
    """``(X - E 1^T)^T U``."""
    U = np.asarray(U, dtype=np.float64)
    if U.ndim != 2 or U.shape[0] != op.shape[0]:
        raise ValueError(f"cannot multiply transposed {op.shape} operator by {U.shape}")
    XtU = np.asarray(op.X.T @ U)
    return XtU - (op.E @ U)[None, :]


def givens(a: float, b: float):
    """Return ``(c, s, r)`` with ``[c s; -s c] @ [a; b] = [r; 0]``."""
    if b == 0.0:
        return 1.0, 0.0, a
    r = np.hypot(a, b)
    return a / r, b / r, r


def _rot_rows(A, i, j, c, s):
    ai = A[i].copy()
    A[i] = c * ai + s * A[j]
    A[j] = -s * ai + c * A[j]


def _rot_cols(A, i, j, c, s):
    ai = A[:, i].copy()
    A[:, i] = c * ai + s * A[:, j]
    A[:, j] = -s * ai + c * A[:, j]


def qr_rank_one_update(Q, R, u, v, check=True):
    """Thin QR factors of ``Q R + u v^T`` by plane rotations.

    ``u`` is split into its component inside ``span(Q)`` and one extra
    orthogonal direction. The augmented triangular factor plus the rank-one
    term is brought back to triangular form with two sweeps of Givens
    rotations: the first turns the update vector into a multiple of ``e_1``
    (leaving ``R`` upper Hessenberg), the second removes the subdiagonal.

    Parameters
    ----------
    Q : ndarray, shape (m, K)
        Orthonormal columns.
    R : ndarray, shape (K, K)
        Upper triangular.
    u : ndarray, shape (m,)
    v : ndarray, shape (K,)

    Returns
    -------
    Q1 : ndarray, shape (m, K)
    R1 : ndarray, shape (K, K)
    """
    Q = np.asarray(Q, dtype=np.float64)
    R = np.asarray(R, dtype=np.float64)
    u = np.asarray(u, dtype=np.float64).ravel()
    v = np.asarray(v, dtype=np.float64).ravel()
    m, K = Q.shape
    if R.shape != (K, K) or u.shape != (m,) or v.shape != (K,):
        raise ValueError(f"shape mismatch: Q {Q.shape}, R {R.shape}, u {u.shape}, v {v.shape}")
    if check:
        err = np.abs(Q.T @ Q - np.eye(K)).max() if K else 0.0
        if err > 1e-8:
            raise ValueError(f"Q is not orthonormal (max deviation {err:.2e})")

    # w = Q^T u with one round of reorthogonalization
    w = Q.T @ u
    r = u - Q @ w
    w2 = Q.T @ r
    r -= Q @ w2
    w += w2
    rho = np.linalg.norm(r)
    unorm = np.linalg.norm(u)
    if K < m and rho > 1e-14 * max(unorm, 1.0) and rho > 0:
        Qa = np.column_stack([Q, r / rho])
        Ra = np.vstack([R, np.zeros((1, K))])
        z = np.append(w, rho)
    else:
        Qa = Q.copy()
        Ra = R.copy()
        z = w
    p = len(z)

    # rotate z into a multiple of e_1, bottom up; Ra becomes upper Hessenberg
    for i in range(p - 2, -1, -1):
        c, s, rr = givens(z[i], z[i + 1])
        z[i], z[i + 1] = rr, 0.0
        _rot_rows(Ra, i, i + 1, c, s)
        _rot_cols(Qa, i, i + 1, c, s)
    Ra[0] += z[0] * v

    # chase the subdiagonal away
    for i in range(min(p - 1, K)):
        c, s, rr = givens(Ra[i, i], Ra[i + 1, i])
        _rot_rows(Ra, i, i + 1, c, s)
        Ra[i + 1, i] = 0.0
        _rot_cols(Qa, i, i + 1, c, s)

    return Qa[:, :K].copy(), np.triu(Ra[:K]).copy()


def _gaussian_sketch(n, K, seed):
    rng = np.random.default_rng(seed)
    return rng.standard_normal((n, K))


def _validate_sketch(shape, params: SketchParams):
    m, n = shape
    if params.K > min(m, n):
        raise ValueError(f"sketch width K={params.K} exceeds min(m, n)={min(m, n)}")


def centered_range_finder(X, E, params: SketchParams, mode: str = "centered") -> np.ndarray:
    """Orthonormal ``m x K`` basis approximating the range of ``X - E 1^T``.

    The Gaussian sketch ``X G`` is factored once and the centring is folded in
    with a rank-one QR update (``u = -E``, ``v = G^T 1``). Each power iteration
    forms ``A (A^T Q)`` and performs a single QR.

    ``mode="centered"`` runs the power iterations on the centred operator.
    ``mode="deferred"`` iterates on the raw ``X`` and applies the centring update
    once at the end; both agree when ``q == 0``.
    """
    if mode not in ("centered", "deferred"):
        raise ValueError(f"unknown range finder mode {mode!r}")
    op = X if isinstance(X, CenteredOperator) else CenteredOperator(X, E)
    _validate_sketch(op.shape, params)
    n = op.shape[1]
    G = _gaussian_sketch(n, params.K, params.seed)
    correction_v = G.sum(axis=0)

    Q, R = np.linalg.qr(np.asarray(op.X @ G))
    if mode == "centered":
        Q, R = qr_rank_one_update(Q, R, -op.E, correction_v)
        for _ in range(params.q):
            Q, R = np.linalg.qr(apply(op, apply_t(op, Q)))
        return Q

    raw = CenteredOperator(op.X, np.zeros_like(op.E))
    for _ in range(params.q):
        Q, R = np.linalg.qr(apply(raw, apply_t(raw, Q)))
    Q, R = qr_rank_one_update(Q, R, -op.E, correction_v)
    return Q


def _canonical_signs(U, V):
    # largest-magnitude entry of each left vector made positive
    if U.shape[1] == 0:
        return U, V
    idx = np.argmax(np.abs(U), axis=0)
    signs = np.sign(U[idx, np.arange(U.shape[1])])
    signs[signs == 0] = 1.0
    return U * signs, V * signs


def centered_svd(X, E, params: SketchParams, mode: str = "centered") -> SvdFactors:
    """Rank-``k`` SVD of ``X - E 1^T``.

    Returns factors with ``U`` of shape (m, k), ``S`` descending and ``V`` of
    shape (n, k).
    """
    op = X if isinstance(X, CenteredOperator) else CenteredOperator(X, E)
    Q = centered_range_finder(op, None, params, mode=mode)
    # Y = Q^T X - (Q^T E) 1^T: subtract the projected centre from every column
    Y = np.asarray((op.X.T @ Q).T)
    Y -= (Q.T @ op.E)[:, None]
    U1, S, Vt = np.linalg.svd(Y, full_matrices=False)
    k = params.k
    U = Q @ U1[:, :k]
    V = Vt[:k].T
    U, V = _canonical_signs(U, V)
    return SvdFactors(U=U, S=S[:k].copy(), V=np.ascontiguousarray(V))


def save_dense(path, A):
    """Spill a dense matrix as a ``rows cols`` header and row-major values."""
    A = np.atleast_2d(np.asarray(A, dtype=np.float64))
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(f"{A.shape[0]} {A.shape[1]}\n")
        for row in A:
            fh.write(" ".join(repr(float(x)) for x in row) + "\n")


def load_dense(path) -> np.ndarray:
    with open(path, encoding="utf-8") as fh:
        rows, cols = (int(x) for x in fh.readline().split())
        data = np.loadtxt(fh, ndmin=2) if rows and cols else np.zeros((rows, cols))
    return data.reshape(rows, cols)
