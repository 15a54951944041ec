"""Sparse feature-by-word count matrices and their combinations."""
from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from typing import Optional, Sequence

import numpy as np
import scipy.sparse as sp

from .corpus import Corpus
from .features import ContextFn, FeatureSpace, resolve_all


class SparseCountMatrix:
    """An ``m x n`` (features x words) matrix held in compressed-column form.

    Parameters
    ----------
    matrix : sparse matrix or array-like
        Duplicate entries are summed and explicit zeros removed.
    row_symbols : sequence of str, optional
        Feature symbol of every row.
    provenance : str
        Free-text description of how the matrix was produced.
    meta : dict, optional
        Structured description (feature kind, context kind, tau) used to
        validate combinations.
    """

    def __init__(self, matrix, row_symbols: Optional[Sequence[str]] = None,
                 provenance: str = "", meta: Optional[dict] = None):
        mat = sp.csc_matrix(matrix, dtype=np.float64, copy=True)
        mat.sum_duplicates()
        mat.eliminate_zeros()
        if mat.nnz and mat.data.min() < 0:
            raise ValueError("count matrices hold non-negative values")
        self.matrix = mat
        if row_symbols is not None:
            row_symbols = tuple(row_symbols)
            if len(row_symbols) != mat.shape[0]:
                raise ValueError("row_symbols must name every row")
        self.row_symbols = row_symbols
        self.provenance = provenance
        self.meta = dict(meta or {})
        self._marginals = None

    @property
    def shape(self):
        return self.matrix.shape

    @property
    def m(self):
        return self.matrix.shape[0]

    @property
    def n(self):
        return self.matrix.shape[1]

    @property
    def nnz(self):
        return self.matrix.nnz

    def marginals(self):
        if self._marginals is None:
            rows = np.asarray(self.matrix.sum(axis=1)).ravel()
            cols = np.asarray(self.matrix.sum(axis=0)).ravel()
            self._marginals = (rows, cols)
        return self._marginals

    @property
    def row_marginals(self):
        return self.marginals()[0]

    @property
    def col_marginals(self):
        return self.marginals()[1]

    @property
    def total(self) -> float:
        return float(self.matrix.sum())

    def toarray(self):
        return self.matrix.toarray()

    def triplets(self):
        """``(rows, cols, values)`` in column-major order."""
        coo = self.matrix.tocoo()
        order = np.lexsort((coo.row, coo.col))
        return coo.row[order], coo.col[order], coo.data[order]

    def save(self, path):
        """Spill as ``m n nnz`` followed by ``i j value`` lines."""
        rows, cols, vals = self.triplets()
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(f"{self.m} {self.n} {self.nnz}\n")
            for i, j, v in zip(rows.tolist(), cols.tolist(), vals.tolist()):
                fh.write(f"{i} {j} {v!r}\n")

    @classmethod
    def load(cls, path, row_symbols=None):
        with open(path, encoding="utf-8") as fh:
            header = fh.readline().split()
            if len(header) != 3:
                raise ValueError(f"{path}:1: expected header 'm n nnz'")
            m, n, nnz = (int(x) for x in header)
            data = np.loadtxt(fh, ndmin=2) if nnz else np.zeros((0, 3))
        if data.shape[0] != nnz:
            raise ValueError(f"{path}: header announces {nnz} entries, found {data.shape[0]}")
        mat = sp.csc_matrix((data[:, 2], (data[:, 0].astype(int), data[:, 1].astype(int))),
                            shape=(m, n))
        return cls(mat, row_symbols=row_symbols, provenance=f"loaded from {path}")

    def __repr__(self):
        return f"SparseCountMatrix(m={self.m}, n={self.n}, nnz={self.nnz}, {self.provenance!r})"


def _count_range(corpus, space, ctx, lo, hi, targets):
    fids = space.feature_ids(corpus, targets[lo:hi])
    words = corpus.words[lo:hi]
    hit = fids >= 0
    return sp.csc_matrix(
        (np.ones(int(hit.sum())), (fids[hit], words[hit])),
        shape=(space.m, len(corpus.vocab)),
    )


def count_matrix(corpus: Corpus, space: FeatureSpace, ctx: Optional[ContextFn] = None,
                 n_jobs: int = 1) -> SparseCountMatrix:
    """Count how often each feature fires in the context of each word.

    ``ctx`` must be given when ``space`` was built over several contexts.
    With ``n_jobs > 1`` the corpus is cut into sentence-aligned shards whose
    partial counts are summed.
    """
    if ctx is None:
        if len(space.contexts) != 1:
            raise ValueError("space spans several contexts; pass ctx explicitly")
        ctx = space.contexts[0]
    targets = resolve_all(corpus, ctx)
    shards = max(1, min(int(n_jobs), corpus.n_sentences))
    cuts = corpus.sentence_starts[np.linspace(0, corpus.n_sentences, shards + 1).astype(int)]
    space.feature_ids(corpus, targets[:0])  # warm the lookup cache before threading
    if shards == 1:
        parts = [_count_range(corpus, space, ctx, 0, corpus.T, targets)]
    else:
        with ThreadPoolExecutor(max_workers=shards) as pool:
            parts = list(pool.map(lambda ab: _count_range(corpus, space, ctx, ab[0], ab[1], targets),
                                  zip(cuts[:-1], cuts[1:])))
    total = parts[0]
    for p in parts[1:]:
        total = total + p
    meta = {"feature": space.kind, "context": ctx.kind, "tau": ctx.tau}
    return SparseCountMatrix(total, row_symbols=space.symbols,
                             provenance=f"{space.kind}@{ctx}", meta=meta)


def window_weights(k: int, direction: str = "symmetric"):
    """Offsets and 1/|tau| weights of a backward, forward or symmetric window."""
    if k < 1:
        raise ValueError("window length must be >= 1")
    if direction == "backward":
        taus = list(range(-k, 0))
    elif direction == "forward":
        taus = list(range(1, k + 1))
    elif direction == "symmetric":
        taus = list(range(-k, 0)) + list(range(1, k + 1))
    else:
        raise ValueError(f"unknown window direction {direction!r}")
    return taus, [1.0 / abs(t) for t in taus]


def _check_same_rows(mats):
    syms = [m.row_symbols for m in mats if m.row_symbols is not None]
    if syms and any(s != syms[0] for s in syms[1:]):
        raise ValueError("window combination needs matrices over the same feature space")


def combine_window(mats: Sequence[SparseCountMatrix], alphas: Sequence[float]) -> SparseCountMatrix:
    """Weighted sum of matrices over the same features and context type."""
    mats = list(mats)
    alphas = [float(a) for a in alphas]
    if not mats:
        raise ValueError("nothing to combine")
    if len(alphas) != len(mats):
        raise ValueError("need one weight per matrix")
    if any(not a > 0 for a in alphas):
        raise ValueError("window weights must be positive")
    shape = mats[0].shape
    if any(m.shape != shape for m in mats):
        raise ValueError(f"dimension mismatch: {[m.shape for m in mats]}")
    _check_same_rows(mats)
    for key in ("feature", "context"):
        vals = {m.meta[key] for m in mats if key in m.meta}
        if len(vals) > 1:
            raise ValueError(f"cannot add matrices with different {key}: {sorted(vals)}")
    total = alphas[0] * mats[0].matrix
    for a, m in zip(alphas[1:], mats[1:]):
        total = total + a * m.matrix
    taus = [m.meta.get("tau") for m in mats]
    meta = {k: mats[0].meta[k] for k in ("feature", "context") if k in mats[0].meta}
    meta["taus"] = taus
    meta["alphas"] = alphas
    desc = " + ".join(f"{a:g}*[{m.provenance}]" for a, m in zip(alphas, mats))
    if all(t is not None for t in taus):
        desc = f"window(a={min(taus)}, n={max(taus) - min(taus) + 1}, alpha={alphas}): " + desc
    return SparseCountMatrix(total, row_symbols=mats[0].row_symbols, provenance=desc, meta=meta)


def combine_union(mats: Sequence[SparseCountMatrix]) -> SparseCountMatrix:
    """Stack matrices row-wise (feature sets concatenated, words shared)."""
    mats = list(mats)
    if not mats:
        raise ValueError("nothing to combine")
    n = mats[0].n
    if any(m.n != n for m in mats):
        raise ValueError(f"column-count mismatch: {[m.n for m in mats]}")
    stacked = sp.vstack([m.matrix for m in mats], format="csc")
    symbols = None
    if all(m.row_symbols is not None for m in mats):
        symbols = [f"{b}:{s}" for b, m in enumerate(mats) for s in m.row_symbols]
    desc = "union(" + "; ".join(m.provenance for m in mats) + ")"
    offsets = np.cumsum([0] + [m.m for m in mats]).tolist()
    return SparseCountMatrix(stacked, row_symbols=symbols, provenance=desc,
                             meta={"blocks": offsets})


def marginals(mat: SparseCountMatrix):
    """Feature totals and word totals."""
    return mat.marginals()
