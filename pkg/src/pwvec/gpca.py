"""Generalized PCA of contextual matrices and the principal-word-vector pipeline.

The contextual matrix ``M`` (features x words) is scaled by a diagonal
metric on its rows and a diagonal weight on its columns, passed through an
element-wise transform, implicitly centred on its row means and factored with
:func:`pwvec.linalg.centered_svd`. The right singular vectors, weighted by
the eigenvalue weighting, are the word vectors.
"""
from __future__ import annotations

import hashlib
import logging
import math
import warnings
from dataclasses import dataclass, field
from typing import Optional, Sequence, Union

import numpy as np
import scipy.sparse as sp
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from ._validation import check_count_matrix, check_random_state_seed
from .coocmat import SparseCountMatrix, combine_union, combine_window, count_matrix, window_weights
from .corpus import UNKNOWN, Corpus
from .features import ContextFn, build_feature_space
from .linalg import SketchParams, centered_svd
from .transform import AnnealParams, TransformSpec, apply_transform, tune_power

logger = logging.getLogger(__name__)

METRIC_KINDS = ("identity", "iff", "isf")
WEIGHT_KINDS = ("identity", "iwf")
TUNE_KINDS = ("tune_single", "tune_vector")


def _reciprocal(x):
    out = np.zeros_like(x, dtype=np.float64)
    nz = x > 0
    out[nz] = 1.0 / x[nz]
    return out


def _as_csc(M):
    if isinstance(M, SparseCountMatrix):
        return M.matrix
    return sp.csc_matrix(M, dtype=np.float64)


def build_metric(M, kind: str = "identity") -> np.ndarray:
    """Diagonal of the row metric: ones, ``1/row sum`` or ``1/row std``.

    The standard deviation treats each row as an ``n``-point sample (divisor
    ``n - 1``). Rows with zero sum or zero variance get 0.
    """
    if kind not in METRIC_KINDS:
        raise ValueError(f"unknown metric {kind!r}")
    X = _as_csc(M)
    m, n = X.shape
    if kind == "identity":
        return np.ones(m)
    rows = np.asarray(X.sum(axis=1)).ravel()
    if kind == "iff":
        return _reciprocal(rows)
    if n < 2:
        return np.zeros(m)
    mean = rows / n
    sq = np.asarray(X.multiply(X).sum(axis=1)).ravel()
    var = np.maximum(sq - n * mean ** 2, 0.0) / (n - 1)
    # relative floor against cancellation in constant rows
    var[var <= 1e-14 * np.maximum(sq / n, np.finfo(float).tiny)] = 0.0
    return _reciprocal(np.sqrt(var))


def build_weight(M, kind: str = "identity") -> np.ndarray:
    """Diagonal of the column weight: ones or ``1/column sum`` (0 for empty columns)."""
    if kind not in WEIGHT_KINDS:
        raise ValueError(f"unknown weight {kind!r}")
    X = _as_csc(M)
    if kind == "identity":
        return np.ones(X.shape[1])
    return _reciprocal(np.asarray(X.sum(axis=0)).ravel())


def scale(M, metric: np.ndarray, weight: np.ndarray) -> sp.csc_matrix:
    """``diag(metric) @ M @ diag(weight)`` as row and column scaling."""
    X = _as_csc(M).copy()
    X.data *= metric[X.indices]
    X.data *= np.repeat(weight, np.diff(X.indptr))
    X.eliminate_zeros()
    return X


def pmi_matrix(M) -> sp.csc_matrix:
    """Positive pointwise mutual information on the support of a count matrix.

    Entries are ``max(0, log(T M_ij / (r_i c_j)))`` with ``T`` the grand total
    and ``r``, ``c`` the row and column sums.
    """
    X = _as_csc(M)
    T = float(X.sum())
    if T <= 0:
        return sp.csc_matrix(X.shape)
    rows = np.asarray(X.sum(axis=1)).ravel()
    cols = np.asarray(X.sum(axis=0)).ravel()
    P = X.copy()
    r = rows[P.indices]
    c = np.repeat(cols, np.diff(P.indptr))
    P.data = np.maximum(0.0, np.log(T * P.data / (r * c)))
    P.eliminate_zeros()
    return P


@dataclass(frozen=True)
class LambdaSpec:
    """Eigenvalue weighting.

    ``classic`` keeps the top-``k`` singular values, so the word vectors are
    the principal component scores; ``rescale=True`` multiplies them by
    ``sqrt(n - 1)``. ``normalized`` replaces them with ``alpha * sqrt(n - 1)``,
    giving whitened vectors.
    """

    kind: str = "classic"
    k: int = 100
    alpha: float = 1.0
    rescale: bool = False

    def __post_init__(self):
        if self.kind not in ("classic", "normalized"):
            raise ValueError(f"unknown eigenvalue weighting {self.kind!r}")
        if self.k < 1:
            raise ValueError("k must be >= 1")
        if not self.alpha > 0:
            raise ValueError("alpha must be positive")

    def describe(self):
        if self.kind == "classic":
            return f"classic k={self.k} rescale={self.rescale}"
        return f"normalized k={self.k} alpha={self.alpha!r}"


def eigenvalue_weights(S, n: int, lam: LambdaSpec) -> np.ndarray:
    """Weighted singular values, same length as ``S``; zero beyond ``lam.k``."""
    S = np.asarray(S, dtype=np.float64)
    out = np.zeros_like(S)
    k = min(lam.k, len(S))
    root = math.sqrt(n - 1)
    if lam.kind == "classic":
        out[:k] = S[:k] * (root if lam.rescale else 1.0)
    else:
        out[:k] = lam.alpha * root
    return out


@dataclass(frozen=True)
class GpcaParams:
    metric: str = "identity"
    weight: str = "identity"
    transform: Union[TransformSpec, str] = field(default_factory=TransformSpec)
    lam: LambdaSpec = field(default_factory=LambdaSpec)
    sketch: Optional[SketchParams] = None
    anneal: AnnealParams = field(default_factory=AnnealParams)

    def __post_init__(self):
        if self.metric not in METRIC_KINDS:
            raise ValueError(f"unknown metric {self.metric!r}")
        if self.weight not in WEIGHT_KINDS:
            raise ValueError(f"unknown weight {self.weight!r}")
        if isinstance(self.transform, str) and self.transform not in TUNE_KINDS:
            raise ValueError(f"transform must be a TransformSpec or one of {TUNE_KINDS}")
        if self.sketch is not None and self.lam.k > self.sketch.K:
            raise ValueError(f"k={self.lam.k} exceeds sketch width K={self.sketch.K}")

    def sketch_for(self, k: int) -> SketchParams:
        if self.sketch is None:
            return SketchParams(k=k)
        return SketchParams(k=k, K=self.sketch.K, q=self.sketch.q, seed=self.sketch.seed)

    def manifest(self) -> dict:
        sk = self.sketch_for(self.lam.k)
        tr = self.transform if isinstance(self.transform, str) else self.transform.describe()
        a = self.anneal
        return {
            "metric": self.metric, "weight": self.weight, "transform": tr,
            "lambda": self.lam.kind, "k": str(self.lam.k), "alpha": repr(self.lam.alpha),
            "rescale": str(self.lam.rescale).lower(),
            "sketch_width": str(sk.K), "power_iterations": str(sk.q), "svd_seed": str(sk.seed),
            "anneal_iterations": str(a.iterations), "anneal_temperature": repr(a.initial_temperature),
            "anneal_cooling": repr(a.cooling), "anneal_step": repr(a.step),
            "anneal_sample": str(a.sample_size), "anneal_block_length": str(a.block_length),
            "anneal_blocks": str(a.block_count), "anneal_bandwidth": str(a.bandwidth),
            "anneal_seed": str(a.seed),
        }


@dataclass
class GpcaResult:
    """Everything produced by one factorization, in features x words orientation."""

    U: np.ndarray              # m x k left singular vectors
    S: np.ndarray              # k singular values
    V: np.ndarray              # n x k right singular vectors
    sigma1: np.ndarray         # k weighted singular values
    mean: np.ndarray           # m centring vector
    metric: np.ndarray
    weight: np.ndarray
    transform: TransformSpec

    @property
    def scores(self) -> np.ndarray:
        """``n x k`` word vectors (the transposed score matrix)."""
        return self.V * self.sigma1


def _positive_rank(S, shape):
    if len(S) == 0 or S[0] <= 0:
        return 0
    tol = max(shape) * np.finfo(np.float64).eps * S[0]
    return int(np.sum(S > tol))


def fit_gpca(M, params: GpcaParams) -> GpcaResult:
    """Run weighting, transformation, centring, factorization and eigenvalue weighting."""
    X0 = _as_csc(M)
    m, n = X0.shape
    if m == 0 or n == 0:
        raise ValueError(f"empty contextual matrix ({m} x {n})")
    if n < 2:
        raise ValueError("need at least two words (columns)")
    phi = build_metric(X0, params.metric)
    omega = build_weight(X0, params.weight)
    X = scale(X0, phi, omega)

    spec = params.transform
    if isinstance(spec, str):
        spec = tune_power(X, "single" if spec == "tune_single" else "vector", params.anneal)
    X = apply_transform(X, spec)
    E = np.asarray(X.sum(axis=1)).ravel() / n

    K = min(params.sketch_for(params.lam.k).K, m, n)
    k = min(params.lam.k, K)
    sk = params.sketch_for(k)
    sk = SketchParams(k=k, K=K, q=sk.q, seed=sk.seed)
    f = centered_svd(X, E, sk)
    rank = _positive_rank(f.S, X.shape)
    if rank == 0:
        raise ValueError("centred matrix has no positive singular value")
    if rank < params.lam.k:
        warnings.warn(f"requested k={params.lam.k} but only {rank} positive singular values; "
                      f"emitting k={rank}", RuntimeWarning, stacklevel=2)
    k = min(k, rank)
    lam = LambdaSpec(params.lam.kind, k, params.lam.alpha, params.lam.rescale)
    sigma1 = eigenvalue_weights(f.S[:k], n, lam)
    return GpcaResult(U=f.U[:, :k], S=f.S[:k], V=f.V[:, :k], sigma1=sigma1, mean=E,
                      metric=phi, weight=omega, transform=spec)


def _fmt(x: float) -> str:
    return repr(float(x))


@dataclass
class Embeddings:
    """Word vectors, one row per vocabulary word in id order."""

    vectors: np.ndarray
    tokens: tuple
    manifest: dict = field(default_factory=dict)

    def __post_init__(self):
        self.vectors = np.asarray(self.vectors, dtype=np.float64)
        self.tokens = tuple(self.tokens)
        if self.vectors.ndim != 2 or self.vectors.shape[0] != len(self.tokens):
            raise ValueError("need one vector per token")
        if not np.all(np.isfinite(self.vectors)):
            raise ValueError("embeddings must be finite")
        self._index = {t: i for i, t in enumerate(self.tokens)}

    @property
    def n(self):
        return self.vectors.shape[0]

    @property
    def k(self):
        return self.vectors.shape[1]

    def __contains__(self, token):
        return token in self._index

    def index_of(self, token: str) -> Optional[int]:
        return self._index.get(token)

    def vector(self, token: str) -> np.ndarray:
        """Vector of ``token``; unknown tokens map to the ``<unknown>`` vector."""
        i = self._index.get(token, self._index.get(UNKNOWN))
        if i is None:
            raise KeyError(token)
        return self.vectors[i]

    def save(self, path):
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(f"{self.n} {self.k}\n")
            for tok, row in zip(self.tokens, self.vectors):
                fh.write(tok + " " + " ".join(_fmt(x) for x in row) + "\n")

    @classmethod
    def load(cls, path):
        from .corpus import CorpusFormatError

        with open(path, encoding="utf-8") as fh:
            header = fh.readline().split()
            if len(header) != 2:
                raise CorpusFormatError("expected header 'n k'", path, 1)
            n, k = int(header[0]), int(header[1])
            tokens, rows = [], []
            for lineno, line in enumerate(fh, 2):
                parts = line.split()
                if not parts:
                    continue
                if len(parts) != k + 1:
                    raise CorpusFormatError(f"expected token and {k} values, got {len(parts)} fields",
                                            path, lineno)
                tokens.append(parts[0])
                try:
                    rows.append([float(x) for x in parts[1:]])
                except ValueError as exc:
                    raise CorpusFormatError(str(exc), path, lineno) from None
        if len(tokens) != n:
            raise CorpusFormatError(f"header announces {n} vectors, found {len(tokens)}", path)
        return cls(np.array(rows, dtype=np.float64).reshape(n, k), tokens)

    def save_manifest(self, path):
        write_manifest(path, self.manifest)


def write_manifest(path, entries: dict, comments: Sequence[str] = ()):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for c in comments:
            fh.write(f"# {c}\n")
        for key, val in entries.items():
            fh.write(f"{key} = {val}\n")


def digest(*parts) -> str:
    """SHA-256 over arrays and strings, for provenance records."""
    h = hashlib.sha256()
    for p in parts:
        if isinstance(p, np.ndarray):
            h.update(str(p.dtype).encode())
            h.update(np.ascontiguousarray(p).tobytes())
        else:
            h.update(str(p).encode("utf-8"))
        h.update(b"\0")
    return h.hexdigest()


def matrix_digest(M: SparseCountMatrix) -> str:
    r, c, v = M.triplets()
    return digest(np.array(M.shape), r.astype(np.int64), c.astype(np.int64), v,
                  "\n".join(M.row_symbols or ()))


def gpca(M, params: GpcaParams, tokens: Optional[Sequence[str]] = None) -> Embeddings:
    """Principal word vectors of a contextual matrix, one ``k``-vector per column."""
    res = fit_gpca(M, params)
    n = _as_csc(M).shape[1]
    if tokens is None:
        tokens = [str(j) for j in range(n)]
    man = params.manifest()
    man["k"] = str(res.S.size)
    man["transform"] = res.transform.describe()
    man["orientation"] = "rows are words"
    if isinstance(M, SparseCountMatrix):
        man["matrix_digest"] = matrix_digest(M)
        man["matrix_provenance"] = M.provenance
    return Embeddings(res.scores, tokens, man)


@dataclass(frozen=True)
class FeatureSpec:
    """One contextual matrix recipe.

    ``taus`` lists the context offsets explicitly; otherwise ``window`` and
    ``direction`` generate them (dependency windows use hops ``1..window``).
    With ``combine="window"`` the per-offset matrices are added with weights
    ``1/|tau|``; with ``combine="union"`` they are stacked.
    """

    kind: str = "word_form"
    context: str = "neighbourhood"
    taus: Optional[tuple] = None
    window: Optional[int] = None
    direction: str = "symmetric"
    combine: str = "window"
    cross_sentences: bool = False

    def __post_init__(self):
        if self.combine not in ("window", "union"):
            raise ValueError(f"unknown combination {self.combine!r}")
        if (self.taus is None) == (self.window is None):
            raise ValueError("give exactly one of taus or window")
        if self.taus is not None:
            object.__setattr__(self, "taus", tuple(int(t) for t in self.taus))
            if not self.taus:
                raise ValueError("taus must not be empty")

    def offsets(self):
        if self.taus is not None:
            return list(self.taus), [1.0 / max(abs(t), 1) for t in self.taus]
        if self.context == "dependency":
            taus = list(range(1, self.window + 1))
            return taus, [1.0 / t for t in taus]
        return window_weights(self.window, self.direction)

    def describe(self):
        where = f"taus={','.join(str(t) for t in self.taus)}" if self.taus is not None else \
            f"window={self.window} direction={self.direction}"
        return f"kind={self.kind} context={self.context} {where} combine={self.combine}"


def build_contextual_matrix(corpus: Corpus, specs: Sequence[FeatureSpec],
                            n_jobs: int = 1) -> SparseCountMatrix:
    """Count and combine the matrices described by ``specs``; several specs are stacked."""
    specs = list(specs)
    if not specs:
        raise ValueError("at least one feature spec is required")
    blocks = []
    for s in specs:
        taus, alphas = s.offsets()
        ctxs = [ContextFn(s.context, t, s.cross_sentences) for t in taus]
        space = build_feature_space(corpus, s.kind, ctxs)
        if space.m == 0:
            raise ValueError(f"empty feature space for {s.describe()}")
        mats = [count_matrix(corpus, space, c, n_jobs=n_jobs) for c in ctxs]
        if s.combine == "window":
            blocks.append(combine_window(mats, alphas))
        else:
            blocks.extend(mats)
    return blocks[0] if len(blocks) == 1 else combine_union(blocks)


def principal_word_vectors(corpus: Corpus, specs: Sequence[FeatureSpec], params: GpcaParams,
                           n_jobs: int = 1) -> Embeddings:
    """Corpus to word vectors: feature spaces, counts, combination and GPCA."""
    M = build_contextual_matrix(corpus, specs, n_jobs=n_jobs)
    emb = gpca(M, params, tokens=corpus.vocab.token_of)
    emb.manifest["corpus_digest"] = digest(corpus.words, corpus.sentence_starts)
    emb.manifest["features"] = "; ".join(s.describe() for s in specs)
    return emb


class GeneralizedPCA(TransformerMixin, BaseEstimator):
    """Generalized PCA with samples (words) in rows.

    ``X`` is ``n_words x n_features``, the transpose of a contextual matrix.
    Rows are scaled by ``weight`` (``"iwf"``: inverse row sum), columns by
    ``metric`` (``"iff"``, ``"isf"``), then transformed element-wise and
    factored after centring the columns.

    Parameters
    ----------
    n_components : int
    metric : {"identity", "iff", "isf"}
    weight : {"identity", "iwf"}
    transformation : {"identity", "log", "hellinger", "power", "tune_single", "tune_vector"}
    power : float, optional
        Exponent for ``transformation="power"``.
    eigen_weighting : {"classic", "normalized"}
    alpha : float
        Scale of normalized vectors.
    rescale : bool
        Multiply classic scores by ``sqrt(n - 1)``.
    sketch_width : int, optional
        Randomized sketch width, default ``n_components + 10``.
    n_iter : int
        Power iterations of the range finder.
    anneal : AnnealParams, optional
        Tuner settings when ``transformation`` starts with ``"tune"``.
    random_state : int or None

    Attributes
    ----------
    components_ : ndarray, shape (n_components, n_features)
    singular_values_ : ndarray
    mean_ : ndarray, shape (n_features,)
    metric_ : ndarray, shape (n_features,)
    transform_spec_ : TransformSpec
    embedding_ : ndarray, shape (n_words, n_components)
    """

    def __init__(self, n_components=2, metric="identity", weight="identity",
                 transformation="identity", power=None, eigen_weighting="classic", alpha=1.0, rescale=False,
                 sketch_width=None, n_iter=2, anneal=None, random_state=0):
        self.n_components = n_components
        self.metric = metric
        self.weight = weight
        self.transformation = transformation
        self.power = power
        self.eigen_weighting = eigen_weighting
        self.alpha = alpha
        self.rescale = rescale
        self.sketch_width = sketch_width
        self.n_iter = n_iter
        self.anneal = anneal
        self.random_state = random_state

    def _params(self, n_samples, n_features):
        if self.transformation in TUNE_KINDS:
            spec = self.transformation
        elif self.transformation == "power":
            spec = TransformSpec("power_single", self.power)
        else:
            spec = TransformSpec(self.transformation)
        K = self.sketch_width if self.sketch_width is not None else self.n_components + 10
        K = max(min(K, n_samples, n_features), 1)
        k = min(self.n_components, K)
        anneal = self.anneal if self.anneal is not None else AnnealParams(
            seed=check_random_state_seed(self.random_state, 2))
        return GpcaParams(
            metric=self.metric, weight=self.weight, transform=spec,
            lam=LambdaSpec(self.eigen_weighting, k, self.alpha, self.rescale),
            sketch=SketchParams(k=k, K=K, q=self.n_iter, seed=self.random_state),
            anneal=anneal,
        )

    def fit(self, X, y=None):
        self.fit_transform(X)
        return self

    def fit_transform(self, X, y=None):
        Xc = check_count_matrix(X)
        n, m = Xc.shape
        res = fit_gpca(Xc.T.tocsc(), self._params(n, m))
        self.n_features_in_ = m
        self.n_samples_fit_ = n
        self.components_ = res.U.T.copy()
        self.singular_values_ = res.S
        self.sigma1_ = res.sigma1
        self.mean_ = res.mean
        self.metric_ = res.metric
        self.transform_spec_ = res.transform
        self.n_components_ = res.S.size
        self.embedding_ = res.scores
        return self.embedding_

    def transform(self, X):
        """Project new words; ``iwf`` weights come from each new row's own sum."""
        check_is_fitted(self, "components_")
        Xc = check_count_matrix(X)
        if Xc.shape[1] != self.n_features_in_:
            raise ValueError(f"X has {Xc.shape[1]} features, expected {self.n_features_in_}")
        M = Xc.T.tocsc()
        Z = apply_transform(scale(M, self.metric_, build_weight(M, self.weight)),
                            self.transform_spec_)
        proj = self.components_ @ Z - (self.components_ @ self.mean_)[:, None]
        factor = self.sigma1_ / self.singular_values_
        return np.asarray(proj).T * factor
