"""Element-wise transformations and the entropy-maximizing power tuner.

The tuner searches power values ``p`` in (0, 1] that maximize the entropy of
the transformed contextual word vectors. Entropy is estimated per block of
``block_length`` randomly grouped dimensions with a Gaussian kernel density
estimate (resubstitution) and averaged over blocks.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace
from typing import Optional, Union

import numpy as np
import scipy.sparse as sp
from scipy import ndimage
from scipy.special import logsumexp
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from ._validation import check_nonnegative, check_random_state_seed

logger = logging.getLogger(__name__)

TRANSFORM_KINDS = ("identity", "log", "hellinger", "power_single", "power_vector", "ppmi")
MIN_POWER = 1e-3


@dataclass(frozen=True)
class TransformSpec:
    """Element-wise map applied to a (weighted) contextual matrix.

    ``power`` is a scalar for ``power_single`` and an ``m``-vector (one value
    per feature row) for ``power_vector``. ``scale`` is the corpus size used
    by ``ppmi``: ``max(0, log(scale * x))``.
    """

    kind: str = "identity"
    power: Union[float, np.ndarray, None] = None
    scale: Optional[float] = None

    def __post_init__(self):
        if self.kind not in TRANSFORM_KINDS:
            raise ValueError(f"unknown transform {self.kind!r}")
        if self.kind == "power_single":
            p = float(self.power)
            if not 0 < p <= 1:
                raise ValueError(f"power must lie in (0, 1], got {p}")
            object.__setattr__(self, "power", p)
        elif self.kind == "power_vector":
            p = np.asarray(self.power, dtype=np.float64).ravel()
            if p.size == 0 or np.any(p <= 0) or np.any(p > 1):
                raise ValueError("power vector entries must lie in (0, 1]")
            p.setflags(write=False)
            object.__setattr__(self, "power", p)
        elif self.kind == "ppmi":
            if self.scale is None or not self.scale > 0:
                raise ValueError("ppmi needs a positive scale (corpus size)")

    def __eq__(self, other):
        if not isinstance(other, TransformSpec) or self.kind != other.kind:
            return False
        return np.array_equal(np.asarray(self.power, dtype=float),
                              np.asarray(other.power, dtype=float)) and self.scale == other.scale

    def __hash__(self):
        return hash((self.kind, self.scale))

    def describe(self) -> str:
        if self.kind == "power_single":
            return f"power_single {self.power!r}"
        if self.kind == "power_vector":
            return "power_vector " + ",".join(repr(float(x)) for x in self.power)
        if self.kind == "ppmi":
            return f"ppmi {self.scale!r}"
        return self.kind


def _map_values(x, spec: TransformSpec, rows=None):
    if spec.kind == "identity":
        return x.copy()
    if spec.kind == "log":
        return np.log1p(x)
    if spec.kind == "hellinger":
        return np.sqrt(x)
    if spec.kind == "power_single":
        return np.power(x, spec.power)
    if spec.kind == "power_vector":
        return np.power(x, spec.power[rows])
    with np.errstate(divide="ignore"):
        return np.maximum(0.0, np.log(spec.scale * x))


def apply_transform(M, spec: TransformSpec):
    """Apply ``spec`` element-wise; zero entries stay zero.

    ``M`` may be a :class:`~pwvec.coocmat.SparseCountMatrix`, a scipy sparse
    matrix or a dense array, and the same kind is returned.
    """
    from .coocmat import SparseCountMatrix

    if isinstance(M, SparseCountMatrix):
        out = apply_transform(M.matrix, spec)
        return SparseCountMatrix(out, row_symbols=M.row_symbols,
                                 provenance=f"{spec.describe()}({M.provenance})", meta=M.meta)
    if spec.kind != "identity":
        check_nonnegative(M, f"{spec.kind} transform")
    if spec.kind == "power_vector":
        m = M.shape[0]
        if spec.power.shape != (m,):
            raise ValueError(f"power vector has length {spec.power.size}, matrix has {m} rows")
    if sp.issparse(M):
        out = sp.csc_matrix(M, dtype=np.float64, copy=True)
        out.data = _map_values(out.data, spec, rows=out.indices)
        out.eliminate_zeros()
        return out
    X = np.asarray(M, dtype=np.float64)
    rows = None
    if spec.kind == "power_vector":
        rows = np.arange(X.shape[0]).reshape((-1,) + (1,) * (X.ndim - 1))
        rows = np.broadcast_to(rows, X.shape)
    return _map_values(X, spec, rows=rows)


@dataclass(frozen=True)
class AnnealParams:
    """Settings of the power tuner.

    ``bandwidth`` is ``"silverman"``, ``"scott"`` or a fixed positive float
    applied to every dimension.
    """

    iterations: int = 200
    initial_temperature: float = 1.0
    cooling: float = 0.98
    step: float = 0.05
    sample_size: int = 5000
    block_length: int = 2
    block_count: int = 50
    bandwidth: Union[str, float] = "silverman"
    seed: Optional[int] = 0

    def __post_init__(self):
        if not 0 < self.cooling < 1:
            raise ValueError("cooling factor must lie in (0, 1)")
        if self.block_length < 1:
            raise ValueError("block length must be >= 1")
        if self.block_count < 1 or self.sample_size < 2 or self.iterations < 0:
            raise ValueError("block_count >= 1, sample_size >= 2 and iterations >= 0 required")
        if self.step <= 0 or self.initial_temperature <= 0:
            raise ValueError("step and initial temperature must be positive")
        if isinstance(self.bandwidth, str):
            if self.bandwidth not in ("silverman", "scott"):
                raise ValueError(f"unknown bandwidth rule {self.bandwidth!r}")
        elif not float(self.bandwidth) > 0:
            raise ValueError("bandwidth must be positive")


# grid points per axis for the binned estimator, by block dimension
_GRID = {1: 1024, 2: 128, 3: 40}
# below this sample size the exact pairwise sum is cheaper than binning
_EXACT_MAX = 600
_MIN_BANDWIDTH = 1e-6


def _bandwidths(X, rule):
    N, d = X.shape
    if not isinstance(rule, str):
        return np.full(d, float(rule))
    sigma = X.std(axis=0, ddof=1)
    if rule == "silverman":
        factor = (4.0 / ((d + 2) * N)) ** (1.0 / (d + 4))
    else:
        factor = N ** (-1.0 / (d + 4))
    return np.maximum(sigma * factor, _MIN_BANDWIDTH)


def _exact_log_density(X, h):
    N, d = X.shape
    Z = X / h
    out = np.empty(N)
    norm = math.log(N) + d * 0.5 * math.log(2 * math.pi) + np.log(h).sum()
    for a in range(0, N, 512):
        D = ((Z[a:a + 512, None, :] - Z[None, :, :]) ** 2).sum(-1)
        out[a:a + 512] = logsumexp(-0.5 * D, axis=1) - norm
    return out


def _binned_log_density(X, h):
    """Gaussian KDE evaluated at the sample via linear binning on a grid.

    Where the grid is coarser than the requested bandwidth, the bandwidth is
    raised to half the grid extent over ``G`` so the kernel is resolved.
    """
    N, d = X.shape
    G = _GRID[d]
    lo = X.min(axis=0)
    span = X.max(axis=0) - lo
    h = np.maximum(h, 2.0 * span / G)
    lo = lo - 4 * h
    delta = (span + 8 * h) / (G - 1)
    coords = (X - lo) / delta
    base = np.clip(np.floor(coords).astype(np.int64), 0, G - 2)
    frac = coords - base
    grid = np.zeros((G,) * d)
    flat = grid.reshape(-1)
    for corner in range(2 ** d):
        offs = np.array([(corner >> a) & 1 for a in range(d)])
        w = np.prod(np.where(offs, frac, 1 - frac), axis=1)
        idx = np.ravel_multi_index(tuple((base + offs).T), grid.shape)
        flat += np.bincount(idx, weights=w, minlength=flat.size)
    smooth = ndimage.gaussian_filter(grid, sigma=h / delta, mode="constant", truncate=4.0)
    dens = ndimage.map_coordinates(smooth, coords.T, order=1, mode="nearest")
    dens /= N * np.prod(delta)
    return np.log(np.maximum(dens, 1e-300))


def block_entropy(X, bandwidth="silverman") -> float:
    """Resubstitution entropy (nats) of the rows of ``X`` under a Gaussian KDE."""
    X = np.asarray(X, dtype=np.float64)
    if X.ndim == 1:
        X = X[:, None]
    N, d = X.shape
    if N < 2:
        raise ValueError("entropy estimation needs at least 2 sample points")
    # canonical row order makes the estimate independent of sample order
    X = X[np.lexsort(X.T[::-1])]
    h = _bandwidths(X, bandwidth)
    if d in _GRID and N > _EXACT_MAX:
        logf = _binned_log_density(X, h)
    else:
        logf = _exact_log_density(X, h)
    return float(-logf.mean())


def partition_blocks(m: int, block_length: int, rng) -> list[np.ndarray]:
    """Random disjoint index blocks of length ``block_length`` covering ``range(m)``."""
    perm = rng.permutation(m)
    return [np.sort(perm[a:a + block_length]) for a in range(0, m, block_length)]


def _select_blocks(m, params: AnnealParams, rng):
    blocks = partition_blocks(m, params.block_length, rng)
    if len(blocks) > params.block_count:
        keep = np.sort(rng.choice(len(blocks), params.block_count, replace=False))
        blocks = [blocks[i] for i in keep]
    return blocks


def estimate_entropy(sample, params: AnnealParams) -> float:
    """Mean block entropy of a sample of transformed contextual vectors.

    ``sample`` holds one vector per row (``N x m``). Dimensions are split into
    random disjoint blocks; when there are more than ``params.block_count``
    blocks, a seeded subset of them is evaluated.
    """
    if sp.issparse(sample):
        sample = sample.toarray()
    X = np.asarray(sample, dtype=np.float64)
    if X.ndim == 1:
        X = X[:, None]
    if X.shape[0] < 2:
        raise ValueError("entropy estimation needs at least 2 sample points")
    rng = np.random.default_rng(params.seed)
    if X.shape[0] > params.sample_size:
        X = X[np.lexsort(X.T[::-1])]
        X = X[np.sort(rng.choice(X.shape[0], params.sample_size, replace=False))]
    blocks = _select_blocks(X.shape[1], params, rng)
    return float(np.mean([block_entropy(X[:, b], params.bandwidth) for b in blocks]))


@dataclass
class _EntropyProblem:
    """Word subsample and dimension blocks shared by every objective evaluation."""

    data: np.ndarray          # N x d dense, columns are the selected features
    features: np.ndarray      # feature (row) index of every column
    blocks: list              # column indices into ``data`` per block
    bandwidth: Union[str, float]
    m: int

    def block_value(self, b, powers):
        cols = self.blocks[b]
        return block_entropy(np.power(self.data[:, cols], powers[cols]), self.bandwidth)

    def values(self, powers):
        return np.array([self.block_value(b, powers) for b in range(len(self.blocks))])


def _entropy_problem(M, params: AnnealParams) -> Optional[_EntropyProblem]:
    from .coocmat import SparseCountMatrix

    mat = M.matrix if isinstance(M, SparseCountMatrix) else sp.csc_matrix(M, dtype=np.float64)
    m, n = mat.shape
    if m == 0 or n < 2 or mat.nnz == 0:
        return None
    rng = np.random.default_rng(params.seed)
    words = np.arange(n)
    if n > params.sample_size:
        words = np.sort(rng.choice(n, params.sample_size, replace=False))
    blocks = _select_blocks(m, params, rng)
    features = np.concatenate(blocks)
    data = mat[features][:, words].T.toarray()
    offsets = np.cumsum([0] + [len(b) for b in blocks])
    local = [np.arange(a, b) for a, b in zip(offsets[:-1], offsets[1:])]
    return _EntropyProblem(data, features, local, params.bandwidth, m)


def entropy_objective(M, spec: TransformSpec, params: AnnealParams) -> float:
    """The tuner's objective: mean block entropy of ``M`` transformed by ``spec``.

    Uses the same seeded word subsample and blocks as :func:`tune_power`.
    """
    prob = _entropy_problem(M, params)
    if prob is None:
        raise ValueError("matrix too degenerate for entropy estimation")
    return float(prob.values(_column_powers(prob, spec)).mean())


def _column_powers(prob, spec):
    if spec.kind == "identity":
        return np.ones(len(prob.features))
    if spec.kind == "power_single":
        return np.full(len(prob.features), spec.power)
    if spec.kind == "power_vector":
        return np.asarray(spec.power)[prob.features]
    raise ValueError(f"entropy objective is defined for power transforms, not {spec.kind!r}")


def _anneal(prob, mode, params, rng):
    ncols = len(prob.features)
    powers = np.ones(ncols)
    values = prob.values(powers)
    current = values.mean()
    best, best_powers = current, powers.copy()
    start = current
    temp = params.initial_temperature
    nblocks = len(prob.blocks)
    for _ in range(params.iterations):
        if mode == "single":
            p = float(np.clip(powers[0] + rng.normal(0.0, params.step), MIN_POWER, 1.0))
            cand = np.full(ncols, p)
            cand_values = prob.values(cand)
        else:
            b = int(rng.integers(nblocks))
            cols = prob.blocks[b]
            cand = powers.copy()
            cand[cols] = np.clip(cand[cols] + rng.normal(0.0, params.step, len(cols)),
                                 MIN_POWER, 1.0)
            cand_values = values.copy()
            cand_values[b] = prob.block_value(b, cand)
        value = cand_values.mean()
        delta = value - current
        if delta >= 0 or rng.random() < math.exp(delta / temp):
            powers, values, current = cand, cand_values, value
            if current > best:
                best, best_powers = current, powers.copy()
        temp *= params.cooling
    return best_powers, best, start


def tune_power(M, mode: str = "single", params: AnnealParams = AnnealParams(),
               return_objective: bool = False):
    """Simulated annealing over power transforms, maximizing block entropy.

    Starts from ``p = 1`` and returns the best power seen. In vector mode a
    proposal perturbs the powers of one block at a time; features that fall in
    no evaluated block get the mean of the tuned powers.

    Returns
    -------
    spec : TransformSpec
    objective : float
        Only when ``return_objective`` is set: entropy at the returned spec.
    """
    if mode not in ("single", "vector"):
        raise ValueError(f"unknown tuning mode {mode!r}")
    prob = _entropy_problem(M, params)
    m = M.shape[0]
    if prob is None:
        logger.warning("degenerate matrix, power tuning skipped (p = 1)")
        spec = (TransformSpec("power_single", 1.0) if mode == "single"
                else TransformSpec("power_vector", np.ones(max(m, 1))))
        return (spec, float("nan")) if return_objective else spec
    rng = np.random.default_rng(check_random_state_seed(params.seed, salt=1))
    powers, best, start = _anneal(prob, mode, params, rng)
    if mode == "single":
        spec = TransformSpec("power_single", float(powers[0]))
    else:
        full = np.full(m, float(powers.mean()))
        full[prob.features] = powers
        spec = TransformSpec("power_vector", full)
    logger.info("power tuning: entropy %.6g -> %.6g", start, best)
    return (spec, best) if return_objective else spec


class EntropyPowerTransformer(TransformerMixin, BaseEstimator):
    """Learn an entropy-maximizing power transform of non-negative data.

    Follows the scikit-learn convention of samples in rows: ``X`` is
    ``n_words x m_features``. ``mode="vector"`` learns one power per feature.

    Attributes
    ----------
    spec_ : TransformSpec
        Fitted transform, expressed for the features x words orientation.
    entropy_ : float
        Objective value at the fitted powers.
    """

    def __init__(self, mode="single", iterations=200, initial_temperature=1.0, cooling=0.98,
                 step=0.05, sample_size=5000, block_length=2, block_count=50,
                 bandwidth="silverman", random_state=0):
        self.mode = mode
        self.iterations = iterations
        self.initial_temperature = initial_temperature
        self.cooling = cooling
        self.step = step
        self.sample_size = sample_size
        self.block_length = block_length
        self.block_count = block_count
        self.bandwidth = bandwidth
        self.random_state = random_state

    def _anneal_params(self):
        return AnnealParams(
            iterations=self.iterations, initial_temperature=self.initial_temperature,
            cooling=self.cooling, step=self.step, sample_size=self.sample_size,
            block_length=self.block_length, block_count=self.block_count,
            bandwidth=self.bandwidth, seed=self.random_state,
        )

    def fit(self, X, y=None):
        from ._validation import check_count_matrix

        Xc = check_count_matrix(X)
        self.n_features_in_ = Xc.shape[1]
        self.spec_, self.entropy_ = tune_power(Xc.T.tocsc(), self.mode, self._anneal_params(),
                                               return_objective=True)
        return self

    def transform(self, X):
        from ._validation import check_count_matrix

        check_is_fitted(self, "spec_")
        Xc = check_count_matrix(X)
        if Xc.shape[1] != self.n_features_in_:
            raise ValueError(f"X has {Xc.shape[1]} features, expected {self.n_features_in_}")
        out = apply_transform(Xc.T.tocsc(), self.spec_).T
        return out.tocsr() if sp.issparse(X) else out.toarray()
