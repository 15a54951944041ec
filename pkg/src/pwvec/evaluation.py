"""Intrinsic evaluation of word vectors.

Spread is measured with the log generalized variance, discriminability with
the Fisher discriminant ratio over windowed token representations, and
dimensionality with cumulative total-variance and log-eigenvalue series.
"""
from __future__ import annotations

import logging
import os
import warnings
from dataclasses import dataclass
from typing import Iterable, Optional, Sequence, Union

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
from scipy.stats import spearmanr

from .corpus import CorpusFormatError, NormalizationRules, Vocabulary, _assemble, build_vocabulary

logger = logging.getLogger(__name__)

EIGEN_FLOOR = 1e-12
FDR_THRESHOLD = 1e-10


def _floored_log(lam, what):
    lam = np.asarray(lam, dtype=np.float64)
    low = lam < EIGEN_FLOOR
    if low.any():
        warnings.warn(f"{int(low.sum())} eigenvalue(s) below {EIGEN_FLOOR:g} floored in {what}",
                      RuntimeWarning, stacklevel=3)
    return np.log(np.maximum(lam, EIGEN_FLOOR))


def log_generalized_variance(vectors) -> float:
    """Sum of log eigenvalues of the sample covariance (divisor ``n - 1``)."""
    X = np.asarray(vectors, dtype=np.float64)
    if X.ndim != 2:
        raise ValueError("vectors must be an n x k array")
    if X.shape[0] <= 1:
        raise ValueError("log generalized variance needs at least 2 vectors")
    C = np.atleast_2d(np.cov(X, rowvar=False, ddof=1))
    return float(_floored_log(np.linalg.eigvalsh(C), "log generalized variance").sum())


@dataclass
class LabeledWindowSet:
    """Token representations with class labels."""

    rows: np.ndarray
    labels: np.ndarray
    class_names: tuple = ()

    def __post_init__(self):
        self.rows = np.asarray(self.rows, dtype=np.float64)
        self.labels = np.asarray(self.labels)
        if self.rows.ndim != 2 or self.rows.shape[0] != self.labels.shape[0]:
            raise ValueError("need one label per row")

    @property
    def classes(self):
        return np.unique(self.labels)

    @property
    def priors(self):
        _, counts = np.unique(self.labels, return_counts=True)
        return counts / counts.sum()


def fisher_scatter(rows, labels):
    """Prior-weighted within-class and between-class covariance matrices."""
    X = np.asarray(rows, dtype=np.float64)
    labels = np.asarray(labels)
    classes, inv, counts = np.unique(labels, return_inverse=True, return_counts=True)
    if len(classes) < 2:
        raise ValueError("fdr needs at least two classes")
    if counts.min() < 2:
        bad = classes[np.argmin(counts)]
        raise ValueError(f"every class needs at least 2 rows (class {bad!r} has {counts.min()})")
    N, d = X.shape
    priors = counts / N
    mu = np.zeros((len(classes), d))
    np.add.at(mu, inv, X)
    mu /= counts[:, None]
    centred = X - mu[inv]
    # sum_i p_i Sigma_i with population class covariances equals centred^T centred / N
    Sw = centred.T @ centred / N
    grand = priors @ mu
    D = mu - grand
    Sb = (D * priors[:, None]).T @ D
    return Sw, Sb


def fdr(data: Union[LabeledWindowSet, np.ndarray], labels=None) -> float:
    """Fisher discriminant ratio: sum of the positive generalized eigenvalues of
    ``Sb a = lambda Sw a``.

    A ridge of ``1e-8 * trace(Sw) / dim`` is added when ``Sw`` is numerically
    singular, which zero-padded windows routinely make it.
    """
    if isinstance(data, LabeledWindowSet):
        rows, labels = data.rows, data.labels
    else:
        rows = data
        if labels is None:
            raise ValueError("labels are required")
    Sw, Sb = fisher_scatter(rows, labels)
    d = Sw.shape[0]
    tr = np.trace(Sw)
    if not tr > 0:
        raise ValueError("within-class covariance is singular (zero trace)")
    w = np.linalg.eigvalsh(Sw)
    if w[0] <= 1e-12 * w[-1]:
        Sw = Sw + (1e-8 * tr / d) * np.eye(d)
    try:
        lam = sla.eigh(Sb, Sw, eigvals_only=True)
    except np.linalg.LinAlgError as exc:
        raise ValueError(f"within-class covariance is singular after regularization: {exc}") from None
    return float(lam[lam > FDR_THRESHOLD].sum())


def windowed_representation(words: np.ndarray, sentence_starts: np.ndarray, labels, emb,
                            vocab: Vocabulary, half_window: int = 3,
                            class_names: Sequence[str] = ()) -> LabeledWindowSet:
    """Concatenate the vectors of each token and its ``half_window`` neighbours.

    Positions outside the sentence contribute zero vectors. Words missing from
    ``emb`` use its ``<unknown>`` vector (zero if that is absent too).
    """
    if half_window < 0:
        raise ValueError("half_window must be >= 0")
    words = np.asarray(words)
    if labels is None or len(labels) != len(words):
        raise ValueError("missing labels: need one label per token")
    k = emb.k
    table = np.zeros((vocab.n + 1, k))
    for vid, tok in enumerate(vocab.token_of):
        i = emb.index_of(tok)
        if i is None:
            i = emb.index_of(vocab.token_of[vocab.unknown_id])
        if i is not None:
            table[vid] = emb.vectors[i]
    pad = vocab.n  # zero row
    T = len(words)
    sid = np.repeat(np.arange(len(sentence_starts) - 1), np.diff(sentence_starts))
    idx = np.arange(T)
    blocks = []
    for off in range(-half_window, half_window + 1):
        j = idx + off
        ok = (j >= 0) & (j < T)
        ok[ok] &= sid[j[ok]] == sid[idx[ok]]
        ids = np.where(ok, words[np.clip(j, 0, T - 1)], pad)
        blocks.append(table[ids])
    return LabeledWindowSet(np.hstack(blocks), np.asarray(labels), tuple(class_names))


def corpus_windows(corpus, emb, half_window: int = 3) -> LabeledWindowSet:
    """Windowed representation of a POS-annotated corpus labelled by UPOS tag."""
    if corpus.pos is None:
        raise ValueError("missing labels: corpus has no POS annotation")
    return windowed_representation(corpus.words, corpus.sentence_starts, corpus.pos, emb,
                                   corpus.vocab, half_window, corpus.pos_tags)


def read_conll2003(path, vocab: Optional[Vocabulary] = None,
                   rules: Optional[NormalizationRules] = None):
    """Read a token ... tag column file (blank lines end sentences).

    BIO prefixes are stripped so ``B-PER`` and ``I-PER`` share class ``PER``.

    Returns
    -------
    corpus : Corpus
    labels : ndarray of int
    class_names : tuple of str
    """
    rules = rules or NormalizationRules()
    sentences, tags, cur, cur_tags = [], [], [], []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            parts = line.split()
            if not parts or parts[0] == "-DOCSTART-":
                if cur:
                    sentences.append(cur)
                    tags.append(cur_tags)
                    cur, cur_tags = [], []
                continue
            if len(parts) < 2:
                raise CorpusFormatError("expected token and tag columns", path, lineno)
            tag = parts[-1]
            if tag[:2] in ("B-", "I-", "E-", "S-"):
                tag = tag[2:]
            cur.append(parts[0])
            cur_tags.append(tag)
    if cur:
        sentences.append(cur)
        tags.append(cur_tags)
    if not sentences:
        raise ValueError("empty corpus")
    if vocab is None:
        vocab = build_vocabulary((t for s in sentences for t in s), rules)
    corpus = _assemble(sentences, vocab, rules)
    names = tuple(sorted({t for s in tags for t in s}))
    index = {t: i for i, t in enumerate(names)}
    labels = np.array([index[t] for s in tags for t in s], dtype=np.int64)
    return corpus, labels, names


@dataclass
class EigenReport:
    eigenvalues: np.ndarray
    tv: np.ndarray
    lev: np.ndarray
    lgv: np.ndarray

    def series(self):
        """``(name, values)`` pairs for plotting against ``1..k``."""
        return [("tv", self.tv), ("lev", self.lev), ("lgv", self.lgv)]


def eigen_report(eigenvalues) -> EigenReport:
    """Cumulative total-variance percentages, log eigenvalues and cumulative
    log-generalized-variance percentages of a spectrum (sorted descending)."""
    lam = np.sort(np.asarray(eigenvalues, dtype=np.float64).ravel())[::-1]
    if lam.size == 0 or lam[-1] < -1e-12 * max(abs(lam[0]), 1.0):
        raise ValueError("eigenvalues must be non-negative")
    lam = np.maximum(lam, 0.0)
    total = lam.sum()
    if total <= 0:
        raise ValueError("all-zero spectrum")
    tv = 100.0 * np.cumsum(lam) / total
    lev = _floored_log(lam, "eigen report")
    log_total = lev.sum()
    if log_total == 0:
        raise ValueError("log eigenvalues sum to zero; cumulative log-variance undefined")
    lgv = 100.0 * np.cumsum(lev) / log_total
    tv[-1] = 100.0
    lgv[-1] = 100.0
    return EigenReport(lam, tv, lev, lgv)


def embedding_spectrum(vectors) -> np.ndarray:
    """Eigenvalues of the sample covariance of the vectors, descending."""
    X = np.asarray(vectors, dtype=np.float64)
    if X.shape[0] <= 1:
        raise ValueError("spectrum needs at least 2 vectors")
    C = np.atleast_2d(np.cov(X, rowvar=False, ddof=1))
    return np.maximum(np.linalg.eigvalsh(C)[::-1], 0.0)


def read_benchmark(path):
    """Parse ``word1 word2 score`` lines; returns a list of triples."""
    pairs = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            parts = line.split()
            if not parts or parts[0].startswith("#"):
                continue
            if len(parts) != 3:
                raise CorpusFormatError("expected 'word1 word2 score'", path, lineno)
            try:
                score = float(parts[2])
            except ValueError:
                raise CorpusFormatError(f"bad score {parts[2]!r}", path, lineno) from None
            pairs.append((parts[0], parts[1], score))
    return pairs


@dataclass
class SimilarityResult:
    name: str
    spearman: float
    n_pairs: int
    n_oov: int


def _cosine(a, b):
    na, nb = np.linalg.norm(a), np.linalg.norm(b)
    if na == 0 or nb == 0:
        return 0.0
    return float(a @ b / (na * nb))


def similarity_correlation(emb, pairs, name="benchmark") -> SimilarityResult:
    gold, pred, oov = [], [], 0
    for w1, w2, score in pairs:
        if w1 not in emb or w2 not in emb:
            oov += 1
            continue
        gold.append(score)
        pred.append(_cosine(emb.vector(w1), emb.vector(w2)))
    if len(gold) < 2:
        raise ValueError(f"{name}: fewer than 2 scored pairs ({oov} out of vocabulary)")
    rho = spearmanr(gold, pred).statistic
    return SimilarityResult(name, float(rho), len(gold), oov)


def word_similarity(emb, benchmarks: Union[str, os.PathLike, Iterable]):
    """Spearman correlation between gold scores and cosine similarities.

    Returns the per-file results and their average correlation.
    """
    if isinstance(benchmarks, (str, os.PathLike)):
        benchmarks = [benchmarks]
    results = [similarity_correlation(emb, read_benchmark(p), os.path.basename(str(p)))
               for p in benchmarks]
    if not results:
        raise ValueError("no benchmark files given")
    return results, float(np.mean([r.spearman for r in results]))


def distribution_diagnostics(M, max_features: int = 2000) -> dict:
    """Empirical mean and covariance summary of the contextual word vectors.

    Columns are the samples. Diagonal dominance compares the mean absolute
    variance with the mean absolute covariance over the ``max_features``
    most frequent features.
    """
    X = M.matrix if hasattr(M, "matrix") else sp.csc_matrix(M, dtype=np.float64)
    X = sp.csr_matrix(X, dtype=np.float64)
    m, n = X.shape
    mean = np.asarray(X.sum(axis=1)).ravel() / max(n, 1)
    sq = np.asarray(X.multiply(X).sum(axis=1)).ravel()
    ddof = 1 if n > 1 else 0
    var = np.maximum(sq - n * mean ** 2, 0.0) / max(n - ddof, 1)
    report = {
        "m": m, "n": n, "nnz": X.nnz,
        "sparsity": 1.0 - X.nnz / (m * n) if m * n else 1.0,
        "mean": mean, "variance": var,
        "diag_mean_abs": float("nan"), "offdiag_mean_abs": float("nan"),
    }
    if m >= 2 and n >= 2:
        top = np.sort(np.argsort(-mean, kind="stable")[:max_features])
        D = X[top].toarray()
        C = np.cov(D, ddof=1)
        off = ~np.eye(len(top), dtype=bool)
        report["diag_mean_abs"] = float(np.abs(np.diag(C)).mean())
        report["offdiag_mean_abs"] = float(np.abs(C[off]).mean())
    report["diagonal_dominant"] = bool(report["diag_mean_abs"] > report["offdiag_mean_abs"])
    return report
