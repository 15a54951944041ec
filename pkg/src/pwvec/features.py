"""Feature spaces: which contextual feature fires for each token.

A feature variable is a (contextual feature kind, context function) pair.
Contexts are singleton: every token maps to at most one other token, to the
dependency root, or to nothing.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Optional, Sequence, Union

import numpy as np

from .corpus import HEAD_MISSING, ROOT as ROOT_SYMBOL, Corpus

# targets returned by context resolution
ROOT = -1
NONE = -2

FEATURE_KINDS = ("word_form", "pos", "joint")
CONTEXT_KINDS = ("neighbourhood", "dependency")


@dataclass(frozen=True)
class ContextFn:
    """Singleton context function.

    ``tau`` is a signed offset for the neighbourhood context and the number of
    parent hops for the dependency context (``0`` is the token itself).
    """

    kind: str
    tau: int
    cross_sentences: bool = False

    def __post_init__(self):
        if self.kind not in CONTEXT_KINDS:
            raise ValueError(f"unknown context kind {self.kind!r}")
        if self.kind == "neighbourhood" and self.tau == 0:
            raise ValueError("neighbourhood context needs tau != 0")
        if self.kind == "dependency" and self.tau < 0:
            raise ValueError("dependency context needs tau >= 0")

    def __str__(self):
        return f"{self.kind}({self.tau:+d})"


def _require_heads(corpus):
    if not corpus.has_heads:
        raise ValueError("dependency context requires annotated corpus")


def resolve_all(corpus: Corpus, ctx: ContextFn) -> np.ndarray:
    """Context target of every token: an index, ``ROOT`` or ``NONE``."""
    T = corpus.T
    idx = np.arange(T, dtype=np.int64)
    if ctx.kind == "neighbourhood":
        tgt = idx + ctx.tau
        ok = (tgt >= 0) & (tgt < T)
        if not ctx.cross_sentences:
            sid = corpus.sentence_id
            ok[ok] &= sid[tgt[ok]] == sid[idx[ok]]
        return np.where(ok, tgt, NONE)

    _require_heads(corpus)
    heads = corpus.heads
    cur = idx.copy()
    for _ in range(ctx.tau):
        live = cur >= 0
        h = heads[cur[live]].astype(np.int64)
        nxt = np.where(h == HEAD_MISSING, NONE, np.where(h == 0, ROOT, cur[live] + h))
        cur[live] = nxt
    return cur


def resolve_context(corpus: Corpus, t: int, ctx: ContextFn):
    """Scalar version of :func:`resolve_all`; returns an index, ``ROOT`` or None."""
    if not 0 <= t < corpus.T:
        raise IndexError(f"token index {t} outside corpus of length {corpus.T}")
    if ctx.kind == "neighbourhood":
        s = t + ctx.tau
        if not 0 <= s < corpus.T:
            return None
        if not ctx.cross_sentences and corpus.sentence_id[s] != corpus.sentence_id[t]:
            return None
        return s
    _require_heads(corpus)
    cur = t
    for _ in range(ctx.tau):
        h = int(corpus.heads[cur])
        if h == HEAD_MISSING:
            return None
        if h == 0:
            return ROOT
        cur += h
    return cur


def _token_codes(corpus: Corpus, kind: str):
    """Integer code per token and a function turning codes into symbols."""
    if kind == "word_form":
        tokens = corpus.vocab.token_of
        return corpus.words.astype(np.int64), lambda c: tokens[c]
    if corpus.pos is None:
        raise ValueError(f"{kind} features require an annotated corpus")
    tags = corpus.pos_tags
    if kind == "pos":
        return corpus.pos.astype(np.int64), lambda c: tags[c]
    ntags = max(len(tags), 1)
    tokens = corpus.vocab.token_of
    codes = corpus.words.astype(np.int64) * ntags + corpus.pos
    return codes, lambda c: f"{tokens[c // ntags]}|{tags[c % ntags]}"


class FeatureSpace:
    """Enumerated feature symbols for one feature kind under one or more contexts.

    Ids are assigned in lexicographic order of the symbols. Only symbols that
    are realized as a context somewhere in the corpus are kept, which for joint
    features means unseen (form, pos) pairs are pruned.
    """

    def __init__(self, kind: str, contexts: Sequence[ContextFn], symbols: Sequence[str]):
        if kind not in FEATURE_KINDS:
            raise ValueError(f"unknown feature kind {kind!r}")
        self.kind = kind
        self.contexts = tuple(contexts)
        self.symbols = tuple(symbols)
        self.index = {s: i for i, s in enumerate(self.symbols)}
        if len(self.index) != len(self.symbols):
            raise ValueError("duplicate feature symbols")
        self._cache = None

    @property
    def m(self):
        return len(self.symbols)

    def __len__(self):
        return self.m

    def __repr__(self):
        ctx = ",".join(str(c) for c in self.contexts)
        return f"FeatureSpace(kind={self.kind!r}, contexts=[{ctx}], m={self.m})"

    @property
    def root_id(self) -> Optional[int]:
        return self.index.get(ROOT_SYMBOL)

    def _code_table(self, corpus):
        # sorted codes -> feature ids, cached per corpus object
        if self._cache is not None and self._cache[0] is corpus:
            return self._cache[1:]
        codes, symbol_of = _token_codes(corpus, self.kind)
        uniq = np.unique(codes)
        ids = np.array([self.index.get(symbol_of(int(c)), -1) for c in uniq], dtype=np.int64)
        self._cache = (corpus, codes, uniq, ids)
        return codes, uniq, ids

    def feature_ids(self, corpus: Corpus, targets: np.ndarray) -> np.ndarray:
        """Vectorized feature lookup; ``-1`` where nothing fires."""
        codes, uniq, ids = self._code_table(corpus)
        out = np.full(targets.shape, -1, dtype=np.int64)
        tok = targets >= 0
        if tok.any():
            pos = np.searchsorted(uniq, codes[targets[tok]])
            out[tok] = ids[pos]
        rid = self.root_id
        if rid is not None:
            out[targets == ROOT] = rid
        return out

    def save(self, path):
        """Write the ``feature-id<TAB>symbol`` manifest."""
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            for i, s in enumerate(self.symbols):
                fh.write(f"{i}\t{s}\n")

    @staticmethod
    def load_symbols(path) -> list[str]:
        symbols = []
        with open(path, encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, 1):
                line = line.rstrip("\n")
                if not line:
                    continue
                i, _, sym = line.partition("\t")
                if int(i) != len(symbols):
                    raise ValueError(f"{path}:{lineno}: feature ids must be dense and ordered")
                symbols.append(sym)
        return symbols


def feature_at(corpus: Corpus, pos, space: FeatureSpace) -> Optional[int]:
    """Feature id firing at a resolved context position, or None."""
    if pos is None or pos == NONE:
        return None
    if pos == ROOT:
        return space.root_id
    codes, symbol_of = _token_codes(corpus, space.kind)
    return space.index.get(symbol_of(int(codes[pos])))


def build_feature_space(corpus: Corpus, kind: str,
                        ctx: Union[ContextFn, Iterable[ContextFn]]) -> FeatureSpace:
    """Enumerate the feature symbols realizable as contexts in ``corpus``.

    Passing several contexts gives one shared space over all of them, which
    is what the window (addition) combination needs.
    """
    contexts = (ctx,) if isinstance(ctx, ContextFn) else tuple(ctx)
    if not contexts:
        raise ValueError("at least one context function is required")
    if kind not in FEATURE_KINDS:
        raise ValueError(f"unknown feature kind {kind!r}")
    codes, symbol_of = _token_codes(corpus, kind)
    seen = set()
    has_root = False
    for c in contexts:
        tgt = resolve_all(corpus, c)
        seen.update(np.unique(codes[tgt[tgt >= 0]]).tolist())
        has_root = has_root or bool((tgt == ROOT).any())
    symbols = {symbol_of(c) for c in seen}
    if has_root:
        symbols.add(ROOT_SYMBOL)
    return FeatureSpace(kind, contexts, sorted(symbols))
