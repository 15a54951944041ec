"""Corpus ingestion: vocabulary building, raw text and CoNLL-U readers.

A corpus is held as flat integer arrays (one entry per token) plus sentence
offsets. Token positions are 0-based internally.
"""
from __future__ import annotations

import logging
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Iterator, Optional, Sequence

import numpy as np

logger = logging.getLogger(__name__)

UNKNOWN = "<unknown>"
NUMBER = "<number>"
ROOT = "<root>"
SPECIALS = (UNKNOWN, NUMBER, ROOT)

# head_offset value for tokens whose head annotation was dropped
HEAD_MISSING = np.iinfo(np.int32).min


class CorpusFormatError(ValueError):
    """Raised on malformed corpus input. Carries the offending line number."""

    def __init__(self, message, path=None, lineno=None):
        where = ""
        if path is not None:
            where = f"{path}:"
        if lineno is not None:
            where += f"{lineno}: "
        elif where:
            where += " "
        super().__init__(where + message)
        self.path = path
        self.lineno = lineno


@dataclass(frozen=True)
class NormalizationRules:
    lowercase: bool = False
    collapse_digits: bool = True
    min_count: int = 1

    def __post_init__(self):
        if int(self.min_count) < 1:
            raise ValueError(f"min_count must be >= 1, got {self.min_count}")


def normalize_token(raw: str, rules: NormalizationRules) -> str:
    """Map a raw token to its vocabulary symbol.

    Digit-only tokens become ``NUMBER`` when ``rules.collapse_digits`` is set;
    mixed tokens such as ``"x1y"`` are left alone.
    """
    if not raw:
        raise ValueError("cannot normalize an empty token")
    if rules.collapse_digits and raw.isdecimal():
        return NUMBER
    return raw.lower() if rules.lowercase else raw


class Vocabulary:
    """Bidirectional token <-> id map with frequencies.

    Ids 0, 1, 2 are always ``UNKNOWN``, ``NUMBER`` and ``ROOT``; the remaining
    ids follow descending frequency, ties broken lexicographically.
    """

    unknown_id = 0
    number_id = 1
    root_id = 2

    def __init__(self, tokens: Sequence[str], counts: Sequence[int], min_count: int = 1):
        tokens = list(tokens)
        if tuple(tokens[:3]) != SPECIALS:
            raise ValueError("vocabulary must start with the special tokens")
        if len(set(tokens)) != len(tokens):
            raise ValueError("duplicate tokens in vocabulary")
        self.token_of = tokens
        self.counts = np.asarray(counts, dtype=np.int64)
        if self.counts.shape != (len(tokens),):
            raise ValueError("counts must have one entry per token")
        self.id_of = {tok: i for i, tok in enumerate(tokens)}
        self.min_count = int(min_count)

    def __len__(self):
        return len(self.token_of)

    def __contains__(self, token):
        return token in self.id_of

    def __eq__(self, other):
        return (isinstance(other, Vocabulary) and self.token_of == other.token_of
                and np.array_equal(self.counts, other.counts))

    def __repr__(self):
        return f"Vocabulary(n={len(self)}, tokens={int(self.counts.sum())})"

    @property
    def n(self):
        return len(self.token_of)

    def lookup(self, token: str) -> int:
        return self.id_of.get(token, self.unknown_id)

    def save(self, path):
        """Write ``token<TAB>count`` lines, specials first then by id."""
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            for tok, cnt in zip(self.token_of, self.counts):
                fh.write(f"{tok}\t{int(cnt)}\n")

    @classmethod
    def load(cls, path):
        tokens, counts = [], []
        with open(path, encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, 1):
                line = line.rstrip("\n")
                if not line:
                    continue
                parts = line.split("\t")
                if len(parts) != 2:
                    raise CorpusFormatError("expected 'token<TAB>count'", path, lineno)
                try:
                    counts.append(int(parts[1]))
                except ValueError:
                    raise CorpusFormatError(f"bad count {parts[1]!r}", path, lineno) from None
                tokens.append(parts[0])
        if tuple(tokens[:3]) != SPECIALS:
            raise CorpusFormatError("vocabulary file must list the special tokens first", path)
        return cls(tokens, counts)


def build_vocabulary(stream: Iterable[str], rules: NormalizationRules) -> Vocabulary:
    counter = Counter(normalize_token(tok, rules) for tok in stream)
    if not counter:
        raise ValueError("empty corpus")
    special_counts = {s: counter.pop(s, 0) for s in SPECIALS}
    kept = [(tok, c) for tok, c in counter.items() if c >= rules.min_count]
    dropped = sum(c for c in counter.values() if c < rules.min_count)
    kept.sort(key=lambda tc: (-tc[1], tc[0]))
    tokens = list(SPECIALS) + [tok for tok, _ in kept]
    counts = [special_counts[UNKNOWN] + dropped, special_counts[NUMBER], special_counts[ROOT]]
    counts += [c for _, c in kept]
    return Vocabulary(tokens, counts, min_count=rules.min_count)


def _open_text(path):
    try:
        return open(path, encoding="utf-8", errors="strict")
    except OSError as exc:
        raise CorpusFormatError(f"cannot read corpus: {exc.strerror}", path) from exc


def _split_raw(line: str) -> list[str]:
    return [tok for tok in line.rstrip("\r\n").replace("\t", " ").split(" ") if tok]


def iter_raw_sentences(path) -> Iterator[list[str]]:
    """Yield the whitespace-split tokens of each non-blank line."""
    fh = _open_text(path)
    with fh:
        lineno = 0
        try:
            for lineno, line in enumerate(fh, 1):
                tokens = _split_raw(line)
                if tokens:
                    yield tokens
        except UnicodeDecodeError as exc:
            raise CorpusFormatError(f"malformed UTF-8 ({exc.reason})", path, lineno + 1) from exc


@dataclass
class _ConlluSentence:
    forms: list
    upos: list
    heads: list
    first_line: int


def iter_conllu_sentences(path) -> Iterator[_ConlluSentence]:
    fh = _open_text(path)
    with fh:
        forms, upos, heads, first = [], [], [], None
        lineno = 0
        try:
            for lineno, line in enumerate(fh, 1):
                line = line.rstrip("\r\n")
                if not line.strip():
                    if forms:
                        yield _ConlluSentence(forms, upos, heads, first)
                    forms, upos, heads, first = [], [], [], None
                    continue
                if line.startswith("#"):
                    continue
                cols = line.split("\t")
                if len(cols) != 10:
                    raise CorpusFormatError(
                        f"expected 10 tab-separated columns, found {len(cols)}", path, lineno)
                tid = cols[0]
                if "-" in tid or "." in tid:
                    continue
                try:
                    head = int(cols[6])
                except ValueError:
                    raise CorpusFormatError(f"non-integer HEAD {cols[6]!r}", path, lineno) from None
                if first is None:
                    first = lineno
                forms.append(cols[1])
                upos.append(cols[3])
                heads.append((head, lineno))
        except UnicodeDecodeError as exc:
            raise CorpusFormatError(f"malformed UTF-8 ({exc.reason})", path, lineno + 1) from exc
        if forms:
            yield _ConlluSentence(forms, upos, heads, first)


def iter_tokens(path, fmt="raw") -> Iterator[str]:
    """Flat token stream of a corpus file, used for the vocabulary pass."""
    if fmt == "raw":
        for sent in iter_raw_sentences(path):
            yield from sent
    elif fmt == "conllu":
        for sent in iter_conllu_sentences(path):
            yield from sent.forms
    else:
        raise ValueError(f"unknown corpus format {fmt!r}")


@dataclass(frozen=True, eq=False)
class Corpus:
    """Indexed token stream.

    Attributes
    ----------
    words : ndarray of int32, shape (T,)
        Vocabulary id of each token. Word forms share these ids.
    sentence_starts : ndarray of int64, shape (S + 1,)
        Token offset of every sentence plus the total length.
    pos : ndarray of int32 or None
        Index into ``pos_tags`` per token.
    heads : ndarray of int32 or None
        Signed offset to the syntactic parent within the sentence, ``0`` for
        the root and ``HEAD_MISSING`` where the annotation was dropped.
    """

    words: np.ndarray
    sentence_starts: np.ndarray
    vocab: Vocabulary
    pos: Optional[np.ndarray] = None
    pos_tags: tuple = ()
    heads: Optional[np.ndarray] = None
    rejected_sentences: int = 0
    _sentence_id: np.ndarray = field(default=None, repr=False)

    def __post_init__(self):
        T = len(self.words)
        if self.sentence_starts[0] != 0 or self.sentence_starts[-1] != T:
            raise ValueError("sentence offsets must span the token array")
        if self.pos is not None and len(self.pos) != T:
            raise ValueError("pos annotation must cover every token")
        if self.heads is not None and len(self.heads) != T:
            raise ValueError("head annotation must cover every token")
        lengths = np.diff(self.sentence_starts)
        sid = np.repeat(np.arange(len(lengths), dtype=np.int64), lengths)
        object.__setattr__(self, "_sentence_id", sid)
        for arr in (self.words, self.sentence_starts, self.pos, self.heads, sid):
            if arr is not None:
                arr.setflags(write=False)

    @property
    def T(self):
        return len(self.words)

    @property
    def forms(self):
        return self.words

    @property
    def n_sentences(self):
        return len(self.sentence_starts) - 1

    @property
    def sentence_id(self):
        return self._sentence_id

    @property
    def has_heads(self):
        return self.heads is not None

    @property
    def is_annotated(self):
        return self.pos is not None

    def sentences(self) -> Iterator[np.ndarray]:
        s = self.sentence_starts
        for a, b in zip(s[:-1], s[1:]):
            yield self.words[a:b]

    def slice_sentences(self, start: int, stop: int) -> "Corpus":
        """Sub-corpus made of sentences ``start:stop``."""
        a, b = int(self.sentence_starts[start]), int(self.sentence_starts[stop])
        return Corpus(
            words=self.words[a:b].copy(),
            sentence_starts=(self.sentence_starts[start:stop + 1] - a).copy(),
            vocab=self.vocab,
            pos=None if self.pos is None else self.pos[a:b].copy(),
            pos_tags=self.pos_tags,
            heads=None if self.heads is None else self.heads[a:b].copy(),
        )

    @classmethod
    def from_sentences(cls, sentences, vocab=None, rules=None):
        """Build a corpus from lists of tokens (handy for tests and scripts)."""
        rules = rules or NormalizationRules()
        sentences = [list(s) for s in sentences if len(s)]
        if vocab is None:
            vocab = build_vocabulary((t for s in sentences for t in s), rules)
        return _assemble(sentences, vocab, rules)


def _assemble(sentences, vocab, rules, upos=None, heads=None, rejected=0):
    words, starts = [], [0]
    for sent in sentences:
        words.extend(vocab.lookup(normalize_token(t, rules)) for t in sent)
        starts.append(len(words))
    if not words:
        raise ValueError("empty corpus")
    pos_arr, tags = None, ()
    if upos is not None:
        tags = tuple(sorted({t for s in upos for t in s}))
        tag_id = {t: i for i, t in enumerate(tags)}
        pos_arr = np.fromiter((tag_id[t] for s in upos for t in s), dtype=np.int32, count=len(words))
    head_arr = None
    if heads is not None:
        head_arr = np.fromiter((h for s in heads for h in s), dtype=np.int32, count=len(words))
    return Corpus(
        words=np.asarray(words, dtype=np.int32),
        sentence_starts=np.asarray(starts, dtype=np.int64),
        vocab=vocab,
        pos=pos_arr,
        pos_tags=tags,
        heads=head_arr,
        rejected_sentences=rejected,
    )


def ingest_raw(path, vocab: Vocabulary, rules: NormalizationRules) -> Corpus:
    """Read a whitespace-tokenized file with one sentence per line."""
    sentences = list(iter_raw_sentences(path))
    if not sentences:
        raise ValueError("empty corpus")
    return _assemble(sentences, vocab, rules)


def _has_cycle(offsets: list[int]) -> bool:
    n = len(offsets)
    state = [0] * n  # 0 unvisited, 1 on current path, 2 reaches root
    for start in range(n):
        path = []
        i = start
        while state[i] == 0:
            state[i] = 1
            path.append(i)
            if offsets[i] == 0:
                break
            i += offsets[i]
        else:
            if state[i] == 1:
                return True
        for j in path:
            state[j] = 2
    return False


def ingest_conllu(path, vocab: Vocabulary, rules: NormalizationRules) -> Corpus:
    """Read a CoNLL-U file into a corpus with UPOS tags and head offsets.

    Multiword ranges and empty nodes are skipped. Sentences whose head
    structure contains a cycle keep their tokens but lose their heads; the
    number of such sentences is kept in ``Corpus.rejected_sentences``.
    """
    sentences, upos, heads = [], [], []
    rejected = 0
    for sent in iter_conllu_sentences(path):
        n = len(sent.forms)
        offsets = []
        for i, (head, lineno) in enumerate(sent.heads):
            if head < 0 or head > n:
                raise CorpusFormatError(f"HEAD {head} outside sentence of length {n}", path, lineno)
            offsets.append(0 if head == 0 else head - 1 - i)
        if any(off == 0 and head != 0 for off, (head, _) in zip(offsets, sent.heads)):
            cyclic = True
        else:
            cyclic = _has_cycle(offsets)
        if cyclic:
            logger.warning("%s:%d: dependency cycle, dropping heads of this sentence",
                           path, sent.first_line)
            rejected += 1
            offsets = [HEAD_MISSING] * n
        sentences.append(sent.forms)
        upos.append(sent.upos)
        heads.append(offsets)
    if not sentences:
        raise ValueError("empty corpus")
    return _assemble(sentences, vocab, rules, upos=upos, heads=heads, rejected=rejected)


def load_corpus(path, fmt="raw", rules=None, vocab=None):
    """Two-pass load: build (or reuse) the vocabulary, then ingest."""
    rules = rules or NormalizationRules()
    if vocab is None:
        vocab = build_vocabulary(iter_tokens(path, fmt), rules)
    if fmt == "raw":
        return ingest_raw(path, vocab, rules)
    if fmt == "conllu":
        return ingest_conllu(path, vocab, rules)
    raise ValueError(f"unknown corpus format {fmt!r}")
