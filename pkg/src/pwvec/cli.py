"""Command-line interface: ``pwvec vocab | cooc | embed | eval {gv,fdr,sim,spectrum}``.

Runs are described by a ``key = value`` config file; command-line flags
override config values. Exit codes: 0 success, 1 usage or config error,
2 data error.
"""
from __future__ import annotations

import argparse
import configparser
import logging
import os
import sys
import warnings
from pathlib import Path

from . import __version__
from ._validation import check_random_state_seed
from .coocmat import SparseCountMatrix
from .corpus import CorpusFormatError, NormalizationRules, Vocabulary, build_vocabulary, \
    iter_tokens, load_corpus
from .evaluation import (corpus_windows, eigen_report, embedding_spectrum, fdr,
                         log_generalized_variance, read_conll2003, windowed_representation,
                         word_similarity)
from .features import FeatureSpace
from .gpca import (Embeddings, FeatureSpec, GpcaParams, LambdaSpec, build_contextual_matrix,
                   digest, gpca, matrix_digest)
from .linalg import SketchParams
from .transform import AnnealParams, TransformSpec

logger = logging.getLogger("pwvec")


class UsageError(Exception):
    """Bad invocation or config; maps to exit code 1."""


def _bool(s):
    v = str(s).strip().lower()
    if v in ("1", "true", "yes", "on"):
        return True
    if v in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {s!r}")


def _choice(*options):
    def parse(s):
        if s not in options:
            raise ValueError(f"expected one of {', '.join(options)}, got {s!r}")
        return s
    return parse


def _optional(parse):
    def wrapped(s):
        return None if s in ("", "none", "None") else parse(s)
    return wrapped


def _bandwidth(s):
    return s if s in ("silverman", "scott") else float(s)


DEFAULT_FEATURES = "kind=word_form context=neighbourhood window=1 direction=symmetric combine=window"

# key -> (parser, default)
SCHEMA = {
    "corpus": (str, None),
    "format": (_choice("raw", "conllu"), "raw"),
    "vocab": (str, None),
    "matrix": (str, None),
    "min_count": (int, 1),
    "lowercase": (_bool, False),
    "collapse_digits": (_bool, True),
    "features": (str, DEFAULT_FEATURES),
    "metric": (_choice("identity", "iff", "isf"), "identity"),
    "weight": (_choice("identity", "iwf"), "identity"),
    "transform": (_choice("identity", "log", "hellinger", "power", "tune_single", "tune_vector"),
                  "identity"),
    "power": (_optional(float), None),
    "lambda": (_choice("classic", "normalized"), "classic"),
    "k": (int, 100),
    "alpha": (float, 1.0),
    "rescale": (_bool, False),
    "sketch_width": (_optional(int), None),
    "power_iterations": (int, 2),
    "anneal_iterations": (int, 200),
    "anneal_temperature": (float, 1.0),
    "anneal_cooling": (float, 0.98),
    "anneal_step": (float, 0.05),
    "anneal_sample": (int, 5000),
    "anneal_block_length": (int, 2),
    "anneal_blocks": (int, 50),
    "anneal_bandwidth": (_bandwidth, "silverman"),
    "seed": (int, 0),
    "workers": (_optional(int), None),
}
PATH_KEYS = ("corpus", "vocab", "matrix")


def read_config(path) -> dict:
    """Parse a ``key = value`` file against :data:`SCHEMA`.

    Relative paths are resolved against the config file's directory.
    """
    parser = configparser.ConfigParser(interpolation=None, delimiters=("=",),
                                       comment_prefixes=("#",), empty_lines_in_values=False)
    parser.optionxform = str
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise UsageError(f"cannot read config {path}: {exc.strerror}") from None
    try:
        parser.read_string("[run]\n" + text, source=str(path))
    except configparser.Error as exc:
        raise UsageError(f"malformed config {path}: {exc}") from None
    raw = dict(parser["run"])
    return parse_settings(raw, base=Path(path).resolve().parent, source=str(path))


def parse_settings(raw: dict, base=None, source="config") -> dict:
    unknown = sorted(set(raw) - set(SCHEMA))
    if unknown:
        raise UsageError(f"{source}: unknown key(s): {', '.join(unknown)}")
    out = {}
    for key, value in raw.items():
        parse = SCHEMA[key][0]
        try:
            out[key] = parse(value.strip())
        except ValueError as exc:
            raise UsageError(f"{source}: bad value for {key}: {exc}") from None
        if key in PATH_KEYS and out[key] is not None and base is not None:
            out[key] = str((Path(base) / out[key]).resolve())
    return out


def settings_from(args) -> dict:
    cfg = {k: d for k, (_, d) in SCHEMA.items()}
    if args.config:
        cfg.update(read_config(args.config))
    if args.seed is not None:
        cfg["seed"] = args.seed
    if args.workers is not None:
        cfg["workers"] = args.workers
    if args.min_count is not None:
        cfg["min_count"] = args.min_count
    for key in ("vocab", "matrix"):
        if getattr(args, key, None):
            cfg[key] = str(Path(getattr(args, key)).resolve())
    if args.lowercase:
        cfg["lowercase"] = True
    if cfg["workers"] is None:
        cfg["workers"] = os.cpu_count() or 1
    if cfg["workers"] < 1 or cfg["min_count"] < 1 or cfg["k"] < 1:
        raise UsageError("workers, min_count and k must be >= 1")
    return cfg


def format_settings(cfg: dict) -> list[str]:
    """Config lines (``key = value``) that reproduce ``cfg``; ``workers`` is omitted."""
    lines = []
    for key in SCHEMA:
        if key == "workers":
            continue
        val = cfg.get(key)
        if val is None:
            continue
        if isinstance(val, bool):
            val = str(val).lower()
        elif isinstance(val, float):
            val = repr(val)
        lines.append(f"{key} = {val}")
    return lines


def parse_feature_specs(text: str) -> list[FeatureSpec]:
    """Parse ``;``-separated specs of ``name=value`` fields."""
    specs = []
    for chunk in text.split(";"):
        chunk = chunk.strip()
        if not chunk:
            continue
        fields = {}
        for item in chunk.split():
            name, sep, value = item.partition("=")
            if not sep:
                raise UsageError(f"feature spec field {item!r} is not name=value")
            fields[name] = value
        allowed = {"kind", "context", "taus", "window", "direction", "combine", "cross_sentences"}
        bad = set(fields) - allowed
        if bad:
            raise UsageError(f"unknown feature spec field(s): {', '.join(sorted(bad))}")
        try:
            specs.append(FeatureSpec(
                kind=fields.get("kind", "word_form"),
                context=fields.get("context", "neighbourhood"),
                taus=tuple(int(t) for t in fields["taus"].split(",")) if "taus" in fields else None,
                window=int(fields["window"]) if "window" in fields else None,
                direction=fields.get("direction", "symmetric"),
                combine=fields.get("combine", "window"),
                cross_sentences=_bool(fields.get("cross_sentences", "false")),
            ))
        except ValueError as exc:
            raise UsageError(f"bad feature spec {chunk!r}: {exc}") from None
    if not specs:
        raise UsageError("no feature specs given")
    return specs


def rules_of(cfg) -> NormalizationRules:
    return NormalizationRules(lowercase=cfg["lowercase"], collapse_digits=cfg["collapse_digits"],
                              min_count=cfg["min_count"])


def gpca_params(cfg) -> GpcaParams:
    t = cfg["transform"]
    if t in ("tune_single", "tune_vector"):
        spec = t
    elif t == "power":
        if cfg["power"] is None:
            raise UsageError("transform = power needs a power value")
        spec = TransformSpec("power_single", cfg["power"])
    else:
        spec = TransformSpec(t)
    k = cfg["k"]
    K = cfg["sketch_width"] if cfg["sketch_width"] is not None else k + 10
    seed = cfg["seed"]
    try:
        return GpcaParams(
            metric=cfg["metric"], weight=cfg["weight"], transform=spec,
            lam=LambdaSpec(cfg["lambda"], k, cfg["alpha"], cfg["rescale"]),
            sketch=SketchParams(k=k, K=K, q=cfg["power_iterations"],
                                seed=check_random_state_seed(seed, 0)),
            anneal=AnnealParams(
                iterations=cfg["anneal_iterations"], initial_temperature=cfg["anneal_temperature"],
                cooling=cfg["anneal_cooling"], step=cfg["anneal_step"],
                sample_size=cfg["anneal_sample"], block_length=cfg["anneal_block_length"],
                block_count=cfg["anneal_blocks"], bandwidth=cfg["anneal_bandwidth"],
                seed=check_random_state_seed(seed, 1),
            ),
        )
    except ValueError as exc:
        raise UsageError(f"invalid parameters: {exc}") from None


def _require(cfg, key, what):
    if not cfg.get(key):
        raise UsageError(f"{what} needs '{key}' (config key or argument)")
    return cfg[key]


def _load_vocab(cfg):
    if cfg.get("vocab"):
        return Vocabulary.load(cfg["vocab"])
    corpus = _require(cfg, "corpus", "building a vocabulary")
    return build_vocabulary(iter_tokens(corpus, cfg["format"]), rules_of(cfg))


def _load_corpus(cfg):
    path = _require(cfg, "corpus", "this command")
    return load_corpus(path, cfg["format"], rules_of(cfg), _load_vocab(cfg))


def _write_lines(path, lines):
    text = "".join(line + "\n" for line in lines)
    if path is None:
        sys.stdout.write(text)
    else:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)


def cmd_vocab(args, cfg):
    if args.corpus:
        cfg["corpus"] = str(Path(args.corpus).resolve())
    if args.format:
        cfg["format"] = args.format
    path = _require(cfg, "corpus", "vocab")
    vocab = build_vocabulary(iter_tokens(path, cfg["format"]), rules_of(cfg))
    out = args.output or "vocab.txt"
    vocab.save(out)
    logger.info("vocabulary of %d types written to %s", len(vocab), out)


def cmd_cooc(args, cfg):
    corpus = _load_corpus(cfg)
    specs = parse_feature_specs(cfg["features"])
    M = build_contextual_matrix(corpus, specs, n_jobs=cfg["workers"])
    out = args.output or "matrix.txt"
    M.save(out)
    with open(out + ".features", "w", encoding="utf-8", newline="\n") as fh:
        for i, s in enumerate(M.row_symbols or ()):
            fh.write(f"{i}\t{s}\n")
    logger.info("%r written to %s", M, out)


def _embed_matrix(cfg):
    if cfg.get("matrix"):
        vocab = _load_vocab(cfg)
        sym_path = cfg["matrix"] + ".features"
        symbols = FeatureSpace.load_symbols(sym_path) if os.path.exists(sym_path) else None
        M = SparseCountMatrix.load(cfg["matrix"], row_symbols=symbols)
        if M.n != len(vocab):
            raise ValueError(f"matrix has {M.n} columns but the vocabulary has {len(vocab)} words")
        return M, vocab, None
    corpus = _load_corpus(cfg)
    M = build_contextual_matrix(corpus, parse_feature_specs(cfg["features"]), n_jobs=cfg["workers"])
    return M, corpus.vocab, corpus


def cmd_embed(args, cfg):
    params = gpca_params(cfg)
    M, vocab, corpus = _embed_matrix(cfg)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        emb = gpca(M, params, tokens=vocab.token_of)
    for w in caught:
        print(f"warning: {w.message}", file=sys.stderr)
    out = args.output or "embeddings.txt"
    emb.save(out)
    notes = [
        f"k_emitted = {emb.k}",
        f"transform_fitted = {emb.manifest['transform']}",
        f"svd_seed = {params.sketch.seed}",
        f"anneal_seed = {params.anneal.seed}",
        f"matrix_digest = {emb.manifest.get('matrix_digest', '')}",
        f"vocab_digest = {digest(chr(10).join(vocab.token_of), vocab.counts)}",
        f"orientation = {emb.manifest['orientation']}",
    ]
    if corpus is not None:
        notes.append(f"corpus_digest = {digest(corpus.words, corpus.sentence_starts)}")
    _write_lines(out + ".manifest", [f"# {n}" for n in notes] + format_settings(cfg))
    logger.info("%d x %d embeddings written to %s", emb.n, emb.k, out)


def _fmt(x):
    return repr(float(x))


def cmd_eval(args, cfg):
    emb = Embeddings.load(args.embeddings)
    what = args.metric
    if what == "gv":
        lines = [f"n = {emb.n}", f"k = {emb.k}",
                 f"log_generalized_variance = {_fmt(log_generalized_variance(emb.vectors))}"]
    elif what == "fdr":
        rules = rules_of(cfg)
        if args.labels_format == "conllu":
            corpus = load_corpus(args.labels, "conllu", rules)
            ws = corpus_windows(corpus, emb, args.half_window)
        else:
            corpus, labels, names = read_conll2003(args.labels, rules=rules)
            ws = windowed_representation(corpus.words, corpus.sentence_starts, labels, emb,
                                         corpus.vocab, args.half_window, names)
        lines = [f"tokens = {ws.rows.shape[0]}", f"dimension = {ws.rows.shape[1]}",
                 f"classes = {len(ws.classes)}", f"fdr = {_fmt(fdr(ws))}"]
    elif what == "sim":
        results, avg = word_similarity(emb, args.benchmarks)
        lines = []
        for r in results:
            lines += [f"spearman[{r.name}] = {_fmt(r.spearman)}", f"pairs[{r.name}] = {r.n_pairs}",
                      f"oov[{r.name}] = {r.n_oov}"]
        lines.append(f"average = {_fmt(avg)}")
    else:
        rep = eigen_report(embedding_spectrum(emb.vectors))
        lines = [f"k = {len(rep.eigenvalues)}",
                 f"total_variance = {_fmt(rep.eigenvalues.sum())}",
                 "eigenvalues = " + " ".join(_fmt(x) for x in rep.eigenvalues)]
        for name, series in rep.series():
            body = [f"{i}\t{_fmt(v)}" for i, v in enumerate(series, 1)]
            if args.output:
                _write_lines(f"{args.output}.{name}.tsv", body)
            else:
                lines += [f"{name} = " + " ".join(_fmt(v) for v in series)]
    _write_lines(args.output, lines)


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="PATH", help="key = value run configuration")
    common.add_argument("--seed", type=int, help="run seed (overrides config)")
    common.add_argument("--workers", type=int, help="worker threads for counting")
    common.add_argument("--min-count", type=int, dest="min_count",
                        help="map rarer words to <unknown>")
    common.add_argument("--lowercase", action="store_true", help="lowercase tokens")
    common.add_argument("--vocab", metavar="PATH", help="vocabulary file (overrides config)")
    common.add_argument("--matrix", metavar="PATH", help="spilled contextual matrix (embed)")
    common.add_argument("--output", metavar="PATH", help="output file")
    common.add_argument("-v", "--verbose", action="store_true", help="log progress")

    p = _Parser(prog="pwvec", description="Principal word vectors.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    v = sub.add_parser("vocab", parents=[common], help="build a vocabulary file")
    v.add_argument("corpus", nargs="?", help="corpus file (or config key 'corpus')")
    v.add_argument("--format", choices=("raw", "conllu"))
    v.set_defaults(func=cmd_vocab)

    c = sub.add_parser("cooc", parents=[common], help="count and spill the contextual matrix")
    c.set_defaults(func=cmd_cooc)

    e = sub.add_parser("embed", parents=[common], help="compute principal word vectors")
    e.set_defaults(func=cmd_embed)

    ev = sub.add_parser("eval", help="evaluate embeddings")
    evsub = ev.add_subparsers(dest="metric", required=True, parser_class=_Parser)
    g = evsub.add_parser("gv", parents=[common], help="log generalized variance")
    g.add_argument("embeddings")
    f = evsub.add_parser("fdr", parents=[common], help="Fisher discriminant ratio")
    f.add_argument("embeddings")
    f.add_argument("labels", help="labelled corpus")
    f.add_argument("--labels-format", choices=("conllu", "conll2003"), default="conllu")
    f.add_argument("--half-window", type=int, default=3)
    s = evsub.add_parser("sim", parents=[common], help="word similarity benchmarks")
    s.add_argument("embeddings")
    s.add_argument("benchmarks", nargs="+")
    sp_ = evsub.add_parser("spectrum", parents=[common], help="TV, LEV and LGV series")
    sp_.add_argument("embeddings")
    for q in (g, f, s, sp_):
        q.set_defaults(func=cmd_eval)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = settings_from(args)
        args.func(args, cfg)
    except UsageError as exc:
        print(f"pwvec: error: {exc}", file=sys.stderr)
        return 1
    except (CorpusFormatError, ValueError, OSError, KeyError) as exc:
        print(f"pwvec: error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
