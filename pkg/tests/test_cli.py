import numpy as np
import pytest

from pwvec import data_path
from pwvec.cli import main, read_config
from pwvec.coocmat import SparseCountMatrix, combine_window, count_matrix, window_weights
from pwvec.corpus import NormalizationRules, Vocabulary, load_corpus
from pwvec.features import ContextFn, build_feature_space
from pwvec.gpca import Embeddings, GpcaParams, LambdaSpec, gpca
from pwvec.linalg import SketchParams
from pwvec._validation import check_random_state_seed

RAW = "the cat sat on the mat\nthe dog sat\na cat saw 42 dogs\n\nthe mat\n"


@pytest.fixture
def raw(tmp_path):
    p = tmp_path / "c.txt"
    p.write_text(RAW)
    return p


def write_cfg(tmp_path, name="run.cfg", **keys):
    p = tmp_path / name
    p.write_text("".join(f"{k} = {v}\n" for k, v in keys.items()))
    return p


def run(*argv):
    return main([str(a) for a in argv])


def test_vocab_specials_first_and_sorted(tmp_path, raw):
    out = tmp_path / "v.txt"
    assert run("vocab", raw, "--output", out) == 0
    lines = out.read_text().splitlines()
    assert [l.split("\t")[0] for l in lines[:3]] == ["<unknown>", "<number>", "<root>"]
    counts = [int(l.split("\t")[1]) for l in lines[3:]]
    assert counts == sorted(counts, reverse=True)
    assert lines[3] == "the\t4"


def test_vocab_min_count(tmp_path, raw):
    out = tmp_path / "v.txt"
    assert run("vocab", raw, "--min-count", 2, "--output", out) == 0
    v = Vocabulary.load(out)
    assert "dog" not in v and "cat" in v


def test_vocab_byte_deterministic(tmp_path, raw):
    a, b = tmp_path / "a.txt", tmp_path / "b.txt"
    run("vocab", raw, "--output", a)
    run("vocab", raw, "--output", b)
    assert a.read_bytes() == b.read_bytes()


def test_vocab_missing_corpus_is_usage_error(tmp_path, capsys):
    assert run("vocab", "--output", tmp_path / "v.txt") == 1
    assert "corpus" in capsys.readouterr().err


def test_missing_file_is_data_error(tmp_path):
    assert run("vocab", tmp_path / "nope.txt", "--output", tmp_path / "v.txt") == 2


def test_cooc_window_equals_library_sum(tmp_path, raw):
    cfg = write_cfg(tmp_path, corpus=raw.name,
                    features="kind=word_form context=neighbourhood window=2 direction=symmetric")
    out = tmp_path / "m.txt"
    assert run("cooc", "--config", cfg, "--output", out) == 0
    M = SparseCountMatrix.load(out)

    corpus = load_corpus(raw, "raw", NormalizationRules())
    taus, alphas = window_weights(2, "symmetric")
    ctxs = [ContextFn("neighbourhood", t) for t in taus]
    space = build_feature_space(corpus, "word_form", ctxs)
    ref = combine_window([count_matrix(corpus, space, c) for c in ctxs], alphas)
    assert np.array_equal(M.toarray(), ref.toarray())
    symbols = [l.split("\t")[1] for l in (tmp_path / "m.txt.features").read_text().splitlines()]
    assert symbols == list(space.symbols)


def test_cooc_union_order(tmp_path, raw):
    feats = ("kind=word_form context=neighbourhood taus=-1 combine=window; "
             "kind=word_form context=neighbourhood taus=1 combine=window")
    cfg = write_cfg(tmp_path, corpus=raw.name, features=feats)
    out = tmp_path / "m.txt"
    assert run("cooc", "--config", cfg, "--output", out) == 0
    corpus = load_corpus(raw, "raw", NormalizationRules())
    blocks = []
    for t in (-1, 1):
        ctx = ContextFn("neighbourhood", t)
        blocks.append(count_matrix(corpus, build_feature_space(corpus, "word_form", ctx)).toarray())
    assert np.array_equal(SparseCountMatrix.load(out).toarray(), np.vstack(blocks))


def test_cooc_dependency_on_raw_is_data_error(tmp_path, raw, capsys):
    cfg = write_cfg(tmp_path, corpus=raw.name, features="kind=word_form context=dependency taus=1")
    assert run("cooc", "--config", cfg, "--output", tmp_path / "m.txt") == 2
    assert "annotated" in capsys.readouterr().err


def test_unknown_config_key(tmp_path, raw, capsys):
    cfg = write_cfg(tmp_path, corpus=raw.name, colour="blue")
    assert run("cooc", "--config", cfg) == 1
    assert "colour" in capsys.readouterr().err


def test_bad_config_value(tmp_path, raw):
    cfg = write_cfg(tmp_path, corpus=raw.name, k="many")
    assert run("embed", "--config", cfg) == 1


def test_bad_flag_is_usage_error():
    assert run("embed", "--no-such-flag") == 1


def test_relative_paths_resolve_against_config(tmp_path, raw):
    sub = tmp_path / "conf"
    sub.mkdir()
    cfg = write_cfg(sub, corpus="../c.txt")
    assert read_config(cfg)["corpus"] == str(raw.resolve())


def embed_cfg(tmp_path, raw, **extra):
    keys = dict(corpus=raw.name, k=3, features="kind=word_form context=neighbourhood window=1")
    keys.update(extra)
    return write_cfg(tmp_path, **keys)


def test_embed_matches_library(tmp_path, raw):
    cfg = embed_cfg(tmp_path, raw, seed=5)
    out = tmp_path / "e.txt"
    assert run("embed", "--config", cfg, "--output", out) == 0

    corpus = load_corpus(raw, "raw", NormalizationRules())
    taus, alphas = window_weights(1)
    ctxs = [ContextFn("neighbourhood", t) for t in taus]
    space = build_feature_space(corpus, "word_form", ctxs)
    M = combine_window([count_matrix(corpus, space, c) for c in ctxs], alphas)
    params = GpcaParams(lam=LambdaSpec("classic", 3),
                        sketch=SketchParams(k=3, K=13, q=2, seed=check_random_state_seed(5, 0)))
    ref = tmp_path / "ref.txt"
    gpca(M, params, tokens=corpus.vocab.token_of).save(ref)
    assert out.read_bytes() == ref.read_bytes()


def test_embed_seed_recorded_and_changes_vectors(tmp_path, raw):
    feats = "kind=word_form context=neighbourhood window=2"
    a, b = tmp_path / "a.txt", tmp_path / "b.txt"
    cfg = write_cfg(tmp_path, corpus=raw.name, k=2, sketch_width=2, power_iterations=0,
                    features=feats)
    assert run("embed", "--config", cfg, "--seed", 1, "--output", a) == 0
    assert run("embed", "--config", cfg, "--seed", 2, "--output", b) == 0
    assert a.read_bytes() != b.read_bytes()
    manifest = (tmp_path / "a.txt.manifest").read_text()
    assert f"# svd_seed = {check_random_state_seed(1, 0)}" in manifest
    assert f"# anneal_seed = {check_random_state_seed(1, 1)}" in manifest
    assert "seed = 1" in manifest.splitlines()


def test_embed_k_too_large_warns(tmp_path, raw, capsys):
    cfg = embed_cfg(tmp_path, raw, k=40)
    out = tmp_path / "e.txt"
    assert run("embed", "--config", cfg, "--output", out) == 0
    assert "emitting k=" in capsys.readouterr().err
    n, k = map(int, out.read_text().splitlines()[0].split())
    assert k < 40 and Embeddings.load(out).k == k


def test_manifest_is_rerunnable(tmp_path, raw):
    cfg = embed_cfg(tmp_path, raw, seed=9, transform="hellinger")
    a, b = tmp_path / "a.txt", tmp_path / "b.txt"
    assert run("embed", "--config", cfg, "--output", a) == 0
    assert run("embed", "--config", tmp_path / "a.txt.manifest", "--output", b) == 0
    assert a.read_bytes() == b.read_bytes()


def test_embed_from_spilled_matrix(tmp_path, raw):
    cfg = embed_cfg(tmp_path, raw, seed=4)
    v, m, a, b = (tmp_path / f for f in ("v.txt", "m.txt", "a.txt", "b.txt"))
    assert run("vocab", "--config", cfg, "--output", v) == 0
    assert run("cooc", "--config", cfg, "--vocab", v, "--output", m) == 0
    assert run("embed", "--config", cfg, "--vocab", v, "--matrix", m, "--output", a) == 0
    assert run("embed", "--config", cfg, "--output", b) == 0
    assert a.read_bytes() == b.read_bytes()


def test_power_transform_needs_value(tmp_path, raw):
    assert run("embed", "--config", embed_cfg(tmp_path, raw, transform="power")) == 1


@pytest.fixture
def emb_file(tmp_path, raw):
    out = tmp_path / "e.txt"
    assert run("embed", "--config", embed_cfg(tmp_path, raw), "--output", out) == 0
    return out


def report(text):
    return dict(line.split(" = ", 1) for line in text.splitlines())


def test_eval_gv(emb_file, capsys):
    assert run("eval", "gv", emb_file) == 0
    rep = report(capsys.readouterr().out)
    from pwvec.evaluation import log_generalized_variance
    assert float(rep["log_generalized_variance"]) == log_generalized_variance(
        Embeddings.load(emb_file).vectors)


def test_eval_sim(tmp_path, emb_file, capsys):
    bench = tmp_path / "b.txt"
    bench.write_text("cat dog 5\ncat mat 2\nthe sat 1\nzebra cat 3\n")
    assert run("eval", "sim", emb_file, bench) == 0
    rep = report(capsys.readouterr().out)
    assert rep["pairs[b.txt]"] == "3" and rep["oov[b.txt]"] == "1"
    assert -1.0 <= float(rep["average"]) <= 1.0


def test_eval_spectrum_files(tmp_path, emb_file):
    out = tmp_path / "s"
    assert run("eval", "spectrum", emb_file, "--output", out) == 0
    tv = np.loadtxt(f"{out}.tv.tsv")
    assert tv[-1, 1] == 100.0
    for name in ("lev", "lgv"):
        assert (tmp_path / f"s.{name}.tsv").exists()


def test_eval_fdr_one_class_is_data_error(tmp_path, emb_file, capsys):
    lab = tmp_path / "l.conllu"
    lab.write_text("1\tthe\t_\tDET\t_\t_\t2\tdet\t_\t_\n2\tcat\t_\tDET\t_\t_\t0\troot\t_\t_\n")
    assert run("eval", "fdr", emb_file, lab, "--half-window", 0) == 2
    assert "two classes" in capsys.readouterr().err


def test_eval_fdr_conll2003(tmp_path, emb_file, capsys):
    lab = tmp_path / "ner.txt"
    lab.write_text("the DT B-NP O\ncat NN I-NP B-ANI\nsat VBD B-VP O\n\n"
                   "the DT B-NP O\ndog NN I-NP B-ANI\n")
    assert run("eval", "fdr", emb_file, lab, "--labels-format", "conll2003",
               "--half-window", 0) == 0
    rep = report(capsys.readouterr().out)
    assert rep["classes"] == "2" and float(rep["fdr"]) >= 0


def test_bundled_config_parses():
    cfg = read_config(data_path("toy.cfg"))
    assert cfg["corpus"] == data_path("toy_corpus.txt") and cfg["k"] == 25
