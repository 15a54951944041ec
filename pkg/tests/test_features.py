import numpy as np
import pytest
from hypothesis import given, strategies as st

from pwvec.corpus import Corpus
from pwvec.features import (NONE, ROOT, ContextFn, FeatureSpace, build_feature_space, feature_at,
                            resolve_all, resolve_context)

from conftest import random_sentences


@pytest.fixture
def ab_a():
    return Corpus.from_sentences([["a", "b"], ["a"]])


def test_context_fn_validation():
    with pytest.raises(ValueError):
        ContextFn("neighbourhood", 0)
    with pytest.raises(ValueError):
        ContextFn("dependency", -1)
    with pytest.raises(ValueError):
        ContextFn("window", 1)


def test_resolve_adjacent(ab_a):
    assert resolve_context(ab_a, 1, ContextFn("neighbourhood", -1)) == 0


def test_resolve_sentence_start_is_none(ab_a):
    assert resolve_context(ab_a, 0, ContextFn("neighbourhood", -1)) is None


def test_resolve_blocks_sentence_boundary(ab_a):
    assert resolve_context(ab_a, 2, ContextFn("neighbourhood", -1)) is None
    assert resolve_context(ab_a, 2, ContextFn("neighbourhood", -1, cross_sentences=True)) == 1


def test_resolve_out_of_range(ab_a):
    with pytest.raises(IndexError):
        resolve_context(ab_a, 3, ContextFn("neighbourhood", 1))


def test_dependency_to_root(tmp_path):
    from pwvec.corpus import load_corpus

    p = tmp_path / "s.conllu"
    p.write_text("1\ta\ta\tDET\t_\t_\t2\tdet\t_\t_\n2\tb\tb\tNOUN\t_\t_\t0\troot\t_\t_\n")
    c = load_corpus(p, "conllu")
    assert resolve_context(c, 0, ContextFn("dependency", 2)) == ROOT
    assert resolve_context(c, 0, ContextFn("dependency", 1)) == 1
    assert resolve_context(c, 0, ContextFn("dependency", 0)) == 0


def test_dependency_requires_heads(ab_a):
    with pytest.raises(ValueError, match="dependency context requires annotated corpus"):
        resolve_context(ab_a, 0, ContextFn("dependency", 1))
    with pytest.raises(ValueError, match="dependency context requires annotated corpus"):
        build_feature_space(ab_a, "word_form", ContextFn("dependency", 1))


def test_dependency_missing_heads_give_none(tmp_path):
    from pwvec.corpus import load_corpus

    p = tmp_path / "s.conllu"
    p.write_text("1\ta\ta\tX\t_\t_\t2\t_\t_\t_\n2\tb\tb\tX\t_\t_\t1\t_\t_\t_\n")
    c = load_corpus(p, "conllu")
    assert resolve_context(c, 0, ContextFn("dependency", 1)) is None
    assert resolve_all(c, ContextFn("dependency", 1)).tolist() == [NONE, NONE]


def test_vectorized_matches_scalar(annotated):
    for ctx in [ContextFn("neighbourhood", t) for t in (-3, -1, 1, 2)] + \
               [ContextFn("dependency", t) for t in (0, 1, 2, 3)]:
        vec = resolve_all(annotated, ctx)
        for t in range(annotated.T):
            r = resolve_context(annotated, t, ctx)
            assert vec[t] == (NONE if r is None else r)


def test_word_form_space_hand_enumeration():
    c = Corpus.from_sentences([["a", "b", "a"]])
    s = build_feature_space(c, "word_form", ContextFn("neighbourhood", -1))
    assert s.symbols == ("a", "b") and s.m == 2


def test_pos_space_small(annotated):
    s = build_feature_space(annotated, "pos", ContextFn("dependency", 1))
    assert s.m <= 17 + 1
    assert "<root>" in s.symbols
    assert list(s.symbols) == sorted(s.symbols)


def test_joint_feature_lookup(annotated):
    s = build_feature_space(annotated, "joint", ContextFn("neighbourhood", 1))
    cat = annotated.vocab.token_of.index("cat")
    t = int(np.flatnonzero(annotated.words == cat)[0])
    assert feature_at(annotated, t, s) == s.index["cat|NOUN"]


def test_joint_space_is_pruned(annotated):
    s = build_feature_space(annotated, "joint", ContextFn("neighbourhood", -1))
    forms = [annotated.vocab.token_of[w] for w in annotated.words]
    tags = [annotated.pos_tags[p] for p in annotated.pos]
    observed = {f"{f}|{t}" for f, t in zip(forms, tags)}
    assert set(s.symbols) <= observed
    assert "cat|VERB" not in s.index


def test_root_feature(annotated):
    s = build_feature_space(annotated, "pos", ContextFn("dependency", 1))
    assert feature_at(annotated, ROOT, s) == s.index["<root>"]
    assert feature_at(annotated, None, s) is None


def test_pruned_joint_pair_is_none(annotated):
    s = FeatureSpace("joint", [ContextFn("neighbourhood", 1)], ["cat|NOUN"])
    assert feature_at(annotated, 0, s) is None  # "the|DET" not in the space


def test_pos_needs_annotation(ab_a):
    with pytest.raises(ValueError, match="annotated"):
        build_feature_space(ab_a, "pos", ContextFn("neighbourhood", 1))


def test_manifest_roundtrip(tmp_path, annotated):
    s = build_feature_space(annotated, "joint", ContextFn("neighbourhood", 1))
    s.save(tmp_path / "f.tsv")
    assert tuple(FeatureSpace.load_symbols(tmp_path / "f.tsv")) == s.symbols


def test_duplicate_symbols_rejected():
    with pytest.raises(ValueError):
        FeatureSpace("word_form", [ContextFn("neighbourhood", 1)], ["a", "a"])


@given(st.integers(0, 2**31 - 1), st.integers(-3, 3).filter(lambda t: t != 0))
def test_at_most_one_feature_and_subset_of_vocab(seed, tau):
    rng = np.random.default_rng(seed)
    c = Corpus.from_sentences(random_sentences(rng))
    ctx = ContextFn("neighbourhood", tau)
    s = build_feature_space(c, "word_form", ctx)
    ids = s.feature_ids(c, resolve_all(c, ctx))
    assert ids.shape == (c.T,)  # one slot per token: at most one feature fires
    assert set(s.symbols) <= set(c.vocab.token_of)
    s2 = build_feature_space(c, "word_form", ctx)
    assert s2.symbols == s.symbols
