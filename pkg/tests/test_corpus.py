import numpy as np
import pytest
from hypothesis import given, strategies as st

from pwvec.corpus import (HEAD_MISSING, NUMBER, ROOT, SPECIALS, UNKNOWN, Corpus, CorpusFormatError,
                          NormalizationRules, Vocabulary, build_vocabulary, ingest_conllu,
                          ingest_raw, iter_tokens, load_corpus, normalize_token)


def test_normalize_digit_only_token_becomes_number():
    assert normalize_token("2017", NormalizationRules()) == NUMBER


def test_normalize_lowercase():
    assert normalize_token("Cat", NormalizationRules(lowercase=True)) == "cat"
    assert normalize_token("Cat", NormalizationRules()) == "Cat"


def test_normalize_mixed_token_untouched():
    assert normalize_token("x1y", NormalizationRules()) == "x1y"


def test_normalize_digits_kept_when_collapse_off():
    assert normalize_token("42", NormalizationRules(collapse_digits=False)) == "42"


def test_normalize_empty_raises():
    with pytest.raises(ValueError):
        normalize_token("", NormalizationRules())


def test_min_count_must_be_positive():
    with pytest.raises(ValueError):
        NormalizationRules(min_count=0)


def test_vocabulary_no_threshold():
    v = build_vocabulary(["a", "b", "a"], NormalizationRules())
    assert v.token_of == [UNKNOWN, NUMBER, ROOT, "a", "b"]
    assert v.counts.tolist() == [0, 0, 0, 2, 1]


def test_vocabulary_min_count_moves_mass_to_unknown():
    v = build_vocabulary(["a", "b", "a"], NormalizationRules(min_count=2))
    assert v.token_of == [UNKNOWN, NUMBER, ROOT, "a"]
    assert v.counts[v.id_of["a"]] == 2
    assert v.counts[v.unknown_id] == 1


def test_vocabulary_number_count():
    v = build_vocabulary(["a", "7", "a"], NormalizationRules())
    assert v.counts[v.id_of["a"]] == 2
    assert v.counts[v.number_id] == 1
    assert "7" not in v


def test_vocabulary_ties_lexicographic():
    v = build_vocabulary(["c", "b", "a", "b"], NormalizationRules())
    assert v.token_of[3:] == ["b", "a", "c"]


def test_empty_stream_raises():
    with pytest.raises(ValueError, match="empty corpus"):
        build_vocabulary([], NormalizationRules())


@given(st.lists(st.sampled_from(["a", "b", "c", "d", "1", "22", "Ab"]), min_size=1, max_size=60),
       st.integers(1, 4), st.booleans())
def test_vocabulary_invariants(stream, min_count, lowercase):
    rules = NormalizationRules(lowercase=lowercase, min_count=min_count)
    v = build_vocabulary(stream, rules)
    # ids and tokens are mutual inverses, specials exactly once
    assert all(v.id_of[t] == i for i, t in enumerate(v.token_of))
    assert tuple(v.token_of[:3]) == SPECIALS
    assert all(v.counts[i] >= min_count for i in range(3, len(v)))
    # counts account for every token
    assert v.counts.sum() == len(stream)


def test_vocabulary_roundtrip(tmp_path):
    v = build_vocabulary(list("abracadabra"), NormalizationRules())
    v.save(tmp_path / "v.txt")
    assert Vocabulary.load(tmp_path / "v.txt") == v
    lines = (tmp_path / "v.txt").read_text().splitlines()
    assert lines[0] == f"{UNKNOWN}\t0"
    assert lines[3] == "a\t5"


def test_vocabulary_load_rejects_bad_count(tmp_path):
    p = tmp_path / "v.txt"
    p.write_text(f"{UNKNOWN}\t0\n{NUMBER}\t0\n{ROOT}\t0\na\tx\n")
    with pytest.raises(CorpusFormatError, match=":4:"):
        Vocabulary.load(p)


def test_ingest_raw_sentences(tmp_path):
    p = tmp_path / "c.txt"
    p.write_text("a b\na\n")
    c = load_corpus(p)
    assert c.T == 3
    assert [c.vocab.token_of[w] for w in c.words] == ["a", "b", "a"]
    assert c.sentence_starts.tolist() == [0, 2, 3]
    assert c.pos is None and c.heads is None


def test_ingest_raw_unknown_token(tmp_path):
    p = tmp_path / "c.txt"
    p.write_text("a zzz\n")
    vocab = build_vocabulary(["a"], NormalizationRules())
    c = ingest_raw(p, vocab, NormalizationRules())
    assert c.words[1] == vocab.unknown_id


def test_ingest_raw_empty_file(tmp_path):
    p = tmp_path / "c.txt"
    p.write_text("\n\n")
    with pytest.raises(ValueError, match="empty corpus"):
        ingest_raw(p, build_vocabulary(["a"], NormalizationRules()), NormalizationRules())


def test_ingest_raw_tabs_and_spaces(tmp_path):
    p = tmp_path / "c.txt"
    p.write_text("a\t b  c\n")
    assert load_corpus(p).T == 3


def test_ingest_raw_malformed_utf8(tmp_path):
    p = tmp_path / "c.txt"
    p.write_bytes(b"a b\n\xff\xfe c\n")
    with pytest.raises(CorpusFormatError, match="UTF-8"):
        load_corpus(p)


def test_ingest_raw_missing_file(tmp_path):
    with pytest.raises(CorpusFormatError):
        load_corpus(tmp_path / "missing.txt")


def test_ingest_deterministic(tmp_path):
    p = tmp_path / "c.txt"
    p.write_text("the cat sat\non the mat 12\n")
    a, b = load_corpus(p), load_corpus(p)
    assert np.array_equal(a.words, b.words)
    assert np.array_equal(a.sentence_starts, b.sentence_starts)


def test_conllu_heads_and_pos(annotated):
    c = annotated
    forms = [c.vocab.token_of[w] for w in c.words]
    assert forms == ["the", "cat", "sees", "the", "dog", "do", "n't", "sleep", "cat"]
    tags = [c.pos_tags[p] for p in c.pos]
    assert tags == ["DET", "NOUN", "VERB", "DET", "NOUN", "AUX", "PART", "VERB", "NOUN"]
    assert c.heads.tolist() == [1, 1, 0, 1, -2, 2, 1, 0, -1]
    assert c.sentence_starts.tolist() == [0, 5, 9]


def test_conllu_two_token_example(tmp_path):
    p = tmp_path / "s.conllu"
    p.write_text("1\ta\ta\tDET\t_\t_\t2\tdet\t_\t_\n2\tb\tb\tNOUN\t_\t_\t0\troot\t_\t_\n")
    c = load_corpus(p, "conllu")
    assert c.heads.tolist() == [1, 0]


def test_conllu_non_integer_head_reports_line(tmp_path):
    p = tmp_path / "s.conllu"
    p.write_text("# c\n1\ta\ta\tDET\t_\t_\tx\tdet\t_\t_\n")
    with pytest.raises(CorpusFormatError, match=":2:.*HEAD"):
        load_corpus(p, "conllu")


def test_conllu_wrong_column_count(tmp_path):
    p = tmp_path / "s.conllu"
    p.write_text("1\ta\ta\tDET\t_\t_\t0\n")
    with pytest.raises(CorpusFormatError, match=":1:.*10"):
        load_corpus(p, "conllu")


def test_conllu_only_comments_is_empty(tmp_path):
    p = tmp_path / "s.conllu"
    p.write_text("# just a comment\n\n# another\n")
    with pytest.raises(ValueError, match="empty corpus"):
        load_corpus(p, "conllu")


def test_conllu_cycle_rejected_but_tokens_kept(tmp_path):
    p = tmp_path / "s.conllu"
    p.write_text(
        "1\ta\ta\tX\t_\t_\t2\t_\t_\t_\n2\tb\tb\tX\t_\t_\t1\t_\t_\t_\n\n"
        "1\tc\tc\tX\t_\t_\t0\t_\t_\t_\n"
    )
    c = load_corpus(p, "conllu")
    assert c.T == 3
    assert c.rejected_sentences == 1
    assert c.heads[0] == HEAD_MISSING and c.heads[1] == HEAD_MISSING
    assert c.heads[2] == 0


def test_conllu_head_outside_sentence(tmp_path):
    p = tmp_path / "s.conllu"
    p.write_text("1\ta\ta\tX\t_\t_\t5\t_\t_\t_\n")
    with pytest.raises(CorpusFormatError, match="outside"):
        load_corpus(p, "conllu")


def test_heads_reach_root(annotated):
    c = annotated
    for a, b in zip(c.sentence_starts[:-1], c.sentence_starts[1:]):
        for t in range(a, b):
            cur, steps = t, 0
            while c.heads[cur] != 0:
                cur += c.heads[cur]
                assert a <= cur < b
                steps += 1
                assert steps <= b - a


def test_slice_sentences(abac):
    c = Corpus.from_sentences([["a", "b"], ["c"], ["a", "a"]])
    s = c.slice_sentences(1, 3)
    assert s.T == 3 and s.sentence_starts.tolist() == [0, 1, 3]


def test_iter_tokens_unknown_format(tmp_path):
    with pytest.raises(ValueError):
        list(iter_tokens(tmp_path / "x", "xml"))
