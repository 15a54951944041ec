import numpy as np
import pytest
from hypothesis import settings

from pwvec.corpus import Corpus, NormalizationRules, build_vocabulary, ingest_conllu

settings.register_profile("pwvec", max_examples=40, deadline=None)
settings.load_profile("pwvec")


@pytest.fixture
def abac():
    """One sentence ``a b a c``."""
    return Corpus.from_sentences([["a", "b", "a", "c"]])


CONLLU = """\
# sent_id = 1
1\tthe\tthe\tDET\t_\t_\t2\tdet\t_\t_
2\tcat\tcat\tNOUN\t_\t_\t3\tnsubj\t_\t_
3\tsees\tsee\tVERB\t_\t_\t0\troot\t_\t_
4\tthe\tthe\tDET\t_\t_\t5\tdet\t_\t_
5\tdog\tdog\tNOUN\t_\t_\t3\tobj\t_\t_

# sent_id = 2
1-2\tdon't\t_\t_\t_\t_\t_\t_\t_\t_
1\tdo\tdo\tAUX\t_\t_\t3\taux\t_\t_
2\tn't\tnot\tPART\t_\t_\t3\tadvmod\t_\t_
3\tsleep\tsleep\tVERB\t_\t_\t0\troot\t_\t_
3.1\tghost\t_\tNOUN\t_\t_\t_\t_\t_\t_
4\tcat\tcat\tNOUN\t_\t_\t3\tobj\t_\t_
"""


@pytest.fixture
def conllu_path(tmp_path):
    p = tmp_path / "tiny.conllu"
    p.write_text(CONLLU, encoding="utf-8")
    return p


@pytest.fixture
def annotated(conllu_path):
    rules = NormalizationRules()
    from pwvec.corpus import iter_tokens

    vocab = build_vocabulary(iter_tokens(conllu_path, "conllu"), rules)
    return ingest_conllu(conllu_path, vocab, rules)


def random_sentences(rng, n_sent=None, alphabet="abcdefg", max_len=8):
    n_sent = n_sent or int(rng.integers(1, 8))
    letters = list(alphabet)
    return [[letters[i] for i in rng.integers(0, len(letters), int(rng.integers(1, max_len + 1)))]
            for _ in range(n_sent)]


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import RESULTS
    except ImportError:
        return
    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in sorted(RESULTS, key=lambda s: int(s.split("[")[1].split("]")[0])):
            terminalreporter.write_line(line)
