"""Regenerate src/pwvec/data/toy_corpus.txt: a synthetic 10k-token raw corpus.

Sentences come from a tiny phrase grammar; words inside each class are drawn
with Zipfian frequencies so the vocabulary has a realistic long tail.
"""
import sys
from pathlib import Path

import numpy as np

CLASSES = {
    "det": "the a this that every some".split(),
    "adj": "small large red old new quiet bright dark quick slow green heavy".split(),
    "noun": ("cat dog bird house tree river city road car book table window child "
             "teacher farmer market garden song letter stone").split(),
    "verb": ("sees finds likes builds reads carries watches follows paints opens "
             "remembers moves").split(),
    "prep": "near under over behind beside into".split(),
    "adv": "slowly quickly often never today again".split(),
}
PATTERNS = [
    ["det", "noun", "verb", "det", "noun"],
    ["det", "adj", "noun", "verb", "det", "noun"],
    ["det", "noun", "verb", "det", "adj", "noun", "prep", "det", "noun"],
    ["det", "noun", "adv", "verb", "det", "noun"],
    ["det", "adj", "noun", "verb", "prep", "det", "noun", "adv"],
    ["num", "noun", "verb", "det", "noun"],
]


def zipf_choice(rng, words):
    w = 1.0 / np.arange(1, len(words) + 1)
    return words[rng.choice(len(words), p=w / w.sum())]


def main(path, n_tokens=10_000, seed=7):
    rng = np.random.default_rng(seed)
    lines, total = [], 0
    while total < n_tokens:
        pat = PATTERNS[rng.integers(len(PATTERNS))]
        sent = [str(rng.integers(2, 40)) if c == "num" else zipf_choice(rng, CLASSES[c])
                for c in pat]
        if sent[0] != sent[0].upper() and rng.random() < 0.1:
            sent[0] = sent[0].capitalize()
        lines.append(" ".join(sent))
        total += len(sent)
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")
    print(f"{total} tokens in {len(lines)} sentences -> {path}")


if __name__ == "__main__":
    main(sys.argv[1] if len(sys.argv) > 1 else
         Path(__file__).resolve().parents[1] / "src/pwvec/data/toy_corpus.txt")
