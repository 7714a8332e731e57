"""Rebuild the bundled tiny corpus from public-domain source texts.

Usage::

    python tools/build_tiny_corpus.py OUT_DIR alice.txt hamlet.txt othello.txt lear.txt

Sources used for the shipped copy (all public domain):

* Lewis Carroll, *Alice's Adventures in Wonderland* (Project Gutenberg #11,
  the copy distributed with the ``wordcloud`` sdist under ``examples/``)
* William Shakespeare, *Hamlet*, *Othello*, *King Lear* (Project Gutenberg
  texts distributed with the ``shakespeare`` 0.6 sdist)

Normalisation imitates the Penn Treebank language-modelling files: lower
case, punctuation removed, numbers replaced by ``N``, one sentence per line,
and a closed vocabulary where rare words become ``<unk>``.  Each source is
split 80/10/10 by sentence into train/valid/test so every split sees every
author.
"""
import collections
import re
import sys
from pathlib import Path

MAX_VOCAB = 2000
_START = re.compile(r"^\*\*\* START OF .*\*\*\*$", re.M)
_END = re.compile(r"^\*\*\* END OF .*\*\*\*$", re.M)


def strip_gutenberg(text):
    start = _START.search(text)
    end = _END.search(text)
    if start:
        text = text[start.end():end.start() if end else None]
    return text


def sentences(text):
    text = strip_gutenberg(text)
    text = re.sub(r"\[[^\]]*\]", " ", text)  # stage directions
    text = text.lower().replace("’", "'").replace("--", " ")
    for chunk in re.split(r"[.!?;:]+", text):
        words = []
        for tok in chunk.split():
            tok = re.sub(r"[^a-z0-9']", "", tok).strip("'")
            if not tok:
                continue
            if re.fullmatch(r"[0-9]+", tok):
                tok = "N"
            words.append(tok)
        if len(words) >= 2:
            yield words


def main(out_dir, *sources):
    splits = {"train": [], "valid": [], "test": []}
    for src in sources:
        sents = list(sentences(Path(src).read_text(encoding="utf-8-sig")))
        a, b = int(0.8 * len(sents)), int(0.9 * len(sents))
        splits["train"] += sents[:a]
        splits["valid"] += sents[a:b]
        splits["test"] += sents[b:]
    counts = collections.Counter(w for s in splits["train"] for w in s)
    keep = {w for w, _ in counts.most_common(MAX_VOCAB - 2)}  # room for <unk>, <eos>
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    for name, sents in splits.items():
        lines = [" ".join(w if w in keep else "<unk>" for w in s) for s in sents]
        (out / f"{name}.txt").write_text("\n".join(lines) + "\n", encoding="utf-8")
        print(name, sum(len(s) + 1 for s in sents), "tokens")


if __name__ == "__main__":
    main(*sys.argv[1:])
