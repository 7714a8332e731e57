"""Corpus reading, vocabulary, continuous-stream batching, embedding files."""
from __future__ import annotations

from collections import Counter
from dataclasses import dataclass
from pathlib import Path

import numpy as np

UNK = "<unk>"
EOS = "<eos>"


class EmbeddingFormatError(ValueError):
    pass


def tokenize(text):
    """Whitespace tokens with one end-of-sentence marker per line break."""
    tokens = []
    for line in text.splitlines(keepends=True):
        tokens.extend(line.split())
        if line.endswith(("\n", "\r")):
            tokens.append(EOS)
    return tokens


class Vocabulary:
    """Word <-> id map ordered by descending training frequency.

    Ties are broken by first occurrence.  ``unk`` and ``eos`` are always
    present; if they never occur in the text they sit at the end with count 0.
    """

    def __init__(self, words, counts, unk=UNK, eos=EOS):
        self.words = list(words)
        self.counts = np.asarray(counts, dtype=np.int64)
        self.index = {w: i for i, w in enumerate(self.words)}
        if len(self.index) != len(self.words):
            raise ValueError("duplicate words in vocabulary")
        self.unk, self.eos = unk, eos
        if unk not in self.index or eos not in self.index:
            raise ValueError("vocabulary must contain the unk and eos tokens")

    def __len__(self):
        return len(self.words)

    def __contains__(self, word):
        return word in self.index

    @property
    def unk_id(self):
        return self.index[self.unk]

    @property
    def eos_id(self):
        return self.index[self.eos]

    def id(self, word):
        return self.index.get(word, self.index[self.unk])

    def to_dict(self):
        return {"words": self.words, "counts": self.counts.tolist(), "unk": self.unk, "eos": self.eos}

    @classmethod
    def from_dict(cls, d):
        return cls(d["words"], d["counts"], d.get("unk", UNK), d.get("eos", EOS))


def build_vocab(text, max_size=None, specials=(UNK, EOS)):
    """Count tokens of ``text`` and keep at most ``max_size`` entries."""
    tokens = tokenize(text)
    if not tokens:
        raise ValueError("cannot build a vocabulary from an empty corpus")
    counts = Counter(tokens)
    first = {}
    for pos, tok in enumerate(tokens):
        first.setdefault(tok, pos)
    unk, eos = specials
    ranked = sorted(counts, key=lambda w: (-counts[w], first[w]))
    if max_size is not None:
        if max_size < len(specials):
            raise ValueError(f"max_size must leave room for {len(specials)} special tokens")
        regular = [w for w in ranked if w not in specials][: max_size - len(specials)]
        keep = set(regular) | set(specials)
        ranked = [w for w in ranked if w in keep]
    for sp in specials:
        if sp not in counts:
            ranked.append(sp)
    return Vocabulary(ranked, [counts.get(w, 0) for w in ranked], unk=unk, eos=eos)


def encode(vocab, text):
    return np.array([vocab.id(t) for t in tokenize(text)], dtype=np.int64)


def decode(vocab, ids):
    return [vocab.words[i] for i in ids]


def read_text(path):
    try:
        return Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise OSError(f"cannot read corpus file {path}: {exc.strerror}") from exc


def make_batches(stream, batch_size, num_steps):
    """Continuous-stream mini-batches.

    The stream is cut into ``batch_size`` rows of ``len // batch_size`` ids
    (the tail remainder is dropped); batch ``i`` covers columns
    ``[i*T, (i+1)*T)`` and targets are shifted one step right.  Returns a
    list of ``(x, y)`` int arrays of shape ``(B, T)``.
    """
    stream = np.asarray(stream, dtype=np.int64)
    if batch_size < 1 or num_steps < 1:
        raise ValueError("batch_size and num_steps must be >= 1")
    row_len = len(stream) // batch_size
    if row_len < num_steps + 1:
        need = batch_size * (num_steps + 1)
        raise ValueError(
            f"stream of {len(stream)} tokens is too short for batch_size={batch_size}, "
            f"num_steps={num_steps}; need at least {need}"
        )
    rows = stream[: batch_size * row_len].reshape(batch_size, row_len)
    n_batches = (row_len - 1) // num_steps
    out = []
    for i in range(n_batches):
        a = i * num_steps
        out.append((rows[:, a:a + num_steps], rows[:, a + 1:a + num_steps + 1]))
    return out


@dataclass
class EmbeddingTable:
    matrix: np.ndarray  # (V, E)
    found: np.ndarray  # bool per vocabulary row
    fine_tune: bool = True

    @property
    def n_found(self):
        return int(self.found.sum())

    @property
    def n_missing(self):
        return int((~self.found).sum())

    def report(self):
        return f"embeddings: {self.n_found} rows from file, {self.n_missing} initialised, {len(self.found)} total"


def load_embeddings(path, vocab, init, rng, dim=None, fine_tune=True, lowercase=False):
    """Read a word2vec text file into a ``(|V|, dim)`` table.

    Words missing from the file get a row drawn from ``init`` (an
    :class:`~ncelm.optim.InitHeuristic`).  With ``lowercase``, file words are
    lower-cased before matching; the first occurrence wins.
    """
    path = Path(path)
    try:
        fh = path.open(encoding="utf-8")
    except OSError as exc:
        raise OSError(f"cannot read embedding file {path}: {exc.strerror}") from exc
    with fh:
        header = fh.readline().split()
        if len(header) != 2 or not all(h.isdigit() for h in header):
            raise EmbeddingFormatError(f"{path}:1: expected header 'count dim', got {' '.join(header)!r}")
        count, file_dim = int(header[0]), int(header[1])
        if dim is not None and file_dim != dim:
            raise EmbeddingFormatError(f"{path}: file dimension {file_dim} does not match configured {dim}")
        matrix = init.sample((len(vocab), file_dim), rng, fan=file_dim)
        found = np.zeros(len(vocab), dtype=bool)
        n_lines = 0
        for lineno, line in enumerate(fh, start=2):
            parts = line.rstrip("\n").split(" ")
            if parts == [""]:
                continue
            n_lines += 1
            if len(parts) != file_dim + 1:
                raise EmbeddingFormatError(
                    f"{path}:{lineno}: expected a word and {file_dim} values, got {len(parts) - 1} values"
                )
            word = parts[0].lower() if lowercase else parts[0]
            try:
                vec = np.array(parts[1:], dtype=np.float64)
            except ValueError as exc:
                raise EmbeddingFormatError(f"{path}:{lineno}: {exc}") from None
            i = vocab.index.get(word)
            if i is not None and not found[i]:
                matrix[i] = vec
                found[i] = True
        if n_lines != count:
            raise EmbeddingFormatError(f"{path}: header announces {count} vectors, file has {n_lines}")
    return EmbeddingTable(matrix, found, fine_tune)


@dataclass
class Corpus:
    vocab: Vocabulary
    train: np.ndarray
    valid: np.ndarray
    test: np.ndarray


def load_corpus(data_dir, max_vocab=None):
    """Read ``train.txt``, ``valid.txt`` and ``test.txt`` from ``data_dir``."""
    data_dir = Path(data_dir)
    paths = {s: data_dir / f"{s}.txt" for s in ("train", "valid", "test")}
    missing = [str(p) for p in paths.values() if not p.is_file()]
    if missing:
        raise FileNotFoundError(f"missing corpus files: {', '.join(missing)}")
    train_text = read_text(paths["train"])
    vocab = build_vocab(train_text, max_vocab)
    return Corpus(
        vocab,
        encode(vocab, train_text),
        encode(vocab, read_text(paths["valid"])),
        encode(vocab, read_text(paths["test"])),
    )


def bundled_corpus_dir():
    return Path(__file__).parent / "data" / "tiny"
