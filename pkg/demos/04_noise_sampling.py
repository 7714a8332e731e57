"""
Noise distributions and alias sampling
======================================

NCE needs many draws from a fixed distribution over the vocabulary.  The
alias method makes each draw O(1) after an O(|V|) table build.
"""
import numpy as np

from ncelm.corpus import bundled_corpus_dir, load_corpus
from ncelm.noise import NoiseConfig, build_noise, sample_noise
from ncelm.tensor import RngStream

corpus = load_corpus(bundled_corpus_dir(), 2000)
vocab = corpus.vocab

for kind, kw in (("uniform", {}), ("unigram", {"alpha": 0.75}), ("zipf", {"s": 1.0})):
    dist = build_noise(vocab, kind, **kw)
    print(f"{kind:8s} P(top word {vocab.words[0]!r}) = {dist.probs[0]:.4f}   P(last word) = {dist.probs[-1]:.2e}")

###############################################################################
# Empirical frequencies match
# ---------------------------

dist = build_noise(vocab, "zipf")
draws = dist.draw(RngStream(0, "noise"), 200_000)
freq = np.bincount(draws, minlength=dist.size) / len(draws)
for i in range(5):
    print(f"{vocab.words[i]:>8s}  P_n={dist.probs[i]:.4f}  seen={freq[i]:.4f}")

###############################################################################
# Shared versus per-position noise
# --------------------------------
# With batch sharing every position in a mini-batch is contrasted with the
# same k words; per-position noise draws k words for each of them.

rng = RngStream(1, "noise")
ids, _ = sample_noise(dist, NoiseConfig(k=8, sharing="batch"), rng)
print("shared:", [vocab.words[i] for i in ids])
ids, _ = sample_noise(dist, NoiseConfig(k=8, sharing="position"), rng, n_positions=2)
for row in ids:
    print("position:", [vocab.words[i] for i in row])
