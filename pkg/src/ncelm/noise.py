"""Noise distributions over the vocabulary and alias-method sampling."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

NOISE_KINDS = ("uniform", "unigram", "zipf")
SHARING_MODES = ("batch", "position")
NOISE_SAMPLE_PRESETS = (50, 100, 150, 300, 600, 1200)


@dataclass
class NoiseConfig:
    kind: str = "zipf"
    alpha: float = 1.0  # unigram exponent
    s: float = 1.0  # zipf exponent
    k: int = 600
    sharing: str = "batch"
    unique: bool = False

    def __post_init__(self):
        if self.kind not in NOISE_KINDS:
            raise ValueError(f"noise kind must be one of {NOISE_KINDS}, got {self.kind!r}")
        if self.sharing not in SHARING_MODES:
            raise ValueError(f"noise sharing must be one of {SHARING_MODES}, got {self.sharing!r}")
        if int(self.k) < 1:
            raise ValueError(f"k must be >= 1, got {self.k}")
        if self.alpha < 0:
            raise ValueError(f"alpha must be >= 0, got {self.alpha}")
        if self.s <= 0:
            raise ValueError(f"zipf exponent must be > 0, got {self.s}")
        self.k = int(self.k)


@dataclass(frozen=True)
class AliasTable:
    prob: np.ndarray  # acceptance probability of each cell
    alias: np.ndarray  # fallback id of each cell

    def cell_masses(self):
        """Probability mass each id receives from the two-step draw."""
        n = len(self.prob)
        mass = self.prob / n
        np.add.at(mass, self.alias, (1.0 - self.prob) / n)
        return mass


@dataclass(frozen=True)
class NoiseDistribution:
    probs: np.ndarray
    table: AliasTable
    kind: str
    param: float | None = None

    @property
    def size(self):
        return len(self.probs)

    def draw(self, rng, size):
        """Alias draws: pick a cell uniformly, keep it or take its alias."""
        cells = rng.integers(0, self.size, size=size)
        keep = rng.random(size) < self.table.prob[cells]
        return np.where(keep, cells, self.table.alias[cells])


def alias_build(probs):
    """Vose's alias tables for a normalised, strictly positive ``probs``."""
    probs = np.asarray(probs, dtype=np.float64)
    if probs.ndim != 1 or probs.size == 0:
        raise ValueError("probs must be a non-empty vector")
    if np.any(probs <= 0) or not np.all(np.isfinite(probs)):
        raise ValueError("alias tables need strictly positive, finite probabilities")
    total = probs.sum()
    if abs(total - 1.0) > 1e-9:
        raise ValueError(f"probs must sum to 1 within 1e-9, got {total!r}")
    n = len(probs)
    scaled = probs * n
    scaled[np.abs(scaled - 1.0) < 1e-12] = 1.0
    prob = np.ones(n)
    alias = np.arange(n)
    small = [i for i in range(n) if scaled[i] < 1.0]
    large = [i for i in range(n) if scaled[i] >= 1.0]
    while small and large:
        lo = small.pop()
        hi = large.pop()
        prob[lo] = scaled[lo]
        alias[lo] = hi
        scaled[hi] = (scaled[hi] + scaled[lo]) - 1.0
        (small if scaled[hi] < 1.0 else large).append(hi)
    # leftovers are 1 up to rounding
    for i in small + large:
        prob[i] = 1.0
        alias[i] = i
    return AliasTable(prob, alias)


def build_noise(vocab, kind="zipf", alpha=1.0, s=1.0):
    """Build ``P_n`` over ``vocab`` (a :class:`~ncelm.corpus.Vocabulary`).

    ``uniform``: ``1/|V|``.  ``unigram``: ``count**alpha`` normalised, with
    zero counts floored to 1.  ``zipf``: ``rank**-s`` normalised, rank being
    the 1-based position in the frequency-ordered vocabulary.
    """
    size = len(vocab)
    if size == 0:
        raise ValueError("cannot build a noise distribution over an empty vocabulary")
    if kind == "uniform":
        probs, param = np.full(size, 1.0 / size), None
    elif kind == "unigram":
        if alpha < 0:
            raise ValueError(f"alpha must be >= 0, got {alpha}")
        counts = np.maximum(np.asarray(vocab.counts, dtype=np.float64), 1.0)
        w = counts ** alpha
        probs, param = w / w.sum(), alpha
    elif kind == "zipf":
        if s <= 0:
            raise ValueError(f"zipf exponent must be > 0, got {s}")
        w = np.arange(1, size + 1, dtype=np.float64) ** -s
        probs, param = w / w.sum(), s
    else:
        raise ValueError(f"noise kind must be one of {NOISE_KINDS}, got {kind!r}")
    return NoiseDistribution(probs, alias_build(probs), kind, param)


def noise_from_config(vocab, cfg):
    return build_noise(vocab, cfg.kind, alpha=cfg.alpha, s=cfg.s)


def _unique_draw(dist, rng, k):
    seen = {}
    while len(seen) < k:
        for w in dist.draw(rng, k - len(seen)):
            seen.setdefault(int(w), None)
            if len(seen) == k:
                break
    return np.fromiter(seen, dtype=np.int64, count=k)


def sample_noise(dist, cfg, rng, n_positions=1):
    """Draw noise words and their probabilities.

    Returns ``(ids, probs)`` with shape ``(k,)`` for batch sharing or
    ``(n_positions, k)`` per position.  Draws are with replacement unless
    ``cfg.unique``, which de-duplicates by rejection.
    """
    k = cfg.k
    if cfg.unique and k > dist.size:
        raise ValueError(f"cannot draw {k} unique noise words from a vocabulary of {dist.size}")
    shape = (k,) if cfg.sharing == "batch" else (n_positions, k)
    if not cfg.unique:
        ids = dist.draw(rng, shape)
    elif cfg.sharing == "batch":
        ids = _unique_draw(dist, rng, k)
    else:
        ids = np.stack([_unique_draw(dist, rng, k) for _ in range(n_positions)])
    return ids, dist.probs[ids]
