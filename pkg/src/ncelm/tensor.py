"""Dense linear algebra helpers, stable reductions and seeded random streams.

Matrices are plain ``numpy`` float64 arrays in C (row-major) order.  The
random streams wrap numpy's PCG64 generator.  PCG64 is a permuted
congruential generator: a 128-bit LCG ``state = state * M + inc (mod 2**128)``
followed by the XSL-RR output permutation.  It is portable and
bit-reproducible across platforms for a given seed sequence.

Role splitting: a stream for role ``r`` derived from seed ``s`` is seeded with
``SeedSequence([s, ROLE_TAGS[r]])``, so "init", "dropout", "noise" and
"data" streams are independent yet fully determined by ``s``.
"""
from __future__ import annotations

import numpy as np

ROLE_TAGS = {"init": 1, "dropout": 2, "noise": 3, "data": 4, "oracle": 5}


def matmul(a, b):
    """Matrix product with an explicit shape check."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.ndim != 2 or b.ndim != 2:
        raise ValueError(f"matmul expects 2-D operands, got shapes {a.shape} and {b.shape}")
    if a.shape[1] != b.shape[0]:
        raise ValueError(f"matmul shape mismatch: {a.shape} x {b.shape}")
    return a @ b


def log_sum_exp(v, axis=None):
    """``max(v) + log(sum(exp(v - max(v))))`` along ``axis``.

    With ``axis=None`` the input must be a non-empty vector and a float is
    returned.
    """
    v = np.asarray(v, dtype=np.float64)
    if v.size == 0:
        raise ValueError("log_sum_exp of an empty vector")
    if not np.all(np.isfinite(v)):
        raise ValueError("log_sum_exp requires finite entries")
    if axis is None:
        m = v.max()
        return float(m + np.log(np.sum(np.exp(v - m))))
    m = v.max(axis=axis, keepdims=True)
    out = m + np.log(np.sum(np.exp(v - m), axis=axis, keepdims=True))
    return np.squeeze(out, axis=axis)


def sigmoid(x):
    # tanh form never overflows
    return 0.5 * (1.0 + np.tanh(0.5 * x))


class RngStream:
    """A seeded, replayable random stream.

    ``RngStream(seed)`` is the root stream; ``stream.split("dropout")`` gives
    the independent stream for that role.
    """

    def __init__(self, seed, role=None):
        seed = int(seed)
        if seed < 0 or seed >= 2**64:
            raise ValueError(f"seed must be a 64-bit unsigned integer, got {seed}")
        if role is not None and role not in ROLE_TAGS:
            raise ValueError(f"unknown rng role {role!r}; expected one of {sorted(ROLE_TAGS)}")
        self.seed = seed
        self.role = role
        key = [seed] if role is None else [seed, ROLE_TAGS[role]]
        self.generator = np.random.Generator(np.random.PCG64(np.random.SeedSequence(key)))

    def split(self, role):
        return RngStream(self.seed, role)

    def random(self, size=None):
        return self.generator.random(size)

    def integers(self, low, high, size=None):
        return self.generator.integers(low, high, size=size)

    def normal(self, scale, size):
        return self.generator.normal(0.0, scale, size=size)

    def uniform(self, lo, hi, size):
        return rng_uniform(self, lo, hi, size)

    def get_state(self):
        return self.generator.bit_generator.state

    def set_state(self, state):
        self.generator.bit_generator.state = state

    def __repr__(self):
        return f"RngStream(seed={self.seed}, role={self.role!r})"


def rng_uniform(stream, lo, hi, n):
    """``n`` draws from U[lo, hi); ``n`` may be a shape tuple."""
    if not lo < hi:
        raise ValueError(f"rng_uniform needs lo < hi, got lo={lo}, hi={hi}")
    x = lo + (hi - lo) * stream.generator.random(n)
    # lo + (hi-lo)*u can round up to hi
    return np.minimum(x, np.nextafter(hi, lo))
