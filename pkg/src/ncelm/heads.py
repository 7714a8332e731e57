"""Output layers: exact softmax and noise-contrastive estimation.

Both heads score a word ``w`` in context vector ``v`` as
``theta[w] . v + bias[w]``.  The softmax head normalises over the whole
vocabulary.  The NCE head treats ``exp(score - lnZ)`` as an unnormalised
probability (``lnZ = 0`` in constant mode) and learns to tell the observed
next word apart from ``k`` words drawn from a noise distribution ``P_n``.

All posteriors are evaluated in the log domain::

    log P(D=1 | w) = s_w - logaddexp(s_w, log k + log P_n(w))
    log P(D=0 | w) = log k + log P_n(w) - logaddexp(s_w, log k + log P_n(w))
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .tensor import log_sum_exp, sigmoid

Z_MODES = ("constant", "learned")


@dataclass
class HeadParams:
    theta: np.ndarray  # (V, H)
    bias: np.ndarray  # (V,)
    lnZ: float = 0.0

    def __post_init__(self):
        if self.theta.ndim != 2 or self.theta.shape[0] < 2:
            raise ValueError(f"theta must be (V>=2, H), got {self.theta.shape}")
        if self.bias.shape != (self.theta.shape[0],):
            raise ValueError(f"bias must have shape {(self.theta.shape[0],)}, got {self.bias.shape}")

    @property
    def vocab_size(self):
        return self.theta.shape[0]


@dataclass
class NceBatchSample:
    """Targets and noise words for one batch of ``n`` positions.

    ``noise_ids`` is ``(k,)`` when the noise words are shared by every
    position of the batch, or ``(n, k)`` for per-position noise.
    ``target_noise_probs[i]`` is ``P_n(targets[i])`` and ``noise_probs``
    lines up with ``noise_ids``.
    """

    targets: np.ndarray
    target_noise_probs: np.ndarray
    noise_ids: np.ndarray
    noise_probs: np.ndarray

    def __post_init__(self):
        self.targets = np.asarray(self.targets, dtype=np.int64)
        self.noise_ids = np.asarray(self.noise_ids, dtype=np.int64)
        self.target_noise_probs = np.asarray(self.target_noise_probs, dtype=np.float64)
        self.noise_probs = np.asarray(self.noise_probs, dtype=np.float64)
        if self.noise_ids.shape != self.noise_probs.shape:
            raise ValueError("noise_ids and noise_probs must have the same shape")
        if self.noise_ids.ndim not in (1, 2) or self.noise_ids.shape[-1] < 1:
            raise ValueError(f"need k >= 1 noise samples, got noise_ids shape {self.noise_ids.shape}")
        if self.noise_ids.ndim == 2 and self.noise_ids.shape[0] != self.targets.shape[0]:
            raise ValueError("per-position noise needs one row per target")
        if self.target_noise_probs.shape != self.targets.shape:
            raise ValueError("target_noise_probs must line up with targets")
        if np.any(self.noise_probs <= 0) or np.any(self.target_noise_probs <= 0):
            raise ValueError("noise probabilities must be strictly positive")

    @property
    def k(self):
        return self.noise_ids.shape[-1]

    @property
    def shared(self):
        return self.noise_ids.ndim == 1


def _check_targets(head, v, targets):
    if v.ndim != 2 or v.shape[1] != head.theta.shape[1]:
        raise ValueError(f"context vectors must be (n, {head.theta.shape[1]}), got {v.shape}")
    if targets.shape != (v.shape[0],):
        raise ValueError(f"expected {v.shape[0]} targets, got shape {targets.shape}")
    if targets.size and (targets.min() < 0 or targets.max() >= head.vocab_size):
        raise ValueError(f"target id out of range [0, {head.vocab_size})")


def logits(head, v):
    return v @ head.theta.T + head.bias


def softmax_log_probs(head, v, targets):
    """Mean negative log-likelihood and per-position ``log P(target)``."""
    v = np.asarray(v, dtype=np.float64)
    targets = np.asarray(targets, dtype=np.int64)
    _check_targets(head, v, targets)
    z = logits(head, v)
    log_norm = log_sum_exp(z, axis=1)
    logp = z[np.arange(len(targets)), targets] - log_norm
    return float(-logp.mean()), logp


def softmax_loss_and_grads(head, v, targets):
    """Mean cross-entropy and its gradients in one pass.

    Returns ``(nll, grad_theta, grad_bias, grad_v)``.
    """
    v = np.asarray(v, dtype=np.float64)
    targets = np.asarray(targets, dtype=np.int64)
    _check_targets(head, v, targets)
    n = len(targets)
    z = logits(head, v)
    # shifted log-normaliser inline: a non-finite logit must surface as a
    # non-finite loss for the divergence check, not as a ValueError
    z -= z.max(axis=1, keepdims=True)
    logp = z - np.log(np.exp(z).sum(axis=1, keepdims=True))
    p = np.exp(logp)
    rows = np.arange(n)
    nll = float(-np.mean(logp[rows, targets]))
    # d nll / d logits = (p - onehot) / n
    dz = p
    dz[rows, targets] -= 1.0
    dz /= n
    return nll, dz.T @ v, dz.sum(axis=0), dz @ head.theta


def softmax_backward(head, v, targets):
    """Gradients of the mean cross-entropy: ``(grad_theta, grad_bias, grad_v)``."""
    _, g_theta, g_bias, g_v = softmax_loss_and_grads(head, v, targets)
    return g_theta, g_bias, g_v


def nce_posteriors(p_model, k, p_noise):
    """``(P(D=1), P(D=0))`` for a word with model and noise probabilities."""
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    if np.any(np.asarray(p_noise) <= 0):
        raise ValueError("noise probability must be > 0")
    if np.any(np.asarray(p_model) < 0):
        raise ValueError("model probability must be >= 0")
    p1 = p_model / (p_model + k * p_noise)
    return p1, 1.0 - p1


def _ln_z(head, zmode):
    if zmode not in Z_MODES:
        raise ValueError(f"zmode must be one of {Z_MODES}, got {zmode!r}")
    return float(head.lnZ) if zmode == "learned" else 0.0


def _nce_scores(head, v, sample, zmode):
    ln_z = _ln_z(head, zmode)
    t = sample.targets
    s_target = np.einsum("nh,nh->n", v, head.theta[t]) + head.bias[t] - ln_z
    if sample.shared:
        s_noise = v @ head.theta[sample.noise_ids].T + head.bias[sample.noise_ids] - ln_z
    else:
        s_noise = np.einsum("nh,nkh->nk", v, head.theta[sample.noise_ids]) + head.bias[sample.noise_ids] - ln_z
    return s_target, s_noise


def nce_loss_and_grads(head, v, sample, zmode="constant", need_grads=True):
    """NCE objective averaged over positions, with its gradients.

    Returns ``(loss, grad_theta, grad_bias, grad_v, grad_lnZ)``; ``grad_lnZ``
    is ``None`` in constant mode.  ``grad_theta``/``grad_bias`` are dense but
    only rows of target and noise words are nonzero.
    """
    v = np.asarray(v, dtype=np.float64)
    _check_targets(head, v, sample.targets)
    if sample.noise_ids.size and (sample.noise_ids.min() < 0 or sample.noise_ids.max() >= head.vocab_size):
        raise ValueError(f"noise id out of range [0, {head.vocab_size})")
    n, k = len(sample.targets), sample.k
    s_t, s_n = _nce_scores(head, v, sample, zmode)
    log_kpn_t = np.log(k) + np.log(sample.target_noise_probs)
    log_kpn_n = np.log(k) + np.log(sample.noise_probs)
    if sample.shared:
        log_kpn_n = np.broadcast_to(log_kpn_n, s_n.shape)
    a_t = s_t - log_kpn_t  # log odds of "data" for the target
    a_n = s_n - log_kpn_n
    loss = float((np.logaddexp(0.0, -a_t).sum() + np.logaddexp(0.0, a_n).sum()) / n)
    if not need_grads:
        return loss, None, None, None, None

    d_t = -sigmoid(-a_t) / n  # -P(D=0 | target)
    d_n = sigmoid(a_n) / n  # P(D=1 | noise)
    grad_theta = np.zeros_like(head.theta)
    grad_bias = np.zeros_like(head.bias)
    np.add.at(grad_theta, sample.targets, d_t[:, None] * v)
    np.add.at(grad_bias, sample.targets, d_t)
    if sample.shared:
        np.add.at(grad_theta, sample.noise_ids, d_n.T @ v)
        np.add.at(grad_bias, sample.noise_ids, d_n.sum(axis=0))
        grad_v = d_t[:, None] * head.theta[sample.targets] + d_n @ head.theta[sample.noise_ids]
    else:
        np.add.at(grad_theta, sample.noise_ids, d_n[:, :, None] * v[:, None, :])
        np.add.at(grad_bias, sample.noise_ids, d_n)
        grad_v = d_t[:, None] * head.theta[sample.targets] + np.einsum("nk,nkh->nh", d_n, head.theta[sample.noise_ids])
    grad_lnz = None
    if zmode == "learned":
        grad_lnz = float(-(d_t.sum() + d_n.sum()))
    return loss, grad_theta, grad_bias, grad_v, grad_lnz


def nce_loss(head, v, sample, zmode="constant"):
    return nce_loss_and_grads(head, v, sample, zmode, need_grads=False)[0]


def nce_backward(head, v, sample, zmode="constant"):
    """``(grad_theta, grad_bias, grad_v, grad_lnZ)`` of :func:`nce_loss`."""
    return nce_loss_and_grads(head, v, sample, zmode)[1:]
