"""Embedding -> stacked LSTM -> output head, as one parameter dictionary.

Parameter names::

    embedding            (V, E)
    lstm{l}.W_x          (4H, E or H)
    lstm{l}.W_h          (4H, H)
    lstm{l}.b            (4H,)
    head.theta           (V, H)
    head.bias            (V,)
    head.lnZ             ()      only used by the NCE head in learned-Z mode
"""
from __future__ import annotations

import numpy as np

from .heads import HeadParams, NceBatchSample, nce_loss_and_grads, softmax_log_probs, softmax_loss_and_grads
from .lstm import LstmLayerParams, stack_backward, stack_forward, zero_state
from .optim import init_params


def param_shapes(vocab_size, embed_dim, hidden, layers=2):
    shapes = {"embedding": (vocab_size, embed_dim)}
    width = embed_dim
    for l in range(layers):
        shapes[f"lstm{l}.W_x"] = (4 * hidden, width)
        shapes[f"lstm{l}.W_h"] = (4 * hidden, hidden)
        shapes[f"lstm{l}.b"] = (4 * hidden,)
        width = hidden
    shapes["head.theta"] = (vocab_size, hidden)
    shapes["head.bias"] = (vocab_size,)
    shapes["head.lnZ"] = ()
    return shapes


class LanguageModel:
    def __init__(self, params, layers=2):
        self.params = params
        self.n_layers = layers
        self.vocab_size, self.embed_dim = params["embedding"].shape
        self.hidden = params["lstm0.W_h"].shape[1]

    @classmethod
    def initialise(cls, vocab_size, embed_dim, hidden, heuristic, rng, layers=2, embeddings=None):
        shapes = param_shapes(vocab_size, embed_dim, hidden, layers)
        params = init_params(shapes, heuristic, rng, fan=hidden)
        if embeddings is not None:
            if embeddings.shape != shapes["embedding"]:
                raise ValueError(f"embedding table shape {embeddings.shape} != {shapes['embedding']}")
            params["embedding"] = np.array(embeddings, dtype=np.float64)
        return cls(params, layers)

    def layer_params(self):
        p = self.params
        return [LstmLayerParams(p[f"lstm{l}.W_x"], p[f"lstm{l}.W_h"], p[f"lstm{l}.b"]) for l in range(self.n_layers)]

    def head(self):
        p = self.params
        return HeadParams(p["head.theta"], p["head.bias"], float(p["head.lnZ"]))

    def zero_state(self, batch):
        return zero_state(self.layer_params(), batch)

    def forward(self, x, state=None, dropout=0.0, train=False, rng=None, masks=None):
        """Context vectors ``(B*T, H)`` for ids ``x`` of shape (B, T)."""
        emb = self.params["embedding"][x]
        v, new_state, cache = stack_forward(self.layer_params(), emb, state, dropout, train, rng, masks)
        return v.reshape(-1, self.hidden), new_state, cache

    def eval_nll(self, x, y, state):
        """Sum of exact-softmax ``-log P`` over the batch and the carried state."""
        v, state, _ = self.forward(x, state, train=False)
        _, logp = softmax_log_probs(self.head(), v, y.reshape(-1))
        return float(-logp.sum()), state

    def loss_and_grads(self, x, y, state=None, head="softmax", sample=None, zmode="constant",
                       dropout=0.0, train=True, rng=None, masks=None):
        """Mean per-position loss and gradients for every parameter.

        ``sample`` is an :class:`~ncelm.heads.NceBatchSample` whose targets
        are ``y`` flattened (required for the NCE head).  Returns
        ``(loss, grads, final_state)``; ``head.lnZ`` has a gradient only in
        learned-Z NCE mode.
        """
        batch, steps = x.shape
        v, new_state, cache = self.forward(x, state, dropout, train, rng, masks)
        targets = y.reshape(-1)
        hp = self.head()
        grads = {}
        if head == "softmax":
            loss, g_theta, g_bias, g_v = softmax_loss_and_grads(hp, v, targets)
        elif head == "nce":
            if sample is None:
                raise ValueError("the NCE head needs a noise sample")
            if not np.array_equal(sample.targets, targets):
                raise ValueError("noise sample targets do not match the batch")
            loss, g_theta, g_bias, g_v, g_lnz = nce_loss_and_grads(hp, v, sample, zmode)
            if g_lnz is not None:
                grads["head.lnZ"] = np.array(g_lnz)
        else:
            raise ValueError(f"head must be 'softmax' or 'nce', got {head!r}")
        layer_grads, g_inputs, _ = stack_backward(cache, g_v.reshape(batch, steps, self.hidden))
        g_emb = np.zeros_like(self.params["embedding"])
        np.add.at(g_emb, x, g_inputs)
        grads["embedding"] = g_emb
        for l, lg in enumerate(layer_grads):
            for k, g in lg.items():
                grads[f"lstm{l}.{k}"] = g
        grads["head.theta"] = g_theta
        grads["head.bias"] = g_bias
        return loss, grads, new_state

    def copy(self):
        return LanguageModel({k: v.copy() for k, v in self.params.items()}, self.n_layers)


def make_sample(targets, dist, ids, probs):
    """Bundle targets with drawn noise into an :class:`NceBatchSample`."""
    targets = np.asarray(targets).reshape(-1)
    return NceBatchSample(targets, dist.probs[targets], ids, probs)
