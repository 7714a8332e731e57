"""Stacked LSTM with hand-written forward and backward passes.

Cell (forget-gate LSTM, no peepholes), gate order ``(i, f, g, o)``::

    z  = x W_x^T + h W_h^T + b
    i, f, o = sigmoid(z_i), sigmoid(z_f), sigmoid(z_o);  g = tanh(z_g)
    c' = f * c + i * g
    h' = o * tanh(c')

Dropout is inverted dropout on the non-recurrent connections only: the
input to every layer and the output of the top layer.  The ``h -> h`` path
is never masked.  Gradients stop at the start of each unrolled window
(truncated BPTT); the incoming state is treated as a constant.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .tensor import sigmoid


@dataclass
class LstmLayerParams:
    W_x: np.ndarray  # (4H, E_in)
    W_h: np.ndarray  # (4H, H)
    b: np.ndarray  # (4H,)

    def __post_init__(self):
        four_h, _ = self.W_x.shape
        if four_h % 4:
            raise ValueError(f"W_x rows must be 4*H, got {four_h}")
        h = four_h // 4
        if self.W_h.shape != (four_h, h):
            raise ValueError(f"W_h must be {(four_h, h)}, got {self.W_h.shape}")
        if self.b.shape != (four_h,):
            raise ValueError(f"b must be {(four_h,)}, got {self.b.shape}")

    @property
    def hidden_size(self):
        return self.W_h.shape[1]

    @property
    def input_size(self):
        return self.W_x.shape[1]

    @classmethod
    def zeros(cls, input_size, hidden_size):
        return cls(
            np.zeros((4 * hidden_size, input_size)),
            np.zeros((4 * hidden_size, hidden_size)),
            np.zeros(4 * hidden_size),
        )


def _gates(z, hidden):
    i = sigmoid(z[:, :hidden])
    f = sigmoid(z[:, hidden:2 * hidden])
    g = np.tanh(z[:, 2 * hidden:3 * hidden])
    o = sigmoid(z[:, 3 * hidden:])
    return i, f, g, o


def lstm_cell_forward(params, x, h, c):
    """One step for a batch. ``x`` is (B, E), ``h`` and ``c`` are (B, H).

    Returns ``(h_new, c_new, cache)``.
    """
    x = np.atleast_2d(x)
    h = np.atleast_2d(h)
    c = np.atleast_2d(c)
    hidden = params.hidden_size
    if x.shape[1] != params.input_size:
        raise ValueError(f"input width {x.shape[1]} does not match layer input size {params.input_size}")
    if h.shape != (x.shape[0], hidden) or c.shape != h.shape:
        raise ValueError(f"state shapes {h.shape}/{c.shape} do not match batch {x.shape[0]} x H={hidden}")
    z = x @ params.W_x.T + h @ params.W_h.T + params.b
    i, f, g, o = _gates(z, hidden)
    c_new = f * c + i * g
    tanh_c = np.tanh(c_new)
    h_new = o * tanh_c
    return h_new, c_new, (x, h, c, i, f, g, o, tanh_c)


def _cell_dz(cache, dh_new, dc_new):
    """Gradient wrt pre-activations, plus dc for the previous cell state."""
    _, _, c, i, f, g, o, tanh_c = cache
    dc = dc_new + dh_new * o * (1.0 - tanh_c ** 2)
    dz = np.concatenate(
        [
            dc * g * i * (1.0 - i),
            dc * c * f * (1.0 - f),
            dc * i * (1.0 - g ** 2),
            dh_new * tanh_c * o * (1.0 - o),
        ],
        axis=1,
    )
    return dz, dc * f


def lstm_cell_backward(params, cache, dh_new, dc_new):
    """Reverse mode of :func:`lstm_cell_forward`.

    Returns ``(dx, dh, dc, grads)`` where ``grads`` maps ``W_x``, ``W_h``, ``b``.
    """
    x, h = cache[0], cache[1]
    dz, dc_prev = _cell_dz(cache, dh_new, dc_new)
    grads = {"W_x": dz.T @ x, "W_h": dz.T @ h, "b": dz.sum(axis=0)}
    return dz @ params.W_x, dz @ params.W_h, dc_prev, grads


@dataclass
class UnrollCache:
    layers: list
    masks: list  # len(layers) + 1 entries, each None or (B, T, dim)
    layer_inputs: list = field(default_factory=list)  # post-dropout input to each layer
    steps: list = field(default_factory=list)  # per layer, list of T cell caches
    top: np.ndarray | None = None  # top-layer outputs before the final mask


def dropout_masks(shapes, p, rng):
    """Inverted-dropout masks: entries are 0 with prob ``p``, else ``1/(1-p)``."""
    if not 0.0 <= p < 1.0:
        raise ValueError(f"dropout rate must be in [0, 1), got {p}")
    if p == 0.0:
        return [None] * len(shapes)
    scale = 1.0 / (1.0 - p)
    return [(rng.random(s) >= p) * scale for s in shapes]


def zero_state(layers, batch):
    return [(np.zeros((batch, lp.hidden_size)), np.zeros((batch, lp.hidden_size))) for lp in layers]


def stack_forward(layers, inputs, init_state=None, dropout=0.0, train=True, rng=None, masks=None):
    """Run the stack over ``inputs`` of shape (B, T, E).

    Returns ``(outputs, final_state, cache)``; outputs are the (masked)
    top-layer hidden states, shape (B, T, H_top).  In eval mode, or with
    ``dropout == 0``, no masks are drawn.  Explicit ``masks`` override
    sampling.
    """
    inputs = np.asarray(inputs, dtype=np.float64)
    if inputs.ndim != 3:
        raise ValueError(f"inputs must be (B, T, E), got shape {inputs.shape}")
    batch, steps, width = inputs.shape
    if steps < 1:
        raise ValueError("need at least one time step")
    if width != layers[0].input_size:
        raise ValueError(f"input width {width} does not match first layer input size {layers[0].input_size}")
    if not 0.0 <= dropout < 1.0:
        raise ValueError(f"dropout rate must be in [0, 1), got {dropout}")
    if init_state is None:
        init_state = zero_state(layers, batch)
    if len(init_state) != len(layers):
        raise ValueError(f"init_state has {len(init_state)} layers, stack has {len(layers)}")

    shapes = [(batch, steps, lp.input_size) for lp in layers] + [(batch, steps, layers[-1].hidden_size)]
    if masks is None:
        if train and dropout > 0.0:
            if rng is None:
                raise ValueError("train-mode dropout needs an rng stream")
            masks = dropout_masks(shapes, dropout, rng)
        else:
            masks = [None] * len(shapes)
    cache = UnrollCache(layers=layers, masks=masks)

    x = inputs
    final_state = []
    for layer, lp in enumerate(layers):
        if masks[layer] is not None:
            x = x * masks[layer]
        cache.layer_inputs.append(x)
        hidden = lp.hidden_size
        h, c = init_state[layer]
        if h.shape != (batch, hidden) or c.shape != (batch, hidden):
            raise ValueError(f"layer {layer} state must be {(batch, hidden)}")
        zx = x @ lp.W_x.T + lp.b  # input projection for all steps at once
        out = np.empty((batch, steps, hidden))
        step_caches = []
        for t in range(steps):
            z = zx[:, t] + h @ lp.W_h.T
            i, f, g, o = _gates(z, hidden)
            c_new = f * c + i * g
            tanh_c = np.tanh(c_new)
            h_new = o * tanh_c
            step_caches.append((None, h, c, i, f, g, o, tanh_c))
            h, c = h_new, c_new
            out[:, t] = h
        cache.steps.append(step_caches)
        final_state.append((h, c))
        x = out
    cache.top = x
    if masks[-1] is not None:
        x = x * masks[-1]
    return x, final_state, cache


def stack_backward(cache, grad_outputs):
    """Reverse mode of :func:`stack_forward` within one window.

    Returns ``(param_grads, grad_inputs, grad_init_state)``.  ``param_grads``
    is a list of dicts (``W_x``, ``W_h``, ``b``) per layer.
    """
    grad_outputs = np.asarray(grad_outputs, dtype=np.float64)
    if grad_outputs.shape != cache.top.shape:
        raise ValueError(f"grad_outputs shape {grad_outputs.shape} does not match outputs {cache.top.shape}")
    d_above = grad_outputs
    if cache.masks[-1] is not None:
        d_above = d_above * cache.masks[-1]
    batch, steps, _ = grad_outputs.shape

    param_grads = [None] * len(cache.layers)
    grad_init = [None] * len(cache.layers)
    for layer in reversed(range(len(cache.layers))):
        lp = cache.layers[layer]
        hidden = lp.hidden_size
        dz_all = np.empty((batch, steps, 4 * hidden))
        dh_next = np.zeros((batch, hidden))
        dc_next = np.zeros((batch, hidden))
        dW_h = np.zeros_like(lp.W_h)
        step_caches = cache.steps[layer]
        for t in reversed(range(steps)):
            step = step_caches[t]
            dz, dc_next = _cell_dz(step, d_above[:, t] + dh_next, dc_next)
            dW_h += dz.T @ step[1]
            dh_next = dz @ lp.W_h
            dz_all[:, t] = dz
        x = cache.layer_inputs[layer]
        flat_dz = dz_all.reshape(batch * steps, 4 * hidden)
        param_grads[layer] = {
            "W_x": flat_dz.T @ x.reshape(batch * steps, -1),
            "W_h": dW_h,
            "b": flat_dz.sum(axis=0),
        }
        grad_init[layer] = (dh_next, dc_next)
        dx = dz_all @ lp.W_x
        if cache.masks[layer] is not None:
            dx = dx * cache.masks[layer]
        d_above = dx
    return param_grads, d_above, grad_init
