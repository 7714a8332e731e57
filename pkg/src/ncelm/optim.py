"""Plain SGD, the search-then-converge schedule, clipping and initialisation."""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .tensor import rng_uniform

INIT_KINDS = ("glorot", "glorot_quarter", "explicit", "gaussian")

# best-performing uniform half-widths per model size
TUNED_INIT_RANGES = {"S": 0.0153, "M": 0.00849, "L": 0.00625}


class DivergenceError(FloatingPointError):
    """Raised when training produces NaN/Inf losses or gradients."""


@dataclass
class ScheduleConfig:
    eta0: float = 1.0
    psi: float = 2.0
    tau: int = 7

    def __post_init__(self):
        if self.eta0 <= 0:
            raise ValueError(f"eta0 must be > 0, got {self.eta0}")
        if self.psi <= 1:
            raise ValueError(f"psi must be > 1, got {self.psi}")
        if int(self.tau) != self.tau or self.tau < 1:
            raise ValueError(f"tau must be a positive integer, got {self.tau}")
        self.tau = int(self.tau)

    def validate(self, epochs, head="softmax"):
        if self.tau > epochs:
            raise ValueError(f"tau={self.tau} exceeds the number of epochs ({epochs})")
        limit = math.ceil(2 * epochs / 3)
        if head == "nce" and self.tau > limit:
            warnings.warn(
                f"tau={self.tau} is above two-thirds of {epochs} epochs ({limit}); "
                "NCE training tends to do best with 1 <= tau <= 2/3 of the epochs",
                stacklevel=2,
            )


def learning_rate(t, cfg):
    """Learning rate for 0-indexed epoch ``t``.

    ``eta0 * (1/psi) ** max(t + 1 - tau, 0)``: epochs ``0..tau-1`` run at
    ``eta0``, then each epoch divides the rate by ``psi``.
    """
    if t < 0:
        raise ValueError(f"epoch index must be >= 0, got {t}")
    return cfg.eta0 * (1.0 / cfg.psi) ** max(t + 1 - cfg.tau, 0)


def glorot_range(n_in, n_out, quarter=False):
    """Half-width ``sqrt(6)/sqrt(n_in + n_out)``, divided by 4 if ``quarter``."""
    if n_in < 1 or n_out < 1:
        raise ValueError("fan-in and fan-out must be >= 1")
    r = math.sqrt(6.0) / math.sqrt(n_in + n_out)
    return r / 4.0 if quarter else r


@dataclass
class InitHeuristic:
    """How every weight matrix is initialised; biases always start at zero.

    The Glorot kinds use one global range computed from ``fan`` (the hidden
    size) on both sides, so a model gets a single interval per heuristic.
    """

    kind: str = "explicit"
    lo: float = -0.0153
    hi: float = 0.0153
    sigma: float = 0.01
    fan: int | None = None

    def __post_init__(self):
        if self.kind not in INIT_KINDS:
            raise ValueError(f"init kind must be one of {INIT_KINDS}, got {self.kind!r}")
        if self.kind == "explicit" and not self.lo < self.hi:
            raise ValueError(f"explicit init range needs lo < hi, got ({self.lo}, {self.hi})")
        if self.kind == "gaussian" and self.sigma <= 0:
            raise ValueError(f"gaussian init needs sigma > 0, got {self.sigma}")

    def resolved_range(self, fan=None):
        """``(lo, hi)`` of the uniform interval, or ``None`` for gaussian."""
        fan = fan or self.fan
        if self.kind == "explicit":
            return self.lo, self.hi
        if self.kind == "gaussian":
            return None
        if not fan:
            raise ValueError("glorot heuristics need the layer width (fan)")
        r = glorot_range(fan, fan, quarter=self.kind == "glorot_quarter")
        return -r, r

    def sample(self, shape, rng, fan=None):
        if self.kind == "gaussian":
            return rng.normal(self.sigma, shape)
        lo, hi = self.resolved_range(fan)
        return rng_uniform(rng, lo, hi, shape)


def is_bias(name):
    return name.rsplit(".", 1)[-1] in ("b", "bias", "lnZ")


def init_params(shapes, heuristic, rng, fan=None):
    """Fresh parameters for ``shapes`` (name -> shape), in dict order."""
    params = {}
    for name, shape in shapes.items():
        if is_bias(name):
            params[name] = np.zeros(shape)
        else:
            params[name] = heuristic.sample(shape, rng, fan)
    return params


@dataclass
class ClipConfig:
    max_norm: float = 5.0
    batch_divisor: int = 1

    def __post_init__(self):
        if self.max_norm <= 0:
            raise ValueError(f"max_norm must be > 0, got {self.max_norm}")
        if self.batch_divisor < 1:
            raise ValueError(f"batch_divisor must be >= 1, got {self.batch_divisor}")


def global_norm(grads):
    return math.sqrt(sum(float(np.sum(np.square(g))) for g in grads.values()))


def clip_by_global_norm(grads, cfg):
    """Divide by ``cfg.batch_divisor`` then rescale to global norm <= max_norm.

    Returns ``(clipped, norm_before_clipping)``; input arrays are not modified.
    """
    for name, g in grads.items():
        if not np.all(np.isfinite(g)):
            raise DivergenceError(f"non-finite gradient in {name!r}")
    scaled = {name: np.asarray(g, dtype=np.float64) / cfg.batch_divisor for name, g in grads.items()}
    norm = global_norm(scaled)
    if norm > cfg.max_norm:
        factor = cfg.max_norm / norm
        scaled = {name: g * factor for name, g in scaled.items()}
    return scaled, norm


def sgd_step(params, grads, eta):
    """In-place ``p -= eta * g`` for every name in ``grads``; returns ``params``."""
    for name, g in grads.items():
        p = params[name]
        if p.shape != np.shape(g):
            raise ValueError(f"gradient shape {np.shape(g)} does not match parameter {name!r} {p.shape}")
        p -= eta * g
    return params
