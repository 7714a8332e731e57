"""Independent checks: finite-difference gradients and NCE-vs-MLE consistency.

The consistency experiment uses a context-free model with one free score
per word and ``Z = 1``.  The NCE objective is taken in exact expectation:
the data term is weighted by the empirical distribution ``q`` and the noise
term is summed over the whole vocabulary with weight ``k * P_n``::

    J(s) = -sum_w q_w log sig(s_w - log(k P_n(w)))
           - k sum_w P_n(w) log(1 - sig(s_w - log(k P_n(w))))

Its minimiser is ``exp(s_w) = q_w`` for every ``k``; what ``k`` changes is the
curvature ``q k P_n / (q + k P_n)``, which approaches the maximum-likelihood
curvature ``q`` as ``k`` grows.  A fixed optimisation budget therefore gets
closer to the MLE for larger ``k``.
"""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field

import numpy as np

from .heads import HeadParams, NceBatchSample, nce_backward, nce_loss, softmax_log_probs, softmax_loss_and_grads
from .lstm import LstmLayerParams, lstm_cell_backward, lstm_cell_forward, stack_backward, stack_forward
from .model import LanguageModel, make_sample, param_shapes
from .noise import NoiseConfig, build_noise, sample_noise
from .tensor import RngStream, sigmoid

FD_STEP = 1e-5
GRAD_TOL = 1e-4


def rel_error(a, b):
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    return np.abs(a - b) / np.maximum(np.maximum(np.abs(a), np.abs(b)), 1e-8)


def finite_diff_grad(loss, params, h=FD_STEP):
    """Central differences of ``loss()`` wrt every entry of ``params``.

    ``params`` maps names to float64 arrays that ``loss`` reads; they are
    perturbed in place and restored.  Raises if ``loss`` is not
    deterministic.
    """
    base = loss()
    if loss() != base:
        raise ValueError("loss is not deterministic: two baseline evaluations differ")
    grads = {}
    for name, p in params.items():
        g = np.zeros(p.shape)
        flat = p.reshape(-1)  # view; p must be contiguous
        gflat = g.reshape(-1)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + h
            up = loss()
            flat[i] = orig - h
            down = loss()
            flat[i] = orig
            gflat[i] = (up - down) / (2.0 * h)
        grads[name] = g
    return grads


@dataclass
class GradCheckReport:
    tensor: str
    max_rel_err: float
    coord: tuple
    h: float = FD_STEP

    @property
    def passed(self):
        return self.max_rel_err < GRAD_TOL


def compare_grads(analytic, numeric, prefix="", h=FD_STEP):
    reports = []
    for name, num in numeric.items():
        err = rel_error(analytic[name], num)
        idx = np.unravel_index(int(np.argmax(err)), err.shape) if err.size else ()
        worst = float(err.max()) if err.size else 0.0
        reports.append(GradCheckReport(prefix + name, worst, tuple(int(i) for i in idx), h))
    return reports


def reports_to_csv(reports):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["tensor", "max_rel_err", "coord", "h"])
    for r in reports:
        w.writerow([r.tensor, repr(r.max_rel_err), "/".join(map(str, r.coord)), repr(r.h)])
    return buf.getvalue()


def reports_to_text(reports):
    lines = []
    for r in reports:
        flag = "ok  " if r.passed else "FAIL"
        lines.append(f"{flag} {r.tensor:<28s} max_rel_err={r.max_rel_err:.3e} at {r.coord}")
    return "\n".join(lines)


# -- desk-scale instances ---------------------------------------------------

def _layer(rng, input_size, hidden, scale=0.5):
    return LstmLayerParams(
        rng.uniform(-scale, scale, (4 * hidden, input_size)),
        rng.uniform(-scale, scale, (4 * hidden, hidden)),
        rng.uniform(-scale, scale, 4 * hidden),
    )


def check_lstm_cell(seed=0, hidden=4, width=3, batch=2):
    rng = RngStream(seed, "oracle")
    lp = _layer(rng, width, hidden)
    x = rng.uniform(-1, 1, (batch, width))
    h0 = rng.uniform(-1, 1, (batch, hidden))
    c0 = rng.uniform(-1, 1, (batch, hidden))
    wh = rng.uniform(-1, 1, (batch, hidden))
    wc = rng.uniform(-1, 1, (batch, hidden))

    def loss():
        h, c, _ = lstm_cell_forward(lp, x, h0, c0)
        return float(np.sum(wh * h) + np.sum(wc * c))

    _, _, cache = lstm_cell_forward(lp, x, h0, c0)
    dx, dh, dc, g = lstm_cell_backward(lp, cache, wh, wc)
    analytic = {"W_x": g["W_x"], "W_h": g["W_h"], "b": g["b"], "x": dx, "h": dh, "c": dc}
    numeric = finite_diff_grad(loss, {"W_x": lp.W_x, "W_h": lp.W_h, "b": lp.b, "x": x, "h": h0, "c": c0})
    return compare_grads(analytic, numeric, "lstm_cell.")


def check_lstm_stack(seed=0, hidden=8, steps=4, batch=2, width=5, layers=2, dropout=0.3):
    """Two-layer stack with fixed dropout masks and a weighted-sum loss."""
    rng = RngStream(seed, "oracle")
    lps = [_layer(rng, width if l == 0 else hidden, hidden) for l in range(layers)]
    inputs = rng.uniform(-1, 1, (batch, steps, width))
    state = [(rng.uniform(-1, 1, (batch, hidden)), rng.uniform(-1, 1, (batch, hidden))) for _ in lps]
    w = rng.uniform(-1, 1, (batch, steps, hidden))
    _, _, cache = stack_forward(lps, inputs, state, dropout, True, rng)
    masks = cache.masks

    def loss():
        out, _, _ = stack_forward(lps, inputs, state, dropout, True, masks=masks)
        return float(np.sum(w * out))

    grads, g_in, _ = stack_backward(cache, w)
    analytic = {"inputs": g_in}
    params = {"inputs": inputs}
    for l, lp in enumerate(lps):
        for k in ("W_x", "W_h", "b"):
            analytic[f"{l}.{k}"] = grads[l][k]
            params[f"{l}.{k}"] = getattr(lp, k)
    return compare_grads(analytic, finite_diff_grad(loss, params), "lstm_stack.")


def _head(rng, vocab, hidden, scale=1.0, ln_z=0.0):
    return HeadParams(rng.uniform(-scale, scale, (vocab, hidden)), rng.uniform(-scale, scale, vocab), ln_z)


def check_softmax_head(seed=0, vocab=12, hidden=6, n=5):
    rng = RngStream(seed, "oracle")
    head = _head(rng, vocab, hidden)
    v = rng.uniform(-1, 1, (n, hidden))
    targets = rng.integers(0, vocab, n)

    def loss():
        return softmax_log_probs(head, v, targets)[0]

    _, g_theta, g_bias, g_v = softmax_loss_and_grads(head, v, targets)
    numeric = finite_diff_grad(loss, {"theta": head.theta, "bias": head.bias, "v": v})
    return compare_grads({"theta": g_theta, "bias": g_bias, "v": g_v}, numeric, "softmax_head.")


def nce_instance(seed=0, vocab=12, hidden=6, n=5, k=4, shared=False, ln_z=0.3):
    rng = RngStream(seed, "oracle")
    head = _head(rng, vocab, hidden, ln_z=ln_z)
    v = rng.uniform(-1, 1, (n, hidden))
    targets = rng.integers(0, vocab, n)
    probs = rng.uniform(0.5, 1.5, vocab)
    probs /= probs.sum()
    noise = build_noise_from_probs(probs)
    cfg = NoiseConfig(kind="uniform", k=k, sharing="batch" if shared else "position")
    ids, p = sample_noise(noise, cfg, rng, n_positions=n)
    return head, v, make_sample(targets, noise, ids, p)


def build_noise_from_probs(probs):
    from .noise import NoiseDistribution, alias_build

    probs = np.asarray(probs, dtype=np.float64)
    return NoiseDistribution(probs, alias_build(probs), "explicit")


def check_nce_head(seed=0, zmode="constant", shared=False):
    head, v, sample = nce_instance(seed, shared=shared)
    lnz = np.array(head.lnZ)

    def loss():
        head.lnZ = float(lnz)
        return nce_loss(head, v, sample, zmode)

    g_theta, g_bias, g_v, g_lnz = nce_backward(head, v, sample, zmode)
    analytic = {"theta": g_theta, "bias": g_bias, "v": g_v}
    params = {"theta": head.theta, "bias": head.bias, "v": v}
    if zmode == "learned":
        analytic["lnZ"] = np.array(g_lnz)
        params["lnZ"] = lnz
    return compare_grads(analytic, finite_diff_grad(loss, params), f"nce_head[{zmode}].")


def check_full_model(seed=0, head="nce", zmode="learned", vocab=10, embed=4, hidden=5, batch=2, steps=3, k=3):
    """Every parameter of a tiny embedding+LSTM+head model, dropout masks fixed."""
    rng = RngStream(seed, "oracle")
    shapes = param_shapes(vocab, embed, hidden)
    params = {name: rng.uniform(-0.5, 0.5, shape) for name, shape in shapes.items()}
    params["head.lnZ"] = np.array(0.2)
    model = LanguageModel(params)
    x = rng.integers(0, vocab, (batch, steps))
    y = rng.integers(0, vocab, (batch, steps))
    state = [(rng.uniform(-1, 1, (batch, hidden)), rng.uniform(-1, 1, (batch, hidden))) for _ in range(2)]
    sample = None
    if head == "nce":
        noise = build_noise(_FakeVocab(vocab), "zipf")
        ids, p = sample_noise(noise, NoiseConfig(k=k, sharing="batch"), rng)
        sample = make_sample(y, noise, ids, p)
    _, _, cache = model.forward(x, state, dropout=0.2, train=True, rng=rng)
    masks = cache.masks

    def loss():
        return model.loss_and_grads(x, y, state, head, sample, zmode, 0.2, True, masks=masks)[0]

    _, analytic, _ = model.loss_and_grads(x, y, state, head, sample, zmode, 0.2, True, masks=masks)
    wanted = {k: v for k, v in params.items() if k in analytic}
    return compare_grads(analytic, finite_diff_grad(loss, wanted), f"model[{head}].")


class _FakeVocab:
    def __init__(self, n):
        self.n = n
        self.counts = np.ones(n)

    def __len__(self):
        return self.n


def grad_check_suite(seed=0):
    """All gradient checks at desk scale; every report should pass."""
    reports = []
    reports += check_lstm_cell(seed)
    reports += check_lstm_stack(seed)
    reports += check_softmax_head(seed)
    reports += check_nce_head(seed, "constant")
    reports += check_nce_head(seed, "learned")
    reports += check_nce_head(seed, "constant", shared=True)
    reports += check_full_model(seed, "softmax")
    reports += check_full_model(seed, "nce", "learned")
    return reports


# -- NCE vs maximum likelihood ----------------------------------------------

def exact_nce_objective(scores, q, noise_probs, k):
    """Expected NCE objective per data token for free scores ``log p_model``."""
    a = scores - np.log(k * noise_probs)
    return float(np.sum(q * np.logaddexp(0.0, -a)) + k * np.sum(noise_probs * np.logaddexp(0.0, a)))


def exact_nce_gradient(scores, q, noise_probs, k):
    a = scores - np.log(k * noise_probs)
    return -q * sigmoid(-a) + k * noise_probs * sigmoid(a)


def kl_divergence(p, q):
    p = np.asarray(p, dtype=np.float64)
    q = np.asarray(q, dtype=np.float64)
    mask = p > 0
    return float(np.sum(p[mask] * (np.log(p[mask]) - np.log(q[mask]))))


@dataclass
class ConsistencyFit:
    k: int
    fitted: np.ndarray
    scores: np.ndarray
    grad_norm: float
    converged: bool
    kl_to_mle: float


def nce_consistency_fit(counts, noise, k, steps=200, eta=0.5, tol=1e-8):
    """Gradient descent on the exact expected NCE objective (``Z = 1``).

    Starts from zero scores and runs ``steps`` updates.  The fitted
    distribution is the normalised ``exp(scores)``; ``kl_to_mle`` is
    ``KL(fitted || counts / sum(counts))``.  ``converged`` reports whether
    the final gradient norm fell below ``tol``.
    """
    counts = np.asarray(counts, dtype=np.float64)
    if counts.ndim != 1 or counts.size > 64:
        raise ValueError("consistency fit needs a vocabulary of at most 64 words")
    if np.any(counts < 0) or counts.sum() <= 0:
        raise ValueError("counts must be non-negative with a positive total")
    pn = noise.probs if hasattr(noise, "probs") else np.asarray(noise, dtype=np.float64)
    if pn.shape != counts.shape:
        raise ValueError("noise distribution and counts cover different vocabularies")
    q = counts / counts.sum()
    s = np.zeros_like(q)
    for _ in range(steps):
        s -= eta * exact_nce_gradient(s, q, pn, k)
    g = exact_nce_gradient(s, q, pn, k)
    fitted = np.exp(s - s.max())
    fitted /= fitted.sum()
    norm = float(np.linalg.norm(g))
    return ConsistencyFit(k, fitted, s, norm, norm < tol, kl_divergence(fitted, q))


@dataclass
class BiasReport:
    exact: np.ndarray
    deviations: dict = field(default_factory=dict)  # resamples -> max abs deviation


def sampled_vs_exact_nce(counts, scores, noise, k, resamples=(100, 1000, 10000), seed=0):
    """Monte-Carlo mean of sampled NCE gradients against the exact expectation.

    The instance is context-free: each position's target is one corpus token
    (``counts`` expanded), the score of word ``w`` is ``scores[w]`` (carried
    by the head bias with ``theta = 0``), and every position draws its own
    ``k`` noise words.  Returns the exact gradient wrt the scores and the
    maximum absolute deviation of the averaged sampled gradient.
    """
    counts = np.asarray(counts, dtype=np.int64)
    scores = np.asarray(scores, dtype=np.float64)
    targets = np.repeat(np.arange(len(counts)), counts)
    n = len(targets)
    q = counts / counts.sum()
    head = HeadParams(np.zeros((len(counts), 1)), scores.copy(), 0.0)
    v = np.zeros((n, 1))
    cfg = NoiseConfig(kind="uniform", k=k, sharing="position")
    rng = RngStream(seed, "oracle")
    exact = exact_nce_gradient(scores, q, noise.probs, k)
    report = BiasReport(exact)
    running = np.zeros_like(scores)
    done = 0
    for r in sorted(resamples):
        while done < r:
            ids, p = sample_noise(noise, cfg, rng, n_positions=n)
            sample = NceBatchSample(targets, noise.probs[targets], ids, p)
            running += nce_backward(head, v, sample)[1]
            done += 1
        report.deviations[r] = float(np.max(np.abs(running / done - exact)))
    return report


def consistency_suite(counts=(40, 30, 20, 10), ks=(1, 10, 100, 1000), steps=200, eta=0.5):
    noise = build_noise(_FakeVocab(len(counts)), "zipf", s=1.0)
    return [nce_consistency_fit(counts, noise, k, steps, eta) for k in ks]
