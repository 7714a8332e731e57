"""Training loop, exact-softmax evaluation and the experiment driver."""
from __future__ import annotations

import csv
import dataclasses
import json
import logging
import math
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .checkpoint import load_checkpoint, save_checkpoint
from .config import ExperimentConfig, dump_config
from .corpus import Vocabulary, load_corpus, load_embeddings, make_batches
from .model import LanguageModel, make_sample
from .noise import NoiseConfig, noise_from_config, sample_noise
from .optim import ClipConfig, DivergenceError, InitHeuristic, ScheduleConfig, clip_by_global_norm, learning_rate, sgd_step
from .tensor import RngStream

log = logging.getLogger(__name__)

CSV_FIELDS = ("epoch", "lr", "train_obj", "train_ppl_proxy", "valid_ppl", "seconds")


@dataclass
class EpochMetrics:
    epoch: int
    lr: float
    train_obj: float
    train_ppl_proxy: float
    valid_ppl: float = math.nan
    seconds: float = 0.0

    def row(self):
        return [str(self.epoch)] + [repr(float(getattr(self, f))) for f in CSV_FIELDS[1:]]


def evaluate_ppl(model, stream, batch_size, num_steps):
    """Exact-softmax perplexity of ``stream``, state carried across batches.

    Dropout is off and no randomness is used, so the result depends only on
    the parameters.  Whatever head trained the model, its scores go through
    the full softmax here.
    """
    if len(stream) == 0:
        raise ValueError("cannot evaluate perplexity on an empty stream")
    batches = make_batches(stream, batch_size, num_steps)
    state = model.zero_state(batch_size)
    total, count = 0.0, 0
    for x, y in batches:
        nll, state = model.eval_nll(x, y, state)
        total += nll
        count += y.size
    return math.exp(total / count)


def unigram_ppl(vocab, stream):
    """Perplexity of the add-one unigram model estimated from training counts."""
    counts = vocab.counts.astype(np.float64) + 1.0
    logq = np.log(counts / counts.sum())
    return math.exp(-float(np.mean(logq[np.asarray(stream)[1:]])))


class Trainer:
    """Holds the model, the random streams and the noise distribution."""

    def __init__(self, cfg, vocab, model=None, embeddings=None):
        self.cfg = cfg
        self.vocab = vocab
        root = RngStream(cfg.seed)
        self.rng_init = root.split("init")
        self.rng_dropout = root.split("dropout")
        self.rng_noise = root.split("noise")
        if model is None:
            model = LanguageModel.initialise(
                len(vocab), cfg.embedding_dim, cfg.hidden, cfg.init, self.rng_init,
                layers=cfg.layers, embeddings=embeddings,
            )
        self.model = model
        self.noise = noise_from_config(vocab, cfg.noise) if cfg.head == "nce" else None

    def rng_states(self):
        return {"dropout": self.rng_dropout.get_state(), "noise": self.rng_noise.get_state()}

    def set_rng_states(self, states):
        self.rng_dropout.set_state(states["dropout"])
        self.rng_noise.set_state(states["noise"])

    def train_epoch(self, stream, t):
        """One pass over ``stream`` at the learning rate of epoch ``t``.

        Returns an :class:`EpochMetrics` without validation perplexity.
        """
        cfg = self.cfg
        start = time.perf_counter()
        lr = learning_rate(t, cfg.schedule)
        batches = make_batches(stream, cfg.batch_size, cfg.num_steps)
        state = self.model.zero_state(cfg.batch_size)
        n_pos = cfg.batch_size * cfg.num_steps
        scale = float(n_pos) if cfg.loss_reduction == "sum" else 1.0
        total = 0.0
        for b, (x, y) in enumerate(batches):
            sample = None
            if cfg.head == "nce":
                ids, probs = sample_noise(self.noise, cfg.noise, self.rng_noise, n_positions=n_pos)
                sample = make_sample(y, self.noise, ids, probs)
            loss, grads, state = self.model.loss_and_grads(
                x, y, state, head=cfg.head, sample=sample, zmode=cfg.zmode,
                dropout=cfg.dropout, train=True, rng=self.rng_dropout,
            )
            if not math.isfinite(loss):
                raise DivergenceError(
                    f"non-finite loss at epoch {t}, batch {b}; config: {json.dumps(cfg.to_dict(), sort_keys=True)}"
                )
            if not cfg.fine_tune:
                grads.pop("embedding")
            if scale != 1.0:
                grads = {k: g * scale for k, g in grads.items()}
            try:
                grads, _ = clip_by_global_norm(grads, cfg.clip)
            except DivergenceError as exc:
                raise DivergenceError(f"{exc} at epoch {t}, batch {b}") from None
            sgd_step(self.model.params, grads, lr)
            total += loss
        train_obj = total / len(batches)
        if cfg.head == "softmax":
            proxy = math.exp(train_obj)
        else:
            proxy = evaluate_ppl(self.model, self.proxy_stream(stream), cfg.batch_size, cfg.num_steps)
        return EpochMetrics(t, lr, train_obj, proxy, seconds=time.perf_counter() - start)

    def proxy_stream(self, stream):
        """Fixed leading slice of the training stream for the NCE perplexity proxy."""
        cfg = self.cfg
        n = max(int(len(stream) * cfg.train_ppl_fraction), cfg.batch_size * (cfg.num_steps + 1))
        return stream[:n]

    def evaluate(self, stream):
        return evaluate_ppl(self.model, stream, self.cfg.batch_size, self.cfg.num_steps)

    def save(self, path, **extra):
        meta = {
            "config": self.cfg.to_dict(),
            "vocab": self.vocab.to_dict(),
            "rng": self.rng_states(),
            **extra,
        }
        save_checkpoint(path, self.model.params, meta)


def config_from_dict(d):
    d = dict(d)
    d["noise"] = NoiseConfig(**d["noise"])
    d["init"] = InitHeuristic(**d["init"])
    d["schedule"] = ScheduleConfig(**d["schedule"])
    d["clip"] = ClipConfig(**d["clip"])
    return ExperimentConfig(**d)


def load_trainer(path):
    """Rebuild a :class:`Trainer` (model, config, vocabulary, rng) from a checkpoint."""
    tensors, meta = load_checkpoint(path)
    cfg = config_from_dict(meta["config"])
    vocab = Vocabulary.from_dict(meta["vocab"])
    trainer = Trainer(cfg, vocab, model=LanguageModel(tensors, cfg.layers))
    trainer.set_rng_states(meta["rng"])
    return trainer, meta


def run_experiment(cfg, data_dir, out_dir):
    """Train for ``cfg.epochs`` epochs and report validation/test perplexity.

    Writes ``config.ini`` (resolved), ``metrics.csv``, ``best.ckpt``,
    ``last.ckpt`` and ``report.json`` into ``out_dir``.  The config and the
    corpus are checked before anything is written.
    """
    cfg.validate()
    corpus = load_corpus(data_dir, cfg.max_vocab)
    for split in ("train", "valid", "test"):
        make_batches(getattr(corpus, split), cfg.batch_size, cfg.num_steps)  # length check only
    embeddings = None
    if cfg.embeddings:
        table = load_embeddings(
            cfg.embeddings, corpus.vocab, cfg.init, RngStream(cfg.seed).split("init"),
            dim=cfg.embedding_dim, fine_tune=cfg.fine_tune, lowercase=cfg.lowercase_embeddings,
        )
        log.info(table.report())
        embeddings = table.matrix

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "config.ini").write_text(dump_config(cfg), encoding="utf-8")
    trainer = Trainer(cfg, corpus.vocab, embeddings=embeddings)
    log.info("vocabulary %d, train %d tokens, head %s", len(corpus.vocab), len(corpus.train), cfg.head)

    history = []
    best_ppl, best_epoch = math.inf, -1
    with (out / "metrics.csv").open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(CSV_FIELDS)
        for t in range(cfg.epochs):
            try:
                m = trainer.train_epoch(corpus.train, t)
            except DivergenceError as exc:
                (out / "diverged.txt").write_text(f"{exc}\n\n{dump_config(cfg)}", encoding="utf-8")
                raise
            start = time.perf_counter()
            m.valid_ppl = trainer.evaluate(corpus.valid)
            m.seconds += time.perf_counter() - start
            writer.writerow(m.row())
            fh.flush()
            history.append(m)
            log.info("epoch %d lr %.6g train_obj %.4f valid ppl %.3f (%.1fs)", t, m.lr, m.train_obj, m.valid_ppl, m.seconds)
            if m.valid_ppl < best_ppl:
                best_ppl, best_epoch = m.valid_ppl, t
                trainer.save(out / "best.ckpt", epoch=t, best_valid_ppl=best_ppl, data_dir=str(data_dir))
    trainer.save(out / "last.ckpt", epoch=cfg.epochs - 1, best_valid_ppl=best_ppl, data_dir=str(data_dir))

    test_last = trainer.evaluate(corpus.test)
    best_trainer, _ = load_trainer(out / "best.ckpt")
    test_best = best_trainer.evaluate(corpus.test)
    report = {
        "head": cfg.head,
        "epochs": cfg.epochs,
        "valid_ppl_last": history[-1].valid_ppl,
        "test_ppl_last": test_last,
        "best_epoch": best_epoch,
        "valid_ppl_best": best_ppl,
        "test_ppl_best": test_best,
        "test_ppl": test_best if cfg.early_stop else test_last,
        "unigram_test_ppl": unigram_ppl(corpus.vocab, corpus.test),
        "vocab_size": len(corpus.vocab),
        "seconds": sum(m.seconds for m in history),
    }
    (out / "report.json").write_text(json.dumps(report, indent=2) + "\n", encoding="utf-8")
    report["history"] = [dataclasses.asdict(m) for m in history]
    return report
