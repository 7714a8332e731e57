"""``ncelm`` command line: training, evaluation, oracle suites and inspection.

Exit status is 0 on success, 1 when a check fails and 2 on configuration or
usage errors (message on stderr).
"""
from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

import numpy as np

from .checkpoint import CheckpointError
from .config import ConfigError, config_help, load_config
from .corpus import EmbeddingFormatError, bundled_corpus_dir, encode, load_corpus, read_text
from .noise import noise_from_config
from .optim import TUNED_INIT_RANGES, DivergenceError, glorot_range, learning_rate
from .tensor import RngStream

CONFIG_ARG_HELP = "preset name (S, M, L, tiny) or path to a config file"


class UsageError(Exception):
    pass


def _parser():
    epilog = "config file keys:\n" + config_help()
    fmt = argparse.RawDescriptionHelpFormatter
    p = argparse.ArgumentParser(prog="ncelm", description="LSTM language models with softmax or NCE output layers.",
                                epilog=epilog, formatter_class=fmt)
    sub = p.add_subparsers(dest="command", required=True, metavar="command")

    def add(name, help_text):
        return sub.add_parser(name, help=help_text, description=help_text, epilog=epilog, formatter_class=fmt)

    s = add("train", "train a model and write metrics, checkpoints and a report")
    s.add_argument("config", help=CONFIG_ARG_HELP)
    s.add_argument("--data", required=True, help="directory with train.txt, valid.txt and test.txt")
    s.add_argument("--out", required=True, help="output directory")
    s.add_argument("-q", "--quiet", action="store_true", help="no per-epoch log lines")

    s = add("eval", "exact-softmax perplexity of a checkpoint on one split")
    s.add_argument("checkpoint")
    s.add_argument("--split", choices=("train", "valid", "test"), default="test")
    s.add_argument("--data", help="corpus directory (default: the one recorded in the checkpoint)")

    s = add("grad-check", "finite-difference gradient checks of every layer")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--csv", help="also write the per-tensor report to this file")

    s = add("consistency", "exact-expectation NCE fits against the maximum-likelihood solution")
    s.add_argument("--counts", default="40,30,20,10", help="comma-separated word counts")
    s.add_argument("--ks", default="1,10,100,1000", help="comma-separated noise sample counts")
    s.add_argument("--steps", type=int, default=200)
    s.add_argument("--eta", type=float, default=0.5)

    s = add("schedule", "learning rate for every epoch")
    s.add_argument("config", help=CONFIG_ARG_HELP)

    s = add("init-report", "uniform init ranges for the configured hidden size")
    s.add_argument("config", help=CONFIG_ARG_HELP)

    s = add("sample-noise", "draw noise words and compare frequencies with the distribution")
    s.add_argument("config", help=CONFIG_ARG_HELP)
    s.add_argument("-n", type=int, default=10000, help="number of draws")
    s.add_argument("--data", help="corpus directory for the vocabulary (default: bundled corpus)")
    s.add_argument("--top", type=int, default=10, help="rows of the frequency table")
    return p


def _corpus_dir(path):
    d = Path(path) if path else bundled_corpus_dir()
    if not all((d / f"{s}.txt").is_file() for s in ("train", "valid", "test")):
        raise UsageError(f"no corpus (train.txt, valid.txt, test.txt) in {d}")
    return d


def cmd_train(args):
    from .trainer import run_experiment

    cfg = load_config(args.config)
    data = _corpus_dir(args.data)
    if not args.quiet:
        logging.basicConfig(level=logging.INFO, format="%(message)s", stream=sys.stderr)
    report = run_experiment(cfg, data, args.out)
    print(f"valid ppl (best epoch {report['best_epoch']}): {report['valid_ppl_best']:.3f}")
    print(f"test ppl: {report['test_ppl']:.3f}")
    print(f"unigram test ppl: {report['unigram_test_ppl']:.3f}")
    return 0


def cmd_eval(args):
    from .trainer import load_trainer

    trainer, meta = load_trainer(args.checkpoint)
    data = _corpus_dir(args.data or meta.get("data_dir"))
    stream = encode(trainer.vocab, read_text(data / f"{args.split}.txt"))
    print(f"{args.split} ppl: {trainer.evaluate(stream):.6f}")
    return 0


def cmd_grad_check(args):
    from .oracle import grad_check_suite, reports_to_csv, reports_to_text

    reports = grad_check_suite(args.seed)
    print(reports_to_text(reports))
    if args.csv:
        Path(args.csv).write_text(reports_to_csv(reports), encoding="utf-8")
    failed = [r for r in reports if not r.passed]
    worst = max(r.max_rel_err for r in reports)
    print(f"{len(reports) - len(failed)}/{len(reports)} tensors pass, worst relative error {worst:.3e}")
    return 1 if failed else 0


def _ints(text, what):
    try:
        values = [int(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise UsageError(f"{what} must be comma-separated integers, got {text!r}") from None
    if not values:
        raise UsageError(f"{what} is empty")
    return values


def cmd_consistency(args):
    from .oracle import build_noise_from_probs, nce_consistency_fit

    counts = _ints(args.counts, "--counts")
    ks = _ints(args.ks, "--ks")
    ranks = np.arange(1, len(counts) + 1, dtype=np.float64)
    noise = build_noise_from_probs((1.0 / ranks) / np.sum(1.0 / ranks))
    q = np.asarray(counts, dtype=np.float64) / sum(counts)
    print("target " + " ".join(f"{x:.6f}" for x in q))
    print(f"{'k':>6} {'KL(fit||mle)':>14}  fitted")
    kls = []
    for k in ks:
        fit = nce_consistency_fit(counts, noise, k, args.steps, args.eta)
        kls.append(fit.kl_to_mle)
        print(f"{k:>6} {fit.kl_to_mle:>14.6e}  " + " ".join(f"{x:.6f}" for x in fit.fitted))
    decreasing = all(a > b for a, b in zip(kls, kls[1:]))
    ok = decreasing and kls[-1] < 1e-3
    print(f"KL decreasing in k: {'yes' if decreasing else 'no'}; KL at k={ks[-1]}: {kls[-1]:.3e}")
    return 0 if ok else 1


def cmd_schedule(args):
    cfg = load_config(args.config)
    s = cfg.schedule
    print(f"eta0={s.eta0} psi={s.psi} tau={s.tau} epochs={cfg.epochs}")
    print("epoch  lr")
    for t in range(cfg.epochs):
        print(f"{t:>5}  {learning_rate(t, s):.6f}")
    return 0


def cmd_init_report(args):
    cfg = load_config(args.config)
    h = cfg.hidden
    print(f"hidden={h}")
    print(f"{'glorot':<16} U(-{glorot_range(h, h):.6f}, {glorot_range(h, h):.6f})")
    q = glorot_range(h, h, quarter=True)
    print(f"{'glorot_quarter':<16} U(-{q:.6f}, {q:.6f})")
    tuned = {200: TUNED_INIT_RANGES["S"], 650: TUNED_INIT_RANGES["M"], 1500: TUNED_INIT_RANGES["L"]}.get(h)
    print(f"{'tuned':<16} " + (f"U(-{tuned}, {tuned})" if tuned else "n/a (no tuned range for this size)"))
    rng = cfg.init.resolved_range(h)
    used = f"N(0, {cfg.init.sigma}^2)" if rng is None else f"U({rng[0]:.6f}, {rng[1]:.6f})"
    print(f"{'configured':<16} {cfg.init.kind}: {used}")
    return 0


def cmd_sample_noise(args):
    cfg = load_config(args.config)
    if args.n < 1:
        raise UsageError("-n must be >= 1")
    corpus = load_corpus(_corpus_dir(args.data), cfg.max_vocab)
    dist = noise_from_config(corpus.vocab, cfg.noise)
    rng = RngStream(cfg.seed, "noise")
    draws = dist.draw(rng, args.n)
    print(f"noise {cfg.noise.kind} over {dist.size} words, {args.n} draws")
    print("first draws: " + " ".join(corpus.vocab.words[i] for i in draws[:20]))
    freq = np.bincount(draws, minlength=dist.size) / args.n
    print(f"{'rank':>5} {'word':<16} {'P_n':>10} {'empirical':>10}")
    for i in range(min(args.top, dist.size)):
        print(f"{i + 1:>5} {corpus.vocab.words[i]:<16} {dist.probs[i]:>10.6f} {freq[i]:>10.6f}")
    return 0


COMMANDS = {
    "train": cmd_train,
    "eval": cmd_eval,
    "grad-check": cmd_grad_check,
    "consistency": cmd_consistency,
    "schedule": cmd_schedule,
    "init-report": cmd_init_report,
    "sample-noise": cmd_sample_noise,
}


def main(argv=None):
    parser = _parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return COMMANDS[args.command](args)
    except DivergenceError as exc:
        print(f"ncelm {args.command}: training diverged: {exc}", file=sys.stderr)
        return 1
    except (ConfigError, UsageError, CheckpointError, EmbeddingFormatError, OSError, ValueError) as exc:
        print(f"ncelm {args.command}: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
