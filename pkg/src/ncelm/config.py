"""Experiment configuration, presets and the config-file grammar.

Config files are INI-style: ``[section]`` headers followed by ``key = value``
lines; ``#`` and ``;`` start comments.  Every key maps to one
:class:`ExperimentConfig` field (see :data:`CONFIG_KEYS`); unknown sections
or keys are errors.  ``model.preset`` is applied first and the remaining
keys override it, whatever their order in the file.
"""
from __future__ import annotations

import configparser
import copy
import dataclasses
import io
import warnings
from dataclasses import dataclass, field
from pathlib import Path

from .noise import NoiseConfig
from .optim import TUNED_INIT_RANGES, ClipConfig, InitHeuristic, ScheduleConfig

HEADS = ("softmax", "nce")
LOSS_REDUCTIONS = ("mean", "sum")


class ConfigError(ValueError):
    pass


@dataclass
class ExperimentConfig:
    preset: str = ""
    hidden: int = 200
    embed_dim: int = 0  # 0 means "same as hidden"
    layers: int = 2
    num_steps: int = 20
    batch_size: int = 20
    dropout: float = 0.0
    max_vocab: int = 10000
    head: str = "nce"
    zmode: str = "constant"
    noise: NoiseConfig = field(default_factory=NoiseConfig)
    init: InitHeuristic = field(default_factory=InitHeuristic)
    schedule: ScheduleConfig = field(default_factory=ScheduleConfig)
    clip: ClipConfig = field(default_factory=ClipConfig)
    epochs: int = 20
    seed: int = 1234
    early_stop: bool = True
    loss_reduction: str = "mean"
    train_ppl_fraction: float = 0.05
    embeddings: str = ""
    fine_tune: bool = True
    lowercase_embeddings: bool = False

    @property
    def embedding_dim(self):
        return self.embed_dim or self.hidden

    def validate(self):
        """Raise :class:`ConfigError` on inconsistent settings."""
        problems = []
        for name in ("hidden", "layers", "num_steps", "batch_size", "max_vocab", "epochs"):
            if getattr(self, name) < 1:
                problems.append(f"{name} must be >= 1")
        if self.embed_dim < 0:
            problems.append("embed_dim must be >= 0")
        if not 0.0 <= self.dropout < 1.0:
            problems.append("dropout must be in [0, 1)")
        if self.head not in HEADS:
            problems.append(f"head must be one of {HEADS}")
        if self.zmode not in ("constant", "learned"):
            problems.append("zmode must be 'constant' or 'learned'")
        if self.loss_reduction not in LOSS_REDUCTIONS:
            problems.append(f"loss_reduction must be one of {LOSS_REDUCTIONS}")
        if not 0.0 < self.train_ppl_fraction <= 1.0:
            problems.append("train_ppl_fraction must be in (0, 1]")
        if self.max_vocab < 2 + 1:
            problems.append("max_vocab must leave room for <unk>, <eos> and one word")
        if self.schedule.tau > self.epochs:
            problems.append(f"schedule.tau={self.schedule.tau} exceeds epochs={self.epochs}")
        if self.seed < 0:
            problems.append("seed must be >= 0")
        if problems:
            raise ConfigError("; ".join(problems))
        if self.head == "nce":
            with warnings.catch_warnings():
                warnings.simplefilter("always")
                self.schedule.validate(self.epochs, self.head)
        return self

    def to_dict(self):
        return dataclasses.asdict(self)


def _preset(name, hidden, steps, dropout, tau, psi, epochs, clip, init_range, **extra):
    cfg = ExperimentConfig(
        preset=name,
        hidden=hidden,
        num_steps=steps,
        batch_size=20,
        dropout=dropout,
        max_vocab=10000,
        head="nce",
        noise=NoiseConfig(kind="zipf", s=1.0, k=600),
        init=InitHeuristic("explicit", -init_range, init_range),
        schedule=ScheduleConfig(eta0=1.0, psi=psi, tau=tau),
        # summed loss, gradient divided by the batch size before clipping
        clip=ClipConfig(max_norm=clip, batch_divisor=20),
        loss_reduction="sum",
        epochs=epochs,
    )
    for k, v in extra.items():
        setattr(cfg, k, v)
    return cfg


PRESETS = {
    "S": _preset("S", 200, 20, 0.0, 7, 2.0, 20, 5.0, TUNED_INIT_RANGES["S"]),
    "M": _preset("M", 650, 35, 0.5, 25, 1.2, 39, 5.0, TUNED_INIT_RANGES["M"]),
    "L": _preset("L", 1500, 35, 0.6, 12, 1.15, 55, 10.0, TUNED_INIT_RANGES["L"]),
    # desk-scale configuration for the bundled corpus; per-position noise
    # and the slower decay let NCE settle within 13 epochs
    "tiny": _preset(
        "tiny", 64, 20, 0.0, 8, 1.5, 13, 5.0, 0.1,
        max_vocab=2000, noise=NoiseConfig(kind="zipf", s=1.0, k=50, sharing="position"),
    ),
}


def preset(name):
    try:
        return copy.deepcopy(PRESETS[name])
    except KeyError:
        raise ConfigError(f"unknown preset {name!r}; choose from {sorted(PRESETS)}") from None


def _bool(text):
    low = text.strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


# (section, key) -> (attribute path, parser, help)
CONFIG_KEYS = {
    ("model", "preset"): ("preset", str, "start from a preset: S, M, L or tiny"),
    ("model", "hidden"): ("hidden", int, "LSTM hidden size H"),
    ("model", "embed_dim"): ("embed_dim", int, "word vector size (0 = hidden)"),
    ("model", "layers"): ("layers", int, "number of stacked LSTM layers"),
    ("model", "num_steps"): ("num_steps", int, "unroll length T for truncated BPTT"),
    ("model", "batch_size"): ("batch_size", int, "mini-batch size B"),
    ("model", "dropout"): ("dropout", float, "dropout rate on non-recurrent connections"),
    ("model", "max_vocab"): ("max_vocab", int, "vocabulary size cap (specials included)"),
    ("head", "kind"): ("head", str, "output layer: softmax or nce"),
    ("head", "zmode"): ("zmode", str, "NCE normaliser: constant (Z=1) or learned"),
    ("noise", "kind"): ("noise.kind", str, "noise distribution: uniform, unigram or zipf"),
    ("noise", "alpha"): ("noise.alpha", float, "unigram exponent"),
    ("noise", "s"): ("noise.s", float, "zipf exponent"),
    ("noise", "k"): ("noise.k", int, "noise samples per position/batch"),
    ("noise", "sharing"): ("noise.sharing", str, "batch (shared samples) or position"),
    ("noise", "unique"): ("noise.unique", _bool, "draw noise words without repeats"),
    ("init", "kind"): ("init.kind", str, "glorot, glorot_quarter, explicit or gaussian"),
    ("init", "lo"): ("init.lo", float, "lower bound for explicit init"),
    ("init", "hi"): ("init.hi", float, "upper bound for explicit init"),
    ("init", "sigma"): ("init.sigma", float, "standard deviation for gaussian init"),
    ("schedule", "eta0"): ("schedule.eta0", float, "initial learning rate"),
    ("schedule", "psi"): ("schedule.psi", float, "decay factor per epoch after the search period"),
    ("schedule", "tau"): ("schedule.tau", int, "number of search epochs at eta0"),
    ("clip", "max_norm"): ("clip.max_norm", float, "global gradient-norm clip threshold"),
    ("clip", "batch_divisor"): ("clip.batch_divisor", int, "divide gradients by this before clipping"),
    ("train", "epochs"): ("epochs", int, "training epochs"),
    ("train", "seed"): ("seed", int, "random seed"),
    ("train", "early_stop"): ("early_stop", _bool, "headline result from the best validation epoch"),
    ("train", "loss_reduction"): ("loss_reduction", str, "mean over positions, or sum (then see clip.batch_divisor)"),
    ("train", "train_ppl_fraction"): ("train_ppl_fraction", float, "fraction of train used for the NCE perplexity proxy"),
    ("embeddings", "path"): ("embeddings", str, "word2vec text file with pretrained vectors"),
    ("embeddings", "fine_tune"): ("fine_tune", _bool, "update the embedding table during training"),
    ("embeddings", "lowercase"): ("lowercase_embeddings", _bool, "lower-case file words before matching"),
}


def config_help():
    lines = []
    section = None
    for (sec, key), (_, typ, text) in CONFIG_KEYS.items():
        if sec != section:
            lines.append(f"[{sec}]")
            section = sec
        tname = "bool" if typ is _bool else typ.__name__
        lines.append(f"  {key} ({tname}): {text}")
    return "\n".join(lines)


def _get(cfg, path):
    obj = cfg
    for part in path.split("."):
        obj = getattr(obj, part)
    return obj


def _set(cfg, path, value):
    *parents, last = path.split(".")
    obj = cfg
    for part in parents:
        obj = getattr(obj, part)
    setattr(obj, last, value)


def parse_config(text, source="<config>"):
    """Parse config-file text into a validated :class:`ExperimentConfig`."""
    parser = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"))
    parser.optionxform = str
    try:
        parser.read_string(text, source=source)
    except configparser.Error as exc:
        raise ConfigError(f"{source}: {exc}") from None
    known_sections = {s for s, _ in CONFIG_KEYS}
    values = {}
    for sec in parser.sections():
        if sec not in known_sections:
            raise ConfigError(f"{source}: unknown section [{sec}]")
        for key, raw in parser.items(sec):
            if (sec, key) not in CONFIG_KEYS:
                raise ConfigError(f"{source}: unknown key {key!r} in [{sec}]")
            values[(sec, key)] = raw
    name = values.pop(("model", "preset"), "").strip()
    cfg = preset(name) if name else ExperimentConfig()
    for (sec, key), raw in values.items():
        path, typ, _ = CONFIG_KEYS[(sec, key)]
        try:
            _set(cfg, path, typ(raw.strip()))
        except ValueError as exc:
            raise ConfigError(f"{source}: bad value for [{sec}] {key}: {exc}") from None
    try:
        # re-run dataclass checks on the nested configs
        cfg.noise = NoiseConfig(**dataclasses.asdict(cfg.noise))
        cfg.init = InitHeuristic(**dataclasses.asdict(cfg.init))
        cfg.schedule = ScheduleConfig(**dataclasses.asdict(cfg.schedule))
        cfg.clip = ClipConfig(**dataclasses.asdict(cfg.clip))
    except ValueError as exc:
        raise ConfigError(f"{source}: {exc}") from None
    return cfg.validate()


def load_config(spec):
    """A preset name (``S``, ``M``, ``L``, ``tiny``) or a config file path."""
    if spec in PRESETS:
        return preset(spec).validate()
    path = Path(spec)
    if not path.is_file():
        raise ConfigError(f"config {spec!r} is neither a preset ({', '.join(PRESETS)}) nor a readable file")
    return parse_config(path.read_text(encoding="utf-8"), source=str(path))


def _fmt(value):
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def dump_config(cfg):
    """Fully resolved config text; ``parse_config(dump_config(c))`` equals ``c``."""
    out = io.StringIO()
    section = None
    for (sec, key), (path, _, _) in CONFIG_KEYS.items():
        if sec != section:
            if section is not None:
                out.write("\n")
            out.write(f"[{sec}]\n")
            section = sec
        if (sec, key) == ("model", "preset") and not cfg.preset:
            continue
        out.write(f"{key} = {_fmt(_get(cfg, path))}\n")
    return out.getvalue()
