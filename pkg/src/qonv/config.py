"""Experiment configuration files: INI-style sections, strictly validated.

Unknown sections or keys are hard errors so a typo cannot silently fall back
to a default. The parsed configuration hashes deterministically, which lets
result files name the exact configuration that produced them.
"""

from __future__ import annotations

import configparser
import hashlib
import re
from dataclasses import dataclass, field

from .errors import ConfigurationError

EXPERIMENT_KINDS = ("regress1d", "regress2d", "theory", "bound_table")

_EXPERIMENT_KEYS = {"kind", "seeds", "out_dir"}
_SIGNAL_KEYS = {"n", "alpha", "cutoff", "split", "train_fraction", "psnr_peak"}
_IMAGE_KEYS = {"path", "blur_sigma", "val_fraction", "psnr_peak"}
_TRAIN_KEYS = {"iterations", "lr", "optimizer", "weight_decay", "log_every"}
_THEORY_KEYS = {"instances", "max_size", "seed", "shift_mode"}
_BOUND_KEYS = {"c", "eps"}
_MODEL_KEYS = {
    "family", "depth", "width", "kernel", "encoding", "encoding_features",
    "encoding_sigma", "encoding_octaves", "activation", "siren_omega0",
    "residual_output", "use_bias",
}

_ASSERTION_RE = re.compile(
    r"^\s*(?:(?P<metric>psnr|ssim)\s*:)?\s*(?P<lhs>[\w.-]+)\s*"
    r"(?P<op>>=|>)\s*(?P<rhs>[\w.-]+)\s*(?:\+\s*(?P<margin>[0-9.eE+-]+))?\s*$"
)


@dataclass(frozen=True)
class Assertion:
    """An ordering claim over mean validation metrics, e.g. ``a > b + 0.5``."""

    name: str
    metric: str
    lhs: str
    rhs: str
    margin: float
    strict: bool

    def describe(self) -> str:
        op = ">" if self.strict else ">="
        tail = f" + {self.margin:g}" if self.margin else ""
        return f"{self.metric}:{self.lhs} {op} {self.rhs}{tail}"


@dataclass(frozen=True)
class ModelEntry:
    name: str
    params: dict


@dataclass(frozen=True)
class ExperimentConfig:
    kind: str
    seeds: tuple
    out_dir: str
    models: tuple = ()
    signal: dict = field(default_factory=dict)
    image: dict = field(default_factory=dict)
    train: dict = field(default_factory=dict)
    theory: dict = field(default_factory=dict)
    bound: dict = field(default_factory=dict)
    assertions: tuple = ()

    def config_hash(self) -> str:
        lines = [f"kind={self.kind}", f"seeds={','.join(map(str, self.seeds))}"]
        for section_name, mapping in (("signal", self.signal),
                                      ("image", self.image),
                                      ("train", self.train),
                                      ("theory", self.theory),
                                      ("bound", self.bound)):
            for key in sorted(mapping):
                lines.append(f"{section_name}.{key}={mapping[key]!r}")
        for entry in self.models:
            for key in sorted(entry.params):
                lines.append(f"model.{entry.name}.{key}={entry.params[key]!r}")
        for check in self.assertions:
            lines.append(f"assert.{check.name}={check.describe()}")
        digest = hashlib.sha256("\n".join(lines).encode("utf-8"))
        return digest.hexdigest()[:16]


def _check_keys(section, present, allowed):
    unknown = set(present) - allowed
    if unknown:
        raise ConfigurationError(
            f"unknown keys in [{section}]: {sorted(unknown)}; "
            f"allowed: {sorted(allowed)}"
        )


def _parse_bool(section, key, raw):
    lowered = raw.strip().lower()
    if lowered in ("true", "yes", "1", "on"):
        return True
    if lowered in ("false", "no", "0", "off"):
        return False
    raise ConfigurationError(f"[{section}] {key}: expected a boolean, got {raw!r}")


def _typed(section, mapping, key, kind, default=None):
    if key not in mapping:
        return default
    raw = mapping[key]
    try:
        if kind is bool:
            return _parse_bool(section, key, raw)
        return kind(raw)
    except (TypeError, ValueError) as exc:
        raise ConfigurationError(
            f"[{section}] {key}: cannot parse {raw!r} as {kind.__name__}"
        ) from exc


def _model_entry(name, raw) -> ModelEntry:
    _check_keys(f"model {name}", raw.keys(), _MODEL_KEYS)
    if "family" not in raw:
        raise ConfigurationError(f"[model {name}] is missing 'family'")
    section = f"model {name}"
    params = {"family": raw["family"]}
    for key, kind in (("depth", int), ("width", int), ("kernel", int),
                      ("encoding_features", int), ("encoding_octaves", int),
                      ("encoding_sigma", float), ("siren_omega0", float)):
        value = _typed(section, raw, key, kind)
        if value is not None:
            params[key] = value
    for key in ("encoding", "activation"):
        if key in raw:
            params[key] = raw[key]
    for key in ("residual_output", "use_bias"):
        value = _typed(section, raw, key, bool)
        if value is not None:
            params[key] = value
    return ModelEntry(name=name, params=params)


def _parse_assertions(raw) -> tuple:
    checks = []
    for name, value in raw.items():
        match = _ASSERTION_RE.match(value)
        if not match:
            raise ConfigurationError(
                f"[assertions] {name}: cannot parse {value!r}; expected "
                "'[psnr:|ssim:]lhs >[=] rhs [+ margin]'"
            )
        checks.append(Assertion(
            name=name,
            metric=match.group("metric") or "psnr",
            lhs=match.group("lhs"),
            rhs=match.group("rhs"),
            margin=float(match.group("margin") or 0.0),
            strict=match.group("op") == ">",
        ))
    return tuple(checks)


def parse_config_text(text: str) -> ExperimentConfig:
    parser = configparser.ConfigParser(interpolation=None)
    parser.optionxform = str
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ConfigurationError(f"cannot parse config: {exc}") from exc

    if "experiment" not in parser:
        raise ConfigurationError("config needs an [experiment] section")
    exp = dict(parser["experiment"])
    _check_keys("experiment", exp.keys(), _EXPERIMENT_KEYS)
    kind = exp.get("kind")
    if kind not in EXPERIMENT_KINDS:
        raise ConfigurationError(
            f"experiment kind must be one of {EXPERIMENT_KINDS}, got {kind!r}"
        )
    seeds_raw = exp.get("seeds", "0")
    try:
        seeds = tuple(int(tok) for tok in seeds_raw.split(",") if tok.strip())
    except ValueError as exc:
        raise ConfigurationError(f"cannot parse seeds {seeds_raw!r}") from exc
    if not seeds:
        raise ConfigurationError("at least one seed is required")
    out_dir = exp.get("out_dir", "results")

    sections = {"signal": {}, "image": {}, "train": {}, "theory": {},
                "bound": {}}
    models = []
    assertions = ()
    for section in parser.sections():
        if section == "experiment":
            continue
        raw = dict(parser[section])
        if section in sections:
            allowed = {"signal": _SIGNAL_KEYS, "image": _IMAGE_KEYS,
                       "train": _TRAIN_KEYS, "theory": _THEORY_KEYS,
                       "bound": _BOUND_KEYS}[section]
            _check_keys(section, raw.keys(), allowed)
            sections[section] = raw
        elif section == "assertions":
            assertions = _parse_assertions(raw)
        elif section.startswith("model "):
            name = section[len("model "):].strip()
            if not name:
                raise ConfigurationError("model sections need a name: [model NAME]")
            if any(m.name == name for m in models):
                raise ConfigurationError(f"duplicate model name {name!r}")
            models.append(_model_entry(name, raw))
        else:
            raise ConfigurationError(f"unknown section [{section}]")

    signal = {
        "n": _typed("signal", sections["signal"], "n", int, 32),
        "alpha": _typed("signal", sections["signal"], "alpha", float, 0.5),
        "cutoff": _typed("signal", sections["signal"], "cutoff", float, 0.125),
        "split": sections["signal"].get("split", "even_odd"),
        "train_fraction": _typed("signal", sections["signal"],
                                 "train_fraction", float, 0.5),
        "psnr_peak": _typed("signal", sections["signal"], "psnr_peak", float, 2.0),
    }
    if signal["split"] not in ("even_odd", "random"):
        raise ConfigurationError(
            f"signal split must be even_odd or random, got {signal['split']!r}"
        )
    image = {
        "path": sections["image"].get("path", "builtin:sample256"),
        "blur_sigma": _typed("image", sections["image"], "blur_sigma", float, 2.0),
        "val_fraction": _typed("image", sections["image"], "val_fraction",
                               float, 0.1),
        "psnr_peak": _typed("image", sections["image"], "psnr_peak", float, 1.0),
    }
    train = {
        "iterations": _typed("train", sections["train"], "iterations", int, 2000),
        "lr": _typed("train", sections["train"], "lr", float, 1e-3),
        "optimizer": sections["train"].get("optimizer", "adam"),
        "weight_decay": _typed("train", sections["train"], "weight_decay",
                               float, 0.0),
        "log_every": _typed("train", sections["train"], "log_every", int, 100),
    }
    theory = {
        "instances": _typed("theory", sections["theory"], "instances", int, 1000),
        "max_size": _typed("theory", sections["theory"], "max_size", int, 16),
        "seed": _typed("theory", sections["theory"], "seed", int, 0),
        "shift_mode": sections["theory"].get("shift_mode", "wrap"),
    }
    bound_eps = sections["bound"].get("eps", "")
    try:
        eps_values = tuple(float(tok) for tok in bound_eps.split(",") if tok.strip())
    except ValueError as exc:
        raise ConfigurationError(f"cannot parse bound eps list {bound_eps!r}") from exc
    bound = {
        "c": _typed("bound", sections["bound"], "c", float, 1.0),
        "eps": eps_values,
    }

    if kind in ("regress1d", "regress2d") and not models:
        raise ConfigurationError(f"{kind} needs at least one [model NAME] section")

    return ExperimentConfig(kind=kind, seeds=seeds, out_dir=out_dir,
                            models=tuple(models), signal=signal, image=image,
                            train=train, theory=theory, bound=bound,
                            assertions=assertions)


def load_config(path) -> ExperimentConfig:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigurationError(f"cannot read config {path}: {exc}") from exc
    return parse_config_text(text)
