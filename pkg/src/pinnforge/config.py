"""Experiment configuration: an INI file (``key = value`` in sections) plus flag overrides."""
from __future__ import annotations

import configparser
from dataclasses import dataclass, field, fields, replace

from .exceptions import ConfigError
from .search import SearchConfig, default_parallelism


@dataclass
class TrainSection:
    epochs: int = 10000
    learning_rate: float = 1e-5
    log_every: int = 100


@dataclass
class SearchSection:
    method: str = "autopinn"
    budget: int = 261
    k_candidates: int = 5
    n_act_widths: int = 3
    n_act_depths: int = 3
    n_intervals: int = 8
    samples_per_interval: int = 3
    top_intervals: int = 2
    verify_repeats: int = 5


@dataclass
class PreexpSection:
    study: str = "heatmap"
    structures: str = "32x4, 64x5, 128x6, 256x8"
    changing_points: str = "0.1, 0.3, 0.5"
    activations: str = "tanh, sigmoid, relu, swish"
    seeds: int = 3
    widths: str = "16, 32, 64"
    depths: str = "3, 4, 5"
    activation: str = "tanh"
    changing_point: float = 0.5
    trials: str = ""


@dataclass
class ExperimentConfig:
    problem: str | None = None
    sampling: str | None = None
    seed: int = 0
    output: str = "runs"
    parallelism: int = field(default_factory=default_parallelism)
    n_test: int = 101
    train: TrainSection = field(default_factory=TrainSection)
    search: SearchSection = field(default_factory=SearchSection)
    preexp: PreexpSection = field(default_factory=PreexpSection)

    def search_config(self) -> SearchConfig:
        s = self.search
        return SearchConfig(
            k_candidates=s.k_candidates, n_act_widths=s.n_act_widths, n_act_depths=s.n_act_depths,
            n_intervals=s.n_intervals, samples_per_interval=s.samples_per_interval,
            top_intervals=s.top_intervals, verify_repeats=s.verify_repeats,
            master_seed=self.seed, parallelism=self.parallelism,
        )

    def override(self, **values) -> "ExperimentConfig":
        """Apply non-``None`` flag values; dotted keys address sections (``train.epochs``)."""
        cfg = replace(self, train=replace(self.train), search=replace(self.search), preexp=replace(self.preexp))
        for key, value in values.items():
            if value is None:
                continue
            if "." in key:
                section, name = key.split(".", 1)
                setattr(getattr(cfg, section), name, value)
            else:
                setattr(cfg, key, value)
        return cfg


_SECTIONS = {"train": TrainSection, "search": SearchSection, "preexp": PreexpSection}
_TOP = {f.name: f for f in fields(ExperimentConfig) if f.name not in _SECTIONS}


def _coerce(kind, raw: str, where: str):
    kind = {"int": int, "float": float, "str": str, "str | None": str}.get(kind, kind)
    try:
        return kind(raw)
    except (TypeError, ValueError):
        raise ConfigError(f"{where}: cannot parse {raw!r}") from None


def load_config(path) -> ExperimentConfig:
    """Parse an experiment file; unknown sections or keys raise :class:`ConfigError`."""
    parser = configparser.ConfigParser(interpolation=None)
    try:
        with open(path, encoding="utf-8") as fh:
            parser.read_file(fh)
    except (OSError, configparser.Error) as exc:
        raise ConfigError(f"{path}: {exc}") from None
    cfg = ExperimentConfig()
    for section in parser.sections():
        if section == "experiment":
            target, known = cfg, _TOP
        elif section in _SECTIONS:
            target = getattr(cfg, section)
            known = {f.name: f for f in fields(_SECTIONS[section])}
        else:
            raise ConfigError(f"{path}: unknown section [{section}]")
        for key, raw in parser.items(section):
            if key not in known:
                raise ConfigError(f"{path}: unknown key {key!r} in [{section}]")
            setattr(target, key, _coerce(known[key].type, raw, f"[{section}] {key}"))
    return cfg


def parse_list(text: str, kind=str) -> list:
    return [kind(item.strip()) for item in str(text).split(",") if item.strip()]


def parse_structures(text: str) -> list[tuple[int, int]]:
    out = []
    for item in parse_list(text):
        try:
            w, d = item.lower().split("x")
            out.append((int(w), int(d)))
        except ValueError:
            raise ConfigError(f"structure {item!r} is not of the form WIDTHxDEPTH") from None
    return out
