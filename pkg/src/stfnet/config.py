"""Training configuration with strict JSON parsing."""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

from .cfe import TABLE1_PIPELINES, TABLE1_POOLS, DwCSConfig

ABLATIONS = ("tis", "lambda_mask", "tes", "lstm", "gtn")
DOMAIN_FEATURES = ("spatial", "common")


class ConfigError(ValueError):
    """Invalid configuration value or structure."""


@dataclass
class TrainConfig:
    batch_size: int = 2
    learning_rate: float = 1e-4
    epochs: int = 50
    n_windows: int = 20
    kd: int = 3
    ts: int = 125
    cheb_order: int = 3
    fs: int = 128
    fl: int = 64
    gt_channels: int = 5
    gt_layers: int = 2
    fg: int = 64
    lam: float = 0.5
    heads: int = 4
    seed: int = 0
    domain_feature: str = "spatial"
    ablations: list = field(default_factory=list)
    grl_coefficient: float = 1.0
    dropout: float = 0.5
    head_hidden: int = 64
    domain_hidden: int = 128
    bn_momentum: float = 0.1
    dtype: str = "float32"
    dwcs_pipelines: list = field(default_factory=lambda: [[list(s) for s in p] for p in TABLE1_PIPELINES])
    dwcs_pools: dict = field(default_factory=lambda: {str(k): v for k, v in TABLE1_POOLS.items()})
    window_len: int | None = None
    dataset: str | None = None
    adjacency: str | None = None
    layout: str | None = None
    adjacency_rule: str = "from_file"
    adjacency_k: int | None = None
    adjacency_tau: float | None = None
    out: str | None = None

    def dwcs(self):
        return DwCSConfig(kd=self.kd, pipelines=self.dwcs_pipelines, pools=self.dwcs_pools)

    def to_dict(self):
        return asdict(self)

    def replace(self, **changes):
        data = self.to_dict()
        data.update(changes)
        return parse_config(data)


POSITIVE_INTS = ("batch_size", "epochs", "n_windows", "kd", "ts", "fs", "fl", "gt_channels",
                 "gt_layers", "fg", "heads", "head_hidden", "domain_hidden")
OPTIONAL_PATHS = ("dataset", "adjacency", "layout", "out")


def _fail(key, msg):
    raise ConfigError(f"config.{key}: {msg}")


def _int(key, value, minimum=None):
    if isinstance(value, bool) or not isinstance(value, int):
        _fail(key, f"expected an integer, got {value!r}")
    if minimum is not None and value < minimum:
        _fail(key, f"must be >= {minimum}, got {value}")
    return value


def _float(key, value):
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        _fail(key, f"expected a number, got {value!r}")
    return float(value)


def _validate(cfg):
    for key in POSITIVE_INTS:
        _int(key, getattr(cfg, key), 1)
    _int("seed", cfg.seed, 0)
    _int("cheb_order", cfg.cheb_order, 0)
    if cfg.n_windows < 2:
        _fail("n_windows", "at least two time windows are required")
    if cfg.batch_size % 2:
        _fail("batch_size", "must be even (half source, half target subjects per step)")
    cfg.learning_rate = _float("learning_rate", cfg.learning_rate)
    if cfg.learning_rate < 0:
        _fail("learning_rate", "must be >= 0")
    cfg.lam = _float("lam", cfg.lam)
    if not 0 < cfg.lam <= 1:
        _fail("lam", f"must lie in (0, 1], got {cfg.lam}")
    cfg.grl_coefficient = _float("grl_coefficient", cfg.grl_coefficient)
    if cfg.grl_coefficient < 0:
        _fail("grl_coefficient", "must be >= 0")
    cfg.dropout = _float("dropout", cfg.dropout)
    if not 0 <= cfg.dropout < 1:
        _fail("dropout", "must lie in [0, 1)")
    cfg.bn_momentum = _float("bn_momentum", cfg.bn_momentum)
    if not 0 < cfg.bn_momentum <= 1:
        _fail("bn_momentum", "must lie in (0, 1]")
    if cfg.dtype not in ("float32", "float64"):
        _fail("dtype", "must be 'float32' or 'float64'")
    if cfg.domain_feature not in DOMAIN_FEATURES:
        _fail("domain_feature", f"must be one of {DOMAIN_FEATURES}")
    if not isinstance(cfg.ablations, list):
        _fail("ablations", "expected a list of names")
    for i, name in enumerate(cfg.ablations):
        if name not in ABLATIONS:
            _fail(f"ablations[{i}]", f"unknown ablation {name!r}; choose from {ABLATIONS}")
    check_ablations(cfg.ablations)
    cfg.ablations = sorted(set(cfg.ablations), key=ABLATIONS.index)

    if not isinstance(cfg.dwcs_pipelines, list) or not cfg.dwcs_pipelines:
        _fail("dwcs_pipelines", "expected a non-empty list of stage lists")
    for p, pipe in enumerate(cfg.dwcs_pipelines):
        if not isinstance(pipe, list) or not pipe:
            _fail(f"dwcs_pipelines[{p}]", "expected a non-empty list of [ks, stride, padding]")
        for s, stage in enumerate(pipe):
            where = f"dwcs_pipelines[{p}][{s}]"
            if not isinstance(stage, list) or len(stage) != 3:
                _fail(where, "expected [ks, stride, padding]")
            _int(where + "[0]", stage[0], 1)
            _int(where + "[1]", stage[1], 1)
            if stage[2] not in ("valid", "same"):
                _fail(where + "[2]", "padding must be 'valid' or 'same'")
    if not isinstance(cfg.dwcs_pools, dict):
        _fail("dwcs_pools", "expected an object mapping stage index to pool window")
    for k, v in cfg.dwcs_pools.items():
        if not str(k).isdigit():
            _fail(f"dwcs_pools.{k}", "keys must be stage indices")
        _int(f"dwcs_pools.{k}", v, 1)
    cfg.dwcs_pools = {str(k): v for k, v in cfg.dwcs_pools.items()}

    if cfg.window_len is not None:
        _int("window_len", cfg.window_len, 1)
    for key in OPTIONAL_PATHS:
        value = getattr(cfg, key)
        if value is not None and not isinstance(value, str):
            _fail(key, f"expected a path string, got {value!r}")
    if cfg.adjacency_rule not in ("from_file", "threshold", "k_nearest"):
        _fail("adjacency_rule", "must be 'from_file', 'threshold' or 'k_nearest'")
    if cfg.adjacency_k is not None:
        _int("adjacency_k", cfg.adjacency_k, 1)
    if cfg.adjacency_tau is not None:
        cfg.adjacency_tau = _float("adjacency_tau", cfg.adjacency_tau)
    return cfg


def check_ablations(names):
    names = set(names)
    if "tes" in names and names & {"lstm", "gtn"}:
        raise ConfigError("config.ablations: 'tes' already removes the LSTM and GTN branches; "
                          f"{sorted(names & {'lstm', 'gtn'})} contradicts it")
    if {"lstm", "gtn"} <= names:
        raise ConfigError("config.ablations: removing both 'lstm' and 'gtn' leaves no temporal branch; use 'tes'")


def parse_config(source=None):
    """Build a validated TrainConfig from a JSON path, a dict, or nothing (all defaults).

    Absent keys take the default hyperparameters; unknown keys are rejected.
    """
    if source is None:
        data = {}
    elif isinstance(source, dict):
        data = dict(source)
    else:
        path = Path(source)
        try:
            data = json.loads(path.read_text())
        except FileNotFoundError as exc:
            raise ConfigError(f"config file not found: {path}") from exc
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: invalid JSON ({exc})") from exc
    if not isinstance(data, dict):
        raise ConfigError("config: top level must be a JSON object")
    known = {f.name for f in fields(TrainConfig)}
    unknown = sorted(set(data) - known)
    if unknown:
        raise ConfigError(f"config: unsupported keys {unknown}")
    return _validate(TrainConfig(**data))
