"""Run configuration: the training hyper-parameters plus experiment settings.

JSON config files are flat objects keyed by the field names below (``I``,
``rs``, ``ep``, ``E``, ``bs``, ``T_prime``, ``lr``, ``m``, ``d``, ``c``,
``n``, ``u`` and the experiment fields).
"""

from __future__ import annotations

import hashlib
import json
import zlib
from dataclasses import asdict, dataclass, fields, replace
from pathlib import Path
from typing import Any, Optional

import numpy as np

from .games import Gobang, Rules, get_rules
from .network import TrainConfig
from .search import Kind, SearchConfig

MODES = ("fixed", "adaptive", "baseline")
WEIGHT_POLICIES = ("one-over-i", "half")


class ConfigError(ValueError):
    """Invalid configuration; the message names the offending field."""


@dataclass(frozen=True)
class RunConfig:
    # training hyper-parameters
    I: int = 100
    rs: int = 20
    ep: int = 10
    E: int = 50
    bs: int = 64
    T_prime: int = 15
    lr: float = 0.005
    m: int = 100
    d: float = 0.3
    c: float = 1.0
    n: int = 40
    u: float = 0.6
    # experiment settings
    game: str = "connect_four"
    kind: str = "wrora"
    mode: str = "adaptive"
    I_prime: int = 5
    weight_policy: str = "one-over-i"
    seed: int = 0
    out: str = "runs/default"
    repetitions: int = 100
    # implementation knobs
    equivalence: Optional[float] = None
    channels: int = 32
    hidden: int = 256
    optimizer: str = "sgd"
    ply_cap: int = 200
    gobang_win_length: int = 5
    reuse_tree: bool = False

    def __post_init__(self):
        self.validate()

    def validate(self) -> None:
        def need(ok: bool, name: str, msg: str):
            if not ok:
                raise ConfigError(f"{name}: {msg} (got {getattr(self, name)!r})")

        for name in ("I", "rs", "ep", "E", "bs", "m", "n", "channels", "hidden", "ply_cap"):
            need(isinstance(getattr(self, name), int) and getattr(self, name) >= 1, name, "must be an integer >= 1")
        need(isinstance(self.T_prime, int) and self.T_prime >= 0, "T_prime", "must be an integer >= 0")
        need(self.E % 2 == 0, "E", "must be even so episodes split into two halves")
        need(self.lr > 0, "lr", "must be > 0")
        need(0 <= self.d < 1, "d", "must lie in [0, 1)")
        need(self.c > 0, "c", "must be > 0")
        need(0.5 < self.u <= 1, "u", "must lie in (0.5, 1]")
        need(self.game in ("connect_four", "othello", "gobang"), "game", "unknown game")
        need(self.kind in [k.value for k in Kind], "kind", "unknown enhancement kind")
        need(self.mode in MODES, "mode", f"must be one of {MODES}")
        need(self.weight_policy in WEIGHT_POLICIES, "weight_policy", f"must be one of {WEIGHT_POLICIES}")
        need(isinstance(self.I_prime, int) and self.I_prime >= 0, "I_prime", "must be an integer >= 0")
        if self.mode == "fixed":
            need(self.I_prime < self.I, "I_prime", f"must be smaller than I={self.I}")
        need(self.repetitions >= 1, "repetitions", "must be >= 1")
        need(self.equivalence is None or self.equivalence > 0, "equivalence", "must be > 0")
        need(self.optimizer in ("sgd", "adam"), "optimizer", "must be 'sgd' or 'adam'")
        need(self.gobang_win_length in (4, 5), "gobang_win_length", "must be 4 or 5")

    @property
    def rules(self) -> Rules:
        if self.game == "gobang":
            return Gobang(win_length=self.gobang_win_length)
        return get_rules(self.game)

    def search_config(self, kind, weight: float = 0.5) -> SearchConfig:
        return SearchConfig(
            m=self.m, c=self.c, equivalence=self.equivalence, kind=Kind(kind),
            weight=weight, seed=self.seed, reuse_tree=self.reuse_tree,
        )

    def train_config(self, seed: int) -> TrainConfig:
        return TrainConfig(ep=self.ep, bs=self.bs, lr=self.lr, d=self.d, optimizer=self.optimizer, seed=seed)

    def to_dict(self) -> dict:
        return asdict(self)

    def digest(self) -> str:
        """Hash of the settings that determine a run's results."""
        d = self.to_dict()
        d.pop("out")
        return hashlib.sha256(json.dumps(d, sort_keys=True).encode()).hexdigest()[:16]

    def overrides(self) -> dict:
        """Fields that differ from the defaults."""
        base = RunConfig()
        return {f.name: getattr(self, f.name) for f in fields(self) if getattr(self, f.name) != getattr(base, f.name)}


FIELD_TYPES = {f.name: f.type for f in fields(RunConfig)}

PRESETS: dict[str, dict[str, Any]] = {
    # untrained-network pairwise comparison: weight 1/2, pure argmax moves
    "table2": {"weight_policy": "half", "T_prime": 0, "repetitions": 100},
    # fixed warm-start length tuning on Connect Four
    "fig1": {"game": "connect_four", "mode": "fixed", "weight_policy": "one-over-i"},
    # adaptive switch vs fixed I'=5
    "fig3": {"mode": "adaptive", "I_prime": 5, "weight_policy": "one-over-i"},
}


def _coerce(name: str, value: Any) -> Any:
    if name not in FIELD_TYPES:
        raise ConfigError(f"{name}: unknown configuration field")
    default = getattr(RunConfig(), name)
    kind = FIELD_TYPES[name]
    try:
        if value is None:
            return None
        if name == "equivalence":
            return float(value)
        if isinstance(default, bool) or kind == "bool":
            if isinstance(value, str):
                if value.lower() in ("1", "true", "yes"):
                    return True
                if value.lower() in ("0", "false", "no"):
                    return False
                raise ValueError(value)
            return bool(value)
        if isinstance(default, int):
            if isinstance(value, float) and not value.is_integer():
                raise ValueError(value)
            return int(value)
        if isinstance(default, float):
            return float(value)
        return str(value)
    except (TypeError, ValueError):
        raise ConfigError(f"{name}: cannot interpret {value!r} as {type(default).__name__}") from None


def load_config(path=None, preset: Optional[str] = None, **overrides) -> RunConfig:
    """Defaults <- preset <- JSON file <- explicit overrides (``None`` values are skipped)."""
    values: dict[str, Any] = {}
    if preset is not None:
        if preset not in PRESETS:
            raise ConfigError(f"preset: unknown preset {preset!r}; choose from {sorted(PRESETS)}")
        values.update(PRESETS[preset])
    if path is not None:
        try:
            doc = json.loads(Path(path).read_text())
        except FileNotFoundError:
            raise ConfigError(f"config: file {path} not found") from None
        except json.JSONDecodeError as e:
            raise ConfigError(f"config: {path} is not valid JSON: {e}") from None
        if not isinstance(doc, dict):
            raise ConfigError("config: top level must be a JSON object")
        values.update(doc)
    values.update({k: v for k, v in overrides.items() if v is not None})
    return RunConfig(**{k: _coerce(k, v) for k, v in values.items()})


def derive_seed(master: int, *parts) -> int:
    """Deterministic 63-bit seed for a named sub-stream of ``master``."""
    key = [int(p) if isinstance(p, (int, np.integer)) else zlib.crc32(str(p).encode()) for p in parts]
    return int(np.random.SeedSequence([int(master) % (1 << 64), *key]).generate_state(2, np.uint64)[0] >> 1)
