"""JSON run configuration shared by every CLI command."""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field

from .models import InvalidModel, Model, model_from_dict

COMMANDS = ("lyapunov", "alpha", "exit", "audit", "sweep-lr", "reproduce")
REGIMES = ("contractive", "explosive")
U64 = (1 << 64) - 1


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    command: str
    model: dict | None = None
    seed: int = 0
    replicas: int = 1000
    n_steps: int = 64
    R_grid: list | None = None
    cap: int | None = None          # None: default cap policy
    regime: str | None = None
    x0: list | None = None
    out: str = "out"
    params: dict = field(default_factory=dict)

    def validate(self) -> "RunConfig":
        if self.command not in COMMANDS:
            raise ConfigError(f"unknown command {self.command!r}")
        if not isinstance(self.seed, int) or not 0 <= self.seed <= U64:
            raise ConfigError("seed must be an unsigned 64-bit integer")
        if not isinstance(self.replicas, int) or self.replicas < 2:
            raise ConfigError("replicas must be an integer >= 2")
        if not isinstance(self.n_steps, int) or self.n_steps < 1:
            raise ConfigError("n_steps must be a positive integer")
        if self.regime is not None and self.regime not in REGIMES:
            raise ConfigError(f"regime must be one of {REGIMES}")
        if self.cap is not None and (not isinstance(self.cap, int) or self.cap < 1):
            raise ConfigError("cap must be a positive integer or null")
        if self.R_grid is not None:
            g = [float(r) for r in self.R_grid]
            if not g or any(r <= 0 for r in g) or any(b <= a for a, b in zip(g, g[1:])):
                raise ConfigError("R_grid must be positive and strictly increasing")
        if self.command in ("lyapunov", "alpha", "exit", "audit") and self.model is None:
            raise ConfigError(f"command {self.command!r} needs a model")
        if self.command in ("exit", "audit") and self.regime is None:
            raise ConfigError(f"command {self.command!r} needs a regime")
        if self.command == "exit" and not self.R_grid:
            raise ConfigError("exit needs R_grid")
        if self.model is not None:
            self.build_model()
        return self

    def build_model(self) -> Model:
        try:
            return model_from_dict(self.model)
        except (InvalidModel, KeyError, TypeError, ValueError) as e:
            raise ConfigError(f"invalid model: {e}") from e

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    @classmethod
    def from_dict(cls, d: dict) -> "RunConfig":
        if not isinstance(d, dict):
            raise ConfigError("config must be a JSON object")
        known = set(cls.__dataclass_fields__)
        extra = set(d) - known
        if extra:
            raise ConfigError(f"unknown config keys: {sorted(extra)}")
        if "command" not in d:
            raise ConfigError("config needs a command")
        return cls(**d)

    @classmethod
    def from_json(cls, text: str) -> "RunConfig":
        try:
            d = json.loads(text)
        except json.JSONDecodeError as e:
            raise ConfigError(f"malformed JSON: {e}") from e
        return cls.from_dict(d)


def load(path) -> RunConfig:
    try:
        with open(path, encoding="utf-8") as f:
            return RunConfig.from_json(f.read())
    except OSError as e:
        raise ConfigError(f"cannot read config: {e}") from e
