"""Run configuration: INI sections mapping onto the component dataclasses.

Every field has a default, so an empty file reproduces the reference setup.
"""
from __future__ import annotations

import configparser
import dataclasses
import re
from dataclasses import dataclass, field

from .agent import AgentConfig, NetworkConfig
from .environment import WorldConfig
from .kinematics import RobotParams
from .replay import HERConfig


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class ReplayConfig:
    capacity: int = 1_000_000
    n_sampled_goal: int = 16
    goal_selection_strategy: str = "future"
    her: bool = True

    def her_config(self) -> HERConfig:
        return HERConfig(self.n_sampled_goal, self.goal_selection_strategy, self.her)


@dataclass(frozen=True)
class RunSettings:
    out_dir: str = "runs/dasmr"
    log_every_episodes: int = 10
    rolling_window: int = 100
    checkpoint_every: int = 10_000
    eval_episodes: int = 100


@dataclass(frozen=True)
class RunConfig:
    world: WorldConfig = field(default_factory=WorldConfig)
    robot: RobotParams = field(default_factory=RobotParams)
    replay: ReplayConfig = field(default_factory=ReplayConfig)
    agent: AgentConfig = field(default_factory=AgentConfig)
    network: NetworkConfig = field(default_factory=NetworkConfig)
    run: RunSettings = field(default_factory=RunSettings)

    def __post_init__(self):
        for name in ("actor_hidden", "critic_hidden"):
            if len(getattr(self.network, name)) != 2:
                raise ConfigError(f"network.{name} must list exactly 2 hidden layer sizes")

    def with_overrides(self, **sections) -> "RunConfig":
        """``cfg.with_overrides(agent={"total_steps": 200})``"""
        updated = {}
        for sec, values in sections.items():
            current = getattr(self, sec)
            for key in values:
                if key not in {f.name for f in dataclasses.fields(current)}:
                    raise ConfigError(f"unknown key '{key}' in section [{sec}]")
            updated[sec] = dataclasses.replace(current, **values)
        return dataclasses.replace(self, **updated)


SECTIONS = tuple(f.name for f in dataclasses.fields(RunConfig))


def _format(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, tuple):
        return ", ".join(_format(v) for v in value)
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _parse(text: str, default):
    text = text.strip()
    if isinstance(default, bool):
        low = text.lower()
        if low in ("true", "yes", "on", "1"):
            return True
        if low in ("false", "no", "off", "0"):
            return False
        raise ValueError(f"expected a boolean, got {text!r}")
    if isinstance(default, int):
        return int(text.replace("_", ""))
    if isinstance(default, float):
        return float(text.replace("_", ""))
    if isinstance(default, tuple):
        parts = [p for p in re.split(r"[,\s]+", text.strip("()[] ")) if p]
        elem = default[0] if default else 0.0
        return tuple(_parse(p, elem) for p in parts)
    return text


def _line_of(text: str, section: str, key: str = None) -> int:
    current = None
    for i, line in enumerate(text.splitlines(), start=1):
        s = line.strip()
        m = re.match(r"\[(.+)\]$", s)
        if m:
            current = m.group(1).strip()
            if key is None and current == section:
                return i
        elif key is not None and current == section and re.match(rf"{re.escape(key)}\s*[=:]", s):
            return i
    return 0


def parse_config(text: str, source: str = "<config>") -> RunConfig:
    parser = configparser.ConfigParser(interpolation=None)
    parser.optionxform = str
    try:
        parser.read_string(text, source=source)
    except configparser.Error as exc:
        raise ConfigError(f"{source}: {exc}") from exc
    sections = {}
    defaults = RunConfig()
    for sec in parser.sections():
        if sec not in SECTIONS:
            raise ConfigError(f"{source}:{_line_of(text, sec)}: unknown section [{sec}]")
        base = getattr(defaults, sec)
        known = {f.name: getattr(base, f.name) for f in dataclasses.fields(base)}
        values = {}
        for key, raw in parser.items(sec):
            if key not in known:
                raise ConfigError(f"{source}:{_line_of(text, sec, key)}: unknown key '{key}' in section [{sec}]")
            try:
                values[key] = _parse(raw, known[key])
            except ValueError as exc:
                raise ConfigError(f"{source}:{_line_of(text, sec, key)}: bad value for {sec}.{key}: {exc}") from exc
        try:
            sections[sec] = dataclasses.replace(base, **values)
        except ValueError as exc:
            raise ConfigError(f"{source}: section [{sec}]: {exc}") from exc
    return RunConfig(**sections)


def load_config(path) -> RunConfig:
    with open(path) as f:
        return parse_config(f.read(), source=str(path))


def dump_config(cfg: RunConfig) -> str:
    lines = []
    for sec in SECTIONS:
        lines.append(f"[{sec}]")
        obj = getattr(cfg, sec)
        for f in dataclasses.fields(obj):
            lines.append(f"{f.name} = {_format(getattr(obj, f.name))}")
        lines.append("")
    return "\n".join(lines)


def parse_override(item: str):
    """``section.key=value`` -> (section, key, raw value)."""
    m = re.match(r"^([a-z_]+)\.([a-z_0-9]+)=(.*)$", item)
    if not m:
        raise ConfigError(f"override must look like section.key=value, got {item!r}")
    return m.group(1), m.group(2), m.group(3)


def apply_overrides(cfg: RunConfig, items) -> RunConfig:
    grouped: dict = {}
    for item in items:
        sec, key, raw = parse_override(item)
        if sec not in SECTIONS:
            raise ConfigError(f"unknown section [{sec}] in override {item!r}")
        base = getattr(cfg, sec)
        if key not in {f.name for f in dataclasses.fields(base)}:
            raise ConfigError(f"unknown key '{key}' in section [{sec}]")
        grouped.setdefault(sec, {})[key] = _parse(raw, getattr(base, key))
    return cfg.with_overrides(**grouped)
