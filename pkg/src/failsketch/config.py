"""Run configuration: flat key=value files, presets, env and flag overrides.

Precedence, lowest to highest: built-in defaults, preset, config file,
FAILSKETCH_* environment variables, command-line flags.  Unknown keys
are rejected rather than ignored.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, fields

from .bitmap import BitmapParams
from .hashing import HashConfig, ParameterError, mix64
from .presets import PRESETS
from .registers import RegisterParams
from .traffic import PopulationSpec

ENV_PREFIX = "FAILSKETCH_"

SKETCH_CHOICES = ("bitmap", "dsra", "both")


class ConfigError(ValueError):
    """Configuration file or overrides are invalid."""


@dataclass
class RunConfig:
    """Everything one simulation run needs."""

    # population
    normal_count: int = 5_000
    worm_count: int = 10
    normal_mean_rate: float = 5.0
    worm_mean_rate: float = 600.0
    ack_prob_low: float = 0.8
    ack_prob_high: float = 1.0
    duplicate_factor: float = 0.0
    rate_draw: str = "per-host"
    normal_rate_model: str = "exponential"
    worm_rate_model: str = "exponential"
    # sketch selection and sizing (sizes are per direction)
    sketch: str = "bitmap"
    bitmap_bits: int = 200_000
    bitmap_logical: int = 300
    register_count: int = 100_000
    register_virtual: int = 512
    reg_width: int = 5
    rank_bits: int = 32
    # schedule and policy
    period_seconds: float = 60.0
    periods: int = 1
    threshold_per_min: float = 60.0
    limiter_capacity: float = 6.0
    limiter_refill: float = 6.0
    seed: int = 0

    def __post_init__(self) -> None:
        if self.sketch not in SKETCH_CHOICES:
            raise ConfigError(f"sketch must be one of {SKETCH_CHOICES}, got {self.sketch!r}")
        if self.periods < 0:
            raise ConfigError("periods must be >= 0")
        if self.period_seconds <= 0:
            raise ConfigError("period_seconds must be > 0")
        if self.threshold_per_min < 0:
            raise ConfigError("threshold_per_min must be >= 0")

    # -- derived pieces ----------------------------------------------------

    def population_spec(self) -> PopulationSpec:
        return PopulationSpec(
            normal_count=self.normal_count,
            worm_count=self.worm_count,
            normal_mean_rate=self.normal_mean_rate,
            worm_mean_rate=self.worm_mean_rate,
            ack_prob_low=self.ack_prob_low,
            ack_prob_high=self.ack_prob_high,
            duplicate_factor=self.duplicate_factor,
            rng_seed=self.seed,
            rate_draw=self.rate_draw,
            normal_rate_model=self.normal_rate_model,
            worm_rate_model=self.worm_rate_model,
        )

    def hash_config(self) -> HashConfig:
        base = mix64(self.seed ^ 0xF5EED5)
        r_len = max(self.bitmap_logical, self.register_virtual, 1)
        return HashConfig(
            index_seed=mix64(base + 1),
            dst_seed=mix64(base + 2),
            key=mix64(base + 3),
            r_seed=mix64(base + 4),
            r_len=r_len,
        )

    def bitmap_params(self) -> BitmapParams:
        return BitmapParams(
            self.bitmap_bits, self.bitmap_bits,
            self.bitmap_logical, self.bitmap_logical,
            self.hash_config(),
        )

    def register_params(self) -> RegisterParams:
        return RegisterParams(
            self.register_count, self.register_count,
            self.register_virtual, self.register_virtual,
            self.reg_width, self.rank_bits, self.hash_config(),
        )

    def sketch_kinds(self) -> list[str]:
        return ["bitmap", "dsra"] if self.sketch == "both" else [self.sketch]

    @property
    def threshold_per_period(self) -> float:
        return self.threshold_per_min * self.period_seconds / 60.0


_FIELD_TYPES = {f.name: f.type for f in fields(RunConfig)}


def _coerce(key: str, value: str):
    kind = _FIELD_TYPES[key]
    try:
        if kind == "int":
            return int(value)
        if kind == "float":
            return float(value)
        return value
    except ValueError as err:
        raise ConfigError(f"bad value for {key}: {value!r} ({err})") from None


def parse_config_text(text: str) -> dict:
    """Parse `key = value` lines; '#' starts a comment."""
    out: dict = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        if key not in _FIELD_TYPES:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        out[key] = _coerce(key, value)
    return out


def env_overrides(environ=None) -> dict:
    env = os.environ if environ is None else environ
    out: dict = {}
    for name, value in env.items():
        if not name.startswith(ENV_PREFIX):
            continue
        key = name[len(ENV_PREFIX) :].lower()
        if key not in _FIELD_TYPES:
            raise ConfigError(f"unknown config key in environment: {name}")
        out[key] = _coerce(key, value)
    return out


def build_config(
    preset: str | None = None,
    config_path: str | None = None,
    overrides: dict | None = None,
    environ=None,
) -> RunConfig:
    """Merge defaults, preset, file, environment and flag overrides."""
    merged: dict = {}
    if preset is not None:
        if preset not in PRESETS:
            raise ConfigError(
                f"unknown preset {preset!r}; available: {', '.join(sorted(PRESETS))}"
            )
        merged.update(PRESETS[preset])
    if config_path is not None:
        try:
            with open(config_path, "r", encoding="utf-8") as fh:
                merged.update(parse_config_text(fh.read()))
        except OSError as err:
            raise ConfigError(f"cannot read config file: {err}") from None
    merged.update(env_overrides(environ))
    for key, value in (overrides or {}).items():
        if value is None:
            continue
        if key not in _FIELD_TYPES:
            raise ConfigError(f"unknown config key {key!r}")
        merged[key] = value
    try:
        return RunConfig(**merged)
    except (ParameterError, TypeError) as err:
        raise ConfigError(str(err)) from None
