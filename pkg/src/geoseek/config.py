"""Config-file loading shared by the CLI.

The file mirrors the hyperparameter table symbol for symbol (a1..a3, r,
tau, alpha1..alpha3, delta1, delta2, w1..w3, G, t, beta), in TOML or JSON
by file extension, flat keys. Anything omitted keeps its built-in default;
unknown keys are rejected so typos cannot silently change a run. The Earth
radius r is a library constant: a config may state it, but only with the
correct value.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

from .geo import EARTH_RADIUS_KM
from .grpo import DEFAULT_GROUP_SIZE, DEFAULT_KL_BETA, DEFAULT_TEMPERATURE
from .rewards import RewardConfig

try:
    import tomllib as _toml
except ImportError:  # Python < 3.11
    import tomli as _toml


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class GrpoParams:
    group_size: int = DEFAULT_GROUP_SIZE
    temperature: float = DEFAULT_TEMPERATURE
    kl_beta: float = DEFAULT_KL_BETA

    def __post_init__(self) -> None:
        if self.group_size < 1:
            raise ConfigError(f"G must be >= 1, got {self.group_size}")
        if self.temperature <= 0:
            raise ConfigError(f"t must be positive, got {self.temperature}")
        if self.kl_beta < 0:
            raise ConfigError(f"beta must be >= 0, got {self.kl_beta}")


_KNOWN_KEYS = {
    "a1", "a2", "a3", "r", "tau",
    "alpha1", "alpha2", "alpha3", "delta1", "delta2",
    "w1", "w2", "w3", "G", "t", "beta",
    "lambda_pen", "mu_pen", "length_unit",
}


def _read_file(path: Path) -> dict:
    if path.suffix == ".toml":
        with open(path, "rb") as fh:
            return _toml.load(fh)
    if path.suffix == ".json":
        with open(path, encoding="utf-8") as fh:
            return json.load(fh)
    raise ConfigError(f"unsupported config extension: {path.suffix} (use .toml or .json)")


def load_config(path) -> tuple[RewardConfig, GrpoParams]:
    """Parse a config file into reward and GRPO parameter sets."""
    path = Path(path)
    raw = _read_file(path)
    unknown = set(raw) - _KNOWN_KEYS
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    if "r" in raw and float(raw["r"]) != EARTH_RADIUS_KM:
        raise ConfigError(
            f"r is a fixed constant ({EARTH_RADIUS_KM} km); remove it or state it exactly"
        )

    base_reward = RewardConfig()

    def triple(prefix: str, default):
        return tuple(
            float(raw.get(f"{prefix}{i}", default[i - 1])) for i in (1, 2, 3)
        )

    try:
        reward = RewardConfig(
            tau=float(raw.get("tau", base_reward.tau)),
            alpha=triple("alpha", base_reward.alpha),
            delta=(
                float(raw.get("delta1", base_reward.delta[0])),
                float(raw.get("delta2", base_reward.delta[1])),
                None,
            ),
            w=triple("w", base_reward.w),
            a=triple("a", base_reward.a),
            lambda_pen=float(raw.get("lambda_pen", base_reward.lambda_pen)),
            mu_pen=float(raw.get("mu_pen", base_reward.mu_pen)),
            length_unit=str(raw.get("length_unit", base_reward.length_unit)),
        )
        grpo = GrpoParams(
            group_size=int(raw.get("G", DEFAULT_GROUP_SIZE)),
            temperature=float(raw.get("t", DEFAULT_TEMPERATURE)),
            kl_beta=float(raw.get("beta", DEFAULT_KL_BETA)),
        )
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    return reward, grpo


def defaults_banner(reward: RewardConfig, grpo: GrpoParams) -> str:
    """One audit line describing the effective configuration."""
    return (
        f"config: tau={reward.tau} alpha={reward.alpha} delta={reward.delta} "
        f"w={reward.w} a={reward.a} lambda_pen={reward.lambda_pen} "
        f"mu_pen={reward.mu_pen} length_unit={reward.length_unit} "
        f"G={grpo.group_size} t={grpo.temperature} beta={grpo.kl_beta} "
        f"r={EARTH_RADIUS_KM}"
    )
