"""Run configuration: one human-editable YAML tree, strictly validated.

The file has five blocks (env, algo, critic, validator) plus scalars
(seed, output_dir, checkpoint_interval). Unknown keys anywhere are errors
so a typo never silently falls back to a default. Environment variables
override nothing.
"""

import inspect
from dataclasses import dataclass

import yaml

from .envs import ENV_REGISTRY, make_env
from .envs.path_tracking import Path, straight_then_arc, weaving_path
from .training import PolycConfig

PATH_PRESETS = {
    "straight_then_arc": straight_then_arc,
    "weaving": weaving_path,
}

# critic block key -> PolycConfig field
_CRITIC_FIELDS = {
    "batch_size": "critic_batch_size",
    "minibatches": "critic_minibatches",
    "learning_rate": "critic_lr",
    "lie_resample": "lie_resample",
    "tau": "tau",
}

VALIDATOR_DEFAULTS = {
    "a_const": 0.01,
    "epsilon_volume": None,
    "margin": None,
    "max_cells": 1_000_000,
    "levels": 20,
    "mode": "full-grid",
    "slice_axes": (0, 1),
    "mc_samples": 100_000,
    "box_scale": 1.0,
}

_MODES = ("full-grid", "slice", "monte-carlo")


class ConfigError(ValueError):
    pass


def _reject_unknown(block, allowed, where):
    unknown = sorted(set(block) - set(allowed))
    if unknown:
        raise ConfigError(f"unknown key(s) in {where}: {', '.join(unknown)}")


@dataclass
class RunConfig:
    env_name: str
    env_params: dict
    algo: PolycConfig
    validator: dict
    seed: int = 0
    output_dir: str = "runs/out"

    def to_dict(self):
        return {
            "env": {"name": self.env_name, **self.env_params},
            "algo": self.algo.to_dict(),
            "validator": dict(self.validator),
            "seed": self.seed,
            "output_dir": self.output_dir,
        }

    @classmethod
    def from_dict(cls, d):
        env = dict(d["env"])
        name = env.pop("name")
        validator = dict(VALIDATOR_DEFAULTS)
        validator.update(d.get("validator", {}))
        validator["slice_axes"] = tuple(validator["slice_axes"])
        return cls(env_name=name, env_params=env,
                   algo=PolycConfig.from_dict(d["algo"]),
                   validator=validator,
                   seed=int(d.get("seed", 0)),
                   output_dir=d.get("output_dir", "runs/out"))

    def build_env(self):
        return build_env(self.env_name, self.env_params)


def build_env(name, params):
    """Instantiate a registry environment from plain-YAML parameter values.

    path_tracking's `path` accepts a preset name or a list of
    [arc_length, curvature] segments.
    """
    params = dict(params)
    if name == "path_tracking" and "path" in params:
        params["path"] = resolve_path(params["path"])
    return make_env(name, **params)


def resolve_path(spec):
    if isinstance(spec, Path):
        return spec
    if isinstance(spec, str):
        if spec not in PATH_PRESETS:
            raise ConfigError(
                f"unknown path preset {spec!r}; choices: {sorted(PATH_PRESETS)}")
        return PATH_PRESETS[spec]()
    return Path(spec)


def _check_env_block(block):
    if "name" not in block:
        raise ConfigError("env block needs a 'name'")
    name = block["name"]
    if name not in ENV_REGISTRY:
        raise ConfigError(
            f"unknown environment {name!r}; choices: {sorted(ENV_REGISTRY)}")
    sig = inspect.signature(ENV_REGISTRY[name].__init__)
    allowed = [p for p in sig.parameters if p != "self"]
    _reject_unknown({k: v for k, v in block.items() if k != "name"},
                    allowed, f"env block ({name})")


def _check_validator_block(block):
    _reject_unknown(block, VALIDATOR_DEFAULTS, "validator block")
    merged = dict(VALIDATOR_DEFAULTS)
    merged.update(block)
    if merged["mode"] not in _MODES:
        raise ConfigError(
            f"validator mode must be one of {_MODES}, got {merged['mode']!r}")
    if merged["a_const"] <= 0:
        raise ConfigError("validator a_const must be positive")
    if merged["max_cells"] < 1:
        raise ConfigError("validator max_cells must be positive")
    if merged["mc_samples"] < 1000:
        raise ConfigError("validator mc_samples must be at least 1000")
    axes = merged["slice_axes"]
    if len(axes) != 2 or axes[0] == axes[1]:
        raise ConfigError("validator slice_axes must name two distinct dims")
    if not 0 < merged["box_scale"] <= 1:
        raise ConfigError("validator box_scale must be in (0, 1]")


def loads_run_config(text):
    raw = yaml.safe_load(text)
    if not isinstance(raw, dict):
        raise ConfigError("config root must be a mapping")
    _reject_unknown(raw, ("env", "algo", "critic", "validator", "seed",
                          "output_dir", "checkpoint_interval"), "config root")
    if "env" not in raw:
        raise ConfigError("config needs an env block")

    _check_env_block(raw["env"])

    algo_fields = set(PolycConfig().__dict__)
    critic_mapped = set(_CRITIC_FIELDS.values())
    algo_block = dict(raw.get("algo", {}))
    _reject_unknown(algo_block, algo_fields - critic_mapped, "algo block")

    critic_block = dict(raw.get("critic", {}))
    _reject_unknown(critic_block, _CRITIC_FIELDS, "critic block")
    for key, dest in _CRITIC_FIELDS.items():
        if key in critic_block:
            algo_block[dest] = critic_block[key]
    if "checkpoint_interval" in raw:
        algo_block["checkpoint_interval"] = raw["checkpoint_interval"]

    validator_block = dict(raw.get("validator", {}))
    _check_validator_block(validator_block)

    seed = raw.get("seed", 0)
    if not isinstance(seed, int) or seed < 0:
        raise ConfigError("seed must be a nonnegative integer")

    try:
        algo = PolycConfig(**algo_block)
    except (TypeError, ValueError) as err:
        raise ConfigError(f"bad algo/critic settings: {err}") from err

    cfg = RunConfig.from_dict({
        "env": raw["env"],
        "algo": algo.to_dict(),
        "validator": validator_block,
        "seed": seed,
        "output_dir": raw.get("output_dir", "runs/out"),
    })
    # surface bad env parameter values (not just names) at load time
    try:
        cfg.build_env()
    except (TypeError, ValueError) as err:
        raise ConfigError(f"bad env parameters: {err}") from err
    return cfg


def load_run_config(path):
    try:
        with open(path) as fh:
            text = fh.read()
    except OSError as err:
        raise ConfigError(f"cannot read config {path}: {err}") from err
    try:
        return loads_run_config(text)
    except yaml.YAMLError as err:
        raise ConfigError(f"invalid YAML in {path}: {err}") from err
