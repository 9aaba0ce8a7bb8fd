"""Unified run configuration for the command-line pipeline.

A configuration document is either JSON or flat ``dotted.key=value`` lines;
unknown keys are rejected by name.  Every key can also be supplied as a
same-named command-line flag, and the MULTISHAPE_SEED environment variable
overrides the generator seed last.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field

from .align import GridSearchConfig
from .errors import ConfigError
from .evolution import EvolutionConfig
from .importance import LearningConfig
from .synthgen import GeneratorConfig

SEED_ENV_VAR = "MULTISHAPE_SEED"

# schema: dotted key -> (type tag, default); tuples hold element type + arity
_SCHEMA = {
    "k": (int, 360),
    "variance_threshold": (float, 0.995),
    "energy_threshold_fraction": (float, 0.05),
    "generator.seed": (int, 0),
    "generator.n_objects": (("int_pair",), (2, 6)),
    "generator.base_radius": (("float_pair",), (20.0, 40.0)),
    "generator.eccentricity": (("float_pair",), (1.0, 2.0)),
    "generator.boundary_noise_amplitude": (float, 0.08),
    "generator.centroid_spacing": (("float_pair",), (0.8, 1.6)),
    "generator.canvas": (("int_pair",), (256, 256)),
    "evolution.max_outer_iterations": (int, 200),
    "evolution.fd_step": (float, 0.1),
    "evolution.initial_trust_radius": (float, 1.0),
    "evolution.min_trust_radius": (float, 1e-3),
    "evolution.max_trust_radius": (float, 10.0),
    "evolution.shrink_ratio_threshold": (float, 0.25),
    "evolution.grow_ratio_threshold": (float, 0.75),
    "evolution.alignment_refresh_period": (int, 1),
    "evolution.exact_fd_hessian": (bool, False),
    "evolution.rng_seed": (int, 0),
    "grid.r_min": (float, 0.3),
    "grid.r_max": (float, 2.0),
    "grid.r_step": (float, 0.05),
    "grid.theta_count": (int, 72),
    "learning.step": (float, 0.1),
    "learning.max_tries_per_example": (int, 20),
    "learning.max_cycles": (int, 50),
    "learning.max_outer_iterations": (int, 50),
}


def _coerce(key, kind, value):
    try:
        if kind is bool:
            if isinstance(value, bool):
                return value
            if isinstance(value, str):
                if value.lower() in ("1", "true", "yes", "on"):
                    return True
                if value.lower() in ("0", "false", "no", "off"):
                    return False
            raise ValueError(value)
        if kind is int:
            if isinstance(value, bool):
                raise ValueError(value)
            return int(value)
        if kind is float:
            return float(value)
        # pair kinds
        tag = kind[0]
        if isinstance(value, str):
            parts = [p.strip() for p in value.split(",")]
        else:
            parts = list(value)
        if len(parts) != 2:
            raise ValueError(value)
        elem = int if tag == "int_pair" else float
        return (elem(parts[0]), elem(parts[1]))
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad value for key {key!r}: {value!r}") from exc


def _flatten(doc, prefix=""):
    for key, value in doc.items():
        dotted = f"{prefix}{key}"
        if isinstance(value, dict):
            yield from _flatten(value, f"{dotted}.")
        else:
            yield dotted, value


@dataclass
class RunConfig:
    """Validated settings for the whole pipeline."""

    k: int = 360
    variance_threshold: float = 0.995
    energy_threshold_fraction: float = 0.05
    generator: GeneratorConfig = field(default_factory=GeneratorConfig)
    evolution: EvolutionConfig = field(default_factory=EvolutionConfig)
    learning: LearningConfig = field(default_factory=LearningConfig)

    @classmethod
    def from_values(cls, values):
        """Build from a dotted-key mapping; unknown keys are rejected."""
        merged = {key: default for key, (_, default) in _SCHEMA.items()}
        for key, value in values.items():
            if key not in _SCHEMA:
                raise ConfigError(f"unknown configuration key {key!r}")
            merged[key] = _coerce(key, _SCHEMA[key][0], value)
        if SEED_ENV_VAR in os.environ:
            merged["generator.seed"] = _coerce(
                "generator.seed", int, os.environ[SEED_ENV_VAR])

        def section(name):
            skip = len(name) + 1
            return {key[skip:]: value for key, value in merged.items()
                    if key.startswith(f"{name}.")}

        try:
            grid = GridSearchConfig(**section("grid"))
            generator = GeneratorConfig(k=merged["k"], **section("generator"))
            evolution = EvolutionConfig(
                energy_threshold_fraction=merged["energy_threshold_fraction"],
                grid=grid,
                **section("evolution"))
            learn_section = section("learning")
            inner_iters = learn_section.pop("max_outer_iterations")
            learning = LearningConfig(
                variance_threshold=merged["variance_threshold"],
                evolution=EvolutionConfig(
                    energy_threshold_fraction=merged["energy_threshold_fraction"],
                    grid=grid,
                    max_outer_iterations=inner_iters,
                    **{key: value for key, value in section("evolution").items()
                       if key != "max_outer_iterations"}),
                **learn_section)
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
        return cls(
            k=merged["k"],
            variance_threshold=merged["variance_threshold"],
            energy_threshold_fraction=merged["energy_threshold_fraction"],
            generator=generator,
            evolution=evolution,
            learning=learning,
        )

    @classmethod
    def load(cls, path=None, overrides=None):
        """Load from an optional file plus dotted-key overrides."""
        values = {}
        if path is not None:
            values.update(read_config_file(path))
        for key, value in (overrides or {}).items():
            values[key] = value
        return cls.from_values(values)


def read_config_file(path):
    """Parse a JSON or flat key=value configuration file to dotted keys."""
    try:
        with open(path, "r", encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    stripped = text.lstrip()
    if stripped.startswith("{"):
        try:
            doc = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: invalid JSON: {exc}") from exc
        if not isinstance(doc, dict):
            raise ConfigError(f"{path}: top level must be an object")
        return dict(_flatten(doc))
    values = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected key=value")
        key, _, value = line.partition("=")
        values[key.strip()] = value.strip()
    return values


def schema_keys():
    return sorted(_SCHEMA)
