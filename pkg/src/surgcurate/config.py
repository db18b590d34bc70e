"""Layered configuration: flags > environment > config file > defaults.

The config file is INI: one section per subcommand plus an optional
[global] section. Environment variables use the SURGCURATE_ prefix with
the key upper-cased (SURGCURATE_SEED=7). Every key maps 1:1 to a CLI flag
and the resolved config is fully explicit: no unset fields survive.
"""

from __future__ import annotations

import configparser
import os
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Callable, Mapping

ENV_PREFIX = "SURGCURATE_"


class ConfigError(Exception):
    pass


def _parse_bool(text: str) -> bool:
    lowered = text.strip().lower()
    if lowered in ("1", "true", "yes", "on"):
        return True
    if lowered in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _parse_levels(text: str) -> list[int]:
    sizes = [int(p) for p in str(text).split(",") if p.strip()]
    if not sizes:
        raise ValueError("levels must be a comma list of sizes")
    return sizes


_PARSERS: dict[str, Callable[[str], Any]] = {
    "int": int,
    "float": float,
    "str": str,
    "bool": _parse_bool,
    "levels": _parse_levels,
}


@dataclass(frozen=True)
class Option:
    name: str
    kind: str  # key into _PARSERS
    default: Any
    help: str = ""


#: Documented defaults; stage schemas reference these by name.
SCHEMAS: dict[str, tuple[Option, ...]] = {
    "global": (
        Option("seed", "int", 0, "root seed; stage seeds derive from it"),
        Option("workers", "int", 0, "worker threads; 0 = available parallelism"),
    ),
    "ingest": (
        Option("dim", "int", 768, "embedding dimension"),
    ),
    "cluster": (
        Option("levels", "levels", [25000, 5000, 1000], "hierarchy sizes, finest first"),
        Option("tol", "float", 1e-4, "relative inertia improvement threshold"),
        Option("max_iter", "int", 100, "Lloyd iteration cap per level"),
        Option("chunk_size", "int", 4096, "points per work chunk (fixed for reproducibility)"),
        Option("normalize", "bool", True, "unit-normalize rows before clustering"),
    ),
    "curate": (
        Option("fraction", "str", "0.10", "sampling budget as a fraction of the pool"),
        Option("mode", "str", "equal", "budget split: equal or proportional"),
    ),
    "sample": (
        Option("p_pure", "str", "0.15", "probability of a pure clinical batch"),
        Option("mix", "str", "0.70", "unlabeled share of a mixed batch"),
        Option("batch", "int", 64, "batch size"),
        Option("n", "int", 1000, "number of batches"),
        Option("interleave", "bool", False, "deterministic schedule instead of i.i.d. draws"),
    ),
    "split": (
        Option("ratios", "str", "7:2:1", "train:val:test ratio"),
    ),
    "evaluate": (),
    "report": (
        Option("format", "str", "markdown", "markdown or csv"),
    ),
    "stats": (
        Option("scale_comparison", "bool", False, "append the shipped scale comparison"),
    ),
}


def _coerce(option: Option, raw: Any, origin: str) -> Any:
    if raw is None:
        return option.default
    if not isinstance(raw, str):
        return raw  # flags arrive already typed from the CLI layer
    try:
        return _PARSERS[option.kind](raw)
    except (ValueError, TypeError) as exc:
        raise ConfigError(f"{origin}: bad value for {option.name!r}: {exc}") from exc


def resolve_config(
    command: str,
    flags: Mapping[str, Any] | None = None,
    config_file: str | Path | None = None,
    env: Mapping[str, str] | None = None,
) -> dict[str, Any]:
    """Materialize the full config for one command.

    Precedence: flags > environment > config file > defaults. Unknown keys
    in the config file or flags are an error naming the key.
    """
    if command not in SCHEMAS:
        raise ConfigError(f"unknown command {command!r}")
    env = os.environ if env is None else env
    flags = flags or {}
    schema = {opt.name: opt for opt in SCHEMAS["global"] + SCHEMAS[command]}

    resolved = {name: opt.default for name, opt in schema.items()}

    if config_file is not None:
        parser = configparser.ConfigParser()
        path = Path(config_file)
        if not path.exists():
            raise ConfigError(f"config file {path} does not exist")
        parser.read(path, encoding="utf-8")
        for section in ("global", command):
            if not parser.has_section(section):
                continue
            allowed = (
                {o.name for o in SCHEMAS["global"]} if section == "global" else set(schema)
            )
            for key, raw in parser.items(section):
                if key not in allowed:
                    raise ConfigError(f"{path}: unknown key {key!r} in [{section}]")
                resolved[key] = _coerce(schema[key], raw, f"{path} [{section}]")

    for name, opt in schema.items():
        env_key = ENV_PREFIX + name.upper()
        if env_key in env:
            resolved[name] = _coerce(opt, env[env_key], f"env {env_key}")

    for key, value in flags.items():
        if key not in schema:
            raise ConfigError(f"unknown config key {key!r} for command {command!r}")
        if value is not None:
            resolved[key] = _coerce(schema[key], value, f"flag --{key.replace('_', '-')}")

    return resolved
