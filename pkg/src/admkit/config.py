"""Run configuration files.

A config is a YAML mapping.  Nested mappings are flattened to dotted keys
(``chain: {delta: 0.4}`` and ``chain.delta: 0.4`` are the same), every key
must be known to the command, and relative paths resolve against the
config file's directory.
"""
from __future__ import annotations

import math
import os
from dataclasses import dataclass, fields
from pathlib import Path
from typing import Any, Callable

import yaml

from .damage import HOURS_PER_YEAR, K_STANDARD
from .errors import DomainError
from .hier import THETA_FIELDS, HyperParams, ProposalSpec
from .loads import LoadModelParams
from .simulate import TestConfig


class ConfigError(ValueError):
    """Malformed, incomplete or inconsistent run configuration."""


REQUIRED = object()


def flatten(d: dict, prefix: str = "") -> dict[str, Any]:
    out: dict[str, Any] = {}
    for k, v in d.items():
        key = f"{prefix}{k}"
        if isinstance(v, dict):
            out.update(flatten(v, key + "."))
        else:
            if key in out:
                raise ConfigError(f"duplicate key {key!r}")
            out[key] = v
    return out


def load_yaml(path: str | Path) -> dict[str, Any]:
    path = Path(path)
    try:
        raw = yaml.safe_load(path.read_text())
    except OSError as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    except yaml.YAMLError as exc:
        raise ConfigError(f"{path}: invalid YAML: {exc}") from exc
    if raw is None:
        raw = {}
    if not isinstance(raw, dict):
        raise ConfigError(f"{path}: top level must be a mapping")
    return flatten(raw)


# --- value converters ---------------------------------------------------------

def _number(v) -> float:
    if isinstance(v, bool):
        raise ValueError("expected a number")
    if isinstance(v, str) and v.strip().lower() in ("inf", "infinity", ".inf"):
        return math.inf
    return float(v)


def _int(v) -> int:
    if isinstance(v, bool) or float(v) != int(float(v)):
        raise ValueError("expected an integer")
    return int(float(v))


def _bool(v) -> bool:
    if not isinstance(v, bool):
        raise ValueError("expected true or false")
    return v


def _numbers(v) -> list[float]:
    if not isinstance(v, (list, tuple)):
        raise ValueError("expected a list of numbers")
    return [_number(x) for x in v]


def _opt(conv: Callable) -> Callable:
    return lambda v: None if v is None else conv(v)


_STR = str

_TEST_KEYS = {"name": _STR, "n_boards": _int, "tau_c": _number, "k": _number,
              "censor_hours": _number, "censor_years": _number}

COMMON = {"seed": _int, "threads": _int}

SCHEMAS: dict[str, dict[str, tuple[Callable, Any]]] = {
    "simulate": {
        **{f"theta.{f}": (_number, REQUIRED) for f in THETA_FIELDS},
        "datasets": (list, REQUIRED),
        "output.dir": (_STR, REQUIRED),
    },
    "fit": {
        "datasets": (list, REQUIRED),
        **{f"theta0.{f}": (_number, REQUIRED) for f in THETA_FIELDS},
        "chain.delta": (_opt(_number), None),
        "chain.burn_in": (_int, 100_000),
        "chain.thin": (_int, 10_000),
        "chain.n_draws": (_int, 500),
        "chain.standardize": (_bool, True),
        "chain.pilot_size": (_int, 200),
        "proposal.diag": (_numbers, list(ProposalSpec().diag)),
        "calibration.candidates": (_opt(_numbers), None),
        "calibration.sweep": (_opt(_numbers), None),
        "calibration.pilot_iterations": (_int, 2000),
        "calibration.target_rate": (_number, 0.01),
        "output.chain": (_STR, REQUIRED),
    },
    "oracle": {
        "chain": (_STR, REQUIRED),
        "datasets": (list, REQUIRED),
        "oracle.n_sim": (_int, 100_000),
        "oracle.draws": (_opt(lambda v: [_int(x) for x in v]), None),
        **{f"theta_true.{f}": (_opt(_number), None) for f in THETA_FIELDS},
        "output.table": (_STR, REQUIRED),
    },
    "reliability": {
        "chain": (_opt(_STR), None),
        **{f"theta.{f}": (_opt(_number), None) for f in THETA_FIELDS},
        "reliability.n_draws": (_opt(_int), None),
        "reliability.n_rep": (_int, 2000),
        "reliability.phi_grid": (_numbers, [0.5, 1.0, 1.5, 2.0, 2.5, 3.0]),
        "reliability.beta_targets": (_numbers, [2.5, 3.0, 3.5]),
        "reliability.horizon_years": (_number, 30.0),
        "reliability.coupled": (_bool, True),
        "reliability.block": (_int, 500),
        "reliability.example_phi": (_opt(_number), None),
        **{f"loads.{f.name}": (_number, f.default) for f in fields(LoadModelParams)},
        "output.curves": (_STR, REQUIRED),
        "output.kd": (_STR, REQUIRED),
        "output.load_path": (_opt(_STR), None),
        "output.failure_times": (_opt(_STR), None),
    },
}


@dataclass
class RunConfig:
    command: str
    values: dict[str, Any]
    base: Path
    seed: int
    threads: int = 1

    def __getitem__(self, key: str):
        return self.values[key]

    def path(self, key: str) -> Path | None:
        v = self.values.get(key)
        if v is None:
            return None
        p = Path(v)
        return p if p.is_absolute() else Path(os.path.normpath(self.base / p))

    def theta(self, prefix: str) -> HyperParams | None:
        vals = [self.values.get(f"{prefix}.{f}") for f in THETA_FIELDS]
        if all(v is None for v in vals):
            return None
        if any(v is None for v in vals):
            raise ConfigError(f"{prefix}: give all of {', '.join(THETA_FIELDS)}")
        theta = HyperParams(*vals)
        if not theta.valid:
            raise ConfigError(f"{prefix}: scales must be positive, got {theta}")
        return theta

    def load_params(self) -> LoadModelParams:
        try:
            return LoadModelParams(**{f.name: self.values[f"loads.{f.name}"] for f in fields(LoadModelParams)})
        except DomainError as exc:
            raise ConfigError(f"loads: {exc}") from exc

    def echo(self) -> dict[str, Any]:
        """Resolved values for output metadata (``threads`` is left out so outputs do not depend on it)."""
        return {"command": self.command, "seed": self.seed, **dict(sorted(self.values.items()))}


def parse_config(command: str, path: str | Path, seed: int | None = None,
                 threads: int | None = None) -> RunConfig:
    if command not in SCHEMAS:
        raise ConfigError(f"unknown command {command!r}")
    path = Path(path)
    raw = load_yaml(path)
    schema = {**{k: (conv, None) for k, conv in COMMON.items()}, **SCHEMAS[command]}
    unknown = sorted(set(raw) - set(schema))
    if unknown:
        raise ConfigError(f"{path}: unknown key(s) for {command!r}: {', '.join(unknown)}")
    values: dict[str, Any] = {}
    for key, (conv, default) in schema.items():
        if key in raw:
            try:
                values[key] = conv(raw[key])
            except (TypeError, ValueError) as exc:
                raise ConfigError(f"{path}: key {key!r}: {exc}") from exc
        elif default is REQUIRED:
            raise ConfigError(f"{path}: missing required key {key!r}")
        else:
            values[key] = default
    seed = seed if seed is not None else values.pop("seed")
    values.pop("seed", None)
    if seed is None:
        raise ConfigError(f"{path}: no seed given (set 'seed' or pass --seed)")
    cfg_threads = values.pop("threads")
    threads = threads if threads is not None else (cfg_threads or 1)
    if threads < 1:
        raise ConfigError("threads must be at least 1")
    cfg = RunConfig(command, values, path.resolve().parent, int(seed), int(threads))
    _check(cfg)
    return cfg


def _check(cfg: RunConfig) -> None:
    if cfg.command == "simulate":
        cfg.theta("theta")
        cfg.values["datasets"] = [test_config_from(d, i) for i, d in enumerate(cfg["datasets"])]
    elif cfg.command == "fit":
        cfg.theta("theta0")
        _check_files(cfg, cfg["datasets"])
        if cfg["chain.delta"] is None and cfg["calibration.candidates"] is None and cfg["calibration.sweep"] is None:
            raise ConfigError("fit: give chain.delta or a calibration block")
        if cfg["calibration.sweep"] is not None and len(cfg["calibration.sweep"]) != 3:
            raise ConfigError("calibration.sweep must be [lo, hi, count]")
        try:
            ProposalSpec(tuple(cfg["proposal.diag"]))
        except DomainError as exc:
            raise ConfigError(str(exc)) from exc
    elif cfg.command == "oracle":
        _check_files(cfg, [cfg["chain"], *cfg["datasets"]])
        cfg.theta("theta_true")
    elif cfg.command == "reliability":
        have_chain = cfg["chain"] is not None
        theta = cfg.theta("theta")
        if have_chain == (theta is not None):
            raise ConfigError("reliability: give exactly one of 'chain' or a full 'theta' block")
        if have_chain:
            _check_files(cfg, [cfg["chain"]])
        if cfg["reliability.n_rep"] < 1 or cfg["reliability.block"] < 1:
            raise ConfigError("reliability.n_rep and reliability.block must be positive")
        grid = cfg["reliability.phi_grid"]
        if not grid or any(b <= a for a, b in zip(grid, grid[1:])) or grid[0] < 0:
            raise ConfigError("reliability.phi_grid must be nonempty, nonnegative and strictly ascending")
        if not cfg["reliability.horizon_years"] > 0:
            raise ConfigError("reliability.horizon_years must be positive")
        cfg.load_params()


def _check_files(cfg: RunConfig, names) -> None:
    for name in names:
        if not isinstance(name, str):
            raise ConfigError(f"expected a file path, got {name!r}")
        p = cfg.base / name if not Path(name).is_absolute() else Path(name)
        if not p.with_suffix(".csv").exists() and not p.exists():
            raise ConfigError(f"referenced file does not exist: {p}")


def test_config_from(d: dict, index: int) -> tuple[str, TestConfig]:
    """``(name, TestConfig)`` from one entry of a ``datasets`` list."""
    if not isinstance(d, dict):
        raise ConfigError(f"datasets[{index}] must be a mapping")
    unknown = sorted(set(d) - set(_TEST_KEYS))
    if unknown:
        raise ConfigError(f"datasets[{index}]: unknown key(s) {', '.join(unknown)}")
    try:
        v = {k: conv(d[k]) for k, conv in _TEST_KEYS.items() if k in d}
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"datasets[{index}]: {exc}") from exc
    if "censor_hours" in v and "censor_years" in v:
        raise ConfigError(f"datasets[{index}]: give censor_hours or censor_years, not both")
    censor = v.get("censor_hours", v.get("censor_years", math.inf) * HOURS_PER_YEAR)
    name = v.get("name", f"dataset{index}")
    try:
        return name, TestConfig(v.get("k", K_STANDARD), v.get("tau_c", math.inf), censor, v.get("n_boards", 0))
    except DomainError as exc:
        raise ConfigError(f"datasets[{index}]: {exc}") from exc
