"""Run configuration: strict JSON parsing and plan resolution."""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

from .scenario import (
    OUTCOME_KINDS,
    SET_TAGS,
    RunPlan,
    Scenario,
    apply_sensitivity,
    build_core_grid,
)

FIGURE_METRICS = ("bias", "coverage", "type1", "emp_se", "mod_se", "ror", "missing")

_TOP_KEYS = {
    "master_seed",
    "iterations",
    "sets",
    "sensitivities",
    "outcomes",
    "n",
    "or_grid",
    "beta_r_grid",
    "scenarios",
    "out_dir",
    "emit_raw",
    "threads",
    "figures",
}
_FIGURE_KEYS = {"metric", "include_extreme"}
_SCENARIO_KEYS = {
    "set",
    "sensitivity",
    "outcome",
    "n",
    "intercept_s",
    "alpha_r",
    "alpha_u",
    "alpha_ru",
    "intercept_y",
    "beta_r",
    "beta_u",
    "beta_ru",
    "sigma_y",
}
_SENSITIVITIES = ("core", "A", "B", "C")


class ConfigError(ValueError):
    """Invalid run configuration; the message names the offending key."""


@dataclass(frozen=True)
class FigureSpec:
    metric: str
    include_extreme: bool = False


@dataclass(frozen=True)
class RunConfig:
    master_seed: int
    iterations: int = 10000
    sets: tuple[str, ...] = ()
    sensitivities: tuple[str, ...] = ("core",)
    outcomes: tuple[str, ...] = ()
    n_values: tuple[int, ...] | None = None
    or_values: tuple[float, ...] | None = None
    beta_r_values: tuple[float, ...] | None = None
    custom: tuple[Scenario, ...] = ()
    out_dir: str = "out"
    emit_raw: bool = False
    threads: int = 1
    figures: tuple[FigureSpec, ...] = field(default_factory=tuple)


def _require(condition: bool, message: str) -> None:
    if not condition:
        raise ConfigError(message)


def _as_int(value, key: str) -> int:
    _require(isinstance(value, int) and not isinstance(value, bool), f"{key} must be an integer")
    return value


def _as_number(value, key: str) -> float:
    _require(
        isinstance(value, (int, float)) and not isinstance(value, bool),
        f"{key} must be a number",
    )
    value = float(value)
    _require(math.isfinite(value), f"{key} must be finite")
    return value


def _as_str_list(value, key: str, allowed: tuple[str, ...]) -> tuple[str, ...]:
    _require(isinstance(value, list), f"{key} must be a list")
    for item in value:
        _require(isinstance(item, str) and item in allowed, f"{key} entries must be from {allowed}")
    _require(len(set(value)) == len(value), f"{key} entries must be unique")
    return tuple(value)


def _parse_custom_scenario(entry, index: int) -> Scenario:
    key = f"scenarios[{index}]"
    _require(isinstance(entry, dict), f"{key} must be an object")
    unknown = set(entry) - _SCENARIO_KEYS
    if unknown:
        raise ConfigError(f"{key} has unknown key {sorted(unknown)[0]!r}")
    missing = {"set", "sensitivity", "outcome", "n"} - set(entry)
    if missing:
        raise ConfigError(f"{key} missing required key {sorted(missing)[0]!r}")
    fields = {
        "set_tag": entry["set"],
        "sensitivity_tag": entry["sensitivity"],
        "outcome_kind": entry["outcome"],
        "n": _as_int(entry["n"], f"{key}.n"),
    }
    for name in ("intercept_s", "alpha_r", "alpha_u", "alpha_ru",
                 "intercept_y", "beta_r", "beta_u", "beta_ru"):
        fields[name] = _as_number(entry.get(name, 0.0), f"{key}.{name}")
    if "sigma_y" in entry and entry["sigma_y"] is not None:
        fields["sigma_y"] = _as_number(entry["sigma_y"], f"{key}.sigma_y")
    try:
        return Scenario(**fields)
    except ValueError as exc:
        raise ConfigError(f"{key}: {exc}") from exc


def parse_config(path: str | Path) -> RunConfig:
    """Parse a JSON run configuration with strict key checking."""
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc
    _require(isinstance(doc, dict), "config document must be a JSON object")
    unknown = set(doc) - _TOP_KEYS
    if unknown:
        raise ConfigError(f"unknown config key {sorted(unknown)[0]!r}")
    _require("master_seed" in doc, "missing required key 'master_seed'")

    master_seed = _as_int(doc["master_seed"], "master_seed")
    _require(0 <= master_seed < 2**64, "master_seed must be an unsigned 64-bit integer")
    iterations = _as_int(doc.get("iterations", 10000), "iterations")
    _require(iterations >= 1, "iterations must be >= 1")

    sets = _as_str_list(doc.get("sets", []), "sets", SET_TAGS)
    sensitivities = _as_str_list(
        doc.get("sensitivities", ["core"]), "sensitivities", _SENSITIVITIES
    )
    outcomes = _as_str_list(doc.get("outcomes", []), "outcomes", OUTCOME_KINDS)

    n_values = None
    if "n" in doc:
        _require(isinstance(doc["n"], list) and doc["n"], "n must be a non-empty list")
        n_values = tuple(_as_int(v, "n") for v in doc["n"])
        for v in n_values:
            _require(v >= 4 and v % 2 == 0, "n entries must be even integers >= 4")

    or_values = None
    if "or_grid" in doc:
        _require(isinstance(doc["or_grid"], list) and doc["or_grid"], "or_grid must be a non-empty list")
        or_values = tuple(_as_number(v, "or_grid") for v in doc["or_grid"])
        for v in or_values:
            _require(v > 0, "or_grid entries must be positive odds ratios")

    beta_r_values = None
    if "beta_r_grid" in doc:
        _require(
            isinstance(doc["beta_r_grid"], list) and doc["beta_r_grid"],
            "beta_r_grid must be a non-empty list",
        )
        _require(
            len(outcomes) == 1,
            "beta_r_grid requires exactly one entry in outcomes (its scale depends on the outcome kind)",
        )
        beta_r_values = tuple(_as_number(v, "beta_r_grid") for v in doc["beta_r_grid"])
        if outcomes[0] == "binary":
            for v in beta_r_values:
                _require(v > 0, "beta_r_grid entries must be positive odds ratios for binary outcomes")

    custom = ()
    if "scenarios" in doc:
        _require(isinstance(doc["scenarios"], list), "scenarios must be a list")
        custom = tuple(
            _parse_custom_scenario(entry, i) for i, entry in enumerate(doc["scenarios"])
        )

    out_dir = doc.get("out_dir", "out")
    _require(isinstance(out_dir, str) and out_dir, "out_dir must be a non-empty string")
    emit_raw = doc.get("emit_raw", False)
    _require(isinstance(emit_raw, bool), "emit_raw must be a boolean")
    threads = _as_int(doc.get("threads", 1), "threads")
    _require(threads >= 1, "threads must be >= 1")

    figures = []
    if "figures" in doc:
        _require(isinstance(doc["figures"], list), "figures must be a list")
        for i, entry in enumerate(doc["figures"]):
            key = f"figures[{i}]"
            _require(isinstance(entry, dict), f"{key} must be an object")
            unknown = set(entry) - _FIGURE_KEYS
            if unknown:
                raise ConfigError(f"{key} has unknown key {sorted(unknown)[0]!r}")
            metric = entry.get("metric")
            _require(metric in FIGURE_METRICS, f"{key}.metric must be one of {FIGURE_METRICS}")
            include_extreme = entry.get("include_extreme", False)
            _require(isinstance(include_extreme, bool), f"{key}.include_extreme must be a boolean")
            figures.append(FigureSpec(metric=metric, include_extreme=include_extreme))

    config = RunConfig(
        master_seed=master_seed,
        iterations=iterations,
        sets=sets,
        sensitivities=sensitivities,
        outcomes=outcomes,
        n_values=n_values,
        or_values=or_values,
        beta_r_values=beta_r_values,
        custom=custom,
        out_dir=out_dir,
        emit_raw=emit_raw,
        threads=threads,
        figures=tuple(figures),
    )
    resolve_plan(config)  # surface grid/uniqueness problems at parse time
    return config


def resolve_plan(config: RunConfig) -> RunPlan:
    """Expand a RunConfig into the ordered scenario plan it describes."""
    scenarios: list[Scenario] = []
    for set_tag in config.sets:
        for sensitivity in config.sensitivities:
            for outcome in config.outcomes:
                grid = build_core_grid(
                    set_tag,
                    outcome,
                    n_values=config.n_values,
                    or_values=config.or_values,
                    effect_values=config.beta_r_values,
                )
                if sensitivity != "core":
                    grid = apply_sensitivity(grid, sensitivity)
                scenarios.extend(grid)
    scenarios.extend(config.custom)
    if not scenarios:
        raise ConfigError(
            "no scenarios resolvable: provide sets+outcomes or a scenarios list"
        )
    try:
        return RunPlan(
            scenarios=tuple(scenarios),
            iterations=config.iterations,
            master_seed=config.master_seed,
            out_dir=Path(config.out_dir),
            emit_raw=config.emit_raw,
            threads=config.threads,
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def plan_digest(scenarios, master_seed: int, iterations: int) -> str:
    """Hash of everything that determines simulation output for a plan."""
    payload = json.dumps(
        {
            "master_seed": master_seed,
            "iterations": iterations,
            "scenarios": [s.canonical() for s in scenarios],
        },
        separators=(",", ":"),
    )
    return hashlib.sha256(payload.encode("ascii")).hexdigest()
