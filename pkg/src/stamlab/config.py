"""Experiment manifests: TOML run configurations and their validation.

A manifest names a set of isotropic distributions, the pairs to convolve,
the lambda and time grids, and which check groups to run.  Validation
errors always name the offending field (with its index for array entries)
so a bad manifest is a one-line fix.
"""
from __future__ import annotations

import os
import sys
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .families import FAMILY_NAMES, FamilySpec, isotropic_spec
from .grids import DEFAULT_RESOLUTION, ValidationError

CHECK_NAMES = ("functionals", "deficits", "lemmas", "poincare", "all")

# extra keys isotropic_spec accepts, per family
_FAMILY_PARAMS = {"gamma": {"shape"}, "smoothed_laplace": {"a"}}

MIN_RESOLUTION = 256

OUTPUT_DIR_ENV = "STAMLAB_OUTPUT_DIR"


@dataclass(frozen=True)
class ExperimentConfig:
    """A validated experiment manifest.

    distributions maps display name to the FamilySpec it denotes, in
    manifest order; every pair references those names.
    """

    distributions: dict
    pairs: tuple
    lambda_grid: tuple
    t_grid: tuple
    resolution: int
    output_dir: Path
    checks: frozenset
    plots: bool = True

    def wants(self, group: str) -> bool:
        return "all" in self.checks or group in self.checks


def default_output_dir() -> Path:
    return Path(os.environ.get(OUTPUT_DIR_ENV, "stamlab-out"))


def _default_distribution_entries() -> list:
    return [
        {"name": "gaussian", "family": "gaussian"},
        {"name": "uniform", "family": "uniform"},
        {"name": "logistic", "family": "logistic"},
        {"name": "gumbel", "family": "gumbel"},
        {"name": "smoothed_laplace", "family": "smoothed_laplace"},
        {"name": "gamma4", "family": "gamma", "shape": 4.0},
    ]


def _default_pair_entries() -> list:
    return [
        ["uniform", "logistic"],
        ["logistic", "smoothed_laplace"],
        ["gaussian", "gamma4"],
        ["gumbel", "logistic"],
    ]


def _parse_distributions(entries) -> dict:
    if not isinstance(entries, list) or not entries:
        raise ValidationError("distribution: expected a nonempty array of tables")
    out: dict = {}
    for i, entry in enumerate(entries):
        where = f"distribution[{i}]"
        if not isinstance(entry, dict):
            raise ValidationError(f"{where}: expected a table")
        entry = dict(entry)
        family = entry.pop("family", None)
        if family not in FAMILY_NAMES:
            raise ValidationError(
                f"{where}.family = {family!r} is not one of {sorted(FAMILY_NAMES)}"
            )
        name = entry.pop("name", family)
        if not isinstance(name, str) or not name:
            raise ValidationError(f"{where}.name must be a nonempty string")
        if name in out:
            raise ValidationError(f"{where}.name = {name!r} duplicates an earlier entry")
        allowed = _FAMILY_PARAMS.get(family, set())
        stray = sorted(set(entry) - allowed)
        if stray:
            raise ValidationError(
                f"{where}: unknown parameter(s) {stray} for family {family!r}"
                + (f" (allowed: {sorted(allowed)})" if allowed else "")
            )
        for key, value in entry.items():
            if not isinstance(value, (int, float)) or isinstance(value, bool):
                raise ValidationError(f"{where}.{key} = {value!r} must be a number")
        out[name] = isotropic_spec(family, **entry)
    return out


def _parse_pairs(entries, names) -> tuple:
    if not isinstance(entries, list) or not entries:
        raise ValidationError("pairs: expected a nonempty array of name pairs")
    out = []
    for i, item in enumerate(entries):
        ok = (
            isinstance(item, (list, tuple))
            and len(item) == 2
            and all(isinstance(x, str) for x in item)
        )
        if not ok:
            raise ValidationError(
                f"pairs[{i}] = {item!r} must be a pair of distribution names"
            )
        for x in item:
            if x not in names:
                raise ValidationError(
                    f"pairs[{i}] references unknown distribution {x!r} "
                    f"(declared: {sorted(names)})"
                )
        out.append((item[0], item[1]))
    return tuple(out)


def _parse_grid(raw, name: str, low: float, high: Optional[float]) -> tuple:
    if not isinstance(raw, list) or not raw:
        raise ValidationError(f"{name}: expected a nonempty array of reals")
    out = []
    for i, v in enumerate(raw):
        if not isinstance(v, (int, float)) or isinstance(v, bool):
            raise ValidationError(f"{name}[{i}] = {v!r} is not a number")
        v = float(v)
        if v < low or (high is not None and v > high):
            span = f"[{low:g}, {high:g}]" if high is not None else f"[{low:g}, inf)"
            raise ValidationError(f"{name}[{i}] = {v:g} is outside {span}")
        out.append(v)
    return tuple(out)


def _parse_checks(raw) -> frozenset:
    if not isinstance(raw, list) or not raw:
        raise ValidationError("checks: expected a nonempty array of group names")
    out = set()
    for i, v in enumerate(raw):
        if v not in CHECK_NAMES:
            raise ValidationError(
                f"checks[{i}] = {v!r} is not one of {sorted(CHECK_NAMES)}"
            )
        out.add(v)
    return frozenset(out)


def config_from_mapping(raw: dict, base_dir: Optional[Path] = None) -> ExperimentConfig:
    known = {
        "distribution",
        "pairs",
        "lambda_grid",
        "t_grid",
        "resolution",
        "output_dir",
        "checks",
        "plots",
    }
    stray = sorted(set(raw) - known)
    if stray:
        raise ValidationError(f"unknown config key(s) {stray} (known: {sorted(known)})")

    distributions = _parse_distributions(
        raw.get("distribution", _default_distribution_entries())
    )
    pairs = _parse_pairs(raw.get("pairs", _default_pair_entries()), distributions)
    lambda_grid = _parse_grid(
        raw.get("lambda_grid", [0.1, 0.3, 0.5, 0.7, 0.9]), "lambda_grid", 0.0, 1.0
    )
    t_grid = _parse_grid(raw.get("t_grid", [0.25, 0.5, 1.0]), "t_grid", 0.0, None)

    resolution = raw.get("resolution", DEFAULT_RESOLUTION)
    if not isinstance(resolution, int) or isinstance(resolution, bool):
        raise ValidationError(f"resolution = {resolution!r} must be an integer")
    if resolution < MIN_RESOLUTION:
        raise ValidationError(
            f"resolution = {resolution} is below the minimum {MIN_RESOLUTION}"
        )

    out_raw = raw.get("output_dir")
    if out_raw is None:
        output_dir = default_output_dir()
    elif isinstance(out_raw, str) and out_raw:
        output_dir = Path(out_raw)
    else:
        raise ValidationError(f"output_dir = {out_raw!r} must be a nonempty string")
    if base_dir is not None and not output_dir.is_absolute():
        output_dir = base_dir / output_dir

    checks = _parse_checks(raw.get("checks", ["all"]))

    plots = raw.get("plots", True)
    if not isinstance(plots, bool):
        raise ValidationError(f"plots = {plots!r} must be a boolean")

    return ExperimentConfig(
        distributions=distributions,
        pairs=pairs,
        lambda_grid=lambda_grid,
        t_grid=t_grid,
        resolution=resolution,
        output_dir=output_dir,
        checks=checks,
        plots=plots,
    )


def parse_config(text: str, base_dir: Optional[Path] = None) -> ExperimentConfig:
    """Parse and validate a TOML manifest; errors name field or line."""
    try:
        raw = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ValidationError(f"config parse error: {exc}") from None
    return config_from_mapping(raw, base_dir)


def load_config(path) -> ExperimentConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ValidationError(f"cannot read config {path}: {exc.strerror}") from None
    return parse_config(text, path.parent)


def default_config() -> ExperimentConfig:
    """The built-in experiment: every bundled family, the standard pair set."""
    return config_from_mapping({})


def scaled_resolution(spec: FamilySpec, resolution: int) -> int:
    """Per-family node count for a requested base resolution.

    Families whose defaults exceed the global default (sharp or heavy-tail
    cases) keep their refinement factor, so halving the base resolution
    halves every grid instead of flattening them to one size.
    """
    from .families import default_resolution as family_default

    return max(
        MIN_RESOLUTION, int(round(family_default(spec) * resolution / DEFAULT_RESOLUTION))
    )
