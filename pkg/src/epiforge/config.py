"""Experiment configuration loaded from TOML.

Every key is optional; defaults follow the 2021 Spain setup (train until
Sep 1, validation Sep 2 - Oct 1, test forecasts from Oct 2, 30-day growth
windows, 14-day horizon and exogenous lag).
"""

from __future__ import annotations

import dataclasses
import datetime as dt
from dataclasses import dataclass, field
from pathlib import Path

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from . import ingest, regions
from .errors import ConfigError, EpiforgeError
from .ml.models import RegressorKind, depth_value, parse_kind
from .ml.search import DEFAULT_GRIDS

MODEL_SETS = ("ml", "pop", "all")
AGGREGATIONS = ("mean", "median", "wavg")


def _default_grids():
    return {k: {p: list(v) for p, v in grid.items()} for k, grid in DEFAULT_GRIDS.items()}


@dataclass
class ExperimentConfig:
    data: dict = field(default_factory=lambda: {k: Path(f"{k}.csv") for k in ingest.KINDS})
    region: str = "ES"
    calendar: tuple = ingest.DEFAULT_CALENDAR
    split_dates: tuple = ingest.DEFAULT_SPLITS
    vaccination_cutoff: dt.date = ingest.DEFAULT_INTERP_CUTOFF
    scenarios: list = field(default_factory=lambda: [1, 2, 3, 4])
    models: str = "all"
    aggregations: list = field(default_factory=lambda: list(AGGREGATIONS))
    grids: dict = field(default_factory=_default_grids)
    folds: int = 5
    gb_max_depth: int | None = 3
    window: int = 30
    horizon: int = 14
    exog_lag: int = 14
    seed: int = 0
    omicron_date: dt.date = dt.date(2021, 11, 15)
    weekday_feature: bool = False
    explain: bool = True
    explain_scenario: int | None = None
    explain_permutations: int = 50
    charts: bool = True
    out: Path = Path("reports")

    def validate(self):
        if self.horizon < 1:
            raise ConfigError(f"horizon must be >= 1, got {self.horizon}")
        if self.window < 3:
            raise ConfigError(f"window must be >= 3, got {self.window}")
        if self.horizon > self.exog_lag:
            raise ConfigError(f"horizon {self.horizon} exceeds the exogenous lag {self.exog_lag}")
        if not self.scenarios or not set(self.scenarios) <= {1, 2, 3, 4}:
            raise ConfigError(f"scenarios must be a non-empty subset of 1..4, got {self.scenarios}")
        if not regions.is_known(self.region) or regions.is_city(self.region):
            raise ConfigError(f"region {self.region!r} is not a community code or ES")
        if self.models not in MODEL_SETS:
            raise ConfigError(f"models must be one of {MODEL_SETS}, got {self.models!r}")
        bad = [a for a in self.aggregations if a not in AGGREGATIONS]
        if bad or not self.aggregations:
            raise ConfigError(f"unknown aggregation(s) {bad}")
        if self.folds < 2:
            raise ConfigError("folds must be >= 2")
        if self.explain_scenario is not None and self.explain_scenario not in self.scenarios:
            raise ConfigError(f"explain scenario {self.explain_scenario} is not among {self.scenarios}")
        if self.explain_permutations < 1:
            raise ConfigError("explain permutations must be >= 1")
        start, end = self.calendar
        val, test = self.split_dates
        if not start < val < test <= end:
            raise ConfigError(f"split dates {val}, {test} must fall inside {start}..{end} in order")
        for kind, grid in self.grids.items():
            for name, values in grid.items():
                if not values:
                    raise ConfigError(f"empty grid for {kind.value}.{name}")
        return self

    @property
    def use_ml(self):
        return self.models in ("ml", "all")

    @property
    def use_pop(self):
        return self.models in ("pop", "all")

    def grid_for(self, kind):
        grid = dict(self.grids[kind])
        if "max_depth" in grid:
            grid["max_depth"] = [depth_value(v) for v in grid["max_depth"]]
        return grid


def _date(value, key):
    if isinstance(value, dt.datetime):
        return value.date()
    if isinstance(value, dt.date):
        return value
    try:
        return dt.date.fromisoformat(str(value))
    except ValueError:
        raise ConfigError(f"{key}: {value!r} is not an ISO date") from None


def _pair_of_dates(value, key):
    if not isinstance(value, (list, tuple)) or len(value) != 2:
        raise ConfigError(f"{key} must be a two-element list of dates")
    return (_date(value[0], key), _date(value[1], key))


_SIMPLE = {
    "region": str, "models": str, "folds": int, "window": int, "horizon": int, "exog_lag": int,
    "seed": int, "weekday_feature": bool,
}


def from_dict(raw, base_dir=Path(".")):
    cfg = ExperimentConfig()
    base_dir = Path(base_dir)
    try:
        data = raw.get("data", {})
        data_dir = base_dir / data.get("dir", ".")
        cfg.data = {k: data_dir / data.get(k, f"{k}.csv") for k in ingest.KINDS}

        exp = raw.get("experiment", {})
        for key, typ in _SIMPLE.items():
            if key in exp:
                setattr(cfg, key, typ(exp[key]))
        if "calendar" in exp:
            cfg.calendar = _pair_of_dates(exp["calendar"], "calendar")
        if "split_dates" in exp:
            cfg.split_dates = _pair_of_dates(exp["split_dates"], "split_dates")
        if "vaccination_cutoff" in exp:
            cfg.vaccination_cutoff = _date(exp["vaccination_cutoff"], "vaccination_cutoff")
        if "omicron_date" in exp:
            cfg.omicron_date = _date(exp["omicron_date"], "omicron_date")
        if "scenarios" in exp:
            cfg.scenarios = sorted({int(s) for s in exp["scenarios"]})
        if "aggregations" in exp:
            cfg.aggregations = [str(a) for a in exp["aggregations"]]

        for name, grid in raw.get("grids", {}).items():
            cfg.grids[parse_kind(name)] = {p: list(v) for p, v in grid.items()}
        cv = raw.get("cv", {})
        if "folds" in cv:
            cfg.folds = int(cv["folds"])
        if "gb_max_depth" in cv:
            cfg.gb_max_depth = depth_value(cv["gb_max_depth"])

        ex = raw.get("explain", {})
        cfg.explain = bool(ex.get("enabled", cfg.explain))
        if "scenario" in ex:
            cfg.explain_scenario = int(ex["scenario"])
        cfg.explain_permutations = int(ex.get("permutations", cfg.explain_permutations))

        out = raw.get("output", {})
        cfg.out = base_dir / out.get("dir", "reports")
        cfg.charts = bool(out.get("charts", cfg.charts))
    except EpiforgeError as exc:
        raise ConfigError(str(exc)) from None
    except (TypeError, ValueError, AttributeError) as exc:
        raise ConfigError(f"invalid configuration value: {exc}") from None
    return cfg.validate()


def load_config(path):
    path = Path(path)
    try:
        with open(path, "rb") as fh:
            raw = tomllib.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc.strerror}") from None
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from None
    return from_dict(raw, path.parent)


def override(cfg, **changes):
    """Copy of ``cfg`` with non-None ``changes`` applied, re-validated."""
    changes = {k: v for k, v in changes.items() if v is not None}
    return dataclasses.replace(cfg, **changes).validate()


__all__ = ["ExperimentConfig", "load_config", "from_dict", "override", "RegressorKind"]
