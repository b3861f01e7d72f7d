"""CSV feeds and per-region panel assembly.

Four feeds are read: daily cases per region, weekly national doses,
origin-destination mobility observed on Wednesdays and Sundays, and station
weather.  :func:`build_panel` joins them on a daily calendar for one region
(or the nation, ``"ES"``) and labels each day train/val/test.
"""

from __future__ import annotations

import csv
import datetime as dt
import re
from dataclasses import dataclass, fields

import numpy as np

from . import features, regions
from .errors import (
    DuplicateKey,
    IngestError,
    MissingColumn,
    MissingCoverage,
    UnknownRegion,
    UnparsableValue,
)

KINDS = ("cases", "vaccination", "mobility", "weather")

TRAIN, VAL, TEST = "train", "val", "test"

DEFAULT_CALENDAR = (dt.date(2021, 1, 1), dt.date(2021, 12, 31))
DEFAULT_SPLITS = (dt.date(2021, 9, 2), dt.date(2021, 10, 2))
DEFAULT_INTERP_CUTOFF = dt.date(2021, 8, 29)


@dataclass(frozen=True)
class RawCaseRecord:
    date: dt.date
    region: str
    new_cases: int


@dataclass(frozen=True)
class WeeklyDoseRecord:
    iso_week: str
    dose_number: int
    doses: int


@dataclass(frozen=True)
class FluxRecord:
    date: dt.date
    origin: str
    destination: str
    flux: int


@dataclass(frozen=True)
class WeatherRecord:
    date: dt.date
    region: str
    station_id: str
    mean_temp: float
    precipitation: float


RECORD_TYPES = {
    "cases": RawCaseRecord,
    "vaccination": WeeklyDoseRecord,
    "mobility": FluxRecord,
    "weather": WeatherRecord,
}
HEADERS = {kind: [f.name for f in fields(cls)] for kind, cls in RECORD_TYPES.items()}
UNIQUE_KEYS = {
    "cases": ("date", "region"),
    "vaccination": ("iso_week", "dose_number"),
    "mobility": ("date", "origin", "destination"),
    "weather": ("date", "station_id"),
}

_ISO_WEEK = re.compile(r"^\d{4}-W\d{2}$")


def _parse_date(text):
    return dt.date.fromisoformat(text)


def _parse_count(text):
    value = int(text)
    if value < 0:
        raise ValueError("negative count")
    return value


def _parse_region(text):
    if not regions.is_known(text) or text == regions.NATIONAL:
        raise ValueError(f"unknown region code {text!r}")
    return text


def _parse_week(text):
    if not _ISO_WEEK.match(text):
        raise ValueError("expected YYYY-Www")
    features.sunday_of(text)  # rejects week 54 etc.
    return text


def _parse_dose(text):
    value = int(text)
    if value not in (1, 2):
        raise ValueError("dose_number must be 1 or 2")
    return value


def _parse_float(text):
    value = float(text)
    if not np.isfinite(value):
        raise ValueError("non-finite")
    return value


def _parse_precip(text):
    value = _parse_float(text)
    if value < 0:
        raise ValueError("negative precipitation")
    return value


def _parse_station(text):
    if not text:
        raise ValueError("empty station id")
    return text


PARSERS = {
    "cases": {"date": _parse_date, "region": _parse_region, "new_cases": _parse_count},
    "vaccination": {"iso_week": _parse_week, "dose_number": _parse_dose, "doses": _parse_count},
    "mobility": {"date": _parse_date, "origin": _parse_region,
                 "destination": _parse_region, "flux": _parse_count},
    "weather": {"date": _parse_date, "region": _parse_region, "station_id": _parse_station,
                "mean_temp": _parse_float, "precipitation": _parse_precip},
}


def load_dataset(kind, path):
    """Read and validate one feed; rows come back in file order.

    Row numbers in errors are 1-based file lines (the header is line 1).
    """
    if kind not in RECORD_TYPES:
        raise IngestError(f"unknown dataset kind {kind!r}")
    cls, parsers, key_cols = RECORD_TYPES[kind], PARSERS[kind], UNIQUE_KEYS[kind]
    try:
        fh = open(path, newline="", encoding="utf-8")
    except OSError as exc:
        raise IngestError(f"cannot open {kind} file {path}: {exc.strerror}") from None
    with fh:
        reader = csv.DictReader(fh)
        header = reader.fieldnames or []
        for col in HEADERS[kind]:
            if col not in header:
                raise MissingColumn(f"{path}: {kind} file lacks column {col!r}")
        records, seen = [], {}
        for line, row in enumerate(reader, start=2):
            values = {}
            for col, parse in parsers.items():
                raw = row.get(col)
                if raw is None:
                    raise UnparsableValue(line, col, "missing field")
                try:
                    values[col] = parse(raw.strip())
                except ValueError as exc:
                    raise UnparsableValue(line, col, str(exc)) from None
            key = tuple(values[c] for c in key_cols)
            if key in seen:
                raise DuplicateKey(line, key)
            seen[key] = line
            records.append(cls(**values))
    return records


def _format(value):
    if isinstance(value, dt.date):
        return value.isoformat()
    if isinstance(value, float):
        return repr(value)
    return str(value)


def write_dataset(kind, records, path):
    """Serialize records with the schema header; inverse of :func:`load_dataset`."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(HEADERS[kind])
        for rec in records:
            w.writerow([_format(getattr(rec, col)) for col in HEADERS[kind]])


def load_all(paths):
    """``paths`` maps each kind to a file; returns kind -> records."""
    return {kind: load_dataset(kind, paths[kind]) for kind in KINDS}


# --- panel ----------------------------------------------------------------

@dataclass
class RegionPanel:
    region: str
    days: list
    cases: np.ndarray
    vax_dose1: np.ndarray
    vax_dose2: np.ndarray
    mobility: np.ndarray
    temperature: np.ndarray
    precipitation: np.ndarray
    splits: np.ndarray

    SERIES = ("cases", "vax_dose1", "vax_dose2", "mobility", "temperature", "precipitation")

    def __len__(self):
        return len(self.days)

    def index_of(self, day):
        i = (day - self.days[0]).days
        if not 0 <= i < len(self.days):
            raise KeyError(f"{day} outside panel calendar")
        return i

    def split_bounds(self, split):
        idx = np.flatnonzero(self.splits == split)
        if idx.size == 0:
            return None
        return self.days[idx[0]], self.days[idx[-1]]

    @property
    def cumulative_cases(self):
        return np.cumsum(self.cases)

    def to_csv(self, path):
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["date", *self.SERIES, "split"])
            for i, day in enumerate(self.days):
                w.writerow([day.isoformat(),
                            *(repr(float(getattr(self, s)[i])) for s in self.SERIES),
                            self.splits[i]])


def calendar_days(start, end):
    if end < start:
        raise IngestError(f"calendar end {end} precedes start {start}")
    return [start + dt.timedelta(days=i) for i in range((end - start).days + 1)]


def split_labels(days, split_dates):
    val_start, test_start = split_dates
    if not (days[0] < val_start < test_start <= days[-1]):
        raise IngestError(
            f"split boundaries {val_start}, {test_start} must lie inside "
            f"{days[0]}..{days[-1]} in increasing order"
        )
    labels = np.array([TRAIN] * len(days), dtype=object)
    for i, day in enumerate(days):
        if day >= test_start:
            labels[i] = TEST
        elif day >= val_start:
            labels[i] = VAL
    return labels


def _case_series(cases, region, days):
    region_codes = sorted({r.region for r in cases})
    if region == regions.NATIONAL:
        members = region_codes  # cities included in national cases
    else:
        if region not in region_codes:
            raise MissingCoverage(days[0], region)
        members = [region]
    pos = {day: i for i, day in enumerate(days)}
    table = {m: np.full(len(days), np.nan) for m in members}
    for rec in cases:
        i = pos.get(rec.date)
        if i is not None and rec.region in table:
            table[rec.region][i] = rec.new_cases
    total = np.zeros(len(days))
    for m in members:
        gap = np.flatnonzero(np.isnan(table[m]))
        if gap.size:
            raise MissingCoverage(days[gap[0]], m)
        total += table[m]
    return total


def _mobility_series(fluxes, region, days):
    index = features.inflow_index(fluxes)
    if region == regions.NATIONAL:
        members = sorted({dest for (_, dest) in index if not regions.is_city(dest)})
    else:
        members = [region]
    observed = {}
    for day in sorted({d for (d, _) in index}):
        if day.weekday() not in (2, 6):
            continue
        try:
            observed[day] = float(features.mobility_flux(None, region, day,
                                                         members=members, index=index))
        except features.NoFluxData:
            continue
    return features.assign_mobility_days(observed, days).flux


def _weather_series(weather, region, days, window):
    pos = {day: i for i, day in enumerate(days)}
    temp_sum = np.zeros(len(days))
    prec_sum = np.zeros(len(days))
    count = np.zeros(len(days))
    for rec in weather:
        if region == regions.NATIONAL:
            if regions.is_city(rec.region):
                continue
        elif rec.region != region:
            continue
        i = pos.get(rec.date)
        if i is None:
            continue
        temp_sum[i] += rec.mean_temp
        prec_sum[i] += rec.precipitation
        count[i] += 1
    gap = np.flatnonzero(count == 0)
    if gap.size:
        raise MissingCoverage(days[gap[0]], region, feed="weather")
    temp = features.rolling_average(temp_sum / count, window)
    prec = features.rolling_average(prec_sum / count, window)
    return temp, prec


def build_panel(records, region, calendar=DEFAULT_CALENDAR, split_dates=DEFAULT_SPLITS, *,
                interp_cutoff=DEFAULT_INTERP_CUTOFF, weather_window=7):
    """Assemble the daily panel for ``region``.

    ``records`` maps each dataset kind to its validated records.  The
    national panel sums cases over every region in the cases feed (the two
    autonomous cities included), sums incoming mobility over the
    communities, and averages weather over the communities' stations.
    Vaccination is national and shared by every region.
    """
    reg = regions.get_region(region)
    if reg.kind == "city":
        raise UnknownRegion(f"{region} is an autonomous city; only communities and ES have panels")
    days = calendar_days(*calendar)
    splits = split_labels(days, split_dates)

    cases = _case_series(records["cases"], region, days)
    vax = features.daily_vaccination(records["vaccination"], days, interp_cutoff)
    mobility = _mobility_series(records["mobility"], region, days)
    temp, prec = _weather_series(records["weather"], region, days, weather_window)

    return RegionPanel(
        region=region,
        days=days,
        cases=cases,
        vax_dose1=vax.dose1_rate,
        vax_dose2=vax.dose2_rate,
        mobility=mobility,
        temperature=temp,
        precipitation=prec,
        splits=splits,
    )
