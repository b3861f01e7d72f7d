"""Synthetic, schema-valid input feeds.

Cases are mixtures of logistic waves (the derivative of a logistic curve)
with a weekday pattern and multiplicative noise; vaccination is weekly and
national; mobility is observed on Wednesdays and Sundays; weather comes from
two stations per region.  Everything is a deterministic function of the seed.
"""

from __future__ import annotations

import datetime as dt
import os
from pathlib import Path

import numpy as np

from . import ingest
from .errors import DataError, IoFailure

DEFAULT_REGIONS = ("CB", "MD", "CE")
REGION_SCALE = {"CB": 0.12, "MD": 0.85, "CE": 0.03}
DEFAULT_START = dt.date(2021, 1, 1)
DEFAULT_END = dt.date(2021, 12, 31)
LEAD_DAYS = 35  # mobility and vaccination history before the calendar

# (peak day since Jan 1, width in days, total cases of the wave) at national scale
WAVES = {
    "default": [(22, 7.0, 520_000), (105, 9.0, 260_000), (200, 8.0, 600_000),
                (262, 14.0, 180_000), (395, 9.0, 3_000_000)],
    # long autumn decline: a broad late-summer wave fading through the test months
    "decline": [(22, 7.0, 520_000), (105, 9.0, 260_000), (215, 16.0, 1_400_000)],
}
BASELINE = {"default": 1500.0, "decline": 300.0}
WEEKDAY_FACTOR = np.array([1.12, 1.08, 1.04, 1.0, 0.98, 0.86, 0.92])  # Mon..Sun


def _wave(t, peak, width, total):
    z = np.exp(-(t - peak) / width)
    return total * z / (width * (1.0 + z) ** 2)


def _scale(region):
    return REGION_SCALE.get(region, 0.1)


def synth_cases(rng, days, regions, profile):
    t = np.arange(len(days), dtype=float)
    national = BASELINE[profile] + sum(_wave(t, *w) for w in WAVES[profile])
    weekday = WEEKDAY_FACTOR[[d.weekday() for d in days]]
    records = []
    for region in regions:
        shift = rng.integers(-4, 5)
        noise = rng.lognormal(0.0, 0.06, size=len(days))
        series = _scale(region) * np.roll(national, shift) * weekday * noise
        if shift > 0:
            series[:shift] = series[shift]
        elif shift < 0:
            series[shift:] = series[shift - 1]
        counts = np.maximum(1, np.rint(series)).astype(int)
        records.extend(ingest.RawCaseRecord(d, region, int(c)) for d, c in zip(days, counts))
    records.sort(key=lambda r: (r.date, r.region))
    return records


def synth_vaccination(rng, start, end):
    first = start - dt.timedelta(days=LEAD_DAYS)
    year, week, _ = first.isocalendar()
    monday = dt.date.fromisocalendar(year, week, 1)
    records = []
    k = 0
    while monday <= end:
        y, w, _ = monday.isocalendar()
        tag = f"{y}-W{w:02d}"
        dose1 = 2.4e6 * np.exp(-0.5 * ((k - 27) / 8.0) ** 2) + 2e4
        dose2 = 2.2e6 * np.exp(-0.5 * ((k - 31) / 8.0) ** 2) + 1e4
        for dose, mean in ((1, dose1), (2, dose2)):
            records.append(ingest.WeeklyDoseRecord(tag, dose, int(mean * rng.lognormal(0, 0.05))))
        monday += dt.timedelta(days=7)
        k += 1
    return records


def synth_mobility(rng, start, end, regions):
    day = start - dt.timedelta(days=LEAD_DAYS)
    records = []
    while day <= end:
        if day.weekday() in (2, 6):
            season = 1.0 + 0.1 * np.sin(2 * np.pi * (day.timetuple().tm_yday - 100) / 365.0)
            weekend = 0.75 if day.weekday() == 6 else 1.0
            for dest in regions:
                for origin in regions:
                    base = 4.0e6 * _scale(dest) if origin == dest else 6.0e4 * _scale(origin)
                    flux = base * season * weekend * rng.lognormal(0, 0.03)
                    records.append(ingest.FluxRecord(day, origin, dest, int(flux)))
        day += dt.timedelta(days=1)
    return records


def synth_weather(rng, days, regions):
    records = []
    for region in regions:
        offset = rng.normal(0, 2.0)
        for station in (f"{region}01", f"{region}02"):
            for d in days:
                doy = d.timetuple().tm_yday
                temp = 15.0 + offset + 9.0 * np.sin(2 * np.pi * (doy - 110) / 365.0) + rng.normal(0, 2.0)
                rain = float(rng.gamma(0.4, 5.0)) if rng.random() < 0.35 else 0.0
                records.append(ingest.WeatherRecord(d, region, station, round(float(temp), 2),
                                                    round(rain, 2)))
    records.sort(key=lambda r: (r.date, r.station_id))
    return records


def make_fixtures(seed, out_dir, *, regions=DEFAULT_REGIONS, start=DEFAULT_START, end=DEFAULT_END,
                  profile="default"):
    """Write cases/vaccination/mobility/weather CSVs into ``out_dir``; returns their paths."""
    if profile not in WAVES:
        raise DataError(f"unknown fixture profile {profile!r}")
    rng = np.random.default_rng(seed)
    days = ingest.calendar_days(start, end)
    feeds = {
        "cases": synth_cases(rng, days, regions, profile),
        "vaccination": synth_vaccination(rng, start, end),
        "mobility": synth_mobility(rng, start, end, regions),
        "weather": synth_weather(rng, days, regions),
    }
    out = Path(out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
        paths = {}
        for kind, records in feeds.items():
            path = out / f"{kind}.csv"
            tmp = out / f".{kind}.csv.tmp"
            ingest.write_dataset(kind, records, tmp)
            os.replace(tmp, path)
            paths[kind] = path
    except OSError as exc:
        raise IoFailure(f"cannot write fixtures to {out}: {exc.strerror}") from None
    return paths
