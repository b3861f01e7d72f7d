"""Preprocessing of exogenous feeds and lagged design matrices.

Covers vaccination daily-ization (weekly totals anchored on Sundays, natural
spline up to a cutoff, stepwise linear extrapolation after it), the
origin-destination mobility sum, the Wednesday/Sunday day-assignment rule,
weather smoothing, standardization and the lag layout used by the ML models.
"""

from __future__ import annotations

import csv
import datetime as dt
from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import CubicSpline

from .errors import (
    ConstantColumn,
    EmptySeries,
    InsufficientAnchors,
    InsufficientHistory,
    MissingObservation,
    NegativeDoses,
    NoFluxData,
)
from .regions import NATIONAL

N_LAGS = 14
EXOG_LAG = 14

LAG_COLUMNS = [f"lag_{k}" for k in range(1, N_LAGS + 1)]
SCENARIO_EXOG = {
    1: [],
    2: ["vax1", "vax2"],
    3: ["vax1", "vax2", "mob"],
    4: ["vax1", "vax2", "mob", "temp", "precip"],
}
# panel attribute feeding each exogenous column
EXOG_SOURCE = {
    "vax1": "vax_dose1",
    "vax2": "vax_dose2",
    "mob": "mobility",
    "temp": "temperature",
    "precip": "precipitation",
}

ANCHOR = "anchor"
INTERPOLATED = "interpolated"
EXTRAPOLATED = "extrapolated"


def scenario_columns(scenario, weekday=False):
    if scenario not in SCENARIO_EXOG:
        raise ValueError(f"scenario must be one of 1..4, got {scenario!r}")
    cols = LAG_COLUMNS + SCENARIO_EXOG[scenario]
    if weekday:
        cols = cols + ["weekday"]
    return cols


def sunday_of(iso_week):
    """'2021-W05' -> date of that ISO week's Sunday."""
    year, week = iso_week.split("-W")
    return dt.date.fromisocalendar(int(year), int(week), 7)


# --- vaccination ----------------------------------------------------------

@dataclass
class DailyVaxSeries:
    days: list
    dose1_rate: np.ndarray
    dose2_rate: np.ndarray
    provenance: dict  # dose number -> list of ANCHOR/INTERPOLATED/EXTRAPOLATED


def _daily_dose(anchor_days, anchor_vals, calendar, interp_cutoff):
    order = np.argsort([d.toordinal() for d in anchor_days])
    a_days = [anchor_days[i] for i in order]
    a_vals = np.asarray(anchor_vals, dtype=float)[order]
    a_ord = np.array([d.toordinal() for d in a_days], dtype=float)

    known = a_ord <= interp_cutoff.toordinal()
    if known.sum() < 3:
        raise InsufficientAnchors(
            f"{int(known.sum())} Sunday anchors on or before {interp_cutoff}; the spline needs 3"
        )
    spline = CubicSpline(a_ord[known], a_vals[known], bc_type="natural")
    anchor_lookup = dict(zip(a_days, a_vals))

    values = np.empty(len(calendar))
    prov = []
    for i, day in enumerate(calendar):
        if day in anchor_lookup:
            values[i] = anchor_lookup[day]
            prov.append(ANCHOR)
        elif day <= interp_cutoff:
            values[i] = float(spline(day.toordinal()))
            prov.append(INTERPOLATED)
        else:
            # latest anchor published by this day and the one before it
            m = np.searchsorted(a_ord, day.toordinal(), side="right") - 1
            if m < 1:
                raise InsufficientAnchors(f"no two anchors available before {day}")
            slope = (a_vals[m] - a_vals[m - 1]) / (a_ord[m] - a_ord[m - 1])
            values[i] = a_vals[m] + (day.toordinal() - a_ord[m]) * slope
            prov.append(EXTRAPOLATED)
    np.maximum(values, 0.0, out=values)
    return values, prov


def daily_vaccination(weekly, calendar, interp_cutoff):
    """Turn weekly dose totals into daily dose rates over ``calendar``.

    Each ISO week's total divided by 7 is pinned to that week's Sunday.  Days
    up to ``interp_cutoff`` come from a natural cubic spline through the
    anchors known by then; later days extend the line through the two most
    recent published anchors, restarting whenever a new Sunday arrives.
    Negative values from spline undershoot are clamped to zero.
    """
    per_dose = {1: ([], []), 2: ([], [])}
    for rec in weekly:
        if rec.doses < 0:
            raise NegativeDoses(f"week {rec.iso_week} dose {rec.dose_number}: {rec.doses}")
        days, vals = per_dose[rec.dose_number]
        days.append(sunday_of(rec.iso_week))
        vals.append(rec.doses / 7.0)

    out, prov = {}, {}
    for dose, (days, vals) in per_dose.items():
        out[dose], prov[dose] = _daily_dose(days, vals, calendar, interp_cutoff)
    return DailyVaxSeries(list(calendar), out[1], out[2], prov)


# --- mobility -------------------------------------------------------------

def inflow_index(fluxes):
    """Map (day, destination) -> (summed incoming flux, intra record seen)."""
    index = {}
    for rec in fluxes:
        key = (rec.date, rec.destination)
        total, intra = index.get(key, (0, False))
        index[key] = (total + rec.flux, intra or rec.origin == rec.destination)
    return index


def mobility_flux(fluxes, region, day, *, members=None, index=None):
    """Total flux arriving in ``region`` on ``day``, internal flux included.

    For the national code the per-region totals of ``members`` are summed
    (defaults to every destination seen that day).  ``index`` may carry a
    precomputed :func:`inflow_index` to avoid rescanning ``fluxes``.
    """
    if index is None:
        index = inflow_index(fluxes)
    if region == NATIONAL:
        if members is None:
            members = sorted({dest for (d, dest) in index if d == day})
        totals = [mobility_flux(None, m, day, index=index) for m in members]
        if not totals:
            raise NoFluxData(f"no flux records on {day}")
        return sum(totals)
    entry = index.get((day, region))
    if entry is None or not entry[1]:
        raise NoFluxData(f"no intra-region flux for {region} on {day}")
    return entry[0]


@dataclass
class MobilityDailySeries:
    days: list
    flux: np.ndarray
    source_day: list  # observed_wed | observed_sun | assigned


# weekday -> days back to the observation it copies (Mon=0 ... Sun=6)
_MOBILITY_OFFSET = {0: 5, 1: 6, 2: 0, 3: 1, 4: 2, 5: 6, 6: 0}


def assign_mobility_days(observed, calendar):
    """Fill every day from Wednesday/Sunday observations without peeking ahead.

    Monday and Tuesday copy the previous Wednesday, Thursday and Friday the
    Wednesday of the same week, Saturday the previous Sunday.
    ``observed`` maps date -> value and may include days before the calendar.
    """
    values = np.empty(len(calendar))
    source = []
    for i, day in enumerate(calendar):
        wd = day.weekday()
        src = day - dt.timedelta(days=_MOBILITY_OFFSET[wd])
        if src not in observed:
            raise MissingObservation(f"{day} needs the observation of {src} ({src:%A})")
        values[i] = observed[src]
        if wd == 2:
            source.append("observed_wed")
        elif wd == 6:
            source.append("observed_sun")
        else:
            source.append("assigned")
    return MobilityDailySeries(list(calendar), values, source)


# --- weather --------------------------------------------------------------

def rolling_average(series, window=7):
    """Trailing mean over ``window`` days; the first days average what exists."""
    x = np.asarray(series, dtype=float)
    if x.size == 0:
        raise EmptySeries("cannot smooth an empty series")
    csum = np.concatenate([[0.0], np.cumsum(x)])
    idx = np.arange(1, x.size + 1)
    start = np.maximum(idx - window, 0)
    return (csum[idx] - csum[start]) / (idx - start)


# --- design matrices ------------------------------------------------------

@dataclass
class DesignMatrix:
    X: np.ndarray
    y: np.ndarray
    columns: list
    days: list  # target day of each row
    splits: np.ndarray
    scenario: int

    @property
    def n_features(self):
        return self.X.shape[1]

    def mask(self, split):
        return self.splits == split

    def subset(self, rows):
        rows = np.asarray(rows)
        if rows.dtype == bool:
            rows = np.flatnonzero(rows)
        return DesignMatrix(
            self.X[rows], self.y[rows], list(self.columns),
            [self.days[i] for i in rows], self.splits[rows], self.scenario,
        )

    def to_csv(self, path):
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(list(self.columns) + ["target", "split"])
            for row, target, split in zip(self.X, self.y, self.splits):
                w.writerow([repr(float(v)) for v in row] + [repr(float(target)), split])


def build_design_matrix(panel, scenario, *, n_lags=N_LAGS, exog_lag=EXOG_LAG, weekday=False):
    """Lagged rows for every day that has a full history.

    Row for target day d: lag_k = cases(d-k) and each exogenous column taken
    at d-exog_lag.
    """
    columns = scenario_columns(scenario, weekday)
    start = max(n_lags, exog_lag)
    n = len(panel.days)
    if n <= start:
        raise InsufficientHistory(f"panel has {n} days; need more than {start}")

    targets = np.arange(start, n)
    cases = np.asarray(panel.cases, dtype=float)
    blocks = [cases[targets - k][:, None] for k in range(1, n_lags + 1)]
    for col in SCENARIO_EXOG[scenario]:
        series = np.asarray(getattr(panel, EXOG_SOURCE[col]), dtype=float)
        blocks.append(series[targets - exog_lag][:, None])
    if weekday:
        blocks.append(np.array([panel.days[t].isoweekday() for t in targets], dtype=float)[:, None])
    X = np.hstack(blocks)
    return DesignMatrix(
        X=X,
        y=cases[targets].copy(),
        columns=columns,
        days=[panel.days[t] for t in targets],
        splits=np.asarray(panel.splits)[targets],
        scenario=scenario,
    )


@dataclass
class ScalerParams:
    columns: list
    mean: np.ndarray
    std: np.ndarray
    target_mean: float
    target_std: float
    fit_range: tuple = field(default=(None, None))

    def transform(self, X):
        return (np.asarray(X, dtype=float) - self.mean) / self.std

    def inverse_transform(self, Xs):
        return np.asarray(Xs, dtype=float) * self.std + self.mean

    def transform_target(self, y):
        return (np.asarray(y, dtype=float) - self.target_mean) / self.target_std

    def inverse_target(self, ys):
        return np.asarray(ys, dtype=float) * self.target_std + self.target_mean


def _moments(values, name):
    mean = values.mean(axis=0)
    std = values.std(axis=0)
    scale = np.maximum(1.0, np.abs(mean))
    bad = np.flatnonzero(std <= 1e-12 * scale)
    if bad.size:
        raise ConstantColumn(name[bad[0]] if isinstance(name, list) else name)
    return mean, std


def fit_scaler(matrix, fit_rows):
    rows = np.asarray(fit_rows)
    if rows.dtype == bool:
        rows = np.flatnonzero(rows)
    if rows.size == 0:
        raise InsufficientHistory("no rows to fit the scaler on")
    mean, std = _moments(matrix.X[rows], list(matrix.columns))
    t_mean, t_std = _moments(matrix.y[rows], "target")
    days = [matrix.days[i] for i in rows]
    return ScalerParams(list(matrix.columns), mean, std, float(t_mean), float(t_std),
                        (min(days), max(days)))


def standardize(matrix, fit_rows):
    """Zero-mean/unit-variance scaling with moments taken from ``fit_rows``.

    Returns the scaled matrix (features and target) and the parameters needed
    to map predictions back to case counts.
    """
    params = fit_scaler(matrix, fit_rows)
    scaled = DesignMatrix(
        params.transform(matrix.X), params.transform_target(matrix.y),
        list(matrix.columns), list(matrix.days), matrix.splits.copy(), matrix.scenario,
    )
    return scaled, params
