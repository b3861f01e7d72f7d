import datetime as dt

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from epiforge import features, ingest
from epiforge.errors import (
    ConstantColumn, InsufficientAnchors, MissingObservation, NoFluxData,
)

from conftest import toy_panel

SUN0 = dt.date(2021, 1, 3)  # ISO 2020-W53 Sunday


def weekly(totals, first_week=(2020, 53), dose=1):
    y, w = first_week
    monday = dt.date.fromisocalendar(y, w, 1)
    out = []
    for i, total in enumerate(totals):
        iy, iw, _ = (monday + dt.timedelta(weeks=i)).isocalendar()
        out.append(ingest.WeeklyDoseRecord(f"{iy}-W{iw:02d}", dose, total))
    return out


def both_doses(totals):
    return weekly(totals, dose=1) + weekly(totals, dose=2)


def test_sunday_anchor_is_weekly_over_seven():
    cal = ingest.calendar_days(SUN0, SUN0 + dt.timedelta(days=28))
    vax = features.daily_vaccination(both_doses([700, 1400, 2100, 2800, 3500]), cal, cal[-1])
    for i in range(5):
        assert vax.dose1_rate[7 * i] == pytest.approx(100.0 * (i + 1), abs=0)


def test_constant_anchors_give_constant_days():
    cal = ingest.calendar_days(SUN0, SUN0 + dt.timedelta(days=35))
    vax = features.daily_vaccination(both_doses([350] * 6), cal, cal[-1])
    np.testing.assert_allclose(vax.dose1_rate, 50.0, rtol=0, atol=1e-9)


def test_extrapolation_slope():
    # Sun1 = 70/7 = 10, Sun2 = 119/7 = 17; the cutoff is Sun2
    cal = ingest.calendar_days(SUN0, SUN0 + dt.timedelta(days=20))
    recs = both_doses([0, 70, 119])
    sun2 = SUN0 + dt.timedelta(days=14)
    vax = features.daily_vaccination(recs, cal, sun2)
    for k in range(1, 7):
        assert vax.dose1_rate[14 + k] == pytest.approx(17 + k * (17 - 10) / 7, rel=1e-12)


def test_vaccination_provenance(es_panel, records):
    cutoff = ingest.DEFAULT_INTERP_CUTOFF
    vax = features.daily_vaccination(records["vaccination"], es_panel.days, cutoff)
    for day, tag in zip(vax.days, vax.provenance[1]):
        allowed = {features.ANCHOR, features.INTERPOLATED} if day <= cutoff else \
            {features.ANCHOR, features.EXTRAPOLATED}
        assert tag in allowed
        assert (tag == features.ANCHOR) == (day.weekday() == 6)


def test_too_few_anchors():
    cal = ingest.calendar_days(SUN0, SUN0 + dt.timedelta(days=10))
    with pytest.raises(InsufficientAnchors):
        features.daily_vaccination(both_doses([70, 70]), cal, cal[-1])


def flux(day, origin, dest, value):
    return ingest.FluxRecord(day, origin, dest, value)


def test_mobility_flux_sums():
    d = dt.date(2021, 3, 3)
    recs = [flux(d, "AN", "AN", 100), flux(d, "AR", "AN", 20), flux(d, "AS", "AN", 5),
            flux(d, "AR", "AR", 50), flux(d, "AN", "AR", 10)]
    assert features.mobility_flux(recs, "AN", d) == 125
    assert features.mobility_flux([flux(d, "AN", "AN", 50)], "AN", d) == 50
    assert features.mobility_flux(recs, "ES", d, members=["AN", "AR"]) == 185


def test_mobility_flux_needs_intra():
    d = dt.date(2021, 3, 3)
    with pytest.raises(NoFluxData):
        features.mobility_flux([flux(d, "AR", "AN", 20)], "AN", d)


def test_mobility_day_rule():
    wed1 = dt.date(2021, 3, 3)
    sun1, wed2 = wed1 + dt.timedelta(days=4), wed1 + dt.timedelta(days=7)
    observed = {wed1: 10.0, sun1: 4.0, wed2: 12.0}
    mon = wed1 + dt.timedelta(days=5)
    cal = [mon + dt.timedelta(days=i) for i in range(6)]  # Mon..Sat
    series = features.assign_mobility_days(observed, cal)
    assert series.flux.tolist() == [10, 10, 12, 12, 12, 4]


def test_mobility_constant_and_boundary():
    cal = ingest.calendar_days(dt.date(2021, 3, 1), dt.date(2021, 3, 31))
    obs = {d: 7.0 for d in ingest.calendar_days(dt.date(2021, 2, 20), dt.date(2021, 3, 31))
           if d.weekday() in (2, 6)}
    assert np.all(features.assign_mobility_days(obs, cal).flux == 7.0)
    late = {d: v for d, v in obs.items() if d >= dt.date(2021, 3, 1)}
    with pytest.raises(MissingObservation):
        features.assign_mobility_days(late, cal)


def test_mobility_never_reads_ahead():
    cal = ingest.calendar_days(dt.date(2021, 3, 1), dt.date(2021, 4, 30))
    obs_days = [d for d in ingest.calendar_days(dt.date(2021, 2, 20), cal[-1]) if d.weekday() in (2, 6)]
    obs = {d: float(d.toordinal()) for d in obs_days}
    series = features.assign_mobility_days(obs, cal)
    for day, value in zip(cal, series.flux):
        assert value <= day.toordinal()


def test_rolling_average():
    x = np.arange(1, 8, dtype=float)
    r = features.rolling_average(x)
    assert r[6] == 4.0 and r[2] == 2.0
    np.testing.assert_array_equal(features.rolling_average(np.full(20, 3.5)), 3.5)


@settings(max_examples=60, deadline=None)
@given(arrays(np.float64, st.integers(1, 40), elements=st.floats(-1e3, 1e3)))
def test_rolling_matches_direct_mean(x):
    r = features.rolling_average(x, 7)
    direct = [x[max(0, i - 6):i + 1].mean() for i in range(len(x))]
    np.testing.assert_allclose(r, direct, rtol=1e-9, atol=1e-9)


def test_design_lag_layout():
    panel = toy_panel(40)
    dm = features.build_design_matrix(panel, 3)
    row = dm.days.index(panel.days[14])  # 15th day
    c = panel.cases
    assert dm.X[row, dm.columns.index("lag_1")] == c[13]
    assert dm.X[row, dm.columns.index("lag_14")] == c[0]
    assert dm.X[row, dm.columns.index("mob")] == panel.mobility[0]


def test_scenario_widths():
    panel = toy_panel(40)
    widths = [features.build_design_matrix(panel, s).n_features for s in (1, 2, 3, 4)]
    assert widths == [14, 16, 17, 19]


def test_leak_freedom(es_panel):
    dm = features.build_design_matrix(es_panel, 4)
    src = {"vax1": es_panel.vax_dose1, "vax2": es_panel.vax_dose2, "mob": es_panel.mobility,
           "temp": es_panel.temperature, "precip": es_panel.precipitation}
    rows = np.flatnonzero(dm.mask(ingest.TEST))
    assert rows.size == 91
    for r in rows:
        t = es_panel.index_of(dm.days[r])
        for k in range(1, 15):
            assert dm.X[r, k - 1] == es_panel.cases[t - k]
        for name, series in src.items():
            assert dm.X[r, dm.columns.index(name)] == series[t - 14]
        assert dm.y[r] == es_panel.cases[t]


def _matrix(X):
    X = np.asarray(X, dtype=float)
    n = len(X)
    return features.DesignMatrix(X, np.arange(n, dtype=float), [f"c{i}" for i in range(X.shape[1])],
                                 [dt.date(2021, 1, 1) + dt.timedelta(days=i) for i in range(n)],
                                 np.array([ingest.TRAIN] * n), 1)


def test_standardize_examples():
    m = _matrix([[0.0], [2.0], [4.0]])
    scaled, params = features.standardize(m, [0, 1])
    assert scaled.X[:2, 0].tolist() == [-1.0, 1.0]
    assert scaled.X[2, 0] == 3.0
    with pytest.raises(ConstantColumn):
        features.standardize(_matrix([[1.0, 5.0], [2.0, 5.0]]), [0, 1])


@settings(max_examples=50, deadline=None)
@given(arrays(np.float64, (12, 3), elements=st.floats(-1e4, 1e4)))
def test_standardize_inverse(X):
    X = X + np.arange(12)[:, None] * np.array([1.0, 2.0, 3.0])  # keep columns non-constant
    m = _matrix(X)
    _, params = features.standardize(m, np.arange(12))
    back = params.inverse_transform(params.transform(X))
    np.testing.assert_allclose(back, X, rtol=1e-12, atol=1e-12 * np.abs(X).max())
