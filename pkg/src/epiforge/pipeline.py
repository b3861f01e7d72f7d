"""End-to-end experiment: panel -> fits -> recurrent forecasts -> ensembles -> attributions.

Everything is computed in memory first; report files are only written once
every stage has succeeded, each through a temp-file rename.
"""

from __future__ import annotations

import datetime as dt
import logging
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import ensemble, explain, features, ingest, popmodels, reports
from .errors import ConfigError
from .ml import recurrent_forecast_many
from .ml.models import GB_DEFAULT_DEPTH, RegressorKind, fit_regressor
from .ml.search import HyperGrid, grid_search

log = logging.getLogger("epiforge")

ML_KINDS = list(RegressorKind)
SUBSPLITS = ("no-omicron", "omicron")


@dataclass
class ScenarioRun:
    scenario: int
    matrix: features.DesignMatrix
    scaler: features.ScalerParams
    models: dict = field(default_factory=dict)  # short name -> fitted model
    search: dict = field(default_factory=dict)  # short name -> (best, [(cand, score)])
    forecasts: dict = field(default_factory=dict)  # short name -> {anchor: array}


@dataclass
class PipelineResult:
    config: object
    panel: ingest.RegionPanel
    anchors: dict  # split -> [dates]
    actuals: dict  # anchor -> observed horizon
    pop_forecasts: dict = field(default_factory=dict)  # kind -> {anchor: array}
    pop_fits: dict = field(default_factory=dict)  # kind -> {anchor: GrowthModelFit}
    ml: dict = field(default_factory=dict)  # scenario -> ScenarioRun
    sets: dict = field(default_factory=dict)  # scenario -> split -> [ForecastSet]
    weights: dict = field(default_factory=dict)  # scenario -> EnsembleWeights
    metrics: dict = field(default_factory=dict)
    mpe_rows: list = field(default_factory=list)
    attribution: object = None
    dependence: dict = field(default_factory=dict)
    timings: dict = field(default_factory=dict)


def load_panel(cfg):
    records = ingest.load_all(cfg.data)
    return ingest.build_panel(records, cfg.region, cfg.calendar, cfg.split_dates,
                              interp_cutoff=cfg.vaccination_cutoff)


def forecast_anchors(panel, cfg):
    """Anchor dates per split; the whole horizon must stay inside the split."""
    days = panel.days
    earliest = max(cfg.window - 1, features.N_LAGS - 1, cfg.exog_lag - 1)
    out = {}
    for split in (ingest.VAL, ingest.TEST):
        bounds = panel.split_bounds(split)
        if bounds is None:
            out[split] = []
            continue
        first = panel.index_of(bounds[0]) - 1
        last = panel.index_of(bounds[1]) - cfg.horizon
        out[split] = [days[n] for n in range(max(first, earliest), last + 1)]
    if not out[ingest.VAL]:
        raise ConfigError(f"validation split shorter than the {cfg.horizon}-day horizon")
    if not out[ingest.TEST]:
        raise ConfigError(f"test split shorter than the {cfg.horizon}-day horizon")
    return out


def run_population(panel, anchors, cfg):
    forecasts, fits = {}, {}
    for kind in popmodels.KINDS:
        forecasts[kind.value], fits[kind.value] = {}, {}
        for day in anchors:
            n = panel.index_of(day)
            window = popmodels.window_cumulative(panel.cases, n, cfg.window)
            start = panel.days[n - cfg.window + 1]
            fit = popmodels.fit_population_model(kind, window, window_length=cfg.window,
                                                 window_start=start)
            fits[kind.value][day] = fit
            forecasts[kind.value][day] = popmodels.forecast_population(fit, cfg.horizon)
    return forecasts, fits


def run_ml(panel, scenario, anchors, cfg):
    matrix = features.build_design_matrix(panel, scenario, exog_lag=cfg.exog_lag,
                                          weekday=cfg.weekday_feature)
    train = matrix.mask(ingest.TRAIN)
    scaled, scaler = features.standardize(matrix, train)
    Xtr, ytr = scaled.X[train], scaled.y[train]
    run = ScenarioRun(scenario, matrix, scaler)
    grid = HyperGrid({k: cfg.grid_for(k) for k in ML_KINDS}, cfg.folds)
    for kind in ML_KINDS:
        t0 = time.perf_counter()
        best, scores = grid_search(kind, Xtr, ytr, grid, cfg.seed)
        params = dict(best)
        if kind is RegressorKind.GRADIENT_BOOSTING and "max_depth" not in params:
            params["max_depth"] = cfg.gb_max_depth
        model = fit_regressor(kind, Xtr, ytr, params, cfg.seed)
        preds = recurrent_forecast_many(model, panel, anchors, cfg.horizon, scenario, scaler,
                                        exog_lag=cfg.exog_lag, weekday=cfg.weekday_feature)
        name = kind.short
        run.models[name] = model
        run.search[name] = (best, scores)
        run.forecasts[name] = {day: row for day, row in zip(anchors, preds)}
        log.info("scenario %d %s best=%s (%.1fs)", scenario, name, best, time.perf_counter() - t0)
    return run


def _sets_for(result, scenario, split):
    sets = []
    for day in result.anchors[split]:
        fc, fam = {}, {}
        for kind, by_anchor in result.pop_forecasts.items():
            fc[kind], fam[kind] = by_anchor[day], ensemble.POP
        run = result.ml.get(scenario)
        if run is not None:
            for name, by_anchor in run.forecasts.items():
                fc[name], fam[name] = by_anchor[day], ensemble.ML
        sets.append(ensemble.ForecastSet(day, fc, fam))
    return sets


def _subsets(cfg):
    subsets = []
    if cfg.use_ml:
        subsets.append("ML")
    if cfg.use_pop:
        subsets.append("Pop")
    if cfg.use_ml and cfg.use_pop:
        subsets.append("All")
    return subsets


def _entries(sets, actuals, scenario, weights, cfg):
    entries = []
    for method in cfg.aggregations:
        for subset in _subsets(cfg):
            m, r, curve = ensemble.evaluate(sets, actuals, method, subset, weights)
            entries.append({"scenario": scenario, "aggregation": method, "subset": subset,
                            "mape": m, "rmse": r, "per_timestep_mpe": [float(v) for v in curve]})
    return entries


def _subsplit_sets(sets, cfg):
    return {
        "no-omicron": ensemble.filter_anchors(sets, end=cfg.omicron_date),
        "omicron": ensemble.filter_anchors(sets, start=cfg.omicron_date),
    }


def evaluate_result(result):
    cfg = result.config
    results, subsplits, per_model = [], {k: [] for k in SUBSPLITS}, []
    mpe_rows = []
    for scenario in cfg.scenarios:
        val_sets = _sets_for(result, scenario, ingest.VAL)
        test_sets = _sets_for(result, scenario, ingest.TEST)
        result.sets[scenario] = {ingest.VAL: val_sets, ingest.TEST: test_sets}
        val_rmse = ensemble.model_validation_rmse(val_sets, result.actuals)
        weights = ensemble.wavg_weights(val_rmse)
        result.weights[scenario] = weights

        results.extend(_entries(test_sets, result.actuals, scenario, weights, cfg))
        for name, part in _subsplit_sets(test_sets, cfg).items():
            if part:
                subsplits[name].extend(_entries(part, result.actuals, scenario, weights, cfg))

        for model in test_sets[0].members("All"):
            preds = [s.forecasts[model] for s in test_sets]
            m, r, _ = ensemble.mean_errors(preds, [result.actuals[s.anchor] for s in test_sets])
            per_model.append({"scenario": scenario, "model": model,
                              "family": test_sets[0].families[model],
                              "val_rmse": val_rmse[model], "weight": weights[model],
                              "test_mape": m, "test_rmse": r})

        groups = [(ingest.VAL, val_sets), (ingest.TEST, test_sets)]
        groups += [(name, part) for name, part in _subsplit_sets(test_sets, cfg).items() if part]
        for split, sets in groups:
            curves = ensemble.mpe_per_timestep(sets, result.actuals)
            for family, c in curves.items():
                for step, (mean, sd) in enumerate(zip(c["mpe"], c["std"]), start=1):
                    mpe_rows.append([split, scenario, family, step, reports.fmt(mean), reports.fmt(sd)])

    anchors = {split: {"first": days[0].isoformat(), "last": days[-1].isoformat(), "count": len(days)}
               for split, days in result.anchors.items()}
    result.metrics = {
        "region": cfg.region,
        "seed": cfg.seed,
        "split": "test",
        "horizon": cfg.horizon,
        "omicron_date": cfg.omicron_date.isoformat(),
        "anchors": anchors,
        "results": results,
        "subsplits": subsplits,
        "models": per_model,
    }
    result.mpe_rows = mpe_rows
    return result


def run_explain(result):
    cfg = result.config
    scenario = cfg.explain_scenario or max(cfg.scenarios)
    run = result.ml[scenario]
    matrix, scaler = run.matrix, run.scaler
    scaled_X = scaler.transform(matrix.X)
    background = scaled_X[matrix.mask(ingest.TRAIN)]
    values = {}
    for i, (name, model) in enumerate(sorted(run.models.items())):
        phi = explain.shapley_matrix(model, scaled_X, background,
                                     n_permutations=cfg.explain_permutations, seed=cfg.seed + i)
        values[name] = phi * scaler.target_std  # case units
    report = explain.importance_summary(run.models, scaled_X, background, matrix.columns,
                                        values=values, normalize=True)
    dependence = {}
    for feature in matrix.columns:
        pairs = [explain.dependence_export(model, scaled_X, feature, matrix.columns, background,
                                           raw_rows=matrix.X, shap_values=values[name])
                 for name, model in sorted(run.models.items())]
        raw = [p[0] for p in pairs[0]]
        phi = np.mean([[p[1] for p in model_pairs] for model_pairs in pairs], axis=0)
        dependence[feature] = list(zip(raw, (float(v) for v in phi)))
    result.attribution = report
    result.dependence = dependence
    return result


def run_pipeline(cfg, *, evaluate=True, explain_models=None, write=True):
    """Run the configured experiment; returns a :class:`PipelineResult`.

    ``explain_models`` defaults to the config's explain flag (and needs ML models).
    """
    timings = {}
    t0 = time.perf_counter()
    panel = load_panel(cfg)
    anchors = forecast_anchors(panel, cfg)
    all_anchors = anchors[ingest.VAL] + anchors[ingest.TEST]
    actuals = {}
    for day in all_anchors:
        n = panel.index_of(day)
        actuals[day] = np.asarray(panel.cases[n + 1:n + 1 + cfg.horizon], dtype=float)
    result = PipelineResult(cfg, panel, anchors, actuals)
    timings["ingest"] = time.perf_counter() - t0

    do_explain = cfg.explain if explain_models is None else explain_models
    do_explain = do_explain and cfg.use_ml

    if evaluate and cfg.use_pop:
        t = time.perf_counter()
        result.pop_forecasts, result.pop_fits = run_population(panel, all_anchors, cfg)
        timings["population"] = time.perf_counter() - t
    if cfg.use_ml and (evaluate or do_explain):
        t = time.perf_counter()
        wanted = cfg.scenarios if evaluate else [cfg.explain_scenario or max(cfg.scenarios)]
        for scenario in wanted:
            result.ml[scenario] = run_ml(panel, scenario, all_anchors, cfg)
        timings["ml"] = time.perf_counter() - t
    if evaluate:
        evaluate_result(result)
    if do_explain:
        t = time.perf_counter()
        run_explain(result)
        timings["explain"] = time.perf_counter() - t
    result.timings = timings
    if write:
        write_reports(result, cfg.out)
    return result


# --- reports --------------------------------------------------------------

def _forecast_rows(result):
    rows = []
    for split, days in result.anchors.items():
        for day in days:
            actual = result.actuals[day]
            for kind, by_anchor in result.pop_forecasts.items():
                for step, value in enumerate(by_anchor[day], start=1):
                    rows.append([split, "", day.isoformat(), kind, ensemble.POP, step,
                                 (day + dt.timedelta(days=step)).isoformat(),
                                 reports.fmt(value), reports.fmt(actual[step - 1])])
            for scenario, run in sorted(result.ml.items()):
                for name, by_anchor in run.forecasts.items():
                    for step, value in enumerate(by_anchor[day], start=1):
                        rows.append([split, scenario, day.isoformat(), name, ensemble.ML, step,
                                     (day + dt.timedelta(days=step)).isoformat(),
                                     reports.fmt(value), reports.fmt(actual[step - 1])])
    return rows


def _models_metadata(result):
    cfg = result.config
    train = result.panel.split_bounds(ingest.TRAIN)
    out = {"population": {}, "ml": {}}
    for kind, fits in result.pop_fits.items():
        out["population"][kind] = [fit.to_dict() for _, fit in sorted(fits.items())]
    for scenario, run in sorted(result.ml.items()):
        entry = {}
        for name, model in run.models.items():
            meta = model.metadata()
            best, scores = run.search[name]
            meta["train_range"] = [train[0].isoformat(), train[1].isoformat()]
            meta["cv_rmse"] = [{"candidate": {k: (v if v is not None else "unlimited")
                                              for k, v in cand.items()}, "rmse": score}
                               for cand, score in scores]
            entry[name] = meta
        out["ml"][str(scenario)] = {"columns": run.matrix.columns, "models": entry,
                                    "format_version": 1}
    out["seed"] = cfg.seed
    return out


def _charts(result):
    cfg = result.config
    charts = {}
    test_days = result.anchors[ingest.TEST]
    panel = result.panel
    first = panel.index_of(test_days[0])
    last = panel.index_of(test_days[-1]) + cfg.horizon
    origin = panel.days[first]
    actual = ("actual", list(range(0, last - first + 1)), list(panel.cases[first:last + 1]))
    method = cfg.aggregations[0]
    subset = "All" if cfg.use_ml and cfg.use_pop else ("ML" if cfg.use_ml else "Pop")
    for scenario in cfg.scenarios:
        series = [actual]
        sets = result.sets[scenario][ingest.TEST]
        for fset in sets[::7]:
            pred = ensemble.aggregate(fset, method, subset, result.weights[scenario])
            off = (fset.anchor - origin).days
            series.append((f"{subset} {method} forecast", list(range(off + 1, off + 1 + len(pred))),
                           list(pred)))
        charts[f"forecast_s{scenario}.svg"] = reports.line_chart(
            series, f"Scenario {scenario}: test-split forecasts vs actual cases",
            x_label=f"days since {origin.isoformat()}", y_label="daily cases")
    mpe_series = []
    for split, scenario, family, step, mean, _ in result.mpe_rows:
        if split != ingest.TEST:
            continue
        label = f"{family} s{scenario}" if family == ensemble.ML else family
        mpe_series.append((label, step, float(mean)))
    grouped = {}
    for label, step, mean in mpe_series:
        xs, ys = grouped.setdefault(label, ([], []))
        if step not in xs:
            xs.append(step)
            ys.append(mean)
    charts["mpe_timestep.svg"] = reports.line_chart(
        [(label, xs, ys) for label, (xs, ys) in grouped.items()],
        "Mean percentage error per forecast step (test split)",
        x_label="forecast step", y_label="MPE")
    return charts


def write_reports(result, out_dir):
    out = Path(out_dir)
    cfg = result.config
    files = []
    if result.metrics:
        reports.write_rows(out / "forecasts.csv",
                           ["split", "scenario", "anchor", "model", "family", "step", "date",
                            "value", "actual"],
                           _forecast_rows(result))
        reports.write_json(out / "metrics.json", result.metrics)
        reports.write_rows(out / "mpe_timestep.csv",
                           ["split", "scenario", "family", "step", "mpe", "std"], result.mpe_rows)
        reports.write_json(out / "models.json", _models_metadata(result))
        files += ["forecasts.csv", "metrics.json", "mpe_timestep.csv", "models.json"]
        if cfg.charts:
            for name, svg in _charts(result).items():
                reports.write_text(out / name, svg)
                files.append(name)
    if result.attribution is not None:
        report = result.attribution
        with reports.atomic_path(out / "importance.csv") as tmp:
            report.to_csv(tmp)
        rows = [[f, name, reports.fmt(v)] for name, vals in sorted(report.mean_abs.items())
                for f, v in zip(report.features, vals)]
        reports.write_rows(out / "importance_by_model.csv", ["feature", "model", "mean_abs_shap"], rows)
        files += ["importance.csv", "importance_by_model.csv"]
        for feature, pairs in result.dependence.items():
            with reports.atomic_path(out / f"dependence_{feature}.csv") as tmp:
                explain.write_dependence_csv(pairs, tmp)
            files.append(f"dependence_{feature}.csv")
    return files
