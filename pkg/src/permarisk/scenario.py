"""Warming-scenario projection: perturbed baseline features and hybrid deltas.

Each scenario applies a uniform Arctic temperature increase to the
latest observed year (the baseline) and projects permafrost fraction at
baseline + horizon. The ML prediction on the perturbed features is
blended with a physical sensitivity model and clamped so warming never
produces a permafrost gain.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .domain import Dataset, ScenarioSpec
from .features import (
    LAT_MAX,
    LAT_MIN,
    LON_MAX,
    LON_MIN,
    W_PER_M2_TO_MJ,
    FeatureMatrix,
    assemble,
    build_feature_matrix,
    degree_day_proxies,
    impute_missing,
    threshold_indicators,
)
from .stacking import StackedModel, predict_with_uncertainty_arrays

# Arctic warming deltas per pathway; the horizon is shared.
SCENARIO_CATALOG: tuple[ScenarioSpec, ...] = (
    ScenarioSpec(id="RCP26", arctic_delta_t=1.5, horizon_years=10),
    ScenarioSpec(id="RCP45", arctic_delta_t=3.0, horizon_years=10),
    ScenarioSpec(id="RCP85", arctic_delta_t=5.0, horizon_years=10),
)

# Physical sensitivity of permafrost fraction to warming, pp per degC.
PHYS_PP_PER_DEGC = -10.0

# Piecewise weight on the physical sensitivity, keyed by baseline mean
# annual temperature: (upper_edge, weight) rows, first row whose edge
# is >= T applies. Warm-side amplification peaks just below freezing.
DEFAULT_W_TIERS: tuple[tuple[float, float], ...] = (
    (-10.0, 0.2),
    (-5.0, 0.5),
    (-2.0, 1.0),
    (0.0, 1.5),
    (math.inf, 1.25),
)

DEFAULT_ML_WEIGHT = 0.6
DEFAULT_PHYSICS_WEIGHT = 0.4


@dataclass(frozen=True)
class ProjectionResult:
    """Hybrid projection for one location under one scenario."""

    scenario: str
    lat: float
    lon: float
    baseline_pf: float
    ml_delta: float
    phys_delta: float
    hybrid_delta: float
    projected_pf: float
    sigma: float

    def __post_init__(self):
        if not (0.0 <= self.projected_pf <= 100.0):
            raise ValueError(
                f"projected_pf must lie in [0, 100], got {self.projected_pf}")
        if self.sigma < 0.0:
            raise ValueError(f"sigma must be >= 0, got {self.sigma}")


@dataclass(frozen=True)
class ScenarioSummary:
    """Distribution summary of declines (pp lost) across locations."""

    scenario: str
    n_locations: int
    mean_decline: float
    median_decline: float
    prop_ge5: float
    prop_ge10: float
    prop_gt20: float


def physical_sensitivity_weight(t_base, tiers=None):
    """Sensitivity weight w(T) from the tier table; scalar in, scalar out."""
    edges, weights = _split_tiers(DEFAULT_W_TIERS if tiers is None else tiers)
    t = np.asarray(t_base, dtype=np.float64)
    if not np.isfinite(t).all():
        raise ValueError("baseline temperature must be finite")
    idx = np.searchsorted(edges, t, side="left")
    w = weights[idx]
    return float(w) if np.ndim(t_base) == 0 else w


def physical_delta(t_base, delta_t, tiers=None):
    """Physics-model permafrost change in pp: -10 * delta_t * w(T_base)."""
    if np.any(np.asarray(delta_t) < 0.0):
        raise ValueError("delta_t must be >= 0")
    return PHYS_PP_PER_DEGC * delta_t * physical_sensitivity_weight(t_base, tiers)


def _split_tiers(tiers):
    rows = tuple((float(e), float(w)) for e, w in tiers)
    if not rows:
        raise ValueError("tier table is empty")
    edges = np.array([e for e, _ in rows])
    if not (np.diff(edges) > 0).all():
        raise ValueError("tier edges must be strictly increasing")
    if not math.isinf(edges[-1]):
        raise ValueError("tier table must end with an infinite edge")
    return edges, np.array([w for _, w in rows])


def build_scenario_features(dataset: Dataset, scenario,
                            baseline_year: int | None = None) -> FeatureMatrix:
    """Feature rows for the horizon year under a uniform warming delta.

    One row per location at year baseline + horizon. Temperature rises
    by the scenario delta; every other climate variable holds its
    baseline value. Lagged and year-over-year temperature features
    follow a linear ramp from the baseline to the horizon year, trend
    and anomaly features freeze at their baseline values, and the
    threshold / degree-day features are recomputed from the perturbed
    temperature. Permafrost lag features persist the baseline fraction.
    """
    ds = impute_missing(dataset)
    base_year = ds.end_year if baseline_year is None else int(baseline_year)
    if base_year not in range(ds.start_year, ds.end_year + 1):
        raise ValueError(
            f"baseline year {base_year} not present in dataset years "
            f"[{ds.start_year}, {ds.end_year}]")

    dt = float(scenario.arctic_delta_t)
    h = int(scenario.horizon_years)
    if h < 1:
        raise ValueError(f"horizon_years must be >= 1, got {h}")

    hist = build_feature_matrix(ds)
    at_base = hist.year == base_year
    hx = {name: hist.X[at_base, j] for j, name in enumerate(hist.names)}

    n = int(at_base.sum())
    L, Y = ds.n_locations, ds.n_years
    yi = base_year - ds.start_year

    def held(field):
        return getattr(ds, field).reshape(L, Y)[:, yi].copy()

    T0 = held("temperature")
    rad = held("radiation_allsky")
    radc = held("radiation_clearsky")
    pf0 = ds.pf.reshape(L, Y)[:, yi].copy()
    lat = ds.lat.reshape(L, Y)[:, yi].copy()
    lon = ds.lon.reshape(L, Y)[:, yi].copy()

    def temp_at(k):
        # temperature k years before the horizon, on the linear ramp
        j = h - k
        if j >= 0:
            return T0 + dt * j / h
        return hx["temperature"] if j == 0 else hx[f"temp_lag{-j}"]

    def held_lag(prefix, field, k):
        # held variables keep the baseline value at and after the
        # baseline year; earlier years fall back to historical lags
        j = h - k
        if j >= 0:
            return held(field)
        return hx[f"{prefix}_lag{-j}"]

    T = T0 + dt
    above, zone = threshold_indicators(T)
    tdd, fdd = degree_day_proxies(T)

    cols = {
        "temperature": T,
        "precipitation": held("precipitation"),
        "radiation_allsky": rad,
        "radiation_clearsky": radc,
        "humidity": held("humidity"),
        "dewpoint": held("dewpoint"),
        "wind2m": held("wind2m"),
        "wind10m": held("wind10m"),
        "pressure": held("pressure"),
        "lat_norm": (lat - LAT_MIN) / (LAT_MAX - LAT_MIN),
        "lon_norm": (lon - LON_MIN) / (LON_MAX - LON_MIN),
        "years_since_start": np.full(n, float(base_year + h - ds.start_year)),
        "temp_lag1": temp_at(1),
        "temp_lag2": temp_at(2),
        "precip_lag1": held_lag("precip", "precipitation", 1),
        "precip_lag2": held_lag("precip", "precipitation", 2),
        "rad_lag1": held_lag("rad", "radiation_allsky", 1),
        "rad_lag2": held_lag("rad", "radiation_allsky", 2),
        "humid_lag1": held_lag("humid", "humidity", 1),
        "humid_lag2": held_lag("humid", "humidity", 2),
        "above_freezing": above,
        "risk_zone": zone,
        "tdd_proxy": tdd,
        "fdd_proxy": fdd,
        "sw_energy_allsky": rad * W_PER_M2_TO_MJ,
        "sw_energy_clearsky": radc * W_PER_M2_TO_MJ,
        "cloud_attenuation": np.where(radc != 0.0, 1.0 - rad / radc, 0.0),
        "dewpoint_depression": T - held("dewpoint"),
        "wind_shear": held("wind10m") - held("wind2m"),
        "pressure_anomaly": hx["pressure_anomaly"],
        "pf_trend_loc": hx["pf_trend_loc"],
        "temp_trend_loc": hx["temp_trend_loc"],
        "temp_yoy": T - temp_at(1),
        "precip_yoy": held("precipitation") - held_lag("precip", "precipitation", 1),
        "pf_yoy": np.zeros(n),
        "pf_lag1": pf0,
        "pf_lag2": pf0,
        "temp_x_radiation": T * rad,
    }
    return assemble(
        cols, y=pf0, lat=lat, lon=lon,
        year=np.full(n, base_year + h, dtype=ds.year.dtype),
        loc_id=hist.loc_id[at_base],
    )


def hybrid_project(model: StackedModel, dataset: Dataset, scenario,
                   ml_weight: float = DEFAULT_ML_WEIGHT,
                   physics_weight: float = DEFAULT_PHYSICS_WEIGHT,
                   zero_ml: bool = False,
                   force_w: float | None = None,
                   allow_gain: bool = False,
                   tiers=None,
                   baseline_year: int | None = None) -> list[ProjectionResult]:
    """Project every location under one scenario, blending ML and physics.

    hybrid_delta = min(0, ml_weight*ml_delta + physics_weight*phys_delta)
    for a positive warming delta; the min-clamp is lifted by allow_gain.
    zero_ml and force_w pin the ML delta to zero and the sensitivity
    weight to a constant, isolating the physics arithmetic.
    """
    ds = impute_missing(dataset)
    fm = build_scenario_features(ds, scenario, baseline_year=baseline_year)
    mean, _, sigma = predict_with_uncertainty_arrays(model, fm)

    base_year = ds.end_year if baseline_year is None else int(baseline_year)
    yi = base_year - ds.start_year
    L, Y = ds.n_locations, ds.n_years
    t_base = ds.temperature.reshape(L, Y)[:, yi]
    baseline_pf = fm.y

    dt = float(scenario.arctic_delta_t)
    ml_delta = np.zeros_like(mean) if zero_ml else mean - baseline_pf
    if force_w is not None:
        w = np.full(t_base.shape, float(force_w))
    else:
        w = physical_sensitivity_weight(t_base, tiers)
    phys_delta = PHYS_PP_PER_DEGC * dt * w

    hybrid = ml_weight * ml_delta + physics_weight * phys_delta
    if dt > 0.0 and not allow_gain:
        hybrid = np.minimum(0.0, hybrid)
    projected = np.clip(baseline_pf + hybrid, 0.0, 100.0)

    return [
        ProjectionResult(
            scenario=scenario.id,
            lat=float(fm.lat[i]), lon=float(fm.lon[i]),
            baseline_pf=float(baseline_pf[i]),
            ml_delta=float(ml_delta[i]),
            phys_delta=float(phys_delta[i]),
            hybrid_delta=float(hybrid[i]),
            projected_pf=float(projected[i]),
            sigma=float(sigma[i]),
        )
        for i in range(len(baseline_pf))
    ]


def summarize_scenario(results: list[ProjectionResult]) -> ScenarioSummary:
    """Mean/median decline and exceedance proportions; decline = -hybrid_delta."""
    if not results:
        raise ValueError("no projection results to summarize")
    decline = np.array([-r.hybrid_delta for r in results])
    return ScenarioSummary(
        scenario=results[0].scenario,
        n_locations=len(results),
        mean_decline=float(decline.mean()),
        median_decline=float(np.median(decline)),
        prop_ge5=float((decline >= 5.0).mean()),
        prop_ge10=float((decline >= 10.0).mean()),
        prop_gt20=float((decline > 20.0).mean()),
    )


PROJECTION_HEADER = ("lat", "lon", "scenario", "baseline_pf", "ml_delta",
                     "phys_delta", "hybrid_delta", "projected_pf", "sigma")


def read_projection_csv(path) -> list[ProjectionResult]:
    import csv

    with open(path, newline="") as fh:
        rows = [r for r in csv.reader(fh) if r and not r[0].startswith("#")]
    if not rows or tuple(rows[0]) != PROJECTION_HEADER:
        raise ValueError(f"{path} is not a projection CSV "
                         f"(expected header {','.join(PROJECTION_HEADER)})")
    out = []
    for r in rows[1:]:
        if len(r) != len(PROJECTION_HEADER):
            raise ValueError(f"{path}: malformed row {r!r}")
        out.append(ProjectionResult(
            scenario=r[2], lat=float(r[0]), lon=float(r[1]),
            baseline_pf=float(r[3]), ml_delta=float(r[4]),
            phys_delta=float(r[5]), hybrid_delta=float(r[6]),
            projected_pf=float(r[7]), sigma=float(r[8])))
    if not out:
        raise ValueError(f"{path} holds no projection rows")
    return out


def write_projection_csv(path, results: list[ProjectionResult],
                         comment_lines=()) -> None:
    from .data_io import write_table

    columns = [
        np.array([r.lat for r in results]),
        np.array([r.lon for r in results]),
        [r.scenario for r in results],
        np.array([r.baseline_pf for r in results]),
        np.array([r.ml_delta for r in results]),
        np.array([r.phys_delta for r in results]),
        np.array([r.hybrid_delta for r in results]),
        np.array([r.projected_pf for r in results]),
        np.array([r.sigma for r in results]),
    ]
    write_table(path, list(PROJECTION_HEADER), columns, comment_lines)
