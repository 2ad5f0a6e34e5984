"""Feature engineering: Dataset -> 38-column feature matrix.

All temporal features are leakage-safe: lags, year-over-year deltas,
per-location trends and the pressure anomaly baseline only ever read
values at or before each row's own year, so truncating the dataset at
any year Y and rebuilding reproduces the surviving rows exactly.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass

import numpy as np

from .domain import CLIMATE_FIELDS, LAT_MAX, LAT_MIN, LON_MAX, LON_MIN, Dataset

W_PER_M2_TO_MJ = 0.0864  # W/m^2 sustained for one day, in MJ/m^2

FEATURE_MANIFEST = (
    "temperature",
    "precipitation",
    "radiation_allsky",
    "radiation_clearsky",
    "humidity",
    "dewpoint",
    "wind2m",
    "wind10m",
    "pressure",
    "lat_norm",
    "lon_norm",
    "years_since_start",
    "temp_lag1",
    "temp_lag2",
    "precip_lag1",
    "precip_lag2",
    "rad_lag1",
    "rad_lag2",
    "humid_lag1",
    "humid_lag2",
    "above_freezing",
    "risk_zone",
    "tdd_proxy",
    "fdd_proxy",
    "sw_energy_allsky",
    "sw_energy_clearsky",
    "cloud_attenuation",
    "dewpoint_depression",
    "wind_shear",
    "pressure_anomaly",
    "pf_trend_loc",
    "temp_trend_loc",
    "temp_yoy",
    "precip_yoy",
    "pf_yoy",
    "pf_lag1",
    "pf_lag2",
    "temp_x_radiation",
)

# columns derived from the target's own history; excludable for
# sensitivity analysis
PF_DERIVED_COLUMNS = ("pf_trend_loc", "pf_yoy", "pf_lag1", "pf_lag2")


@dataclass(frozen=True)
class FeatureMatrix:
    """Dense feature matrix aligned to (location, year) rows."""

    X: np.ndarray            # (n, p) float64
    y: np.ndarray            # (n,) permafrost fraction
    names: tuple[str, ...]
    lat: np.ndarray
    lon: np.ndarray
    year: np.ndarray
    loc_id: np.ndarray
    col_mean: np.ndarray
    col_sd: np.ndarray

    @property
    def n_rows(self) -> int:
        return self.X.shape[0]

    @property
    def manifest_hash(self) -> str:
        return hashlib.sha256("|".join(self.names).encode()).hexdigest()[:16]

    def subset(self, mask: np.ndarray) -> "FeatureMatrix":
        """Row-subset view with per-column stats recomputed."""
        X = self.X[mask]
        sd = X.std(axis=0)
        return FeatureMatrix(
            X=X,
            y=self.y[mask],
            names=self.names,
            lat=self.lat[mask],
            lon=self.lon[mask],
            year=self.year[mask],
            loc_id=self.loc_id[mask],
            col_mean=X.mean(axis=0),
            col_sd=np.where(sd > 0, sd, 1.0),
        )


def assemble(columns: dict[str, np.ndarray], y, lat, lon, year, loc_id,
             names=FEATURE_MANIFEST) -> FeatureMatrix:
    """Stack named columns in manifest order into a FeatureMatrix."""
    missing = [n for n in names if n not in columns]
    if missing:
        raise ValueError(f"missing feature columns: {missing}")
    X = np.column_stack([np.asarray(columns[n], dtype=np.float64) for n in names])
    if np.isnan(X).any():
        j = int(np.flatnonzero(np.isnan(X).any(axis=0))[0])
        raise ValueError(f"feature column {names[j]!r} contains missing values")
    sd = X.std(axis=0)
    return FeatureMatrix(
        X=X,
        y=np.asarray(y, dtype=np.float64),
        names=tuple(names),
        lat=np.asarray(lat),
        lon=np.asarray(lon),
        year=np.asarray(year),
        loc_id=np.asarray(loc_id),
        col_mean=X.mean(axis=0),
        col_sd=np.where(sd > 0, sd, 1.0),
    )


def impute_missing(dataset: Dataset) -> Dataset:
    """Fill missing climate cells; permafrost fraction is never imputed.

    Policy per cell: previous-year carry-forward within the location,
    else the location's median over its observed years, else the
    domain-wide median of the field.
    """
    L, Y = dataset.n_locations, dataset.n_years
    cols = {
        "lat": dataset.lat,
        "lon": dataset.lon,
        "year": dataset.year,
        "permafrost_fraction": dataset.pf,
    }
    changed = False
    for name in CLIMATE_FIELDS:
        v = getattr(dataset, name)
        if not np.isnan(v).any():
            cols[name] = v
            continue
        changed = True
        grid = v.reshape(L, Y).copy()
        for j in range(1, Y):
            gap = np.isnan(grid[:, j])
            grid[gap, j] = grid[gap, j - 1]
        # leading gaps: location median of observed values, then domain median
        lead = np.isnan(grid)
        if lead.any():
            with np.errstate(all="ignore"):
                loc_med = np.nanmedian(grid, axis=1)
            dom_med = np.nanmedian(grid)
            loc_med = np.where(np.isnan(loc_med), dom_med, loc_med)
            grid[lead] = np.broadcast_to(loc_med[:, None], grid.shape)[lead]
        cols[name] = grid.ravel()
    if not changed:
        return dataset
    return Dataset(cols)


def degree_day_proxies(T):
    """Annual-mean thawing/freezing degree-day proxies (degC·day)."""
    T = np.asarray(T, dtype=np.float64)
    tdd = np.maximum(T, 0.0) * 365.0
    fdd = np.maximum(-T, 0.0) * 365.0
    return tdd, fdd

def threshold_indicators(T):
    """(above_freezing, risk_zone) 0/1 flags; risk zone is -2 < T <= 0."""
    T = np.asarray(T, dtype=np.float64)
    above = (T > 0.0).astype(np.float64)
    zone = ((T > -2.0) & (T <= 0.0)).astype(np.float64)
    return above, zone


def location_trend(series, upto_year: int) -> float:
    """OLS slope per year of (year, value) pairs with year <= upto_year.

    Returns 0.0 when fewer than 3 usable pairs or when the usable years
    are constant. Raises on an empty usable window.
    """
    pairs = [(y, v) for y, v in series if y <= upto_year]
    if not pairs:
        raise ValueError(f"no observations at or before {upto_year}")
    if len(pairs) < 3:
        return 0.0
    x = np.array([p[0] for p in pairs], dtype=np.float64)
    v = np.array([p[1] for p in pairs], dtype=np.float64)
    dx = x - x.mean()
    denom = np.dot(dx, dx)
    if denom == 0.0:
        return 0.0
    return float(np.dot(dx, v - v.mean()) / denom)


def _lag(grid: np.ndarray, k: int) -> np.ndarray:
    """Shift right by k along years, backfilling with the first value."""
    out = np.empty_like(grid)
    out[:, :k] = grid[:, :1]
    out[:, k:] = grid[:, :-k] if k else grid
    return out


def _expanding_trend(grid: np.ndarray) -> np.ndarray:
    """Per-row OLS slope of the strict prefix (years before each column).

    Column j holds the slope fitted on columns 0..j-1; zero when the
    prefix has fewer than 3 points. Years are consecutive, so column
    index serves as the regressor.
    """
    L, Y = grid.shape
    out = np.zeros((L, Y))
    idx = np.arange(Y, dtype=np.float64)
    s_v = np.cumsum(grid, axis=1)
    s_xv = np.cumsum(grid * idx, axis=1)
    for j in range(3, Y):
        xbar = (j - 1) / 2.0
        denom = j * (j * j - 1) / 12.0
        out[:, j] = (s_xv[:, j - 1] - xbar * s_v[:, j - 1]) / denom
    return out


def build_feature_matrix(dataset: Dataset, exclude_pf_features: bool = False) -> FeatureMatrix:
    """Compute the full 38-column feature matrix for an imputed dataset.

    ``exclude_pf_features`` drops the four columns derived from the
    target's own history (pf_trend_loc, pf_yoy, pf_lag1, pf_lag2) for
    leakage sensitivity analysis, leaving 34 columns.
    """
    for name in CLIMATE_FIELDS:
        if np.isnan(getattr(dataset, name)).any():
            raise ValueError(f"dataset not imputed: {name} has missing cells")

    L, Y = dataset.n_locations, dataset.n_years
    cols = compute_feature_columns(dataset)
    names = FEATURE_MANIFEST
    if exclude_pf_features:
        names = tuple(n for n in FEATURE_MANIFEST if n not in PF_DERIVED_COLUMNS)
    return assemble(
        cols, dataset.pf, dataset.lat, dataset.lon, dataset.year,
        dataset.loc_id, names=names,
    )


def compute_feature_columns(dataset: Dataset) -> dict[str, np.ndarray]:
    """All 38 manifest columns as flat row-aligned arrays."""
    L, Y = dataset.n_locations, dataset.n_years

    def grid(v):
        return v.reshape(L, Y)

    T = grid(dataset.temperature)
    P = grid(dataset.precipitation)
    R = grid(dataset.radiation_allsky)
    H = grid(dataset.humidity)
    PF = grid(dataset.pf)
    press = grid(dataset.pressure)

    above, zone = threshold_indicators(dataset.temperature)
    tdd, fdd = degree_day_proxies(dataset.temperature)

    clearsky = dataset.radiation_clearsky
    with np.errstate(divide="ignore", invalid="ignore"):
        atten = np.where(clearsky != 0.0, 1.0 - dataset.radiation_allsky / clearsky, 0.0)

    # expanding mean of pressure over all rows with year <= the row's year
    per_year_mean = press.mean(axis=0)
    expanding_mean = np.cumsum(per_year_mean) / np.arange(1, Y + 1)

    pf_lag1, pf_lag2 = _lag(PF, 1), _lag(PF, 2)
    cols = {
        "temperature": dataset.temperature,
        "precipitation": dataset.precipitation,
        "radiation_allsky": dataset.radiation_allsky,
        "radiation_clearsky": dataset.radiation_clearsky,
        "humidity": dataset.humidity,
        "dewpoint": dataset.dewpoint,
        "wind2m": dataset.wind2m,
        "wind10m": dataset.wind10m,
        "pressure": dataset.pressure,
        "lat_norm": (dataset.lat - LAT_MIN) / (LAT_MAX - LAT_MIN),
        "lon_norm": (dataset.lon - LON_MIN) / (LON_MAX - LON_MIN),
        "years_since_start": (dataset.year - dataset.start_year).astype(np.float64),
        "temp_lag1": _lag(T, 1).ravel(),
        "temp_lag2": _lag(T, 2).ravel(),
        "precip_lag1": _lag(P, 1).ravel(),
        "precip_lag2": _lag(P, 2).ravel(),
        "rad_lag1": _lag(R, 1).ravel(),
        "rad_lag2": _lag(R, 2).ravel(),
        "humid_lag1": _lag(H, 1).ravel(),
        "humid_lag2": _lag(H, 2).ravel(),
        "above_freezing": above,
        "risk_zone": zone,
        "tdd_proxy": tdd,
        "fdd_proxy": fdd,
        "sw_energy_allsky": dataset.radiation_allsky * W_PER_M2_TO_MJ,
        "sw_energy_clearsky": dataset.radiation_clearsky * W_PER_M2_TO_MJ,
        "cloud_attenuation": atten,
        "dewpoint_depression": dataset.temperature - dataset.dewpoint,
        "wind_shear": dataset.wind10m - dataset.wind2m,
        "pressure_anomaly": (press - expanding_mean[None, :]).ravel(),
        "pf_trend_loc": _expanding_trend(PF).ravel(),
        "temp_trend_loc": _expanding_trend(T).ravel(),
        "temp_yoy": (T - _lag(T, 1)).ravel(),
        "precip_yoy": (P - _lag(P, 1)).ravel(),
        "pf_yoy": (pf_lag1 - pf_lag2).ravel(),
        "pf_lag1": pf_lag1.ravel(),
        "pf_lag2": pf_lag2.ravel(),
        "temp_x_radiation": dataset.temperature * dataset.radiation_allsky,
    }
    return cols


def write_feature_csv(path, fm: FeatureMatrix, comment_lines=()) -> None:
    """Debug dump: lat, lon, year, target, then the manifest columns."""
    from .data_io import write_table

    header = ["lat", "lon", "year", "permafrost_fraction", *fm.names]
    columns = [fm.lat, fm.lon, fm.year, fm.y] + [fm.X[:, j] for j in range(len(fm.names))]
    write_table(path, header, columns, comment_lines)
