"""Dataset CSV I/O and the synthetic dataset generator.

The generator produces a statistically faithful stand-in for the real
panel: permafrost fraction follows a logistic response to mean annual
temperature, temperature follows a piecewise latitude profile with a
longitude modulation, a linear warming trend, shared interannual
anomalies, and per-location microclimate offsets. All randomness is
drawn from named substreams of a single master seed, so equal configs
produce byte-identical datasets.
"""

from __future__ import annotations

import logging
import math
import zlib
from dataclasses import dataclass

import numpy as np

from .domain import CLIMATE_FIELDS, Dataset

log = logging.getLogger(__name__)

CSV_HEADER = (
    "lat,lon,year,permafrost_fraction,temperature,precipitation,"
    "radiation_allsky,radiation_clearsky,humidity,dewpoint,wind2m,wind10m,pressure"
)

# Latitude profile of mean annual temperature: a warm southern shelf, a
# steep drop across the mid-latitude transition, a near-flat stretch,
# then a colder far north. Slopes in degC per degree latitude; knees in
# degrees latitude. Calibrated numerically so that the generated panel
# lands inside the target windows (mean pf 70-80, median 77-87,
# pf-latitude band slope 10-20 pp/deg over 62-68N, corr(T, pf) <= -0.80).
_T60 = 0.85          # degC at 60N
_SLOPE_SHELF = 0.23
_SLOPE_STEEP = 1.85
_SLOPE_FLAT = 0.11
_SLOPE_NORTH = 1.05
_KNEE0, _K0 = 62.6, 0.45
_KNEE1, _K1 = 65.55, 0.6
_KNEE2, _K2 = 71.9, 1.2

_LON_AMPLITUDE = 0.85   # degC, continentality wave over the longitude span
_LOC_OFFSET_SD = 0.8    # degC, per-location microclimate
_YEAR_ANOMALY_SD = 0.45  # degC, shared across locations within a year


@dataclass(frozen=True)
class SynthConfig:
    """Configuration of the synthetic panel generator."""

    n_locations: int
    seed: int
    year_start: int = 2005
    year_end: int = 2021
    warming_trend: float = 0.04      # degC per year
    noise_sd_temp: float = 0.7       # degC, per-row observation noise
    noise_sd_pf: float = 2.0         # pp, per-row fraction noise
    logistic_center: float = -3.0    # degC
    logistic_width: float = 1.8      # degC
    missing_rate: float = 0.0        # fraction of climate cells masked

    def __post_init__(self):
        if self.n_locations < 1:
            raise ValueError(f"n_locations must be >= 1, got {self.n_locations}")
        if self.year_end < self.year_start:
            raise ValueError(f"empty year range {self.year_start}..{self.year_end}")
        if self.logistic_width <= 0.0:
            raise ValueError(f"logistic_width must be > 0, got {self.logistic_width}")
        if not (0.0 <= self.missing_rate < 1.0):
            raise ValueError(f"missing_rate must be in [0, 1), got {self.missing_rate}")


def substream(seed: int, name: str) -> np.random.Generator:
    """Deterministic named RNG substream of a master seed."""
    ss = np.random.SeedSequence([seed, zlib.crc32(name.encode())])
    return np.random.default_rng(ss)


def snap6(values: np.ndarray) -> np.ndarray:
    """Round floats to 6 significant digits so CSV rendering round-trips exactly."""
    return np.array([float(f"{v:.6g}") for v in values])


def _softplus(x):
    return np.logaddexp(0.0, x)


def _knee_integral(lat, c, k):
    # integral over [60, lat] of sigmoid((l - c)/k) dl
    return k * (_softplus((lat - c) / k) - _softplus((60.0 - c) / k))


def latitude_temperature(lat: np.ndarray) -> float | np.ndarray:
    """Baseline mean annual temperature at a latitude (no noise terms)."""
    drop = (
        _SLOPE_SHELF * (lat - 60.0)
        + (_SLOPE_STEEP - _SLOPE_SHELF) * _knee_integral(lat, _KNEE0, _K0)
        + (_SLOPE_FLAT - _SLOPE_STEEP) * _knee_integral(lat, _KNEE1, _K1)
        + (_SLOPE_NORTH - _SLOPE_FLAT) * _knee_integral(lat, _KNEE2, _K2)
    )
    return _T60 - drop


def _draw_coordinates(g: np.random.Generator, n: int) -> tuple[np.ndarray, np.ndarray]:
    lat = snap6(g.uniform(60.0, 82.0, n))
    lon = snap6(g.uniform(30.0, 180.0, n))
    # snapped pairs must be unique or the grid degenerates
    while True:
        _, first = np.unique(np.stack([lat, lon], axis=1), axis=0, return_index=True)
        dup = np.setdiff1d(np.arange(n), first)
        if dup.size == 0:
            return lat, lon
        lat[dup] = snap6(g.uniform(60.0, 82.0, dup.size))
        lon[dup] = snap6(g.uniform(30.0, 180.0, dup.size))


def generate_synthetic(config: SynthConfig) -> Dataset:
    """Generate a rectangular location-year panel from the config.

    Pure function of the config: equal configs (seed included) give
    equal datasets.
    """
    n = config.n_locations
    years = np.arange(config.year_start, config.year_end + 1)
    ny = years.size

    g_loc = substream(config.seed, "synth.loc")
    lat, lon = _draw_coordinates(g_loc, n)

    g_ln = substream(config.seed, "synth.locnoise")
    loc_off = _LOC_OFFSET_SD * g_ln.standard_normal(n)
    cloud = g_ln.uniform(0.1, 0.5, n)
    precip_off = g_ln.standard_normal(n)
    hum_off = g_ln.standard_normal(n)
    wind_off = g_ln.standard_normal(n)
    press_off = g_ln.standard_normal(n)
    rad_off = g_ln.standard_normal(n)

    g_yr = substream(config.seed, "synth.year")
    anomaly = _YEAR_ANOMALY_SD * g_yr.standard_normal(ny)

    g_obs = substream(config.seed, "synth.obs")
    t_obs = g_obs.standard_normal((n, ny))
    precip_obs = g_obs.standard_normal((n, ny))
    rad_obs = g_obs.standard_normal((n, ny))
    hum_obs = g_obs.standard_normal((n, ny))
    wind2_obs = g_obs.standard_normal((n, ny))
    wind10_obs = g_obs.standard_normal((n, ny))
    press_obs = g_obs.standard_normal((n, ny))
    dew_obs = g_obs.standard_normal((n, ny))

    g_pf = substream(config.seed, "synth.pf")
    pf_noise = config.noise_sd_pf * g_pf.standard_normal((n, ny))

    base = latitude_temperature(lat)
    lon_eff = _LON_AMPLITUDE * np.cos(2.0 * np.pi * (lon - 30.0) / 150.0)
    trend = config.warming_trend * (years - config.year_start)
    temperature = (
        (base + lon_eff + loc_off)[:, None]
        + (trend + anomaly)[None, :]
        + config.noise_sd_temp * t_obs
    )

    z = (temperature - config.logistic_center) / config.logistic_width
    pf = 100.0 / (1.0 + np.exp(z)) + pf_noise
    pf = np.clip(pf, 0.0, 100.0)

    dlat = (lat - 60.0)[:, None]
    precipitation = np.clip(
        2.3 - 0.045 * dlat + 0.3 * precip_off[:, None] + 0.25 * precip_obs, 0.5, 4.0
    )
    radiation_allsky = np.clip(
        248.0 - 9.0 * dlat + 4.0 * rad_off[:, None] + 5.0 * rad_obs, 30.0, None
    )
    radiation_clearsky = radiation_allsky / (1.0 - cloud[:, None])
    humidity = np.clip(
        0.72 + 0.003 * dlat + 0.04 * hum_off[:, None] + 0.02 * hum_obs, 0.35, 0.98
    )
    dewpoint = temperature - 20.0 * (1.0 - humidity) + 0.5 * dew_obs
    wind2m = np.clip(2.4 + 0.03 * dlat + 0.35 * wind_off[:, None] + 0.3 * wind2_obs, 0.2, None)
    wind10m = np.clip(wind2m * (1.35 + 0.06 * wind10_obs), 0.2, None)
    pressure = 100.6 - 0.02 * dlat + 0.35 * press_off[:, None] + 0.15 * press_obs

    fields = {
        "temperature": temperature,
        "precipitation": precipitation,
        "radiation_allsky": radiation_allsky,
        "radiation_clearsky": radiation_clearsky,
        "humidity": humidity,
        "dewpoint": dewpoint,
        "wind2m": wind2m,
        "wind10m": wind10m,
        "pressure": pressure,
    }

    if config.missing_rate > 0.0:
        g_miss = substream(config.seed, "synth.missing")
        u = g_miss.random((n, ny, len(CLIMATE_FIELDS)))
        for j, name in enumerate(CLIMATE_FIELDS):
            arr = fields[name].copy()
            arr[u[:, :, j] < config.missing_rate] = np.nan
            fields[name] = arr

    columns = {
        "lat": np.repeat(lat, ny),
        "lon": np.repeat(lon, ny),
        "year": np.tile(years, n),
        "permafrost_fraction": pf.ravel(),
    }
    for name in CLIMATE_FIELDS:
        columns[name] = fields[name].ravel()
    return Dataset(columns)


def _fmt(v: float) -> str:
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, str):
        return v
    f = float(v)
    if math.isnan(f):
        return ""
    return f"{f:.6g}"


def write_table(path, header, columns, comment_lines=()) -> None:
    """Write parallel columns as CSV with a fixed column order.

    Floats are rendered with 6 significant digits, NaN as an empty
    field, integer columns as plain integers. Lines in
    ``comment_lines`` are written first, prefixed with '# '.
    """
    if len(header) != len(columns):
        raise ValueError(f"{len(header)} names for {len(columns)} columns")
    n = len(columns[0]) if columns else 0
    for name, col in zip(header, columns):
        if len(col) != n:
            raise ValueError(f"column {name} has {len(col)} rows, expected {n}")
    try:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            for line in comment_lines:
                fh.write(f"# {line}\n")
            fh.write(",".join(header) + "\n")
            for i in range(n):
                fh.write(",".join(_fmt(col[i]) for col in columns) + "\n")
    except OSError as exc:
        raise OSError(f"cannot write table to {path}: {exc}") from exc


def write_dataset(path, dataset: Dataset, comment_lines=()) -> None:
    """Write a Dataset in the canonical CSV layout."""
    header = CSV_HEADER.split(",")
    columns = [dataset.lat, dataset.lon, dataset.year, dataset.pf]
    columns += [getattr(dataset, name) for name in CLIMATE_FIELDS]
    write_table(path, header, columns, comment_lines)


def _parse_float(token: str) -> float:
    return math.nan if token == "" else float(token)


def load_dataset(path, strict: bool = True) -> Dataset:
    """Load the canonical CSV into a Dataset.

    Lines starting with '#' are provenance comments and skipped. In
    strict mode any row violating the observation validity rules is an
    error; in lenient mode such rows are dropped and counted (the count
    is logged and exposed as ``dataset.dropped_rows``). Missing climate
    cells (empty fields) are kept as NaN either way; grid completeness
    is enforced after filtering.
    """
    expected = CSV_HEADER.split(",")
    try:
        with open(path, "r", encoding="utf-8") as fh:
            lines = [ln.rstrip("\n") for ln in fh if not ln.startswith("#")]
    except OSError as exc:
        raise OSError(f"cannot read dataset from {path}: {exc}") from exc
    if not lines:
        raise ValueError(f"{path}: empty file, expected canonical header")
    header = lines[0].split(",")
    if header != expected:
        raise ValueError(
            f"{path}: malformed header {lines[0]!r}, expected {CSV_HEADER!r}"
        )

    body = [ln for ln in lines[1:] if ln]
    ncols = len(expected)
    raw = np.empty((len(body), ncols), dtype=np.float64)
    for i, ln in enumerate(body):
        parts = ln.split(",")
        if len(parts) != ncols:
            raise ValueError(f"{path}: row {i + 2} has {len(parts)} fields, expected {ncols}")
        try:
            raw[i] = [_parse_float(tok) for tok in parts]
        except ValueError as exc:
            raise ValueError(f"{path}: row {i + 2}: {exc}") from exc

    cols = {name: raw[:, j] for j, name in enumerate(expected)}
    bad = _invalid_rows(cols)
    dropped = 0
    if bad.any():
        if strict:
            i = int(np.flatnonzero(bad)[0])
            raise ValueError(
                f"{path}: row {i + 2} fails validation "
                f"(lat={cols['lat'][i]}, lon={cols['lon'][i]}, year={cols['year'][i]:g})"
            )
        dropped = int(bad.sum())
        log.warning("%s: dropped %d invalid rows", path, dropped)
        cols = {k: v[~bad] for k, v in cols.items()}

    if cols["lat"].size == 0:
        raise ValueError(f"{path}: no valid data rows")
    year_f = cols["year"]
    if np.any(year_f != np.round(year_f)):
        raise ValueError(f"{path}: non-integer year value")
    cols["year"] = year_f.astype(np.int64)
    ds = Dataset(cols)
    ds.dropped_rows = dropped
    return ds


def _invalid_rows(cols: dict[str, np.ndarray]) -> np.ndarray:
    """Vectorized hard-bound checks mirroring validate_observation."""
    from . import domain

    lat, lon, year = cols["lat"], cols["lon"], cols["year"]
    pf = cols["permafrost_fraction"]
    t = cols["temperature"]
    allsky, clearsky = cols["radiation_allsky"], cols["radiation_clearsky"]
    hum = cols["humidity"]

    def present(x):
        return ~np.isnan(x)

    bad = (lat < domain.LAT_MIN) | (lat > domain.LAT_MAX)
    bad |= (lon < domain.LON_MIN) | (lon > domain.LON_MAX)
    bad |= (year < domain.YEAR_MIN) | (year > domain.YEAR_MAX)
    bad |= np.isnan(pf) | (pf < 0.0) | (pf > 100.0)
    bad |= present(t) & ((t < domain.TEMP_HARD[0]) | (t > domain.TEMP_HARD[1]))
    bad |= present(cols["precipitation"]) & (cols["precipitation"] < 0.0)
    bad |= present(allsky) & (allsky < 0.0)
    bad |= present(clearsky) & (clearsky < 0.0)
    bad |= present(allsky) & present(clearsky) & (clearsky < allsky)
    bad |= present(hum) & ((hum < 0.0) | (hum > 1.0))
    bad |= present(cols["wind2m"]) & (cols["wind2m"] < 0.0)
    bad |= present(cols["wind10m"]) & (cols["wind10m"] < 0.0)
    return bad
