"""Core data types for the permafrost risk pipeline.

Everything downstream (feature engineering, model training, scenario
projection, risk scoring) consumes these types. All of them are immutable
after construction and safe to share across threads.

Units and conventions:

* permafrost fraction ("pf") is in percent of grid-cell area, [0, 100]
* temperature and dewpoint are mean-annual 2 m air values in degC
* precipitation is mm/day, radiation is W/m^2, winds are m/s
* humidity is a relative fraction in [0, 1], pressure is kPa
* missing climate cells are represented as NaN; pf is never missing
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

# Geographic domain: Arctic Russia study box.
LAT_MIN, LAT_MAX = 60.0, 82.0
LON_MIN, LON_MAX = 30.0, 180.0

# Historical data window (inclusive).
YEAR_MIN, YEAR_MAX = 2005, 2021

# Hard physical plausibility bounds (violations are errors). These are
# deliberately wider than the observed historical ranges so that
# scenario-perturbed records remain valid.
TEMP_HARD = (-60.0, 20.0)
HUMIDITY_HARD = (0.0, 1.0)

# Observed historical ranges (violations are warnings, not errors).
TEMP_OBSERVED = (-25.0, 5.0)
PRECIP_OBSERVED = (0.5, 4.0)
RADIATION_OBSERVED = (50.0, 250.0)

CLIMATE_FIELDS = (
    "temperature",
    "precipitation",
    "radiation_allsky",
    "radiation_clearsky",
    "humidity",
    "dewpoint",
    "wind2m",
    "wind10m",
    "pressure",
)


@dataclass(frozen=True, order=True)
class LocationKey:
    """A grid location, identified exactly by its coordinate pair.

    Equality is exact on the stored floats; the key is stable across
    years. Ordering is (latitude, longitude) lexicographic.
    """

    latitude: float
    longitude: float

    def in_domain(self) -> bool:
        return LAT_MIN <= self.latitude <= LAT_MAX and LON_MIN <= self.longitude <= LON_MAX


@dataclass(frozen=True)
class Observation:
    """One location-year record: permafrost fraction plus climate drivers.

    Climate fields may be NaN (missing); ``permafrost_fraction`` never is.
    """

    location: LocationKey
    year: int
    permafrost_fraction: float
    temperature: float = math.nan
    precipitation: float = math.nan
    radiation_allsky: float = math.nan
    radiation_clearsky: float = math.nan
    humidity: float = math.nan
    dewpoint: float = math.nan
    wind2m: float = math.nan
    wind10m: float = math.nan
    pressure: float = math.nan


@dataclass(frozen=True)
class Violation:
    """A single validity failure: which field, which rule, and the value."""

    field: str
    rule: str
    value: float
    severity: str = "error"  # "error" or "warning"

    def __str__(self) -> str:
        return f"[{self.severity}] {self.field}: {self.rule} (got {self.value!r})"


def _present(x: float) -> bool:
    return not math.isnan(x)


def validate_observation(obs: Observation, include_warnings: bool = False) -> list[Violation]:
    """Check one observation against the domain validity rules.

    Returns an empty list iff all hard invariants hold. Never raises:
    validation reports. Observed-range departures (e.g. temperature
    outside the historical [-25, 5] degC span) are warnings and only
    included when ``include_warnings`` is set; hard physical bounds
    are always errors.

    Calling twice on the same value returns identical lists.
    """
    out: list[Violation] = []
    loc = obs.location

    if not (LAT_MIN <= loc.latitude <= LAT_MAX):
        out.append(Violation("latitude", f"must be in [{LAT_MIN}, {LAT_MAX}]", loc.latitude))
    if not (LON_MIN <= loc.longitude <= LON_MAX):
        out.append(Violation("longitude", f"must be in [{LON_MIN}, {LON_MAX}]", loc.longitude))
    if not (YEAR_MIN <= obs.year <= YEAR_MAX):
        out.append(Violation("year", f"historical year must be in [{YEAR_MIN}, {YEAR_MAX}]", obs.year))

    pf = obs.permafrost_fraction
    if math.isnan(pf):
        out.append(Violation("permafrost_fraction", "must never be missing", pf))
    elif not (0.0 <= pf <= 100.0):
        out.append(Violation("permafrost_fraction", "must be in [0, 100]", pf))

    t = obs.temperature
    if _present(t) and not (TEMP_HARD[0] <= t <= TEMP_HARD[1]):
        out.append(Violation("temperature", f"must be in [{TEMP_HARD[0]}, {TEMP_HARD[1]}]", t))
    if _present(obs.precipitation) and obs.precipitation < 0.0:
        out.append(Violation("precipitation", "must be >= 0", obs.precipitation))

    allsky, clearsky = obs.radiation_allsky, obs.radiation_clearsky
    if _present(allsky) and allsky < 0.0:
        out.append(Violation("radiation_allsky", "must be >= 0", allsky))
    if _present(clearsky) and clearsky < 0.0:
        out.append(Violation("radiation_clearsky", "must be >= 0", clearsky))
    if _present(allsky) and _present(clearsky) and clearsky < allsky:
        out.append(Violation("radiation_clearsky", "clear-sky radiation must be >= all-sky", clearsky))

    if _present(obs.humidity) and not (HUMIDITY_HARD[0] <= obs.humidity <= HUMIDITY_HARD[1]):
        out.append(Violation("humidity", "relative fraction must be in [0, 1]", obs.humidity))
    for name in ("wind2m", "wind10m"):
        w = getattr(obs, name)
        if _present(w) and w < 0.0:
            out.append(Violation(name, "wind speed must be >= 0", w))

    if include_warnings:
        if _present(t) and not (TEMP_OBSERVED[0] <= t <= TEMP_OBSERVED[1]):
            out.append(Violation("temperature", "outside observed historical range", t, "warning"))
        if _present(obs.precipitation) and not (
            PRECIP_OBSERVED[0] <= obs.precipitation <= PRECIP_OBSERVED[1]
        ):
            out.append(Violation("precipitation", "outside observed historical range", obs.precipitation, "warning"))
        for name in ("radiation_allsky", "radiation_clearsky"):
            r = getattr(obs, name)
            if _present(r) and not (RADIATION_OBSERVED[0] <= r <= RADIATION_OBSERVED[1]):
                out.append(Violation(name, "outside observed historical range", r, "warning"))

    return out


@dataclass(frozen=True)
class ScenarioSpec:
    """A warming scenario: uniform Arctic temperature delta over a horizon."""

    id: str
    arctic_delta_t: float  # degC, applied uniformly to the baseline year
    horizon_years: int = 10

    def __post_init__(self):
        if self.arctic_delta_t <= 0.0:
            raise ValueError(f"arctic_delta_t must be > 0, got {self.arctic_delta_t}")
        if self.horizon_years < 1:
            raise ValueError(f"horizon_years must be >= 1, got {self.horizon_years}")


class Dataset:
    """A rectangular (location x year) panel of observations.

    Stored column-wise as numpy arrays sorted by (latitude, longitude,
    year): each location occupies a contiguous block of ``n_years``
    rows in ascending year order. Every location has the identical,
    contiguous year set; (location, year) pairs are unique. Instances
    are immutable: all arrays are flagged read-only.
    """

    def __init__(self, columns: dict[str, np.ndarray]):
        """Build from parallel row arrays keyed by canonical column name.

        ``columns`` must contain lat, lon, year, permafrost_fraction and
        the nine climate fields. Rows may arrive in any order; they are
        sorted here. Raises ValueError on duplicate (location, year)
        pairs or a non-rectangular year grid.
        """
        lat = np.asarray(columns["lat"], dtype=np.float64)
        lon = np.asarray(columns["lon"], dtype=np.float64)
        year = np.asarray(columns["year"], dtype=np.int64)
        n = lat.shape[0]
        if n == 0:
            raise ValueError("dataset has no rows")

        order = np.lexsort((year, lon, lat))
        self.lat = lat[order]
        self.lon = lon[order]
        self.year = year[order]
        self.pf = np.asarray(columns["permafrost_fraction"], dtype=np.float64)[order]
        for name in CLIMATE_FIELDS:
            setattr(self, name, np.asarray(columns[name], dtype=np.float64)[order])

        # Locations: contiguous runs of identical (lat, lon).
        new_loc = np.ones(n, dtype=bool)
        new_loc[1:] = (self.lat[1:] != self.lat[:-1]) | (self.lon[1:] != self.lon[:-1])
        self.loc_id = np.cumsum(new_loc) - 1
        starts = np.flatnonzero(new_loc)
        self.n_locations = len(starts)
        self.lat_by_loc = self.lat[starts]
        self.lon_by_loc = self.lon[starts]

        if n % self.n_locations != 0:
            raise ValueError(
                f"non-rectangular grid: {n} rows over {self.n_locations} locations"
            )
        self.n_years = n // self.n_locations
        self.years = self.year[: self.n_years].copy()

        yr_grid = self.year.reshape(self.n_locations, self.n_years)
        if np.any(yr_grid[:, 1:] <= yr_grid[:, :-1]):
            raise ValueError("duplicate (location, year) pair")
        if np.any(yr_grid != self.years):
            bad = int(np.flatnonzero(np.any(yr_grid != self.years, axis=1))[0])
            raise ValueError(
                "grid completeness violated: location "
                f"({self.lat_by_loc[bad]}, {self.lon_by_loc[bad]}) has year set "
                f"{yr_grid[bad].tolist()} != {self.years.tolist()}"
            )
        if np.any(np.diff(self.years) != 1):
            raise ValueError(f"year set is not contiguous: {self.years.tolist()}")

        for name in ("lat", "lon", "year", "pf", "loc_id", "lat_by_loc", "lon_by_loc", "years") + CLIMATE_FIELDS:
            getattr(self, name).flags.writeable = False

    @property
    def n_rows(self) -> int:
        return self.lat.shape[0]

    @property
    def start_year(self) -> int:
        return int(self.years[0])

    @property
    def end_year(self) -> int:
        return int(self.years[-1])

    def location_keys(self) -> list[LocationKey]:
        return [LocationKey(float(a), float(o)) for a, o in zip(self.lat_by_loc, self.lon_by_loc)]

    def observation(self, i: int) -> Observation:
        """Materialize row ``i`` as an Observation (for validation/reporting)."""
        kw = {name: float(getattr(self, name)[i]) for name in CLIMATE_FIELDS}
        return Observation(
            location=LocationKey(float(self.lat[i]), float(self.lon[i])),
            year=int(self.year[i]),
            permafrost_fraction=float(self.pf[i]),
            **kw,
        )

    def subset_locations(self, keep: np.ndarray) -> "Dataset":
        """Return a new Dataset restricted to locations where ``keep`` is True.

        ``keep`` is a boolean mask over location ids (length n_locations).
        """
        mask = keep[self.loc_id]
        return self._from_mask(mask)

    def subset_years(self, min_year: int | None = None, max_year: int | None = None) -> "Dataset":
        """Return a new Dataset restricted to years in [min_year, max_year]."""
        mask = np.ones(self.n_rows, dtype=bool)
        if min_year is not None:
            mask &= self.year >= min_year
        if max_year is not None:
            mask &= self.year <= max_year
        return self._from_mask(mask)

    def _from_mask(self, mask: np.ndarray) -> "Dataset":
        cols = {
            "lat": self.lat[mask],
            "lon": self.lon[mask],
            "year": self.year[mask],
            "permafrost_fraction": self.pf[mask],
        }
        for name in CLIMATE_FIELDS:
            cols[name] = getattr(self, name)[mask]
        return Dataset(cols)

    def equals(self, other: "Dataset", rtol: float = 0.0, atol: float = 0.0) -> bool:
        """Value equality, optionally within a float tolerance."""
        if self.n_rows != other.n_rows:
            return False
        names = ("lat", "lon", "pf") + CLIMATE_FIELDS
        if not np.array_equal(self.year, other.year):
            return False
        for name in names:
            a, b = getattr(self, name), getattr(other, name)
            if rtol == 0.0 and atol == 0.0:
                if not np.array_equal(a, b, equal_nan=True):
                    return False
            elif not np.allclose(a, b, rtol=rtol, atol=atol, equal_nan=True):
                return False
        return True
