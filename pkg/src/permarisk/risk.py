"""Quantile-based infrastructure risk classification over projections.

Scores combine decline magnitude, projected vulnerability, and
prediction uncertainty; class cuts adapt to the empirical score
distribution (60% low / 25% medium / 15% high) instead of fixed
thresholds. Absolute thresholds are emitted as diagnostics only.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .domain import LAT_MAX, LAT_MIN
from .scenario import ProjectionResult

DEFAULT_SCORE_WEIGHTS = (0.5, 0.3, 0.2)   # decline, vulnerability, sigma
DEFAULT_Q_LOW = 0.60
DEFAULT_Q_HIGH = 0.85
UNCERTAINTY_QS = (0.25, 0.50, 0.75, 0.95)

# absolute diagnostic thresholds, not used for classification
FLAG_PF_BELOW = 50.0
FLAG_TEMP_ABOVE = -2.0
FLAG_DECLINE_ABOVE = 20.0


@dataclass(frozen=True)
class FactorNorms:
    """Population min/max per normalized score factor."""

    decline_min: float
    decline_max: float
    sigma_min: float
    sigma_max: float


@dataclass(frozen=True)
class RiskAssessment:
    """Score, class, and diagnostic flags for one location."""

    scenario: str
    lat: float
    lon: float
    score: float
    risk_class: str
    decline: float
    projected_pf: float
    sigma: float
    flag_pf50: bool
    flag_tm2: bool
    flag_d20: bool

    def __post_init__(self):
        if not np.isfinite(self.score):
            raise ValueError(f"score must be finite, got {self.score}")
        if self.risk_class not in ("low", "medium", "high"):
            raise ValueError(f"unknown risk class {self.risk_class!r}")


@dataclass(frozen=True)
class LatitudinalProfile:
    """High-risk proportion per half-degree latitude band."""

    bin_starts: np.ndarray
    bin_width: float
    counts: np.ndarray
    high_risk_proportion: np.ndarray
    empty_bin: np.ndarray


def quantile(values, q: float) -> float:
    """Linear-interpolation quantile between order statistics."""
    v = np.sort(np.asarray(values, dtype=np.float64))
    if v.size == 0:
        raise ValueError("quantile of empty vector")
    if not 0.0 <= q <= 1.0:
        raise ValueError(f"q must lie in [0, 1], got {q}")
    pos = q * (v.size - 1)
    lo = int(np.floor(pos))
    hi = int(np.ceil(pos))
    frac = pos - lo
    return float(v[lo] * (1.0 - frac) + v[hi] * frac)


def compute_norms(decline, sigma) -> FactorNorms:
    decline = np.asarray(decline, dtype=np.float64)
    sigma = np.asarray(sigma, dtype=np.float64)
    return FactorNorms(
        decline_min=float(decline.min()), decline_max=float(decline.max()),
        sigma_min=float(sigma.min()), sigma_max=float(sigma.max()),
    )


def _norm(x, lo, hi):
    # a factor with a degenerate range carries no information
    if hi <= lo:
        return np.zeros_like(np.asarray(x, dtype=np.float64))
    return np.clip((np.asarray(x, dtype=np.float64) - lo) / (hi - lo), 0.0, 1.0)


def risk_score(decline, projected_pf, sigma, norms: FactorNorms,
               weights=DEFAULT_SCORE_WEIGHTS):
    """Composite score in [0,1]; weights over (decline, vulnerability, sigma)."""
    wd, wv, ws = (float(w) for w in weights)
    if min(wd, wv, ws) < 0.0:
        raise ValueError(f"score weights must be >= 0, got {weights}")
    score = (wd * _norm(decline, norms.decline_min, norms.decline_max)
             + wv * (1.0 - np.asarray(projected_pf, dtype=np.float64) / 100.0)
             + ws * _norm(sigma, norms.sigma_min, norms.sigma_max))
    return float(score) if np.ndim(decline) == 0 else score


def classify_risk(scores, q_low: float = DEFAULT_Q_LOW,
                  q_high: float = DEFAULT_Q_HIGH):
    """(classes, cut_low, cut_high): low <= cut_low < medium <= cut_high < high."""
    s = np.asarray(scores, dtype=np.float64)
    if s.size == 0:
        raise ValueError("no scores to classify")
    if not 0.0 <= q_low <= q_high <= 1.0:
        raise ValueError(f"need 0 <= q_low <= q_high <= 1, got {q_low}, {q_high}")
    cut_low = quantile(s, q_low)
    cut_high = quantile(s, q_high)
    classes = np.where(s <= cut_low, "low",
                       np.where(s <= cut_high, "medium", "high"))
    return classes, cut_low, cut_high


def assess_risk(results: list[ProjectionResult], t_base,
                weights=DEFAULT_SCORE_WEIGHTS,
                q_low: float = DEFAULT_Q_LOW,
                q_high: float = DEFAULT_Q_HIGH) -> list[RiskAssessment]:
    """Score and classify one scenario's projections.

    ``t_base`` is the per-location baseline temperature, aligned to
    ``results``; it feeds only the warm-ground diagnostic flag.
    """
    if not results:
        raise ValueError("no projection results to assess")
    t_base = np.asarray(t_base, dtype=np.float64)
    if t_base.shape != (len(results),):
        raise ValueError(
            f"t_base has shape {t_base.shape}, expected ({len(results)},)")
    decline = np.array([-r.hybrid_delta for r in results])
    projected = np.array([r.projected_pf for r in results])
    sigma = np.array([r.sigma for r in results])
    norms = compute_norms(decline, sigma)
    scores = risk_score(decline, projected, sigma, norms, weights)
    classes, _, _ = classify_risk(scores, q_low, q_high)
    return [
        RiskAssessment(
            scenario=r.scenario, lat=r.lat, lon=r.lon,
            score=float(scores[i]), risk_class=str(classes[i]),
            decline=float(decline[i]), projected_pf=float(projected[i]),
            sigma=float(sigma[i]),
            flag_pf50=bool(projected[i] < FLAG_PF_BELOW),
            flag_tm2=bool(t_base[i] > FLAG_TEMP_ABOVE),
            flag_d20=bool(decline[i] > FLAG_DECLINE_ABOVE),
        )
        for i, r in enumerate(results)
    ]


def latitudinal_profile(assessments: list[RiskAssessment],
                        bin_width: float = 0.5) -> LatitudinalProfile:
    """High-risk proportion in [60 + i*w, 60 + (i+1)*w) latitude bands.

    The final band closes at the domain ceiling so the bands partition
    the location set. Empty bands report proportion 0 with a flag.
    """
    if not assessments:
        raise ValueError("no assessments to profile")
    if bin_width <= 0.0:
        raise ValueError(f"bin_width must be > 0, got {bin_width}")
    lat = np.array([a.lat for a in assessments])
    if lat.min() < LAT_MIN or lat.max() > LAT_MAX:
        raise ValueError("latitude outside the modeled domain")
    high = np.array([a.risk_class == "high" for a in assessments])

    n_bins = int(np.ceil((LAT_MAX - LAT_MIN) / bin_width))
    idx = np.minimum(((lat - LAT_MIN) / bin_width).astype(np.int64), n_bins - 1)
    counts = np.bincount(idx, minlength=n_bins)
    highs = np.bincount(idx, weights=high.astype(np.float64), minlength=n_bins)
    empty = counts == 0
    prop = np.divide(highs, counts, out=np.zeros(n_bins), where=~empty)
    return LatitudinalProfile(
        bin_starts=LAT_MIN + bin_width * np.arange(n_bins),
        bin_width=float(bin_width),
        counts=counts,
        high_risk_proportion=prop,
        empty_bin=empty,
    )


def uncertainty_quantiles(sigmas, qs=UNCERTAINTY_QS) -> dict[float, float]:
    """Linear-interpolation quantiles of the per-location sigma vector."""
    s = np.asarray(sigmas, dtype=np.float64)
    if s.size == 0:
        raise ValueError("no sigmas to summarize")
    return {float(q): quantile(s, float(q)) for q in qs}


def write_risk_csv(path, assessments: list[RiskAssessment],
                   comment_lines=()) -> None:
    from .data_io import write_table

    header = ["lat", "lon", "scenario", "score", "class", "decline",
              "projected_pf", "sigma", "flag_pf50", "flag_tm2", "flag_d20"]
    columns = [
        np.array([a.lat for a in assessments]),
        np.array([a.lon for a in assessments]),
        [a.scenario for a in assessments],
        np.array([a.score for a in assessments]),
        [a.risk_class for a in assessments],
        np.array([a.decline for a in assessments]),
        np.array([a.projected_pf for a in assessments]),
        np.array([a.sigma for a in assessments]),
        np.array([int(a.flag_pf50) for a in assessments]),
        np.array([int(a.flag_tm2) for a in assessments]),
        np.array([int(a.flag_d20) for a in assessments]),
    ]
    write_table(path, header, columns, comment_lines)


def write_profile_csv(path, profile: LatitudinalProfile,
                      comment_lines=()) -> None:
    from .data_io import write_table

    header = ["lat_bin_start", "count", "high_risk_proportion"]
    columns = [profile.bin_starts, profile.counts, profile.high_risk_proportion]
    write_table(path, header, columns, comment_lines)
