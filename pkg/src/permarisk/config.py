"""Run configuration: one JSON document drives every pipeline command.

A config resolves to an immutable RunConfig; its canonical-JSON hash is
stamped into every output file so any artifact can be traced back to
the exact settings and master seed that produced it.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
import math
from dataclasses import dataclass, field, fields
from pathlib import Path

from .data_io import SynthConfig
from .domain import ScenarioSpec
from .learners import LearnerParams
from .risk import DEFAULT_Q_HIGH, DEFAULT_Q_LOW, DEFAULT_SCORE_WEIGHTS
from .scenario import DEFAULT_ML_WEIGHT, DEFAULT_PHYSICS_WEIGHT, DEFAULT_W_TIERS

DEFAULT_SCENARIO_DELTAS: tuple[tuple[str, float], ...] = (
    ("RCP26", 1.5), ("RCP45", 3.0), ("RCP85", 5.0))
DEFAULT_N_LOCATIONS = 1000


@dataclass(frozen=True)
class RunConfig:
    """Resolved settings for one reproducible pipeline run."""

    seed: int
    out_dir: str = "out"
    data_path: str | None = None          # CSV panel; None -> synthetic input
    synth: SynthConfig | None = None      # generator settings when synthesizing
    k_folds: int = 5
    sample_cap: int = 200_000
    params: LearnerParams = field(default_factory=LearnerParams)
    scenario_deltas: tuple[tuple[str, float], ...] = DEFAULT_SCENARIO_DELTAS
    horizon_years: int = 10
    ml_weight: float = DEFAULT_ML_WEIGHT
    physics_weight: float = DEFAULT_PHYSICS_WEIGHT
    zero_ml: bool = False
    force_w: float | None = None
    allow_gain: bool = False
    w_tiers: tuple[tuple[float, float], ...] = DEFAULT_W_TIERS
    score_weights: tuple[float, float, float] = DEFAULT_SCORE_WEIGHTS
    q_low: float = DEFAULT_Q_LOW
    q_high: float = DEFAULT_Q_HIGH

    def __post_init__(self):
        if not isinstance(self.seed, int):
            raise ValueError(f"seed must be an integer, got {self.seed!r}")
        if self.k_folds < 2:
            raise ValueError(f"k_folds must be >= 2, got {self.k_folds}")
        if self.sample_cap < 1:
            raise ValueError(f"sample_cap must be >= 1, got {self.sample_cap}")
        if self.data_path is not None and self.synth is not None:
            raise ValueError("give either data_path or synth settings, not both")
        ids = [s for s, _ in self.scenario_deltas]
        if len(set(ids)) != len(ids):
            raise ValueError(f"duplicate scenario ids: {ids}")
        deltas = [d for _, d in self.scenario_deltas]
        if any(d <= 0.0 for d in deltas):
            raise ValueError(f"scenario deltas must be > 0, got {deltas}")
        if not all(a < b for a, b in zip(deltas, deltas[1:])):
            raise ValueError(f"scenario deltas must be strictly increasing, got {deltas}")
        if self.horizon_years < 1:
            raise ValueError(f"horizon_years must be >= 1, got {self.horizon_years}")
        for name in ("ml_weight", "physics_weight"):
            if getattr(self, name) < 0.0:
                raise ValueError(f"{name} must be >= 0")
        if not 0.0 <= self.q_low <= self.q_high <= 1.0:
            raise ValueError(
                f"need 0 <= q_low <= q_high <= 1, got {self.q_low}, {self.q_high}")

    def scenarios(self) -> tuple[ScenarioSpec, ...]:
        return tuple(ScenarioSpec(id=sid, arctic_delta_t=dt,
                                  horizon_years=self.horizon_years)
                     for sid, dt in self.scenario_deltas)

    def effective_synth(self) -> SynthConfig:
        """Generator settings, seeded from the master seed when unset."""
        if self.synth is not None:
            return self.synth
        return SynthConfig(n_locations=DEFAULT_N_LOCATIONS, seed=self.seed)


def _encode(v):
    if isinstance(v, float) and math.isinf(v):
        return "inf"
    if isinstance(v, tuple):
        return [_encode(x) for x in v]
    if isinstance(v, list):
        return [_encode(x) for x in v]
    return v


def _decode_edge(v):
    if isinstance(v, str) and v.lower() in ("inf", "infinity"):
        return math.inf
    return float(v)


def config_to_dict(cfg: RunConfig) -> dict:
    doc = {}
    for f in fields(cfg):
        v = getattr(cfg, f.name)
        if f.name in ("params", "synth"):
            doc[f.name] = None if v is None else dataclasses.asdict(v)
        else:
            doc[f.name] = _encode(v)
    return doc


def config_from_dict(doc: dict) -> RunConfig:
    """Build a RunConfig from a (possibly partial) plain dict.

    Unknown keys are rejected so misspelled settings fail loudly.
    Nested ``params`` / ``synth`` dicts may also be partial.
    """
    doc = dict(doc)
    known = {f.name for f in fields(RunConfig)}
    unknown = sorted(set(doc) - known)
    if unknown:
        raise ValueError(f"unknown config keys: {unknown}")
    if "seed" not in doc:
        raise ValueError("config must set an explicit seed")

    kwargs: dict = {"seed": doc.pop("seed")}
    if "params" in doc:
        p = doc.pop("params")
        pknown = {f.name for f in fields(LearnerParams)}
        bad = sorted(set(p) - pknown)
        if bad:
            raise ValueError(f"unknown learner params: {bad}")
        p = {k: tuple(v) if isinstance(v, list) else v for k, v in p.items()}
        kwargs["params"] = LearnerParams(**p)
    if "synth" in doc:
        s = doc.pop("synth")
        if s is not None:
            s = dict(s)
            s.setdefault("seed", kwargs["seed"])
            kwargs["synth"] = SynthConfig(**s)
    if "scenario_deltas" in doc:
        kwargs["scenario_deltas"] = tuple(
            (str(sid), float(dt)) for sid, dt in doc.pop("scenario_deltas"))
    if "w_tiers" in doc:
        kwargs["w_tiers"] = tuple(
            (_decode_edge(e), float(w)) for e, w in doc.pop("w_tiers"))
    if "score_weights" in doc:
        kwargs["score_weights"] = tuple(float(w) for w in doc.pop("score_weights"))
    kwargs.update(doc)
    try:
        return RunConfig(**kwargs)
    except TypeError as e:
        raise ValueError(str(e)) from None


def load_config(path) -> dict:
    """Raw config document; flag overlays happen before RunConfig is built."""
    p = Path(path)
    if not p.exists():
        raise FileNotFoundError(f"config file not found: {p}")
    try:
        doc = json.loads(p.read_text())
    except json.JSONDecodeError as e:
        raise ValueError(f"config file {p} is not valid JSON: {e}") from None
    if not isinstance(doc, dict):
        raise ValueError(f"config file {p} must hold a JSON object")
    return doc


def config_hash(cfg: RunConfig) -> str:
    """Short stable digest of the canonical config JSON.

    The output directory is excluded: it never influences results, so
    the same settings hash identically wherever they are written.
    """
    doc = config_to_dict(cfg)
    del doc["out_dir"]
    canon = json.dumps(doc, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canon.encode()).hexdigest()[:12]


def provenance_comment(cfg: RunConfig) -> str:
    return f"config={config_hash(cfg)} seed={cfg.seed}"


def provenance_dict(cfg: RunConfig) -> dict:
    return {"config_hash": config_hash(cfg), "seed": cfg.seed}
