"""Aggregate a run directory's outputs into one JSON report plus figures.

Reads whatever pipeline artifacts exist (validation/projection/risk/
profile CSVs and the uncertainty JSON), summarizes them into a single
machine-readable document, and renders overview figures to PNG files.
"""

from __future__ import annotations

import csv
import json
from pathlib import Path

import numpy as np

SCENARIO_COLORS = {"RCP26": "#2c7fb8", "RCP45": "#fe9929", "RCP85": "#d7301f"}


def _read_csv(path):
    """(header, data rows) of a delimited file, skipping '#' comments."""
    with open(path, newline="") as fh:
        rows = [r for r in csv.reader(fh) if r and not r[0].startswith("#")]
    if not rows:
        raise ValueError(f"{path} holds no rows")
    return rows[0], rows[1:]


def _cell(token: str):
    if token == "":
        return None
    try:
        f = float(token)
    except ValueError:
        return token
    return int(f) if f.is_integer() and "." not in token and "e" not in token.lower() else f


def _column(header, data, name, cast=float):
    j = header.index(name)
    return [cast(r[j]) for r in data]


def _scenario_of(path: Path, prefix: str) -> str:
    return path.stem.removeprefix(prefix)


def build_report(out_dir) -> dict:
    """Summaries of every recognized artifact in ``out_dir``; {} if none."""
    out = Path(out_dir)
    rep: dict = {}

    validation = {}
    for p in sorted(out.glob("validation_*.csv")):
        header, data = _read_csv(p)
        validation[_scenario_of(p, "validation_")] = [
            {name: _cell(tok) for name, tok in zip(header, row)} for row in data]
    if validation:
        rep["validation"] = validation

    scenarios = {}
    for p in sorted(out.glob("projection_*.csv")):
        header, data = _read_csv(p)
        decline = -np.array(_column(header, data, "hybrid_delta"))
        sigma = np.array(_column(header, data, "sigma"))
        scenarios[_scenario_of(p, "projection_")] = {
            "n_locations": len(data),
            "mean_decline": float(decline.mean()),
            "median_decline": float(np.median(decline)),
            "prop_ge5": float((decline >= 5.0).mean()),
            "prop_ge10": float((decline >= 10.0).mean()),
            "prop_gt20": float((decline > 20.0).mean()),
            "mean_sigma": float(sigma.mean()),
        }
    if scenarios:
        rep["scenarios"] = scenarios

    risk = {}
    for p in sorted(out.glob("risk_*.csv")):
        header, data = _read_csv(p)
        classes = _column(header, data, "class", cast=str)
        score = np.array(_column(header, data, "score"))
        risk[_scenario_of(p, "risk_")] = {
            "n_locations": len(data),
            "class_counts": {c: classes.count(c) for c in ("low", "medium", "high")},
            "mean_score": float(score.mean()),
            "flag_counts": {
                name: int(sum(_column(header, data, name, cast=int)))
                for name in ("flag_pf50", "flag_tm2", "flag_d20")},
        }
    if risk:
        rep["risk"] = risk

    profiles = {}
    for p in sorted(out.glob("profile_*.csv")):
        header, data = _read_csv(p)
        starts = _column(header, data, "lat_bin_start")
        counts = _column(header, data, "count", cast=lambda t: int(float(t)))
        props = _column(header, data, "high_risk_proportion")
        occupied = [i for i, c in enumerate(counts) if c > 0]
        peak = max(occupied, key=lambda i: props[i]) if occupied else None
        profiles[_scenario_of(p, "profile_")] = {
            "lat_bin_start": starts,
            "count": counts,
            "high_risk_proportion": props,
            "peak_bin": None if peak is None else {
                "lat_bin_start": starts[peak],
                "high_risk_proportion": props[peak],
                "count": counts[peak]},
        }
    if profiles:
        rep["profiles"] = profiles

    unc_path = out / "uncertainty.json"
    if unc_path.exists():
        doc = json.loads(unc_path.read_text())
        rep["uncertainty"] = doc.get("sigma_quantiles", doc)

    return rep


def _color(sid: str):
    return SCENARIO_COLORS.get(sid)


def render_figures(out_dir, fig_dir) -> list[Path]:
    """Render overview PNGs for whichever artifacts exist; returns paths."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    out = Path(out_dir)
    fig_dir = Path(fig_dir)
    written: list[Path] = []

    def save(fig, name):
        fig_dir.mkdir(parents=True, exist_ok=True)
        path = fig_dir / name
        fig.savefig(path, dpi=120, bbox_inches="tight")
        plt.close(fig)
        written.append(path)

    projections = sorted(out.glob("projection_*.csv"))
    if projections:
        fig, ax = plt.subplots(figsize=(7, 4.2))
        for p in projections:
            header, data = _read_csv(p)
            sid = _scenario_of(p, "projection_")
            decline = -np.array(_column(header, data, "hybrid_delta"))
            ax.hist(decline, bins=40, histtype="step", lw=1.8,
                    label=sid, color=_color(sid))
        ax.set_xlabel("permafrost decline (pp)")
        ax.set_ylabel("locations")
        ax.set_title("Projected decline by scenario")
        ax.legend()
        save(fig, "declines.png")

    profiles = sorted(out.glob("profile_*.csv"))
    if profiles:
        fig, ax = plt.subplots(figsize=(7, 4.2))
        for p in profiles:
            header, data = _read_csv(p)
            sid = _scenario_of(p, "profile_")
            starts = np.array(_column(header, data, "lat_bin_start"))
            props = np.array(_column(header, data, "high_risk_proportion"))
            ax.step(starts, props, where="post", label=sid, color=_color(sid))
        ax.set_xlabel("latitude band start (deg N)")
        ax.set_ylabel("high-risk proportion")
        ax.set_title("High-risk share by latitude")
        ax.legend()
        save(fig, "risk_profile.png")

    validations = sorted(out.glob("validation_*.csv"))
    if validations:
        labels, values = [], []
        for p in validations:
            header, data = _read_csv(p)
            mode = _scenario_of(p, "validation_")
            for row in data:
                rec = dict(zip(header, row))
                if rec["split"].endswith("-pooled") or mode == "random":
                    labels.append(f"{mode}/{rec['model']}")
                    values.append(float(rec["r2"]))
        if labels:
            fig, ax = plt.subplots(figsize=(7, 0.5 + 0.4 * len(labels)))
            ypos = np.arange(len(labels))
            ax.barh(ypos, values, color="#41ab5d")
            ax.set_yticks(ypos, labels)
            ax.invert_yaxis()
            ax.set_xlabel("pooled r2")
            ax.set_title("Validation accuracy")
            ax.set_xlim(0, 1.0)
            save(fig, "validation_r2.png")

    unc_path = out / "uncertainty.json"
    if unc_path.exists():
        doc = json.loads(unc_path.read_text())
        quantiles = doc.get("sigma_quantiles", {})
        if quantiles:
            fig, ax = plt.subplots(figsize=(6, 4))
            for sid in sorted(quantiles):
                qs = sorted(quantiles[sid])
                ax.plot([float(q) for q in qs],
                        [quantiles[sid][q] for q in qs],
                        marker="o", label=sid, color=_color(sid))
            ax.set_xlabel("quantile")
            ax.set_ylabel("sigma (pp)")
            ax.set_title("Prediction uncertainty by scenario")
            ax.legend()
            save(fig, "uncertainty.png")

    return written
