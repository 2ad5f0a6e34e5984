"""Command-line driver wiring the pipeline stages into reproducible runs.

Subcommands: synth, train, validate, project, risk, report. Every run
is driven by one resolved config (JSON file + flag overrides, flags
win) and a mandatory master seed; every output file carries the config
hash and seed so reruns can be checked byte for byte.

Exit codes: 0 success, 1 usage error, 2 data error, 3 internal error.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys
import time
from collections import Counter
from pathlib import Path

import numpy as np

from . import __version__
from .config import (
    RunConfig,
    config_from_dict,
    load_config,
    provenance_comment,
    provenance_dict,
)
from .data_io import generate_synthetic, load_dataset, write_dataset
from .domain import Dataset
from .features import build_feature_matrix, impute_missing
from .risk import (
    assess_risk,
    latitudinal_profile,
    uncertainty_quantiles,
    write_profile_csv,
    write_risk_csv,
)
from .scenario import (
    hybrid_project,
    read_projection_csv,
    summarize_scenario,
    write_projection_csv,
)
from .stacking import (
    fit_stacked_ensemble,
    load_stacked_model,
    stacked_to_dict,
    write_oof_csv,
)
from .validation import (
    random_split_baseline,
    spatial_cv,
    temporal_cv,
    write_validation_csv,
)

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_INTERNAL = 3


class UsageError(Exception):
    """Bad flags or config values."""


class DataError(Exception):
    """Missing or malformed input files."""


class _Parser(argparse.ArgumentParser):
    # argparse exits 2 on usage errors by default; the contract says 1
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _add_common(p: _Parser) -> None:
    p.add_argument("--config", metavar="FILE", help="JSON config file")
    p.add_argument("--seed", type=int, help="master seed (mandatory here or in the config)")
    p.add_argument("--out", metavar="DIR", help="output directory (default: out)")
    p.add_argument("--data", metavar="CSV", help="input panel CSV; omit to use synthetic data")
    p.add_argument("--locations", type=int, help="synthetic location count")
    p.add_argument("--k", type=int, help="spatial fold count (default: 5)")
    p.add_argument("--sample-cap", type=int, help="per-fit training row cap (default: 200000)")
    p.add_argument("--rf-trees", type=int, help="random forest size override")
    p.add_argument("--gbm-iters", type=int, help="boosting iteration override")


def build_parser() -> _Parser:
    top = _Parser(prog="permarisk",
                  description="Hybrid physics-ML permafrost projection and risk pipeline.")
    top.add_argument("--version", action="version", version=f"permarisk {__version__}")
    sub = top.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("synth", help="generate a synthetic climate panel CSV")
    _add_common(p)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("train", help="fit the stacked ensemble and write the model + OOF audit")
    _add_common(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("validate", help="run a cross-validation protocol and write metrics")
    _add_common(p)
    p.add_argument("--mode", choices=("spatial", "temporal", "random"),
                   default="spatial", help="validation protocol (default: spatial)")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser(
        "project", help="project permafrost under warming scenarios",
        description="Blends the ML delta with the physical sensitivity model: "
                    "hybrid = min(0, ml_weight*ml + physics_weight*phys), "
                    "phys = -10 * delta_t * w(T_base). With --zero-ml and "
                    "--force-w 1 the mean decline is exactly "
                    "10 * delta_t * physics_weight (RCP85 default: 20.0 pp); "
                    "adding --physics-weight 1.0 yields 10 * delta_t = 50.0 pp.")
    _add_common(p)
    p.add_argument("--model", metavar="JSON", help="trained model (default: OUT/model.json)")
    p.add_argument("--scenario", default="all", help="scenario id or 'all' (default)")
    p.add_argument("--ml-weight", type=float, help="weight on the ML delta (default: 0.6)")
    p.add_argument("--physics-weight", type=float, help="weight on the physics delta (default: 0.4)")
    p.add_argument("--zero-ml", action="store_const", const=True, default=None,
                   help="force the ML delta to zero (physics arithmetic check)")
    p.add_argument("--force-w", type=float, help="pin the sensitivity weight w to a constant")
    p.add_argument("--allow-gain", action="store_const", const=True, default=None,
                   help="lift the no-gain clamp on hybrid deltas")
    p.set_defaults(func=cmd_project)

    p = sub.add_parser("risk", help="classify projections into low/medium/high risk")
    _add_common(p)
    p.add_argument("--projection", action="append", metavar="CSV",
                   help="projection CSV (repeatable; default: OUT/projection_*.csv)")
    p.add_argument("--q-low", type=float, help="low/medium score quantile (default: 0.60)")
    p.add_argument("--q-high", type=float, help="medium/high score quantile (default: 0.85)")
    p.set_defaults(func=cmd_risk)

    p = sub.add_parser("report", help="aggregate run outputs into report.json and figures")
    _add_common(p)
    p.set_defaults(func=cmd_report)

    return top


def _resolve_config(args) -> RunConfig:
    doc = load_config(args.config) if args.config else {}

    def setif(key, value):
        if value is not None:
            doc[key] = value

    setif("seed", args.seed)
    setif("out_dir", args.out)
    setif("data_path", args.data)
    setif("k_folds", args.k)
    setif("sample_cap", args.sample_cap)
    if args.locations is not None:
        synth = dict(doc.get("synth") or {})
        synth["n_locations"] = args.locations
        doc["synth"] = synth
    params = dict(doc.get("params") or {})
    if args.rf_trees is not None:
        params["rf_n_trees"] = args.rf_trees
    if args.gbm_iters is not None:
        params["gbm_n_iterations"] = args.gbm_iters
    if params:
        doc["params"] = params
    setif("ml_weight", getattr(args, "ml_weight", None))
    setif("physics_weight", getattr(args, "physics_weight", None))
    setif("zero_ml", getattr(args, "zero_ml", None))
    setif("force_w", getattr(args, "force_w", None))
    setif("allow_gain", getattr(args, "allow_gain", None))
    setif("q_low", getattr(args, "q_low", None))
    setif("q_high", getattr(args, "q_high", None))
    return config_from_dict(doc)


def _ensure_out(cfg: RunConfig) -> Path:
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _load_data(cfg: RunConfig) -> Dataset:
    if cfg.data_path is not None:
        path = Path(cfg.data_path)
        if not path.exists():
            raise DataError(f"data file not found: {path}")
        try:
            return load_dataset(path)
        except ValueError as e:
            raise DataError(f"{path}: {e}") from None
    return generate_synthetic(cfg.effective_synth())


def _write_json(path: Path, doc: dict) -> None:
    path.write_text(json.dumps(doc, sort_keys=True, indent=2) + "\n")


def cmd_synth(cfg: RunConfig, args) -> int:
    t0 = time.time()
    ds = generate_synthetic(cfg.effective_synth())
    out = _ensure_out(cfg)
    path = out / "dataset.csv"
    write_dataset(path, ds, [provenance_comment(cfg)])
    corr = float(np.corrcoef(ds.temperature, ds.pf)[0, 1])
    print(f"wrote {path}: {ds.n_locations * ds.n_years} rows "
          f"({ds.n_locations} locations x {ds.n_years} years)")
    print(f"pf mean={ds.pf.mean():.2f} median={float(np.median(ds.pf)):.2f} "
          f"corr(temperature, pf)={corr:.3f} elapsed={time.time() - t0:.1f}s")
    return EXIT_OK


def cmd_train(cfg: RunConfig, args) -> int:
    t0 = time.time()
    ds = _load_data(cfg)
    fm = build_feature_matrix(impute_missing(ds))
    model, oof = fit_stacked_ensemble(fm, k=cfg.k_folds, params=cfg.params,
                                      seed=cfg.seed, sample_cap=cfg.sample_cap)
    out = _ensure_out(cfg)
    doc = stacked_to_dict(model)
    doc["provenance"] = provenance_dict(cfg)
    (out / "model.json").write_text(
        json.dumps(doc, sort_keys=True, separators=(",", ":")) + "\n")
    write_oof_csv(out / "oof.csv", fm, oof, [provenance_comment(cfg)])

    print(f"wrote {out / 'model.json'} and {out / 'oof.csv'} "
          f"({fm.n_rows} rows, elapsed={time.time() - t0:.1f}s)")
    for f in range(len(oof.train_locations)):
        overlap = oof.train_locations[f] & oof.heldout_locations[f]
        status = "ok" if not overlap else "LEAK"
        print(f"oof audit fold {f}: trained on {len(oof.train_locations[f])} "
              f"locations, held out {len(oof.heldout_locations[f])}, "
              f"overlap {len(overlap)} {status}")
    names = ("forest", "gbm", "elastic_net")
    rmse = np.sqrt(((oof.matrix - fm.y[:, None]) ** 2).mean(axis=0))
    print("oof rmse: " + " ".join(f"{n}={v:.3f}" for n, v in zip(names, rmse)))
    coef = " ".join(f"{n}={c:+.3f}" for n, c in zip(names, model.meta.coefficients))
    print(f"meta coefficients: {coef} intercept={model.meta.intercept:+.3f}")
    return EXIT_OK


def cmd_validate(cfg: RunConfig, args) -> int:
    t0 = time.time()
    ds = _load_data(cfg)
    if args.mode == "spatial":
        res = spatial_cv(ds, k=cfg.k_folds, params=cfg.params, seed=cfg.seed,
                         sample_cap=cfg.sample_cap)
        pooled = res.pooled
    elif args.mode == "temporal":
        res = temporal_cv(ds, params=cfg.params, seed=cfg.seed,
                          sample_cap=cfg.sample_cap, k=cfg.k_folds)
        pooled = res.pooled
    else:
        res = random_split_baseline(ds, params=cfg.params, seed=cfg.seed,
                                    sample_cap=cfg.sample_cap, k=cfg.k_folds)
        pooled = {"stacked": res}
    out = _ensure_out(cfg)
    path = out / f"validation_{args.mode}.csv"
    write_validation_csv(path, {args.mode: res}, [provenance_comment(cfg)],
                         leakage_demo=(args.mode == "random"))
    print(f"wrote {path} (elapsed={time.time() - t0:.1f}s)")
    for name, rep in pooled.items():
        print(f"{args.mode} {name}: r2={rep.r2:.4f} rmse={rep.rmse:.3f} "
              f"mae={rep.mae:.3f} n={rep.n}")
    return EXIT_OK


def cmd_project(cfg: RunConfig, args) -> int:
    out = _ensure_out(cfg)
    model_path = Path(args.model) if args.model else out / "model.json"
    if not model_path.exists():
        raise DataError(f"model file not found: {model_path} (run train first)")
    model = load_stacked_model(model_path)
    ds = _load_data(cfg)

    catalog = cfg.scenarios()
    if args.scenario != "all":
        catalog = tuple(s for s in catalog if s.id == args.scenario)
        if not catalog:
            raise UsageError(f"unknown scenario {args.scenario!r}; "
                             f"configured: {[s.id for s in cfg.scenarios()]}")
    summaries = {}
    for s in catalog:
        res = hybrid_project(model, ds, s, ml_weight=cfg.ml_weight,
                             physics_weight=cfg.physics_weight,
                             zero_ml=cfg.zero_ml, force_w=cfg.force_w,
                             allow_gain=cfg.allow_gain, tiers=cfg.w_tiers)
        write_projection_csv(out / f"projection_{s.id}.csv", res,
                             [provenance_comment(cfg)])
        summ = summarize_scenario(res)
        summaries[s.id] = dataclasses.asdict(summ)
        print(f"{s.id} (dT=+{s.arctic_delta_t}C): mean decline "
              f"{summ.mean_decline:.2f} pp, median {summ.median_decline:.2f} pp, "
              f">20pp share {summ.prop_gt20:.3f}")
    _write_json(out / "projection_summary.json",
                {"provenance": provenance_dict(cfg), "scenarios": summaries})
    print(f"wrote {out / 'projection_summary.json'} and "
          f"{len(summaries)} projection CSV(s)")
    return EXIT_OK


def cmd_risk(cfg: RunConfig, args) -> int:
    out = _ensure_out(cfg)
    if args.projection:
        paths = [Path(p) for p in args.projection]
    else:
        paths = sorted(out.glob("projection_*.csv"))
    if not paths:
        raise DataError(f"no projection CSVs found in {out} (run project first)")
    for p in paths:
        if not p.exists():
            raise DataError(f"projection file not found: {p}")

    ds = _load_data(cfg)
    L, Y = ds.n_locations, ds.n_years
    lat0 = ds.lat.reshape(L, Y)[:, 0]
    lon0 = ds.lon.reshape(L, Y)[:, 0]
    t_base = ds.temperature.reshape(L, Y)[:, -1]

    quantiles = {}
    for path in paths:
        try:
            results = read_projection_csv(path)
        except ValueError as e:
            raise DataError(str(e)) from None
        plat = np.array([r.lat for r in results])
        plon = np.array([r.lon for r in results])
        if len(results) != L or not (np.allclose(plat, lat0, atol=1e-3)
                                     and np.allclose(plon, lon0, atol=1e-3)):
            raise DataError(f"{path}: rows do not align with the configured "
                            f"dataset's locations")
        sid = results[0].scenario
        asmt = assess_risk(results, t_base, weights=cfg.score_weights,
                           q_low=cfg.q_low, q_high=cfg.q_high)
        write_risk_csv(out / f"risk_{sid}.csv", asmt, [provenance_comment(cfg)])
        prof = latitudinal_profile(asmt)
        write_profile_csv(out / f"profile_{sid}.csv", prof,
                          [provenance_comment(cfg)])
        quantiles[sid] = {f"{q:.2f}": v for q, v in
                          uncertainty_quantiles([a.sigma for a in asmt]).items()}
        counts = Counter(a.risk_class for a in asmt)
        print(f"{sid}: low={counts['low']} medium={counts['medium']} "
              f"high={counts['high']} of {len(asmt)}")
    _write_json(out / "uncertainty.json",
                {"provenance": provenance_dict(cfg), "sigma_quantiles": quantiles})
    print(f"wrote risk/profile CSVs and {out / 'uncertainty.json'}")
    return EXIT_OK


def cmd_report(cfg: RunConfig, args) -> int:
    from .report import build_report, render_figures

    out = _ensure_out(cfg)
    rep = build_report(out)
    if not rep:
        raise DataError(f"no pipeline outputs found in {out}")
    rep["provenance"] = provenance_dict(cfg)
    _write_json(out / "report.json", rep)
    figures = render_figures(out, out / "figures")
    print(f"wrote {out / 'report.json'}")
    for f in figures:
        print(f"wrote {f}")
    return EXIT_OK


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return e.code if isinstance(e.code, int) else EXIT_USAGE
    try:
        try:
            cfg = _resolve_config(args)
        except (ValueError, FileNotFoundError) as e:
            raise UsageError(str(e)) from None
        return args.func(cfg, args)
    except UsageError as e:
        print(f"usage error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except DataError as e:
        print(f"data error: {e}", file=sys.stderr)
        return EXIT_DATA
    except Exception as e:  # pragma: no cover - defensive catch-all
        print(f"internal error: {type(e).__name__}: {e}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    raise SystemExit(main())
