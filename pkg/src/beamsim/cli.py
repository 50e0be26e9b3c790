"""Command line front end.

Six subcommands mirror the pipeline stages:

    simulate       run drops, write beam trace CSVs (and rate CSVs when
                   methods are requested)
    select-beams   correlated-beam sets from trace CSVs
    build-dataset  per-beam windowed dataset CSVs
    train          per-beam DNN models from dataset CSVs
    evaluate       metrics of saved models on a dataset directory
    compare        online deployment: all four strategies over fresh drops,
                   with percentile tables and CDF point sets

Common flags: --config, --seed, --out, --speed, --drops, --methods and the
--desk-scale/--paper-scale pair.  BEAMSIM_SEED / BEAMSIM_OUT override the
seed and the output directory.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import sys

from . import pipeline, report
from .prediction import (CorrelatedSet, evaluate as eval_metrics,
                         load_dataset_csv, predict, save_dataset_csv)
from .scenario import ScenarioConfig, load_config, resolve_out_dir
from .simulate import DropEngine

log = logging.getLogger(__name__)

DESK_TRAIN_DROPS = 10
DESK_VAL_DROPS = 2
DESK_EVAL_DROPS = 2
PAPER_TRAIN_DROPS = 80
PAPER_VAL_DROPS = 20
PAPER_EVAL_DROPS = 10


def _add_common(p: argparse.ArgumentParser):
    p.add_argument("--config", default=None, help="scenario YAML")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out", default=None, help="output directory")
    p.add_argument("--speed", choices=["1", "2", "both"], default="both")
    p.add_argument("--drops", type=int, default=None,
                   help="drop count (per speed for compare)")
    p.add_argument("--methods", default="BF,BRDet,BRPre,GT")
    scale = p.add_mutually_exclusive_group()
    scale.add_argument("--desk-scale", action="store_true", default=True,
                       dest="desk_scale")
    scale.add_argument("--paper-scale", action="store_false",
                       dest="desk_scale")


def _scale(args):
    if args.desk_scale:
        return (DESK_TRAIN_DROPS, DESK_VAL_DROPS, DESK_EVAL_DROPS,
                pipeline.DESK_TRAIN)
    return (PAPER_TRAIN_DROPS, PAPER_VAL_DROPS, PAPER_EVAL_DROPS,
            pipeline.PAPER_TRAIN)


def _speeds(args, cfg: ScenarioConfig):
    if args.speed == "both":
        return tuple(cfg.blocker_speeds)
    return (float(args.speed),)


def _setup(args):
    cfg = load_config(args.config, seed=args.seed)
    out = resolve_out_dir(args.out)
    os.makedirs(out, exist_ok=True)
    return cfg, out


def cmd_simulate(args) -> int:
    cfg, out = _setup(args)
    n_train, n_val, _, _ = _scale(args)
    n = args.drops if args.drops is not None else n_train + n_val
    specs = pipeline.dataset_drop_specs(n, _speeds(args, cfg))
    engine = DropEngine(cfg)
    tdir = os.path.join(out, "traces")
    os.makedirs(tdir, exist_ok=True)
    methods = tuple(m for m in args.methods.split(",") if m)
    if "BRPre" in methods:
        raise SystemExit("simulate cannot deploy predictors; use compare")
    files = []
    for drop_id, speed in specs:
        drop = engine.run_drop(drop_id, speed)
        path = os.path.join(tdir, f"drop_{drop_id:04d}.csv")
        pipeline.write_trace_csv(path, drop.trace, cfg, speed)
        files.append(path)
        if methods:
            traces = engine.method_traces(drop, methods)
            rdir = os.path.join(out, "rates")
            os.makedirs(rdir, exist_ok=True)
            rpath = os.path.join(rdir, f"rates_drop_{drop_id:04d}.csv")
            report.write_rate_traces_csv(
                rpath, traces, drop_id,
                pipeline.header_comment(cfg, "simulate", drop_id=drop_id))
            files.append(rpath)
    pipeline.write_manifest(out, cfg, "simulate", files)
    print(f"simulated {len(specs)} drops -> {tdir}")
    return 0


def _load_traces(out):
    tdir = os.path.join(out, "traces")
    traces = []
    speeds = {}
    for name in sorted(os.listdir(tdir)):
        if name.startswith("drop_") and name.endswith(".csv"):
            tr, meta = pipeline.read_trace_csv(os.path.join(tdir, name))
            traces.append(tr)
            speeds[tr.drop_id] = float(meta.get("speed", 0.0))
    if not traces:
        raise FileNotFoundError(f"no trace CSVs under {tdir}")
    return traces, speeds


def cmd_select_beams(args) -> int:
    cfg, out = _setup(args)
    traces, _ = _load_traces(args.traces or out)
    targets = pipeline.candidate_beams(traces, min_blocked=args.min_blocked,
                                       n_tx_beams=cfg.n_tx_beams)
    if args.max_beams:
        targets = targets[:args.max_beams]
    corr = pipeline.select_stage(traces, targets, cfg.n_correlated)
    doc = {str(gid): {"members": list(cs.members), "delays": list(cs.delays)}
           for gid, cs in corr.items()}
    path = os.path.join(out, "correlated_beams.json")
    with open(path, "w") as fh:
        json.dump({"config_hash": cfg.scenario_hash(), "beams": doc}, fh,
                  indent=0, sort_keys=True)
    pipeline.write_manifest(out, cfg, "select-beams", [path])
    print(f"selected correlated sets for {len(corr)} beams -> {path}")
    return 0


def _load_corr(path, cfg) -> dict[int, CorrelatedSet]:
    with open(path) as fh:
        doc = json.load(fh)
    if doc.get("config_hash") != cfg.scenario_hash():
        raise ValueError("correlated-beam file belongs to another scenario")
    return {int(g): CorrelatedSet(target=int(g),
                                  members=tuple(v["members"]),
                                  delays=tuple(v["delays"]))
            for g, v in doc["beams"].items()}


def cmd_build_dataset(args) -> int:
    cfg, out = _setup(args)
    traces, _ = _load_traces(args.traces or out)
    corr = _load_corr(args.corr or os.path.join(out, "correlated_beams.json"),
                      cfg)
    datasets = pipeline.dataset_stage(traces, corr, cfg.eta_steps,
                                      cfg.eps_steps)
    ddir = os.path.join(out, "datasets")
    os.makedirs(ddir, exist_ok=True)
    files = []
    for gid, ds in datasets.items():
        path = os.path.join(ddir, f"beam_{gid:04d}.csv")
        save_dataset_csv(ds, path)
        files.append(path)
    pipeline.write_manifest(out, cfg, "build-dataset", files)
    print(f"wrote {len(files)} beam datasets -> {ddir}")
    return 0


def cmd_train(args) -> int:
    cfg, out = _setup(args)
    _, _, _, train_cfg = _scale(args)
    corr = _load_corr(args.corr or os.path.join(out, "correlated_beams.json"),
                      cfg)
    ddir = args.datasets or os.path.join(out, "datasets")
    datasets = {}
    for gid, cs in corr.items():
        path = os.path.join(ddir, f"beam_{gid:04d}.csv")
        if os.path.exists(path):
            datasets[gid] = load_dataset_csv(path, gid, cs.members,
                                             cfg.eta_steps, cfg.eps_steps)
    models, metrics = pipeline.train_stage(datasets, cfg, train_cfg,
                                           max_models=args.max_beams or None)
    mdir = os.path.join(out, "models")
    files = pipeline.save_models(models, metrics, mdir, cfg)
    pipeline.write_manifest(out, cfg, "train", files)
    print(f"trained {len(models)} beam models -> {mdir}")
    return 0


def cmd_evaluate(args) -> int:
    cfg, out = _setup(args)
    models = pipeline.load_models(args.models or os.path.join(out, "models"),
                                  cfg)
    ddir = args.datasets or os.path.join(out, "datasets")
    rows = []
    for gid, model in sorted(models.items()):
        path = os.path.join(ddir, f"beam_{gid:04d}.csv")
        if not os.path.exists(path):
            continue
        ds = load_dataset_csv(path, gid, model.meta["members"],
                              cfg.eta_steps, cfg.eps_steps)
        s_hat, _ = predict(model, ds.x)
        met = eval_metrics(s_hat, ds.y)
        rows.append((gid, met))
        print(f"beam {gid:4d}: P={met.precision:.3f} R={met.recall:.3f} "
              f"F1={met.f1:.3f}")
    path = os.path.join(out, "evaluation.csv")
    with open(path, "w", newline="") as fh:
        fh.write(pipeline.header_comment(cfg, "evaluate") + "\n")
        wtr = csv.writer(fh)
        wtr.writerow(["beam_gid", "precision", "recall", "f1"])
        for gid, met in rows:
            wtr.writerow([gid, f"{met.precision:.9g}", f"{met.recall:.9g}",
                          f"{met.f1:.9g}"])
    pipeline.write_manifest(out, cfg, "evaluate", [path])
    return 0


def cmd_compare(args) -> int:
    cfg, out = _setup(args)
    _, _, n_eval, _ = _scale(args)
    n = args.drops if args.drops is not None else n_eval
    methods = tuple(m for m in args.methods.split(",") if m)
    engine = DropEngine(cfg)
    models = {}
    if "BRPre" in methods:
        mdir = args.models or os.path.join(out, "models")
        if os.path.isdir(mdir):
            models = pipeline.load_models(mdir, cfg)
        else:
            log.warning("no models directory %s; BR-Pre falls back to "
                        "detection everywhere", mdir)
    specs = pipeline.eval_drop_specs(n, _speeds(args, cfg))

    by_ms: dict = {}
    files = []
    rdir = os.path.join(out, "rates")
    os.makedirs(rdir, exist_ok=True)
    for drop_id, speed in specs:
        drop = engine.run_drop(drop_id, speed)
        traces = engine.method_traces(drop, methods, models)
        rpath = os.path.join(rdir, f"rates_drop_{drop_id:04d}.csv")
        report.write_rate_traces_csv(
            rpath, traces, drop_id,
            pipeline.header_comment(cfg, "compare", drop_id=drop_id,
                                    speed=f"{speed:.9g}"))
        files.append(rpath)
        for method, trs in traces.items():
            by_ms.setdefault((method, speed), []).extend(trs)

    rep_dir = os.path.join(out, "report")
    os.makedirs(rep_dir, exist_ok=True)
    for flt in ("blocked", "non-blocked"):
        cells = report.percentile_table(by_ms, flt)
        gains = []
        for speed in sorted({s for _, s in by_ms}):
            g = report.gain_percent(cells, "BRPre", "BRDet", speed, 25)
            gains.append((f"BRPre_over_BRDet_p25_speed{speed:g}", g))
        path = os.path.join(rep_dir, f"summary_{flt}.csv")
        report.write_summary_csv(
            path, cells, pipeline.header_comment(cfg, "compare", filter=flt),
            gains)
        files.append(path)
        for (method, speed), trs in sorted(by_ms.items()):
            rates = report.pooled_rates(trs, flt)
            cpath = os.path.join(
                rep_dir, f"cdf_{method}_{speed:g}mps_{flt}.csv")
            report.write_cdf_csv(
                cpath, rates,
                pipeline.header_comment(cfg, "compare", method=method,
                                        speed=f"{speed:g}", filter=flt))
            files.append(cpath)
    pipeline.write_manifest(out, cfg, "compare", files)
    print(f"compared {methods} over {len(specs)} drops -> {rep_dir}")
    return 0


def main(argv=None) -> int:
    logging.basicConfig(level=os.environ.get("BEAMSIM_LOGLEVEL", "WARNING"))
    ap = argparse.ArgumentParser(prog="beamsim", description=__doc__)
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="run drops, write beam traces")
    _add_common(p)
    p.set_defaults(fn=cmd_simulate, methods="")

    p = sub.add_parser("select-beams", help="correlated beam selection")
    _add_common(p)
    p.add_argument("--traces", default=None)
    p.add_argument("--min-blocked", type=int, default=20)
    p.add_argument("--max-beams", type=int, default=0)
    p.set_defaults(fn=cmd_select_beams)

    p = sub.add_parser("build-dataset", help="windowed per-beam datasets")
    _add_common(p)
    p.add_argument("--traces", default=None)
    p.add_argument("--corr", default=None)
    p.set_defaults(fn=cmd_build_dataset)

    p = sub.add_parser("train", help="train per-beam DNN models")
    _add_common(p)
    p.add_argument("--corr", default=None)
    p.add_argument("--datasets", default=None)
    p.add_argument("--max-beams", type=int, default=0)
    p.set_defaults(fn=cmd_train)

    p = sub.add_parser("evaluate", help="score saved models on datasets")
    _add_common(p)
    p.add_argument("--models", default=None)
    p.add_argument("--datasets", default=None)
    p.set_defaults(fn=cmd_evaluate)

    p = sub.add_parser("compare", help="online strategy comparison")
    _add_common(p)
    p.add_argument("--models", default=None)
    p.set_defaults(fn=cmd_compare)

    args = ap.parse_args(argv)
    return args.fn(args)


if __name__ == "__main__":
    sys.exit(main())
