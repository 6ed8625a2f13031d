"""Command-line surface.

Subcommands: score, fit, lodo, grid, ksweep, sweep, bench, synth, report.
Progress and logs go to stderr; data artifacts go only to declared output
paths; stdout carries exactly one line per run, the run-summary hash.

Every command merges its result section into a machine-readable run summary
(JSON, sorted keys, no timestamps), so a full pipeline
score -> fit -> lodo -> ksweep -> grid accumulates one summary that `report`
turns into plot-ready CSV exports. Summaries are byte-deterministic given
(config, seed, cache state) and independent of the worker count; bench
timings therefore live only in bench.csv, never in the summary.

Exit codes: 0 success, 1 validation error, 2 runtime error.
"""

from __future__ import annotations

import argparse
import hashlib
import itertools
import json
import logging
import os
import sys
import time

import numpy as np

from . import ENGINE_VERSION, calibrate, fusion, pipeline, synthbench
from .aggregate import fit_normalization, read_variant_table, write_variant_table
from .datamodel.cache import NullCache, PairScoreCache
from .datamodel.config import load_benchmark_config
from .datamodel.types import NormalizationStats, VariantRecord
from .errors import SadgeError, ValidationError
from .pairing import list_image_ids

log = logging.getLogger("sadge")

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_RUNTIME = 2

DEFAULT_METRIC_PAIR = ("cosine", "inliers")


def _canonical_json(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


def _summary_hash(summary: dict) -> str:
    return hashlib.sha256(_canonical_json(summary).encode("utf-8")).hexdigest()


def _load_summary(path: str) -> dict:
    if os.path.isfile(path):
        with open(path, "r", encoding="utf-8") as fh:
            return json.load(fh)
    return {"engine_version": ENGINE_VERSION, "sections": {}}


def _write_summary(path: str, summary: dict) -> str:
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(_canonical_json(summary) + "\n")
    return _summary_hash(summary)


def _config_hash(path: str) -> str:
    with open(path, "rb") as fh:
        return hashlib.sha256(fh.read()).hexdigest()


def _open_cache(args) -> PairScoreCache | NullCache:
    if args.cache_dir is None:
        return NullCache()
    return PairScoreCache(os.path.join(args.cache_dir, "pair_scores.ndjson"),
                          ENGINE_VERSION)


def _record_dict(rec: VariantRecord, family: str | None = None) -> dict:
    out = {
        "variant_id": rec.variant_id,
        "mean_appearance": rec.mean_appearance,
        "mean_geometry_log": rec.mean_geometry_log,
        "downstream_score": rec.downstream_score,
        "n_pairs": rec.n_pairs,
    }
    if family is not None:
        out["family"] = family
    return out


def _report_dict(rep: calibrate.CorrelationReport) -> dict:
    return {"pearson_r": rep.pearson_r, "spearman_rho": rep.spearman_rho,
            "spearman_p_approx": rep.spearman_p_approx, "n": rep.n}


def _model_dict(model) -> dict:
    return {
        "equation_id": model.equation_id,
        "params": list(model.params),
        "bounds": [list(b) for b in model.bounds],
        "input_transform": model.input_transform,
        "fitted_corr": model.fitted_corr,
        "transform_stats": model.transform_stats,
        "scale_note": "bilinear params are identifiable up to positive scale; "
                      "reported at fitted magnitude",
    }


def _records_from_section(section: dict) -> list[VariantRecord]:
    return [VariantRecord(variant_id=d["variant_id"],
                          mean_appearance=d["mean_appearance"],
                          mean_geometry_log=d["mean_geometry_log"],
                          n_pairs=d["n_pairs"],
                          downstream_score=d.get("downstream_score"))
            for d in section["records"]]


def _require_section(summary: dict, name: str) -> dict:
    if name not in summary.get("sections", {}):
        raise ValidationError(
            f"run summary has no {name!r} section; run the producing command first"
        )
    return summary["sections"][name]


# ---------------------------------------------------------------- score

def cmd_score(args) -> None:
    config = load_benchmark_config(args.config)
    cache = _open_cache(args)
    metrics = tuple(dict.fromkeys(
        [args.appearance_metric, args.geometry_metric] + (args.extra_metrics or [])))
    t0 = time.perf_counter()
    scores = pipeline.score_benchmark(config, metrics, cache, ENGINE_VERSION,
                                      workers=args.workers)
    wall = time.perf_counter() - t0
    records = scores.records(args.appearance_metric, args.geometry_metric)
    log.info("scored %d variants in %.2fs (metric stage %.2fs, cache %s)",
             len(records), wall, scores.metric_seconds, cache.stats)

    out_table = os.path.join(args.out, "variants.csv")
    write_variant_table(out_table, records)

    downstream = {vid: vs.downstream_score
                  for vid, vs in scores.by_variant.items()
                  if vs.downstream_score is not None}
    metric_correlations: dict[str, dict] = {}
    if len(downstream) >= 4:
        y = [downstream[v] for v in sorted(downstream)]
        for metric in metrics:
            means = scores.metric_means(metric)
            x = [means[v] for v in sorted(downstream)]
            try:
                rep = calibrate.correlation_report(x, y)
            except SadgeError as exc:
                log.warning("correlation undefined for %s: %s", metric, exc)
                continue
            metric_correlations[metric] = _report_dict(rep)

    summary = _load_summary(args.summary)
    summary["engine_version"] = ENGINE_VERSION
    summary["seed"] = args.seed
    summary["config_hash"] = _config_hash(args.config)
    summary["sections"]["variants"] = {
        "appearance_metric": args.appearance_metric,
        "geometry_metric": args.geometry_metric,
        "records": [_record_dict(r, scores.family_of[r.variant_id]) for r in records],
        "metric_means": {m: scores.metric_means(m) for m in metrics},
        "metric_correlations": metric_correlations,
    }
    print(_write_summary(args.summary, summary))


# ---------------------------------------------------------------- fit

def _fit_records(records, equation, args):
    split = calibrate.fit_split(records, equation, n_starts=args.starts,
                                seed=args.seed)
    scatter = []
    triples = calibrate.design_from_records(
        [r for r in records if r.downstream_score is not None], split.stats)
    for rec, (g, a, y) in zip(
            [r for r in records if r.downstream_score is not None], triples):
        fused = fusion.evaluate_fusion(split.model.equation_id, split.model.params,
                                       g, a, transform_stats=split.model.transform_stats)
        scatter.append([rec.variant_id, float(fused), y])
    return split, scatter


def _fit_per_family(summary: dict, equation: str, args):
    """Per-family normalization path: families come from the variants section."""
    section = _require_section(summary, "variants")
    by_family: dict[str, list[VariantRecord]] = {}
    for rec_dict, rec in zip(section["records"], _records_from_section(section)):
        by_family.setdefault(rec_dict.get("family", "all"), []).append(rec)
    triples = calibrate.design_per_family(by_family)
    fit = calibrate.fit_fusion(equation, triples, n_starts=args.starts,
                               seed=args.seed)
    fused = [fusion.evaluate_fusion(fit.model.equation_id, fit.model.params, g, a,
                                    transform_stats=fit.model.transform_stats)
             for g, a, _ in triples]
    y = [t[2] for t in triples]
    ordered_ids = [r.variant_id for fam in sorted(by_family)
                   for r in by_family[fam] if r.downstream_score is not None]
    scatter = [[vid, float(f), yv] for vid, f, yv in zip(ordered_ids, fused, y)]
    report = calibrate.correlation_report(fused, y)
    return fit.model, report, scatter


def cmd_fit(args) -> None:
    summary = _load_summary(args.summary)
    if args.variants:
        records = read_variant_table(args.variants)
    else:
        records = _records_from_section(_require_section(summary, "variants"))

    if args.equation == "all":
        rows = []
        for eq_id in fusion.EQUATIONS:
            try:
                split, _ = _fit_records(records, eq_id, args)
                rows.append({"equation_id": eq_id,
                             "abs_r": abs(split.report.pearson_r),
                             "params": list(split.model.params)})
            except SadgeError as exc:
                rows.append({"equation_id": eq_id, "abs_r": None,
                             "error": str(exc)})
        rows.sort(key=lambda r: -(r["abs_r"] if r["abs_r"] is not None else -10))
        summary["sections"]["fusion_zoo"] = {"rows": rows}
        # the primary fit still lands in the fit section
        equation = "constrained_polynomial"
    else:
        equation = args.equation

    if args.norm_scope == "per_family":
        if args.variants:
            raise ValidationError(
                "--norm-scope per_family needs family labels, which the CSV "
                "table does not carry; run `score` first and fit from the "
                "run summary instead of --variants"
            )
        model, report, scatter = _fit_per_family(summary, equation, args)
        stats_dict = None  # one stats tuple per family, not a single global one
    else:
        split, scatter = _fit_records(records, equation, args)
        model, report = split.model, split.report
        stats_dict = {"mu_A": split.stats.mu_A, "sigma_A": split.stats.sigma_A,
                      "mu_G": split.stats.mu_G, "sigma_G": split.stats.sigma_G}
    fusion.save_fusion_model(os.path.join(args.out, "fusion_model.json"), model)
    summary["sections"]["fit"] = {
        "equation": equation,
        "norm_scope": args.norm_scope,
        "model": _model_dict(model),
        "stats": stats_dict,
        "report": _report_dict(report),
        "scatter": scatter,
        "n_starts": args.starts,
    }
    log.info("fit %s: r=%.4f rho=%.4f", equation, report.pearson_r,
             report.spearman_rho)
    print(_write_summary(args.summary, summary))


# ---------------------------------------------------------------- lodo

def cmd_lodo(args) -> None:
    summary = _load_summary(args.summary)
    config = load_benchmark_config(args.config, check_paths=False)
    if args.variants:
        records = read_variant_table(args.variants)
    else:
        records = _records_from_section(_require_section(summary, "variants"))
    family_of = {v.variant_id: c.real_dataset
                 for c in config.collections for v in c.synthetic_variants}
    by_family: dict[str, list[VariantRecord]] = {}
    for rec in records:
        if rec.variant_id not in family_of:
            raise ValidationError(f"variant {rec.variant_id!r} not in config")
        by_family.setdefault(family_of[rec.variant_id], []).append(rec)

    splits = calibrate.leave_one_out(by_family, args.equation, n_starts=args.starts,
                                     seed=args.seed, reuse_stats=args.reuse_stats)
    full = calibrate.fit_split(
        [r for recs in by_family.values() for r in recs], args.equation,
        n_starts=args.starts, seed=args.seed)

    metric_means = summary.get("sections", {}).get("variants", {}).get("metric_means", {})
    section: dict = {"equation": args.equation, "reuse_stats": args.reuse_stats,
                     "full": {"report": _report_dict(full.report),
                              "params": list(full.model.params)},
                     "splits": {}}
    for fam, split in splits.items():
        kept = [r for f, recs in by_family.items() if f != fam for r in recs
                if r.downstream_score is not None]
        single_r = {}
        y = [r.downstream_score for r in kept]
        for metric, means in metric_means.items():
            try:
                x = [means[r.variant_id] for r in kept]
                single_r[metric] = calibrate.pearson(x, y)
            except (KeyError, SadgeError):
                continue
        section["splits"][fam] = {
            "report": _report_dict(split.report),
            "params": list(split.model.params),
            "single_r": single_r,
        }
    summary["sections"]["lodo"] = section
    summary["config_hash"] = _config_hash(args.config)
    print(_write_summary(args.summary, summary))


# ---------------------------------------------------------------- grid

def cmd_grid(args) -> None:
    summary = _load_summary(args.summary)
    if args.variants:
        records = read_variant_table(args.variants)
    else:
        records = _records_from_section(_require_section(summary, "variants"))
    if args.model:
        model = fusion.load_fusion_model(args.model)
    else:
        fit_sec = _require_section(summary, "fit")
        model = fusion.load_fusion_model_from_dict(fit_sec["model"])
    if model.equation_id != "constrained_polynomial":
        raise ValidationError("sensitivity grids are defined for the bilinear fusion")

    stats_src = summary.get("sections", {}).get("fit", {}).get("stats")
    scored = [r for r in records if r.downstream_score is not None]
    if stats_src:
        stats = NormalizationStats(mu_A=stats_src["mu_A"], sigma_A=stats_src["sigma_A"],
                                   mu_G=stats_src["mu_G"], sigma_G=stats_src["sigma_G"])
    else:
        stats = fit_normalization(scored)
    triples = calibrate.design_from_records(scored, stats)

    grids = []
    names = ("a", "b", "c")
    for pair in (("a", "b"), ("a", "c"), ("b", "c")):
        fixed_name = next(n for n in names if n not in pair)
        fixed_value = model.params[names.index(fixed_name)]
        grid = calibrate.sensitivity_grid(
            triples, pair, fixed_value, grid_shape=(args.grid_size, args.grid_size))
        grids.append({
            "pair": list(pair), "fixed_name": fixed_name, "fixed_value": fixed_value,
            "x": [float(v) for v in grid.x_values],
            "y": [float(v) for v in grid.y_values],
            "matrix": [[None if np.isnan(v) else float(v) for v in row]
                       for row in grid.matrix],
            "max_value": grid.max_value,
            "max_cell": list(grid.max_cell),
        })
    summary["sections"]["grids"] = {"grid_size": args.grid_size, "grids": grids,
                                    "params": list(model.params)}
    print(_write_summary(args.summary, summary))


# ---------------------------------------------------------------- ksweep

def cmd_ksweep(args) -> None:
    summary = _load_summary(args.summary)
    config = load_benchmark_config(args.config)
    cache = _open_cache(args)
    ks = sorted(int(k) for k in args.ks.split(","))
    result = calibrate.k_sensitivity_sweep(
        config, ks, args.appearance_metric, args.geometry_metric, args.equation,
        cache, ENGINE_VERSION, n_starts=args.starts, seed=args.seed,
        workers=args.workers)
    summary["sections"]["ksweep"] = {
        "appearance_metric": args.appearance_metric,
        "geometry_metric": args.geometry_metric,
        "ks": ks,
        "pearson_r": {str(k): result[k] for k in ks},
    }
    summary["config_hash"] = _config_hash(args.config)
    print(_write_summary(args.summary, summary))


# ---------------------------------------------------------------- sweep

def cmd_sweep(args) -> None:
    summary = _load_summary(args.summary)
    config = load_benchmark_config(args.config)
    cache = _open_cache(args)
    appearance = args.appearance_metrics.split(",")
    geometry = args.geometry_metrics.split(",")
    sweep = calibrate.component_sweep(config, appearance, geometry, args.equation,
                                      cache, ENGINE_VERSION, n_starts=args.starts,
                                      seed=args.seed, workers=args.workers)
    summary["sections"]["component_sweep"] = {
        "appearance_metrics": sweep.appearance_metrics,
        "geometry_metrics": sweep.geometry_metrics,
        "matrix": [[None if np.isnan(v) else float(v) for v in row]
                   for row in sweep.matrix],
        "best_cell": None if sweep.best_cell is None else list(sweep.best_cell),
        "best_pair": None if sweep.best_pair() is None else list(sweep.best_pair()),
        "notes": sweep.notes,
    }
    summary["config_hash"] = _config_hash(args.config)
    print(_write_summary(args.summary, summary))


# ---------------------------------------------------------------- bench

def cmd_bench(args) -> None:
    config = load_benchmark_config(args.config)
    metrics = [m for m in args.metrics.split(",") if m]
    pairs = []  # (collection, variant_id, real_id, synth_id)
    for coll in config.collections:
        if coll.pairing_mode != "retrieval" and not args.include_aligned:
            continue
        real_ids = list_image_ids(os.path.join(config.base_dir, coll.real_dir))
        for variant in coll.synthetic_variants:
            synth_ids = list_image_ids(os.path.join(config.base_dir, variant.synth_dir))
            for rid, sid in itertools.product(real_ids, synth_ids):
                pairs.append((coll, variant.variant_id, rid, sid))
                if len(pairs) >= args.pairs:
                    break
            if len(pairs) >= args.pairs:
                break
        if len(pairs) >= args.pairs:
            break
    if len(pairs) < 100:
        raise ValidationError(f"bench needs >= 100 pairs, found {len(pairs)}")
    log.info("bench: %d pairs, metrics %s", len(pairs), metrics)

    rows = []
    for metric in metrics:
        pipeline.reset_worker_state()  # each metric pays its own decode cost
        t_load = time.perf_counter()
        contexts = {}
        for coll, vid, _, _ in pairs:
            if vid not in contexts:
                contexts[vid] = pipeline.build_context(config, coll, vid, (metric,))
                if metric == "cosine" and contexts[vid].embedding_index:
                    pipeline._load_embeddings_once(contexts[vid].embedding_index,
                                                   contexts[vid].embedding_blob)
        load_s = time.perf_counter() - t_load
        failures = 0
        t0 = time.perf_counter()
        for coll, vid, rid, sid in pairs:
            try:
                pipeline.compute_pair_metric(contexts[vid], metric, rid, sid)
            except SadgeError:
                failures += 1
        total_s = time.perf_counter() - t0
        rows.append({"metric": metric, "load_s": load_s, "total_s": total_s,
                     "pairs_per_s": len(pairs) / total_s if total_s > 0 else 0.0,
                     "failures": failures})
        log.info("bench %s: load %.3fs total %.3fs -> %.2f pairs/s",
                 metric, load_s, total_s, rows[-1]["pairs_per_s"])

    os.makedirs(args.out, exist_ok=True)
    bench_csv = os.path.join(args.out, "bench.csv")
    with open(bench_csv, "w", encoding="utf-8") as fh:
        fh.write(f"# pairs={len(pairs)} device={args.device_note}\n")
        fh.write("metric,load_s,total_s,pairs_per_s,failures\n")
        for row in rows:
            fh.write(f"{row['metric']},{row['load_s']:.4f},{row['total_s']:.4f},"
                     f"{row['pairs_per_s']:.4f},{row['failures']}\n")

    summary = _load_summary(args.summary)
    summary["sections"]["bench"] = {"metrics": metrics, "n_pairs": len(pairs),
                                    "table": "bench.csv"}
    summary["config_hash"] = _config_hash(args.config)
    print(_write_summary(args.summary, summary))


# ---------------------------------------------------------------- synth

def cmd_synth(args) -> None:
    spec = synthbench.default_benchmark_spec(
        seed=args.seed, n_scenes=args.scenes,
        max_retrieval_queries=args.retrieval_queries)
    config_path = synthbench.generate_collection(args.out_dir, spec)
    log.info("benchmark written under %s", args.out_dir)
    summary = _load_summary(args.summary)
    summary["sections"]["synth"] = {
        "benchmark_id": spec.benchmark_id,
        "seed": spec.seed,
        "families": [f.name for f in spec.families],
        "config": os.path.relpath(config_path, args.out_dir),
        "utility": {"base": spec.utility.base, "w_app": spec.utility.w_app,
                    "w_geo": spec.utility.w_geo, "w_int": spec.utility.w_int,
                    "noise_sigma": spec.utility.noise_sigma},
    }
    print(_write_summary(args.summary, summary))


# ---------------------------------------------------------------- report

def _write_csv(path: str, header: list[str], rows: list[list]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join("" if v is None else str(v) for v in row) + "\n")


def cmd_report(args) -> None:
    with open(args.summary, "r", encoding="utf-8") as fh:
        summary = json.load(fh)
    sections = summary.get("sections", {})
    os.makedirs(args.out, exist_ok=True)
    written = []

    if "variants" in sections or "fit" in sections:
        rows = []
        for metric, rep in sections.get("variants", {}).get(
                "metric_correlations", {}).items():
            rows.append([metric, rep["pearson_r"], rep["spearman_rho"],
                         rep["spearman_p_approx"]])
        if "fit" in sections:
            rep = sections["fit"]["report"]
            rows.append(["sadge", rep["pearson_r"], rep["spearman_rho"],
                         rep["spearman_p_approx"]])
        path = os.path.join(args.out, "bars.csv")
        _write_csv(path, ["metric", "pearson_r", "spearman_rho", "p_approx"], rows)
        written.append(path)
    else:
        log.warning("report: no variants/fit section, skipping bars.csv")

    if "fit" in sections:
        path = os.path.join(args.out, "scatter.csv")
        _write_csv(path, ["variant_id", "sadge_score", "downstream_score"],
                   sections["fit"]["scatter"])
        written.append(path)
    else:
        log.warning("report: no fit section, skipping scatter.csv")

    if "grids" in sections:
        path = os.path.join(args.out, "heatmaps.csv")
        rows = []
        for grid in sections["grids"]["grids"]:
            xn, yn = grid["pair"]
            for i, xv in enumerate(grid["x"]):
                for j, yv in enumerate(grid["y"]):
                    rows.append(["_".join(grid["pair"]), xn, yn, xv, yv,
                                 grid["matrix"][i][j]])
        _write_csv(path, ["pair", "x_name", "y_name", "x", "y", "pearson_r"], rows)
        written.append(path)
    else:
        log.warning("report: no grids section, skipping heatmaps.csv")

    if "ksweep" in sections:
        path = os.path.join(args.out, "ksweep.csv")
        sec = sections["ksweep"]
        _write_csv(path, ["k", "pearson_r"],
                   [[k, sec["pearson_r"][str(k)]] for k in sec["ks"]])
        written.append(path)
    else:
        log.warning("report: no ksweep section, skipping ksweep.csv")

    if "lodo" in sections:
        path = os.path.join(args.out, "lodo.csv")
        rows = []
        for fam, split in sorted(sections["lodo"]["splits"].items()):
            rep = split["report"]
            rows.append([fam, rep["pearson_r"], rep["spearman_rho"],
                         json.dumps(split["single_r"], sort_keys=True).replace(",", ";")])
        _write_csv(path, ["excluded", "pearson_r", "spearman_rho", "single_r"], rows)
        written.append(path)
    else:
        log.warning("report: no lodo section, skipping lodo.csv")

    if "component_sweep" in sections:
        path = os.path.join(args.out, "component_sweep.csv")
        sec = sections["component_sweep"]
        rows = []
        for gi, gm in enumerate(sec["geometry_metrics"]):
            for ai, am in enumerate(sec["appearance_metrics"]):
                rows.append([gm, am, sec["matrix"][gi][ai]])
        _write_csv(path, ["geometry_metric", "appearance_metric", "pearson_r"], rows)
        written.append(path)

    log.info("report: wrote %d export files", len(written))
    print(_summary_hash(summary))


# ---------------------------------------------------------------- parser

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="sadge",
        description="Training-free utility scoring for synthetic image datasets",
    )
    parser.add_argument("--verbose", "-v", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, config_required=True):
        p.add_argument("--seed", type=int, default=0, help="top-level seed")
        p.add_argument("--workers", type=int, default=os.cpu_count() or 1)
        p.add_argument("--cache-dir", default=None, help="pair-score cache directory")
        p.add_argument("--out", default=".", help="output directory")
        p.add_argument("--summary", default=None,
                       help="run summary path (default <out>/run_summary.json)")
        if config_required:
            p.add_argument("--config", required=True, help="benchmark config path")

    p = sub.add_parser("score", help="pairing -> metrics -> variant table")
    common(p)
    p.add_argument("--appearance-metric", default=DEFAULT_METRIC_PAIR[0])
    p.add_argument("--geometry-metric", default=DEFAULT_METRIC_PAIR[1])
    p.add_argument("--extra-metrics", nargs="*", default=["psnr", "ssim"],
                   help="additional metrics to score for the bar/LODO tables")
    p.set_defaults(func=cmd_score)

    p = sub.add_parser("fit", help="fit a fusion equation on a variant table")
    common(p, config_required=False)
    p.add_argument("--variants", default=None, help="variant table CSV")
    p.add_argument("--equation", default="constrained_polynomial",
                   help="fusion equation id or 'all' for the zoo table")
    p.add_argument("--starts", type=int, default=300)
    p.add_argument("--norm-scope", choices=("global", "per_family"),
                   default="global",
                   help="fit normalization stats over the whole set (default) "
                        "or per dataset family")
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("lodo", help="leave-one-dataset-out refits")
    common(p)
    p.add_argument("--variants", default=None)
    p.add_argument("--equation", default="constrained_polynomial")
    p.add_argument("--starts", type=int, default=300)
    p.add_argument("--reuse-stats", action="store_true",
                   help="reuse full-benchmark normalization in splits")
    p.set_defaults(func=cmd_lodo)

    p = sub.add_parser("grid", help="coefficient sensitivity grids")
    common(p, config_required=False)
    p.add_argument("--variants", default=None)
    p.add_argument("--model", default=None, help="fusion model JSON")
    p.add_argument("--grid-size", type=int, default=50)
    p.set_defaults(func=cmd_grid)

    p = sub.add_parser("ksweep", help="retrieval pool-size sweep")
    common(p)
    p.add_argument("--ks", default="1,3,5,10")
    p.add_argument("--appearance-metric", default=DEFAULT_METRIC_PAIR[0])
    p.add_argument("--geometry-metric", default=DEFAULT_METRIC_PAIR[1])
    p.add_argument("--equation", default="constrained_polynomial")
    p.add_argument("--starts", type=int, default=300)
    p.set_defaults(func=cmd_ksweep)

    p = sub.add_parser("sweep", help="geometry x appearance component sweep")
    common(p)
    p.add_argument("--appearance-metrics", default="cosine,psnr,ssim")
    p.add_argument("--geometry-metrics", default="inliers")
    p.add_argument("--equation", default="constrained_polynomial")
    p.add_argument("--starts", type=int, default=300)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("bench", help="metric runtime benchmark")
    common(p)
    p.add_argument("--pairs", type=int, default=1000)
    p.add_argument("--metrics", default="psnr,ssim,cosine,inliers")
    p.add_argument("--device-note", default="cpu")
    p.add_argument("--include-aligned", action="store_true")
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("synth", help="generate the procedural desk benchmark")
    common(p, config_required=False)
    p.add_argument("--out-dir", required=True)
    p.add_argument("--scenes", type=int, default=24)
    p.add_argument("--retrieval-queries", type=int, default=12)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("report", help="CSV exports from a run summary")
    common(p, config_required=False)
    p.set_defaults(func=cmd_report)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        stream=sys.stderr,
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(levelname)s %(name)s: %(message)s",
    )
    if getattr(args, "summary", None) is None:
        args.summary = os.path.join(args.out, "run_summary.json")
    try:
        args.func(args)
    except (ValidationError,) as exc:
        log.error("%s", exc)
        return EXIT_VALIDATION
    except SadgeError as exc:
        log.error("%s", exc)
        return EXIT_RUNTIME
    except Exception:  # noqa: BLE001
        log.exception("unexpected failure")
        return EXIT_RUNTIME
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
