"""End-to-end pair scoring: pairing plans -> pair metrics -> variant records.

One ScoringContext per variant bundles the resources each metric needs
(embedding manifests, correspondence directory, image directories). Pair
computation is pure, so missing scores are computed in parallel worker
processes and only the parent appends to the cache.

Geometry verification seeds derive from the pair ids alone (not from the
user-level seed): a cached inlier count must mean the same thing no matter
which run computed it.
"""

from __future__ import annotations

import json
import logging
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from functools import lru_cache

import numpy as np

from . import metrics_native
from .aggregate import aggregate_variant
from .datamodel.cache import NullCache, PairScoreCache
from .datamodel.images import load_image
from .datamodel.manifests import (
    correspondence_path,
    load_correspondence_set,
    load_embedding_manifest,
)
from .datamodel.types import BenchmarkConfig, CollectionConfig, PairScore, VariantRecord
from .errors import ConfigError, MetricError
from .pairing import PairingPlan, build_pairing_plan, retrieval_best
from .seeding import derive_seed

log = logging.getLogger(__name__)

APPEARANCE_METRICS = ("cosine", "psnr", "ssim")
GEOMETRY_METRICS = ("inliers",)
NATIVE_METRICS = APPEARANCE_METRICS + GEOMETRY_METRICS


@dataclass
class ScoringContext:
    """Everything a worker needs to score pairs of one variant."""

    real_dir: str
    synth_dir: str
    metrics: tuple[str, ...]
    embedding_index: str | None = None
    embedding_blob: str | None = None
    correspondence_dir: str | None = None
    external_scores: dict[str, dict[tuple[str, str], float]] = field(default_factory=dict)


@dataclass
class VariantScores:
    """Per-query best scores of one variant, per metric."""

    variant_id: str
    plan: PairingPlan
    downstream_score: float | None
    values: dict[str, list[float]]          # metric -> per-query best value
    best_match: dict[str, list[str]]        # metric -> per-query best synth id
    cache_hits: int = 0
    cache_misses: int = 0
    metric_seconds: float = 0.0

    def mean(self, metric_id: str) -> float:
        return float(np.mean(self.values[metric_id]))

    def record(self, appearance_metric: str, geometry_metric: str) -> VariantRecord:
        return aggregate_variant(
            self.variant_id,
            self.values[appearance_metric],
            self.values[geometry_metric],
            downstream_score=self.downstream_score,
        )


# Worker-process state: populated once per worker by _init_worker (fork-safe).
_WORKER_CTX: dict = {}


@lru_cache(maxsize=1024)
def _image_luma(path: str):
    return load_image(path, mode="luma")


def reset_worker_state() -> None:
    """Drop per-process caches (decoded images, loaded manifests)."""
    _image_luma.cache_clear()
    _WORKER_CTX.clear()


def _load_embeddings_once(index_path: str, blob_path: str | None):
    key = ("emb", index_path)
    if key not in _WORKER_CTX:
        _WORKER_CTX[key] = load_embedding_manifest(index_path, blob_path)
    return _WORKER_CTX[key]


def _image_path(directory: str, image_id: str) -> str:
    for ext in (".png", ".jpg", ".jpeg", ".bmp"):
        candidate = os.path.join(directory, image_id + ext)
        if os.path.isfile(candidate):
            return candidate
    raise MetricError(f"no image file for id {image_id!r} under {directory}")


def compute_pair_metric(ctx: ScoringContext, metric_id: str,
                        real_id: str, synth_id: str) -> float:
    """Compute one native (or externally ingested) pair metric."""
    if metric_id == "psnr" or metric_id == "ssim":
        img_r = _image_luma(_image_path(ctx.real_dir, real_id))
        img_s = _image_luma(_image_path(ctx.synth_dir, synth_id))
        fn = metrics_native.psnr if metric_id == "psnr" else metrics_native.ssim
        return float(fn(img_r, img_s))
    if metric_id == "cosine":
        if ctx.embedding_index is None:
            raise MetricError(
                "cosine metric needs an embedding manifest; set embedding_index "
                "in the collection config"
            )
        manifest = _load_embeddings_once(ctx.embedding_index, ctx.embedding_blob)
        return float(metrics_native.cosine_similarity(manifest.get(real_id),
                                                      manifest.get(synth_id)))
    if metric_id == "inliers":
        if ctx.correspondence_dir is None:
            raise MetricError(
                "inliers metric needs correspondence files; set correspondence_dir "
                "in the collection config"
            )
        path = correspondence_path(ctx.correspondence_dir, real_id, synth_id)
        corr = load_correspondence_set(path)
        score = metrics_native.ransac_inlier_count(
            corr, seed=derive_seed("ransac", real_id, synth_id))
        return float(score.inlier_count)
    if metric_id in ctx.external_scores:
        table = ctx.external_scores[metric_id]
        try:
            return table[(real_id, synth_id)]
        except KeyError:
            raise MetricError(
                f"external metric {metric_id!r} has no score for ({real_id}, {synth_id})"
            ) from None
    raise MetricError(f"unknown metric {metric_id!r}")


def _init_worker(ctx: ScoringContext) -> None:
    _WORKER_CTX["ctx"] = ctx


def _score_pair_task(args: tuple[str, str, tuple[str, ...]]):
    real_id, synth_id, metric_ids = args
    ctx: ScoringContext = _WORKER_CTX["ctx"]
    out = {}
    for metric_id in metric_ids:
        try:
            out[metric_id] = compute_pair_metric(ctx, metric_id, real_id, synth_id)
        except Exception as exc:
            raise MetricError(
                f"metrics_native/{metric_id} failed on pair ({real_id}, {synth_id}): {exc}"
            ) from exc
    return real_id, synth_id, out


def _load_external_scores(config: BenchmarkConfig, coll: CollectionConfig
                          ) -> dict[str, dict[tuple[str, str], float]]:
    """Pair scores produced outside the engine, in the cache wire format.

    The engine_version field of external records is a producer tag, not a
    compatibility key, so every record is accepted.
    """
    out: dict[str, dict[tuple[str, str], float]] = {}
    for rel in coll.external_scores:
        path = os.path.join(config.base_dir, rel)
        if not os.path.isfile(path):
            raise ConfigError(f"external score file not found: {path}",
                              field="external_scores")
        with open(path, "r", encoding="utf-8") as fh:
            for line in fh:
                line = line.strip()
                if not line:
                    continue
                try:
                    rec = json.loads(line)
                    out.setdefault(rec["metric_id"], {})[
                        (rec["real_id"], rec["synth_id"])] = float(rec["value"])
                except (json.JSONDecodeError, KeyError, TypeError, ValueError):
                    log.warning("%s: skipping corrupt external score record", path)
    return out


def build_context(config: BenchmarkConfig, coll: CollectionConfig, variant_id: str,
                  metrics: tuple[str, ...]) -> ScoringContext:
    variant = next(v for v in coll.synthetic_variants if v.variant_id == variant_id)

    def _abs(rel: str | None) -> str | None:
        return None if rel is None else os.path.join(config.base_dir, rel)

    ctx = ScoringContext(
        real_dir=os.path.join(config.base_dir, coll.real_dir),
        synth_dir=os.path.join(config.base_dir, variant.synth_dir),
        metrics=metrics,
        embedding_index=_abs(coll.embedding_index),
        embedding_blob=_abs(coll.embedding_blob),
        correspondence_dir=_abs(coll.correspondence_dir),
        external_scores=_load_external_scores(config, coll),
    )
    for metric_id in metrics:
        if metric_id == "cosine" and ctx.embedding_index is not None \
                and not os.path.isfile(ctx.embedding_index):
            raise ConfigError(
                f"embedding manifest not found: {ctx.embedding_index}",
                field="embedding_index",
            )
    return ctx


def score_variant(
    config: BenchmarkConfig,
    variant_id: str,
    metrics: tuple[str, ...],
    cache: PairScoreCache | NullCache,
    engine_version: str,
    workers: int = 1,
) -> VariantScores:
    """Score one variant: pairing plan, per-pair metrics (cached), best match.

    Appearance and geometry best matches are selected independently per
    metric, so the retrieved counterpart may differ between metrics.
    """
    coll = config.collection_of(variant_id)
    plan = build_pairing_plan(config, variant_id)
    ctx = build_context(config, coll, variant_id, metrics)

    t0 = time.perf_counter()
    lookup: dict[tuple[str, str, str], float] = {}
    missing: dict[tuple[str, str], list[str]] = {}
    hits = 0
    for real_id, candidates in plan.queries:
        for synth_id in candidates:
            for metric_id in metrics:
                cached = cache.get(real_id, synth_id, metric_id)
                if cached is not None:
                    lookup[(real_id, synth_id, metric_id)] = cached.value
                    hits += 1
                else:
                    missing.setdefault((real_id, synth_id), []).append(metric_id)

    tasks = [(rid, sid, tuple(ms)) for (rid, sid), ms in sorted(missing.items())]
    if tasks:
        if workers > 1:
            with ProcessPoolExecutor(max_workers=workers, initializer=_init_worker,
                                     initargs=(ctx,)) as pool:
                results = list(pool.map(_score_pair_task, tasks, chunksize=8))
        else:
            _init_worker(ctx)
            results = [_score_pair_task(t) for t in tasks]
        new_scores = []
        for real_id, synth_id, per_metric in results:
            for metric_id, value in per_metric.items():
                lookup[(real_id, synth_id, metric_id)] = value
                new_scores.append(PairScore(real_id=real_id, synth_id=synth_id,
                                            metric_id=metric_id, value=value,
                                            engine_version=engine_version))
        cache.put_many(new_scores)
    metric_seconds = time.perf_counter() - t0

    values: dict[str, list[float]] = {m: [] for m in metrics}
    best_match: dict[str, list[str]] = {m: [] for m in metrics}
    for metric_id in metrics:
        for real_id, candidates in plan.queries:
            sid, val = retrieval_best(
                real_id, candidates, metric_id,
                lambda r, s, m=metric_id: lookup[(r, s, m)],
            )
            values[metric_id].append(val)
            best_match[metric_id].append(sid)

    downstream = next(v.downstream_score for v in coll.synthetic_variants
                      if v.variant_id == variant_id)
    return VariantScores(
        variant_id=variant_id, plan=plan, downstream_score=downstream,
        values=values, best_match=best_match,
        cache_hits=hits, cache_misses=len(tasks), metric_seconds=metric_seconds,
    )


@dataclass
class BenchmarkScores:
    """All variant scores of one run plus family grouping."""

    by_variant: dict[str, VariantScores]
    family_of: dict[str, str]
    metric_seconds: float

    def records(self, appearance_metric: str, geometry_metric: str
                ) -> list[VariantRecord]:
        return [vs.record(appearance_metric, geometry_metric)
                for vs in self.by_variant.values()]

    def records_by_family(self, appearance_metric: str, geometry_metric: str
                          ) -> dict[str, list[VariantRecord]]:
        out: dict[str, list[VariantRecord]] = {}
        for vid, vs in self.by_variant.items():
            out.setdefault(self.family_of[vid], []).append(
                vs.record(appearance_metric, geometry_metric))
        return out

    def metric_means(self, metric_id: str) -> dict[str, float]:
        return {vid: vs.mean(metric_id) for vid, vs in self.by_variant.items()}


def score_benchmark(
    config: BenchmarkConfig,
    metrics: tuple[str, ...],
    cache: PairScoreCache | NullCache,
    engine_version: str,
    workers: int = 1,
) -> BenchmarkScores:
    """Score every variant in the benchmark with the requested metrics."""
    by_variant: dict[str, VariantScores] = {}
    family_of: dict[str, str] = {}
    total_seconds = 0.0
    for coll in config.collections:
        for variant in coll.synthetic_variants:
            vs = score_variant(config, variant.variant_id, metrics, cache,
                               engine_version, workers=workers)
            by_variant[variant.variant_id] = vs
            family_of[variant.variant_id] = coll.real_dataset
            total_seconds += vs.metric_seconds
    return BenchmarkScores(by_variant=by_variant, family_of=family_of,
                           metric_seconds=total_seconds)


def with_pool_size(config: BenchmarkConfig, k: int) -> BenchmarkConfig:
    """Copy of the config with pool_size_k=k on every retrieval collection."""
    colls = [replace(c, pool_size_k=k) if c.pairing_mode == "retrieval" else c
             for c in config.collections]
    return replace(config, collections=colls)
