"""Benchmark config loading and normalization.

Format: one YAML document. Paths are resolved relative to the config file's
directory. Schema (see ``examples/benchmark.yaml`` in the repo for a canonical
instance)::

    benchmark_id: desk-demo
    collections:
      - real_dataset: famA
        real_dir: images/famA/real          # directory of <image_id>.png
        pairing_mode: aligned               # aligned | retrieval
        pool_size_k: 10                     # retrieval: candidate pool size (>= 1)
        max_queries: 1000                   # query budget per variant (>= 1)
        rng_seed: 17                        # pool sampling seed
        aligned_map: maps/famA.csv          # required iff aligned
        embedding_index: feats/famA.index   # optional, cosine metric
        embedding_blob: feats/famA.blob
        correspondence_dir: corr/famA       # optional, geometry metric
        external_scores: []                 # optional pair-score ndjson files
        synthetic_variants:
          - variant_id: famA_v0
            synth_dir: images/famA/v0
            downstream_score: 0.87          # optional; needed for calibration
"""

from __future__ import annotations

import os
from typing import Any

import yaml

from ..errors import ConfigError
from .types import BenchmarkConfig, CollectionConfig, VariantConfig

_PAIRING_MODES = ("aligned", "retrieval")


def _require(mapping: dict, key: str, ctx: str, path: str) -> Any:
    if key not in mapping:
        raise ConfigError(f"missing required field in {ctx}", path=path, field=key)
    return mapping[key]


def _check_dir(base_dir: str, rel: str, ctx: str, path: str) -> None:
    full = os.path.join(base_dir, rel)
    if not os.path.isdir(full):
        raise ConfigError(f"{ctx}: directory does not exist: {full}", path=path)


def load_benchmark_config(path: str, *, check_paths: bool = True) -> BenchmarkConfig:
    """Load and fully validate a benchmark config.

    Raises ConfigError with the offending field when the file is malformed,
    a referenced image directory is missing, an aligned collection lacks its
    pair map, a variant list is empty, or retrieval pool size / query budget
    are below 1.
    """
    try:
        with open(path, "r", encoding="utf-8") as fh:
            raw = yaml.safe_load(fh)
    except FileNotFoundError:
        raise ConfigError("config file not found", path=path) from None
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        where = f" at line {mark.line + 1}" if mark is not None else ""
        raise ConfigError(f"YAML parse error{where}: {exc}", path=path) from None

    if not isinstance(raw, dict):
        raise ConfigError("top level must be a mapping", path=path)

    base_dir = os.path.dirname(os.path.abspath(path))
    benchmark_id = str(_require(raw, "benchmark_id", "config", path))
    raw_colls = _require(raw, "collections", "config", path)
    if not isinstance(raw_colls, list) or not raw_colls:
        raise ConfigError("collections must be a non-empty list", path=path,
                          field="collections")

    collections: list[CollectionConfig] = []
    seen_variants: set[str] = set()
    for i, rc in enumerate(raw_colls):
        ctx = f"collections[{i}]"
        if not isinstance(rc, dict):
            raise ConfigError(f"{ctx} must be a mapping", path=path)
        real_dataset = str(_require(rc, "real_dataset", ctx, path))
        real_dir = str(_require(rc, "real_dir", ctx, path))
        mode = str(_require(rc, "pairing_mode", ctx, path))
        if mode not in _PAIRING_MODES:
            raise ConfigError(f"{ctx}: pairing_mode must be one of {_PAIRING_MODES}",
                              path=path, field="pairing_mode")

        raw_variants = _require(rc, "synthetic_variants", ctx, path)
        if not isinstance(raw_variants, list) or not raw_variants:
            raise ConfigError(f"{ctx}: synthetic_variants must be a non-empty list",
                              path=path, field="synthetic_variants")
        variants = []
        for j, rv in enumerate(raw_variants):
            vctx = f"{ctx}.synthetic_variants[{j}]"
            vid = str(_require(rv, "variant_id", vctx, path))
            if vid in seen_variants:
                raise ConfigError(f"duplicate variant_id {vid!r}", path=path)
            seen_variants.add(vid)
            score = rv.get("downstream_score")
            vmap = rv.get("aligned_map")
            variants.append(VariantConfig(
                variant_id=vid,
                synth_dir=str(_require(rv, "synth_dir", vctx, path)),
                downstream_score=None if score is None else float(score),
                aligned_map=None if vmap is None else str(vmap),
            ))

        pool_size_k = int(rc.get("pool_size_k", 10))
        max_queries = int(rc.get("max_queries", 1000))
        if mode == "retrieval" and pool_size_k < 1:
            raise ConfigError(f"{ctx}: retrieval needs pool_size_k >= 1",
                              path=path, field="pool_size_k")
        if max_queries < 1:
            raise ConfigError(f"{ctx}: max_queries must be >= 1",
                              path=path, field="max_queries")

        aligned_map = rc.get("aligned_map")
        if mode == "aligned" and not aligned_map \
                and not all(v.aligned_map for v in variants):
            raise ConfigError(
                f"{ctx}: aligned mode requires aligned_map (collection-level "
                "or on every variant)", path=path, field="aligned_map")

        coll = CollectionConfig(
            real_dataset=real_dataset,
            real_dir=real_dir,
            pairing_mode=mode,
            synthetic_variants=variants,
            pool_size_k=pool_size_k,
            max_queries=max_queries,
            rng_seed=int(rc.get("rng_seed", 0)),
            aligned_map=None if aligned_map is None else str(aligned_map),
            embedding_index=rc.get("embedding_index"),
            embedding_blob=rc.get("embedding_blob"),
            correspondence_dir=rc.get("correspondence_dir"),
            external_scores=[str(p) for p in rc.get("external_scores", [])],
        )
        if check_paths:
            _check_dir(base_dir, coll.real_dir, f"{ctx}.real_dir", path)
            for v in coll.synthetic_variants:
                _check_dir(base_dir, v.synth_dir, f"{ctx} variant {v.variant_id}", path)
        collections.append(coll)

    return BenchmarkConfig(benchmark_id=benchmark_id, collections=collections,
                           base_dir=base_dir)


def config_to_dict(config: BenchmarkConfig) -> dict:
    """Normalized plain-dict form; loading then re-serializing is idempotent."""
    out: dict[str, Any] = {"benchmark_id": config.benchmark_id, "collections": []}
    for c in config.collections:
        entry: dict[str, Any] = {
            "real_dataset": c.real_dataset,
            "real_dir": c.real_dir,
            "pairing_mode": c.pairing_mode,
            "pool_size_k": c.pool_size_k,
            "max_queries": c.max_queries,
            "rng_seed": c.rng_seed,
            "synthetic_variants": [
                {
                    "variant_id": v.variant_id,
                    "synth_dir": v.synth_dir,
                    **({"downstream_score": v.downstream_score}
                       if v.downstream_score is not None else {}),
                    **({"aligned_map": v.aligned_map}
                       if v.aligned_map is not None else {}),
                }
                for v in c.synthetic_variants
            ],
        }
        for key in ("aligned_map", "embedding_index", "embedding_blob",
                    "correspondence_dir"):
            val = getattr(c, key)
            if val is not None:
                entry[key] = val
        if c.external_scores:
            entry["external_scores"] = list(c.external_scores)
        out["collections"].append(entry)
    return out


def dump_benchmark_config(config: BenchmarkConfig, path: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        yaml.safe_dump(config_to_dict(config), fh, sort_keys=False)
