"""Real-synthetic pair planning.

Two pairing modes:

* aligned: every real image has one predefined synthetic counterpart
  (pair map: text table ``real_id,synth_id``, header required);
* retrieval: every real image gets a pool of k synthetic candidates sampled
  uniformly without replacement, and the best match per metric is kept.

Candidate pools are drawn from a generator keyed by
(collection seed, variant_id, real_id), so a plan never depends on query
order or on unrelated config edits; pools for smaller k are prefixes of the
pool for larger k, which lets the pair-score cache absorb pool-size sweeps.
"""

from __future__ import annotations

import logging
import os
from dataclasses import dataclass
from typing import Callable, Sequence

from .datamodel.types import BenchmarkConfig
from .errors import MetricError, PairingError
from .seeding import rng_for

log = logging.getLogger(__name__)

_IMAGE_EXTS = (".png", ".jpg", ".jpeg", ".bmp", ".tif", ".tiff")


@dataclass(frozen=True)
class PairingPlan:
    mode: str  # "aligned" | "retrieval"
    variant_id: str
    queries: tuple[tuple[str, tuple[str, ...]], ...]  # (real_id, candidates)
    pool_size_k: int
    rng_seed: int

    def __post_init__(self):
        for real_id, cands in self.queries:
            if len(set(cands)) != len(cands):
                raise PairingError(f"duplicate candidates for query {real_id!r}")
            if self.mode == "aligned" and len(cands) != 1:
                raise PairingError(f"aligned query {real_id!r} must have 1 candidate")

    def n_pairs(self) -> int:
        return sum(len(c) for _, c in self.queries)


def list_image_ids(directory: str) -> list[str]:
    """Sorted image ids (file stems) found in a directory."""
    if not os.path.isdir(directory):
        raise PairingError(f"image directory not found: {directory}")
    ids = [os.path.splitext(name)[0] for name in os.listdir(directory)
           if name.lower().endswith(_IMAGE_EXTS)]
    return sorted(ids)


def load_aligned_map(path: str) -> dict[str, str]:
    """Read the aligned pair map (``real_id,synth_id`` with header)."""
    if not os.path.isfile(path):
        raise PairingError(f"aligned map not found: {path}")
    mapping: dict[str, str] = {}
    with open(path, "r", encoding="utf-8") as fh:
        header = fh.readline().strip()
        if [c.strip() for c in header.split(",")] != ["real_id", "synth_id"]:
            raise PairingError(f"{path}: expected header 'real_id,synth_id'")
        for lineno, line in enumerate(fh, start=2):
            line = line.strip()
            if not line:
                continue
            parts = [p.strip() for p in line.split(",")]
            if len(parts) != 2:
                raise PairingError(f"{path}:{lineno}: expected 2 fields")
            mapping[parts[0]] = parts[1]
    return mapping


def subsample_queries(real_ids: Sequence[str], max_queries: int) -> list[str]:
    """Deterministic evenly spaced selection over the sorted id list."""
    ordered = sorted(real_ids)
    n = len(ordered)
    if n <= max_queries:
        return ordered
    return [ordered[(i * n) // max_queries] for i in range(max_queries)]


def build_pairing_plan(
    config: BenchmarkConfig,
    variant_id: str,
    real_ids: Sequence[str] | None = None,
    synth_ids: Sequence[str] | None = None,
) -> PairingPlan:
    """Deterministic pairing plan for one variant.

    Queries are capped at the collection's max_queries by evenly spaced
    subsampling of the sorted real ids. Retrieval pools have
    min(k, |S|) candidates (k is clamped with a warning when it exceeds the
    synthetic set); an aligned real image without a counterpart is an error
    naming the real_id.
    """
    coll = config.collection_of(variant_id)
    if real_ids is None:
        real_ids = list_image_ids(os.path.join(config.base_dir, coll.real_dir))
    if not real_ids:
        raise PairingError(f"{coll.real_dataset}: no real images found")
    selected = subsample_queries(real_ids, coll.max_queries)

    if coll.pairing_mode == "aligned":
        variant = next(v for v in coll.synthetic_variants if v.variant_id == variant_id)
        map_rel = variant.aligned_map or coll.aligned_map
        if not map_rel:
            raise PairingError(f"{variant_id}: aligned mode without a pair map")
        map_path = os.path.join(config.base_dir, map_rel)
        mapping = load_aligned_map(map_path)
        queries = []
        for rid in selected:
            if rid not in mapping:
                raise PairingError(
                    f"aligned map {map_path} has no counterpart for real image {rid!r}"
                )
            queries.append((rid, (mapping[rid],)))
        return PairingPlan(mode="aligned", variant_id=variant_id,
                           queries=tuple(queries), pool_size_k=1,
                           rng_seed=coll.rng_seed)

    if synth_ids is None:
        variant = next(v for v in coll.synthetic_variants if v.variant_id == variant_id)
        synth_ids = list_image_ids(os.path.join(config.base_dir, variant.synth_dir))
    pool = sorted(synth_ids)
    if not pool:
        raise PairingError(f"{variant_id}: no synthetic images found")
    k = coll.pool_size_k
    if k > len(pool):
        log.warning("%s: pool_size_k=%d exceeds |S|=%d, clamping",
                    variant_id, k, len(pool))
        k = len(pool)
    queries = []
    for rid in selected:
        rng = rng_for(coll.rng_seed, variant_id, rid)
        perm = rng.permutation(len(pool))
        queries.append((rid, tuple(pool[i] for i in perm[:k])))
    return PairingPlan(mode="retrieval", variant_id=variant_id,
                       queries=tuple(queries), pool_size_k=k,
                       rng_seed=coll.rng_seed)


def retrieval_best(
    real_id: str,
    candidates: Sequence[str],
    metric_id: str,
    score_fn: Callable[[str, str], float],
) -> tuple[str, float]:
    """Best match and its score over a candidate pool.

    Equals the brute-force max of ``score_fn(real_id, s)`` over the pool;
    ties break to the earliest candidate in plan order. Individual scoring
    failures are tolerated, but if every candidate fails the error lists them.
    """
    if not candidates:
        raise PairingError(f"{real_id}: empty candidate pool")
    best: tuple[str, float] | None = None
    failures: list[str] = []
    for synth_id in candidates:
        try:
            value = score_fn(real_id, synth_id)
        except Exception as exc:  # noqa: BLE001 - reported in aggregate error
            failures.append(f"{synth_id}: {exc}")
            continue
        if best is None or value > best[1]:
            best = (synth_id, value)
    if best is None:
        detail = "; ".join(failures)
        raise MetricError(
            f"all {len(candidates)} candidates failed for ({real_id}, {metric_id}): {detail}"
        )
    return best
