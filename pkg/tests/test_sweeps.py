"""Pool-size and component sweeps against the shared tiny benchmark."""

import json
import os

import numpy as np
import pytest

from sadge import ENGINE_VERSION, calibrate, pipeline
from sadge.datamodel.cache import PairScoreCache
from sadge.datamodel.config import load_benchmark_config
from sadge.errors import ValidationError


def test_ksweep_single_entry(tiny_bench, tmp_path):
    root, config_path = tiny_bench
    config = load_benchmark_config(config_path)
    cache = PairScoreCache(str(tmp_path / "c.ndjson"), ENGINE_VERSION)
    out = calibrate.k_sensitivity_sweep(config, [1], "cosine", "inliers",
                                        "constrained_polynomial", cache,
                                        ENGINE_VERSION, n_starts=30, seed=0)
    assert list(out) == [1]
    assert -1.0 <= out[1] <= 1.0


def test_ksweep_requires_sorted_ks(tiny_bench, tmp_path):
    root, config_path = tiny_bench
    config = load_benchmark_config(config_path)
    cache = PairScoreCache(str(tmp_path / "c.ndjson"), ENGINE_VERSION)
    with pytest.raises(ValidationError, match="sorted"):
        calibrate.k_sensitivity_sweep(config, [3, 1], "cosine", "inliers",
                                      "constrained_polynomial", cache,
                                      ENGINE_VERSION, n_starts=10, seed=0)


def test_component_sweep_1x1_equals_direct_fit(tiny_bench, tmp_path):
    root, config_path = tiny_bench
    config = load_benchmark_config(config_path)
    cache = PairScoreCache(str(tmp_path / "c.ndjson"), ENGINE_VERSION)
    sweep = calibrate.component_sweep(config, ["cosine"], ["inliers"],
                                      "constrained_polynomial", cache,
                                      ENGINE_VERSION, n_starts=50, seed=0)
    assert sweep.matrix.shape == (1, 1)
    scores = pipeline.score_benchmark(config, ("cosine", "inliers"), cache,
                                      ENGINE_VERSION)
    direct = calibrate.fit_split(scores.records("cosine", "inliers"),
                                 "constrained_polynomial", n_starts=50, seed=0)
    assert sweep.matrix[0, 0] == pytest.approx(direct.report.pearson_r, abs=1e-12)
    assert sweep.best_pair() == ("inliers", "cosine")


def test_component_sweep_unavailable_cell_continues(tiny_bench, tmp_path):
    root, config_path = tiny_bench
    config = load_benchmark_config(config_path)
    cache = PairScoreCache(str(tmp_path / "c.ndjson"), ENGINE_VERSION)
    sweep = calibrate.component_sweep(config, ["cosine", "lpips_ext"], ["inliers"],
                                      "constrained_polynomial", cache,
                                      ENGINE_VERSION, n_starts=30, seed=0)
    ai = sweep.appearance_metrics.index("lpips_ext")
    assert np.isnan(sweep.matrix[0, ai])
    assert not np.isnan(sweep.matrix[0, sweep.appearance_metrics.index("cosine")])
    assert any("lpips_ext" in note for note in sweep.notes)


def test_component_sweep_planted_decoy(tiny_bench, tmp_path):
    """An externally ingested decoy geometry metric (pure noise) must lose to
    the informative native one."""
    root, config_path = tiny_bench
    config = load_benchmark_config(config_path)

    # build a decoy pair-score table: every (real, synth) pair gets noise
    rng = np.random.default_rng(0)
    decoy_path = os.path.join(root, "decoy_scores.ndjson")
    from sadge.pairing import build_pairing_plan

    with open(decoy_path, "w") as fh:
        for coll in config.collections:
            for variant in coll.synthetic_variants:
                plan = build_pairing_plan(config, variant.variant_id)
                for rid, cands in plan.queries:
                    for sid in cands:
                        fh.write(json.dumps({
                            "real_id": rid, "synth_id": sid,
                            "metric_id": "geo_decoy",
                            "value": float(rng.uniform(0, 400)),
                            "engine_version": "external",
                        }) + "\n")
    for coll in config.collections:
        coll.external_scores = ["decoy_scores.ndjson"]

    cache = PairScoreCache(str(tmp_path / "c.ndjson"), ENGINE_VERSION)
    sweep = calibrate.component_sweep(config, ["cosine"], ["inliers", "geo_decoy"],
                                      "constrained_polynomial", cache,
                                      ENGINE_VERSION, n_starts=60, seed=0)
    assert sweep.matrix.shape == (2, 1)
    gi, _ = sweep.best_cell
    assert sweep.geometry_metrics[gi] == "inliers"
    assert sweep.matrix[0, 0] > sweep.matrix[1, 0]


def test_ksweep_requires_retrieval_collections():
    from sadge.datamodel.types import (
        BenchmarkConfig,
        CollectionConfig,
        VariantConfig,
    )

    coll = CollectionConfig(real_dataset="f", real_dir=".", pairing_mode="aligned",
                            synthetic_variants=[VariantConfig("v", ".")])
    config = BenchmarkConfig("t", [coll])
    with pytest.raises(ValidationError, match="retrieval"):
        calibrate.k_sensitivity_sweep(config, [1, 3], "cosine", "inliers",
                                      "constrained_polynomial", None, "v")
