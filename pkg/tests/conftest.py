import os
import sys

import pytest

sys.path.insert(0, os.path.dirname(__file__))


@pytest.fixture(scope="session")
def tiny_bench(tmp_path_factory):
    """Small 3-family benchmark shared by pipeline/CLI/sweep tests."""
    from sadge.synthbench import (
        BenchmarkSpec,
        FamilySpec,
        VariantLevels,
        generate_collection,
    )

    root = tmp_path_factory.mktemp("tiny_bench")
    spec = BenchmarkSpec(
        benchmark_id="tiny",
        seed=21,
        families=[
            FamilySpec(name="al", pairing_mode="aligned", n_scenes=6,
                       variants=[VariantLevels("al_v0", 0.05, 0.05),
                                 VariantLevels("al_v1", 0.7, 0.1),
                                 VariantLevels("al_v2", 0.1, 0.55)]),
            FamilySpec(name="re", pairing_mode="retrieval", n_scenes=6,
                       pool_size_k=3, max_queries=6,
                       variants=[VariantLevels("re_v0", 0.2, 0.2),
                                 VariantLevels("re_v1", 0.8, 0.5),
                                 VariantLevels("re_v2", 0.5, 0.6)]),
            FamilySpec(name="rx", pairing_mode="retrieval", n_scenes=6,
                       pool_size_k=3, max_queries=6,
                       variants=[VariantLevels("rx_v0", 0.6, 0.15),
                                 VariantLevels("rx_v1", 0.15, 0.6),
                                 VariantLevels("rx_v2", 0.9, 0.6)]),
        ],
    )
    config_path = generate_collection(str(root), spec)
    return str(root), config_path
