"""Domain types, benchmark configs, feature manifests, and the pair-score cache."""

from .cache import NullCache, PairScoreCache
from .config import config_to_dict, dump_benchmark_config, load_benchmark_config
from .images import load_image, rgb_to_luma
from .manifests import (
    EmbeddingManifest,
    correspondence_path,
    load_correspondence_set,
    load_embedding_manifest,
    write_correspondence_set,
    write_embedding_manifest,
)
from .types import (
    BenchmarkConfig,
    CollectionConfig,
    Correspondences,
    FusionModel,
    GeometryScore,
    ImageRef,
    NormalizationStats,
    PairScore,
    VariantConfig,
    VariantRecord,
)

__all__ = [
    "BenchmarkConfig",
    "CollectionConfig",
    "Correspondences",
    "EmbeddingManifest",
    "FusionModel",
    "GeometryScore",
    "ImageRef",
    "NormalizationStats",
    "NullCache",
    "PairScore",
    "PairScoreCache",
    "VariantConfig",
    "VariantRecord",
    "config_to_dict",
    "correspondence_path",
    "dump_benchmark_config",
    "load_benchmark_config",
    "load_correspondence_set",
    "load_embedding_manifest",
    "load_image",
    "rgb_to_luma",
    "write_correspondence_set",
    "write_embedding_manifest",
]
