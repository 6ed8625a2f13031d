"""Domain types shared by every stage of the engine."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from ..errors import ValidationError

COSINE_TOL = 1e-6


@dataclass(frozen=True)
class ImageRef:
    """One image inside a benchmark. (dataset_id, image_id) is unique."""

    dataset_id: str
    image_id: str
    path: str
    domain: str  # "real" | "synthetic"

    def __post_init__(self):
        if self.domain not in ("real", "synthetic"):
            raise ValidationError(f"domain must be real|synthetic, got {self.domain!r}")


@dataclass(frozen=True)
class PairScore:
    """One (real image, synthetic image, metric) measurement.

    ``value`` keeps metric-native units: cosine in [-1, 1], PSNR in dB, SSIM
    in [-1, 1], inlier counts as non-negative integers.
    """

    real_id: str
    synth_id: str
    metric_id: str
    value: float
    engine_version: str

    def validate(self) -> "PairScore":
        if not math.isfinite(self.value):
            raise ValidationError(
                f"non-finite score for ({self.real_id}, {self.synth_id}, {self.metric_id})"
            )
        if self.metric_id == "inliers":
            if self.value < 0 or self.value != int(self.value):
                raise ValidationError(
                    f"inlier count must be a non-negative integer, got {self.value}"
                )
        if self.metric_id == "cosine" and abs(self.value) > 1.0 + COSINE_TOL:
            raise ValidationError(f"cosine out of [-1,1]: {self.value}")
        return self


@dataclass
class VariantRecord:
    """Dataset-level aggregate for one synthetic variant.

    mean_appearance is the plain mean of per-query appearance scores;
    mean_geometry_log is log(1 + mean inlier count) (natural log).
    downstream_score is present iff the variant participates in calibration.
    """

    variant_id: str
    mean_appearance: float
    mean_geometry_log: float
    n_pairs: int
    downstream_score: float | None = None

    def __post_init__(self):
        if self.n_pairs < 1:
            raise ValidationError(f"{self.variant_id}: n_pairs must be >= 1")
        if self.mean_geometry_log < 0:
            raise ValidationError(f"{self.variant_id}: mean_geometry_log must be >= 0")


@dataclass(frozen=True)
class NormalizationStats:
    """z-score centering/scaling for the appearance and geometry axes."""

    mu_A: float
    sigma_A: float
    mu_G: float
    sigma_G: float

    def __post_init__(self):
        if not (self.sigma_A > 0 and self.sigma_G > 0):
            raise ValidationError(
                f"degenerate normalization: sigma_A={self.sigma_A}, sigma_G={self.sigma_G}"
            )


@dataclass(frozen=True)
class Correspondences:
    """Tentative point matches between one real/synthetic image pair.

    ``matches`` is an ordered (n, 4) tuple-of-rows view: (x1, y1, x2, y2) in
    pixel coordinates of the (real, synthetic) images. May be empty.
    """

    matches: tuple[tuple[float, float, float, float], ...]
    source: str = "external_manifest"  # "external_manifest" | "mutual_nn"

    def __post_init__(self):
        if self.source not in ("external_manifest", "mutual_nn"):
            raise ValidationError(f"bad correspondence source {self.source!r}")
        for row in self.matches:
            if not all(math.isfinite(v) for v in row):
                raise ValidationError("non-finite correspondence coordinate")

    def __len__(self) -> int:
        return len(self.matches)


@dataclass(frozen=True)
class GeometryScore:
    """RANSAC verification outcome for one image pair."""

    inlier_count: int
    n_tentative: int
    model_found: bool

    def __post_init__(self):
        if self.inlier_count < 0 or self.n_tentative < 0:
            raise ValidationError("negative counts in GeometryScore")
        if self.inlier_count > self.n_tentative:
            raise ValidationError("inlier_count exceeds n_tentative")
        if not self.model_found and self.inlier_count != 0:
            raise ValidationError("no model implies zero inliers")


@dataclass
class FusionModel:
    """A fitted (or hand-set) fusion: equation id + parameter vector.

    For the bilinear family the Pearson objective is invariant to a positive
    rescaling of the whole parameter vector, so fitted params are identifiable
    only up to positive scale; they are stored exactly as fitted (rescaling
    could leave the bound box).
    """

    equation_id: str
    params: tuple[float, ...]
    bounds: tuple[tuple[float, float], ...]
    input_transform: str = "raw_z"
    fitted_corr: float | None = None
    transform_stats: dict[str, float] | None = None  # minmax_unit fit ranges

    def __post_init__(self):
        if len(self.params) != len(self.bounds):
            raise ValidationError(
                f"{self.equation_id}: {len(self.params)} params vs {len(self.bounds)} bounds"
            )
        for p, (lo, hi) in zip(self.params, self.bounds):
            if not (lo <= p <= hi):
                raise ValidationError(
                    f"{self.equation_id}: param {p} outside [{lo}, {hi}]"
                )


@dataclass
class VariantConfig:
    """One synthetic variant inside a collection."""

    variant_id: str
    synth_dir: str
    downstream_score: float | None = None
    aligned_map: str | None = None  # per-variant map; falls back to the collection's


@dataclass
class CollectionConfig:
    """One real dataset plus its synthetic variants and pairing policy."""

    real_dataset: str
    real_dir: str
    pairing_mode: str  # "aligned" | "retrieval"
    synthetic_variants: list[VariantConfig]
    pool_size_k: int = 10
    max_queries: int = 1000
    rng_seed: int = 0
    aligned_map: str | None = None
    embedding_index: str | None = None
    embedding_blob: str | None = None
    correspondence_dir: str | None = None
    external_scores: list[str] = field(default_factory=list)

    @property
    def downstream_scores(self) -> dict[str, float]:
        return {
            v.variant_id: v.downstream_score
            for v in self.synthetic_variants
            if v.downstream_score is not None
        }


@dataclass
class BenchmarkConfig:
    """Top-level benchmark description (see datamodel.config for the format)."""

    benchmark_id: str
    collections: list[CollectionConfig]
    base_dir: str = "."

    def collection_of(self, variant_id: str) -> CollectionConfig:
        for coll in self.collections:
            for v in coll.synthetic_variants:
                if v.variant_id == variant_id:
                    return coll
        raise ValidationError(f"unknown variant {variant_id!r}")

    def variant_ids(self) -> list[str]:
        return [v.variant_id for c in self.collections for v in c.synthetic_variants]
