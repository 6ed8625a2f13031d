"""SADGE: training-free utility scoring for synthetic image datasets.

Scores a synthetic dataset against a real target by combining appearance
similarity (embedding cosine / PSNR / SSIM) with geometric consistency
(RANSAC-verified correspondence inliers), aggregating both to dataset level,
z-scoring, and fusing them with a calibrated constrained bilinear model.
"""

from .datamodel.types import FusionModel, NormalizationStats, VariantRecord

__version__ = "0.1.0"

# Cache compatibility key: bump the +m suffix whenever any metric constant
# changes (SSIM window/constants, RANSAC threshold/confidence/iterations,
# PSNR cap, descriptor normalization, ...). Stale cache entries then become
# invisible instead of silently wrong.
ENGINE_VERSION = "sadge-0.1.0+m1"

# Shipped default calibration of the bilinear fusion and its normalization
# stats (fit on the full 15-variant reference benchmark).
RELEASED_COEFFICIENTS: tuple[float, float, float] = (0.0, 1.8548, 1.3399)
RELEASED_NORMALIZATION = NormalizationStats(
    mu_A=0.6359, sigma_A=0.1918, mu_G=7.9420, sigma_G=1.7384,
)


def released_model() -> FusionModel:
    """The shipped constrained bilinear fusion model."""
    return FusionModel(
        equation_id="constrained_polynomial",
        params=RELEASED_COEFFICIENTS,
        bounds=((0.0, 2.0),) * 3,
        input_transform="raw_z",
        fitted_corr=None,
    )


def score_record(record: VariantRecord,
                 stats: NormalizationStats = RELEASED_NORMALIZATION,
                 coefficients: tuple[float, float, float] = RELEASED_COEFFICIENTS,
                 ) -> float:
    """Fused score of one variant record under a given calibration."""
    from .aggregate import apply_normalization
    from .fusion import sadge_score

    a_hat, g_hat = apply_normalization(record, stats)
    a, b, c = coefficients
    return float(sadge_score(g_hat, a_hat, a, b, c))


__all__ = [
    "ENGINE_VERSION",
    "RELEASED_COEFFICIENTS",
    "RELEASED_NORMALIZATION",
    "__version__",
    "released_model",
    "score_record",
]
