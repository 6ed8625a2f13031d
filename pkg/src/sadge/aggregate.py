"""Pair-level to dataset-level aggregation and z-score normalization.

Per variant: the appearance score is the plain mean of per-query values, the
geometry score is the mean inlier count passed through log1p (natural log,
which tames the heavy right tail of inlier counts). Normalization stats are
population mean/std over the variant-level values of the fitting set; the
same stats are applied unchanged to held-out variants.

Variant tables travel as text so calibration can run without images:
``variant_id,mean_appearance,mean_geometry_log,downstream_score,n_pairs``.
"""

from __future__ import annotations

import math
import os
from typing import Sequence

import numpy as np

from .datamodel.types import NormalizationStats, VariantRecord
from .errors import DegenerateStatsError, ValidationError


def aggregate_variant(
    variant_id: str,
    appearance_values: Sequence[float],
    geometry_values: Sequence[float],
    downstream_score: float | None = None,
) -> VariantRecord:
    """Collapse per-query scores into one VariantRecord.

    Every query must have contributed exactly one appearance value and one
    geometry value (the aligned or retrieval-best score); geometry values are
    raw inlier counts (>= 0).
    """
    a = np.asarray(appearance_values, dtype=np.float64)
    g = np.asarray(geometry_values, dtype=np.float64)
    if a.size == 0 or g.size == 0:
        raise ValidationError(f"{variant_id}: zero queries")
    if a.size != g.size:
        raise ValidationError(
            f"{variant_id}: {a.size} appearance vs {g.size} geometry values"
        )
    for name, arr in (("appearance", a), ("geometry", g)):
        if not np.all(np.isfinite(arr)):
            bad = int(np.argmax(~np.isfinite(arr)))
            raise ValidationError(
                f"{variant_id}: non-finite {name} score at query index {bad}"
            )
    if np.any(g < 0):
        bad = int(np.argmax(g < 0))
        raise ValidationError(f"{variant_id}: negative inlier count at query {bad}")
    return VariantRecord(
        variant_id=variant_id,
        mean_appearance=float(a.mean()),
        mean_geometry_log=float(math.log1p(g.mean())),
        n_pairs=int(a.size),
        downstream_score=downstream_score,
    )


def fit_normalization(variants: Sequence[VariantRecord]) -> NormalizationStats:
    """Population mean/std of the fitting set on both axes.

    Needs >= 2 variants and nonzero variance on each axis (a degenerate fit
    is rejected rather than silently producing infinities downstream).
    """
    if len(variants) < 2:
        raise DegenerateStatsError(
            f"normalization needs >= 2 variants, got {len(variants)}"
        )
    a = np.asarray([v.mean_appearance for v in variants], dtype=np.float64)
    g = np.asarray([v.mean_geometry_log for v in variants], dtype=np.float64)
    sigma_a = float(a.std())  # population std: ddof=0, tiny-n fitting sets
    sigma_g = float(g.std())
    if sigma_a == 0.0 or sigma_g == 0.0:
        raise DegenerateStatsError(
            f"zero variance across variants (sigma_A={sigma_a}, sigma_G={sigma_g})"
        )
    return NormalizationStats(mu_A=float(a.mean()), sigma_A=sigma_a,
                              mu_G=float(g.mean()), sigma_G=sigma_g)


def apply_normalization(
    variant: VariantRecord, stats: NormalizationStats
) -> tuple[float, float]:
    """z-scores (A_hat, G_hat) of one variant under the given stats."""
    a_hat = (variant.mean_appearance - stats.mu_A) / stats.sigma_A
    g_hat = (variant.mean_geometry_log - stats.mu_G) / stats.sigma_G
    return a_hat, g_hat


VARIANT_TABLE_HEADER = "variant_id,mean_appearance,mean_geometry_log,downstream_score,n_pairs"


def write_variant_table(path: str, records: Sequence[VariantRecord]) -> None:
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(VARIANT_TABLE_HEADER + "\n")
        for r in records:
            score = "" if r.downstream_score is None else repr(r.downstream_score)
            fh.write(f"{r.variant_id},{r.mean_appearance!r},"
                     f"{r.mean_geometry_log!r},{score},{r.n_pairs}\n")


def read_variant_table(path: str) -> list[VariantRecord]:
    if not os.path.isfile(path):
        raise ValidationError(f"variant table not found: {path}")
    records = []
    with open(path, "r", encoding="utf-8") as fh:
        header = fh.readline().strip()
        if header != VARIANT_TABLE_HEADER:
            raise ValidationError(
                f"{path}: expected header {VARIANT_TABLE_HEADER!r}, got {header!r}"
            )
        for lineno, line in enumerate(fh, start=2):
            line = line.strip()
            if not line:
                continue
            parts = line.split(",")
            if len(parts) != 5:
                raise ValidationError(f"{path}:{lineno}: expected 5 fields")
            try:
                records.append(VariantRecord(
                    variant_id=parts[0],
                    mean_appearance=float(parts[1]),
                    mean_geometry_log=float(parts[2]),
                    downstream_score=float(parts[3]) if parts[3] else None,
                    n_pairs=int(parts[4]),
                ))
            except ValueError as exc:
                raise ValidationError(f"{path}:{lineno}: {exc}") from None
    return records
