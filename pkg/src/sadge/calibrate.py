"""Correlation statistics and fusion calibration.

Pearson/Spearman (mid-rank ties, t-approximation p-value, exact permutation
cross-check for small n), correlation-maximizing fusion fitting with seeded
multi-start bounded local optimization, leave-one-dataset-out splits, and the
coefficient sensitivity grid.

Fitting maximizes raw Pearson r (not |r|, not r^2); ablation reporters that
want |r| take absolute values at presentation time only. A fused predictor
with zero variance over the calibration set is treated as undefined (sentinel
penalty during optimization, NaN in grids) instead of r=0, so constant
fusions are never silently rewarded.
"""

from __future__ import annotations

import itertools
import logging
import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy import optimize
from scipy import stats as sstats

from .aggregate import aggregate_variant, apply_normalization, fit_normalization
from .datamodel.types import FusionModel, NormalizationStats, VariantRecord
from .errors import (
    DegenerateStatsError,
    FitError,
    MetricError,
    SadgeError,
    ValidationError,
)
from .fusion import FusionEquation, evaluate_fusion, fit_minmax_stats, get_equation
from .seeding import rng_for

log = logging.getLogger(__name__)

_PENALTY = -2.0  # objective sentinel: worse than any attainable correlation
_GRAD_STEP = 1e-6
_FTOL = 1e-10
_PERM_EXACT_MAX_N = 10


@dataclass(frozen=True)
class CorrelationReport:
    pearson_r: float
    spearman_rho: float
    spearman_p_approx: float | None  # only computed when n >= 4
    n: int


@dataclass
class FitResult:
    model: FusionModel
    per_start_scores: list[float]
    best_start_seed: int  # index of the winning start in the seeded draw


def pearson(x, y) -> float:
    """Sample Pearson correlation; zero variance on either side is an error."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape != y.shape or x.ndim != 1:
        raise ValidationError(f"pearson needs equal-length vectors, got {x.shape}, {y.shape}")
    if x.size < 2:
        raise ValidationError("pearson needs n >= 2")
    xc = x - x.mean()
    yc = y - y.mean()
    sx = math.sqrt(float(xc @ xc))
    sy = math.sqrt(float(yc @ yc))
    if sx == 0.0 or sy == 0.0:
        raise DegenerateStatsError("zero variance in pearson input")
    return float((xc @ yc) / (sx * sy))


def midranks(x) -> np.ndarray:
    """Ranks starting at 1; tied values share the average of their positions."""
    x = np.asarray(x, dtype=np.float64)
    order = np.argsort(x, kind="stable")
    ranks = np.empty(x.size, dtype=np.float64)
    i = 0
    while i < x.size:
        j = i
        while j + 1 < x.size and x[order[j + 1]] == x[order[i]]:
            j += 1
        ranks[order[i:j + 1]] = 0.5 * (i + j) + 1.0
        i = j + 1
    return ranks


def spearman(x, y) -> tuple[float, float | None]:
    """Spearman rho (mid-rank ties) and its two-sided t-approximation p.

    p uses t = rho*sqrt((n-2)/(1-rho^2)) against Student t with n-2 degrees
    of freedom and is only computed for n >= 4; it is clamped into (0, 1] so
    |rho| = 1 yields the smallest positive float rather than 0.
    """
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape != y.shape or x.ndim != 1:
        raise ValidationError("spearman needs equal-length vectors")
    try:
        rho = pearson(midranks(x), midranks(y))
    except DegenerateStatsError:
        raise DegenerateStatsError("all-tied vector in spearman input") from None
    n = x.size
    if n < 4:
        return rho, None
    if abs(rho) >= 1.0:
        return rho, float(np.finfo(np.float64).tiny)
    t = rho * math.sqrt((n - 2) / (1.0 - rho * rho))
    p = 2.0 * float(sstats.t.sf(abs(t), n - 2))
    p = min(max(p, float(np.finfo(np.float64).tiny)), 1.0)
    return rho, p


def spearman_p_exact(x, y) -> float:
    """Exact two-sided permutation p for |rho| (n <= 10, cross-check oracle).

    Counts permutations of y whose |rho| is at least the observed one
    (inclusive, so the observed arrangement itself keeps p > 0).
    """
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    n = x.size
    if n > _PERM_EXACT_MAX_N:
        raise ValidationError(f"exact permutation p supports n <= {_PERM_EXACT_MAX_N}")
    rx = midranks(x)
    ry = midranks(y)
    rho_obs = abs(pearson(rx, ry))
    rxc = rx - rx.mean()
    ryc = ry - ry.mean()
    denom = math.sqrt(float(rxc @ rxc)) * math.sqrt(float(ryc @ ryc))
    if denom == 0.0:
        raise DegenerateStatsError("all-tied vector in permutation test")

    count = 0
    total = 0
    chunk: list[tuple[int, ...]] = []
    chunk_size = 200_000

    def flush(chunk_perms: list[tuple[int, ...]]) -> int:
        perm_matrix = ryc[np.asarray(chunk_perms, dtype=np.intp)]
        rhos = np.abs(perm_matrix @ rxc) / denom
        return int(np.sum(rhos >= rho_obs - 1e-12))

    for perm in itertools.permutations(range(n)):
        chunk.append(perm)
        if len(chunk) == chunk_size:
            count += flush(chunk)
            total += len(chunk)
            chunk = []
    if chunk:
        count += flush(chunk)
        total += len(chunk)
    return count / total


def correlation_report(scores, y) -> CorrelationReport:
    scores = np.asarray(scores, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    rho, p = spearman(scores, y)
    return CorrelationReport(pearson_r=pearson(scores, y), spearman_rho=rho,
                             spearman_p_approx=p, n=int(scores.size))


def _bounded_central_diff(f, x: np.ndarray, lo: np.ndarray, hi: np.ndarray,
                          h: float = _GRAD_STEP) -> np.ndarray:
    """Central differences, degrading to one-sided at an active bound."""
    grad = np.zeros_like(x)
    for i in range(x.size):
        hp = min(h, hi[i] - x[i])
        hm = min(h, x[i] - lo[i])
        if hp + hm <= 0.0:
            grad[i] = 0.0
            continue
        xp = x.copy()
        xp[i] += hp
        xm = x.copy()
        xm[i] -= hm
        grad[i] = (f(xp) - f(xm)) / (hp + hm)
    return grad


def _design_arrays(variants) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    arr = np.asarray(variants, dtype=np.float64)
    if arr.ndim != 2 or arr.shape[1] != 3:
        raise ValidationError("variants must be (G_hat, A_hat, y) triples")
    return arr[:, 0], arr[:, 1], arr[:, 2]


def fit_fusion(equation, variants, n_starts: int = 300, seed: int = 0) -> FitResult:
    """Fit one fusion equation by maximizing Pearson r against y.

    ``variants`` holds (G_hat, A_hat, y) triples. Each of ``n_starts`` seeded
    uniform draws inside the bound box seeds a bounded L-BFGS-B run
    (central-difference gradients, step 1e-6, objective tolerance 1e-10); the
    best start wins, ties to the lowest start index. Deterministic for a
    fixed seed.
    """
    eq = equation if isinstance(equation, FusionEquation) else get_equation(equation)
    g_hat, a_hat, y = _design_arrays(variants)
    if g_hat.size < 3:
        raise ValidationError("fit_fusion needs >= 3 variants")
    if float(np.std(y)) == 0.0:
        raise DegenerateStatsError("constant downstream scores")

    tstats = None
    if eq.input_transform == "minmax_unit":
        tstats = fit_minmax_stats(g_hat, a_hat)

    lo = np.array([b[0] for b in eq.bounds])
    hi = np.array([b[1] for b in eq.bounds])

    def neg_r(params: np.ndarray) -> float:
        try:
            fused = evaluate_fusion(eq, params, g_hat, a_hat,
                                    transform_stats=tstats, check_bounds=False)
        except MetricError:
            return -_PENALTY
        fused = np.asarray(fused, dtype=np.float64)
        if not np.all(np.isfinite(fused)) or float(np.std(fused)) < 1e-15:
            return -_PENALTY
        return -pearson(fused, y)

    # the draw stream depends only on (seed, equation): start lists for
    # smaller n_starts are prefixes of larger ones, so more starts can
    # never do worse
    rng = rng_for(seed, "fit_fusion", eq.equation_id)
    starts = rng.uniform(lo, hi, size=(n_starts, eq.arity))

    per_start_scores: list[float] = []
    best_idx = -1
    best_score = -np.inf
    best_params: np.ndarray | None = None
    failures: list[str] = []
    for idx in range(n_starts):
        try:
            res = optimize.minimize(
                neg_r, starts[idx], method="L-BFGS-B",
                jac=lambda p: _bounded_central_diff(neg_r, p, lo, hi),
                bounds=list(zip(lo, hi)),
                options={"ftol": _FTOL, "gtol": 1e-9, "maxiter": 500},
            )
            params = np.clip(res.x, lo, hi)
            score = -neg_r(params)
        except Exception as exc:  # noqa: BLE001 - diagnostics aggregated below
            failures.append(f"start {idx}: {exc}")
            per_start_scores.append(_PENALTY)
            continue
        per_start_scores.append(float(score))
        if score > best_score:
            best_score = float(score)
            best_idx = idx
            best_params = params
    if best_params is None or best_score <= _PENALTY:
        raise FitError(
            f"{eq.equation_id}: no start produced a usable fit "
            f"({len(failures)} hard failures; first: {failures[:1]})"
        )
    model = FusionModel(
        equation_id=eq.equation_id,
        params=tuple(float(p) for p in best_params),
        bounds=eq.bounds,
        input_transform=eq.input_transform,
        fitted_corr=best_score,
        transform_stats=tstats,
    )
    return FitResult(model=model, per_start_scores=per_start_scores,
                     best_start_seed=best_idx)


def design_from_records(records: list[VariantRecord],
                        stats: NormalizationStats) -> list[tuple[float, float, float]]:
    """(G_hat, A_hat, y) triples for the calibration subset of the records."""
    triples = []
    for rec in records:
        if rec.downstream_score is None:
            continue
        a_hat, g_hat = apply_normalization(rec, stats)
        triples.append((g_hat, a_hat, rec.downstream_score))
    return triples


def design_per_family(records_by_family: dict[str, list[VariantRecord]]
                      ) -> list[tuple[float, float, float]]:
    """Per-family normalization variant of the calibration design.

    Each family's stats are fit over its own variants and applied only
    there; the z-scored triples are then pooled. Ill-posed for families with
    fewer than two calibration variants or zero spread on an axis (those
    raise, per the normalization contract), which is why the default
    protocol normalizes globally.
    """
    triples = []
    for family in sorted(records_by_family):
        scored = [r for r in records_by_family[family]
                  if r.downstream_score is not None]
        try:
            stats = fit_normalization(scored)
        except DegenerateStatsError as exc:
            raise DegenerateStatsError(
                f"family {family!r}: {exc} (per-family normalization needs "
                "spread inside every family; use the global scope otherwise)"
            ) from None
        triples.extend(design_from_records(scored, stats))
    return triples


@dataclass
class LodoSplit:
    excluded: str | None
    report: CorrelationReport
    model: FusionModel
    stats: NormalizationStats
    variant_ids: list[str] = field(default_factory=list)


def fit_split(records: list[VariantRecord], equation, *, n_starts: int = 300,
              seed: int = 0, stats: NormalizationStats | None = None) -> LodoSplit:
    """Refit normalization (unless given) and fusion on one record set."""
    scored = [r for r in records if r.downstream_score is not None]
    if len(scored) < 3:
        raise ValidationError(f"need >= 3 calibration variants, got {len(scored)}")
    if stats is None:
        stats = fit_normalization(scored)
    triples = design_from_records(scored, stats)
    fit = fit_fusion(equation, triples, n_starts=n_starts, seed=seed)
    fused = [evaluate_fusion(fit.model.equation_id, fit.model.params, g, a,
                             transform_stats=fit.model.transform_stats)
             for g, a, _ in triples]
    y = [t[2] for t in triples]
    return LodoSplit(excluded=None, report=correlation_report(fused, y),
                     model=fit.model, stats=stats,
                     variant_ids=[r.variant_id for r in scored])


def leave_one_out(records_by_family: dict[str, list[VariantRecord]], equation, *,
                  n_starts: int = 300, seed: int = 0,
                  reuse_stats: bool = False) -> dict[str, LodoSplit]:
    """Refit with one dataset family excluded, once per family.

    Per split the normalization stats and the fusion are refit on the
    remaining variants and the correlation is reported on that retained set
    (``reuse_stats=True`` keeps the full-benchmark normalization instead).
    A split whose remaining set has fewer than 3 calibration variants is
    skipped with a warning.
    """
    families = sorted(records_by_family)
    if len(families) < 3:
        raise ValidationError(f"leave-one-out needs >= 3 dataset families, got {len(families)}")
    all_scored = [r for fam in families for r in records_by_family[fam]
                  if r.downstream_score is not None]
    full_stats = fit_normalization(all_scored)

    out: dict[str, LodoSplit] = {}
    for excluded in families:
        remaining = [r for fam in families if fam != excluded
                     for r in records_by_family[fam]
                     if r.downstream_score is not None]
        if len(remaining) < 3:
            log.warning("leave-one-out: excluding %s leaves %d variants, skipping",
                        excluded, len(remaining))
            continue
        split = fit_split(remaining, equation, n_starts=n_starts, seed=seed,
                          stats=full_stats if reuse_stats else None)
        out[excluded] = replace(split, excluded=excluded)
    return out


_PAIR_TO_FIXED = {("a", "b"): "c", ("a", "c"): "b", ("b", "c"): "a"}
_PARAM_INDEX = {"a": 0, "b": 1, "c": 2}


@dataclass
class SensitivityGrid:
    pair: tuple[str, str]
    fixed_name: str
    fixed_value: float
    x_values: np.ndarray  # first pair member
    y_values: np.ndarray  # second pair member
    matrix: np.ndarray    # shape (len(x_values), len(y_values)); NaN = undefined
    max_value: float
    max_cell: tuple[int, int]


def sensitivity_grid(variants, pair: tuple[str, str], fixed_value: float,
                     grid_shape: tuple[int, int] = (50, 50),
                     equation: str = "constrained_polynomial",
                     bounds: tuple[tuple[float, float], tuple[float, float]] | None = None,
                     ) -> SensitivityGrid:
    """Pearson-correlation slice over one coefficient pair of the bilinear fusion.

    The remaining coefficient is held at ``fixed_value`` (its fitted value in
    the standard protocol). Cells whose fused predictor is degenerate carry
    NaN. Returns the dense matrix plus the location/value of the grid max.
    """
    if pair not in _PAIR_TO_FIXED:
        raise ValidationError(f"pair must be one of {sorted(_PAIR_TO_FIXED)}, got {pair}")
    if grid_shape[0] < 2 or grid_shape[1] < 2:
        raise ValidationError("grid must be at least 2x2")
    eq = get_equation(equation)
    g_hat, a_hat, y = _design_arrays(variants)
    fixed_name = _PAIR_TO_FIXED[pair]
    if bounds is None:
        bounds = (eq.bounds[_PARAM_INDEX[pair[0]]], eq.bounds[_PARAM_INDEX[pair[1]]])
    xs = np.linspace(bounds[0][0], bounds[0][1], grid_shape[0])
    ys = np.linspace(bounds[1][0], bounds[1][1], grid_shape[1])

    matrix = np.full(grid_shape, np.nan)
    params = np.empty(3)
    params[_PARAM_INDEX[fixed_name]] = fixed_value
    for i, xv in enumerate(xs):
        for j, yv in enumerate(ys):
            params[_PARAM_INDEX[pair[0]]] = xv
            params[_PARAM_INDEX[pair[1]]] = yv
            fused = evaluate_fusion(eq, params, g_hat, a_hat, check_bounds=False)
            fused = np.asarray(fused)
            if float(np.std(fused)) < 1e-15:
                continue  # degenerate predictor: stays NaN
            matrix[i, j] = pearson(fused, y)
    if np.all(np.isnan(matrix)):
        raise DegenerateStatsError("every grid cell is degenerate")
    flat_best = int(np.nanargmax(matrix))
    max_cell = (flat_best // grid_shape[1], flat_best % grid_shape[1])
    return SensitivityGrid(pair=pair, fixed_name=fixed_name, fixed_value=fixed_value,
                           x_values=xs, y_values=ys, matrix=matrix,
                           max_value=float(np.nanmax(matrix)), max_cell=max_cell)


@dataclass
class ComponentSweep:
    appearance_metrics: list[str]
    geometry_metrics: list[str]
    matrix: np.ndarray              # (len(geometry), len(appearance)); NaN = unavailable
    best_cell: tuple[int, int] | None
    notes: list[str] = field(default_factory=list)

    def best_pair(self) -> tuple[str, str] | None:
        if self.best_cell is None:
            return None
        gi, ai = self.best_cell
        return self.geometry_metrics[gi], self.appearance_metrics[ai]


def k_sensitivity_sweep(config, ks: list[int], appearance_metric: str,
                        geometry_metric: str, equation, cache, engine_version: str,
                        *, n_starts: int = 300, seed: int = 0,
                        workers: int = 1) -> dict[int, float]:
    """Fitted Pearson r per retrieval pool size k.

    Pairing plans are rebuilt per k with the same seeds (pools for smaller k
    are prefixes of the larger pools, so the pair cache absorbs most of the
    recompute); normalization and fusion are refit per k.
    """
    from . import pipeline

    if list(ks) != sorted(ks):
        raise ValidationError("ks must be sorted ascending")
    if not any(c.pairing_mode == "retrieval" for c in config.collections):
        raise ValidationError(
            "pool-size sweep needs at least one retrieval-mode collection"
        )
    out: dict[int, float] = {}
    for k in ks:
        k_config = pipeline.with_pool_size(config, k)
        scores = pipeline.score_benchmark(
            k_config, (appearance_metric, geometry_metric), cache, engine_version,
            workers=workers)
        records = scores.records(appearance_metric, geometry_metric)
        split = fit_split(records, equation, n_starts=n_starts, seed=seed)
        out[k] = split.report.pearson_r
    return out


def component_sweep(config, appearance_metrics: list[str], geometry_metrics: list[str],
                    equation, cache, engine_version: str, *, n_starts: int = 300,
                    seed: int = 0, workers: int = 1) -> ComponentSweep:
    """Fitted r for every geometry x appearance metric pairing.

    A cell whose pair scores cannot be computed (missing manifests, unknown
    external metric) is marked unavailable (NaN) and the sweep continues.
    """
    from . import pipeline

    all_metrics = tuple(dict.fromkeys(list(appearance_metrics) + list(geometry_metrics)))
    notes: list[str] = []
    per_metric_scores: dict[str, "pipeline.BenchmarkScores"] = {}
    available: dict[str, bool] = {}
    for metric in all_metrics:
        try:
            per_metric_scores[metric] = pipeline.score_benchmark(
                config, (metric,), cache, engine_version, workers=workers)
            available[metric] = True
        except SadgeError as exc:
            available[metric] = False
            notes.append(f"{metric}: unavailable ({exc})")

    matrix = np.full((len(geometry_metrics), len(appearance_metrics)), np.nan)
    for gi, gm in enumerate(geometry_metrics):
        for ai, am in enumerate(appearance_metrics):
            if not (available.get(gm) and available.get(am)):
                continue
            records = []
            g_scores = per_metric_scores[gm]
            a_scores = per_metric_scores[am]
            try:
                for vid, vs in a_scores.by_variant.items():
                    records.append(aggregate_variant(
                        vid, vs.values[am], g_scores.by_variant[vid].values[gm],
                        downstream_score=vs.downstream_score))
                split = fit_split(records, equation, n_starts=n_starts, seed=seed)
                matrix[gi, ai] = split.report.pearson_r
            except (MetricError, DegenerateStatsError, ValidationError, FitError) as exc:
                notes.append(f"({gm}, {am}): {exc}")
    best_cell = None
    if not np.all(np.isnan(matrix)):
        flat = int(np.nanargmax(matrix))
        best_cell = (flat // matrix.shape[1], flat % matrix.shape[1])
    return ComponentSweep(appearance_metrics=list(appearance_metrics),
                          geometry_metrics=list(geometry_metrics),
                          matrix=matrix, best_cell=best_cell, notes=notes)
