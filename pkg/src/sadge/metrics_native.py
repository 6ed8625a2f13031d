"""Similarity primitives computed without pretrained models.

Appearance side: PSNR and SSIM on 8-bit rasters, cosine similarity between
embedding vectors. Geometry side: mutual nearest-neighbor matching in
descriptor space and robust two-view verification (RANSAC over fundamental
matrices, normalized 8-point estimation, Sampson-distance inlier test).

Everything here is a pure function of its inputs plus an explicit seed, so
pair scoring parallelizes freely.
"""

from __future__ import annotations

import math
from typing import Sequence

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .datamodel.types import Correspondences, GeometryScore
from .errors import MetricError

PSNR_CAP_DB = 100.0  # MSE=0 would be +inf; a finite cap keeps aggregation defined

SSIM_WINDOW = 11
SSIM_SIGMA = 1.5
SSIM_K1 = 0.01
SSIM_K2 = 0.03
SSIM_L = 255.0

RANSAC_THRESHOLD_PX = 3.0
RANSAC_CONFIDENCE = 0.99
RANSAC_MAX_ITERS = 1000
_RANSAC_BATCH = 64
_MIN_MATCHES = 8


def _as_gray(img, name: str) -> np.ndarray:
    arr = np.asarray(img, dtype=np.float64)
    if arr.ndim != 2:
        raise MetricError(f"{name}: expected a 2-D (H, W) raster, got shape {arr.shape}")
    return arr


def _check_same_shape(a: np.ndarray, b: np.ndarray) -> None:
    if a.shape != b.shape:
        raise MetricError(f"dimension mismatch: {a.shape} vs {b.shape}")


def psnr(img_a, img_b) -> float:
    """Peak signal-to-noise ratio in dB over an 8-bit range.

    10*log10(255^2 / MSE); identical images return the 100 dB cap.
    """
    a = _as_gray(img_a, "img_a")
    b = _as_gray(img_b, "img_b")
    _check_same_shape(a, b)
    mse = float(np.mean((a - b) ** 2))
    if mse == 0.0:
        return PSNR_CAP_DB
    return 10.0 * math.log10(SSIM_L * SSIM_L / mse)


def _gaussian_kernel(size: int = SSIM_WINDOW, sigma: float = SSIM_SIGMA) -> np.ndarray:
    half = size // 2
    x = np.arange(-half, half + 1, dtype=np.float64)
    k = np.exp(-0.5 * (x / sigma) ** 2)
    return k / k.sum()


def _filter_valid(img: np.ndarray, kernel: np.ndarray) -> np.ndarray:
    # separable windowed mean, valid region only (no padding enters the result)
    out = sliding_window_view(img, len(kernel), axis=0) @ kernel
    out = sliding_window_view(out, len(kernel), axis=1) @ kernel
    return out


def ssim(img_a, img_b) -> float:
    """Mean structural similarity over an 11x11 Gaussian window (sigma 1.5).

    Standard constants K1=0.01, K2=0.03, L=255; population (uncorrected)
    window statistics; the mean is taken over the valid window positions.
    """
    a = _as_gray(img_a, "img_a")
    b = _as_gray(img_b, "img_b")
    _check_same_shape(a, b)
    if min(a.shape) < SSIM_WINDOW:
        raise MetricError(
            f"image {a.shape} smaller than the {SSIM_WINDOW}x{SSIM_WINDOW} SSIM window"
        )
    kernel = _gaussian_kernel()
    mu_a = _filter_valid(a, kernel)
    mu_b = _filter_valid(b, kernel)
    e_aa = _filter_valid(a * a, kernel)
    e_bb = _filter_valid(b * b, kernel)
    e_ab = _filter_valid(a * b, kernel)
    var_a = e_aa - mu_a * mu_a
    var_b = e_bb - mu_b * mu_b
    cov = e_ab - mu_a * mu_b
    c1 = (SSIM_K1 * SSIM_L) ** 2
    c2 = (SSIM_K2 * SSIM_L) ** 2
    num = (2.0 * mu_a * mu_b + c1) * (2.0 * cov + c2)
    den = (mu_a * mu_a + mu_b * mu_b + c1) * (var_a + var_b + c2)
    return float(np.mean(num / den))


def cosine_similarity(emb_a, emb_b) -> float:
    """Cosine similarity of two nonzero vectors of equal dimension."""
    a = np.asarray(emb_a, dtype=np.float64).ravel()
    b = np.asarray(emb_b, dtype=np.float64).ravel()
    if a.shape != b.shape:
        raise MetricError(f"dimension mismatch: {a.shape} vs {b.shape}")
    na = float(np.linalg.norm(a))
    nb = float(np.linalg.norm(b))
    if na == 0.0 or nb == 0.0:
        raise MetricError("cosine similarity undefined for a zero-norm vector")
    return float(np.dot(a, b) / (na * nb))


def _split_keypoints(descs: Sequence, name: str) -> tuple[np.ndarray, np.ndarray]:
    if len(descs) == 0:
        return np.zeros((0, 2)), np.zeros((0, 0))
    xy = np.asarray([d[0] for d in descs], dtype=np.float64)
    vecs = np.asarray([d[1] for d in descs], dtype=np.float64)
    if xy.ndim != 2 or xy.shape[1] != 2:
        raise MetricError(f"{name}: keypoints must be (x, y) pairs")
    if vecs.ndim != 2:
        raise MetricError(f"{name}: descriptors must be equal-length vectors")
    norms = np.linalg.norm(vecs, axis=1)
    if np.any(norms == 0.0):
        bad = int(np.argmax(norms == 0.0))
        raise MetricError(f"{name}: zero-norm descriptor at index {bad}")
    return xy, vecs / norms[:, None]


def mutual_nn_matches(desc_a: Sequence, desc_b: Sequence) -> Correspondences:
    """Reciprocal nearest-neighbor matches in descriptor space.

    Inputs are sequences of ((x, y), descriptor). A pair (i, j) matches iff j
    is i's nearest neighbor under cosine distance in b AND i is j's nearest
    neighbor in a. Ties break to the lowest index; empty inputs give an empty
    correspondence set.
    """
    xy_a, va = _split_keypoints(desc_a, "desc_a")
    xy_b, vb = _split_keypoints(desc_b, "desc_b")
    if len(va) == 0 or len(vb) == 0:
        return Correspondences(matches=(), source="mutual_nn")
    if va.shape[1] != vb.shape[1]:
        raise MetricError(
            f"descriptor dimension mismatch: {va.shape[1]} vs {vb.shape[1]}"
        )
    sim = va @ vb.T
    nn_ab = np.argmax(sim, axis=1)  # first max -> lowest index on ties
    nn_ba = np.argmax(sim, axis=0)
    rows = []
    for i, j in enumerate(nn_ab):
        if nn_ba[j] == i:
            rows.append((float(xy_a[i, 0]), float(xy_a[i, 1]),
                         float(xy_b[j, 0]), float(xy_b[j, 1])))
    return Correspondences(matches=tuple(rows), source="mutual_nn")


def _normalize_points_batch(pts: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Hartley normalization per batch item: centroid to origin, mean norm sqrt(2)."""
    centroid = pts.mean(axis=1, keepdims=True)
    centered = pts - centroid
    mean_dist = np.sqrt((centered ** 2).sum(axis=2)).mean(axis=1)
    ok = mean_dist > 1e-12
    scale = np.where(ok, math.sqrt(2.0) / np.where(ok, mean_dist, 1.0), 0.0)
    batch = pts.shape[0]
    T = np.zeros((batch, 3, 3))
    T[:, 0, 0] = scale
    T[:, 1, 1] = scale
    T[:, 0, 2] = -scale * centroid[:, 0, 0]
    T[:, 1, 2] = -scale * centroid[:, 0, 1]
    T[:, 2, 2] = 1.0
    return centered * scale[:, None, None], T, ok


def _eight_point_batch(p1: np.ndarray, p2: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Normalized 8-point fundamental matrices for a batch of minimal samples.

    p1, p2: (B, 8, 2). Returns (B, 3, 3) matrices satisfying x2^T F x1 ~ 0 and
    a validity mask (degenerate samples are masked out).
    """
    n1, t1, ok1 = _normalize_points_batch(p1)
    n2, t2, ok2 = _normalize_points_batch(p2)
    valid = ok1 & ok2
    batch, m, _ = p1.shape
    a = np.empty((batch, m, 9))
    x1, y1 = n1[..., 0], n1[..., 1]
    x2, y2 = n2[..., 0], n2[..., 1]
    a[..., 0] = x2 * x1
    a[..., 1] = x2 * y1
    a[..., 2] = x2
    a[..., 3] = y2 * x1
    a[..., 4] = y2 * y1
    a[..., 5] = y2
    a[..., 6] = x1
    a[..., 7] = y1
    a[..., 8] = 1.0
    try:
        _, _, vt = np.linalg.svd(a)
    except np.linalg.LinAlgError:
        return np.zeros((batch, 3, 3)), np.zeros(batch, dtype=bool)
    f_norm = vt[:, -1, :].reshape(batch, 3, 3)
    # rank-2 enforcement
    u, s, vt2 = np.linalg.svd(f_norm)
    s = s.copy()
    s[:, 2] = 0.0
    f_rank2 = u @ (s[:, :, None] * vt2)
    f = np.transpose(t2, (0, 2, 1)) @ f_rank2 @ t1
    return f, valid


def _sampson_sq_batch(f: np.ndarray, x1h: np.ndarray, x2h: np.ndarray) -> np.ndarray:
    """Squared Sampson distance of every point under every model: (B, n)."""
    fx1 = np.einsum("bij,nj->bni", f, x1h)
    ftx2 = np.einsum("bji,nj->bni", f, x2h)
    err = np.einsum("ni,bni->bn", x2h, fx1)
    denom = fx1[..., 0] ** 2 + fx1[..., 1] ** 2 + ftx2[..., 0] ** 2 + ftx2[..., 1] ** 2
    out = np.full(err.shape, np.inf)
    nz = denom > 1e-300
    out[nz] = (err[nz] ** 2) / denom[nz]
    out[(~nz) & (err == 0.0)] = 0.0
    return out


def _adaptive_iters(inlier_ratio: float, confidence: float, sample_size: int) -> float:
    miss = 1.0 - inlier_ratio ** sample_size
    if miss <= 0.0:
        return 0.0
    if miss >= 1.0:
        return math.inf
    return math.log(1.0 - confidence) / math.log(miss)


def ransac_inlier_count(
    correspondences: Correspondences,
    threshold_px: float = RANSAC_THRESHOLD_PX,
    confidence: float = RANSAC_CONFIDENCE,
    max_iters: int = RANSAC_MAX_ITERS,
    seed: int = 0,
) -> GeometryScore:
    """Count correspondences consistent with a robustly fitted two-view model.

    RANSAC over fundamental matrices (normalized 8-point on minimal samples),
    a match is an inlier when its Sampson distance is at or below
    ``threshold_px``. The iteration budget adapts to the best inlier ratio
    found so far and is capped at ``max_iters``; minimal samples are drawn in
    fixed-size batches so the adaptive stop applies at batch granularity.
    Fewer than 8 matches, or no estimable model, yields
    ``inlier_count=0, model_found=False``. Bit-reproducible for a fixed seed.
    """
    n = len(correspondences)
    if n < _MIN_MATCHES:
        return GeometryScore(inlier_count=0, n_tentative=n, model_found=False)

    pts = np.asarray(correspondences.matches, dtype=np.float64)
    p1 = pts[:, 0:2]
    p2 = pts[:, 2:4]
    ones = np.ones((n, 1))
    x1h = np.hstack([p1, ones])
    x2h = np.hstack([p2, ones])
    thr_sq = float(threshold_px) ** 2

    rng = np.random.Generator(np.random.PCG64(seed))
    best_count = 0
    model_found = False
    iters_done = 0
    target = float(max_iters)

    while iters_done < min(target, max_iters):
        batch = int(min(_RANSAC_BATCH, max_iters - iters_done))
        samples = np.stack([rng.choice(n, _MIN_MATCHES, replace=False)
                            for _ in range(batch)])
        f, valid = _eight_point_batch(p1[samples], p2[samples])
        if np.any(valid):
            d_sq = _sampson_sq_batch(f[valid], x1h, x2h)
            counts = (d_sq <= thr_sq).sum(axis=1)
            top = int(counts.max())
            model_found = True
            if top > best_count:
                best_count = top
                target = _adaptive_iters(best_count / n, confidence, _MIN_MATCHES)
        iters_done += batch

    if not model_found:
        return GeometryScore(inlier_count=0, n_tentative=n, model_found=False)
    return GeometryScore(inlier_count=best_count, n_tentative=n, model_found=True)
