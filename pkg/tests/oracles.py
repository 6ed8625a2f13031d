"""Independent reference implementations the tests check the engine against.

Everything here is deliberately written from first principles (raw-sum
formulas, O(n^2) searches, camera-model projections) or delegated to an
unrelated library (skimage), so a bug in the engine cannot hide in its own
oracle.
"""

from __future__ import annotations

import math

import numpy as np
from scipy import stats as sstats


def pearson_rawsum(x, y) -> float:
    """Textbook raw-sum Pearson formula, summed with fsum for exactness."""
    x = [float(v) for v in x]
    y = [float(v) for v in y]
    n = len(x)
    sx = math.fsum(x)
    sy = math.fsum(y)
    sxx = math.fsum(v * v for v in x)
    syy = math.fsum(v * v for v in y)
    sxy = math.fsum(a * b for a, b in zip(x, y))
    num = n * sxy - sx * sy
    den = math.sqrt(n * sxx - sx * sx) * math.sqrt(n * syy - sy * sy)
    return num / den


def spearman_rank_then_pearson(x, y) -> float:
    """Mid-rank transform (scipy) followed by the raw-sum Pearson oracle."""
    rx = sstats.rankdata(x, method="average")
    ry = sstats.rankdata(y, method="average")
    return pearson_rawsum(rx, ry)


def spearman_p_t_reference(rho: float, n: int) -> float:
    t = rho * math.sqrt((n - 2) / (1.0 - rho * rho))
    return 2.0 * float(sstats.t.sf(abs(t), n - 2))


def brute_force_mutual_nn(desc_a, desc_b) -> list[tuple[int, int]]:
    """O(n^2) reciprocal nearest neighbor under cosine similarity."""
    def unit(v):
        v = np.asarray(v, dtype=np.float64)
        return v / np.linalg.norm(v)

    va = [unit(d[1]) for d in desc_a]
    vb = [unit(d[1]) for d in desc_b]
    out = []
    for i, ai in enumerate(va):
        best_j, best_s = 0, -np.inf
        for j, bj in enumerate(vb):
            s = float(ai @ bj)
            if s > best_s:
                best_j, best_s = j, s
        back_i, back_s = 0, -np.inf
        for i2, ai2 in enumerate(va):
            s = float(ai2 @ vb[best_j])
            if s > back_s:
                back_i, back_s = i2, s
        if back_i == i:
            out.append((i, best_j))
    return out


def planted_two_view(seed: int, n_points: int = 100, noise_px: float = 0.0,
                     n_outliers: int = 0):
    """Project a random 3-D cloud through two calibrated cameras.

    Returns (x1, x2, F_true, n_true_inliers). Correspondences are exact up to
    the requested pixel noise; outliers are uniform over the image.
    """
    rng = np.random.default_rng(seed)
    k = np.array([[400.0, 0.0, 320.0], [0.0, 400.0, 240.0], [0.0, 0.0, 1.0]])
    angle = rng.uniform(0.08, 0.25)
    axis_mix = rng.uniform(0.0, 0.3)
    rot = np.array([
        [math.cos(angle), axis_mix * math.sin(angle) * 0.2, math.sin(angle)],
        [0.0, 1.0, 0.0],
        [-math.sin(angle), 0.0, math.cos(angle)],
    ])
    # orthonormalize the slightly-mixed rotation
    u, _, vt = np.linalg.svd(rot)
    rot = u @ vt
    t = np.array([rng.uniform(0.4, 0.8), rng.uniform(-0.15, 0.15),
                  rng.uniform(-0.1, 0.1)])

    pts = rng.uniform([-2.0, -1.5, 4.0], [2.0, 1.5, 9.0], size=(n_points, 3))

    def project(p, r, tv):
        cam = (r @ p.T).T + tv
        uv = (k @ cam.T).T
        return uv[:, :2] / uv[:, 2:3]

    x1 = project(pts, np.eye(3), np.zeros(3))
    x2 = project(pts, rot, t)
    if noise_px > 0:
        x2 = x2 + rng.normal(0.0, noise_px, x2.shape)
    if n_outliers > 0:
        idx = rng.choice(n_points, n_outliers, replace=False)
        x2[idx] = rng.uniform([0.0, 0.0], [640.0, 480.0], (n_outliers, 2))
    tx = np.array([[0.0, -t[2], t[1]], [t[2], 0.0, -t[0]], [-t[1], t[0], 0.0]])
    f_true = np.linalg.inv(k).T @ (tx @ rot) @ np.linalg.inv(k)
    return x1, x2, f_true, n_points - n_outliers


def sampson_distance(f, x1, x2) -> np.ndarray:
    h1 = np.hstack([x1, np.ones((len(x1), 1))])
    h2 = np.hstack([x2, np.ones((len(x2), 1))])
    fx1 = h1 @ f.T
    ftx2 = h2 @ f
    err = np.einsum("ni,ni->n", h2, fx1)
    denom = fx1[:, 0] ** 2 + fx1[:, 1] ** 2 + ftx2[:, 0] ** 2 + ftx2[:, 1] ** 2
    return np.abs(err) / np.sqrt(denom)


# Independent closed forms of the fusion zoo (kept deliberately separate from
# the package implementations; minmax/softplus transforms re-derived here).
def _sp(x):
    return np.log1p(np.exp(-np.abs(x))) + np.maximum(x, 0.0)


def _sig(x):
    return 1.0 / (1.0 + np.exp(-np.asarray(x, dtype=np.float64)))


def _mm(x, lo, hi, eps=1e-3):
    return np.clip(eps + (1 - eps) * (np.asarray(x, float) - lo) / (hi - lo), eps, 1.0)


def fusion_reference(eq_id: str, params, g, a, ranges=None):
    g = np.asarray(g, dtype=np.float64)
    a = np.asarray(a, dtype=np.float64)
    if eq_id.endswith("_softplus") or eq_id == "softplus_linear":
        gt, at_ = _sp(g), _sp(a)
    elif eq_id in ("weighted_harmonic", "generalized_mean", "fbeta_score",
                   "tversky_index"):
        g_lo, g_hi, a_lo, a_hi = ranges
        gt, at_ = _mm(g, g_lo, g_hi), _mm(a, a_lo, a_hi)
    else:
        gt, at_ = g, a

    if eq_id in ("constrained_polynomial", "interaction_polynomial"):
        p0, p1, p2 = params
        return p0 * gt + p1 * at_ + p2 * gt * at_
    if eq_id == "sadge_linear" or eq_id == "softplus_linear":
        w = params[0]
        return w * gt + (1 - w) * at_
    if eq_id == "weighted_harmonic":
        w = params[0]
        return 1.0 / (w / gt + (1 - w) / at_)
    if eq_id in ("generalized_mean", "generalized_mean_softplus"):
        w, p = params
        if abs(p) < 1e-9:
            return gt ** w * at_ ** (1 - w)
        return (w * gt ** p + (1 - w) * at_ ** p) ** (1.0 / p)
    if eq_id in ("fbeta_score", "fbeta_softplus"):
        b2 = params[0] ** 2
        return (1 + b2) * gt * at_ / (b2 * gt + at_)
    if eq_id in ("tversky_index", "tversky_softplus"):
        al, be = params
        return gt * at_ / (gt * at_ + al * gt * (1 - at_) + be * at_ * (1 - gt))
    if eq_id == "eccv_synergistic_gating":
        tau = params[0]
        return at_ * _sig(gt / tau) + gt * _sig(at_ / tau)
    if eq_id == "robust_saturating_sum":
        w = params[0]
        return w * np.tanh(gt) + (1 - w) * np.tanh(at_)
    if eq_id == "atan_blend":
        w = params[0]
        return w * np.arctan(gt) + (1 - w) * np.arctan(at_)
    if eq_id == "logsumexp_blend":
        w, tau = params
        return tau * np.logaddexp(w * gt / tau, (1 - w) * at_ / tau)
    if eq_id == "gated_blend":
        tau = params[0]
        return at_ + _sig(at_ / tau) * gt
    raise ValueError(eq_id)
