"""Scalar fusion of the normalized geometry/appearance scores.

The primary score is the constrained bilinear form

    score = a*G + b*A + c*G*A,   a, b, c >= 0

over z-scored inputs, which is monotone in each input on the non-negative
quadrant and rewards pairs that are good on both axes at once. Around it sits
a zoo of sixteen low-capacity parametric fusions sharing one interface, used
by the fusion ablation. Each equation declares its arity, parameter bounds,
and input transform:

* ``raw_z``       - z-scores used as-is;
* ``softplus_z``  - z-scores through ln(1+e^x), making them positive;
* ``minmax_unit`` - calibration-set scores rescaled linearly into [eps, 1]
  (eps = 1e-3) so ratio forms are total; held-out inputs are clipped into
  the same interval.

Ratio forms define 0/0 as 0; any other denominator below 1e-12 with a nonzero
numerator is an error rather than a silent infinity.
"""

from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .datamodel.types import FusionModel
from .errors import DegenerateStatsError, MetricError, ValidationError

MINMAX_EPS = 1e-3
_DENOM_FLOOR = 1e-12
_GM_P_ZERO = 1e-9  # |p| below this -> geometric-mean limit


@dataclass(frozen=True)
class FusionEquation:
    equation_id: str
    arity: int
    bounds: tuple[tuple[float, float], ...]
    input_transform: str
    param_names: tuple[str, ...]

    def __post_init__(self):
        if len(self.bounds) != self.arity or len(self.param_names) != self.arity:
            raise ValidationError(f"{self.equation_id}: arity mismatch")
        for lo, hi in self.bounds:
            if not (math.isfinite(lo) and math.isfinite(hi) and lo < hi):
                raise ValidationError(f"{self.equation_id}: bad bounds ({lo}, {hi})")


def softplus(x):
    return np.logaddexp(0.0, x)


def _sigmoid(x):
    x = np.asarray(x, dtype=np.float64)
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def _ratio(num, den, g, a):
    """Ratio with the documented 0/0 = 0 rule and underflow guard."""
    num, den, g, a = np.broadcast_arrays(
        np.asarray(num, dtype=np.float64), np.asarray(den, dtype=np.float64),
        np.asarray(g, dtype=np.float64), np.asarray(a, dtype=np.float64),
    )
    both_zero = (g == 0.0) & (a == 0.0)
    bad = (np.abs(den) < _DENOM_FLOOR) & ~both_zero & (num != 0.0)
    if np.any(bad):
        raise MetricError("fusion denominator underflow with nonzero numerator")
    out = np.zeros(num.shape)
    np.divide(num, den, out=out, where=(~both_zero) & (np.abs(den) >= _DENOM_FLOOR))
    return out


def _bilinear(p, g, a):
    return p[0] * g + p[1] * a + p[2] * g * a


def _convex_blend(p, g, a):
    return p[0] * g + (1.0 - p[0]) * a


def _weighted_harmonic(p, g, a):
    # 1/(w/g + (1-w)/a), written as one ratio so the 0/0 rule applies cleanly
    w = p[0]
    g = np.asarray(g, dtype=np.float64)
    a = np.asarray(a, dtype=np.float64)
    return _ratio(g * a, w * a + (1.0 - w) * g, g, a)


def _generalized_mean(p, g, a):
    w, power = p
    g = np.asarray(g, dtype=np.float64)
    a = np.asarray(a, dtype=np.float64)
    if abs(power) < _GM_P_ZERO:
        return np.power(g, w) * np.power(a, 1.0 - w)
    return np.power(w * np.power(g, power) + (1.0 - w) * np.power(a, power), 1.0 / power)


def _fbeta(p, g, a):
    beta_sq = p[0] * p[0]
    return _ratio((1.0 + beta_sq) * np.multiply(g, a), beta_sq * np.asarray(g) + np.asarray(a), g, a)


def _tversky(p, g, a):
    alpha, beta = p
    g = np.asarray(g, dtype=np.float64)
    a = np.asarray(a, dtype=np.float64)
    den = g * a + alpha * g * (1.0 - a) + beta * a * (1.0 - g)
    return _ratio(g * a, den, g, a)


def _synergistic_gating(p, g, a):
    tau = p[0]
    return np.asarray(a) * _sigmoid(np.asarray(g) / tau) + np.asarray(g) * _sigmoid(np.asarray(a) / tau)


def _tanh_blend(p, g, a):
    return p[0] * np.tanh(g) + (1.0 - p[0]) * np.tanh(a)


def _atan_blend(p, g, a):
    return p[0] * np.arctan(g) + (1.0 - p[0]) * np.arctan(a)


def _logsumexp_blend(p, g, a):
    w, tau = p
    return tau * np.logaddexp(w * np.asarray(g) / tau, (1.0 - w) * np.asarray(a) / tau)


def _gated_blend(p, g, a):
    tau = p[0]
    return np.asarray(a) + _sigmoid(np.asarray(a) / tau) * np.asarray(g)


_W01 = ((0.0, 1.0),)
_TAU = ((1e-3, 8.0),)  # open-(0, 8] lower end represented by a small floor

_FORMS: dict[str, Callable] = {
    "constrained_polynomial": _bilinear,
    "interaction_polynomial": _bilinear,
    "sadge_linear": _convex_blend,
    "weighted_harmonic": _weighted_harmonic,
    "generalized_mean": _generalized_mean,
    "fbeta_score": _fbeta,
    "tversky_index": _tversky,
    "eccv_synergistic_gating": _synergistic_gating,
    "generalized_mean_softplus": _generalized_mean,
    "fbeta_softplus": _fbeta,
    "tversky_softplus": _tversky,
    "softplus_linear": _convex_blend,
    "robust_saturating_sum": _tanh_blend,
    "atan_blend": _atan_blend,
    "logsumexp_blend": _logsumexp_blend,
    "gated_blend": _gated_blend,
}

EQUATIONS: dict[str, FusionEquation] = {
    eq.equation_id: eq
    for eq in (
        FusionEquation("constrained_polynomial", 3, ((0.0, 2.0),) * 3, "raw_z",
                       ("a", "b", "c")),
        FusionEquation("interaction_polynomial", 3, ((-2.0, 2.0),) * 3, "raw_z",
                       ("alpha", "beta", "gamma")),
        FusionEquation("sadge_linear", 1, _W01, "raw_z", ("w",)),
        FusionEquation("weighted_harmonic", 1, _W01, "minmax_unit", ("w",)),
        FusionEquation("generalized_mean", 2, (_W01[0], (-2.0, 2.0)), "minmax_unit",
                       ("w", "p")),
        FusionEquation("fbeta_score", 1, ((1e-4, 4.0),), "minmax_unit", ("beta",)),
        FusionEquation("tversky_index", 2, ((0.0, 2.0),) * 2, "minmax_unit",
                       ("alpha", "beta")),
        FusionEquation("eccv_synergistic_gating", 1, _TAU, "raw_z", ("tau",)),
        FusionEquation("generalized_mean_softplus", 2, (_W01[0], (-2.0, 2.0)),
                       "softplus_z", ("w", "p")),
        FusionEquation("fbeta_softplus", 1, ((1e-4, 4.0),), "softplus_z", ("beta",)),
        FusionEquation("tversky_softplus", 2, ((0.0, 2.0),) * 2, "softplus_z",
                       ("alpha", "beta")),
        FusionEquation("softplus_linear", 1, _W01, "softplus_z", ("w",)),
        FusionEquation("robust_saturating_sum", 1, _W01, "raw_z", ("w",)),
        FusionEquation("atan_blend", 1, _W01, "raw_z", ("w",)),
        FusionEquation("logsumexp_blend", 2, (_W01[0], (0.05, 8.0)), "raw_z",
                       ("w", "tau")),
        FusionEquation("gated_blend", 1, _TAU, "raw_z", ("tau",)),
    )
}


def get_equation(equation_id: str) -> FusionEquation:
    try:
        return EQUATIONS[equation_id]
    except KeyError:
        raise ValidationError(f"unknown fusion equation {equation_id!r}") from None


def sadge_score(g_hat, a_hat, a: float, b: float, c: float,
                constrained: bool = True):
    """The primary fused score: a*G + b*A + c*G*A.

    Under the constrained form every coefficient must be non-negative.
    """
    if constrained and (a < 0 or b < 0 or c < 0):
        raise ValidationError(
            f"constrained fusion requires a,b,c >= 0, got ({a}, {b}, {c})"
        )
    g = np.asarray(g_hat, dtype=np.float64)
    ah = np.asarray(a_hat, dtype=np.float64)
    out = a * g + b * ah + c * g * ah
    return float(out) if out.ndim == 0 else out


def fit_minmax_stats(g_values, a_values) -> dict[str, float]:
    """Per-axis ranges of the calibration set, for the minmax_unit transform."""
    g = np.asarray(g_values, dtype=np.float64)
    a = np.asarray(a_values, dtype=np.float64)
    stats = {
        "g_lo": float(g.min()), "g_hi": float(g.max()),
        "a_lo": float(a.min()), "a_hi": float(a.max()),
    }
    if stats["g_lo"] == stats["g_hi"] or stats["a_lo"] == stats["a_hi"]:
        raise DegenerateStatsError("minmax transform needs spread on both axes")
    return stats


def _minmax_apply(x, lo: float, hi: float):
    unit = MINMAX_EPS + (1.0 - MINMAX_EPS) * (np.asarray(x, dtype=np.float64) - lo) / (hi - lo)
    return np.clip(unit, MINMAX_EPS, 1.0)


def apply_input_transform(eq: FusionEquation, g_hat, a_hat,
                          transform_stats: dict[str, float] | None = None):
    if eq.input_transform == "raw_z":
        return np.asarray(g_hat, dtype=np.float64), np.asarray(a_hat, dtype=np.float64)
    if eq.input_transform == "softplus_z":
        return softplus(np.asarray(g_hat, dtype=np.float64)), \
            softplus(np.asarray(a_hat, dtype=np.float64))
    if eq.input_transform == "minmax_unit":
        if transform_stats is None:
            raise ValidationError(
                f"{eq.equation_id} needs minmax transform stats (fit ranges)"
            )
        return (_minmax_apply(g_hat, transform_stats["g_lo"], transform_stats["g_hi"]),
                _minmax_apply(a_hat, transform_stats["a_lo"], transform_stats["a_hi"]))
    raise ValidationError(f"unknown input transform {eq.input_transform!r}")


def evaluate_fusion(equation, params, g_hat, a_hat,
                    transform_stats: dict[str, float] | None = None,
                    check_bounds: bool = True):
    """Evaluate one fusion equation; scalar in, scalar out (arrays broadcast)."""
    eq = equation if isinstance(equation, FusionEquation) else get_equation(equation)
    params = tuple(float(p) for p in params)
    if len(params) != eq.arity:
        raise ValidationError(
            f"{eq.equation_id} expects {eq.arity} params, got {len(params)}"
        )
    if check_bounds:
        for p, (lo, hi), name in zip(params, eq.bounds, eq.param_names):
            if not (lo - 1e-9 <= p <= hi + 1e-9):
                raise ValidationError(
                    f"{eq.equation_id}: {name}={p} outside [{lo}, {hi}]"
                )
    g, a = apply_input_transform(eq, g_hat, a_hat, transform_stats)
    out = np.asarray(_FORMS[eq.equation_id](params, g, a), dtype=np.float64)
    if not np.all(np.isfinite(out)):
        raise MetricError(f"{eq.equation_id}: non-finite fusion value")
    return float(out) if out.ndim == 0 else out


def score_with_model(model: FusionModel, g_hat, a_hat):
    return evaluate_fusion(model.equation_id, model.params, g_hat, a_hat,
                           transform_stats=model.transform_stats)


def save_fusion_model(path: str, model: FusionModel) -> None:
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    rec = {
        "equation_id": model.equation_id,
        "params": list(model.params),
        "bounds": [list(b) for b in model.bounds],
        "input_transform": model.input_transform,
        "fitted_corr": model.fitted_corr,
    }
    if model.transform_stats is not None:
        rec["transform_stats"] = model.transform_stats
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(json.dumps(rec) + "\n")


def load_fusion_model_from_dict(rec: dict) -> FusionModel:
    return FusionModel(
        equation_id=rec["equation_id"],
        params=tuple(float(p) for p in rec["params"]),
        bounds=tuple((float(lo), float(hi)) for lo, hi in rec["bounds"]),
        input_transform=rec.get("input_transform", "raw_z"),
        fitted_corr=rec.get("fitted_corr"),
        transform_stats=rec.get("transform_stats"),
    )


def load_fusion_model(path: str) -> FusionModel:
    with open(path, "r", encoding="utf-8") as fh:
        return load_fusion_model_from_dict(json.loads(fh.readline()))
