import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import fusion_reference
from sadge.errors import ValidationError
from sadge.fusion import (
    EQUATIONS,
    MINMAX_EPS,
    apply_input_transform,
    evaluate_fusion,
    fit_minmax_stats,
    get_equation,
    load_fusion_model,
    sadge_score,
    save_fusion_model,
    softplus,
)

SPEC_ARITIES = {
    "constrained_polynomial": 3,
    "interaction_polynomial": 3,
    "sadge_linear": 1,
    "weighted_harmonic": 1,
    "generalized_mean": 2,
    "fbeta_score": 1,
    "tversky_index": 2,
    "eccv_synergistic_gating": 1,
    "generalized_mean_softplus": 2,
    "fbeta_softplus": 1,
    "tversky_softplus": 2,
    "softplus_linear": 1,
    "robust_saturating_sum": 1,
    "atan_blend": 1,
    "logsumexp_blend": 2,
    "gated_blend": 1,
}

IDENTITY_MINMAX = {"g_lo": MINMAX_EPS, "g_hi": 1.0, "a_lo": MINMAX_EPS, "a_hi": 1.0}


def test_zoo_has_sixteen_equations_with_expected_arities():
    assert len(EQUATIONS) == 16
    for eq_id, arity in SPEC_ARITIES.items():
        assert EQUATIONS[eq_id].arity == arity


# ------------------------------------------------------------- sadge_score

def test_sadge_score_origin_is_zero():
    assert sadge_score(0.0, 0.0, 1.3, 0.2, 1.9) == 0.0


def test_sadge_score_released_coefficients():
    # a=0, b=1.8548, c=1.3399 at (G,A)=(1,1) -> b + c
    value = sadge_score(1.0, 1.0, 0.0, 1.8548, 1.3399)
    assert value == pytest.approx(3.1947, abs=1e-12)


def test_sadge_score_geometry_identity():
    for g in (-2.0, 0.0, 1.5):
        for a in (-1.0, 0.5):
            assert sadge_score(g, a, 1.0, 0.0, 0.0) == g


def test_sadge_score_rejects_negative_when_constrained():
    with pytest.raises(ValidationError):
        sadge_score(1.0, 1.0, -0.1, 1.0, 1.0)
    # unconstrained mode allows it
    assert sadge_score(1.0, 1.0, -0.1, 1.0, 1.0, constrained=False) == pytest.approx(1.9)


# ------------------------------------------------------------- evaluate

def test_sadge_linear_blend_of_equal_inputs():
    for x in (-1.0, 0.0, 2.5):
        assert evaluate_fusion("sadge_linear", (0.5,), x, x) == pytest.approx(x)


def test_fbeta_equal_unit_inputs():
    value = evaluate_fusion("fbeta_score", (1.0,), 0.5, 0.5,
                            transform_stats=IDENTITY_MINMAX)
    assert value == pytest.approx(0.5, abs=1e-12)


def test_every_equation_matches_independent_reference():
    rng = np.random.default_rng(42)
    g = rng.normal(0.0, 1.2, 100)
    a = rng.normal(0.0, 1.2, 100)
    stats = fit_minmax_stats(g, a)
    ranges = (stats["g_lo"], stats["g_hi"], stats["a_lo"], stats["a_hi"])
    for eq_id, eq in EQUATIONS.items():
        p_rng = np.random.default_rng(hash(eq_id) % 2 ** 32)
        lo = np.array([b[0] for b in eq.bounds])
        hi = np.array([b[1] for b in eq.bounds])
        for _ in range(5):
            params = tuple(p_rng.uniform(lo, hi))
            mine = evaluate_fusion(eq_id, params, g, a, transform_stats=stats)
            ref = fusion_reference(eq_id, params, g, a, ranges=ranges)
            np.testing.assert_allclose(mine, ref, atol=1e-9,
                                       err_msg=f"{eq_id} {params}")


def test_constrained_polynomial_degrades_to_linear_when_c_zero():
    rng = np.random.default_rng(1)
    g, a = rng.normal(size=20), rng.normal(size=20)
    full = evaluate_fusion("constrained_polynomial", (0.7, 0.3, 0.0), g, a)
    np.testing.assert_allclose(full, 0.7 * g + 0.3 * a, atol=0)


@given(st.floats(0, 2), st.floats(0, 2), st.floats(0, 2),
       st.floats(0, 4), st.floats(0, 4), st.floats(0, 1))
@settings(max_examples=100, deadline=None)
def test_constrained_monotone_on_nonnegative_quadrant(a_c, b_c, c_c, g, av, step):
    base = evaluate_fusion("constrained_polynomial", (a_c, b_c, c_c), g, av)
    up_g = evaluate_fusion("constrained_polynomial", (a_c, b_c, c_c), g + step, av)
    up_a = evaluate_fusion("constrained_polynomial", (a_c, b_c, c_c), g, av + step)
    assert up_g >= base - 1e-12
    assert up_a >= base - 1e-12


def test_softplus_inputs_strictly_positive():
    g, a = apply_input_transform(get_equation("tversky_softplus"),
                                 np.array([-30.0, 0.0, 5.0]),
                                 np.array([-5.0, -1.0, 30.0]))
    assert np.all(g > 0) and np.all(a > 0)
    assert softplus(0.0) == pytest.approx(np.log(2))


def test_minmax_requires_stats():
    with pytest.raises(ValidationError, match="minmax"):
        evaluate_fusion("tversky_index", (1.0, 1.0), 0.1, 0.2)


def test_minmax_maps_calibration_range_to_unit():
    g = np.array([1.0, 3.0, 5.0])
    a = np.array([-2.0, 0.0, 2.0])
    stats = fit_minmax_stats(g, a)
    gt, at = apply_input_transform(get_equation("fbeta_score"), g, a, stats)
    assert gt[0] == pytest.approx(MINMAX_EPS) and gt[-1] == pytest.approx(1.0)
    assert at[0] == pytest.approx(MINMAX_EPS) and at[-1] == pytest.approx(1.0)


def test_params_out_of_bounds_rejected():
    with pytest.raises(ValidationError, match="outside"):
        evaluate_fusion("sadge_linear", (1.5,), 0.0, 0.0)
    with pytest.raises(ValidationError, match="expects"):
        evaluate_fusion("sadge_linear", (0.5, 0.5), 0.0, 0.0)


def test_model_serialization_roundtrip(tmp_path):
    from sadge.datamodel.types import FusionModel

    model = FusionModel(equation_id="tversky_index", params=(0.012, 1.201),
                        bounds=((0.0, 2.0), (0.0, 2.0)),
                        input_transform="minmax_unit", fitted_corr=0.798,
                        transform_stats={"g_lo": -1.0, "g_hi": 2.0,
                                         "a_lo": -2.0, "a_hi": 1.5})
    path = str(tmp_path / "model.json")
    save_fusion_model(path, model)
    loaded = load_fusion_model(path)
    assert loaded == model
