import json
import math

import numpy as np
import pytest

from l2ext import certify as ce
from l2ext import denomcore as dc
from l2ext.certify import RangeError, RModel, WeightModel
from l2ext.denomcore import DenominatorSpec

FN2 = DenominatorSpec.fn2()
ZERO = WeightModel.disk()
BUILTINS = [
    DenominatorSpec.fn1(0.5),
    FN2,
    DenominatorSpec.fn3(0.5),
    DenominatorSpec.fn4(0.5, 3),
]


# --------------------------------------------------------------------------- weights


def test_weight_models():
    assert WeightModel.bidisk(1, 1, 1).is_psh()
    assert not WeightModel.disk((0.0, -1.0)).is_psh()
    with pytest.raises(ValueError):
        WeightModel.bidisk(1, 1, 3)
    assert RModel.const(-0.3)(np.array([0.1, 0.9])).tolist() == [-0.3, -0.3]
    interp = RModel.radial_samples([0.25, 0.75], [0.0, -1.0])
    assert interp(0.5) == pytest.approx(-0.5)


# --------------------------------------------------------------------------- h-conditions and certificates


@pytest.mark.parametrize("spec", BUILTINS, ids=lambda s: s.spec_id)
@pytest.mark.parametrize("delta", [0.5, 1.0, math.sqrt(2), 2.0])
def test_builtin_certificates(spec, delta):
    cert = ce.certify_delta(spec, delta)
    assert cert.finite
    assert cert.h_conditions == (True, True, True)
    assert cert.ode_max_residual <= 1e-6
    assert cert.bound == pytest.approx(4 * (cert.K + (1 + delta) / delta), abs=1e-9)


def test_flipped_derivative_fails_second_condition():
    smp = dc.h_delta_samples(FN2, 1.0, np.linspace(1, 10, 20))
    hp = smp.hp.copy()
    hp[7] = -0.5
    bad = dc.TwistSamples(smp.delta, smp.xs, smp.G, smp.h, hp, smp.hpp)
    hc = ce.check_h_conditions(bad)
    assert tuple(hc) == (True, False, True)
    assert hc.witness[1] == 7


def test_certificate_json_fields():
    cert = ce.certify_delta(FN2, 1.0, weight=ZERO)
    blob = json.loads(json.dumps(cert.to_json()))
    assert set(blob) == {"delta", "C", "K", "witness_x", "bound", "ode_max_residual", "h_conditions", "berg"}
    assert set(blob["berg"]) == {"pass", "witness"}
    assert blob["berg"]["pass"] is True and blob["berg"]["witness"] is None
    assert blob["bound"] == pytest.approx(12.0, abs=1e-9)
    assert all(isinstance(v, bool) for v in blob["h_conditions"])


@pytest.mark.parametrize("spec", BUILTINS, ids=lambda s: s.spec_id)
def test_check_class_d_passes_builtins(spec):
    res = ce.check_class_d(spec)
    assert res.passed and res.failed_condition is None
    best, certs = res
    assert len(certs) == 4
    assert best.bound == min(c.bound for c in certs)


def test_check_class_d_decreasing():
    res = ce.check_class_d(DenominatorSpec.from_expr("2 - 1/x^2 + 1/x"))
    assert not res.passed
    assert res.failed_condition == "increasing"
    assert res.witness_x is not None


def test_check_class_d_divergent():
    res = ce.check_class_d(DenominatorSpec.from_expr("x"))
    assert not res.passed and res.failed_condition == "integrable"
    assert "diverges" in res.reason


def test_check_class_d_with_expression():
    res = ce.check_class_d(DenominatorSpec.from_expr("x^3"))
    assert res.passed
    assert res.best.C == pytest.approx(0.5, abs=1e-10)


# --------------------------------------------------------------------------- a, tau, A


def test_g_inverse_round_trip():
    xs = np.array([1.0, 2.5, 40.0, 600.0])
    for spec in BUILTINS:
        assert np.allclose(ce.g_inverse(spec, dc.eval_g(spec, xs)), xs, rtol=1e-12)


@pytest.mark.parametrize("spec", BUILTINS, ids=lambda s: s.spec_id)
def test_a_equals_alpha_without_R(spec):
    w2 = np.linspace(0.0, 1.0, 11)
    a = ce.a_function(spec, ZERO, 1.2, 0.2, w2)
    assert np.allclose(a, 1.2 - np.log(w2 + 0.04), rtol=1e-10, atol=0)


@pytest.mark.parametrize("gamma, eps", [(1.01, 1e-3), (1.0 + 1e-9, 1e-3)])
def test_a_function_range_error(gamma, eps):
    with pytest.raises(RangeError) as info:
        ce.a_function(FN2, WeightModel.disk(R=RModel.const(0.5)), gamma, eps, np.array([0.25, 1.0]))
    assert info.value.w_abs2 == 1.0


def test_a_function_direct_value():
    assert ce.a_function(FN2, ZERO, 1.5, 0.1, 0.0) == pytest.approx(1.5 - math.log(0.01), abs=1e-10)


def test_a_function_rejects_bad_parameters():
    with pytest.raises(ValueError):
        ce.a_function(FN2, ZERO, 1.0, 0.1, 0.5)


def test_tau_and_A_at_one():
    t = ce.tau_and_A(FN2, 1.0, 1.0)
    assert t.tau == pytest.approx(1.0)
    assert t.A == pytest.approx(2.0)
    assert t.A_over_g == pytest.approx(2.0, abs=1e-8)


def test_tau_and_A_ode_ratio():
    t = ce.tau_and_A(DenominatorSpec.fn3(0.5), 2.0, 4.0)
    assert t.A_over_g == pytest.approx(1.5, abs=1e-8)
    assert t.tau >= 1


@pytest.mark.parametrize("spec", BUILTINS, ids=lambda s: s.spec_id)
@pytest.mark.parametrize("a", [1.0, 3.0, 25.0])
def test_A_over_g_constant(spec, a):
    delta = 0.7
    assert ce.tau_and_A(spec, delta, a).A_over_g == pytest.approx((1 + delta) / delta, abs=1e-8)


# --------------------------------------------------------------------------- Berg hypotheses


@pytest.mark.parametrize("spec", BUILTINS, ids=lambda s: s.spec_id)
def test_berg_passes_without_R(spec):
    res = ce.check_berg(spec, ZERO, grid_n=16)
    assert res.passed and res.witness is None


def test_berg_fails_positive_constant_R_near_boundary():
    res = ce.check_berg(FN2, WeightModel.disk(R=RModel.const(0.5)), grid_n=16)
    assert not res.passed
    assert res.condition == "a_lower_bound"
    assert math.hypot(res.witness[0], res.witness[1]) > 0.6


def test_berg_negative_constant_R_passes():
    assert ce.check_berg(FN2, WeightModel.disk(R=RModel.const(-0.3)), grid_n=16).passed


@pytest.mark.parametrize("sigma", [0.02, 0.05, 0.09])
def test_berg_log_R_reports_a_result(sigma):
    R = RModel.radial(lambda r, s=sigma: s * np.log(np.maximum(r, 1e-300) ** 2), "siglog")
    res = ce.check_berg(FN2, WeightModel.disk(R=R), grid_n=16)
    # a result with a witness either way; e^-R >= 1 keeps a >= 1
    assert res.passed or res.witness is not None
    assert res.condition != "a_lower_bound"


def test_berg_json_shape():
    res = ce.check_berg(FN2, WeightModel.disk(R=RModel.const(0.5)), grid_n=8)
    blob = res.to_json()
    assert blob["pass"] is False and len(blob["witness"]) == 4


# --------------------------------------------------------------------------- curvature identity


@pytest.mark.parametrize("spec", [DenominatorSpec.fn1(0.5), FN2, DenominatorSpec.fn3(0.5)], ids=lambda s: s.spec_id)
def test_curvature_identity_converges(spec):
    coarse = ce.curvature_identity_check(spec, 1.0, ZERO, 1.2, 0.2, step=1e-3)
    fine = ce.curvature_identity_check(spec, 1.0, ZERO, 1.2, 0.2, step=1e-4)
    assert fine.max_residual <= 1e-5
    assert 50 <= coarse.max_residual / fine.max_residual <= 200
    assert fine.lower_bound_ratio >= 1 - 1e-4


# --------------------------------------------------------------------------- Ohsawa conditions


def test_ohsawa_conditions():
    assert ce.check_ohsawa(ZERO).passed
    assert ce.check_ohsawa(WeightModel.disk(R=RModel.const(-0.3))).passed
    bad = ce.check_ohsawa(WeightModel.disk(R=RModel.const(0.5)))
    assert not bad.below_log and bad.witness is not None
    concave = RModel.radial(lambda r: -np.log(1.5 + r * r) - 1.0, "concave")
    res = ce.check_ohsawa(WeightModel.disk(R=concave))
    assert res.below_log and not res.r_subharmonic
