import csv
import io
import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from l2ext import constants as co
from l2ext import denomcore as dc
from l2ext.constants import AS_PRINTED, GENERIC
from l2ext.denomcore import DenominatorSpec

FN2 = DenominatorSpec.fn2()
SQRT2 = math.sqrt(2.0)


def test_extension_bound_fn2_at_one():
    eb = co.extension_bound(FN2, 1.0)
    assert eb.generic_bound == pytest.approx(12.0, abs=1e-9)
    assert eb.as_printed_bound == pytest.approx(6.0)
    assert eb.K_bound == pytest.approx(1.0)


def test_extension_bound_as_printed_fn2():
    assert co.extension_bound(FN2, SQRT2).as_printed_bound == pytest.approx(3 + 2 * SQRT2, rel=1e-15)


@pytest.mark.parametrize("family", ["fn3", "fn4"])
def test_as_printed_at_inverse_sqrt(family):
    s = 0.25
    forms = co.family_closed_forms(family, s, s**-0.5)
    assert forms.as_printed == pytest.approx(9.0, abs=1e-12)


def test_closed_form_examples():
    assert co.family_closed_forms("fn2", None, SQRT2).K_bound == pytest.approx(1.030330, abs=1e-6)
    assert co.family_closed_forms("fn3", 0.25, 2.0).K_bound == pytest.approx(0.75)
    assert co.family_closed_forms("fn1", 1.0, 1.0).as_printed == pytest.approx(16.0)
    with pytest.raises(ValueError):
        co.family_closed_forms("fn1", None, 1.0)
    with pytest.raises(ValueError):
        co.family_closed_forms("fn2", None, 0.0)


@pytest.mark.parametrize("family, s", [("fn1", 0.5), ("fn3", 0.3), ("fn4", 0.7)])
@pytest.mark.parametrize("delta", [0.3, 1.0, 4.0])
def test_as_printed_equals_generic_with_k_bound(family, s, delta):
    forms = co.family_closed_forms(family, s, delta)
    assert forms.generic_at_bound() == pytest.approx(forms.as_printed, rel=1e-14)


@pytest.mark.parametrize("delta", [0.1, 1.0, SQRT2, 7.0])
def test_fn2_generic_and_printed_disagree(delta):
    forms = co.family_closed_forms("fn2", None, delta)
    assert forms.generic_at_bound() == pytest.approx((1 + delta) * (5 + delta) / delta, rel=1e-14)
    assert forms.generic_at_bound() > forms.as_printed


def test_generic_bound_exceeds_tail_term():
    for spec in (FN2, DenominatorSpec.fn3(0.5), DenominatorSpec.from_expr("x^3")):
        for delta in (0.5, 2.0):
            eb = co.extension_bound(spec, delta)
            assert eb.generic_bound > 4 * eb.C * (1 + delta) / delta


def test_fn1_sharp_bound_is_sharper_and_valid():
    for s in (0.2, 0.7, 1.0):
        for delta in (0.5, 1.0, 3.0):
            sharp = co.fn1_sharp_k_bound(s, delta)
            assert sharp <= 1 + delta
            assert dc.k_delta(DenominatorSpec.fn1(s), delta).K <= sharp + 1e-8


def test_fn1_weight_identity_at_random_points():
    rng = np.random.default_rng(7)
    for s in (0.1, 0.5, 1.0):
        lhs, rhs = co.fn1_weight_identity(s, rng.uniform(0.01, 1.0, 10))
        assert np.allclose(lhs, rhs, rtol=1e-12)


# --------------------------------------------------------------------------- optimisation


def test_optimal_delta_fn2_as_printed():
    d, v = co.optimal_delta(FN2, AS_PRINTED)
    assert d == pytest.approx(SQRT2, abs=1e-4)
    assert v == pytest.approx(3 + 2 * SQRT2, abs=1e-8)


@pytest.mark.parametrize("s", [0.25, 1.0])
def test_optimal_delta_fn1_as_printed(s):
    d, v = co.optimal_delta(DenominatorSpec.fn1(s), AS_PRINTED)
    assert d == pytest.approx(1.0, abs=1e-4)
    assert v == pytest.approx(16 / s, rel=1e-6)


def test_optimal_delta_generic_fn2():
    d, v = co.optimal_delta(FN2, GENERIC)
    assert v >= 4 * (1 + d) / d
    # the optimum beats the neighbouring deltas
    for other in (d * 0.9, d * 1.1, 1.0, SQRT2):
        assert v <= co.extension_bound(FN2, other).generic_bound + 1e-9


def test_optimal_delta_rejects_expressions_for_as_printed():
    with pytest.raises(ValueError):
        co.optimal_delta(DenominatorSpec.from_expr("x^2"), AS_PRINTED)
    with pytest.raises(ValueError):
        co.optimal_delta(FN2, "other")


@settings(max_examples=10, deadline=None)
@given(st.sampled_from([FN2, DenominatorSpec.fn3(0.5), DenominatorSpec.fn1(0.8), DenominatorSpec.from_expr("x^3")]),
       st.floats(0.1, 10.0), st.floats(0.2, 5.0))
def test_generic_bound_invariant_under_normalize(spec, scale, delta):
    scaled = spec.with_scale(scale)
    a = co.extension_bound(scaled, delta).generic_bound
    b = co.extension_bound(dc.normalize(scaled), delta).generic_bound
    assert abs(a - b) <= 1e-8


# --------------------------------------------------------------------------- Demailly comparison


@pytest.mark.parametrize("s", [0.1, 0.5, 1.0])
def test_demailly_inequality(s):
    cmp = co.demailly_comparison(s)
    assert cmp.inequality_holds and cmp.points == 10_000
    assert cmp.direct_route == pytest.approx(16 / s)


def test_demailly_endpoint_and_values():
    assert co.demailly_comparison(1.0).min_gap == pytest.approx(0.0, abs=1e-12)
    cmp = co.demailly_comparison(0.1)
    assert cmp.direct_route == pytest.approx(160.0)
    assert cmp.demailly_route == pytest.approx(582.84271247, rel=1e-9)


# --------------------------------------------------------------------------- report


@pytest.fixture(scope="module")
def report():
    return co.reproduce_report()


def test_report_csv_header_and_rows(report):
    rows = list(csv.reader(io.StringIO(report.to_csv())))
    assert tuple(rows[0]) == co.REPORT_HEADER
    assert len(rows) == 1 + 8


def test_report_flags_fn2_discrepancy(report):
    fn2 = [r for r in report.rows if r.family == "fn2" and r.delta == pytest.approx(SQRT2)][0]
    assert fn2.discrepancy
    assert fn2.generic_bound == pytest.approx(10.9497, abs=1e-4)
    assert fn2.as_printed_bound == pytest.approx(5.828427, abs=1e-6)
    for r in report.rows:
        if r.family != "fn2":
            assert not r.discrepancy


def test_report_rows_respect_k_bound(report):
    for r in report.rows:
        assert r.K_numeric <= r.K_bound + 1e-8
    fn1 = [r for r in report.rows if r.family == "fn1" and r.delta == 1.0][0]
    assert fn1.K_numeric <= 2.0
    fn4 = [r for r in report.rows if r.family == "fn4" and r.delta == 2.0][0]
    assert fn4.as_printed_bound == pytest.approx(9.0, abs=1e-12)


def test_report_json(report):
    blob = json.loads(report.to_json())
    assert len(blob["rows"]) == 8 and len(blob["demailly"]) == 3
