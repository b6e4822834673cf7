import csv
import io
import math

import numpy as np
import pytest

from l2ext import bergman as bg
from l2ext.certify import RModel, WeightModel
from l2ext.constants import extension_bound
from l2ext.denomcore import DenominatorSpec

FN2 = DenominatorSpec.fn2()
SQRT2 = math.sqrt(2.0)

# Frozen from tests/oracles.py
FN2_M1 = 0.40365263767680593
FN2_M0_KAPPA_R2 = 0.70559535874351302
COUPLED_111_RATIO = 0.72799653025583359

FAMILY_SAMPLES = (
    [DenominatorSpec.fn1(s) for s in (0.1, 0.3, 0.5, 0.8, 1.0)]
    + [FN2]
    + [DenominatorSpec.fn3(s) for s in (0.1, 0.3, 0.5, 0.8, 1.0)]
    + [DenominatorSpec.fn4(s, N) for s, N in ((0.1, 2), (0.3, 3), (0.5, 3), (0.8, 4), (1.0, 2))]
)


# --------------------------------------------------------------------------- disk


@pytest.mark.parametrize("spec", FAMILY_SAMPLES, ids=lambda s: s.spec_id)
def test_zeroth_moment_is_one(spec):
    assert bg.disk_moments(spec, (), K_max=0).moments[0] == pytest.approx(1.0, abs=1e-8)


def test_fn2_moments_against_oracle():
    table = bg.disk_moments(FN2, (), K_max=4)
    assert table.moments[1] == pytest.approx(FN2_M1, rel=1e-10)
    assert bg.disk_moment_direct(FN2, 1) == pytest.approx(table.moments[1], abs=1e-7)
    assert np.all(table.moments > 0)
    assert np.all(np.diff(table.moments) <= 0)


def test_moment_with_kappa():
    m0 = bg.disk_moments(FN2, (0.0, 1.0), K_max=0).moments[0]
    assert math.exp(-1) < m0 < 1
    assert m0 == pytest.approx(FN2_M0_KAPPA_R2, rel=1e-10)


@pytest.mark.parametrize("spec", [DenominatorSpec.fn1(0.5), DenominatorSpec.fn3(0.3)], ids=lambda s: s.spec_id)
def test_moments_direct_path_agrees(spec):
    table = bg.disk_moments(spec, (0.0, 0.5), K_max=3)
    for k in range(1, 4):
        assert bg.disk_moment_direct(spec, k, (0.0, 0.5)) == pytest.approx(table.moments[k], abs=1e-7)


def test_disk_verdicts():
    v = bg.disk_min_extension(FN2, WeightModel.disk(), 1.0)
    assert v.ratio == pytest.approx(1.0, abs=1e-8)
    assert v.bound >= 4 and v.flag == bg.OK
    v = bg.disk_min_extension(FN2, WeightModel.disk((0.0, 1.0)), 1.0)
    assert v.ratio == pytest.approx(FN2_M0_KAPPA_R2, rel=1e-10)
    v = bg.disk_min_extension(FN2, WeightModel.disk(R=RModel.const(-0.3)), 1.0)
    assert v.ratio == pytest.approx(math.exp(-0.3), rel=1e-8)
    assert v.flag == bg.OK


def test_disk_rejects_positive_constant_R():
    with pytest.raises(ValueError):
        bg.disk_min_extension(FN2, WeightModel.disk(R=RModel.const(0.2)), 1.0)


def test_unnormalized_spec_rejected():
    with pytest.raises(ValueError):
        bg.disk_min_extension(FN2.with_scale(2.0), WeightModel.disk(), 1.0)
    with pytest.raises(ValueError):
        bg.sweep_verify([FN2.with_scale(2.0)], [WeightModel.disk()])


# --------------------------------------------------------------------------- bidisk Gram


def test_trivial_weight_gram_entry():
    g = bg.bidisk_gram(FN2, WeightModel.bidisk(), 2)
    assert g.path == "separable"
    # z-mass of the unit disk under d mu = 2 dx dy, times m_0 = 1
    assert g.matrix[0, 0] == pytest.approx(2 * math.pi, rel=1e-12)


def test_separable_gram_is_product_of_moments():
    w = WeightModel.bidisk(1.0, 2.0)
    g = bg.bidisk_gram(FN2, w, 3)
    zm = bg.z_moments(w.kappa_z, 3)
    wm = bg.disk_moments(FN2, w.kappa_w, K_max=3).moments
    assert np.count_nonzero(g.matrix - np.diag(np.diag(g.matrix))) == 0
    for p in range(4):
        for q in range(4):
            assert g.matrix[g.index(p, q), g.index(p, q)] == pytest.approx(zm[p] * wm[q], rel=1e-12)


def test_separable_and_tensor_paths_agree():
    w = WeightModel.bidisk(1.0, 1.0)
    sep = bg.bidisk_gram(FN2, w, 3, path="separable")
    ten = bg.bidisk_gram(FN2, w, 3, path="tensor")
    assert np.max(np.abs(sep.matrix - ten.matrix)) <= 1e-7


def test_coupled_gram_is_hermitian_positive_definite():
    g = bg.bidisk_gram(FN2, WeightModel.bidisk(1.0, 1.0, 1.0), 3)
    M = g.matrix
    assert np.max(np.abs(M - M.conj().T)) <= 1e-12
    assert np.linalg.eigvalsh(M).min() > 0


def test_gram_truncation_matches_direct():
    w = WeightModel.bidisk(1.0, 1.0, 1.0)
    big = bg.bidisk_gram(FN2, w, 4).truncate(2)
    small = bg.bidisk_gram(FN2, w, 2)
    assert np.allclose(big.matrix, small.matrix, rtol=0, atol=1e-14)


def test_separable_path_requires_zero_coupling():
    with pytest.raises(ValueError):
        bg.bidisk_gram(FN2, WeightModel.bidisk(1, 1, 1), 2, path="separable")


# --------------------------------------------------------------------------- bidisk extension


@pytest.mark.parametrize("spec", [DenominatorSpec.fn1(0.5), FN2, DenominatorSpec.fn4(0.5, 3)], ids=lambda s: s.spec_id)
@pytest.mark.parametrize("f", [(1.0,), (0.0, 1.0), (3.0, 0.0, 2.0)])
def test_trivial_weight_ratio_is_one(spec, f):
    v = bg.bidisk_min_extension(spec, WeightModel.bidisk(), f, 4, 1.0, bound=20.0, certified=True)
    assert v.ratio == pytest.approx(1.0, abs=1e-7)


def test_separable_ratio_is_independent_of_f():
    w = WeightModel.bidisk(1.0, 2.0)
    ratios = [bg.bidisk_min_extension(FN2, w, f, 4, 1.0, bound=20.0, certified=True).ratio
              for f in [(1.0,), (0.0, 1.0), (3.0, 0.0, 2.0)]]
    assert max(ratios) - min(ratios) <= 1e-8


def test_coupled_ratio_against_oracle():
    w = WeightModel.bidisk(1.0, 1.0, 1.0)
    bound = extension_bound(FN2, SQRT2).generic_bound
    prev = math.inf
    for D in (2, 4, 6):
        v = bg.bidisk_min_extension(FN2, w, (1.0,), D, SQRT2)
        assert v.ratio == pytest.approx(COUPLED_111_RATIO, rel=1e-10)
        assert v.ratio <= prev + 1e-10
        assert v.ratio <= bound and v.flag == bg.OK
        prev = v.ratio


def test_coupled_ratio_monotone_in_degree_for_linear_f():
    w = WeightModel.bidisk(2.0, 1.0, -2.0)
    gram = bg.bidisk_gram(FN2, w, 6)
    ratios = [bg.bidisk_min_extension(FN2, w, (1.0, 2.0, 0.5), D, 1.0, bound=20.0, certified=True, gram=gram).ratio
              for D in (2, 3, 4, 5, 6)]
    assert all(b <= a + 1e-10 for a, b in zip(ratios, ratios[1:]))
    assert ratios[-1] > 0


def test_degree_too_small_for_f():
    with pytest.raises(bg.NumericalFailure):
        bg.bidisk_min_extension(FN2, WeightModel.bidisk(), (1.0, 0.0, 0.0, 1.0), 2, 1.0, bound=20.0, certified=True)


# --------------------------------------------------------------------------- sweep


def test_small_sweep_and_csv():
    verdicts = bg.sweep_verify([FN2, DenominatorSpec.fn3(0.1)],
                               [WeightModel.disk(), WeightModel.bidisk(), WeightModel.bidisk(1.0, 1.0, 1.0)],
                               f_list=[(1.0,), (0.0, 1.0)], degrees=(2, 3))
    assert len(verdicts) == 2 * (1 + 2 * 2 + 2 * 2)
    assert all(v.flag == bg.OK for v in verdicts)
    assert all(v.ratio <= v.bound + v.quad_error for v in verdicts)
    rows = list(csv.reader(io.StringIO(bg.verdicts_to_csv(verdicts))))
    assert tuple(rows[0]) == bg.VERDICT_HEADER
    assert len(rows) == len(verdicts) + 1


def test_fn3_stated_bound_dominates_ratios():
    s = 0.1
    stated = 4 * (1 + 2 * math.sqrt(s) + s)
    assert stated == pytest.approx(6.930, abs=1e-3)
    spec = DenominatorSpec.fn3(s)
    for w in bg.DEFAULT_BIDISK_WEIGHTS:
        v = bg.bidisk_min_extension(spec, w, (1.0, 1.0), 4, s**-0.5, bound=stated)
        assert v.ratio <= stated


def test_uncertified_weight_is_flagged():
    w = WeightModel.disk((0.0, -0.5))
    v = bg.disk_min_extension(FN2, w, 1.0)
    assert v.flag == bg.UNCERTIFIED
