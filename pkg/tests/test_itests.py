import math

import mpmath
import numpy as np
import pytest

from nntuck.itests import (FAIL_TO_REJECT, REJECT, InadmissibleTestError, TestKind, TestReport,
                        chi_squared_sf, degrees_of_freedom, lrt_from_likelihoods, split_decision,
                        split_lrt, standard_lrt)
from nntuck.model import ModelVariant, count_parameters
from nntuck.solver import FitConfig
from conftest import random_problem


def mp_sf(x, df):
    return float(mpmath.gammainc(mpmath.mpf(df) / 2, mpmath.mpf(x) / 2, mpmath.inf, regularized=True))


@pytest.mark.parametrize("kind,L,expected", [
    (TestKind.independence(3, 4), 21, 69),
    (TestKind.redundance(5), 12, 49),
    (TestKind.nested(2, 3, 1), 5, 18),
])
def test_degrees_of_freedom_examples(kind, L, expected):
    assert degrees_of_freedom(kind, L) == expected


def test_degenerate_df_is_inadmissible():
    with pytest.raises(InadmissibleTestError):
        degrees_of_freedom(TestKind.independence(2, 2), 4)
    with pytest.raises(InadmissibleTestError):
        standard_lrt(random_problem(0, N=6, L=4), TestKind.independence(2, 2))


def test_degrees_of_freedom_is_parameter_count_difference():
    N = 30
    for K in range(1, 5):
        for L in range(2, 9):
            for C in range(1, L):
                ind = TestKind.independence(K, C)
                diff = (count_parameters(ModelVariant.independent(K), N, L)
                        - count_parameters(ModelVariant.dependent(K, C), N, L))
                assert ind.raw_df(L) == diff
            red = count_parameters(ModelVariant.dependent(K, 2), N, L) - \
                count_parameters(ModelVariant.redundant(K), N, L)
            assert degrees_of_freedom(TestKind.redundance(K), L) == red


def test_test_kind_validation():
    with pytest.raises(ValueError):
        TestKind.nested(2, 2, 2)
    kind = TestKind.independence(2, 3)
    assert kind.full_variant() == ModelVariant.independent(2)
    assert kind.nested_variant() == ModelVariant.dependent(2, 3)


@pytest.mark.parametrize("x,df", [(3.841459, 1), (5.991465, 2)])
def test_chi_squared_quantiles(x, df):
    assert chi_squared_sf(x, df) == pytest.approx(0.05, abs=1e-4)


def test_chi_squared_against_high_precision_oracle():
    for df in (1, 2, 3, 7, 12, 49, 69):
        assert chi_squared_sf(0.0, df) == 1.0
        for x in (0.01, 0.5, 1.0, 4.0, 10.0, 33.3, 80.0, 200.0):
            assert abs(chi_squared_sf(x, df) - mp_sf(x, df)) <= 1e-10
    with pytest.raises(ValueError):
        chi_squared_sf(1.0, 0)
    with pytest.raises(ValueError):
        chi_squared_sf(-1.0, 2)


def test_equal_likelihoods_fail_to_reject():
    rep = lrt_from_likelihoods(TestKind.redundance(2), -100.0, -100.0, L=4)
    assert rep.statistic == 0 and rep.p_value == 1.0 and rep.verdict == FAIL_TO_REJECT
    assert rep.conclusion == "layer redundance"
    ratio, verdict = split_decision(-50.0, -50.0, 0.05)
    assert ratio == 0 and verdict == FAIL_TO_REJECT


def test_negative_statistic_is_clipped_and_flagged():
    rep = lrt_from_likelihoods(TestKind.redundance(2), -101.0, -100.0, L=4)
    assert rep.clipped and rep.statistic == 0 and rep.p_value == 1.0


def test_conservative_degenerate_policy():
    rep = lrt_from_likelihoods(TestKind.independence(2, 2), -10.0, -20.0, L=4,
                               degenerate="conservative")
    assert rep.df == 0 and rep.df_degenerate and rep.p_value == 1.0
    assert rep.verdict == FAIL_TO_REJECT and rep.conclusion == "layer dependence"
    with pytest.raises(InadmissibleTestError):
        lrt_from_likelihoods(TestKind.independence(2, 2), -10.0, -20.0, L=4)


def test_large_gap_rejects():
    rep = lrt_from_likelihoods(TestKind.independence(2, 1), -10.0, -200.0, L=4)
    assert rep.verdict == REJECT and rep.conclusion == "layer independence"
    assert split_decision(-10.0, -20.0, 0.05)[1] == REJECT
    assert split_decision(-10.0, -10.0 - math.log(20) + 1e-9, 0.05)[1] == FAIL_TO_REJECT


def test_standard_and_split_reports_are_deterministic():
    net = random_problem(3, N=12, L=3)
    cfg = FitConfig(max_iters=100)
    a = standard_lrt(net, TestKind.redundance(2), n_starts=2, config=cfg)
    b = standard_lrt(net, TestKind.redundance(2), n_starts=2, config=cfg)
    assert a.to_dict() == b.to_dict()
    assert isinstance(a, TestReport) and a.df == 4 + 6
    assert a.p_value == pytest.approx(chi_squared_sf(a.statistic, a.df))
    s = split_lrt(net, TestKind.redundance(2), n_starts_full=2, n_starts_nested=3, config=cfg)
    assert s.method == "split" and s.n_starts == {"full": 2, "nested": 3}
    assert s.to_dict() == split_lrt(net, TestKind.redundance(2), n_starts_full=2,
                                    n_starts_nested=3, config=cfg).to_dict()
    assert np.isfinite(s.statistic)
