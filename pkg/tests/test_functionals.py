import math

import pytest
from hypothesis import given, strategies as st

from lsi_instability.families import (make_bump_family, make_heavytail_family, make_shifted_gaussian,
                                      make_standard_gaussian)
from lsi_instability.functionals import (Divergent, chi_moment, compute_report, entropy_lp_bound_check,
                                         fisher_info, lp_dist_to_one, lsi_deficit, moment, pinsker_check,
                                         rel_entropy, sqrt_l2_gap, tensorize)
from lsi_instability.gaussian import gaussian_moment

from . import oracles

tilts = st.floats(-6.0, 6.0, allow_nan=False)
bump_args = st.tuples(st.floats(0.2, 4.0), st.floats(0.25, 3.0), st.floats(2.0, 9.0))


@given(tilts)
def test_shifted_gaussian_exact(b):
    f = make_shifted_gaussian(b)
    assert abs(fisher_info(f) - b * b) <= 1e-10
    assert abs(rel_entropy(f) - b * b / 2) <= 1e-10
    assert abs(lsi_deficit(f)) <= 1e-10
    assert abs(moment(f, 2) - (1 + b * b)) <= 1e-10


def test_constant_density():
    f = make_standard_gaussian()
    assert fisher_info(f) == 0.0 and rel_entropy(f) == 0.0 and lsi_deficit(f) == 0.0
    assert moment(f, 2) == pytest.approx(1.0, rel=1e-15)
    assert lp_dist_to_one(f, 1).is_zero
    assert lp_dist_to_one(make_shifted_gaussian(0.0), 2).is_zero


@pytest.mark.parametrize("args", [(1.0, 2.0, 4.0), (1.0, 0.5, 3.0), (2.0, 1.0, 5.0)])
def test_functionals_against_quadrature(args):
    f = make_bump_family(*args)
    assert fisher_info(f) == pytest.approx(oracles.fisher(f), rel=1e-8)
    assert rel_entropy(f) == pytest.approx(oracles.entropy(f), rel=1e-8)
    for p in (1.0, 2.0, 2.5):
        assert moment(f, p) == pytest.approx(oracles.moment(f, p), rel=1e-8)
    assert float(lp_dist_to_one(f, 1.0)) == pytest.approx(oracles.lp_dist(f, 1.0), rel=1e-7)


def test_bump_t2_values():
    f = make_bump_family(1.0, 2.0, 10.0)
    assert fisher_info(f) == pytest.approx(2.0, abs=0.01)
    f20 = make_bump_family(1.0, 2.0, 20.0)
    # H = 1 - k^-2 log k - (1/2) log(4e) k^-2 + o(k^-2)
    expansion = 1 - math.log(20) / 400 - 0.5 * math.log(4 * math.e) / 400
    assert rel_entropy(f20) == pytest.approx(expansion, abs=2e-3)
    assert rel_entropy(f20) == pytest.approx(oracles.entropy(f20), rel=1e-8)
    # m_2 = (1 + 2r(1 + b^2)) / (1 + 2r) up to o(exp): completing the square on the tilt
    r, b = f20.params.r, f20.params.b
    assert moment(f20, 2) == pytest.approx((1 + 2 * r * (1 + b * b)) / (1 + 2 * r), rel=1e-12)
    assert moment(f20, 2) == pytest.approx(3.0, abs=5e-3)
    f40 = make_bump_family(1.0, 2.0, 40.0)
    scaled = lsi_deficit(f40) * 40 ** 2 - math.log(40)
    assert scaled == pytest.approx(0.5 * math.log(4 * math.e), rel=0.02)


def test_l1_distance_scale():
    f = make_bump_family(1.0, 2.0, 10.0)
    ratio = float(lp_dist_to_one(f, 1.0)) / (4 * f.params.r)
    assert 0.5 <= ratio <= 2.0


def test_definitional_identity():
    f = make_bump_family(1.0, 0.5, 12.0)
    assert lsi_deficit(f) == pytest.approx(0.5 * fisher_info(f) - rel_entropy(f), abs=1e-12)


@given(bump_args)
def test_lsi_holds(args):
    f = make_bump_family(*args)
    assert lsi_deficit(f) >= -1e-9
    assert rel_entropy(f) >= -1e-9


@given(bump_args)
def test_pinsker_and_entropy_bounds(args):
    f = make_bump_family(*args)
    assert pinsker_check(f).holds
    assert entropy_lp_bound_check(f, 2.0).holds
    assert entropy_lp_bound_check(f, 3.0).holds


def test_checks_on_simple_measures():
    g1 = make_shifted_gaussian(1.0)
    pk = pinsker_check(g1)
    # ||g_1 - 1||_1 = 2 (2 Phi(1/2) - 1)
    assert pk.lhs == pytest.approx(2 * (2 * 0.691462461274013 - 1), rel=1e-9)
    assert pk.rhs == pytest.approx(1.0, rel=1e-12) and pk.holds
    one = make_standard_gaussian()
    assert pinsker_check(one).lhs == 0.0 and pinsker_check(one).holds
    assert entropy_lp_bound_check(one, 2.0).holds
    assert entropy_lp_bound_check(g1, 2.0).holds
    with pytest.raises(ValueError):
        entropy_lp_bound_check(g1, 1.0)


@given(bump_args)
def test_hellinger_gap_below_half_entropy(args):
    # KL >= 2 * squared Hellinger distance
    f = make_bump_family(*args)
    assert sqrt_l2_gap(f) <= 0.5 * rel_entropy(f) + 1e-9


def test_heavytail_moments():
    for k in (2.0, 5.0, 10.0):
        m2 = moment(make_heavytail_family(k), 2.0)
        assert math.isfinite(m2)
    m2 = moment(make_heavytail_family(math.inf), 2.0)
    assert isinstance(m2, Divergent) and float(m2) == math.inf
    assert isinstance(moment(make_heavytail_family(math.inf), 1.0), Divergent)


def test_moment_rejects_negative_order():
    with pytest.raises(ValueError):
        moment(make_standard_gaussian(), -1.0)


def test_tensorize():
    rep = compute_report(make_bump_family(1.0, 2.0, 10.0), (1, 2), (1,))
    assert tensorize(rep, 1) is rep
    rep3 = tensorize(rep, 3)
    assert rep3.moments[2.0] == pytest.approx(rep.moments[2.0] + 2)
    assert rep3.delta == rep.delta and rep3.dimension == 3
    assert rep3.moment_lower[1.0] == pytest.approx(rep.moments[1.0] - chi_moment(1, 2))
    g = tensorize(compute_report(make_shifted_gaussian(2.0)), 4)
    assert abs(g.delta) <= 1e-10


def test_chi_moments():
    assert chi_moment(2, 5) == pytest.approx(5.0)
    assert chi_moment(3, 1) == pytest.approx(gaussian_moment(3))


def test_report_serialisation():
    rep = compute_report(make_bump_family(1.0, 0.5, 6.0), (1, 2), (1, 2))
    text = rep.to_csv()
    header, row = text.strip().split("\n")
    assert header.split(",")[:6] == ["s", "t", "k", "I", "H", "delta"]
    assert len(header.split(",")) == len(row.split(","))
    assert "0.5" in row.split(",")[1]
    d = rep.to_dict()
    assert d["params"]["k"] == 6.0 and "lp_dist_to_one" in d
