import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy import stats

from lsi_instability.families import make_bump_family, make_shifted_gaussian, make_standard_gaussian
from lsi_instability.functionals import lsi_deficit, rel_entropy
from lsi_instability.transport import (QuantileTable, cdf, hwi_chain, moment_sandwich_check, quantile,
                                       sf, talagrand_deficit, wasserstein_p, wasserstein_pp)

bump_args = st.tuples(st.floats(0.3, 3.0), st.floats(0.5, 3.0), st.floats(2.0, 12.0))


def test_cdf_basics():
    one = make_standard_gaussian()
    assert cdf(one, 0.0) == pytest.approx(0.5, abs=1e-15)
    assert cdf(one, 1.3) == pytest.approx(stats.norm.cdf(1.3), rel=1e-14)
    f = make_bump_family(1.0, 2.0, 10.0)
    assert cdf(f, 60.0) == pytest.approx(1.0, abs=1e-15)


def test_bump_tail_mass():
    f = make_bump_family(1.0, 2.0, 10.0)
    p = f.params
    # 1 - F(k) = c r (1 - Phi(k - b))
    assert sf(f, 10.0) == pytest.approx(p.c * p.r * stats.norm.sf(10.0 - p.b), rel=1e-12)


def test_quantiles():
    one = make_standard_gaussian()
    assert quantile(one, stats.norm.cdf(1.5)) == pytest.approx(1.5, rel=1e-13)
    f = make_bump_family(1.0, 2.0, 10.0)
    assert quantile(f, 0.5) == pytest.approx(0.0, abs=1e-12)
    p = f.params
    # F is flat to 1e-16 on the gap below k, so bracket k by nearby levels
    u = 1 - p.c * p.r * stats.norm.cdf(p.b - 10.0)
    assert quantile(f, u - 1e-9) < 10.0 < quantile(f, u + 1e-9)


def test_cdf_against_fine_grid():
    f = make_bump_family(1.0, 0.5, 6.0)
    xs = np.linspace(-40, 40, 800_001)
    dens = np.exp(f.log_eval(xs) + stats.norm.logpdf(xs))
    num = np.cumsum(dens) * (xs[1] - xs[0])
    for x in (-7.0, -1.0, 0.0, 5.9, 6.0, 12.0):
        i = np.searchsorted(xs, x)
        assert cdf(f, x) == pytest.approx(num[i] - 0.5 * dens[i] * (xs[1] - xs[0]), abs=1e-6)


@given(bump_args, st.floats(1e-12, 1 - 1e-12))
def test_quantile_roundtrip(args, u):
    f = make_bump_family(*args)
    x = quantile(f, u)
    assert cdf(f, x) == pytest.approx(u, abs=1e-9)


def test_quantile_table():
    f = make_bump_family(1.0, 2.0, 10.0)
    tab = QuantileTable.build(f)
    assert tab.max_roundtrip_error() <= 1e-9
    assert np.all(np.diff(tab.values) > 0)


def test_wasserstein_of_translations():
    for b in (-1.5, 2.0):
        g = make_shifted_gaussian(b)
        for p in (1.0, 2.0, 3.0):
            assert wasserstein_p(g, make_standard_gaussian(), p) == pytest.approx(abs(b), rel=1e-12)
    f = make_bump_family(1.0, 2.0, 10.0)
    assert wasserstein_p(f, f, 2.0) == pytest.approx(0.0, abs=1e-12)


def test_w2_bracket_at_k40():
    f = make_bump_family(1.0, 2.0, 40.0)
    H, d = rel_entropy(f), lsi_deficit(f)
    w2sq, _ = wasserstein_pp(f, make_standard_gaussian(), 2.0)
    assert 2 * H - 4 * math.sqrt(d * H) <= w2sq <= 2 * H


@given(bump_args)
def test_talagrand_and_hwi_chain(args):
    f = make_bump_family(*args)
    rep = hwi_chain(f, (1.0, 2.0))
    assert rep.delta >= -1e-9
    assert rep.delta_tal >= -1e-9
    assert rep.chain_holds(1e-8)
    assert talagrand_deficit(f) == pytest.approx(rep.delta_tal, abs=1e-12)


@given(bump_args, st.sampled_from([1.0, 2.0, 3.0]))
def test_moment_sandwich(args, p):
    assert moment_sandwich_check(make_bump_family(*args), p).holds


def test_transport_report_output():
    rep = hwi_chain(make_bump_family(1.0, 2.0, 10.0), (1.0, 2.0))
    rows = rep.csv_rows()
    assert [r[3] for r in rows] == [1.0, 2.0]
    assert rep.to_dict()["chain_holds"] is True


def test_heavytail_chain_deep_tail():
    # the flat continuation has an upper quantile far past where its mass underflows
    from lsi_instability.families import make_heavytail_family
    f = make_heavytail_family(5.0)
    u = quantile(f, np.array([1 - 1e-16]))
    assert np.isfinite(u).all()
    tr = hwi_chain(f)
    assert tr.chain_holds(1e-8)
    assert tr.delta_tal >= 0
