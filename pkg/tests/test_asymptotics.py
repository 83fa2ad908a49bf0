import math

import numpy as np
import pytest
from hypothesis import assume, given, strategies as st

from lsi_instability.asymptotics import (
    COND_LIMIT,
    FitError,
    SUITES,
    THEOREM1_K_GRID,
    basis_function,
    fit_expansion,
    sequence_point,
    suite_parameters,
    verify_instability_suite,
    verify_theorem1,
)

KS = [10.0, 14.0, 20.0, 28.0, 40.0, 57.0, 80.0]


def _basis(*names, t=2.0, p=1.0):
    return [basis_function(n, t, p) for n in names]


def test_exact_synthetic_recovery():
    pts = [(k, 3 * k ** -2 * math.log(k) + 5 * k ** -2) for k in KS]
    fit = fit_expansion(pts, _basis("k^-t log k", "k^-t"))
    assert fit.coefficient("k^-t log k") == pytest.approx(3, abs=1e-9)
    assert fit.coefficient("k^-t") == pytest.approx(5, abs=1e-9)
    assert fit.relative_residual < 1e-9
    assert fit.reliable


def test_constant_data():
    fit = fit_expansion([(k, 2.5) for k in KS], _basis("1"))
    assert fit.coefficient("1") == pytest.approx(2.5, abs=1e-12)
    assert fit.residual_norm < 1e-12


@given(st.lists(st.floats(-10, 10), min_size=3, max_size=3),
       st.floats(0.5, 3.0), st.floats(1.0, 4.0))
def test_fit_exact_on_basis_data(coef, t, p):
    assume(abs(p - t) > 0.2)  # k^(p-t) would duplicate the constant column
    basis = _basis("k^-t log k", "k^(p-t)", "1", t=t, p=p)
    ks = np.array(KS)
    ys = sum(c * b(ks) for c, b in zip(coef, basis))
    fit = fit_expansion(list(zip(ks, ys)), basis)
    scale = max(1.0, float(np.linalg.norm(ys)))
    assert fit.residual_norm / scale < 1e-9


def test_too_few_points():
    with pytest.raises(FitError):
        fit_expansion([(10, 1.0), (20, 2.0), (40, 3.0)], _basis("k^-t log k", "k^-t"))


def test_unsorted_k():
    pts = [(k, 1.0) for k in [10, 20, 14, 28, 40]]
    with pytest.raises(FitError):
        fit_expansion(pts, _basis("1"))


def test_rank_deficient():
    # at t = 2 the k^(2-t) column is the constant column
    with pytest.raises(FitError):
        fit_expansion([(k, 1.0) for k in KS], _basis("k^(2-t)", "1"))


def test_ill_conditioned_flagged():
    # nearly collinear columns on a narrow grid
    ks = [100.0, 100.001, 100.002, 100.003, 100.004]
    basis = _basis("k^-t", "k^-t log k", "1")
    fit = fit_expansion([(k, 1.0 / k) for k in ks], basis)
    assert fit.condition_number > COND_LIMIT
    assert not fit.reliable
    with pytest.raises(FitError):
        fit.coefficient("1")
    assert fit.to_dict()["reliable"] is False


def test_unknown_basis():
    with pytest.raises(KeyError):
        basis_function("k^3")


def test_suite_parameters():
    sp = suite_parameters("lsi-w2", {"M": 5})
    assert (sp["s"], sp["t"]) == (1.0, 2.0)
    assert suite_parameters("tal-w1")["t"] == 1.5
    assert suite_parameters("lsi-w1")["t"] == 0.5
    assert set(SUITES) == {"lsi-w2", "lsi-w1", "tal-w2", "tal-w1"}
    with pytest.raises(KeyError):
        suite_parameters("lsi-w3")
    with pytest.raises(ValueError):
        suite_parameters("tal-w2", {"M": 1})
    with pytest.raises(ValueError):
        suite_parameters("lsi-w1", {"p": 0.5})


def test_theorem1_leading_coefficient():
    rep = verify_theorem1(1.0, 2.0, THEOREM1_K_GRID, p_list=(3.0,))
    assert rep.fits["delta"].coefficient("k^-t log k") == pytest.approx(1.0, abs=0.03)
    assert 1.13 <= rep.fits["delta"].coefficient("k^-t") <= 1.25
    d = rep.to_dict()
    assert set(d) >= {"theorem", "params", "per_claim", "pass"}
    for claim in d["per_claim"].values():
        assert set(claim) >= {"predicted", "fitted", "tolerance", "pass"}


def test_verdicts_deterministic():
    a = verify_instability_suite("tal-w1", {"k": [10, 14, 20]}).to_dict()
    b = verify_instability_suite("tal-w1", {"k": [10, 14, 20]}).to_dict()
    assert a == b


def test_parallel_matches_serial():
    a = verify_instability_suite("lsi-w2", {"k": [10, 20, 40]}, workers=1).to_dict()
    b = verify_instability_suite("lsi-w2", {"k": [10, 20, 40]}, workers=3).to_dict()
    assert a == b


def test_bridge_shape_sensitivity():
    # the bridge lives where the density is about e^(-k^2/2): invisible in double precision
    quintic = verify_theorem1(1.0, 2.0, THEOREM1_K_GRID, p_list=(3.0,))
    cubic = verify_theorem1(1.0, 2.0, THEOREM1_K_GRID, p_list=(3.0,), bridge_shape="cubic")
    fq, fc = quintic.fits["delta"], cubic.fits["delta"]
    for lab in fq.basis:
        assert abs(fq.coefficient(lab) - fc.coefficient(lab)) <= max(fq.residual_norm, 1e-15)
    for rq, rc in zip(quintic.sequence, cubic.sequence):
        assert abs(rq["delta"] - rc["delta"]) < 1e-15


def test_sequence_point_keys():
    row = sequence_point(1.0, 2.0, 10.0, ps=(2.0,), wps=(2.0,))
    for key in ("I", "H", "delta", "m2", "Wpp2", "delta_tal"):
        assert key in row
    assert row["delta"] > 0
