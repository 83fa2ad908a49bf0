"""Acceptance criteria 1 to 12, each at its stated tolerance and runtime budget.

Every test records one PASS/FAIL line (printed again in the terminal summary)
and then asserts. Criteria that cannot be met at desk scale are left red.
"""

import math
import time

import numpy as np

from lsi_instability.asymptotics import (THEOREM1_K_GRID, basis_function, compute_sequence, fit_expansion,
                                         verify_instability_suite)
from lsi_instability.cli import heavytail_row
from lsi_instability.families import (make_bump_family, make_heavytail_family, make_shifted_gaussian,
                                      make_standard_gaussian)
from lsi_instability.functionals import (compute_report, entropy_lp_bound_check, moment, pinsker_check)
from lsi_instability.gaussian import gaussian_moment
from lsi_instability.quadrature import DEFAULT_CONFIG
from lsi_instability.transport import hwi_chain, moment_sandwich_check
from lsi_instability.uncertainty import (WeightSpec, bhi_deficit, fourier_wiener_remainder,
                                         gaussian_lp_norm_closed_form, lsi_to_bhi_transform,
                                         normalized_distance_ratio, optimizer_profile, weighted_lp_norm)


class Clock:
    def __init__(self, budget):
        self.budget = budget
        self.t0 = time.perf_counter()

    @property
    def elapsed(self):
        return time.perf_counter() - self.t0

    @property
    def ok(self):
        return self.elapsed < self.budget

    def __str__(self):
        return f"{self.elapsed:.1f}s/{self.budget:g}s"


def _verdict(acceptance, n, checks, detail, clock):
    passed = all(checks.values()) and clock.ok
    failed = [name for name, ok in checks.items() if not ok] + ([] if clock.ok else ["runtime"])
    msg = f"{detail}  [{clock}]" + (f"  failed: {', '.join(failed)}" if failed else "")
    acceptance(n, passed, msg)
    assert passed, msg


def test_criterion_01_optimizer_exactness(acceptance):
    clock = Clock(1.0)
    worst = 0.0
    for b in (0.5, 1.0, 2.0, 3.0, 5.0):
        rep = compute_report(make_shifted_gaussian(b), (2,), ())
        errs = (abs(rep.I - b * b), abs(rep.H - b * b / 2), abs(rep.delta), abs(float(rep.moments[2.0]) - 1 - b * b))
        worst = max(worst, *errs)
    _verdict(acceptance, 1, {"max_error<=1e-10": worst <= 1e-10}, f"max error {worst:.2e}", clock)


def test_criterion_02_theorem1_item1(acceptance):
    clock = Clock(10.0)
    rows = compute_sequence(1.0, 2.0, THEOREM1_K_GRID)
    fit = fit_expansion([(r["k"], r["delta"]) for r in rows],
                        [basis_function("k^-t log k", 2.0), basis_function("k^-t", 2.0)])
    lead, sub = fit.coefficient("k^-t log k"), fit.coefficient("k^-t")
    checks = {"leading in [0.97,1.03]": 0.97 <= lead <= 1.03, "second in [1.13,1.25]": 1.13 <= sub <= 1.25}
    _verdict(acceptance, 2, checks,
             f"k^-2 log k coef {lead:.4f} (target 1), k^-2 coef {sub:.4f} (target {0.5 * math.log(4 * math.e):.5f}),"
             f" cond {fit.condition_number:.1f}", clock)


def test_criterion_03_theorem1_items2to4(acceptance):
    clock = Clock(30.0)
    rows = compute_sequence(1.0, 2.0, THEOREM1_K_GRID, (2.0,), (2.0,))
    last = rows[-1]
    w2 = [r["Wpp2"] for r in rows]
    gaps = [abs(v - 2.0) for v in w2[-3:]]
    checks = {
        "|H-1|<=5e-3": abs(last["H"] - 1) <= 5e-3,
        "|m2-3|<=5e-3": abs(last["m2"] - 3) <= 5e-3,
        "W2^2 in [1.8,2+1e-6]": 1.8 <= w2[-1] <= 2.0 + 1e-6,
        "last three approach 2": gaps[0] > gaps[1] > gaps[2],
    }
    _verdict(acceptance, 3, checks,
             f"k=80: H {last['H']:.5f}, m2 {last['m2']:.5f}, W2^2 {w2[-1]:.4f} (last three "
             f"{', '.join(f'{v:.4f}' for v in w2[-3:])})", clock)


def test_criterion_04_theorem1_item5(acceptance):
    clock = Clock(5.0)
    checks, parts = {}, []
    for p in (1.0, 3.0):
        hi = 2.0 ** (2 * (p - 1)) + 0.1
        for k in (10.0, 20.0, 40.0):
            m = float(moment(make_bump_family(1.0, 0.5, k), p))
            ratio = (m - gaussian_moment(p)) / k ** (p - 0.5)
            checks[f"p={p:g},k={k:g}"] = 0.9 <= ratio <= hi
            parts.append(f"p{p:g}k{k:g}={ratio:.3f}")
    _verdict(acceptance, 4, checks, "ratios " + " ".join(parts) + " (band [0.9, 2^(2(p-1))+0.1])", clock)


def _chain_checks(f):
    tr = hwi_chain(f, (1.0, 2.0))
    out = {
        "delta": tr.delta >= -1e-9,
        "delta_tal": tr.delta_tal >= -1e-9,
        "hwi_chain": tr.chain_holds(1e-8),
        "pinsker": pinsker_check(f).holds,
        "entropy_lp": entropy_lp_bound_check(f, 2.0).holds,
    }
    for p in (1.0, 2.0):
        out[f"sandwich_p{p:g}"] = moment_sandwich_check(f, p).holds
    return out


def _chain_grid():
    grid = [make_bump_family(s, t, k) for s in (0.5, 1.0, 2.0) for t in (0.5, 1.0, 2.0) for k in (5.0, 10.0, 20.0)]
    grid += [make_shifted_gaussian(b) for b in (0.5, 1.0, 2.0)]
    grid += [make_heavytail_family(k) for k in (2.0, 5.0, 10.0)]
    return grid


def test_criterion_05_inequality_chains(acceptance):
    clock = Clock(60.0)
    grid = _chain_grid()
    failures = []
    for f in grid:
        for name, ok in _chain_checks(f).items():
            if not ok:
                failures.append(f"{f.name}:{name}")
    checks = {"at least 30 measures": len(grid) >= 30, "all chains hold": not failures}
    _verdict(acceptance, 5, checks,
             f"{len(grid)} measures, {len(failures)} violations" + (f" ({', '.join(failures[:5])})" if failures else ""),
             clock)


def test_criterion_06_instability_suites(acceptance):
    clock = Clock(60.0)
    w2 = verify_instability_suite("lsi-w2", {"M": 5})
    w1 = verify_instability_suite("lsi-w1")
    tal = verify_instability_suite("tal-w1", {"p": 2})
    d2 = [r["delta"] for r in w2.sequence]
    w2sq = [r["Wpp2"] for r in w2.sequence]
    d1 = [r["delta"] for r in w1.sequence]
    W1 = [r["Wpp1"] for r in w1.sequence]
    k1 = [r["k"] for r in w1.sequence]
    growth = W1[k1.index(40.0)] / W1[k1.index(10.0)]
    viol = max(r["delta_tal"] ** 2 - 16 * r["H"] * r["delta"] for r in tal.sequence)
    checks = {
        "lsi-w2 delta decreasing": bool(np.all(np.diff(d2) < 0)),
        "lsi-w2 delta(80)<1e-2": d2[-1] < 1e-2,
        "lsi-w2 W2^2 in [1.8,2.01] on last three": all(1.8 <= v <= 2.01 for v in w2sq[-3:]),
        "lsi-w1 W1(40)/W1(10)>=1.5": growth >= 1.5,
        "lsi-w1 delta decreasing": bool(np.all(np.diff(d1) < 0)),
        "tal-w1 delta_tal^2<=16 H delta": viol <= 1e-12,
    }
    _verdict(acceptance, 6, checks,
             f"lsi-w2 delta(80) {d2[-1]:.2e}, W2^2 {' '.join(f'{v:.3f}' for v in w2sq)}; "
             f"lsi-w1 W1 ratio {growth:.2f}; tal-w1 max(delta_tal^2 - 16 H delta) {viol:.2e}", clock)


def test_criterion_07_bhi_optimizer_flatness(acceptance):
    clock = Clock(20.0)
    worst, n_used = 0.0, 0
    for a in (math.pi / 4, math.pi / 2, math.pi, 2 * math.pi, 4 * math.pi):
        for r in (-3.0, 0.0, 1.0):
            res = bhi_deficit(optimizer_profile(a, r), n_max=2 ** 18)
            worst, n_used = max(worst, abs(res.delta)), max(n_used, res.n)
    checks = {"max|delta_BH|<=1e-6": worst <= 1e-6, "N<=2^18": n_used <= 2 ** 18}
    _verdict(acceptance, 7, checks, f"max |delta_BH| {worst:.2e} with N <= {n_used}", clock)


def test_criterion_08_carlen_identity(acceptance):
    clock = Clock(30.0)
    cases = {"1": make_standard_gaussian(), "g1": make_shifted_gaussian(1.0), "g2": make_shifted_gaussian(2.0),
             "bump(1,1/2,6)": make_bump_family(1.0, 0.5, 6.0), "bump(1,1/2,10)": make_bump_family(1.0, 0.5, 10.0)}
    checks, parts = {}, []
    for name, f in cases.items():
        res = abs(fourier_wiener_remainder(f).identity_residual)
        checks[name] = res <= 5e-6
        parts.append(f"{name} {res:.1e}")
    _verdict(acceptance, 8, checks, "residuals " + ", ".join(parts), clock)


def test_criterion_09_lemma_log_norm_band(acceptance):
    clock = Clock(20.0)
    w = WeightSpec("invgauss", 1.0)
    vals = []
    for k in range(3, 11):
        h = lsi_to_bhi_transform(make_bump_family(1.0, 0.5, float(k)))
        b = 2.0 * k
        vals.append(weighted_lp_norm(h, 4.0, w).log_abs - b * b / 12 + 0.75 * math.log(b))
    width = max(vals) - min(vals)
    checks = {"band width<=2": width <= 2.0, "finite": all(math.isfinite(v) for v in vals)}
    _verdict(acceptance, 9, checks,
             f"band width {width:.3f} over k=3..10 (values {min(vals):.3f}..{max(vals):.3f})", clock)


def test_criterion_10_bhi_distance_ratios(acceptance):
    clock = Clock(120.0)
    ratios = {}
    for label, w in (("power:1", WeightSpec("power", 1.0)), ("invgauss:1", WeightSpec("invgauss", 1.0)),
                     ("lebesgue", WeightSpec())):
        ks = (4.0, 6.0, 8.0) if label != "lebesgue" else (4.0, 8.0)
        for k in ks:
            h = lsi_to_bhi_transform(make_bump_family(1.0, 0.5, k))
            ratios[(label, k)] = normalized_distance_ratio(h, 4.0, w)
    checks = {f"{lab} k={k:g} >= 0.1": ratios[(lab, k)] >= 0.1
              for lab in ("power:1", "invgauss:1") for k in (4.0, 6.0, 8.0)}
    leb = ratios[("lebesgue", 8.0)] / ratios[("lebesgue", 4.0)]
    checks["lebesgue ratio(8)/ratio(4)<=0.5"] = leb <= 0.5
    parts = [f"{lab} k{k:g}={v:.3f}" for (lab, k), v in ratios.items()]
    _verdict(acceptance, 10, checks, ", ".join(parts) + f"; lebesgue decay {leb:.3f}", clock)


def test_criterion_11_closed_form_vs_quadrature(acceptance):
    clock = Clock(5.0)
    worst = 0.0
    n = 0
    for p in (2.0, 3.0, 4.0):
        for theta in (0.5, 1.0, 1.5):
            for mult in (1.5, 3.0, 10.0):
                a = mult * theta * math.pi / p
                w = WeightSpec("invgauss", theta)
                cf = gaussian_lp_norm_closed_form(a, p, w).log_abs
                qd = weighted_lp_norm(optimizer_profile(a), p, w).log_abs
                worst = max(worst, abs(math.expm1(qd - cf)))
                n += 1
    _verdict(acceptance, 11, {"relative<=1e-8": worst <= 1e-8, "27 points": n == 27},
             f"max relative disagreement {worst:.2e} over {n} (a, p, theta)", clock)


def test_criterion_12_heavytail(acceptance):
    clock = Clock(5.0)
    alpha = 0.5
    rows = [heavytail_row(k, DEFAULT_CONFIG) for k in (2.0, 5.0, 10.0, 20.0)]
    limit = heavytail_row(math.inf, DEFAULT_CONFIG)
    cs = [r["C"] for r in rows]
    gaps = [abs(c - 1) for c in cs]
    checks = {
        "C in (0,2)": all(0 < c < 2 for c in cs),
        "|C-1| decreasing": all(a > b for a, b in zip(gaps, gaps[1:])),
        f"inf f >= {alpha}": all(r["inf_f"] >= alpha for r in rows + [limit]),
        "m2 divergent": isinstance(limit["m2"], dict) and bool(limit["m2"].get("divergent")),
    }
    infs = " ".join(f"{r['inf_f']:.4f}" for r in rows)
    _verdict(acceptance, 12, checks,
             f"C {' '.join(f'{c:.4f}' for c in cs)}; inf f {infs}"
             f" -> {limit['inf_f']:.4f}; m2 at k=inf divergent", clock)
