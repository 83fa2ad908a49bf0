"""Command-line runner: sweeps, per-theorem reproductions and fixture regeneration.

Exit codes: 0 when every asserted check passes, 2 when a check fails at its
tolerance, 1 on invalid configuration or a computation error.
"""

from __future__ import annotations

import argparse
import difflib
import json
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Sequence

import numpy as np

from . import __version__
from .asymptotics import SUITES, THEOREM1_K_GRID, verify_instability_suite, verify_theorem1
from .families import make_bump_family, make_heavytail_family, make_shifted_gaussian
from .functionals import Divergent, compute_report, entropy_lp_bound_check, moment, pinsker_check
from .io import dumps_json, rows_to_csv
from .quadrature import QuadratureConfig
from .transport import hwi_chain, moment_sandwich_check
from .uncertainty import (WeightSpec, bhi_deficit, dist_to_optimizers, fourier_wiener_remainder,
                          lsi_to_bhi_transform, optimizer_profile, truncated_gaussian_norm,
                          weighted_lp_norm)

COMMANDS = {
    "theorem1": "verdicts on the five bump-family expansions",
    "example-gb": "functionals of the optimizers g_b (I = b^2, H = b^2/2, delta = 0)",
    "heavytail": "normalising constants and lower bounds of the heavy-tailed family",
    "instability": "trend suites lsi-w2 | lsi-w1 | tal-w2 | tal-w1",
    "hwi-chain": "HWI chain, Pinsker, entropy-L^p and moment sandwiches along a k-grid",
    "bhi-deficit": "entropic uncertainty deficit and the remainder identity along a k-grid",
    "bhi-pw": "normalised distance to Gaussians under the power weight",
    "bhi-ew": "normalised distance to Gaussians under the inverse-Gaussian weight",
    "bhi-optimizer-check": "uncertainty deficit of Gaussians over an (a, r) grid",
    "fixtures-regen": "rewrite the regression fixtures used by the tests",
}

OPT_GRID_A = (math.pi / 4, math.pi / 2, math.pi, 2 * math.pi, 4 * math.pi)
OPT_GRID_R = (-3.0, 0.0, 1.0)


class ConfigError(ValueError):
    """Invalid configuration; the message names the offending field."""


def list_commands() -> str:
    width = max(len(c) for c in COMMANDS)
    lines = ["commands:"] + [f"  {c.ljust(width)}  {d}" for c, d in COMMANDS.items()]
    return "\n".join(lines)


# config ------------------------------------------------------------------------------

@dataclass
class ExperimentConfig:
    command: str
    suite: Optional[str] = None
    s: Optional[float] = None
    t: Optional[float] = None
    M: Optional[float] = None
    b: List[float] = field(default_factory=list)
    k: List[float] = field(default_factory=list)
    p: List[float] = field(default_factory=list)
    weight: Optional[WeightSpec] = None
    grid_n: int = 2 ** 16
    tol_abs: float = 1e-12
    tol_rel: float = 1e-10
    out: Optional[str] = None
    format: str = "json"
    workers: int = 1

    @property
    def quad(self) -> QuadratureConfig:
        return QuadratureConfig(self.tol_abs, self.tol_rel)


def _float_list(name: str, val) -> List[float]:
    if val is None:
        return []
    if isinstance(val, (int, float)):
        return [float(val)]
    items = val.split(",") if isinstance(val, str) else list(val)
    out = []
    for item in items:
        item = str(item).strip()
        if not item:
            continue
        try:
            out.append(float(item))
        except ValueError:
            raise ConfigError(f"--{name}: {item!r} is not a number") from None
    return out


def _number(name: str, val, kind=float):
    if val is None:
        return None
    try:
        return kind(val)
    except (TypeError, ValueError):
        raise ConfigError(f"--{name}: {val!r} is not a valid {kind.__name__}") from None


_DEFAULTS = {
    "theorem1": {"s": 1.0, "t": 2.0, "k": list(THEOREM1_K_GRID), "p": [1.0, 3.0], "format": "json"},
    "example-gb": {"b": [0.5, 1.0, 2.0, 3.0, 5.0], "format": "csv"},
    "heavytail": {"k": [2.0, 5.0, 10.0, 20.0], "format": "csv"},
    "instability": {"format": "json"},
    "hwi-chain": {"s": 1.0, "t": 2.0, "k": [5.0, 10.0, 20.0, 40.0], "p": [1.0, 2.0], "format": "csv"},
    "bhi-deficit": {"s": 1.0, "t": 0.5, "k": [6.0, 10.0], "format": "csv"},
    "bhi-pw": {"s": 1.0, "t": 0.5, "k": [4.0, 6.0, 8.0], "p": [4.0], "weight": "power:1", "format": "csv"},
    "bhi-ew": {"s": 1.0, "t": 0.5, "k": [4.0, 6.0, 8.0], "p": [4.0], "weight": "invgauss:1", "format": "csv"},
    "bhi-optimizer-check": {"format": "csv"},
    "fixtures-regen": {"out": os.path.join("tests", "fixtures"), "format": "json"},
}


def build_config(args: argparse.Namespace, file_cfg: Optional[dict] = None) -> ExperimentConfig:
    """Defaults, then the JSON config file, then explicit flags."""
    cmd = args.command
    merged = dict(_DEFAULTS.get(cmd, {}))
    file_cfg = dict(file_cfg or {})
    for key in list(file_cfg):
        norm = key.replace("-", "_")
        if norm not in _FIELDS:
            raise ConfigError(f"config file: unknown field {key!r}")
        merged[norm] = file_cfg[key]
    for key in _FIELDS:
        val = getattr(args, key, None)
        if val is not None:
            merged[key] = val

    cfg = ExperimentConfig(cmd)
    cfg.suite = getattr(args, "suite", None)
    cfg.s = _number("s", merged.get("s"))
    cfg.t = _number("t", merged.get("t"))
    cfg.M = _number("M", merged.get("M"))
    cfg.b = _float_list("b", merged.get("b"))
    cfg.k = _float_list("k", merged.get("k"))
    cfg.p = _float_list("p", merged.get("p"))
    if merged.get("weight") is not None:
        try:
            cfg.weight = (merged["weight"] if isinstance(merged["weight"], WeightSpec)
                          else WeightSpec.parse(str(merged["weight"])))
        except ValueError as exc:
            raise ConfigError(f"--weight: {exc}") from None
    cfg.grid_n = _number("grid-n", merged.get("grid_n", cfg.grid_n), int)
    cfg.tol_abs = _number("tol-abs", merged.get("tol_abs", cfg.tol_abs))
    cfg.tol_rel = _number("tol-rel", merged.get("tol_rel", cfg.tol_rel))
    cfg.out = merged.get("out")
    cfg.format = str(merged.get("format", "json"))
    cfg.workers = _number("workers", merged.get("workers", 1), int)
    validate(cfg)
    return cfg


_FIELDS = ("s", "t", "M", "b", "k", "p", "weight", "grid_n", "tol_abs", "tol_rel", "out", "format", "workers")


def validate(cfg: ExperimentConfig) -> None:
    if cfg.format not in ("csv", "json"):
        raise ConfigError(f"--format: expected csv or json, got {cfg.format!r}")
    if cfg.s is not None and not cfg.s > 0:
        raise ConfigError(f"--s: must be > 0, got {cfg.s}")
    if cfg.t is not None and not cfg.t > 0:
        raise ConfigError(f"--t: must be > 0, got {cfg.t}")
    if cfg.M is not None and not cfg.M > 1:
        raise ConfigError(f"--M: must be > 1, got {cfg.M}")
    if cfg.command == "heavytail":
        if any(not k >= 1 for k in cfg.k):
            raise ConfigError("--k: heavy-tail family needs every k >= 1")
    elif cfg.command not in ("example-gb", "bhi-optimizer-check", "fixtures-regen"):
        if any(not (k >= 2 and math.isfinite(k)) for k in cfg.k):
            raise ConfigError("--k: bump family needs every k >= 2 and finite")
    if any(not math.isfinite(b) for b in cfg.b):
        raise ConfigError("--b: values must be finite")
    if any(not p > 0 for p in cfg.p):
        raise ConfigError("--p: values must be > 0")
    if cfg.command in ("bhi-pw", "bhi-ew") and any(p < 1 for p in cfg.p):
        raise ConfigError("--p: distances need p >= 1")
    if cfg.grid_n < 16 or cfg.grid_n & (cfg.grid_n - 1):
        raise ConfigError(f"--grid-n: must be a power of two >= 16, got {cfg.grid_n}")
    if not (cfg.tol_abs > 0 and cfg.tol_rel > 0):
        raise ConfigError("--tol-abs/--tol-rel: must be > 0")
    if cfg.workers < 1:
        raise ConfigError("--workers: must be >= 1")
    if cfg.command == "instability" and cfg.suite not in SUITES:
        raise ConfigError(f"suite: expected one of {', '.join(SUITES)}, got {cfg.suite!r}")


# result container ------------------------------------------------------------------------

@dataclass
class RunResult:
    header: List[str]
    rows: List[list]
    payload: dict
    passed: bool

    def render(self, fmt: str) -> str:
        if fmt == "csv":
            return rows_to_csv(self.header, sorted(self.rows, key=_row_key))
        return dumps_json(self.payload) + "\n"


def _row_key(row):
    return tuple((0, v) if isinstance(v, (int, float)) else (1, str(v)) for v in row)


def _pool_map(fn: Callable, jobs: Sequence, workers: int) -> list:
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as ex:
            return list(ex.map(fn, jobs))
    return [fn(j) for j in jobs]


# commands -----------------------------------------------------------------------------------

def run_theorem1(cfg: ExperimentConfig) -> RunResult:
    rep = verify_theorem1(cfg.s, cfg.t, cfg.k, cfg.p, cfg.quad, cfg.workers)
    keys = sorted({key for r in rep.sequence for key in r})
    rows = [[r.get(key) for key in keys] for r in rep.sequence]
    return RunResult(keys, rows, rep.to_dict(), rep.passed)


def run_example_gb(cfg: ExperimentConfig) -> RunResult:
    rows, checks = [], []
    for b in cfg.b:
        rep = compute_report(make_shifted_gaussian(b), (2,), (), cfg.quad)
        m2 = float(rep.moments[2.0])
        errs = [abs(rep.I - b * b), abs(rep.H - b * b / 2), abs(rep.delta), abs(m2 - (1 + b * b))]
        ok = max(errs) <= 1e-10
        rows.append([b, rep.I, rep.H, rep.delta, m2, max(errs), ok])
        checks.append({"b": b, "I": rep.I, "H": rep.H, "delta": rep.delta, "m2": m2,
                       "max_error": max(errs), "pass": ok})
    header = ["b", "I", "H", "delta", "m2", "max_error", "pass"]
    passed = all(c["pass"] for c in checks)
    return RunResult(header, rows, {"command": "example-gb", "tolerance": 1e-10, "rows": checks, "pass": passed},
                     passed)


def heavytail_row(k: float, cfg: QuadratureConfig) -> dict:
    f = make_heavytail_family(k)
    hi = min(k, 50.0)
    xs = np.concatenate([np.linspace(0.0, hi, 20001), [1.0]])
    inf_f = float(np.exp(np.min(f.log_eval(xs))))
    m2 = moment(f, 2.0, cfg)
    return {"k": k, "C": f.params.C, "C_literal": f.params.C_literal, "inf_f": inf_f,
            "m2": m2.to_dict() if isinstance(m2, Divergent) else m2}


def run_heavytail(cfg: ExperimentConfig, alpha: float = 0.5) -> RunResult:
    ks = sorted(cfg.k)
    rows = [heavytail_row(k, cfg.quad) for k in ks]
    limit = heavytail_row(math.inf, cfg.quad)
    cs = [r["C"] for r in rows]
    gaps = [abs(c - 1) for c in cs]
    claims = {
        "C_in_(0,2)": all(0 < c < 2 for c in cs),
        "C_gap_decreasing": all(a > b for a, b in zip(gaps, gaps[1:])),
        "inf_f_ge_alpha": all(r["inf_f"] >= alpha for r in rows + [limit]),
        "m2_divergent_in_limit": isinstance(limit["m2"], dict) and limit["m2"].get("divergent", False),
    }
    header = ["k", "C", "C_literal", "inf_f", "m2"]
    table = [[r["k"], r["C"], r["C_literal"], r["inf_f"],
              "divergent" if isinstance(r["m2"], dict) else r["m2"]] for r in rows + [limit]]
    payload = {"command": "heavytail", "alpha": alpha, "rows": rows + [limit], "claims": claims,
               "pass": all(claims.values())}
    return RunResult(header, table, payload, all(claims.values()))


def run_instability(cfg: ExperimentConfig) -> RunResult:
    params = {}
    if cfg.M is not None:
        params["M"] = cfg.M
    if cfg.p:
        params["p"] = cfg.p[0]
    if cfg.k:
        params["k"] = cfg.k
    rep = verify_instability_suite(cfg.suite, params, cfg.quad, cfg.workers)
    keys = sorted({key for r in rep.sequence for key in r})
    rows = [[r.get(key) for key in keys] for r in rep.sequence]
    return RunResult(keys, rows, rep.to_dict(), rep.passed)


def hwi_row(job) -> dict:
    s, t, k, ps, quad = job
    f = make_bump_family(s, t, k)
    tr = hwi_chain(f, ps, quad)
    checks = {
        "delta_nonneg": tr.delta >= -1e-9,
        "tal_nonneg": tr.delta_tal >= -1e-9,
        "hwi_chain": tr.chain_holds(1e-8),
        "pinsker": pinsker_check(f, quad).holds,
        "entropy_l2": entropy_lp_bound_check(f, 2.0, quad).holds,
    }
    for p in ps:
        checks[f"sandwich_p{p:g}"] = moment_sandwich_check(f, p, quad).holds
    return {"k": k, "report": tr.to_dict(), "rows": tr.csv_rows(), "checks": checks}


def run_hwi_chain(cfg: ExperimentConfig) -> RunResult:
    jobs = [(cfg.s, cfg.t, k, tuple(cfg.p), cfg.quad) for k in sorted(cfg.k)]
    out = _pool_map(hwi_row, jobs, cfg.workers)
    rows = [row + [all(o["checks"].values())] for o in out for row in o["rows"]]
    header = ["s", "t", "k", "p", "W_p", "delta_tal", "delta", "hwi_fisher", "hwi_entropy", "tal_ratio", "pass"]
    passed = all(all(o["checks"].values()) for o in out)
    return RunResult(header, rows, {"command": "hwi-chain", "points": out, "pass": passed}, passed)


def bhi_row(job) -> dict:
    s, t, k, n, quad = job
    f = make_bump_family(s, t, k)
    rem = fourier_wiener_remainder(f, n, cfg=quad)
    return {"s": s, "t": t, "k": k, "delta": rem.delta, "delta_bh": rem.delta_bh, "remainder": rem.remainder,
            "identity_residual": rem.identity_residual}


def run_bhi_deficit(cfg: ExperimentConfig) -> RunResult:
    jobs = [(cfg.s, cfg.t, k, cfg.grid_n, cfg.quad) for k in sorted(cfg.k)]
    out = _pool_map(bhi_row, jobs, cfg.workers)
    header = ["s", "t", "k", "delta", "delta_bh", "remainder", "identity_residual"]
    rows = [[o[h] for h in header] for o in out]
    passed = all(abs(o["identity_residual"]) <= 5e-6 and o["delta_bh"] >= -1e-6 for o in out)
    return RunResult(header, rows, {"command": "bhi-deficit", "rows": out, "pass": passed}, passed)


def distance_row(job) -> dict:
    s, t, k, p, weight, quad = job
    h = lsi_to_bhi_transform(make_bump_family(s, t, k))
    d = dist_to_optimizers(h, p, weight, cfg=quad)
    return {"s": s, "t": t, "k": k, "p": p, "weight_kind": weight.kind, "weight_param": weight.param, **d.to_dict()}


def run_bhi_distance(cfg: ExperimentConfig, floor: float = 0.1) -> RunResult:
    jobs = [(cfg.s, cfg.t, k, p, cfg.weight, cfg.quad) for k in sorted(cfg.k) for p in sorted(cfg.p)]
    out = _pool_map(distance_row, jobs, cfg.workers)
    header = ["s", "t", "k", "p", "weight_kind", "weight_param", "ratio", "a", "r", "log_distance",
              "log_h_norm", "bracket_ok"]
    rows = [[o[h] for h in header] for o in out]
    passed = all(o["ratio"] >= floor for o in out)
    payload = {"command": cfg.command, "floor": floor, "rows": out, "pass": passed}
    return RunResult(header, rows, payload, passed)


def optimizer_row(job) -> dict:
    a, r, n = job
    res = bhi_deficit(optimizer_profile(a, r), n)
    return {"a": a, "r": r, "delta_bh": res.delta, "n": res.n, "plancherel_error": res.plancherel_error}


def run_bhi_optimizer_check(cfg: ExperimentConfig) -> RunResult:
    jobs = [(a, r, cfg.grid_n) for a in OPT_GRID_A for r in OPT_GRID_R]
    out = _pool_map(optimizer_row, jobs, cfg.workers)
    header = ["a", "r", "delta_bh", "n", "plancherel_error"]
    rows = [[o[h] for h in header] for o in out]
    worst = max(abs(o["delta_bh"]) for o in out)
    passed = worst <= 1e-6
    return RunResult(header, rows, {"command": "bhi-optimizer-check", "max_abs_delta_bh": worst,
                                    "rows": out, "pass": passed}, passed)


def regenerate_fixtures(out_dir: str, quad: Optional[QuadratureConfig] = None) -> Dict[str, str]:
    """Write the regression fixtures; returns {name: path}."""
    quad = quad or QuadratureConfig()
    os.makedirs(out_dir, exist_ok=True)
    fixtures = {}
    bumps = []
    for s, t, k in ((1.0, 2.0, 10.0), (1.0, 2.0, 80.0), (1.0, 0.5, 10.0), (1.0, 0.5, 40.0)):
        rep = compute_report(make_bump_family(s, t, k), (1, 2, 3), (1, 2), quad)
        bumps.append(rep.to_dict())
    fixtures["bump_functionals"] = bumps
    fixtures["heavytail"] = [heavytail_row(k, quad) for k in (2.0, 5.0, 10.0, 20.0)]
    lemma = []
    for a in (2 * math.pi, 4 * math.pi, 8 * math.pi, 16 * math.pi, 32 * math.pi, 64 * math.pi):
        n = truncated_gaussian_norm(a, 0.5, 4.0, 1.0)
        lemma.append({"a": a, "ratio": float(n) / a ** (2.0 / 16.0)})
    vals = [e["ratio"] for e in lemma]
    fixtures["lemma_truncated_norm"] = {"p": 4.0, "theta": 1.0, "w": 0.5, "points": lemma,
                                        "c1": min(vals), "c2": max(vals)}
    norms = []
    for k in range(3, 11):
        h = lsi_to_bhi_transform(make_bump_family(1.0, 0.5, float(k)))
        norms.append({"k": k, "log_norm": weighted_lp_norm(h, 4.0, WeightSpec("invgauss", 1.0), quad).log_abs})
    fixtures["invgauss_log_norms"] = norms
    paths = {}
    for name, data in fixtures.items():
        path = os.path.join(out_dir, f"{name}.json")
        with open(path, "w") as fh:
            fh.write(dumps_json(data) + "\n")
        paths[name] = path
    return paths


def run_fixtures_regen(cfg: ExperimentConfig) -> RunResult:
    paths = regenerate_fixtures(cfg.out, cfg.quad)
    rows = [[name, path] for name, path in sorted(paths.items())]
    cfg.out = None  # the directory is the artifact; the summary goes to stdout
    return RunResult(["fixture", "path"], rows, {"command": "fixtures-regen", "written": paths, "pass": True}, True)


RUNNERS = {
    "theorem1": run_theorem1,
    "example-gb": run_example_gb,
    "heavytail": run_heavytail,
    "instability": run_instability,
    "hwi-chain": run_hwi_chain,
    "bhi-deficit": run_bhi_deficit,
    "bhi-pw": run_bhi_distance,
    "bhi-ew": run_bhi_distance,
    "bhi-optimizer-check": run_bhi_optimizer_check,
    "fixtures-regen": run_fixtures_regen,
}


# argument parsing --------------------------------------------------------------------------

class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ConfigError(message)


def _add_common(sp: argparse.ArgumentParser) -> None:
    sp.add_argument("--config", help="JSON file with any of the flag values; flags win")
    sp.add_argument("--s", type=float)
    sp.add_argument("--t", type=float)
    sp.add_argument("--M", type=float)
    sp.add_argument("--b", help="comma-separated tilts, e.g. 0.5,1,2")
    sp.add_argument("--k", help="comma-separated grid, e.g. 5,7,10")
    sp.add_argument("--p", help="comma-separated exponents, e.g. 1,2,4")
    sp.add_argument("--weight", help="lebesgue | power:LAMBDA | invgauss:THETA")
    sp.add_argument("--grid-n", dest="grid_n", type=int, help="FFT grid size (power of two)")
    sp.add_argument("--tol-abs", dest="tol_abs", type=float)
    sp.add_argument("--tol-rel", dest="tol_rel", type=float)
    sp.add_argument("--out", help="output path (default stdout)")
    sp.add_argument("--format", choices=("csv", "json"))
    sp.add_argument("--workers", type=int, help="worker processes for sweeps")


def make_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="lsi-instability", description="Numerical checks of log-Sobolev instability results.",
                     epilog=list_commands(), formatter_class=argparse.RawDescriptionHelpFormatter)
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", metavar="command")
    for name, desc in COMMANDS.items():
        sp = sub.add_parser(name, help=desc, description=desc)
        if name == "instability":
            sp.add_argument("suite", help=" | ".join(SUITES))
        _add_common(sp)
    return parser


def _load_config_file(path: Optional[str]) -> dict:
    if not path:
        return {}
    try:
        with open(path) as fh:
            data = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"--config: cannot read {path}: {exc.strerror}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"--config: {path} is not valid JSON ({exc.msg} at line {exc.lineno})") from None
    if not isinstance(data, dict):
        raise ConfigError("--config: top level must be an object")
    return data


def _suggest(cmd: str) -> str:
    close = difflib.get_close_matches(cmd, list(COMMANDS), n=1)
    return f" Did you mean {close[0]!r}?" if close else ""


def main(argv: Optional[Sequence[str]] = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    if not argv:
        print(list_commands())
        return 0
    first = argv[0]
    if not first.startswith("-") and first not in COMMANDS:
        print(f"error: unknown command {first!r}.{_suggest(first)}", file=sys.stderr)
        print(list_commands(), file=sys.stderr)
        return 1
    try:
        args = make_parser().parse_args(argv)
        if args.command is None:
            print(list_commands())
            return 0
        cfg = build_config(args, _load_config_file(args.config))
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    try:
        result = RUNNERS[cfg.command](cfg)
        text = result.render(cfg.format)
        if cfg.out:
            with open(cfg.out, "w", newline="") as fh:
                fh.write(text)
        else:
            sys.stdout.write(text)
    except Exception as exc:  # noqa: BLE001 - any computation failure maps to exit 1
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    return 0 if result.passed else 2


if __name__ == "__main__":
    sys.exit(main())
