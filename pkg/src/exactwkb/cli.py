"""Command line driver.

Subcommands: ``formal``, ``trace``, ``resum``, ``validate`` and ``problems list``.
Exit codes: 0 ok, 1 acceptance failure, 2 config error, 3 numeric failure.
"""
from __future__ import annotations

import argparse
import json
import math
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .borel import BorelDivergenceError, flow_grid, standard_form, tau_recursion
from .coeffield import FieldError, PoleError
from .formal import ProblemSpec, evaluate_coeffs, formal_wkb, gevrey_probe, wkb_recursion
from .geometry import GeometryError, LiouvilleFrame, trace_both
from .grammar import CoeffSyntaxError, NonPolynomialError
from .io import write_csv, write_json
from .laplace import BorelDiscError, ExactSolution, TailBoundError, monodromy, wronskian
from .problems import builtin, catalog, catalog_entry, check_fixtures, from_strings, UnknownProblemError
from .validate import StiffnessError, compare_exact, monodromy_eigen, riccati_residual_check

EXIT_OK, EXIT_ACCEPTANCE, EXIT_CONFIG, EXIT_NUMERIC = 0, 1, 2, 3

NUMERIC_ERRORS = (BorelDivergenceError, BorelDiscError, TailBoundError, GeometryError, StiffnessError,
                  FieldError, PoleError, ArithmeticError, np.linalg.LinAlgError)


class ConfigError(ValueError):
    pass


_DEFAULT_TOL = {"tol_term": 1e-12, "laplace_tol": None, "compare": 1e-5, "riccati": 1e-6,
                "monodromy": 1e-4, "closure": 1e-6}


@dataclass
class RunConfig:
    problem: dict
    x0: complex
    theta: float = 0.0
    theta_minus: float | None = None
    alphas: tuple = (1, -1)
    order: int = 12
    xi_n: int = 160
    xi_max: float | None = None
    xi_factor: float = 35.0
    hbar: list = field(default_factory=lambda: [0.1])
    x_samples: list = field(default_factory=list)
    thetas: list = field(default_factory=list)
    tolerances: dict = field(default_factory=lambda: dict(_DEFAULT_TOL))
    trace: dict = field(default_factory=dict)
    monodromy: dict | None = None
    seed: int = 0
    out: str = "exactwkb_out"
    raw: dict = field(default_factory=dict)

    def spec(self) -> ProblemSpec:
        pr = self.problem
        if "name" in pr:
            return builtin(pr["name"], **pr.get("params", {}))
        return from_strings(pr["p"], pr["q"], pr.get("label", "custom"))


def _cnum(v, name):
    if isinstance(v, (int, float, complex)):
        return complex(v)
    if isinstance(v, (list, tuple)) and len(v) == 2 and all(isinstance(t, (int, float)) for t in v):
        return complex(v[0], v[1])
    if isinstance(v, str):
        try:
            return complex(v.replace(" ", "").replace("i", "j"))
        except ValueError:
            pass
    raise ConfigError(f"field {name!r}: expected a number, [re, im] or a complex string, got {v!r}")


def _samples(v, name):
    if isinstance(v, dict):
        try:
            a, b = _cnum(v["start"], name + ".start"), _cnum(v["stop"], name + ".stop")
            return list(a + (b - a) * np.linspace(0, 1, int(v.get("num", 11))))
        except KeyError as e:
            raise ConfigError(f"field {name!r} needs start/stop") from e
    if isinstance(v, (list, tuple)):
        return [_cnum(t, name) for t in v]
    return [_cnum(v, name)]


def _tau_max(section: dict) -> float:
    v = section.get("tau_max")
    return math.inf if v is None else float(v)


def load_config(data: dict) -> RunConfig:
    if not isinstance(data, dict):
        raise ConfigError("config must be a JSON object")
    if "problem" not in data:
        raise ConfigError("missing field 'problem'")
    pr = data["problem"]
    if isinstance(pr, str):
        pr = {"name": pr}
    if not isinstance(pr, dict) or not ("name" in pr or ("p" in pr and "q" in pr)):
        raise ConfigError("field 'problem' needs 'name' or both 'p' and 'q'")
    if "x0" not in data:
        raise ConfigError("missing field 'x0'")
    tol = dict(_DEFAULT_TOL)
    tol.update(data.get("tolerances", {}))
    for k, v in tol.items():
        if v is not None and not (isinstance(v, (int, float)) and v > 0):
            raise ConfigError(f"field 'tolerances.{k}' must be positive")
    xi = data.get("xi", {})
    alphas = data.get("alpha", [1, -1])
    alphas = tuple(alphas) if isinstance(alphas, (list, tuple)) else (alphas,)
    if any(a not in (1, -1) for a in alphas):
        raise ConfigError("field 'alpha' must be 1, -1 or a list of them")
    cfg = RunConfig(
        problem=pr, x0=_cnum(data["x0"], "x0"), theta=float(data.get("theta", 0.0)),
        theta_minus=None if data.get("theta_minus") is None else float(data["theta_minus"]),
        alphas=alphas, order=int(data.get("order", 12)), xi_n=int(xi.get("n", 160)),
        xi_max=None if xi.get("max") is None else float(xi["max"]), xi_factor=float(xi.get("factor", 35.0)),
        hbar=_samples(data.get("hbar", [0.1]), "hbar"), x_samples=_samples(data.get("x_samples", []), "x_samples"),
        thetas=[float(t) for t in data.get("thetas", [])], tolerances=tol, trace=dict(data.get("trace", {})),
        monodromy=data.get("monodromy"), seed=int(data.get("seed", 0)), out=str(data.get("out", "exactwkb_out")),
        raw=data)
    if cfg.order < 2:
        raise ConfigError("field 'order' must be >= 2")
    if cfg.xi_n < 2:
        raise ConfigError("field 'xi.n' must be >= 2")
    try:
        spec = cfg.spec()
    except (UnknownProblemError, CoeffSyntaxError, NonPolynomialError, ValueError, TypeError) as e:
        raise ConfigError(f"field 'problem': {e}") from e
    try:
        if complex(spec.d0(cfg.x0)) == 0:
            raise ConfigError(f"field 'x0': {cfg.x0} is a turning point")
    except PoleError as e:
        raise ConfigError(f"field 'x0': {e}") from e
    return cfg


def _build_config(args) -> RunConfig:
    data: dict = {}
    if args.config:
        try:
            data = json.loads(Path(args.config).read_text())
        except (OSError, json.JSONDecodeError) as e:
            raise ConfigError(f"cannot read config {args.config}: {e}") from e
    if getattr(args, "problem", None):
        entry = catalog_entry(args.problem)
        data.setdefault("problem", {"name": args.problem})
        data.setdefault("x0", [entry.x0.real, entry.x0.imag])
        data.setdefault("theta", entry.theta)
        if entry.theta_minus is not None:
            data.setdefault("theta_minus", entry.theta_minus)
        lo, hi = entry.region
        if isinstance(lo, (int, float)) and isinstance(hi, (int, float)):
            data.setdefault("x_samples", {"start": lo, "stop": hi, "num": 11})
    if args.theta is not None:
        data["theta"] = args.theta[0]
        data["thetas"] = args.theta
    if args.hbar is not None:
        data["hbar"] = args.hbar
    if args.order is not None:
        data["order"] = args.order
    if args.xi_max is not None or args.xi_n is not None:
        xi = dict(data.get("xi", {}))
        if args.xi_max is not None:
            xi["max"] = args.xi_max
        if args.xi_n is not None:
            xi["n"] = args.xi_n
        data["xi"] = xi
    if args.out is not None:
        data["out"] = args.out
    return load_config(data)


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------

def _solution(cfg: RunConfig, spec, roots=None) -> ExactSolution:
    return ExactSolution(spec, cfg.x0, theta=cfg.theta, theta_minus=cfg.theta_minus, roots=roots, order=2,
                         n=cfg.xi_n, xi_max=cfg.xi_max, xi_factor=cfg.xi_factor,
                         laplace_tol=cfg.tolerances.get("laplace_tol"))


def cmd_formal(cfg: RunConfig, out: Path) -> int:
    spec = cfg.spec()
    roots = wkb_recursion(spec, cfg.order)
    payload = {"problem": spec.describe() if hasattr(spec, "describe") else spec.name, "coefficients": roots.to_json()}
    prov = {}
    if "name" in cfg.problem:
        fx = check_fixtures(catalog_entry(cfg.problem["name"]), roots)
        payload["fixtures"] = fx
        prov = {k: v["provenance"] for k, v in fx.items()}
    write_json(out / "coeffs.json", payload, cfg.raw, "formal", prov)
    xs = cfg.x_samples or [cfg.x0]
    frame = LiouvilleFrame(spec, cfg.x0, 1, cfg.theta)
    wkb = formal_wkb(roots, frame, xs, 1)
    fit = gevrey_probe(wkb)
    rows = [(k, float(s), float(np.log(s) - math.lgamma(k + 1)) if s > 0 else float("nan"))
            for k, s in enumerate(fit.sup_norms)]
    write_csv(out / "gevrey.csv", ["k", "sup_abs_Psi_k", "log_sup_over_k_factorial"], rows, cfg.raw, "gevrey")
    return EXIT_OK


def cmd_trace(cfg: RunConfig, out: Path) -> int:
    spec = cfg.spec()
    thetas = cfg.thetas or [cfg.theta]
    x_start = _cnum(cfg.trace.get("x_start", [cfg.x0.real, cfg.x0.imag]), "trace.x_start")
    kw = {"tau_max": _tau_max(cfg.trace), "closure_tol": cfg.tolerances["closure"]}
    report = {"x_start": x_start, "trajectories": []}
    for i, th in enumerate(thetas):
        frame = LiouvilleFrame(spec, cfg.x0, 1, th)
        tr = trace_both(frame, x_start, th, **kw)
        for half, tag in ((tr.plus, "plus"), (tr.minus, "minus")):
            write_csv(out / f"trajectory_{i}_{tag}.csv", ["tau", "re_x", "im_x", "re_z", "im_z", "status"],
                      half.rows(), cfg.raw, "trajectory")
        report["trajectories"].append({
            "index": i, "theta": th, "status_plus": tr.status_plus, "status_minus": tr.status_minus,
            "period": tr.period, "tau_end_plus": tr.plus.tau_end, "tau_end_minus": tr.minus.tau_end,
            "end_plus": tr.plus.end.to_json() if tr.plus.end else None,
            "end_minus": tr.minus.end.to_json() if tr.minus.end else None})
    write_json(out / "report.json", report, cfg.raw, "trace")
    return EXIT_OK


def cmd_resum(cfg: RunConfig, out: Path) -> int:
    spec = cfg.spec()
    sol = _solution(cfg, spec)
    report: dict = {"theta": cfg.theta, "theta_minus": sol.minus.theta, "borel": {}}
    # convergence diagnostic of the term-by-term series at the basepoint
    for alpha in cfg.alphas:
        er = sol.root(alpha)
        Xi = er.grid_length(cfg.hbar[0])
        grid = flow_grid(sol.frame, cfg.x0, alpha, er.theta, Xi, cfg.xi_n)
        bf = tau_recursion(er.coeffs, grid, tol_term=cfg.tolerances["tol_term"])
        report["borel"][str(alpha)] = {k: v for k, v in bf.report.items()}
        if alpha == cfg.alphas[0]:
            write_csv(out / "borel.csv", ["base_index", "re_x", "im_x", "dir_re", "dir_im", "abs_xi", "re_tau",
                                          "im_tau"], bf.rows(), cfg.raw, "borel")
    xs = cfg.x_samples or [cfg.x0]
    rows = []
    for hb in cfg.hbar:
        vals = {a: sol.psi_on(a, xs, hb) for a in cfg.alphas}
        for i, x in enumerate(xs):
            pp = vals.get(1, [np.nan] * len(xs))[i]
            pm = vals.get(-1, [np.nan] * len(xs))[i]
            tail = max(seg.tail for key, seg in sol._segments.items() if key[2] == complex(hb))
            row = [x.real, x.imag, hb.real, hb.imag, pp.real, pp.imag, pm.real, pm.imag, tail]
            if len(cfg.alphas) == 2:
                w = wronskian(sol, x, hb, (pp, pm))
                row += [w["normalized"].real, w["normalized"].imag]
            rows.append(row)
    cols = ["re_x", "im_x", "re_hbar", "im_hbar", "re_psi_plus", "im_psi_plus", "re_psi_minus", "im_psi_minus",
            "tail_bound"]
    if len(cfg.alphas) == 2:
        cols += ["re_hbar_W_over_psipsi", "im_hbar_W_over_psipsi"]
    write_csv(out / "solution.csv", cols, rows, cfg.raw, "solution")
    write_json(out / "report.json", report, cfg.raw, "resum")
    return EXIT_OK


def cmd_validate(cfg: RunConfig, out: Path) -> int:
    spec = cfg.spec()
    tol = cfg.tolerances
    report: dict = {"checks": []}
    ok = True
    if cfg.monodromy:
        mc = cfg.monodromy
        x_start = _cnum(mc.get("x_start", [cfg.x0.real, cfg.x0.imag]), "monodromy.x_start")
        frame = LiouvilleFrame(spec, x_start, 1, cfg.theta)
        tr = trace_both(frame, x_start, cfg.theta, tau_max=_tau_max(mc))
        entry = {"name": "monodromy", "status_plus": tr.status_plus, "period_tau": tr.period, "samples": []}
        if tr.status_plus != "complete_closed" or tr.period is None:
            entry["passed"] = False
            ok = False
        else:
            roots = wkb_recursion(spec, 2)
            sol = ExactSolution(spec, x_start, theta=cfg.theta, roots=roots, n=cfg.xi_n, xi_max=cfg.xi_max,
                                xi_factor=cfg.xi_factor)
            shift = _cnum(mc.get("shift", spec.period if spec.period is not None else 0), "monodromy.shift")
            worst = 0.0
            for hb in cfg.hbar:
                m = monodromy(sol.plus, x_start, tr.period, [hb])
                log_a = -complex(*m.loop["lambda_loop"]) / complex(hb) - m.loop_S[0]
                me = monodromy_eigen(spec, x_start, shift, hb)
                cand = [me["small"], me["large"]]
                ref = min(cand, key=lambda v: abs(np.log(abs(v)) - log_a.real))
                rel = abs(np.exp(log_a - np.log(ref)) - 1)
                worst = max(worst, rel)
                entry["samples"].append({"hbar": hb, "log_a_plus": log_a, "log_eigenvalue": np.log(ref),
                                         "rel_dev": rel, "det_check": me["forward"].det_check,
                                         "det_feasible": me["forward"].det_feasible})
            entry["max_rel_dev"] = worst
            entry["tolerance"] = tol["monodromy"]
            entry["passed"] = worst <= tol["monodromy"]
            ok &= entry["passed"]
        report["checks"].append(entry)
    if cfg.x_samples:
        sol = _solution(cfg, spec)
        cmp = compare_exact(sol, cfg.x_samples, cfg.hbar, cfg.alphas)
        cmp.update({"name": "compare_exact", "tolerance": tol["compare"], "passed": cmp["max_rel_dev"] <= tol["compare"]})
        ok &= cmp["passed"]
        report["checks"].append(cmp)
        xs = list(np.asarray(cfg.x_samples)[:: max(1, len(cfg.x_samples) // 5)])
        worst = 0.0
        for a in cfg.alphas:
            worst = max(worst, riccati_residual_check(spec, sol.root(a), xs, cfg.hbar)["max_residual"])
        ric = {"name": "riccati_residual", "max_residual": worst, "tolerance": tol["riccati"],
               "passed": worst <= tol["riccati"]}
        ok &= ric["passed"]
        report["checks"].append(ric)
    if not report["checks"]:
        raise ConfigError("nothing to validate: give 'x_samples' and/or 'monodromy'")
    report["passed"] = bool(ok)
    write_json(out / "report.json", report, cfg.raw, "validate")
    return EXIT_OK if ok else EXIT_ACCEPTANCE


def cmd_problems(out: Path | None) -> int:
    doc = [e.to_json() for e in catalog()]
    text = json.dumps(doc, indent=2)
    print(text)
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)
        (out / "problems.json").write_text(text + "\n")
    return EXIT_OK


# ---------------------------------------------------------------------------
# entry point
# ---------------------------------------------------------------------------

def _floats(text: str) -> list:
    return [float(t) for t in text.split(",") if t.strip()]


def _complexes(text: str) -> list:
    return [complex(t.strip().replace("i", "j")) for t in text.split(",") if t.strip()]


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON run configuration")
    common.add_argument("--problem", help="catalog problem (fills x0, theta and samples from the catalog)")
    common.add_argument("--out", help="output directory")
    common.add_argument("--theta", type=_floats, help="Borel direction(s), comma separated")
    common.add_argument("--hbar", type=_complexes, help="hbar sample(s), comma separated; complex as 0.1j")
    common.add_argument("--order", type=int, help="formal order K")
    common.add_argument("--xi-max", type=float, help="Borel grid length")
    common.add_argument("--xi-n", type=int, help="Borel grid intervals")
    p = argparse.ArgumentParser(prog="exactwkb", description="Exact WKB pipeline")
    sub = p.add_subparsers(dest="command", required=True)
    for name, helptext in (("formal", "formal WKB coefficients and Gevrey probe"),
                           ("trace", "WKB trajectories"), ("resum", "Borel resummation and exact solutions"),
                           ("validate", "compare against direct ODE oracles")):
        sub.add_parser(name, parents=[common], help=helptext)
    pl = sub.add_parser("problems", help="built-in problem catalog")
    pl.add_argument("action", choices=["list"])
    pl.add_argument("--out", help="also write problems.json here")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "problems":
            return cmd_problems(Path(args.out) if args.out else None)
        cfg = _build_config(args)
        out = Path(cfg.out)
        out.mkdir(parents=True, exist_ok=True)
        fn = {"formal": cmd_formal, "trace": cmd_trace, "resum": cmd_resum, "validate": cmd_validate}[args.command]
        return fn(cfg, out)
    except (ConfigError, UnknownProblemError) as e:
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except NUMERIC_ERRORS as e:
        print(f"numeric failure: {type(e).__name__}: {e}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
