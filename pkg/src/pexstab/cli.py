"""Batch front-end: run scenario files and emit JSON/CSV artifacts.

Exit status contract:

* 0 - scenario ran and every requested verification passed
* 1 - a verification failed (certificate violated, PE check negative,
      monotonicity or balance breached, measured ratio above its factor)
* 2 - schema or semantic violation in the scenario file (message carries
      the offending field's path)
* 3 - I/O failure (unreadable scenario, unwritable output directory)

Every JSON report embeds the tool version, the SHA-256 of the scenario file
bytes and the scenario seed; reruns of the same scenario are byte-identical.
Time series go to CSV (header ``t,V,damping_rate``), scan tables to CSV with
their own documented headers, everything else to JSON.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import math
import os
import sys

import numpy as np

from . import __version__
from .dalembert import (build_counterexample, energy_of_counterexample,
                        verify_damping_inert)
from .linsys import energy_balance, simulate
from .observability import (OuterSearch, SignalClass, class_constant,
                            kappa_scan, wave_pe_lower_bound)
from .scenario import Scenario, ScenarioError, build_intervals, parse_scenario
from .signals import from_intervals, pe_check
from .stability import (CertificateViolation, GateSignalFamily,
                        certificate_from_constant, interval_product_bound,
                        rho_class_criterion, verify_certificate)

OUT_ENV_VAR = "PEXSTAB_OUT"


def _jsonable(x):
    if isinstance(x, dict):
        return {k: _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, np.ndarray):
        return [_jsonable(v) for v in x.tolist()]
    if isinstance(x, (np.floating, float)):
        v = float(x)
        return v if math.isfinite(v) else repr(v)
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, (np.bool_,)):
        return bool(x)
    return x


def _write_json(path: str, payload: dict):
    text = json.dumps(_jsonable(payload), indent=2, sort_keys=True)
    with open(path, "w") as fh:
        fh.write(text + "\n")


def _write_csv(path: str, header: str, rows):
    with open(path, "w") as fh:
        fh.write(header + "\n")
        for row in rows:
            fh.write(",".join("%.17g" % float(v) for v in row) + "\n")


def _unit_z0(spec, dim: int, seed: int, index: int) -> np.ndarray:
    if spec is None or spec == "random":
        rng = np.random.default_rng((seed, index))
        z0 = rng.standard_normal(dim)
        return z0 / np.linalg.norm(z0)
    z0 = np.asarray(spec, dtype=float)
    if z0.shape != (dim,):
        raise ScenarioError("analyses[%d].z0" % index,
                            "expected %d components, got %d" % (dim, z0.size))
    n = np.linalg.norm(z0)
    if n == 0:
        raise ScenarioError("analyses[%d].z0" % index, "must be nonzero")
    return z0


def _outer_from(params: dict, default_seed: int) -> OuterSearch:
    if not params:
        return OuterSearch(seed=default_seed)
    return OuterSearch(n_starts=params.get("n_starts", 8),
                       n_iters=params.get("n_iters", 100),
                       seed=params.get("seed", default_seed))


def _sclass_from(params: dict) -> SignalClass:
    if params["kind"] == "rho-integral":
        return SignalClass.rho_integral(params["rho"], params["horizon"])
    return SignalClass.pe_windows(params["T"], params["mu"], params["horizon"])


def _run_simulate(sc: Scenario, a: dict, i: int):
    z0 = _unit_z0(a.get("z0"), sc.system.dim, sc.seed, i)
    traj = simulate(sc.system, sc.signal, z0, sc.horizon, sc.dt_out)
    balance = energy_balance(traj)
    monotone_tol = a.get("monotone_tol", 1e-9)
    balance_tol = a.get("balance_tol", 1e-5)
    V = traj.energies
    rises = np.diff(V)
    worst_rise = float(max(0.0, np.max(rises))) if len(rises) else 0.0
    monotone_ok = worst_rise <= monotone_tol * max(1.0, float(V[0]))
    balance_ok = abs(balance.residual) <= balance_tol
    report = {
        "z0": z0,
        "samples": len(V),
        "V_start": float(V[0]),
        "V_end": float(V[-1]),
        "worst_energy_rise": worst_rise,
        "monotone_tol": monotone_tol,
        "monotone_ok": monotone_ok,
        "balance_residual": balance.residual,
        "balance_one_sided": balance.one_sided,
        "balance_tol": balance_tol,
        "balance_ok": balance_ok,
        "caveats": list(sc.system.caveats),
    }
    rows = zip(traj.times, traj.energies, traj.damping_rates)
    return report, monotone_ok and balance_ok, ("t,V,damping_rate", rows)


def _run_check_pe(sc: Scenario, a: dict, i: int):
    rep = pe_check(sc.signal, a["T"], a["mu"], sc.horizon,
                   tolerance=a.get("tolerance", 0.0))
    return rep.to_dict(), rep.holds, None


def _run_counterexample(sc: Scenario, a: dict, i: int):
    omega = tuple(a["omega"])
    periods = a.get("periods", 3)
    cx = build_counterexample(omega, n_periods=periods)
    inert = verify_damping_inert(cx)
    times = np.linspace(0.0, periods * cx.period, 64 * periods + 1)
    energies = np.array([energy_of_counterexample(cx, t) for t in times])
    drift = float(np.max(np.abs(energies - energies[0])) / energies[0])
    report = inert.to_dict()
    report["energy_drift"] = drift
    report["omega"] = list(omega)
    report["n_periods"] = periods
    ok = bool(inert.ok and drift <= a.get("drift_tol", 1e-8))
    rows = zip(times, energies, np.zeros(len(times)))
    return report, ok, ("t,V,damping_rate", rows)


def _run_observability(sc: Scenario, a: dict, i: int):
    sclass = _sclass_from(a["class"])
    outer = _outer_from(a.get("outer"), sc.seed)
    est = class_constant(sc.system, sclass, a.get("n_cells", 64), outer)
    d = est.to_dict()
    report = {
        "c": d.pop("constant"),
        "witness_z0": d.pop("witness_z0"),
        "witness_signal": d.pop("witness_signal"),
        "grid": d.pop("grid"),
        "seed": d.pop("seed"),
    }
    report.update(d)
    return report, True, None


def _run_kappa_scan(sc: Scenario, a: dict, i: int):
    outer = _outer_from(a.get("outer"), sc.seed)
    rep = kappa_scan(sc.system, a["rho"], a["T_grid"], a.get("n_cells", 64), outer)
    rows = zip(rep.T_grid, rep.constants)
    return rep.to_dict(), True, ("T,c", rows)


def _run_certify(sc: Scenario, a: dict, i: int):
    if "constant" in a and a["constant"] is not None:
        c = float(a["constant"])
        source = "explicit"
    else:
        src = a["source"]
        if src["kind"] == "wave-pe":
            c = wave_pe_lower_bound(src["T"], src["mu"], src["lambda_min"],
                                    src.get("d0", 1.0))
            source = "analytic wave bound (T=%g, mu=%g)" % (src["T"], src["mu"])
        else:
            sclass = _sclass_from(src["class"])
            est = class_constant(sc.system, sclass, src.get("n_cells", 64),
                                 OuterSearch(seed=sc.seed))
            c = est.constant
            source = "numerical class constant (%s)" % est.method
    cert = certificate_from_constant(c, a["theta"], sc.system.b_norm, source=source)
    report = {"certificate": cert.to_dict(), "caveats": list(sc.system.caveats)}
    ok = True
    verify = a.get("verify")
    if verify is not None:
        family = GateSignalFamily(
            T=verify["T"], mu=verify["mu"],
            horizon=verify.get("horizon", 50.0 * cert.theta), seed=sc.seed)
        try:
            check = verify_certificate(sc.system, cert, family,
                                       n_trials=verify.get("n_trials", 20))
            report["verification"] = check.to_dict()
        except CertificateViolation as e:
            report["verification"] = e.report.to_dict()
            report["verification"]["violation"] = str(e)
            ok = False
    return report, ok, None


def _run_strong_stability(sc: Scenario, a: dict, i: int):
    seq = build_intervals(a["intervals"], "analyses[%d].intervals" % i)
    level = a.get("level", 1.0)
    signal = from_intervals(seq, level)
    z0 = _unit_z0(a.get("z0", "random"), sc.system.dim, sc.seed, i)
    costs = a.get("costs")
    rep = interval_product_bound(sc.system, seq, signal=signal, costs=costs, z0=z0)
    report = {"product_bound": rep.to_dict()}
    ok = rep.ok
    crit = a.get("criterion")
    if crit is not None:
        cost = crit["cost"]
        if cost["kind"] == "wave-cubic":
            rho_, lam = cost["rho"], cost["lambda1"]
            d0 = cost.get("d0", 1.0)
            c_of_T = lambda L: d0 * d0 * rho_ ** 3 * lam ** 2 * L ** 3 / 72.0
        elif cost["kind"] == "exp-gap":
            c_of_T = lambda L: math.exp(-2.0 / L)
        else:
            ts, cs = cost["T"], cost["c"]
            c_of_T = lambda L: float(np.interp(L, ts, cs))
        crit_rep = rho_class_criterion(seq, c_of_T, crit["T0"])
        report["criterion"] = crit_rep.to_dict()
    rows = [(n, rep.factors[n], rep.cumulative[n],
             rep.measured_ratios[n] if rep.measured_ratios else float("nan"))
            for n in range(len(rep.factors))]
    return report, ok, ("n,factor,cumulative_bound,measured_ratio", rows)


_RUNNERS = {
    "simulate": _run_simulate,
    "check-pe": _run_check_pe,
    "counterexample": _run_counterexample,
    "observability": _run_observability,
    "kappa-scan": _run_kappa_scan,
    "certify": _run_certify,
    "strong-stability": _run_strong_stability,
}


def _load_scenario(path: str):
    try:
        with open(path, "rb") as fh:
            raw = fh.read()
    except OSError as e:
        print("pexstab: cannot read %s: %s" % (path, e), file=sys.stderr)
        return None, None, 3
    try:
        doc = json.loads(raw.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as e:
        print("pexstab: %s: not valid JSON: %s" % (path, e), file=sys.stderr)
        return None, None, 2
    try:
        sc = parse_scenario(doc)
    except ScenarioError as e:
        print("pexstab: %s: %s" % (path, e), file=sys.stderr)
        return None, None, 2
    return sc, hashlib.sha256(raw).hexdigest(), 0


def _resolve_out(arg_out: str) -> str:
    return arg_out or os.environ.get(OUT_ENV_VAR) or "."


def run_scenario(path: str, out_dir: str, parallel: bool = False,
                 only_kind: str = None) -> int:
    sc, digest, status = _load_scenario(path)
    if status:
        return status
    jobs = [(i, a) for i, a in enumerate(sc.analyses)
            if only_kind is None or a["kind"] == only_kind]
    if not jobs:
        print("pexstab: %s: no %r analysis in scenario" % (path, only_kind),
              file=sys.stderr)
        return 2
    try:
        os.makedirs(out_dir, exist_ok=True)
    except OSError as e:
        print("pexstab: cannot create output directory %s: %s" % (out_dir, e),
              file=sys.stderr)
        return 3

    def run_one(job):
        i, a = job
        return _RUNNERS[a["kind"]](sc, a, i)

    try:
        if parallel and len(jobs) > 1:
            from concurrent.futures import ThreadPoolExecutor
            with ThreadPoolExecutor(max_workers=min(4, len(jobs))) as pool:
                results = list(pool.map(run_one, jobs))
        else:
            results = [run_one(job) for job in jobs]
    except ScenarioError as e:
        print("pexstab: %s: %s" % (path, e), file=sys.stderr)
        return 2

    all_ok = True
    try:
        for (i, a), (report, ok, csv_spec) in zip(jobs, results):
            all_ok = all_ok and ok
            base = os.path.join(out_dir, "%02d_%s" % (i, a["kind"]))
            payload = {
                "tool": "pexstab",
                "version": __version__,
                "scenario_sha256": digest,
                "seed": sc.seed,
                "analysis_index": i,
                "kind": a["kind"],
                "ok": bool(ok),
                "report": report,
            }
            _write_json(base + ".json", payload)
            if csv_spec is not None:
                header, rows = csv_spec
                _write_csv(base + ".csv", header, rows)
            print("%s: %s -> %s.json" % (a["kind"], "ok" if ok else "FAIL", base))
    except OSError as e:
        print("pexstab: write failure: %s" % e, file=sys.stderr)
        return 3
    return 0 if all_ok else 1


def _cmd_validate(args) -> int:
    sc, _, status = _load_scenario(args.scenario)
    if status:
        return status
    print("%s: valid (%d analyses)" % (args.scenario, len(sc.analyses)))
    return 0


def _cmd_counterexample(args) -> int:
    try:
        a, b = (float(x) for x in args.omega.split(","))
    except ValueError:
        print("pexstab: --omega expects 'a,b'", file=sys.stderr)
        return 2
    doc = {
        "seed": args.seed,
        "analyses": [{"kind": "counterexample", "omega": [a, b],
                      "periods": args.periods}],
    }
    tmp = os.path.join(_resolve_out(args.out), "_counterexample_scenario.json")
    out = _resolve_out(args.out)
    try:
        os.makedirs(out, exist_ok=True)
        with open(tmp, "w") as fh:
            json.dump(doc, fh, indent=2, sort_keys=True)
    except OSError as e:
        print("pexstab: %s" % e, file=sys.stderr)
        return 3
    return run_scenario(tmp, out)


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="pexstab",
        description="Persistent-excitation stability toolkit: simulate damped "
                    "conservative systems, check excitation, certify decay.")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run every analysis in a scenario file")
    p_run.add_argument("scenario")
    p_run.add_argument("--out", default=None,
                       help="output directory (default $%s or .)" % OUT_ENV_VAR)
    p_run.add_argument("--parallel", action="store_true",
                       help="run independent analyses in parallel")

    p_val = sub.add_parser("validate", help="check a scenario file against the schema")
    p_val.add_argument("scenario")

    p_cx = sub.add_parser("counterexample",
                          help="build and certify the inert-damping counterexample")
    p_cx.add_argument("--omega", required=True, help="damping region 'a,b'")
    p_cx.add_argument("--periods", type=int, default=3)
    p_cx.add_argument("--seed", type=int, default=0)
    p_cx.add_argument("--out", default=None)

    for kind in ("observability", "kappa-scan", "certify", "strong-stability"):
        p_k = sub.add_parser(kind, help="run only the %s analyses of a scenario" % kind)
        p_k.add_argument("scenario")
        p_k.add_argument("--out", default=None)

    args = parser.parse_args(argv)
    if args.command == "validate":
        return _cmd_validate(args)
    if args.command == "counterexample":
        return _cmd_counterexample(args)
    only = None if args.command == "run" else args.command
    parallel = getattr(args, "parallel", False)
    return run_scenario(args.scenario, _resolve_out(args.out), parallel=parallel,
                        only_kind=only)


if __name__ == "__main__":
    sys.exit(main())
