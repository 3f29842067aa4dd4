"""Command-line front end.

Subcommands: closure, hamiltonize, integrate, check, classify, dof,
compare-multiplier.  Models are named registry entries (central-field,
planar-free, rotation-drift, rotation-dilation) or paths to INI files in
the format documented in :mod:`driftham.config`.

Exit codes: 0 success, 1 domain error (bad model, failed run), 2 usage
error.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import central_field as cf
from . import config as cfgmod
from . import dofcount
from . import dynamics as dyn
from . import hamiltonize as hz
from . import models
from .autodiff import ADDomainError
from .expr import ExprError
from .geometry import GeometryError, close_distribution, halton_points, \
    structure_functions_at

DOMAIN_ERRORS = (GeometryError, hz.HamiltonizeError, dyn.DynamicsError,
                 cf.CentralFieldError, cfgmod.ConfigError, models.ModelError,
                 dofcount.DofError, ExprError, ADDomainError)


@dataclass
class LoadedModel:
    name: str
    system: object
    box: tuple
    tolerances: dict
    invariants_factory: object  # m_bar -> {name: callable} or None
    default_r_min: float | None = None
    central_params: object = None


def _load_model(spec: str, parameters=None) -> LoadedModel:
    if spec in models.REGISTRY:
        entry = models.get(spec)
        params = dict(parameters or {})
        cs = entry.make(params)
        inv = None
        if entry.invariants is not None:
            ledger = entry.invariants(params)
            inv = lambda m_bar: ledger
        central = cf.CentralFieldParams(**{k: float(v) for k, v in params.items()}) \
            if spec == "central-field" else None
        return LoadedModel(entry.name, cs, entry.box, dict(cfgmod.DEFAULT_TOLERANCES),
                           inv, entry.default_r_min, central)
    if os.path.exists(spec):
        cfg = cfgmod.load_model_config(spec)
        cs = cfgmod.control_system(cfg)
        inv = (lambda m_bar: cfgmod.invariant_callables(cfg, m_bar)) \
            if cfg.invariant_sources else None
        r_min = cfg.events.get("r_min")
        return LoadedModel(cfg.name, cs, cfg.box, cfg.tolerances, inv, r_min)
    raise models.ModelError(
        f"{spec!r} is neither a registered model nor a config file; "
        f"registered: {', '.join(sorted(models.REGISTRY))}")


def _apply_tol_overrides(lm: LoadedModel, args):
    for key in ("rank_tol", "closure_tol", "hessian_tol", "rtol", "atol"):
        val = getattr(args, key, None)
        if val is not None:
            lm.tolerances[key] = val


def _samples(lm: LoadedModel, count: int):
    return halton_points(lm.box, count)


def _closure(lm: LoadedModel, count: int):
    return close_distribution(lm.system, _samples(lm, count),
                              rank_tol=lm.tolerances["rank_tol"],
                              closure_tol=lm.tolerances["closure_tol"])


def _phase_samples(lm: LoadedModel, cl, count: int):
    box = tuple(lm.box) + tuple((-1.0, 1.0) for _ in range(cl.m_bar))
    return halton_points(box, count)


def _emit(payload: dict, as_json: bool):
    if as_json:
        print(json.dumps(payload, indent=2, sort_keys=True))
        return
    for key, value in payload.items():
        print(f"{key}: {value}")


# -- subcommands -------------------------------------------------------

def cmd_closure(args) -> int:
    lm = _load_model(args.model)
    _apply_tol_overrides(lm, args)
    cl = _closure(lm, args.samples)
    residual = 0.0
    for x in cl.samples:
        residual = max(residual, structure_functions_at(cl, x)[2])
    payload = {
        "model": lm.name,
        "m_bar": cl.m_bar,
        "pure_gauge": cl.pure_gauge,
        "one_step": cl.one_step,
        "basis": list(cl.generation_log),
        "max_structure_residual": residual,
        "closed": residual <= lm.tolerances["closure_tol"],
    }
    _emit(payload, args.json)
    return 0


def cmd_hamiltonize(args) -> int:
    lm = _load_model(args.model)
    _apply_tol_overrides(lm, args)
    cl = _closure(lm, args.samples)
    hs = hz.build_hamiltonian_system(lm.system, cl,
                                     hessian_tol=lm.tolerances["hessian_tol"])
    pts = _phase_samples(lm, cl, args.samples)
    jac = max(hz.jacobi_residual(hs, z) for z in pts)
    drift = max(hz.drift_compatibility(hs, z) for z in pts)
    payload = {
        "model": lm.name,
        "phase_dimension": hs.dim,
        "coordinates": list(hs.coordinate_names),
        "m_bar": cl.m_bar,
        "pure_gauge": cl.pure_gauge,
        "max_jacobi_residual": jac,
        "max_drift_compatibility_residual": drift,
    }
    _emit(payload, args.json)
    return 0


def cmd_check(args) -> int:
    lm = _load_model(args.model)
    _apply_tol_overrides(lm, args)
    checks = {}

    def record(name, ok, value, tol):
        checks[name] = {"pass": bool(ok), "value": value, "tolerance": tol}

    hessian_tol = lm.tolerances["hessian_tol"]
    samples = _samples(lm, args.samples)
    try:
        hz.check_hessian(lm.system, samples, hessian_tol=hessian_tol)
        record("hessian_regularity", True, "det above threshold", hessian_tol)
    except hz.SingularHessianError as err:
        record("hessian_regularity", False, str(err), hessian_tol)

    cl = _closure(lm, args.samples)
    residual = max(structure_functions_at(cl, x)[2] for x in cl.samples)
    record("closure_residual", residual <= lm.tolerances["closure_tol"],
           residual, lm.tolerances["closure_tol"])

    if checks["hessian_regularity"]["pass"]:
        hs = hz.build_hamiltonian_system(lm.system, cl, hessian_tol=hessian_tol)
        pts = _phase_samples(lm, cl, args.samples)
        jac = max(hz.jacobi_residual(hs, z) for z in pts)
        record("jacobi_identity", jac <= 1e-8, jac, 1e-8)
        drift = max(hz.drift_compatibility(hs, z) for z in pts)
        record("drift_compatibility", drift <= 1e-8, drift, 1e-8)

    payload = {"model": lm.name, "checks": checks,
               "pass": all(c["pass"] for c in checks.values())}
    print(json.dumps(payload, indent=2, sort_keys=True))
    return 0


def _parse_floats(text: str):
    try:
        return [float(v) for v in text.split(",")]
    except ValueError:
        raise dyn.DynamicsError(f"expected comma-separated floats, got {text!r}") from None


def _write_csv(path, traj, hs, ledger_names):
    header = ["t"] + list(hs.coordinate_names) + list(ledger_names)
    lines = [",".join(header)]
    for k, t in enumerate(traj.t):
        row = [t, *traj.z[k]]
        row += [traj.ledger[name][k] for name in ledger_names]
        lines.append(",".join("%.17g" % v for v in row))
    for rec in traj.events:
        lines.append("# event: %s t=%.17g" % (rec.name, rec.t))
    text = "\n".join(lines) + "\n"
    if path is None:
        sys.stdout.write(text)
    else:
        with open(path, "w", newline="") as fh:
            fh.write(text)


def _plot_script(csv_path: str) -> str:
    return "\n".join([
        "# gnuplot script: orbit in the plane from the trajectory CSV",
        'set datafile separator ","',
        "set size ratio -1",
        "set key off",
        f'plot "{csv_path}" every ::1 using ($2*cos($3)):($2*sin($3)) with lines',
        ""])


def _integrate_once(lm: LoadedModel, z0, t_span, rtol, atol, r_min, out_path,
                    plot_script=None):
    cl = _closure(lm, 32)
    fast = cf._fast_rhs(lm.central_params) if lm.central_params is not None else None
    hs = hz.build_hamiltonian_system(lm.system, cl,
                                     hessian_tol=lm.tolerances["hessian_tol"],
                                     fast_rhs=fast)
    if len(z0) != hs.dim:
        raise dyn.DynamicsError(
            f"initial state has {len(z0)} components, phase space needs {hs.dim}")
    events = []
    if r_min is not None:
        events.append(dyn.Event("r_min", lambda t, z, _r=r_min: z[0] - _r,
                                terminal=True, direction=-1.0))
    invariants = lm.invariants_factory(cl.m_bar) if lm.invariants_factory else {}
    traj = dyn.integrate(hs, z0, t_span, rtol=rtol, atol=atol,
                         invariants=invariants, events=events)
    _write_csv(out_path, traj, hs, list(invariants))
    if plot_script and out_path:
        with open(plot_script, "w", newline="") as fh:
            fh.write(_plot_script(out_path))
    return traj


def _sweep_worker(job):
    spec, z0, t_span, rtol, atol, r_min, out_path, K = job
    lm = _load_model(spec)
    if lm.central_params is None:
        raise dyn.DynamicsError("--sweep K=... requires the central-field model")
    z0 = list(z0)
    z0[4] = cf.momentum_p1(lm.central_params, z0[0], K, z0[2])
    _integrate_once(lm, z0, t_span, rtol, atol, r_min, out_path)
    return out_path


def cmd_integrate(args) -> int:
    lm = _load_model(args.model)
    _apply_tol_overrides(lm, args)
    z0 = _parse_floats(args.z0)
    t_span = (args.t0, args.t1)
    rtol = lm.tolerances["rtol"]
    atol = lm.tolerances["atol"]
    r_min = None
    if not args.no_event:
        r_min = args.r_min if args.r_min is not None else lm.default_r_min

    if args.sweep:
        name, _, rng = args.sweep.partition("=")
        if name != "K" or not rng:
            raise dyn.DynamicsError("--sweep expects K=start:stop:count")
        try:
            a, b, count = rng.split(":")
            a, b, count = float(a), float(b), int(count)
        except ValueError:
            raise dyn.DynamicsError("--sweep expects K=start:stop:count") from None
        if args.out is None:
            raise dyn.DynamicsError("--sweep requires --out as a filename stem")
        stem, ext = os.path.splitext(args.out)
        jobs = []
        for K in np.linspace(a, b, count):
            out = f"{stem}_K={K:.6g}{ext or '.csv'}"
            jobs.append((args.model, tuple(z0), t_span, rtol, atol, r_min, out, float(K)))
        with ProcessPoolExecutor() as pool:
            for out in pool.map(_sweep_worker, jobs):
                print(out)
        return 0

    traj = _integrate_once(lm, z0, t_span, rtol, atol, r_min, args.out,
                           plot_script=args.plot_script)
    if args.out is not None:
        print(f"{args.out}: {len(traj.t)} samples, termination {traj.termination}")
    return 0


def cmd_classify(args) -> int:
    if args.gamma is not None or args.e is not None:
        if args.gamma is None or args.e is None or args.kind is None:
            raise cf.CentralFieldError("--gamma, --e and --kind go together")
        params = cf.orbit_params(args.gamma, args.e, args.kind,
                                 m=args.m, alpha=args.alpha, M=args.M)
    else:
        if args.E is None or args.K is None:
            raise cf.CentralFieldError("provide either --gamma/--e/--kind or --E/--K")
        params = cf.CentralFieldParams(m=args.m, alpha=args.alpha, M=args.M,
                                       E=args.E, K=args.K)
    cls = cf.classify(params)
    payload = {
        "tag": cls.tag.value,
        "gamma": cls.gamma,
        "e": cls.e,
        "p_latus": cls.p_latus,
        "E": params.E,
        "K": params.K,
    }
    _emit(payload, args.json)
    return 0


def cmd_dof(args) -> int:
    if os.path.exists(args.table) or args.table.endswith(".json"):
        table = dofcount.load(args.table)
    else:
        table = dofcount.builtin(args.table)
    print(dofcount.dof(table))
    return 0


def cmd_compare_multiplier(args) -> int:
    params = cf.CentralFieldParams(m=args.m, alpha=args.alpha, M=args.M)
    hs = cf.build(params)
    ms = cf.multiplier_system(params)
    r0, rdot0 = args.r0, args.rdot0
    phidot0 = params.M / (params.m * r0 * r0)
    t_span = (0.0, args.t1)
    # guard against fall-to-center cases (K at or above the barrier):
    # stop both flows at a radial floor and compare on the common window
    floor = [dyn.Event("r_min", lambda t, z: z[0] - 1e-2,
                       terminal=True, direction=-1.0)]
    report = {"model": "central-field", "cases": []}
    for c in _parse_floats(args.c):
        lamdot0 = c / (params.m * r0 * r0)
        y0 = (r0, rdot0, 0.0, phidot0, 0.0, lamdot0)
        mtraj = dyn.integrate(ms, y0, t_span, rtol=1e-12, atol=1e-13,
                              events=floor)
        K = c * params.M / (4.0 * params.m)
        z0 = (r0, 0.0, params.M, params.m * rdot0,
              cf.momentum_p1(params, r0, K, params.M))
        ptraj = dyn.integrate(hs, z0, t_span, rtol=1e-12, atol=1e-13,
                              events=floor)
        t_end = min(mtraj.t_span[1], ptraj.t_span[1])
        ts = np.linspace(t_span[0], t_end, 400)
        mzs = np.array([mtraj.dense(t) for t in ts])
        pzs = np.array([ptraj.dense(t) for t in ts])
        deviation = float(max(np.max(np.abs(mzs[:, 0] - pzs[:, 0])),
                              np.max(np.abs(mzs[:, 2] - pzs[:, 1]))))
        k_resid = float(max(abs(ms.precession_projection(y) - K) for y in mzs))
        report["cases"].append({"c": c, "K": K, "max_rphi_deviation": deviation,
                                "K_correspondence_residual": k_resid})
    report["energy_samples"] = [
        {"lambda_dot": ld,
         "E_lambda": ms.energy((r0, rdot0, 0.0, phidot0, 0.0, ld))}
        for ld in (10.0, 100.0, 1000.0)]
    print(json.dumps(report, indent=2, sort_keys=True))
    return 0


# -- argument parsing --------------------------------------------------

def _add_tol_flags(p, keys=("rank_tol", "closure_tol", "hessian_tol", "rtol", "atol")):
    for key in keys:
        p.add_argument(f"--{key.replace('_', '-')}", dest=key, type=float,
                       default=None, help=f"override {key}")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="driftham",
        description="Non-canonical Hamiltonian dynamics with drift for "
                    "conditional-extremum control systems.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("closure", help="close the control distribution")
    p.add_argument("model")
    p.add_argument("--samples", type=int, default=32)
    p.add_argument("--json", action="store_true")
    _add_tol_flags(p)
    p.set_defaults(func=cmd_closure)

    p = sub.add_parser("hamiltonize", help="build the phase-space system")
    p.add_argument("model")
    p.add_argument("--samples", type=int, default=32)
    p.add_argument("--json", action="store_true")
    _add_tol_flags(p)
    p.set_defaults(func=cmd_hamiltonize)

    p = sub.add_parser("check", help="run the identity suite")
    p.add_argument("model")
    p.add_argument("--samples", type=int, default=32)
    _add_tol_flags(p)
    p.set_defaults(func=cmd_check)

    p = sub.add_parser("integrate", help="integrate and export CSV")
    p.add_argument("model")
    p.add_argument("--z0", required=True, help="comma-separated phase point")
    p.add_argument("--t0", type=float, default=0.0)
    p.add_argument("--t1", type=float, required=True)
    p.add_argument("--out", default=None, help="CSV path (default stdout)")
    p.add_argument("--r-min", type=float, default=None,
                   help="terminal event radius (default: model's, if any)")
    p.add_argument("--no-event", action="store_true")
    p.add_argument("--plot-script", default=None,
                   help="also write a gnuplot script for the orbit")
    p.add_argument("--sweep", default=None, metavar="K=a:b:n",
                   help="fan out integrations over a K range (central-field)")
    _add_tol_flags(p)
    p.set_defaults(func=cmd_integrate)

    p = sub.add_parser("classify", help="classify a central-field orbit")
    p.add_argument("--m", type=float, default=1.0)
    p.add_argument("--alpha", type=float, default=1.0)
    p.add_argument("--M", type=float, default=1.0)
    p.add_argument("--E", type=float, default=None)
    p.add_argument("--K", type=float, default=None)
    p.add_argument("--gamma", type=float, default=None)
    p.add_argument("--e", type=float, default=None)
    p.add_argument("--kind", choices=("conic", "fall"), default=None)
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_classify)

    p = sub.add_parser("dof", help="degree-of-freedom count of a table")
    p.add_argument("table", help="builtin fixture name or JSON path")
    p.set_defaults(func=cmd_dof)

    p = sub.add_parser("compare-multiplier",
                       help="multiplier system vs the drift-Hamiltonian flow")
    p.add_argument("--c", default="0,0.1,0.5",
                   help="comma-separated multiplier charges m r^2 lambda-dot")
    p.add_argument("--m", type=float, default=1.0)
    p.add_argument("--alpha", type=float, default=1.0)
    p.add_argument("--M", type=float, default=1.0)
    p.add_argument("--r0", type=float, default=1.0)
    p.add_argument("--rdot0", type=float, default=0.1)
    p.add_argument("--t1", type=float, default=20.0)
    p.set_defaults(func=cmd_compare_multiplier)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except DOMAIN_ERRORS as err:
        diag = {"error": type(err).__name__, "message": str(err)}
        point = getattr(err, "point", None)
        if point is not None:
            diag["point"] = list(point)
        print(json.dumps(diag, sort_keys=True), file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
