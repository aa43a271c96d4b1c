"""Command-line front end: ``asymflow <command> [options]``.

Every command validates its whole configuration before computing anything
and writes its outputs atomically into ``--out``. Exit codes: 0 success,
1 input/model error, 2 numerical error, 3 audit failure.
"""
from __future__ import annotations

import argparse
import logging
import os
import sys
from pathlib import Path

import numpy as np

from . import curves, flow, io, models, paths, transport
from .errors import AsymflowError, InputError, NumericalError
from .norms import NormSpec

log = logging.getLogger("asymflow")

EXIT_OK, EXIT_INPUT, EXIT_NUMERICAL, EXIT_AUDIT = 0, 1, 2, 3

DEFAULT_MODEL = {"variant": "funk", "dim": 2}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_INPUT, f"{self.prog}: error: {message}\n")


def _vec(text):
    try:
        return [float(v) for v in text.split(",")]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from exc


def _ints(text):
    try:
        return [int(v) for v in text.split(",")]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from exc


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--model", help="model JSON file (default: 2-d Funk ball)")
    common.add_argument("--config", help="JSON file with command parameters (flags override it)")
    common.add_argument("--out", default=".", help="output directory")
    common.add_argument("--seed", type=int, default=0, help="64-bit seed")

    ap = _Parser(prog="asymflow", description="Asymmetric metric geometry experiments.")
    sub = ap.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("dist", parents=[common], help="forward and backward distances")
    s.add_argument("--x", type=_vec)
    s.add_argument("--y", type=_vec)

    s = sub.add_parser("curve", parents=[common], help="length, derivatives, AC classification, variation")
    s.add_argument("--curve", help="curve CSV (t,x1..xd)")
    s.add_argument("--p", type=float)

    s = sub.add_parser("flow", parents=[common], help="integrate a gradient flow and audit the energy identity")
    s.add_argument("--x0", type=_vec)
    s.add_argument("--T", type=float)
    s.add_argument("--dt", type=float)
    s.add_argument("--power", type=float, help="power-law dissipation exponent p")

    s = sub.add_parser("ot", parents=[common], help="exact OT with duality report")
    s.add_argument("--p", type=float)
    s.add_argument("--direction", choices=["forward", "backward"])

    s = sub.add_parser("interp", parents=[common], help="gluing, path measure, speeds, velocity fields, continuity residual")
    s.add_argument("--p", type=float)

    s = sub.add_parser("counterexample", parents=[common], help="Funk divergence table")
    s.add_argument("--m", type=_ints)
    s.add_argument("--k", type=_ints)
    s.add_argument("--p", type=float)

    s = sub.add_parser("audit", parents=[common], help="property-test sweep")
    s.add_argument("--samples", type=int)
    return ap


def _config(args, keys):
    cfg = io.read_json(args.config) if args.config else {}
    if not isinstance(cfg, dict):
        raise InputError("config must be a JSON object")
    for k in keys:
        v = getattr(args, k, None)
        if v is not None:
            cfg[k] = v
    return cfg


def _model(args, default=DEFAULT_MODEL):
    spec = io.read_json(args.model) if args.model else default
    return models.model_from_json(spec)


def _require(cfg, key, kind=None):
    if key not in cfg:
        raise InputError(f"missing parameter {key!r}")
    return cfg[key]


def _measure(obj, base):
    if isinstance(obj, str):
        obj = io.read_json(base / obj if not os.path.isabs(obj) else obj)
    return transport.DiscreteMeasure.from_json(obj)


def _potential(obj):
    kind = obj.get("type")
    if kind == "quadratic":
        return flow.Quadratic(obj["A"], obj.get("b"), obj.get("c", 0.0))
    if kind == "linear":
        return flow.Linear(obj["b"], obj.get("c", 0.0))
    raise InputError(f"unknown potential type {kind!r}")


def _triple(obj):
    kind = obj.get("type", "power")
    if kind == "power":
        return flow.PowerLaw(float(obj.get("p", 2.0)))
    if kind == "table":
        return flow.MonotoneTable(obj["x"], obj["h"])
    raise InputError(f"unknown dissipation type {kind!r}")


# ---------------------------------------------------------------------------
# commands


def cmd_dist(args, out):
    model = _model(args)
    cfg = _config(args, ["x", "y"])
    if "pairs" in cfg:
        pairs = [(np.asarray(a, float), np.asarray(b, float)) for a, b in cfg["pairs"]]
    else:
        pairs = [(np.asarray(_require(cfg, "x"), float), np.asarray(_require(cfg, "y"), float))]
    for a, b in pairs:
        model.check_points(a)
        model.check_points(b)
    d = model.dim
    rows = []
    for a, b in pairs:
        rows.append([*a, *b, float(model.distance(a, b)), float(model.distance(b, a))])
    header = [f"x{i + 1}" for i in range(d)] + [f"y{i + 1}" for i in range(d)] + ["forward", "backward"]
    io.write_csv(out / "dist.csv", header, rows)
    for r in rows:
        print(",".join(io.fmt(v) for v in r))
    return EXIT_OK


def cmd_curve(args, out):
    model = _model(args)
    cfg = _config(args, ["curve", "p"])
    curve = io.read_curve(_require(cfg, "curve"))
    for x in curve.points:
        model.check_points(x)
    p = float(cfg.get("p", 1.0))
    chord, quad = curves.curve_length(model, curve)
    prof = curves.metric_derivative(model, curve)
    ac = curves.classify_ac(model, curve, p)
    report = {
        "chord_length": chord,
        "quadrature_length": quad,
        "variation": curves.pointwise_variation(model, curve),
        "classification": ac.to_json(),
    }
    io.write_csv(out / "derivative.csv", ["t", "forward", "backward"], zip(prof.times, prof.forward, prof.backward))
    io.write_json(out / "curve_report.json", report)
    print(io.dumps(report), end="")
    return EXIT_OK


def cmd_flow(args, out):
    model = _model(args, {"variant": "minkowski", "dim": 2, "norm": {"variant": "euclidean", "dim": 2}})
    cfg = _config(args, ["x0", "T", "dt", "power"])
    x0 = np.asarray(_require(cfg, "x0"), float)
    model.check_points(x0)
    T, dt = float(_require(cfg, "T")), float(_require(cfg, "dt"))
    pot = _potential(cfg.get("potential", {"type": "quadratic", "A": np.eye(model.dim).tolist()}))
    diss = cfg.get("dissipation", {"type": "power", "p": 2.0})
    if "power" in cfg:
        diss = {"type": "power", "p": cfg["power"]}
    triple = _triple(diss)
    tr = flow.integrate_flow(model, triple, pot, x0, T, dt, blowup_radius=float(cfg.get("blowup_radius", 1e6)))
    audit = flow.energy_audit(tr)
    report = {"status": tr.status, "exit_time": tr.exit_time, "audit_residual": audit.max_residual, "final": tr.points[-1]}
    io.write_trajectory(out / "trajectory.csv", tr)
    io.write_json(out / "audit.json", report)
    print(io.dumps(report), end="")
    return EXIT_OK


def cmd_ot(args, out):
    model = _model(args)
    cfg = _config(args, ["p", "direction"])
    base = Path(args.config).parent if args.config else Path(".")
    mu = _measure(_require(cfg, "mu"), base)
    nu = _measure(_require(cfg, "nu"), base)
    p = float(cfg.get("p", 1.0))
    direction = cfg.get("direction", "forward")
    C = transport.cost_matrix(model, mu, nu, p, direction)
    res = transport.solve_ot(C, mu, nu)
    cert = transport.certify(res, C, mu.weights, nu.weights)
    report = {"result": res.to_json(), "wasserstein": max(res.value, 0.0) ** (1.0 / p), "certificate": cert.to_json()}
    if p == 1.0:
        report["kr"] = transport.kr_duality_check(res, C, mu, nu, model if direction == "forward" else None).to_json()
    io.write_json(out / "ot.json", report)
    print(io.dumps({k: v for k, v in report.items() if k != "result"}), end="")
    return EXIT_OK


def _default_tests(dim):
    return [flow.Linear(np.eye(dim)[i]) for i in range(dim)]


def cmd_interp(args, out):
    model = _model(args)
    cfg = _config(args, ["p"])
    spec = _require(cfg, "curve")
    base = Path(args.config).parent if args.config else Path(".")
    N = int(_require(spec, "N"))
    ms = tuple(_measure(m, base) for m in _require(spec, "measures"))
    curve = paths.CurveOfMeasures(paths.DyadicSchedule(N), ms)
    for m in ms:
        model.check_points(m.points)
    p = float(cfg.get("p", 2.0))
    joint = paths.glue_plans(model, curve, p)
    marg = max(float(np.max(np.abs(joint.marginal(k) - ms[k].weights))) for k in range(len(ms)))
    step1 = paths.step1_inequalities_check(joint, model, p)
    report = {"paths": int(len(joint.weights)), "marginal_error": marg, "step1": step1.to_json()}
    if model.smooth:
        eta = paths.path_measure(joint, model, "geodesic")
        fields = paths.cell_fields(eta, model, p=p)
        K = curve.schedule.cells
        report["speeds"] = [paths.speed_estimate(eta, model, p, (c + 0.5) / K) for c in range(K)]
        report["jensen_ok"] = all(f.jensen_ok for f in fields)
        cont = paths.continuity_residual(curve, fields, _default_tests(model.dim))
        report["continuity_max_residual"] = cont.max_residual
        io.write_csv(out / "continuity.csv", ["cell", "test", "residual"], cont.rows())
        io.write_json(out / "path_measure.json", eta.to_json())
    io.write_json(out / "interp_report.json", report)
    print(io.dumps(report), end="")
    return EXIT_OK


def cmd_counterexample(args, out):
    cfg = _config(args, ["m", "k", "p"])
    ms = cfg.get("m", [4, 8, 16, 32, 64, 128, 256, 512, 1024, 2048, 4096, 8192, 16384])
    ks = cfg.get("k", [1, 2, 4, 8, 16])
    p = float(cfg.get("p", 1.0))
    if p < 1:
        raise InputError("p must be >= 1")
    rows = transport.funk_divergence_experiment(ms, ks, p)
    io.write_csv(out / "divergence.csv", ["m", "k", "forward_dist", "anchor_dist"], [[r.m, r.k, r.forward_dist, r.anchor_dist] for r in rows])
    for r in rows:
        print(f"{r.m},{r.k},{io.fmt(r.forward_dist)},{io.fmt(r.anchor_dist)}")
    return EXIT_OK


def cmd_audit(args, out):
    from .audit import run_audit

    cfg = _config(args, ["samples"])
    results = run_audit(seed=args.seed, samples=int(cfg.get("samples", 200)))
    ok = all(r["passed"] for r in results)
    io.write_json(out / "audit.json", {"passed": ok, "suites": results})
    for r in results:
        print(f"{'PASS' if r['passed'] else 'FAIL'} {r['name']}: {r['detail']}")
    return EXIT_OK if ok else EXIT_AUDIT


COMMANDS = {
    "dist": cmd_dist,
    "curve": cmd_curve,
    "flow": cmd_flow,
    "ot": cmd_ot,
    "interp": cmd_interp,
    "counterexample": cmd_counterexample,
    "audit": cmd_audit,
}


def main(argv=None):
    level = os.environ.get("ASYMFLOW_LOG", "error").upper()
    logging.basicConfig(level=getattr(logging, level, logging.ERROR), format="%(levelname)s %(name)s: %(message)s")
    args = build_parser().parse_args(argv)
    out = Path(args.out)
    try:
        return COMMANDS[args.command](args, out)
    except NumericalError as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (AsymflowError, ValueError, KeyError, TypeError) as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
