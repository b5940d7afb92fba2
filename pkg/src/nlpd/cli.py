"""``nlpd`` command line.

Exit codes: 0 when everything is certified, 1 on a certification failure,
2 on an execution error.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import experiments as ex
from .dual import certify_run
from .integer import augmented_instance, check_key_inequality
from .model import OnGapInstance, Parameters
from .oracle import fractional_opt_ongap, fractional_opt_routing, integer_opt_bruteforce
from .rounding import monte_carlo_cost
from .routing import RoutingInstance, routing_dual_certificate, run_online_routing
from .speed_scaling import build_instance, compare_profiles, load_jobs, oa_speed_profile, trace_from_run
from .waterfill import run_online_fractional

OK, UNCERTIFIED, FAILED = 0, 1, 2
KERNELS = ("deadline", "flow", "flow2")


def _read(path) -> dict:
    return json.loads(Path(path).read_text(encoding="utf-8"))


def _emit(obj, out) -> None:
    text = json.dumps(obj, indent=2)
    if out:
        Path(out).write_text(text + "\n", encoding="utf-8")
    else:
        print(text)


def _parse_params(items) -> dict:
    params = {}
    for item in items or []:
        key, _, raw = item.partition("=")
        if not _:
            raise ValueError(f"parameter {item!r} is not key=value")
        try:
            params[key] = json.loads(raw)
        except json.JSONDecodeError:
            params[key] = raw
    return params


def cmd_gen(args) -> int:
    params = _parse_params(args.param)
    if args.alpha is not None:
        params["alpha"] = args.alpha
    _emit(ex.gen_instance(args.kind, params, args.seed), args.out)
    return OK


def cmd_run(args) -> int:
    if args.config:
        config = _read(args.config)
        base = Path(args.config).parent
    elif args.input:
        config = {"instances": [{"path": str(Path(args.input).resolve())}], "modes": args.mode, "oracle": args.oracle}
        base = Path(".")
    else:
        raise ValueError("run needs --config or --input")
    for key in ("delta", "eps"):
        if getattr(args, key) is not None:
            config[key] = getattr(args, key)
    report = ex.run_experiment(config, base)
    if args.out:
        ex.emit_report(report, args.out, args.format, overwrite=args.force)
    else:
        print(json.dumps(report, indent=2))
    return ex.exit_code(report)


def cmd_report(args) -> int:
    report = _read(args.input)
    if report.get("schema") != ex.SCHEMA_VERSION:
        raise ValueError(f"unsupported report schema {report.get('schema')!r}")
    ex.emit_report(report, args.out, args.format, overwrite=args.force)
    return OK


def cmd_route(args) -> int:
    inst = RoutingInstance.from_dict(_read(args.input))
    if args.alpha is not None:
        inst = RoutingInstance(args.alpha, inst.num_nodes, inst.edges, inst.requests)
    run = run_online_routing(inst, args.eps, args.delta, literal_lambda=args.literal_lambda)
    out = {
        "on": run.online_cost(inst.alpha),
        "loads": run.state.loads.tolist(),
        "lambda": run.lam.tolist(),
        "log": list(run.log),
    }
    code = OK
    if args.certify:
        rep = routing_dual_certificate(run, inst)
        out["certificate"] = rep.to_dict()
        code = OK if rep.certified else UNCERTIFIED
    if args.oracle:
        out["opt"] = fractional_opt_routing(inst, args.tol).objective
    _emit(out, args.out)
    return code


def cmd_ss(args) -> int:
    data = _read(args.jobs)
    jobs, horizon, alpha, beta = load_jobs(data)
    alpha = args.alpha if args.alpha is not None else alpha
    kernel = args.kernel
    inst = build_instance(jobs, kernel, horizon, alpha, beta if args.beta is None else args.beta)
    run = run_online_fractional(inst, Parameters(args.delta))
    trace = trace_from_run(run, horizon)
    rep = certify_run(run, inst)
    out = {"trace": trace.to_dict(), "certificate": rep.to_dict()}
    if args.compare_oa:
        if kernel != "deadline":
            raise ValueError("OA comparison needs the deadline kernel")
        oa = oa_speed_profile(jobs, horizon)
        out["oa"] = oa.to_dict()
        out["oa_gap"] = compare_profiles(trace, oa)
    _emit(out, args.out)
    return OK if rep.certified else UNCERTIFIED


def cmd_round(args) -> int:
    inst = OnGapInstance.from_dict(_read(args.input))
    aug = augmented_instance(inst, add_to_existing=True)
    run = run_online_fractional(aug, Parameters(args.delta))
    mc = monte_carlo_cost(run.state, aug, args.samples, args.seed)
    out = {
        "samples": args.samples,
        "seed": args.seed,
        "fractional_objective": run.state.objective,
        "mean": mc.mean,
        "stderr": mc.stderr,
        "ratio": mc.ratio,
        "monitor_threshold": mc.monitor_threshold,
        "exceeds_monitor": mc.exceeds_monitor,
    }
    _emit(out, args.report or args.out)
    return OK


def cmd_oracle(args) -> int:
    data = _read(args.input)
    if args.mode == "frac-routing":
        res = fractional_opt_routing(RoutingInstance.from_dict(data), args.tol)
        out = {"objective": res.objective, "gap": res.gap, "iterations": res.iterations}
    else:
        inst = OnGapInstance.from_dict(data)
        if args.mode == "frac":
            res = fractional_opt_ongap(inst, args.tol)
            out = {"objective": res.objective, "iterations": res.iterations, "x": res.x.tolist()}
        else:
            target = augmented_instance(inst, add_to_existing=True) if args.augmented else inst
            res = integer_opt_bruteforce(target)
            out = {"objective": res.objective, "assignment": np.argmax(res.x, axis=1).tolist()}
    _emit(out, args.out)
    return OK


def cmd_check_lemma(args) -> int:
    seq = [float(v) for v in args.seq.split(",") if v.strip()]
    alpha = 2.0 if args.alpha is None else args.alpha
    res = check_key_inequality(seq, alpha, args.delta)
    _emit({"lhs": res.lhs, "rhs": res.rhs, "holds": res.holds}, args.out)
    return OK if res.holds else UNCERTIFIED


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--alpha", type=float, default=None)
    common.add_argument("--delta", type=float, default=None)
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--eps", type=float, default=None)
    common.add_argument("--out", default=None)
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="nlpd", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen", parents=[common], help="generate an instance")
    p.add_argument("kind", choices=ex.GENERATORS)
    p.add_argument("--param", action="append", metavar="KEY=VALUE")
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("run", parents=[common], help="run a batch experiment")
    p.add_argument("--config")
    p.add_argument("--input")
    p.add_argument("--mode", action="append", choices=["fractional", "integer"])
    p.add_argument("--oracle", action="store_true")
    p.add_argument("--format", choices=["json", "csv"], default="json")
    p.add_argument("--force", action="store_true", help="overwrite an existing report")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("report", parents=[common], help="convert a JSON report")
    p.add_argument("--input", required=True)
    p.add_argument("--format", choices=["json", "csv"], default="csv")
    p.add_argument("--force", action="store_true")
    p.set_defaults(func=cmd_report)

    p = sub.add_parser("route", parents=[common], help="online greedy routing")
    p.add_argument("--input", required=True)
    p.add_argument("--certify", action="store_true")
    p.add_argument("--oracle", action="store_true")
    p.add_argument("--literal-lambda", action="store_true")
    p.add_argument("--tol", type=float, default=1e-8, help="oracle stopping tolerance")
    p.set_defaults(func=cmd_route)

    p = sub.add_parser("ss", parents=[common], help="speed scaling via slot assignment")
    p.add_argument("--jobs", required=True)
    p.add_argument("--kernel", choices=KERNELS, default="deadline")
    p.add_argument("--beta", type=float, default=None)
    p.add_argument("--compare-oa", action="store_true")
    p.set_defaults(func=cmd_ss)

    p = sub.add_parser("round", parents=[common], help="randomized rounding Monte Carlo")
    p.add_argument("--input", required=True)
    p.add_argument("--samples", type=int, default=1000)
    p.add_argument("--report")
    p.set_defaults(func=cmd_round)

    p = sub.add_parser("oracle", parents=[common], help="offline optimum")
    p.add_argument("--input", required=True)
    p.add_argument("--mode", choices=["frac", "int", "frac-routing"], default="frac")
    p.add_argument("--augmented", action="store_true")
    p.add_argument("--tol", type=float, default=1e-8, help="fractional solver stopping tolerance")
    p.set_defaults(func=cmd_oracle)

    p = sub.add_parser("check-lemma", parents=[common], help="evaluate the key integral inequality")
    p.add_argument("--seq", required=True)
    p.set_defaults(func=cmd_check_lemma)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    if args.command == "route" and args.eps is None:
        args.eps = 0.01
    if args.command == "run" and args.mode is None:
        args.mode = ["fractional"]
    try:
        return args.func(args)
    except Exception as exc:
        print(f"nlpd {args.command}: {type(exc).__name__}: {exc}", file=sys.stderr)
        return FAILED


if __name__ == "__main__":
    sys.exit(main())
