"""Instance generators, batch experiments and report files."""
from __future__ import annotations

import csv
import json
import logging
import math
import os
import statistics
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import Any

import numpy as np

from .dual import certify_run
from .integer import augmented_instance, greedy_assign_integer, integer_dual_bound
from .model import OnGapInstance, Parameters, make_instance
from .oracle import BRUTE_FORCE_CAP, fractional_opt_ongap, fractional_opt_routing, integer_opt_bruteforce
from .routing import Request, RoutingInstance, routing_dual_certificate, run_online_routing
from .speed_scaling import build_instance, compare_profiles, load_jobs, oa_speed_profile, trace_from_run
from .waterfill import run_online_fractional

log = logging.getLogger(__name__)

SCHEMA_VERSION = 1
GENERATORS = ("random-ongap", "split-gap", "speed-scaling", "random-graph")
ROW_COLUMNS = (
    "index",
    "instance",
    "mode",
    "alpha",
    "on",
    "dual",
    "opt",
    "ratio",
    "opt_ratio",
    "bound",
    "certified",
    "status",
    "error",
    "wall_time",
)
FLOAT_COLUMNS = {"alpha", "on", "dual", "opt", "ratio", "opt_ratio", "bound", "wall_time"}

LOAD_RANGE = (0.1, 10.0)
COST_RANGE = (0.0, 5.0)
OPTION_DENSITY = 0.7


# -- generators -------------------------------------------------------------


def random_ongap(n: int, m: int, alpha: float, seed: int, density: float = OPTION_DENSITY, costs: bool = True) -> OnGapInstance:
    """Loads log-uniform on [0.1, 10], costs uniform on [0, 5], each
    (job, machine) pair allowed with probability ``density`` and at least one
    machine per job.
    """
    rng = np.random.default_rng(seed)
    lo, hi = np.log(LOAD_RANGE[0]), np.log(LOAD_RANGE[1])
    load = np.exp(rng.uniform(lo, hi, size=(n, m)))
    cost = rng.uniform(*COST_RANGE, size=(n, m)) if costs else np.zeros((n, m))
    allowed = rng.random((n, m)) < density
    if n:
        allowed[np.arange(n), rng.integers(0, m, size=n)] = True
    return make_instance(alpha, load, cost, allowed=allowed)


def split_gap(m: int, alpha: float) -> OnGapInstance:
    return make_instance(alpha, np.ones((1, m)))


def random_speed_scaling(n: int, horizon: int, alpha: float, seed: int, kernel: str = "deadline", beta: float = 1.0) -> dict:
    rng = np.random.default_rng(seed)
    jobs = []
    for _ in range(n):
        r = int(rng.integers(0, horizon))
        job = {"release": r, "work": float(rng.uniform(0.5, 2.0)), "weight": 1.0}
        if kernel == "deadline":
            job["deadline"] = int(rng.integers(r + 1, horizon + 1))
        jobs.append(job)
    jobs.sort(key=lambda j: j["release"])
    return {"alpha": float(alpha), "horizon": int(horizon), "beta": float(beta), "kernel": kernel, "jobs": jobs}


def random_graph(nodes: int, requests: int, alpha: float, seed: int, extra: float = 0.3) -> RoutingInstance:
    """Random spanning tree plus each remaining node pair with probability
    ``extra``; request demands uniform on [0.5, 2].
    """
    rng = np.random.default_rng(seed)
    order = rng.permutation(nodes)
    edges = set()
    for i in range(1, nodes):
        u, v = int(order[i]), int(order[rng.integers(0, i)])
        edges.add((min(u, v), max(u, v)))
    for u in range(nodes):
        for v in range(u + 1, nodes):
            if (u, v) not in edges and rng.random() < extra:
                edges.add((u, v))
    reqs = []
    for _ in range(requests):
        s, t = rng.choice(nodes, size=2, replace=False)
        reqs.append(Request(int(s), int(t), float(rng.uniform(0.5, 2.0))))
    return RoutingInstance(float(alpha), nodes, tuple(sorted(edges)), tuple(reqs))


def gen_instance(kind: str, params: dict[str, Any], seed: int) -> dict:
    """Instance as a JSON-ready dict, deterministic in (kind, params, seed)."""
    p = dict(params)
    try:
        alpha = float(p.pop("alpha", 2.0))
        if not alpha > 1:
            raise ValueError("alpha must be > 1")
        if kind == "random-ongap":
            inst = random_ongap(int(p.pop("n", 10)), int(p.pop("m", 3)), alpha, seed,
                                float(p.pop("density", OPTION_DENSITY)), bool(p.pop("costs", True)))
            out = inst.to_dict()
        elif kind == "split-gap":
            out = split_gap(int(p.pop("m", 4)), alpha).to_dict()
        elif kind == "speed-scaling":
            out = random_speed_scaling(int(p.pop("n", 5)), int(p.pop("T", 10)), alpha, seed,
                                       str(p.pop("kernel", "deadline")), float(p.pop("beta", 1.0)))
        elif kind == "random-graph":
            out = random_graph(int(p.pop("nodes", 8)), int(p.pop("requests", 4)), alpha, seed,
                               float(p.pop("extra", 0.3))).to_dict()
        else:
            raise ValueError(f"unknown generator {kind!r}; choose from {GENERATORS}")
    except KeyError as exc:
        raise ValueError(f"bad parameter {exc}") from exc
    if p:
        raise ValueError(f"unused parameters for {kind}: {sorted(p)}")
    return out


def write_json(obj, path: str | Path) -> None:
    Path(path).write_text(json.dumps(obj, indent=2) + "\n", encoding="utf-8")


# -- experiments ------------------------------------------------------------


def detect_kind(data: dict) -> str:
    if "nodes" in data:
        return "routing"
    if "horizon" in data:
        return "speed-scaling"
    return "ongap"


def _run_one(name: str, data: dict, mode: str, settings: dict) -> dict:
    row = {c: None for c in ROW_COLUMNS}
    row.update(instance=name, mode=mode, status="ok")
    start = time.perf_counter()
    try:
        kind = detect_kind(data)
        delta = settings.get("delta")
        use_oracle = bool(settings.get("oracle", False))
        if kind == "routing":
            inst = RoutingInstance.from_dict(data)
            eps = float(settings.get("eps", 0.01))
            run = run_online_routing(inst, eps, delta)
            rep = routing_dual_certificate(run, inst)
            if use_oracle:
                row["opt"] = fractional_opt_routing(inst).objective
        elif kind == "speed-scaling":
            jobs, horizon, alpha, beta = load_jobs(data)
            kern = data.get("kernel", "deadline")
            inst = build_instance(jobs, kern, horizon, alpha, beta)
            run = run_online_fractional(inst, Parameters(delta))
            rep = certify_run(run, inst)
            if kern == "deadline" and settings.get("compare_oa", True):
                row["oa_gap"] = compare_profiles(trace_from_run(run, horizon), oa_speed_profile(jobs, horizon))
            if use_oracle:
                row["opt"] = fractional_opt_ongap(inst).objective
        else:
            inst = OnGapInstance.from_dict(data)
            if mode == "integer":
                aug = augmented_instance(inst, add_to_existing=True)
                run = greedy_assign_integer(aug, Parameters(delta, "integer"))
                rep = integer_dual_bound(run, aug)
                sizes = math.prod(len(j.options) for j in inst.jobs)
                if use_oracle and sizes <= BRUTE_FORCE_CAP:
                    row["opt"] = integer_opt_bruteforce(aug).objective
            elif mode == "fractional":
                run = run_online_fractional(inst, Parameters(delta))
                rep = certify_run(run, inst)
                if use_oracle:
                    row["opt"] = fractional_opt_ongap(inst).objective
            else:
                raise ValueError(f"unknown mode {mode!r}")
        row.update(alpha=float(data["alpha"]), on=rep.on, dual=rep.dual, ratio=rep.ratio,
                   bound=rep.bound, certified=rep.certified)
        if row["opt"] is not None and row["opt"] > 0:
            row["opt_ratio"] = rep.on / row["opt"]
    except Exception as exc:  # isolate per-instance failures
        log.warning("instance %s (%s) failed: %s", name, mode, exc)
        row.update(status="failed", error=f"{type(exc).__name__}: {exc}", certified=False)
    row["wall_time"] = time.perf_counter() - start
    return row


def _expand(config: dict, base: Path) -> list[tuple[str, dict]]:
    items = []
    for entry in config.get("instances", []):
        if "path" in entry:
            path = base / entry["path"]
            items.append((str(entry["path"]), json.loads(path.read_text(encoding="utf-8"))))
        elif "generate" in entry:
            g = entry["generate"]
            count = int(g.get("count", 1))
            seed = int(g.get("seed", 0))
            for i in range(count):
                name = f"{g['kind']}#{seed + i}"
                try:
                    items.append((name, gen_instance(g["kind"], g.get("params", {}), seed + i)))
                except Exception as exc:
                    items.append((name, {"_error": str(exc)}))
        elif "inline" in entry:
            items.append((entry.get("name", f"inline#{len(items)}"), entry["inline"]))
        else:
            raise ValueError(f"instance entry needs 'path', 'generate' or 'inline': {entry}")
    return items


def threads() -> int:
    try:
        return max(1, int(os.environ.get("NLPD_THREADS", "1")))
    except ValueError:
        return 1


def run_experiment(config: dict, base_dir: str | Path = ".") -> dict:
    """Run every (instance, mode) pair in the config and collect a report.

    Config keys: ``instances`` (list of {"path"} / {"generate"} / {"inline"}
    entries), ``modes`` (default ["fractional"]), ``oracle`` (bool),
    ``delta``, ``eps``.
    """
    items = _expand(config, Path(base_dir))
    modes = config.get("modes", ["fractional"])
    settings = {k: config[k] for k in ("delta", "eps", "oracle", "compare_oa") if k in config}
    tasks = []
    for name, data in items:
        run_modes = modes if detect_kind(data) == "ongap" else ["fractional"]
        for mode in run_modes:
            tasks.append((name, data, mode))

    def work(task):
        name, data, mode = task
        if "_error" in data:
            row = {c: None for c in ROW_COLUMNS}
            row.update(instance=name, mode=mode, status="failed", error=data["_error"], certified=False)
            return row
        return _run_one(name, data, mode, settings)

    with ThreadPoolExecutor(max_workers=threads()) as pool:
        rows = list(pool.map(work, tasks))
    for i, row in enumerate(rows):
        row["index"] = i
    return {"schema": SCHEMA_VERSION, "rows": rows, "aggregates": aggregate(rows)}


def aggregate(rows: list[dict]) -> dict:
    by_alpha: dict[str, list[float]] = {}
    for r in rows:
        if r["status"] == "ok" and r["ratio"] is not None and math.isfinite(r["ratio"]):
            by_alpha.setdefault(repr(float(r["alpha"])), []).append(r["ratio"])
    return {
        a: {"count": len(v), "min": min(v), "median": statistics.median(v), "max": max(v)}
        for a, v in sorted(by_alpha.items(), key=lambda kv: float(kv[0]))
    }


def exit_code(report: dict) -> int:
    rows = report["rows"]
    if any(r["status"] != "ok" for r in rows):
        return 2
    if any(not r["certified"] for r in rows):
        return 1
    return 0


def _fmt(col: str, value) -> str:
    if value is None:
        return ""
    if col in FLOAT_COLUMNS:
        return f"{float(value):.12g}"
    if isinstance(value, bool):
        return "true" if value else "false"
    return str(value)


def _write_report(report: dict, fh, fmt: str) -> None:
    if fmt == "json":
        fh.write(json.dumps(report, indent=2) + "\n")
    elif fmt == "csv":
        w = csv.writer(fh)
        w.writerow(ROW_COLUMNS)
        for row in report["rows"]:
            w.writerow([_fmt(c, row.get(c)) for c in ROW_COLUMNS])
    else:
        raise ValueError(f"unknown report format {fmt!r}")


def emit_report(report: dict, path: str | Path | None, fmt: str = "json", overwrite: bool = False) -> Path | None:
    """Write the report; existing files are only replaced with ``overwrite``.

    With no path the report goes to stdout.
    """
    if path is None:
        _write_report(report, sys.stdout, fmt)
        return None
    path = Path(path)
    if path.exists() and not overwrite:
        raise FileExistsError(f"{path} exists; pass overwrite to replace it")
    if fmt not in ("json", "csv"):
        raise ValueError(f"unknown report format {fmt!r}")
    with path.open("w", newline="", encoding="utf-8") as fh:
        _write_report(report, fh, fmt)
    return path
