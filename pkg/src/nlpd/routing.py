"""Online greedy routing on networks of speed-scalable links.

Each request's demand is pushed in equal chunks, every chunk along the path
whose exact cost increase ``(L + chunk)^alpha - L^alpha`` summed over its edges
is smallest at the current loads.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .dual import CertificateReport, build_report
from .graphs import Graph, shortest_path
from .model import _check_keys, effective_delta

DEFAULT_KAPPA = 10.0


@dataclass(frozen=True)
class Request:
    s: int
    t: int
    f: float


@dataclass(frozen=True)
class RoutingInstance:
    alpha: float
    num_nodes: int
    edges: tuple[tuple[int, int], ...]
    requests: tuple[Request, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "edges", tuple(tuple(e) for e in self.edges))
        object.__setattr__(self, "requests", tuple(self.requests))

    @property
    def graph(self) -> Graph:
        return Graph(self.num_nodes, self.edges)

    def to_dict(self) -> dict:
        return {
            "alpha": self.alpha,
            "nodes": self.num_nodes,
            "edges": [list(e) for e in self.edges],
            "requests": [{"s": r.s, "t": r.t, "f": r.f} for r in self.requests],
        }

    def to_json(self, **kwargs) -> str:
        return json.dumps(self.to_dict(), **kwargs)

    @classmethod
    def from_dict(cls, data: dict) -> "RoutingInstance":
        _check_keys(data, {"alpha", "nodes", "edges", "requests"}, "graph")
        reqs = []
        for i, r in enumerate(data["requests"]):
            _check_keys(r, {"s", "t", "f"}, f"request {i}")
            reqs.append(Request(int(r["s"]), int(r["t"]), float(r["f"])))
        return cls(float(data["alpha"]), int(data["nodes"]), tuple(map(tuple, data["edges"])), tuple(reqs))

    @classmethod
    def from_json(cls, text: str) -> "RoutingInstance":
        return cls.from_dict(json.loads(text))


def validate_routing(inst: RoutingInstance) -> list[str]:
    out = []
    if not inst.alpha > 1:
        out.append(f"alpha must be > 1 (got {inst.alpha})")
    for k, (u, v) in enumerate(inst.edges):
        if not (0 <= u < inst.num_nodes and 0 <= v < inst.num_nodes):
            out.append(f"edge {k} has an endpoint out of range")
        elif u == v:
            out.append(f"edge {k} is a self-loop")
    if out:
        return out
    graph = inst.graph
    for j, r in enumerate(inst.requests):
        if not (0 <= r.s < inst.num_nodes and 0 <= r.t < inst.num_nodes):
            out.append(f"request {j}: endpoint out of range")
            continue
        if r.s == r.t:
            out.append(f"request {j}: source equals sink")
        if not (math.isfinite(r.f) and r.f > 0):
            out.append(f"request {j}: demand must be positive")
        if not graph.connected(r.s, r.t):
            out.append(f"request {j}: {r.s} and {r.t} are disconnected")
    return out


def edge_increment_weight(load: float, eps: float, alpha: float) -> float:
    """Exact cost of pushing ``eps`` more flow over an edge carrying ``load``."""
    return (load + eps) ** alpha - load**alpha


@dataclass
class FlowState:
    loads: np.ndarray
    flows: list[dict[tuple[int, ...], float]] = field(default_factory=list)

    @classmethod
    def empty(cls, num_edges: int) -> "FlowState":
        return cls(np.zeros(num_edges), [])

    def copy(self) -> "FlowState":
        return FlowState(self.loads.copy(), [dict(f) for f in self.flows])

    def objective(self, alpha: float) -> float:
        return float(np.sum(self.loads**alpha))


def _lambda(path, loads, alpha, delta, literal: bool) -> float:
    if literal:
        return delta * alpha * sum(loads[k] for k in path) ** (alpha - 1)
    return delta * sum(alpha * loads[k] ** (alpha - 1) for k in path)


def route_request(
    state: FlowState,
    graph: Graph,
    request: Request,
    eps_fraction: float,
    alpha: float,
    delta: float | None = None,
    literal_lambda: bool = False,
) -> tuple[FlowState, float]:
    """Route one request on top of ``state``; returns the new state and the
    request's dual multiplier.
    """
    if not 0 < eps_fraction <= 1:
        raise ValueError("eps_fraction must lie in (0, 1]")
    delta = effective_delta(alpha) if delta is None else delta
    state = state.copy()
    paths: dict[tuple[int, ...], float] = {}
    state.flows.append(paths)
    if request.f == 0:
        return state, 0.0
    if not graph.connected(request.s, request.t):
        raise ValueError(f"no path between {request.s} and {request.t}")

    chunks = max(1, math.ceil(1.0 / eps_fraction - 1e-9))
    chunk = request.f * eps_fraction
    loads = state.loads.tolist()
    weights = [edge_increment_weight(L, chunk, alpha) for L in loads]
    routed = 0.0
    path: tuple[int, ...] = ()
    for c in range(chunks):
        amount = chunk if c < chunks - 1 else request.f - routed
        if amount <= 0:
            break
        if amount != chunk:
            weights = [edge_increment_weight(L, amount, alpha) for L in loads]
        _, path = shortest_path(graph, weights, request.s, request.t)
        for k in path:
            loads[k] += amount
            weights[k] = edge_increment_weight(loads[k], chunk, alpha)
        paths[path] = paths.get(path, 0.0) + amount
        routed += amount
    state.loads = np.array(loads)
    return state, _lambda(path, loads, alpha, delta, literal_lambda)


@dataclass(frozen=True)
class RoutingRun:
    state: FlowState
    lam: np.ndarray
    log: tuple[dict, ...]
    eps: float
    delta: float

    def online_cost(self, alpha: float) -> float:
        return self.state.objective(alpha)


def run_online_routing(
    inst: RoutingInstance,
    eps_fraction: float = 0.01,
    delta: float | None = None,
    literal_lambda: bool = False,
) -> RoutingRun:
    problems = validate_routing(inst)
    if problems:
        raise ValueError("invalid routing instance: " + "; ".join(problems))
    delta = effective_delta(inst.alpha) if delta is None else delta
    graph = inst.graph
    state = FlowState.empty(graph.num_edges)
    lam, log = [], []
    for j, req in enumerate(inst.requests):
        state, lam_j = route_request(state, graph, req, eps_fraction, inst.alpha, delta, literal_lambda)
        lam.append(lam_j)
        log.append(
            {
                "request": j,
                "lambda": lam_j,
                "paths": [{"edges": list(p), "flow": f} for p, f in sorted(state.flows[j].items())],
            }
        )
    return RoutingRun(state, np.array(lam), tuple(log), eps_fraction, delta)


def routing_certificate_value(run: RoutingRun, inst: RoutingInstance) -> float:
    """Lower bound sum_j lam_j f_j - (alpha-1) delta^(alpha/(alpha-1)) sum_e L_e^alpha."""
    a = inst.alpha
    demands = np.array([r.f for r in inst.requests])
    energy = run.state.objective(a)
    return float(np.dot(run.lam, demands)) - (a - 1) * run.delta ** (a / (a - 1)) * energy


def lambda_path_slack(run: RoutingRun, inst: RoutingInstance) -> float:
    """Largest relative excess of lam_j over delta times the cheapest marginal
    path cost at final loads; zero for the continuous algorithm.
    """
    a = inst.alpha
    graph = inst.graph
    h = [a * L ** (a - 1) for L in run.state.loads.tolist()]
    worst = 0.0
    for lam_j, req in zip(run.lam, inst.requests):
        if lam_j <= 0:
            continue
        cheapest, _ = shortest_path(graph, h, req.s, req.t)
        if cheapest > 0:
            worst = max(worst, float(lam_j / (run.delta * cheapest)) - 1.0)
    return worst


def routing_dual_certificate(run: RoutingRun, inst: RoutingInstance, kappa: float = DEFAULT_KAPPA) -> CertificateReport:
    """Certify ON <= alpha^alpha * cert * (1 + kappa * eps)."""
    cert = routing_certificate_value(run, inst)
    return build_report(run.online_cost(inst.alpha), cert, inst.alpha**inst.alpha, slack=kappa * run.eps)
