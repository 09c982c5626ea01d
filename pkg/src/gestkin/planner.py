"""Inter-gestural timing as coupled-oscillator relative phasing.

A coupling graph assigns each planning oscillator a node and each coordination
relation a directed edge (i, j, phi, weight) encoding the target relative
phase psi_j - psi_i = phi. Solved two ways: a weighted least-squares solve of
the phase Laplacian (the stationary point of the quadratic potential), and an
explicit gradient-flow simulation of the oscillators until the relative
phases freeze. Steady-state phases map onto activation onsets through the
oscillator period; positive phase means a later onset.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping

import numpy as np

# Default planning cycle: 400 ms.
DEFAULT_OMEGA0_RAD_S = 2.0 * math.pi / 0.4

CONVERGE_STEP_RAD = 1e-8
CONVERGE_STEPS = 100


def wrap_phase(x):
    """Wrap angles to (-pi, pi]."""
    w = np.mod(np.asarray(x, dtype=float) + np.pi, 2.0 * np.pi) - np.pi
    w = np.where(w == -np.pi, np.pi, w)
    return float(w) if np.isscalar(x) or np.ndim(x) == 0 else w


@dataclass(frozen=True)
class CouplingEdge:
    i: str
    j: str
    phi_rad: float
    weight: float = 1.0


@dataclass(frozen=True)
class CouplingGraph:
    omega0_rad_s: float
    reference: str
    nodes: tuple[str, ...]
    edges: tuple[CouplingEdge, ...]

    @property
    def period_ms(self) -> float:
        return 2.0 * math.pi / self.omega0_rad_s * 1000.0


@dataclass(frozen=True)
class PhaseSolution:
    """Relative phases (reference pinned to zero), wrapped to (-pi, pi]."""

    phases: dict[str, float]
    residual_rad: float
    converged: bool
    method: str
    omega0_rad_s: float


def validate_graph(graph: CouplingGraph) -> list[str]:
    problems: list[str] = []
    if not graph.nodes:
        problems.append("graph: no nodes")
    if len(set(graph.nodes)) != len(graph.nodes):
        problems.append("graph: duplicate node ids")
    if graph.reference not in graph.nodes:
        problems.append(f"graph: reference {graph.reference!r} is not a node")
    if not (graph.omega0_rad_s > 0 and math.isfinite(graph.omega0_rad_s)):
        problems.append("graph: omega0_rad_s must be > 0")
    known = set(graph.nodes)
    for e in graph.edges:
        tag = f"edge ({e.i}, {e.j})"
        if e.i not in known or e.j not in known:
            problems.append(f"{tag}: unknown node")
        if e.i == e.j:
            problems.append(f"{tag}: self-coupling")
        if not (e.weight > 0 and math.isfinite(e.weight)):
            problems.append(f"{tag}: weight must be > 0")
        if not (-math.pi < e.phi_rad <= math.pi) or not math.isfinite(e.phi_rad):
            problems.append(f"{tag}: phi_rad must lie in (-pi, pi]")
    if graph.nodes and not problems:
        # connectivity by breadth-first search over undirected couplings
        adj: dict[str, set[str]] = {n: set() for n in graph.nodes}
        for e in graph.edges:
            adj[e.i].add(e.j)
            adj[e.j].add(e.i)
        seen = {graph.nodes[0]}
        frontier = [graph.nodes[0]]
        while frontier:
            nxt = frontier.pop()
            for m in adj[nxt]:
                if m not in seen:
                    seen.add(m)
                    frontier.append(m)
        if seen != known:
            problems.append(f"graph: not connected ({sorted(known - seen)} unreachable)")
    return problems


def _checked(graph: CouplingGraph) -> None:
    problems = validate_graph(graph)
    if problems:
        raise ValueError("invalid coupling graph: " + "; ".join(problems))


def _edge_residual(graph: CouplingGraph, psi: Mapping[str, float]) -> float:
    if not graph.edges:
        return 0.0
    return max(abs(wrap_phase(psi[e.j] - psi[e.i] - e.phi_rad)) for e in graph.edges)


def solve_phases_ls(graph: CouplingGraph) -> PhaseSolution:
    """Weighted least-squares relative phases.

    Minimizes sum over edges of weight * (psi_j - psi_i - phi)^2 subject to
    psi_ref = 0 by solving the reduced weighted-Laplacian normal equations.
    Exact for consistent (e.g. tree) graphs; for frustrated graphs the
    residual reports the largest remaining edge error.
    """
    _checked(graph)
    idx = {n: k for k, n in enumerate(graph.nodes)}
    n = len(graph.nodes)
    lap = np.zeros((n, n))
    rhs = np.zeros(n)
    for e in graph.edges:
        i, j, a = idx[e.i], idx[e.j], e.weight
        lap[i, i] += a
        lap[j, j] += a
        lap[i, j] -= a
        lap[j, i] -= a
        rhs[j] += a * e.phi_rad
        rhs[i] -= a * e.phi_rad
    keep = [k for k in range(n) if k != idx[graph.reference]]
    psi = np.zeros(n)
    if keep:
        sol = np.linalg.solve(lap[np.ix_(keep, keep)], rhs[keep])
        psi[keep] = sol
    phases = {node: float(wrap_phase(psi[idx[node]])) for node in graph.nodes}
    return PhaseSolution(
        phases=phases,
        residual_rad=_edge_residual(graph, phases),
        converged=True,
        method="ls",
        omega0_rad_s=graph.omega0_rad_s,
    )


def simulate_phases(
    graph: CouplingGraph,
    init: Mapping[str, float],
    dt_s: float = 1e-4,
    t_max_s: float = 30.0,
) -> PhaseSolution:
    """Gradient-flow oscillator simulation of the coupling graph.

    Each oscillator runs at omega0 plus the pull of its couplings (potential
    V = -sum weight*cos(theta_j - theta_i - phi)), stepped by explicit Euler.
    Converged means every pairwise relative phase moved less than 1e-8 rad
    per step for 100 consecutive steps; hitting t_max first leaves
    converged=False. Results depend on init: frustrated graphs have multiple
    attractors, and perfectly symmetric inits can sit on saddle points.
    """
    _checked(graph)
    if not 0 < dt_s <= 1e-3:
        raise ValueError(f"dt_s={dt_s} outside (0, 1e-3]")
    missing = [n for n in graph.nodes if n not in init]
    if missing:
        raise ValueError(f"init is missing phases for {missing}")
    idx = {n: k for k, n in enumerate(graph.nodes)}
    theta = np.array([float(init[n]) for n in graph.nodes])
    m = len(graph.edges)
    inc = np.zeros((m, len(graph.nodes)))
    phi = np.zeros(m)
    wts = np.zeros(m)
    for r, e in enumerate(graph.edges):
        inc[r, idx[e.j]] = 1.0
        inc[r, idx[e.i]] = -1.0
        phi[r] = e.phi_rad
        wts[r] = e.weight
    ref = idx[graph.reference]

    steps = int(round(t_max_s / dt_s))
    quiet = 0
    converged = False
    rel_prev = theta - theta[ref]
    for _ in range(steps):
        pull = wts * np.sin(inc @ theta - phi) if m else np.zeros(0)
        theta = theta + dt_s * (graph.omega0_rad_s - inc.T @ pull)
        rel = theta - theta[ref]
        delta = rel - rel_prev
        rel_prev = rel
        # max over node pairs of the per-step relative-phase change
        if (delta.max() - delta.min() if len(delta) > 1 else 0.0) < CONVERGE_STEP_RAD:
            quiet += 1
            if quiet >= CONVERGE_STEPS:
                converged = True
                break
        else:
            quiet = 0

    phases = {n: float(wrap_phase(theta[idx[n]] - theta[ref])) for n in graph.nodes}
    return PhaseSolution(
        phases=phases,
        residual_rad=_edge_residual(graph, phases),
        converged=converged,
        method="osc",
        omega0_rad_s=graph.omega0_rad_s,
    )


def phases_to_onsets(
    solution: PhaseSolution | Mapping[str, float],
    omega0_rad_s: float | None = None,
    t_ref_ms: float = 0.0,
) -> dict[str, float]:
    """Map steady-state relative phases to activation onsets in ms.

    onset = t_ref + psi / (2*pi) * period; positive phase lags the reference.
    Accepts a PhaseSolution (which must be converged) or a plain mapping plus
    an explicit omega0.
    """
    if isinstance(solution, PhaseSolution):
        if not solution.converged:
            raise ValueError("cannot place onsets from an unconverged phase solution")
        phases = solution.phases
        omega0 = solution.omega0_rad_s
    else:
        phases = dict(solution)
        omega0 = omega0_rad_s
    if omega0 is None or not omega0 > 0:
        raise ValueError("phases_to_onsets needs a positive omega0_rad_s")
    period_ms = 2.0 * math.pi / omega0 * 1000.0
    return {n: t_ref_ms + psi / (2.0 * math.pi) * period_ms for n, psi in phases.items()}


def graph_to_dict(graph: CouplingGraph) -> dict:
    return {
        "omega0_rad_s": graph.omega0_rad_s,
        "reference": graph.reference,
        "nodes": list(graph.nodes),
        "edges": [
            {"i": e.i, "j": e.j, "phi_rad": e.phi_rad, "weight": e.weight}
            for e in graph.edges
        ],
    }


def graph_from_dict(data: dict) -> CouplingGraph:
    try:
        graph = CouplingGraph(
            omega0_rad_s=float(data["omega0_rad_s"]),
            reference=str(data["reference"]),
            nodes=tuple(str(n) for n in data["nodes"]),
            edges=tuple(
                CouplingEdge(
                    i=str(e["i"]),
                    j=str(e["j"]),
                    phi_rad=float(e["phi_rad"]),
                    weight=float(e.get("weight", 1.0)),
                )
                for e in data["edges"]
            ),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise ValueError(f"malformed coupling graph data: {exc}") from exc
    _checked(graph)
    return graph


def save_graph(graph: CouplingGraph, path: str | Path) -> None:
    Path(path).write_text(json.dumps(graph_to_dict(graph), indent=2) + "\n", encoding="utf-8")


def load_graph(path: str | Path) -> CouplingGraph:
    try:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ValueError(f"could not parse coupling graph {path}: {exc}") from exc
    return graph_from_dict(data)


def c_center_graph(
    anti_weight: float = 1.0,
    in_weight: float = 1.0,
    omega0_rad_s: float = DEFAULT_OMEGA0_RAD_S,
) -> CouplingGraph:
    """Two consonants in-phase with a shared vowel, anti-phase with each other."""
    return CouplingGraph(
        omega0_rad_s=omega0_rad_s,
        reference="V",
        nodes=("C1", "C2", "V"),
        edges=(
            CouplingEdge("C1", "V", 0.0, in_weight),
            CouplingEdge("C2", "V", 0.0, in_weight),
            CouplingEdge("C1", "C2", math.pi, anti_weight),
        ),
    )
