"""Feasibility and objective evaluation of candidate operating points,
plus the optimality-gap bookkeeping between local objectives and
relaxation lower bounds."""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field

from .case_io import BaselineTable
from .network import Network, branch_flows
from .solver import SolveResult

# numerical slack on the lower-bound property, in percentage points
GAP_SLACK_PP = 1e-4


class EvaluationError(Exception):
    pass


class DimensionMismatch(EvaluationError):
    pass


class MissingBaseline(EvaluationError):
    pass


class UnsolvedRelaxation(EvaluationError):
    pass


class BrokenRelaxation(EvaluationError):
    """The reported bound exceeds the baseline by more than numerical slack."""


@dataclass
class OperatingPoint:
    v: list[float]        # per-bus magnitude, p.u.
    theta: list[float]    # per-bus angle, radians
    pg: list[float]       # per-gen active injection, p.u.
    qg: list[float]       # per-gen reactive injection, p.u.


@dataclass
class FeasibilityReport:
    violations: dict[str, float] = field(default_factory=dict)
    objective: float = 0.0   # $/h

    @property
    def max_violation(self) -> float:
        return max(self.violations.values(), default=0.0)

    def feasible(self, tol: float = 1e-6) -> bool:
        return self.max_violation <= tol


def evaluate_point(net: Network, pt: OperatingPoint) -> FeasibilityReport:
    """Exact nonlinear evaluation: Pi-model flows, complex power mismatch,
    bound violations per family, and the quadratic cost."""
    nb, ng = net.n_bus, len(net.gens)
    if len(pt.v) != nb or len(pt.theta) != nb or len(pt.pg) != ng or len(pt.qg) != ng:
        raise DimensionMismatch(
            f"point dimensions ({len(pt.v)}, {len(pt.theta)}, {len(pt.pg)}, "
            f"{len(pt.qg)}) do not match network ({nb}, {nb}, {ng}, {ng})")
    for arr in (pt.v, pt.theta, pt.pg, pt.qg):
        if any(not math.isfinite(u) for u in arr):
            raise EvaluationError("operating point has non-finite entries")

    phasor = [pt.v[i] * cmath.exp(1j * pt.theta[i]) for i in range(nb)]
    mismatch = [0j] * nb
    for bus in net.buses:
        i = bus.index
        w = pt.v[i] * pt.v[i]
        mismatch[i] -= complex(bus.pd, bus.qd)
        mismatch[i] -= complex(bus.gs, -bus.bs) * w
    for k, gen in enumerate(net.gens):
        mismatch[gen.bus] += complex(pt.pg[k], pt.qg[k])

    thermal = 0.0
    angle = 0.0
    for br in net.branches:
        s_from, s_to = branch_flows(br, phasor[br.from_bus], phasor[br.to_bus])
        mismatch[br.from_bus] -= s_from
        mismatch[br.to_bus] -= s_to
        if br.s_max is not None:
            thermal = max(thermal, abs(s_from) - br.s_max, abs(s_to) - br.s_max)
        tdiff = pt.theta[br.from_bus] - pt.theta[br.to_bus]
        angle = max(angle, br.angle_min - tdiff, tdiff - br.angle_max)

    voltage = 0.0
    for bus in net.buses:
        voltage = max(voltage, bus.vmin - pt.v[bus.index],
                      pt.v[bus.index] - bus.vmax)

    generation = 0.0
    objective = 0.0
    for k, gen in enumerate(net.gens):
        generation = max(generation, gen.pmin - pt.pg[k], pt.pg[k] - gen.pmax,
                         gen.qmin - pt.qg[k], pt.qg[k] - gen.qmax)
        objective += gen.c2 * pt.pg[k] ** 2 + gen.c1 * pt.pg[k] + gen.c0

    return FeasibilityReport(
        violations={
            "power_balance": max(abs(m) for m in mismatch) if nb else 0.0,
            "voltage": max(voltage, 0.0),
            "generation": max(generation, 0.0),
            "thermal": max(thermal, 0.0),
            "angle": max(angle, 0.0),
        },
        objective=objective)


@dataclass
class GapRecord:
    case_name: str
    local_objective: float     # $/h
    relaxation_bound: float    # $/h
    gap_percent: float
    suspicious: bool = False   # bound marginally above baseline


def compute_gap(case_name: str, baseline: BaselineTable,
                bound: SolveResult) -> GapRecord:
    if case_name not in baseline:
        raise MissingBaseline(f"no baseline objective for {case_name!r}")
    if bound.status != "optimal":
        raise UnsolvedRelaxation(
            f"relaxation for {case_name!r} ended with status {bound.status}")
    local = baseline.objective(case_name)
    gap = 100.0 * (local - bound.objective) / local
    if gap < -GAP_SLACK_PP:
        raise BrokenRelaxation(
            f"{case_name}: bound {bound.objective} exceeds baseline {local} "
            f"(gap {gap} pp); relaxation or baseline is wrong")
    return GapRecord(case_name=case_name, local_objective=local,
                     relaxation_bound=bound.objective, gap_percent=gap,
                     suspicious=gap < 0.0)


def gap_records_to_csv(records: list[GapRecord]) -> str:
    lines = ["case,local,bound,gap_percent"]
    for r in records:
        lines.append(f"{r.case_name},{r.local_objective!r},"
                     f"{r.relaxation_bound!r},{r.gap_percent!r}")
    return "\n".join(lines) + "\n"


# --- operating point text format: one `name value` pair per line -----------

def point_to_text(pt: OperatingPoint) -> str:
    lines = []
    for i, val in enumerate(pt.v):
        lines.append(f"v[{i}] {val!r}")
    for i, val in enumerate(pt.theta):
        lines.append(f"theta[{i}] {val!r}")
    for k, val in enumerate(pt.pg):
        lines.append(f"pg[{k}] {val!r}")
    for k, val in enumerate(pt.qg):
        lines.append(f"qg[{k}] {val!r}")
    return "\n".join(lines) + "\n"


def point_from_text(text: str, net: Network) -> OperatingPoint:
    values = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if len(parts) != 2:
            raise EvaluationError(f"line {lineno}: expected `name value`")
        values[parts[0]] = float(parts[1])
    nb, ng = net.n_bus, len(net.gens)
    try:
        return OperatingPoint(
            v=[values[f"v[{i}]"] for i in range(nb)],
            theta=[values[f"theta[{i}]"] for i in range(nb)],
            pg=[values[f"pg[{k}]"] for k in range(ng)],
            qg=[values[f"qg[{k}]"] for k in range(ng)])
    except KeyError as exc:
        raise DimensionMismatch(f"operating point is missing entry {exc}") from exc
