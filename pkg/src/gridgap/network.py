"""Validated per-unit electrical network model.

Converts raw MATPOWER records into dense, per-unit data ready for
constraint construction: MW/MVAr are divided by the MVA base, degrees
become radians, buses are renumbered densely, and each branch carries the
complex flow coefficients of the full Pi model (series impedance, total
line charging, off-nominal tap, phase shift).
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field

from .case_io import BUS_REF, RawCase


class NetworkError(Exception):
    pass


class Islanded(NetworkError):
    pass


class NoReferenceBus(NetworkError):
    pass


class MultipleReferenceBuses(NetworkError):
    pass


class VoltageBoundEmpty(NetworkError):
    pass


class UnsupportedCostModel(NetworkError):
    pass


DEFAULT_ANGLE_BOUND_DEG = 30.0


@dataclass
class Bus:
    index: int
    original_id: int
    vmin: float
    vmax: float
    pd: float
    qd: float
    gs: float
    bs: float


@dataclass
class Gen:
    bus: int
    pmin: float
    pmax: float
    qmin: float
    qmax: float
    c2: float = 0.0   # $/h per p.u.^2
    c1: float = 0.0   # $/h per p.u.
    c0: float = 0.0   # $/h


@dataclass
class Branch:
    from_bus: int
    to_bus: int
    g: float               # series conductance, p.u.
    b: float               # series susceptance, p.u.
    charge_b: float        # total line charging susceptance, p.u.
    tap: float
    shift: float           # radians
    s_max: float | None    # p.u. apparent power limit, None = unlimited
    angle_min: float       # radians
    angle_max: float


@dataclass
class Network:
    name: str
    base_mva: float
    buses: list[Bus]
    gens: list[Gen]
    branches: list[Branch]
    ref_bus: int
    bus_of_id: dict[int, int] = field(default_factory=dict)

    @property
    def n_bus(self) -> int:
        return len(self.buses)


def build_network(raw: RawCase,
                  default_angle_bound_deg: float = DEFAULT_ANGLE_BOUND_DEG) -> Network:
    """Validate and convert a RawCase into a per-unit Network.

    Out-of-service generators and branches are dropped.  Angle-difference
    bounds falling outside (-pi/2, pi/2), or absent (|bound| >= 360 deg is
    the MATPOWER idiom for "none"), are replaced by the symmetric default.
    """
    base = raw.base_mva
    delta = math.radians(default_angle_bound_deg)
    if not 0 < delta < math.pi / 2:
        raise NetworkError("default angle bound must lie in (0, 90) degrees")

    buses = []
    bus_of_id = {}
    ref = None
    for i, row in enumerate(raw.bus_rows):
        if row.vmin <= 0 or row.vmax < row.vmin:
            raise VoltageBoundEmpty(
                f"bus {row.id}: voltage bounds [{row.vmin}, {row.vmax}] are empty")
        bus_of_id[row.id] = i
        buses.append(Bus(index=i, original_id=row.id,
                         vmin=row.vmin, vmax=row.vmax,
                         pd=row.pd / base, qd=row.qd / base,
                         gs=row.gs / base, bs=row.bs / base))
        if row.type_code == BUS_REF:
            if ref is not None:
                raise MultipleReferenceBuses(
                    f"buses {buses[ref].original_id} and {row.id} are both slack")
            ref = i
    if ref is None:
        raise NoReferenceBus("no slack bus in case")

    gens = []
    for k, row in enumerate(raw.gen_rows):
        if row.status == 0:
            continue
        if row.pmax < row.pmin or row.qmax < row.qmin:
            raise NetworkError(f"generator {k}: empty P or Q range")
        gen = Gen(bus=bus_of_id[row.bus],
                  pmin=row.pmin / base, pmax=row.pmax / base,
                  qmin=row.qmin / base, qmax=row.qmax / base)
        if raw.gencost_rows:
            cost = raw.gencost_rows[k]
            if cost.model != 2:
                raise UnsupportedCostModel(
                    f"generator {k}: only polynomial cost curves are supported")
            coeffs = list(cost.coefficients)
            if len(coeffs) > 3:
                raise UnsupportedCostModel(
                    f"generator {k}: cost degree {len(coeffs) - 1} > 2")
            while len(coeffs) < 3:
                coeffs.insert(0, 0.0)
            c2, c1, c0 = coeffs
            if c2 < 0:
                raise UnsupportedCostModel(f"generator {k}: concave cost (c2 < 0)")
            # $/h over MW -> $/h over p.u.
            gen.c2, gen.c1, gen.c0 = c2 * base * base, c1 * base, c0
        gens.append(gen)

    branches = []
    for row in raw.branch_rows:
        if row.status == 0:
            continue
        lo, hi = math.radians(row.angmin), math.radians(row.angmax)
        if not -math.pi / 2 < lo < math.pi / 2:
            lo = -delta
        if not -math.pi / 2 < hi < math.pi / 2:
            hi = delta
        if lo >= hi:  # includes the MATPOWER (0, 0) = "unlimited" idiom
            lo, hi = -delta, delta
        branches.append(Branch(
            from_bus=bus_of_id[row.from_bus], to_bus=bus_of_id[row.to_bus],
            g=row.r / (row.r ** 2 + row.x ** 2),
            b=-row.x / (row.r ** 2 + row.x ** 2),
            charge_b=row.b_charge,
            tap=row.tap if row.tap > 0 else 1.0,
            shift=math.radians(row.shift),
            s_max=(row.rate_a / base) if row.rate_a > 0 else None,
            angle_min=lo, angle_max=hi))

    _check_connected(len(buses), branches)

    return Network(name=raw.name, base_mva=base, buses=buses, gens=gens,
                   branches=branches, ref_bus=ref, bus_of_id=bus_of_id)


def _check_connected(n: int, branches: list[Branch]) -> None:
    if n == 0:
        raise NetworkError("network has no buses")
    adj = [[] for _ in range(n)]
    for br in branches:
        adj[br.from_bus].append(br.to_bus)
        adj[br.to_bus].append(br.from_bus)
    seen = [False] * n
    stack = [0]
    seen[0] = True
    count = 1
    while stack:
        u = stack.pop()
        for v in adj[u]:
            if not seen[v]:
                seen[v] = True
                count += 1
                stack.append(v)
    if count != n:
        raise Islanded(f"graph is not connected: reached {count} of {n} buses")


def branch_flow_coefficients(br: Branch) -> tuple[complex, complex, complex, complex]:
    """Complex coefficients (c_ff, c_ft, c_tf, c_tt) of the Pi model.

    With W_ii = |V_i|^2, W_ij = V_i * conj(V_j):

        S_from = c_ff * W_ii + c_ft * W_ij
        S_to   = c_tt * W_jj + c_tf * W_ji

    For tap = 1, shift = 0 and no charging this reduces to the bare
    series-admittance flow conj(Y) * W_ii - conj(Y) * W_ij.
    """
    y = complex(br.g, br.b)
    ysh = complex(0.0, br.charge_b / 2.0)
    t = br.tap * cmath.exp(1j * br.shift)
    y_ff = (y + ysh) / (br.tap ** 2)
    y_ft = -y / t.conjugate()
    y_tf = -y / t
    y_tt = y + ysh
    return (y_ff.conjugate(), y_ft.conjugate(), y_tf.conjugate(), y_tt.conjugate())


def branch_flows(br: Branch, v_from: complex, v_to: complex) -> tuple[complex, complex]:
    """Exact Pi-model power flow at both branch ends for given phasors."""
    c_ff, c_ft, c_tf, c_tt = branch_flow_coefficients(br)
    w_ff = v_from * v_from.conjugate()
    w_tt = v_to * v_to.conjugate()
    w_ft = v_from * v_to.conjugate()
    s_from = c_ff * w_ff + c_ft * w_ft
    s_to = c_tt * w_tt + c_tf * w_ft.conjugate()
    return s_from, s_to


def extract_graph(net: Network):
    """Simple undirected bus-branch topology (parallel circuits merged)."""
    from .graphlets import UndirectedGraph

    edges = {(min(br.from_bus, br.to_bus), max(br.from_bus, br.to_bus))
             for br in net.branches}
    return UndirectedGraph(net.n_bus, sorted(edges))
