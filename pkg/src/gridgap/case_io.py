"""Readers and writers for grid case data.

Handles MATPOWER case-format v2 text (the `mpc.*` matrix syntax), the
baseline objective CSV, and the census CSV emitted by the toolkit.  All
numeric I/O is locale-independent (`.` decimal separator).
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field

from .graphlets import GraphletCensus, GraphletType


class CaseFormatError(Exception):
    """Base class for case/baseline parsing failures."""


class MissingSection(CaseFormatError):
    pass


class MalformedMatrix(CaseFormatError):
    pass


class DuplicateBusId(CaseFormatError):
    pass


class DanglingReference(CaseFormatError):
    pass


class UnsupportedCaseVersion(CaseFormatError):
    pass


class DuplicateCase(CaseFormatError):
    pass


class NonPositiveObjective(CaseFormatError):
    pass


class MalformedRow(CaseFormatError):
    pass


# MATPOWER bus type codes
BUS_PQ = 1
BUS_PV = 2
BUS_REF = 3
BUS_ISOLATED = 4


@dataclass
class BusRow:
    id: int
    type_code: int
    pd: float          # MW
    qd: float          # MVAr
    gs: float          # MW at V = 1 p.u.
    bs: float          # MVAr at V = 1 p.u.
    vm: float          # p.u.
    va: float          # degrees
    vmax: float        # p.u.
    vmin: float        # p.u.


@dataclass
class GenRow:
    bus: int
    qmax: float        # MVAr
    qmin: float
    status: int
    pmax: float        # MW
    pmin: float


@dataclass
class GenCostRow:
    model: int                       # 2 = polynomial
    coefficients: list[float]        # highest degree first


@dataclass
class BranchRow:
    from_bus: int
    to_bus: int
    r: float           # p.u.
    x: float
    b_charge: float    # p.u. total line charging
    rate_a: float      # MVA, 0 = unlimited
    tap: float         # ratio, 0 = nominal
    shift: float       # degrees
    status: int
    angmin: float      # degrees
    angmax: float


@dataclass
class RawCase:
    name: str
    base_mva: float
    bus_rows: list[BusRow] = field(default_factory=list)
    gen_rows: list[GenRow] = field(default_factory=list)
    branch_rows: list[BranchRow] = field(default_factory=list)
    gencost_rows: list[GenCostRow] = field(default_factory=list)


_NAME_RE = re.compile(r"function\s+mpc\s*=\s*(\w+)")
_SCALAR_RE = re.compile(r"mpc\.(\w+)\s*=\s*([^;\[]+);")
_MATRIX_RE = re.compile(r"mpc\.(\w+)\s*=\s*\[(.*?)\];", re.DOTALL)


def _strip_comments(text: str) -> str:
    return "\n".join(line.split("%", 1)[0] for line in text.splitlines())


def _parse_matrix(name: str, body: str) -> list[list[float]]:
    rows = []
    # rows are separated by `;` or newlines
    for chunk in re.split(r"[;\n]", body):
        chunk = chunk.strip()
        if not chunk:
            continue
        try:
            rows.append([float(tok) for tok in chunk.split()])
        except ValueError as exc:
            raise MalformedMatrix(f"mpc.{name}: non-numeric row {chunk!r}") from exc
    widths = {len(r) for r in rows}
    if len(widths) > 1:
        raise MalformedMatrix(f"mpc.{name}: inconsistent column counts {sorted(widths)}")
    return rows


def _require_cols(name: str, rows: list[list[float]], n: int) -> None:
    for row in rows:
        if len(row) < n:
            raise MalformedMatrix(
                f"mpc.{name}: row has {len(row)} columns, expected >= {n}")


def parse_case(text: str) -> RawCase:
    """Parse MATPOWER case-format v2 text into raw records.

    Comments, trailing semicolons and extra (unknown) matrix columns are
    tolerated; extra columns are ignored.
    """
    clean = _strip_comments(text)

    m = _NAME_RE.search(clean)
    name = m.group(1) if m else "case"

    scalars = {k: v.strip() for k, v in _SCALAR_RE.findall(clean)}
    version = scalars.get("version", "").strip("'\"")
    if version and version != "2":
        raise UnsupportedCaseVersion(
            f"case format version {version!r} not supported; only v2 is accepted")
    if "baseMVA" not in scalars:
        raise MissingSection("mpc.baseMVA not found")
    base_mva = float(scalars["baseMVA"])
    if base_mva <= 0:
        raise CaseFormatError(f"baseMVA must be positive, got {base_mva}")

    matrices = {k: _parse_matrix(k, body) for k, body in _MATRIX_RE.findall(clean)}
    for section in ("bus", "gen", "branch"):
        if section not in matrices:
            raise MissingSection(f"mpc.{section} not found")

    _require_cols("bus", matrices["bus"], 13)
    bus_rows = []
    seen = set()
    for row in matrices["bus"]:
        bus_id = int(row[0])
        if bus_id in seen:
            raise DuplicateBusId(f"bus id {bus_id} appears more than once")
        seen.add(bus_id)
        bus_rows.append(BusRow(
            id=bus_id, type_code=int(row[1]), pd=row[2], qd=row[3],
            gs=row[4], bs=row[5], vm=row[7], va=row[8],
            vmax=row[11], vmin=row[12]))

    _require_cols("gen", matrices["gen"], 10)
    gen_rows = []
    for row in matrices["gen"]:
        bus = int(row[0])
        if bus not in seen:
            raise DanglingReference(f"generator references unknown bus {bus}")
        gen_rows.append(GenRow(
            bus=bus, qmax=row[3], qmin=row[4], status=int(row[7]),
            pmax=row[8], pmin=row[9]))

    _require_cols("branch", matrices["branch"], 11)
    branch_rows = []
    for row in matrices["branch"]:
        f, t = int(row[0]), int(row[1])
        if f not in seen or t not in seen:
            raise DanglingReference(f"branch {f}-{t} references an unknown bus")
        if f == t:
            raise CaseFormatError(f"branch {f}-{t} is a self-loop")
        status = int(row[10])
        if status and row[2] == 0.0 and row[3] == 0.0:
            raise CaseFormatError(f"in-service branch {f}-{t} has zero impedance")
        branch_rows.append(BranchRow(
            from_bus=f, to_bus=t, r=row[2], x=row[3], b_charge=row[4],
            rate_a=row[5], tap=row[8], shift=row[9], status=status,
            angmin=row[11] if len(row) > 11 else -360.0,
            angmax=row[12] if len(row) > 12 else 360.0))

    gencost_rows = []
    if "gencost" in matrices:
        if len(matrices["gencost"]) != len(gen_rows):
            raise CaseFormatError(
                f"{len(matrices['gencost'])} gencost rows for {len(gen_rows)} generators")
        for row in matrices["gencost"]:
            if len(row) < 4:
                raise MalformedMatrix("gencost row too short")
            n = int(row[3])
            if len(row) < 4 + n:
                raise MalformedMatrix("gencost row missing coefficients")
            gencost_rows.append(GenCostRow(model=int(row[0]),
                                           coefficients=[float(c) for c in row[4:4 + n]]))

    return RawCase(name=name, base_mva=base_mva, bus_rows=bus_rows,
                   gen_rows=gen_rows, branch_rows=branch_rows,
                   gencost_rows=gencost_rows)


def serialize_case(case: RawCase) -> str:
    """Write the captured fields back out in MATPOWER v2 syntax."""
    out = [f"function mpc = {case.name}", "mpc.version = '2';",
           f"mpc.baseMVA = {case.base_mva!r};", "mpc.bus = ["]
    for b in case.bus_rows:
        out.append(f"\t{b.id}\t{b.type_code}\t{b.pd!r}\t{b.qd!r}\t{b.gs!r}\t{b.bs!r}"
                   f"\t1\t{b.vm!r}\t{b.va!r}\t0\t1\t{b.vmax!r}\t{b.vmin!r};")
    out.append("];")
    out.append("mpc.gen = [")
    for g in case.gen_rows:
        out.append(f"\t{g.bus}\t0\t0\t{g.qmax!r}\t{g.qmin!r}\t1\t{case.base_mva!r}"
                   f"\t{g.status}\t{g.pmax!r}\t{g.pmin!r};")
    out.append("];")
    out.append("mpc.branch = [")
    for br in case.branch_rows:
        out.append(f"\t{br.from_bus}\t{br.to_bus}\t{br.r!r}\t{br.x!r}\t{br.b_charge!r}"
                   f"\t{br.rate_a!r}\t0\t0\t{br.tap!r}\t{br.shift!r}\t{br.status}"
                   f"\t{br.angmin!r}\t{br.angmax!r};")
    out.append("];")
    if case.gencost_rows:
        out.append("mpc.gencost = [")
        for c in case.gencost_rows:
            coeffs = "\t".join(repr(x) for x in c.coefficients)
            out.append(f"\t{c.model}\t0\t0\t{len(c.coefficients)}\t{coeffs};")
        out.append("];")
    return "\n".join(out) + "\n"


@dataclass
class BaselineTable:
    entries: dict[str, float] = field(default_factory=dict)

    def objective(self, case_name: str) -> float:
        return self.entries[case_name]

    def __contains__(self, case_name: str) -> bool:
        return case_name in self.entries


def parse_baselines(text: str) -> BaselineTable:
    """Parse a `case,objective` CSV of local AC-feasible objective values."""
    lines = [ln.strip() for ln in text.splitlines() if ln.strip()]
    if not lines or [c.strip() for c in lines[0].split(",")] != ["case", "objective"]:
        raise MalformedRow("expected header `case,objective`")
    table = BaselineTable()
    for lineno, line in enumerate(lines[1:], start=2):
        parts = [p.strip() for p in line.split(",")]
        if len(parts) != 2:
            raise MalformedRow(f"line {lineno}: expected 2 fields, got {len(parts)}")
        name = parts[0]
        try:
            obj = float(parts[1])
        except ValueError as exc:
            raise MalformedRow(f"line {lineno}: bad objective {parts[1]!r}") from exc
        if name in table.entries:
            raise DuplicateCase(f"line {lineno}: duplicate case {name!r}")
        if not obj > 0 or obj != obj or obj == float("inf"):
            raise NonPositiveObjective(f"line {lineno}: objective must be finite and > 0")
        table.entries[name] = obj
    return table


_CENSUS_HEADER = ("case,total,"
                  + ",".join(f"count_type{t.value}" for t in GraphletType) + ","
                  + ",".join(f"pct_type{t.value}" for t in GraphletType))


def write_census_csv(census_list: list[tuple[str, GraphletCensus]]) -> str:
    """One row per case: name, total, six counts, six percentages.

    Percentages carry 10 significant digits so they can be compared
    against published tables digit for digit.
    """
    lines = [_CENSUS_HEADER]
    for name, cen in census_list:
        pct = cen.percentages
        lines.append(",".join(
            [name, str(cen.total)]
            + [str(cen.counts[t]) for t in GraphletType]
            + [f"{pct[t]:.10g}" for t in GraphletType]))
    return "\n".join(lines) + "\n"
