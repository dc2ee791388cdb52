"""Convex relaxation of AC optimal power flow as structured constraint data.

The relaxation lifts the voltage-phasor products into per-branch variables
(real part wr, imaginary part wi) and encloses every nonconvex primitive
in a convex envelope: squared magnitudes, bilinear products (McCormick),
and the sine/cosine of angle differences.  The result is a ConicModel of
linear constraints and second-order cones under a convex quadratic cost,
solvable by any conic solver.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from .network import Network, branch_flow_coefficients


class ModelError(Exception):
    pass


class EmptyBound(ModelError):
    pass


class DomainError(ModelError):
    pass


Terms = list[tuple[int, float]]


def _as_terms(x) -> Terms:
    if isinstance(x, int):
        return [(x, 1.0)]
    return list(x)


def _eval_terms(terms: Terms, x) -> float:
    return sum(c * x[j] for j, c in terms)


@dataclass
class LinearConstraint:
    """terms . x  (relation)  rhs"""
    terms: Terms
    relation: str          # one of "<=", "==", ">="
    rhs: float
    label: str = ""

    def violation(self, x) -> float:
        v = _eval_terms(self.terms, x)
        if self.relation == "<=":
            return v - self.rhs
        if self.relation == ">=":
            return self.rhs - v
        return abs(v - self.rhs)


@dataclass
class SocConstraint:
    """|| rows . x + offsets ||_2  <=  rhs_terms . x + rhs_offset"""
    rows: list[Terms]
    offsets: list[float]
    rhs_terms: Terms
    rhs_offset: float
    label: str = ""

    def violation(self, x) -> float:
        norm = math.hypot(*[_eval_terms(r, x) + o
                            for r, o in zip(self.rows, self.offsets)])
        return norm - (_eval_terms(self.rhs_terms, x) + self.rhs_offset)


@dataclass
class ConicModel:
    var_names: list[str] = field(default_factory=list)
    var_lb: list[float] = field(default_factory=list)
    var_ub: list[float] = field(default_factory=list)
    linear: list[LinearConstraint] = field(default_factory=list)
    socs: list[SocConstraint] = field(default_factory=list)
    obj_quad: dict[int, float] = field(default_factory=dict)   # diagonal, >= 0
    obj_lin: dict[int, float] = field(default_factory=dict)
    obj_const: float = 0.0
    var_index: dict[str, int] = field(default_factory=dict)

    @property
    def n_vars(self) -> int:
        return len(self.var_names)

    def add_var(self, name: str, lb: float = -math.inf, ub: float = math.inf) -> int:
        if lb > ub:
            raise EmptyBound(f"variable {name}: bounds [{lb}, {ub}] are empty")
        if name in self.var_index:
            raise ModelError(f"duplicate variable name {name}")
        j = len(self.var_names)
        self.var_names.append(name)
        self.var_lb.append(lb)
        self.var_ub.append(ub)
        self.var_index[name] = j
        return j

    def add_linear(self, terms: Terms, relation: str, rhs: float,
                   label: str = "") -> LinearConstraint:
        if relation not in ("<=", "==", ">="):
            raise ModelError(f"bad relation {relation!r}")
        con = LinearConstraint(list(terms), relation, rhs, label)
        self._check_vars(con.terms)
        self.linear.append(con)
        return con

    def add_soc(self, rows: list[Terms], offsets: list[float], rhs_terms: Terms,
                rhs_offset: float, label: str = "") -> SocConstraint:
        con = SocConstraint([list(r) for r in rows], list(offsets),
                            list(rhs_terms), rhs_offset, label)
        for r in con.rows:
            self._check_vars(r)
        self._check_vars(con.rhs_terms)
        self.socs.append(con)
        return con

    def _check_vars(self, terms: Terms) -> None:
        for j, _ in terms:
            if not 0 <= j < len(self.var_names):
                raise ModelError(f"constraint references unknown variable {j}")

    def add_objective_term(self, var: int, quad: float = 0.0, lin: float = 0.0) -> None:
        if quad < 0:
            raise ModelError("quadratic objective coefficients must be >= 0")
        if quad:
            self.obj_quad[var] = self.obj_quad.get(var, 0.0) + quad
        if lin:
            self.obj_lin[var] = self.obj_lin.get(var, 0.0) + lin

    def objective_value(self, x) -> float:
        val = self.obj_const
        for j, q in self.obj_quad.items():
            val += q * x[j] * x[j]
        for j, c in self.obj_lin.items():
            val += c * x[j]
        return val

    def max_violations(self, x) -> dict[str, float]:
        """Worst violation per constraint kind at assignment x."""
        bound = 0.0
        for j in range(self.n_vars):
            bound = max(bound, self.var_lb[j] - x[j], x[j] - self.var_ub[j])
        lin = max((c.violation(x) for c in self.linear), default=0.0)
        soc = max((c.violation(x) for c in self.socs), default=0.0)
        return {"bounds": bound, "linear": max(lin, 0.0), "soc": max(soc, 0.0)}

    def is_feasible(self, x, tol: float = 1e-9) -> bool:
        return max(self.max_violations(x).values()) <= tol


# ---------------------------------------------------------------------------
# Envelope primitives
# ---------------------------------------------------------------------------

def square_envelope(model: ConicModel, x, xsq, xl: float, xu: float,
                    label: str = "sq") -> list:
    """Convex hull of xsq = x^2 over [xl, xu].

    Lower side xsq >= x^2 is exact (a rotated cone written as a standard
    second-order cone); the upper side is the secant through the interval
    endpoints.
    """
    if xl > xu:
        raise EmptyBound(f"square envelope: [{xl}, {xu}] is empty")
    x, xsq = _as_terms(x), _as_terms(xsq)
    # x^2 <= xsq * 1  <=>  ||(2x, xsq - 1)|| <= xsq + 1
    c1 = model.add_soc(
        rows=[[(j, 2.0 * c) for j, c in x], list(xsq)],
        offsets=[0.0, -1.0], rhs_terms=list(xsq), rhs_offset=1.0,
        label=f"{label}:lb")
    c2 = model.add_linear(
        xsq + [(j, -(xu + xl) * c) for j, c in x], "<=", -xu * xl,
        label=f"{label}:ub")
    return [c1, c2]


def mccormick(model: ConicModel, x, y, xy, xl: float, xu: float,
              yl: float, yu: float, label: str = "mc") -> list:
    """Four-inequality convex hull of the product xy over a box."""
    if xl > xu or yl > yu:
        raise EmptyBound(f"mccormick: box [{xl},{xu}]x[{yl},{yu}] is empty")
    for b in (xl, xu, yl, yu):
        if not math.isfinite(b):
            raise EmptyBound("mccormick requires finite bounds")
    x, y, xy = _as_terms(x), _as_terms(y), _as_terms(xy)

    def row(cx, cy, rel, rhs, tag):
        terms = xy + [(j, -cy * c) for j, c in y] + [(j, -cx * c) for j, c in x]
        return model.add_linear(terms, rel, rhs, label=f"{label}:{tag}")

    return [
        row(yl, xl, ">=", -xl * yl, "lb1"),   # xy >= xl*y + yl*x - xl*yl
        row(yu, xu, ">=", -xu * yu, "lb2"),   # xy >= xu*y + yu*x - xu*yu
        row(yu, xl, "<=", -xl * yu, "ub1"),   # xy <= xl*y + yu*x - xl*yu
        row(yl, xu, "<=", -xu * yl, "ub2"),   # xy <= xu*y + yl*x - xu*yl
    ]


def sine_envelope(model: ConicModel, theta, sn, theta_max: float,
                  label: str = "sin") -> list:
    """Two tangent-at-half-angle cuts bounding sin over [-theta_max, theta_max]."""
    if not 0 < theta_max <= math.pi / 2:
        raise DomainError(f"sine envelope domain ({theta_max}) outside (0, pi/2]")
    theta, sn = _as_terms(theta), _as_terms(sn)
    k = math.cos(theta_max / 2)
    h = math.sin(theta_max / 2) - (theta_max / 2) * k
    upper = sn + [(j, -k * c) for j, c in theta]
    lower = sn + [(j, -k * c) for j, c in theta]
    return [
        model.add_linear(upper, "<=", h, label=f"{label}:ub"),
        model.add_linear(lower, ">=", -h, label=f"{label}:lb"),
    ]


def cosine_envelope(model: ConicModel, theta, cs, theta_max: float,
                    label: str = "cos", emit_lower: bool = True) -> list:
    """Quadratic upper bound and constant lower bound for cos over
    [-theta_max, theta_max].

    `emit_lower=False` skips the constant lower cut for callers that
    already carry it as a variable bound (an exact duplicate row would
    needlessly degrade the solver's conditioning).
    """
    if not 0 < theta_max <= math.pi / 2:
        raise DomainError(f"cosine envelope domain ({theta_max}) outside (0, pi/2]")
    theta, cs = _as_terms(theta), _as_terms(cs)
    k = (1.0 - math.cos(theta_max)) / (theta_max * theta_max)
    rk = math.sqrt(k)
    # cs <= 1 - k*theta^2  <=>  (sqrt(k)*theta)^2 <= (1 - cs) * 1
    out = [model.add_soc(
        rows=[[(j, 2.0 * rk * c) for j, c in theta], [(j, -c) for j, c in cs]],
        offsets=[0.0, 0.0],
        rhs_terms=[(j, -c) for j, c in cs], rhs_offset=2.0,
        label=f"{label}:ub")]
    if emit_lower:
        out.append(model.add_linear(list(cs), ">=", math.cos(theta_max),
                                    label=f"{label}:lb"))
    return out


# ---------------------------------------------------------------------------
# Full model assembly
# ---------------------------------------------------------------------------

def _product_bounds(al, au, bl, bu):
    corners = (al * bl, al * bu, au * bl, au * bu)
    return min(corners), max(corners)


def build_qc_model(net: Network) -> ConicModel:
    """Assemble the full convex relaxation for a network.

    Variables per bus: voltage magnitude v, angle theta, squared magnitude
    w.  Per branch: lifted real/imaginary parts wr/wi, magnitude product
    vv, relaxed cosine cs and sine sn of the angle difference, plus the
    four directed flow variables.  Per generator: p and q injections.
    """
    m = ConicModel()

    v, th, w = [], [], []
    for bus in net.buses:
        i = bus.index
        v.append(m.add_var(f"v[{i}]", bus.vmin, bus.vmax))
        th.append(m.add_var(f"theta[{i}]"))
        w.append(m.add_var(f"w[{i}]", bus.vmin ** 2, bus.vmax ** 2))

    pg, qg = [], []
    for k, gen in enumerate(net.gens):
        pg.append(m.add_var(f"pg[{k}]", gen.pmin, gen.pmax))
        qg.append(m.add_var(f"qg[{k}]", gen.qmin, gen.qmax))

    branch_vars = []
    for k, br in enumerate(net.branches):
        i, j = br.from_bus, br.to_bus
        lo, hi = br.angle_min, br.angle_max
        dmax = max(abs(lo), abs(hi))
        bi, bj = net.buses[i], net.buses[j]

        vvl, vvu = bi.vmin * bj.vmin, bi.vmax * bj.vmax
        csl = min(math.cos(lo), math.cos(hi))
        csu = 1.0 if lo <= 0.0 <= hi else max(math.cos(lo), math.cos(hi))
        snl, snu = math.sin(lo), math.sin(hi)

        # wr/wi carry no explicit box: the McCormick cuts already imply
        # the product bounds, and duplicating them as bound rows creates
        # degenerate constraint pairs at envelope corners
        names = dict(
            wr=m.add_var(f"wr[{k}]"),
            wi=m.add_var(f"wi[{k}]"),
            vv=m.add_var(f"vv[{k}]", vvl, vvu),
            cs=m.add_var(f"cs[{k}]", csl, csu),
            sn=m.add_var(f"sn[{k}]", snl, snu),
            pf=m.add_var(f"pf[{k}]"), qf=m.add_var(f"qf[{k}]"),
            pt=m.add_var(f"pt[{k}]"), qt=m.add_var(f"qt[{k}]"),
        )
        branch_vars.append(names)

        tdiff = [(th[i], 1.0), (th[j], -1.0)]
        m.add_linear(tdiff, ">=", lo, label=f"angle_lo[{k}]")
        m.add_linear(tdiff, "<=", hi, label=f"angle_hi[{k}]")

        sine_envelope(m, tdiff, names["sn"], dmax, label=f"sin[{k}]")
        # the constant lower cut cs >= cos(dmax) is already the variable bound
        cosine_envelope(m, tdiff, names["cs"], dmax, label=f"cos[{k}]",
                        emit_lower=False)
        mccormick(m, v[i], v[j], names["vv"], bi.vmin, bi.vmax,
                  bj.vmin, bj.vmax, label=f"vv[{k}]")
        mccormick(m, names["vv"], names["cs"], names["wr"], vvl, vvu,
                  csl, csu, label=f"wr[{k}]")
        mccormick(m, names["vv"], names["sn"], names["wi"], vvl, vvu,
                  snl, snu, label=f"wi[{k}]")

        # wi bounded by the tangents of the angle limits (wr > 0 in-domain)
        m.add_linear([(names["wi"], 1.0), (names["wr"], -math.tan(hi))],
                     "<=", 0.0, label=f"tan_hi[{k}]")
        m.add_linear([(names["wi"], 1.0), (names["wr"], -math.tan(lo))],
                     ">=", 0.0, label=f"tan_lo[{k}]")

        # |W_ij|^2 <= W_ii * W_jj, the cone implied by the lifted product:
        # ||(2wr, 2wi, w_i - w_j)|| <= w_i + w_j
        m.add_soc(
            rows=[[(names["wr"], 2.0)], [(names["wi"], 2.0)],
                  [(w[i], 1.0), (w[j], -1.0)]],
            offsets=[0.0, 0.0, 0.0],
            rhs_terms=[(w[i], 1.0), (w[j], 1.0)], rhs_offset=0.0,
            label=f"w_link[{k}]")

        # directed flows in terms of (w_i, w_j, wr, wi)
        c_ff, c_ft, c_tf, c_tt = branch_flow_coefficients(br)
        m.add_linear([(names["pf"], 1.0), (w[i], -c_ff.real),
                      (names["wr"], -c_ft.real), (names["wi"], c_ft.imag)],
                     "==", 0.0, label=f"flow_pf[{k}]")
        m.add_linear([(names["qf"], 1.0), (w[i], -c_ff.imag),
                      (names["wr"], -c_ft.imag), (names["wi"], -c_ft.real)],
                     "==", 0.0, label=f"flow_qf[{k}]")
        m.add_linear([(names["pt"], 1.0), (w[j], -c_tt.real),
                      (names["wr"], -c_tf.real), (names["wi"], -c_tf.imag)],
                     "==", 0.0, label=f"flow_pt[{k}]")
        m.add_linear([(names["qt"], 1.0), (w[j], -c_tt.imag),
                      (names["wr"], -c_tf.imag), (names["wi"], c_tf.real)],
                     "==", 0.0, label=f"flow_qt[{k}]")

        if br.s_max is not None:
            m.add_soc([[(names["pf"], 1.0)], [(names["qf"], 1.0)]], [0.0, 0.0],
                      [], br.s_max, label=f"thermal_f[{k}]")
            m.add_soc([[(names["pt"], 1.0)], [(names["qt"], 1.0)]], [0.0, 0.0],
                      [], br.s_max, label=f"thermal_t[{k}]")

    for bus in net.buses:
        i = bus.index
        square_envelope(m, v[i], w[i], bus.vmin, bus.vmax, label=f"w_def[{i}]")

    m.add_linear([(th[net.ref_bus], 1.0)], "==", 0.0, label="ref_angle")

    # per-bus complex power balance, shunts and charging included via w
    for bus in net.buses:
        i = bus.index
        p_terms = [(w[i], -bus.gs)]
        q_terms = [(w[i], bus.bs)]
        for k, gen in enumerate(net.gens):
            if gen.bus == i:
                p_terms.append((pg[k], 1.0))
                q_terms.append((qg[k], 1.0))
        for k, br in enumerate(net.branches):
            if br.from_bus == i:
                p_terms.append((branch_vars[k]["pf"], -1.0))
                q_terms.append((branch_vars[k]["qf"], -1.0))
            if br.to_bus == i:
                p_terms.append((branch_vars[k]["pt"], -1.0))
                q_terms.append((branch_vars[k]["qt"], -1.0))
        m.add_linear(p_terms, "==", bus.pd, label=f"balance_p[{i}]")
        m.add_linear(q_terms, "==", bus.qd, label=f"balance_q[{i}]")

    for k, gen in enumerate(net.gens):
        m.add_objective_term(pg[k], quad=gen.c2, lin=gen.c1)
        m.obj_const += gen.c0

    return m


def exact_lifting(model: ConicModel, net: Network, v, theta, pg, qg):
    """Assign every model variable its exact nonlinear value at an
    operating point.  Used to certify that the relaxation contains the
    nonconvex feasible set."""
    x = [0.0] * model.n_vars
    idx = model.var_index
    for bus in net.buses:
        i = bus.index
        x[idx[f"v[{i}]"]] = v[i]
        x[idx[f"theta[{i}]"]] = theta[i]
        x[idx[f"w[{i}]"]] = v[i] * v[i]
    for k in range(len(net.gens)):
        x[idx[f"pg[{k}]"]] = pg[k]
        x[idx[f"qg[{k}]"]] = qg[k]
    for k, br in enumerate(net.branches):
        i, j = br.from_bus, br.to_bus
        td = theta[i] - theta[j]
        vv = v[i] * v[j]
        x[idx[f"vv[{k}]"]] = vv
        x[idx[f"cs[{k}]"]] = math.cos(td)
        x[idx[f"sn[{k}]"]] = math.sin(td)
        wr, wi = vv * math.cos(td), vv * math.sin(td)
        x[idx[f"wr[{k}]"]] = wr
        x[idx[f"wi[{k}]"]] = wi
        c_ff, c_ft, c_tf, c_tt = branch_flow_coefficients(br)
        wii, wjj = v[i] ** 2, v[j] ** 2
        x[idx[f"pf[{k}]"]] = c_ff.real * wii + c_ft.real * wr - c_ft.imag * wi
        x[idx[f"qf[{k}]"]] = c_ff.imag * wii + c_ft.imag * wr + c_ft.real * wi
        x[idx[f"pt[{k}]"]] = c_tt.real * wjj + c_tf.real * wr + c_tf.imag * wi
        x[idx[f"qt[{k}]"]] = c_tt.imag * wjj + c_tf.imag * wr - c_tf.real * wi
    return x


# ---------------------------------------------------------------------------
# Text dump (for cross-checking against external solvers)
# ---------------------------------------------------------------------------

def model_to_text(model: ConicModel) -> str:
    """One item per line; whitespace separated; `j:coef` sparse terms."""
    out = ["conicmodel v1"]
    for j, name in enumerate(model.var_names):
        out.append(f"var {name} {model.var_lb[j]!r} {model.var_ub[j]!r}")
    out.append(f"objconst {model.obj_const!r}")
    for j in sorted(model.obj_quad):
        out.append(f"objquad {j} {model.obj_quad[j]!r}")
    for j in sorted(model.obj_lin):
        out.append(f"objlin {j} {model.obj_lin[j]!r}")

    def fmt(terms: Terms) -> str:
        return " ".join(f"{j}:{c!r}" for j, c in terms) if terms else "-"

    for con in model.linear:
        out.append(f"lin {con.relation} {con.rhs!r} {fmt(con.terms)}")
    for con in model.socs:
        out.append(f"soc {len(con.rows)} {con.rhs_offset!r} {fmt(con.rhs_terms)}")
        for r, o in zip(con.rows, con.offsets):
            out.append(f"socrow {o!r} {fmt(r)}")
    return "\n".join(out) + "\n"


def model_from_text(text: str) -> ConicModel:
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines or lines[0].strip() != "conicmodel v1":
        raise ModelError("not a conic model dump (missing header)")
    m = ConicModel()

    def parse_terms(tokens) -> Terms:
        if tokens == ["-"]:
            return []
        return [(int(t.split(":")[0]), float(t.split(":")[1])) for t in tokens]

    i = 1
    while i < len(lines):
        parts = lines[i].split()
        kind = parts[0]
        if kind == "var":
            m.add_var(parts[1], float(parts[2]), float(parts[3]))
        elif kind == "objconst":
            m.obj_const = float(parts[1])
        elif kind == "objquad":
            m.obj_quad[int(parts[1])] = float(parts[2])
        elif kind == "objlin":
            m.obj_lin[int(parts[1])] = float(parts[2])
        elif kind == "lin":
            m.add_linear(parse_terms(parts[3:]), parts[1], float(parts[2]))
        elif kind == "soc":
            nrows = int(parts[1])
            rhs_offset = float(parts[2])
            rhs_terms = parse_terms(parts[3:])
            rows, offsets = [], []
            for r in range(nrows):
                rparts = lines[i + 1 + r].split()
                if rparts[0] != "socrow":
                    raise ModelError(f"expected socrow, got {rparts[0]}")
                offsets.append(float(rparts[1]))
                rows.append(parse_terms(rparts[2:]))
            m.add_soc(rows, offsets, rhs_terms, rhs_offset)
            i += nrows
        else:
            raise ModelError(f"unknown dump line kind {kind!r}")
        i += 1
    return m
