"""Self-contained primal-dual interior-point solver for the conic models.

The ConicModel (variables with bounds, linear rows, second-order cones,
convex diagonal quadratic objective) is converted to the standard form

    minimize    c'x
    subject to  A x = b
                G x + s = h,   s in K = R+^l x SOC(q_1) x ... x SOC(q_N)

with the quadratic objective rewritten through per-variable epigraph
variables (t >= q*x^2 as a small second-order cone).  The solver runs a
Mehrotra-style predictor-corrector iteration with Nesterov-Todd scaling,
solving the reduced KKT system by sparse LU with iterative refinement.
Termination decisions use residuals of the original (unequilibrated)
data, so a returned `optimal` status is meaningful regardless of scaling.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import splu

from .qc import ConicModel

STEP_BACKOFF = 0.99
KKT_REG = 1e-10
KKT_REFINE_STEPS = 6
CENTRALITY_ROUNDS = 3
CENTRALITY_GOAL = 0.9
MU_FLOOR = 1e-12


@dataclass
class SolverConfig:
    feas_tol: float = 1e-8
    gap_tol: float = 1e-8
    max_iterations: int = 200
    scaling: str = "ruiz_equilibration"   # or "none"
    verbose: bool = False

    def __post_init__(self):
        if self.feas_tol <= 0 or self.gap_tol <= 0:
            raise ValueError("tolerances must be positive")
        if self.scaling not in ("ruiz_equilibration", "none"):
            raise ValueError(f"unknown scaling {self.scaling!r}")


@dataclass
class SolveResult:
    status: str                      # optimal / infeasible / unbounded /
                                     # iteration_limit / numerical_failure
    objective: float
    primal: dict[str, float]
    duality_gap: float
    max_primal_residual: float
    max_dual_residual: float
    iterations: int
    # raw standard-form vectors, kept for independent certification
    x: np.ndarray | None = None
    y: np.ndarray | None = None
    z: np.ndarray | None = None
    s: np.ndarray | None = None


# ---------------------------------------------------------------------------
# Standard-form conversion
# ---------------------------------------------------------------------------

@dataclass
class StandardForm:
    P: sp.csc_matrix          # diagonal PSD quadratic term
    c: np.ndarray
    A: sp.csc_matrix
    b: np.ndarray
    G: sp.csc_matrix
    h: np.ndarray
    dims_l: int
    dims_q: list[int]
    obj_const: float


def standard_form(model: ConicModel) -> StandardForm:
    """Deterministic conversion of a ConicModel to conic-QP standard form:

        min 1/2 x'Px + c'x   s.t.  Ax = b,  Gx + s = h,  s in K.
    """
    n = model.n_vars

    pdiag = np.zeros(n)
    for j, coef in model.obj_quad.items():
        pdiag[j] = 2.0 * coef     # 1/2 x'Px convention
    c = np.zeros(n)
    for j, coef in model.obj_lin.items():
        c[j] += coef

    a_rows, b_vals = [], []
    g_rows, h_vals = [], []

    def sparse_row(terms, scale=1.0):
        row = {}
        for j, coef in terms:
            row[j] = row.get(j, 0.0) + scale * coef
        return row

    for con in model.linear:
        if con.relation == "==":
            a_rows.append(sparse_row(con.terms))
            b_vals.append(con.rhs)
        elif con.relation == "<=":
            g_rows.append(sparse_row(con.terms))
            h_vals.append(con.rhs)
        else:
            g_rows.append(sparse_row(con.terms, -1.0))
            h_vals.append(-con.rhs)

    for j in range(n):
        if math.isfinite(model.var_lb[j]):
            g_rows.append({j: -1.0})
            h_vals.append(-model.var_lb[j])
        if math.isfinite(model.var_ub[j]):
            g_rows.append({j: 1.0})
            h_vals.append(model.var_ub[j])

    dims_l = len(g_rows)
    dims_q = []

    for con in model.socs:
        dims_q.append(1 + len(con.rows))
        g_rows.append(sparse_row(con.rhs_terms, -1.0))
        h_vals.append(con.rhs_offset)
        for row, off in zip(con.rows, con.offsets):
            g_rows.append(sparse_row(row, -1.0))
            h_vals.append(off)

    def to_csc(rows, ncols):
        data, ri, ci = [], [], []
        for i, row in enumerate(rows):
            for j, v in sorted(row.items()):
                ri.append(i)
                ci.append(j)
                data.append(v)
        return sp.csc_matrix((data, (ri, ci)), shape=(len(rows), ncols))

    return StandardForm(
        P=sp.diags(pdiag, format="csc"), c=c,
        A=to_csc(a_rows, n), b=np.array(b_vals, dtype=float),
        G=to_csc(g_rows, n), h=np.array(h_vals, dtype=float),
        dims_l=dims_l, dims_q=dims_q,
        obj_const=model.obj_const)


# ---------------------------------------------------------------------------
# Cone algebra (nonnegative orthant + second-order cones)
# ---------------------------------------------------------------------------

class Cones:
    def __init__(self, dims_l: int, dims_q: list[int]):
        self.l = dims_l
        self.q = list(dims_q)
        self.slices = []
        start = dims_l
        for d in self.q:
            self.slices.append(slice(start, start + d))
            start += d
        self.m = start
        self.degree = dims_l + len(dims_q)

    def identity(self) -> np.ndarray:
        e = np.zeros(self.m)
        e[:self.l] = 1.0
        for sl in self.slices:
            e[sl.start] = 1.0
        return e

    def interior_violation(self, u: np.ndarray) -> float:
        """> 0 means u is outside the cone; used for feasibility distances."""
        worst = float(np.max(-u[:self.l], initial=-np.inf))
        for sl in self.slices:
            v = u[sl]
            worst = max(worst, float(np.linalg.norm(v[1:]) - v[0]))
        return max(worst, 0.0)

    def product(self, u: np.ndarray, v: np.ndarray) -> np.ndarray:
        out = np.empty(self.m)
        out[:self.l] = u[:self.l] * v[:self.l]
        for sl in self.slices:
            a, b = u[sl], v[sl]
            out[sl.start] = a @ b
            out[sl.start + 1:sl.stop] = a[0] * b[1:] + b[0] * a[1:]
        return out

    def solve_product(self, lam: np.ndarray, r: np.ndarray) -> np.ndarray:
        """Solve lam o g = r for g; lam must be strictly interior."""
        out = np.empty(self.m)
        out[:self.l] = r[:self.l] / lam[:self.l]
        for sl in self.slices:
            a, rr = lam[sl], r[sl]
            det = a[0] * a[0] - a[1:] @ a[1:]
            if det <= 0 or a[0] <= 0:
                raise NumericalBreakdown("Jordan inverse at a degenerate point")
            g0 = (a[0] * rr[0] - a[1:] @ rr[1:]) / det
            out[sl.start] = g0
            out[sl.start + 1:sl.stop] = (rr[1:] - g0 * a[1:]) / a[0]
        return out

    def clamp_product(self, u: np.ndarray, lo: float, hi: float) -> np.ndarray:
        """Clamp the spectral values of a Jordan product into [lo, hi]."""
        out = np.empty_like(u)
        out[:self.l] = np.clip(u[:self.l], lo, hi)
        for sl in self.slices:
            v = u[sl]
            n1 = float(np.linalg.norm(v[1:]))
            th1 = min(max(v[0] + n1, lo), hi)
            th2 = min(max(v[0] - n1, lo), hi)
            out[sl.start] = 0.5 * (th1 + th2)
            if n1 > 0:
                out[sl.start + 1:sl.stop] = (0.5 * (th1 - th2) / n1) * v[1:]
            else:
                out[sl.start + 1:sl.stop] = 0.0
        return out

    def nudge_interior(self, u: np.ndarray, rel: float = 1e-11) -> np.ndarray:
        """Repair rounding-level interiority loss after a scaled update.

        Violations beyond `rel` (relative to the cone point's own scale)
        are genuine divergence and are left untouched for the scaling
        constructor to reject.
        """
        lin = u[:self.l]
        floor = rel * float(np.max(lin, initial=1.0))
        tiny = lin <= 0
        if np.any(tiny):
            lin[tiny] = floor
        for sl in self.slices:
            v = u[sl]
            norm1 = float(np.linalg.norm(v[1:]))
            if v[0] * v[0] - norm1 * norm1 <= 0 and \
                    v[0] >= norm1 * (1.0 - rel):
                u[sl.start] = norm1 * (1.0 + rel)
        return u

    def max_step(self, u: np.ndarray, du: np.ndarray) -> float:
        """Largest alpha with u + alpha*du in K, for u strictly interior."""
        alpha = math.inf
        neg = du[:self.l] < 0
        if np.any(neg):
            alpha = float(np.min(-u[:self.l][neg] / du[:self.l][neg]))
        for sl in self.slices:
            uu, dd = u[sl], du[sl]
            a = dd[0] * dd[0] - dd[1:] @ dd[1:]
            b = 2.0 * (uu[0] * dd[0] - uu[1:] @ dd[1:])
            cc = uu[0] * uu[0] - uu[1:] @ uu[1:]
            roots = []
            if abs(a) < 1e-300:
                if b < 0:
                    roots.append(-cc / b)
            else:
                disc = b * b - 4.0 * a * cc
                if disc >= 0:
                    sq = math.sqrt(disc)
                    for r in ((-b - sq) / (2 * a), (-b + sq) / (2 * a)):
                        if r > 0:
                            roots.append(r)
            if dd[0] < 0:
                roots.append(-uu[0] / dd[0])
            if roots:
                alpha = min(alpha, min(roots))
        return alpha


class NumericalBreakdown(Exception):
    """An iterate left the cone interior beyond floating-point rescue."""


class NTScaling:
    """Nesterov-Todd scaling point for s, z strictly interior to K."""

    def __init__(self, cones: Cones, s: np.ndarray, z: np.ndarray):
        self.cones = cones
        if np.any(s[:cones.l] <= 0) or np.any(z[:cones.l] <= 0):
            raise NumericalBreakdown("orthant iterate not strictly positive")
        self.w_lin = np.sqrt(s[:cones.l] / z[:cones.l])
        self.lmbda = np.empty(cones.m)
        self.lmbda[:cones.l] = np.sqrt(s[:cones.l] * z[:cones.l])
        self.eta = []
        self.wbar = []
        for sl in cones.slices:
            ss, zz = s[sl], z[sl]
            sres = ss[0] * ss[0] - ss[1:] @ ss[1:]
            zres = zz[0] * zz[0] - zz[1:] @ zz[1:]
            if sres <= 0 or zres <= 0:
                raise NumericalBreakdown("cone iterate lost interiority")
            sn, zn = math.sqrt(sres), math.sqrt(zres)
            sbar, zbar = ss / sn, zz / zn
            gamma = math.sqrt((1.0 + sbar @ zbar) / 2.0)
            wbar = np.empty(len(ss))
            wbar[0] = (sbar[0] + zbar[0]) / (2.0 * gamma)
            wbar[1:] = (sbar[1:] - zbar[1:]) / (2.0 * gamma)
            eta = math.sqrt(sn / zn)
            self.eta.append(eta)
            self.wbar.append(wbar)
            self.lmbda[sl] = self._apply_soc(eta, wbar, zz)

    @staticmethod
    def _apply_soc(eta, wbar, u):
        out = np.empty(len(u))
        dot = wbar[1:] @ u[1:]
        out[0] = wbar[0] * u[0] + dot
        out[1:] = u[1:] + (u[0] + dot / (1.0 + wbar[0])) * wbar[1:]
        return eta * out

    @staticmethod
    def _apply_soc_inv(eta, wbar, u):
        out = np.empty(len(u))
        dot = wbar[1:] @ u[1:]
        out[0] = wbar[0] * u[0] - dot
        out[1:] = u[1:] + (-u[0] + dot / (1.0 + wbar[0])) * wbar[1:]
        return out / eta

    def apply(self, u: np.ndarray) -> np.ndarray:
        """W u (W is symmetric)."""
        out = np.empty(self.cones.m)
        out[:self.cones.l] = self.w_lin * u[:self.cones.l]
        for k, sl in enumerate(self.cones.slices):
            out[sl] = self._apply_soc(self.eta[k], self.wbar[k], u[sl])
        return out

    def apply_inv(self, u: np.ndarray) -> np.ndarray:
        """W^-1 u."""
        out = np.empty(self.cones.m)
        out[:self.cones.l] = u[:self.cones.l] / self.w_lin
        for k, sl in enumerate(self.cones.slices):
            out[sl] = self._apply_soc_inv(self.eta[k], self.wbar[k], u[sl])
        return out

    def wtw_matrix(self) -> sp.csc_matrix:
        """W'W as a sparse block-diagonal matrix."""
        blocks = [sp.diags(self.w_lin ** 2)] if self.cones.l else []
        jdiag = None
        for k, sl in enumerate(self.cones.slices):
            wbar = self.wbar[k]
            d = len(wbar)
            jdiag = np.full(d, -1.0)
            jdiag[0] = 1.0
            block = self.eta[k] ** 2 * (2.0 * np.outer(wbar, wbar) - np.diag(jdiag))
            blocks.append(sp.csc_matrix(block))
        if not blocks:
            return sp.csc_matrix((0, 0))
        return sp.block_diag(blocks, format="csc")

    def expanded_neg_wtw(self):
        """-W'W in rank-one expanded form.

        Using W^2 = eta^2 (I - 2 e0 e0' + u u') with u = sqrt(2) wbar, each
        second-order cone contributes a diagonal part plus one auxiliary
        column, so the factorization never sees the (ill-conditioned) dense
        scaling block:

            [ -eta^2 (I - 2 e0 e0')   -eta u ] [dz ]   [r]
            [ -eta u'                   1    ] [xi ] = [0]

        Returns (diag, cols) where diag is the m-vector of diagonal
        entries and cols is a list of (row_slice, column_vector) pairs,
        one per cone, each with a +1 diagonal in the auxiliary block.
        """
        cones = self.cones
        diag = np.empty(cones.m)
        diag[:cones.l] = -(self.w_lin ** 2)
        cols = []
        for k, sl in enumerate(cones.slices):
            eta2 = self.eta[k] ** 2
            diag[sl] = -eta2
            diag[sl.start] = eta2
            u = math.sqrt(2.0) * self.wbar[k]
            cols.append((sl, -self.eta[k] * u))
        return diag, cols


# ---------------------------------------------------------------------------
# Ruiz equilibration (cone-block aware)
# ---------------------------------------------------------------------------

def _ruiz_equilibrate(P, A, b, G, h, c, cones: Cones, iters: int = 10):
    p, n = A.shape
    m = G.shape[0]
    dr_a = np.ones(p)
    dr_g = np.ones(m)
    dc = np.ones(n)
    As, Gs = A.copy(), G.copy()
    pdiag = np.abs(P.diagonal())

    def block_uniform(r):
        # one scalar per SOC block keeps s in K equivalent to scaled s in K
        for sl in cones.slices:
            r[sl] = np.max(r[sl])
        return r

    for _ in range(iters):
        ra = np.sqrt(np.abs(As).max(axis=1).toarray().ravel()) if p else np.zeros(0)
        rg = np.sqrt(np.abs(Gs).max(axis=1).toarray().ravel())
        rg = block_uniform(rg)
        ra[ra == 0] = 1.0
        rg[rg == 0] = 1.0
        col_a = np.abs(As).max(axis=0).toarray().ravel() if p else np.zeros(n)
        col_g = np.abs(Gs).max(axis=0).toarray().ravel()
        cn = np.sqrt(np.maximum(np.maximum(col_a, col_g), pdiag * dc * dc))
        cn[cn == 0] = 1.0
        dr_a /= ra
        dr_g /= rg
        dc /= cn
        As = sp.diags(1.0 / ra) @ As @ sp.diags(1.0 / cn) if p else As
        Gs = sp.diags(1.0 / rg) @ Gs @ sp.diags(1.0 / cn)

    bs = dr_a * b
    hs = dr_g * h
    cs = dc * c
    return As.tocsc(), bs, Gs.tocsc(), hs, cs, dr_a, dr_g, dc


# ---------------------------------------------------------------------------
# The interior-point iteration
# ---------------------------------------------------------------------------

def _kkt_solver(P, A, G, scaling, reg):
    n = A.shape[1]
    p = A.shape[0]
    m = G.shape[0]
    diag, cols = scaling.expanded_neg_wtw()
    n_aux = len(cols)

    # third block: diagonal part, auxiliary coupling columns, +1 identities
    data, ri, ci = list(diag), list(range(m)), list(range(m))
    for k, (sl, col) in enumerate(cols):
        aux = m + k
        for i, v in zip(range(sl.start, sl.stop), col):
            data.extend((v, v))
            ri.extend((i, aux))
            ci.extend((aux, i))
        data.append(1.0)
        ri.append(aux)
        ci.append(aux)
    block3 = sp.csc_matrix((data, (ri, ci)), shape=(m + n_aux, m + n_aux))
    g_pad = sp.vstack([G, sp.csc_matrix((n_aux, n))], format="csc")

    k0 = sp.bmat([
        [P, A.T, g_pad.T],
        [A, None, None],
        [g_pad, None, block3],
    ], format="csc")
    regvec = np.concatenate([np.full(n, reg), np.full(p, -reg),
                             np.full(m, -reg), np.zeros(n_aux)])
    kreg = (k0 + sp.diags(regvec)).tocsc()
    lu = splu(kreg)
    # residuals in extended precision push the refinement floor well
    # below what double-precision residuals allow on the nearly singular
    # endgame systems
    k0_ext = k0.astype(np.longdouble)

    def solve(r1, r2, r3):
        rhs = np.concatenate([r1, r2, r3, np.zeros(n_aux)]).astype(np.longdouble)
        target = 1e-14 * max(1.0, float(np.max(np.abs(rhs))))
        u = lu.solve(np.asarray(rhs, dtype=float)).astype(np.longdouble)
        resid = rhs - k0_ext @ u
        best_u, best_norm = u, float(np.max(np.abs(resid)))
        for _ in range(KKT_REFINE_STEPS):
            if best_norm <= target:
                break
            u = best_u + lu.solve(np.asarray(resid, dtype=float))
            resid = rhs - k0_ext @ u
            norm = float(np.max(np.abs(resid)))
            if not norm < best_norm:
                break
            best_u, best_norm = u, norm
        out = np.asarray(best_u, dtype=float)
        return out[:n], out[n:n + p], out[n + p:n + p + m]

    return solve


def _certificate_status(P0, A0, b0, G0, h0, c0, cones, xu, yu, zu,
                        quality: float = 1e-8):
    """Detect Farkas certificates of primal infeasibility or unboundedness.

    The residuals are normalized by the certificate's strict value, so the
    test is invariant to the iterate's (diverging) magnitude.
    """
    p = A0.shape[0]
    data_scale = 1.0 + max(float(np.max(np.abs(b0), initial=0.0)),
                           float(np.max(np.abs(h0), initial=0.0)))
    ynorm = max(float(np.max(np.abs(yu), initial=0.0)),
                float(np.max(np.abs(zu), initial=0.0)))
    cert_val = -(float(b0 @ yu) + float(h0 @ zu))
    if cert_val > 1e-4 * ynorm * data_scale:
        res = max(float(np.max(np.abs(A0.T @ yu + G0.T @ zu))),
                  cones.interior_violation(zu))
        if res <= quality * cert_val:
            return "infeasible"
    xnorm = float(np.max(np.abs(xu), initial=0.0))
    ray_val = -float(c0 @ xu)
    if ray_val > 1e-4 * xnorm * (1.0 + float(np.max(np.abs(c0), initial=0.0))):
        res = max(cones.interior_violation(-(G0 @ xu)),
                  float(np.max(np.abs(P0 @ xu), initial=0.0)))
        if p:
            res = max(res, float(np.max(np.abs(A0 @ xu))))
        if res <= quality * ray_val:
            return "unbounded"
    return None


def _solve_standard(std: StandardForm, cfg: SolverConfig):
    """Run the predictor-corrector iteration; returns iterate + status."""
    cones = Cones(std.dims_l, std.dims_q)
    P0, A0, b0, G0, h0, c0 = std.P, std.A, std.b, std.G, std.h, std.c

    if cfg.scaling == "ruiz_equilibration":
        A, b, G, h, c, dr_a, dr_g, dc = _ruiz_equilibrate(
            P0, A0, b0, G0, h0, c0, cones)
    else:
        A, b, G, h, c = A0, b0, G0, h0, c0
        dr_a, dr_g, dc = np.ones(A.shape[0]), np.ones(G.shape[0]), np.ones(A.shape[1])

    P1 = (sp.diags(dc) @ P0 @ sp.diags(dc)).tocsc()
    sig_b = max(1.0, float(np.max(np.abs(b), initial=0.0)),
                float(np.max(np.abs(h), initial=0.0)))
    sig_c = max(1.0, float(np.max(np.abs(c), initial=0.0)),
                sig_b * float(np.max(np.abs(P1.diagonal()), initial=0.0)))
    c = c / sig_c
    b = b / sig_b
    h = h / sig_b
    P = P1 * (sig_b / sig_c)

    n = A.shape[1]
    p = A.shape[0]
    e = cones.identity()

    x = np.zeros(n)
    y = np.zeros(p)
    s = e.copy()
    z = e.copy()

    def unscale(x, y, s, z):
        return (sig_b * (dc * x), sig_c * (dr_a * y),
                sig_b * (s / dr_g), sig_c * (dr_g * z))

    norm_b0 = 1.0 + float(np.max(np.abs(b0), initial=0.0))
    norm_h0 = 1.0 + float(np.max(np.abs(h0), initial=0.0))
    norm_c0 = 1.0 + float(np.max(np.abs(c0), initial=0.0))

    best = None
    best_score = math.inf
    status = "iteration_limit"
    iterations = cfg.max_iterations
    stalls = 0

    for it in range(cfg.max_iterations + 1):
        xu, yu, su, zu = unscale(x, y, s, z)
        pres = float(np.max(np.abs(G0 @ xu + su - h0), initial=0.0)) / norm_h0
        if p:
            pres = max(pres, float(np.max(np.abs(A0 @ xu - b0))) / norm_b0)
        dres = float(np.max(np.abs(P0 @ xu + c0 + A0.T @ yu + G0.T @ zu))) \
            / norm_c0
        pobj = 0.5 * float(xu @ (P0 @ xu)) + float(c0 @ xu)
        gap = float(su @ zu)
        relgap = gap / max(1.0, abs(pobj))
        score = max(pres / cfg.feas_tol, dres / cfg.feas_tol,
                    relgap / cfg.gap_tol)
        if score < best_score:
            best_score = score
            best = (xu, yu, su, zu, pres, dres, relgap, it)

        if cfg.verbose:
            print(f"  iter {it:3d}  pres {pres:9.2e}  dres {dres:9.2e}  "
                  f"relgap {relgap:9.2e}  pobj {pobj * 1.0:13.6e}")

        if pres <= cfg.feas_tol and dres <= cfg.feas_tol and relgap <= cfg.gap_tol:
            status = "optimal"
            iterations = it
            break

        # Farkas-style certificates emerge from diverging iterates
        cert = _certificate_status(P0, A0, b0, G0, h0, c0, cones, xu, yu, zu)
        if cert is not None:
            status = cert
            iterations = it
            break

        if it == cfg.max_iterations:
            break

        try:
            scaling = NTScaling(cones, s, z)
            lmbda = scaling.lmbda
            mu = float(s @ z) / cones.degree
            if not math.isfinite(mu) or mu <= 0:
                raise NumericalBreakdown("nonpositive complementarity measure")
            solve_kkt = _kkt_solver(P, A, G, scaling, KKT_REG)

            rd = P @ x + c + A.T @ y + G.T @ z
            rp = (A @ x - b) if p else np.zeros(0)
            rc = G @ x + s - h

            # predictor: pure Newton direction toward complementarity zero.
            # Steps are measured and applied in the NT-scaled space, where
            # both s and z map to the same well-conditioned point lambda.
            dx_a, dy_a, dz_a = solve_kkt(-rd, -rp, -rc + s)
            ds_a = -rc - G @ dx_a
            dsa_sc = scaling.apply_inv(ds_a)
            dza_sc = scaling.apply(dz_a)

            alpha_a = min(cones.max_step(lmbda, dsa_sc),
                          cones.max_step(lmbda, dza_sc), 1.0)
            mu_aff = float((lmbda + alpha_a * dsa_sc)
                           @ (lmbda + alpha_a * dza_sc)) / cones.degree
            sigma = min(1.0, max(0.0, mu_aff / mu)) ** 3

            # keep complementarity from outrunning feasibility and from
            # sinking below what termination actually needs; past that
            # point the KKT systems turn numerically singular and steps
            # only inject solve noise into the iterate
            pobj_s = float(c @ x) + 0.5 * float(x @ (P @ x))
            mu_safe = max(MU_FLOOR, 0.03 * cfg.gap_tol
                          * max(1.0, abs(pobj_s)) / cones.degree)
            sigma = max(sigma, min(1.0, mu_safe / mu))
            resid_scale = max(float(np.max(np.abs(rd), initial=0.0)),
                              float(np.max(np.abs(rp), initial=0.0)),
                              float(np.max(np.abs(rc), initial=0.0)))
            if resid_scale > float(s @ z):
                sigma = max(sigma, 0.9)

            # corrector: recenter and compensate the second-order term
            eta_corr = cones.product(dsa_sc, dza_sc)
            lam_sq = cones.product(lmbda, lmbda)
            g = cones.solve_product(lmbda, sigma * mu * e - lam_sq - eta_corr)
            dx, dy, dz = solve_kkt(-rd, -rp, -rc - scaling.apply(g))
            ds = -rc - G @ dx
            ds_sc = scaling.apply_inv(ds)
            dz_sc = scaling.apply(dz)
            # step closer to the boundary as the barrier parameter shrinks
            backoff = min(0.999, max(STEP_BACKOFF,
                                     1.0 - 10.0 * math.sqrt(max(mu, 0.0))))
            alpha = min(1.0, backoff * min(cones.max_step(lmbda, ds_sc),
                                           cones.max_step(lmbda, dz_sc)))

            # safeguard: when the second-order correction overshoots the
            # cone boundary, retry with plain centering on degenerate cones
            if alpha < 0.1 * alpha_a or alpha < 1e-4:
                g = cones.solve_product(lmbda, sigma * mu * e - lam_sq)
                dx2, dy2, dz2 = solve_kkt(-rd, -rp, -rc - scaling.apply(g))
                ds2 = -rc - G @ dx2
                ds2_sc = scaling.apply_inv(ds2)
                dz2_sc = scaling.apply(dz2)
                alpha2 = min(1.0, backoff * min(
                    cones.max_step(lmbda, ds2_sc),
                    cones.max_step(lmbda, dz2_sc)))
                if alpha2 > alpha:
                    dx, dy, dz, ds = dx2, dy2, dz2, ds2
                    ds_sc, dz_sc, alpha = ds2_sc, dz2_sc, alpha2

            # multiple centrality correctors: push outlier complementarity
            # products toward the target, enlarging the usable step
            mu_t = max(sigma * mu, 1e-2 * mu)
            for _ in range(CENTRALITY_ROUNDS):
                if alpha > CENTRALITY_GOAL:
                    break
                a_try = min(1.0, 1.5 * alpha + 0.3)
                prods = cones.product(lmbda + a_try * ds_sc,
                                      lmbda + a_try * dz_sc)
                t = cones.clamp_product(prods, 0.1 * mu_t, 10.0 * mu_t) - prods
                g_extra = cones.solve_product(lmbda, t)
                ex, ey, ez = solve_kkt(np.zeros_like(rd), np.zeros_like(rp),
                                       -scaling.apply(g_extra))
                es = -G @ ex
                dx3, dy3, dz3, ds3 = dx + ex, dy + ey, dz + ez, ds + es
                ds3_sc = scaling.apply_inv(ds3)
                dz3_sc = scaling.apply(dz3)
                alpha3 = min(1.0, backoff * min(
                    cones.max_step(lmbda, ds3_sc),
                    cones.max_step(lmbda, dz3_sc)))
                if alpha3 <= 1.01 * alpha:
                    break
                dx, dy, dz, ds = dx3, dy3, dz3, ds3
                ds_sc, dz_sc, alpha = ds3_sc, dz3_sc, alpha3
        except (NumericalBreakdown, RuntimeError):
            cert = _certificate_status(P0, A0, b0, G0, h0, c0, cones,
                                       xu, yu, zu, quality=1e-6)
            status = cert if cert is not None else "numerical_failure"
            iterations = it
            break
        if alpha <= 1e-13 or not math.isfinite(alpha):
            status = "numerical_failure"
            iterations = it
            break
        stalls = stalls + 1 if alpha < 1e-7 else 0
        if stalls >= 5:
            status = "numerical_failure"
            iterations = it
            break

        x += alpha * dx
        y += alpha * dy
        s = cones.nudge_interior(scaling.apply(lmbda + alpha * ds_sc))
        z = cones.nudge_interior(scaling.apply_inv(lmbda + alpha * dz_sc))

    xu, yu, su, zu, pres, dres, relgap, best_it = best
    if status in ("iteration_limit", "numerical_failure") \
            and pres <= cfg.feas_tol and dres <= cfg.feas_tol \
            and relgap <= cfg.gap_tol:
        status = "optimal"
    return status, xu, yu, su, zu, pres, dres, relgap, iterations


def solve(model: ConicModel, cfg: SolverConfig | None = None) -> SolveResult:
    """Solve the convex model; on `optimal` the objective is a certified
    optimum of the relaxation within the configured tolerances."""
    cfg = cfg or SolverConfig()
    std = standard_form(model)
    status, x, y, s, z, pres, dres, relgap, iters = _solve_standard(std, cfg)

    primal = {name: float(x[j]) for j, name in enumerate(model.var_names)}
    objective = model.objective_value(x)
    return SolveResult(
        status=status, objective=float(objective), primal=primal,
        duality_gap=relgap, max_primal_residual=pres, max_dual_residual=dres,
        iterations=iters, x=x, y=y, z=z, s=s)


# ---------------------------------------------------------------------------
# Independent KKT certification
# ---------------------------------------------------------------------------

@dataclass
class KktReport:
    stationarity: float
    primal_feasibility: float
    dual_feasibility: float
    complementarity: float

    @property
    def max_residual(self) -> float:
        return max(self.stationarity, self.primal_feasibility,
                   self.dual_feasibility, self.complementarity)


def check_kkt(model: ConicModel, result: SolveResult) -> KktReport:
    """Recompute optimality residuals from the model data and the returned
    vectors only; shares nothing with the solver's internal bookkeeping."""
    if result.x is None or result.y is None or result.z is None:
        raise ValueError("result carries no certificate vectors")
    std = standard_form(model)
    cones = Cones(std.dims_l, std.dims_q)
    x, y, z = result.x, result.y, result.z

    s = std.h - std.G @ x
    stat = float(np.max(np.abs(std.P @ x + std.c + std.A.T @ y + std.G.T @ z))) \
        / (1.0 + float(np.max(np.abs(std.c), initial=0.0)))
    pfeas = cones.interior_violation(s) / (1.0 + float(np.max(np.abs(std.h))))
    if std.b.size:
        pfeas = max(pfeas, float(np.max(np.abs(std.A @ x - std.b)))
                    / (1.0 + float(np.max(np.abs(std.b)))))
    dfeas = cones.interior_violation(z) / (1.0 + float(np.max(np.abs(z))))
    pobj = 0.5 * float(x @ (std.P @ x)) + float(std.c @ x)
    comp = abs(float(s @ z)) / max(1.0, abs(pobj))
    return KktReport(stationarity=stat, primal_feasibility=pfeas,
                     dual_feasibility=dfeas, complementarity=comp)


# ---------------------------------------------------------------------------
# Solution text output
# ---------------------------------------------------------------------------

def solution_to_text(result: SolveResult) -> str:
    lines = [f"status {result.status}",
             f"objective {result.objective!r}",
             f"iterations {result.iterations}"]
    for name, value in result.primal.items():
        lines.append(f"{name} {value!r}")
    return "\n".join(lines) + "\n"
