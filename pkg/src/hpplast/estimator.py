"""Residual a posteriori error estimator for the mixed elastoplastic problem.

For every element the estimator collects

* the volume residual ``(h_T/p_T)^2 ||f_N + div sigma||^2``,
* interior traction jumps ``h_e/(2 p_e) ||[sigma n]||^2`` (each side of an
  interior edge receives its half),
* Neumann residuals ``h_e/p_e ||sigma n - g_N||^2``,
* the mismatch ``||dev(sigma - H p) - lambda_N||^2``,
* the plasticity part ``E_T(mu) = ||mu - lambda_N||^2 + (sigma_y, |p|) - (mu, p)``,

evaluated at ``mu* = min(1, sigma_y / |mu_hat|) mu_hat`` with
``mu_hat = lambda_N + p_N / 2``. Data oscillations are reported separately.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
import numpy as np

from .assembly import AssembledSystem, DataProjection, LoadData, edge_quadrature, project_data
from .quadrature import gauss_rule, tensor_points, tensor_weights
from .solver import MixedSolution
from .spaces import evaluate_displacement, evaluate_strain, side_reference_points
from .tensor_core import dev_inner, dev_norm, traction

PART_NAMES = ("elem_residual_sq", "jump_sq", "neumann_sq", "dev_mismatch_sq", "E_T", "osc_sq")


@dataclass(frozen=True)
class LocalEstimate:
    elem_residual_sq: float
    jump_sq: float
    neumann_sq: float
    dev_mismatch_sq: float
    E_T: float
    osc_sq: float

    @property
    def eta_residual_sq(self) -> float:
        return self.elem_residual_sq + self.jump_sq + self.neumann_sq

    @property
    def eta_sq(self) -> float:
        """``eta_T^2(mu*)`` (oscillation excluded)."""
        return self.eta_residual_sq + self.dev_mismatch_sq + self.E_T


@dataclass
class EstimatorReport:
    parts: dict  # name -> (ne,) array
    keys: list  # element keys, for stable tie-breaking
    totals: dict = field(default_factory=dict)
    ranking: np.ndarray | None = None
    meta: dict = field(default_factory=dict)

    @property
    def n_elements(self) -> int:
        return len(self.keys)

    @property
    def eta_residual_sq(self) -> np.ndarray:
        p = self.parts
        return p["elem_residual_sq"] + p["jump_sq"] + p["neumann_sq"]

    @property
    def eta_sq(self) -> np.ndarray:
        """Per-element ``eta_T^2(mu*)``."""
        return self.eta_residual_sq + self.parts["dev_mismatch_sq"] + self.parts["E_T"]

    def local(self, e: int) -> LocalEstimate:
        return LocalEstimate(*(float(self.parts[n][e]) for n in PART_NAMES))

    def dump(self) -> str:
        """Lines ``elem_id eta_sq dev_sq E_T osc_sq``."""
        eta = self.eta_sq
        p = self.parts
        return "".join(
            f"{e} {eta[e]:.17g} {p['dev_mismatch_sq'][e]:.17g} {p['E_T'][e]:.17g} {p['osc_sq'][e]:.17g}\n"
            for e in range(self.n_elements)
        )


def total(parts: dict, keys: list, meta: dict | None = None) -> EstimatorReport:
    """Order-independent totals and a descending ranking by ``eta_T^2(mu*)``."""
    rep = EstimatorReport({k: np.asarray(v, dtype=float) for k, v in parts.items()}, list(keys), meta=meta or {})
    tot = {name: math.fsum(rep.parts[name]) for name in PART_NAMES}
    tot["eta_residual_sq"] = tot["elem_residual_sq"] + tot["jump_sq"] + tot["neumann_sq"]
    tot["eta_sq"] = tot["eta_residual_sq"] + tot["dev_mismatch_sq"] + tot["E_T"]
    rep.totals = tot
    eta = rep.eta_sq
    order = sorted(range(len(keys)), key=lambda e: (-eta[e], keys[e]))
    rep.ranking = np.array(order, dtype=np.int64)
    return rep


# ---------------------------------------------------------------------------
# pointwise pieces


def mu_star(lambda_N: np.ndarray, p_N: np.ndarray, sigma_y) -> np.ndarray:
    """Radial projection of ``lambda_N + p_N / 2`` onto the ball of radius ``sigma_y``."""
    mu_hat = np.asarray(lambda_N, dtype=float) + 0.5 * np.asarray(p_N, dtype=float)
    nrm = dev_norm(mu_hat)
    sig = np.broadcast_to(np.asarray(sigma_y, dtype=float), nrm.shape)
    clip = nrm > sig
    scale = np.ones_like(nrm)
    scale[clip] = sig[clip] / nrm[clip]
    out = scale[..., None] * mu_hat
    # guard against roundoff pushing the clipped value outside the ball
    over = dev_norm(out) > sig
    while np.any(over):
        out[over] *= 1.0 - 2.0 ** -52
        over = dev_norm(out) > sig
    return out


def plasticity_integrand(mu, lam, p, sigma_y) -> np.ndarray:
    """Pointwise ``|mu - lam|^2 + sigma_y |p| - mu : p``."""
    d = mu - lam
    return dev_inner(d, d) + sigma_y * dev_norm(p) - dev_inner(mu, p)


# ---------------------------------------------------------------------------
# field evaluation on a solved system


class SolutionFields:
    """Point evaluation of ``u_N``, ``p_N``, ``lambda_N`` and derived stresses."""

    def __init__(self, system: AssembledSystem, solution: MixedSolution, lambda_choice: str = "solver"):
        if lambda_choice not in ("solver", "pointwise"):
            raise ValueError("lambda_choice must be 'solver' or 'pointwise'")
        self.S = system
        self.sol = solution
        self.full = system.V.expand(solution.u)
        self.lambda_choice = lambda_choice
        m = system.material
        self.lam_, self.mu_, self.h_ = m.lame_lambda, m.lame_mu, m.hardening

    def displacement(self, elems, ref, second=False):
        return evaluate_displacement(self.S.V, None, elems, ref, second=second, full=self.full)

    def plastic(self, elems, ref, deriv=False):
        return evaluate_strain(self.S.Q, self.sol.p, elems, ref, deriv=deriv)

    def stress(self, elems, ref, fv=None, pv=None):
        fv = fv or self.displacement(elems, ref)
        pv = self.plastic(elems, ref) if pv is None else pv
        g = fv.grad
        exx = g[:, 0, 0] - pv[:, 0]
        eyy = g[:, 1, 1] + pv[:, 0]
        exy = 0.5 * (g[:, 0, 1] + g[:, 1, 0]) - pv[:, 1]
        tr = self.lam_ * (exx + eyy)
        return np.column_stack([tr + 2 * self.mu_ * exx, tr + 2 * self.mu_ * eyy, 2 * self.mu_ * exy])

    def dev_stress_minus_hp(self, elems, ref, fv=None, pv=None):
        fv = fv or self.displacement(elems, ref)
        pv = self.plastic(elems, ref) if pv is None else pv
        sig = self.stress(elems, ref, fv, pv)
        return np.column_stack([0.5 * (sig[:, 0] - sig[:, 1]), sig[:, 2]]) - self.h_ * pv

    def multiplier(self, elems, ref, fv=None, pv=None):
        if self.lambda_choice == "pointwise":
            return self.dev_stress_minus_hp(elems, ref, fv, pv)
        return evaluate_strain(self.S.Q, self.sol.lam, elems, ref)

    def div_stress(self, elems, ref):
        fv = self.displacement(elems, ref, second=True)
        _, dp = self.plastic(elems, ref, deriv=True)
        H = fv.hess  # (m, c, [xx, yy, xy])
        lam, mu = self.lam_, self.mu_
        ux_xx, ux_yy, ux_xy = H[:, 0, 0], H[:, 0, 1], H[:, 0, 2]
        uy_xx, uy_yy, uy_xy = H[:, 1, 0], H[:, 1, 1], H[:, 1, 2]
        pa_x, pa_y = dp[:, 0, 0], dp[:, 0, 1]
        pb_x, pb_y = dp[:, 1, 0], dp[:, 1, 1]
        dx = (lam + 2 * mu) * ux_xx + lam * uy_xy - 2 * mu * pa_x + mu * (ux_yy + uy_xy) - 2 * mu * pb_y
        dy = mu * (ux_xy + uy_xx) - 2 * mu * pb_x + lam * ux_xy + (lam + 2 * mu) * uy_yy + 2 * mu * pa_y
        return np.column_stack([dx, dy])


def _volume_points(mesh, elems, p, extra):
    rule = gauss_rule(p + extra)
    ref = tensor_points(rule.points)
    w = tensor_weights(rule.weights)
    E = np.repeat(elems, len(w))
    R = np.tile(ref, (len(elems), 1))
    W = (w[None, :] * mesh.jac_det[elems][:, None]).ravel()
    return E, R, W, len(w)


def _physical(mesh, E, R):
    b = mesh.bounds[E]
    return (b[:, 0] + 0.5 * (R[:, 0] + 1.0) * (b[:, 1] - b[:, 0]),
            b[:, 2] + 0.5 * (R[:, 1] + 1.0) * (b[:, 3] - b[:, 2]))


def _per_element(values, W, nq):
    return (values * W).reshape(-1, nq).sum(axis=1)


# ---------------------------------------------------------------------------
# element terms


def plasticity_error_E_T(fields: SolutionFields, e: int, mu=None, extra: int = 2,
                         tol: float = 1e-12) -> float:
    """``E_T(mu)`` on element ``e`` by Gauss quadrature with ``p_T + extra`` points.

    ``mu`` may be ``None`` (use ``mu*``), a callable of ``(elems, ref)`` or an
    array of values at the quadrature points.
    """
    mesh = fields.S.mesh
    p = int(mesh.degree[e])
    E, R, W, nq = _volume_points(mesh, np.array([e]), p, extra)
    lam = fields.multiplier(E, R)
    pv = fields.plastic(E, R)
    sigma_y = fields.S.Q.sigma_y
    if mu is None:
        mu_v = mu_star(lam, pv, sigma_y)
    elif callable(mu):
        mu_v = np.asarray(mu(E, R), dtype=float)
    else:
        mu_v = np.asarray(mu, dtype=float)
    if np.any(dev_norm(mu_v) > sigma_y + tol):
        raise ValueError("mu is not feasible at some quadrature point")
    return float(np.sum(W * plasticity_integrand(mu_v, lam, pv, sigma_y)))


def quadrature_points_of(mesh, e: int, extra: int = 2):
    """Reference points and weights used by ``plasticity_error_E_T``."""
    p = int(mesh.degree[e])
    E, R, W, _ = _volume_points(mesh, np.array([e]), p, extra)
    return R, W


def dev_mismatch(fields: SolutionFields, elems=None, extra: int = 1) -> np.ndarray:
    """``||dev(sigma - H p) - lambda_N||^2`` per element (``p_T + extra`` points)."""
    mesh = fields.S.mesh
    elems = np.arange(mesh.n_elements) if elems is None else np.asarray(elems)
    out = np.zeros(len(elems))
    deg = mesh.degree[elems]
    for p in np.unique(deg).tolist():
        sel = np.where(deg == p)[0]
        E, R, W, nq = _volume_points(mesh, elems[sel], p, extra)
        fv = fields.displacement(E, R)
        pv = fields.plastic(E, R)
        d = fields.dev_stress_minus_hp(E, R, fv, pv) - fields.multiplier(E, R, fv, pv)
        out[sel] = _per_element(dev_inner(d, d), W, nq)
    return out


def _volume_terms(fields: SolutionFields, proj: DataProjection, extra_res=2, extra_E=2):
    mesh = fields.S.mesh
    ne = mesh.n_elements
    res = np.zeros(ne)
    E_T = np.zeros(ne)
    hT = mesh.diameters
    Q = fields.S.Q
    for p in np.unique(mesh.degree).tolist():
        elems = np.where(mesh.degree == p)[0]
        scale = (hT[elems] / p) ** 2
        # residual
        E, R, W, nq = _volume_points(mesh, elems, p, extra_res)
        fN = evaluate_strain(Q, proj.f_coef, E, R)
        r = fN + fields.div_stress(E, R)
        res[elems] = scale * _per_element(np.sum(r * r, axis=1), W, nq)
        # plasticity part at mu*
        E, R, W, nq = _volume_points(mesh, elems, p, extra_E)
        lam = fields.multiplier(E, R)
        pv = fields.plastic(E, R)
        mus = mu_star(lam, pv, Q.sigma_y)
        E_T[elems] = _per_element(plasticity_integrand(mus, lam, pv, Q.sigma_y), W, nq)
    return res, E_T


def _jump_terms(fields: SolutionFields, extra: int = 1) -> np.ndarray:
    mesh = fields.S.mesh
    f = mesh.facets
    out = np.zeros(mesh.n_elements)
    if len(f.ia_elem) == 0:
        return out
    pa, pb = mesh.degree[f.ia_elem], mesh.degree[f.ib_elem]
    pe = np.maximum(pa, pb)
    for q in np.unique(pe).tolist():
        sel = np.where(pe == q)[0]
        rule = gauss_rule(q + extra)
        t, w = rule.points, rule.weights
        nq = len(t)

        def side_points(elem, side, span):
            tt = span[:, 0:1] + 0.5 * (t[None, :] + 1.0) * (span[:, 1:2] - span[:, 0:1])
            ref = np.empty((len(elem), nq, 2))
            for s in range(4):
                m = side == s
                if np.any(m):
                    ref[m] = side_reference_points(s, tt[m].ravel()).reshape(-1, nq, 2)
            return np.repeat(elem, nq), ref.reshape(-1, 2)

        Ea, Ra = side_points(f.ia_elem[sel], f.ia_side[sel], f.ia_span[sel])
        Eb, Rb = side_points(f.ib_elem[sel], f.ib_side[sel], f.ib_span[sel])
        n = np.repeat(f.i_normal[sel], nq, axis=0)
        jump = traction(fields.stress(Ea, Ra), n) - traction(fields.stress(Eb, Rb), n)
        length = f.i_length[sel]
        integral = (np.sum(jump * jump, axis=1).reshape(-1, nq) * w[None, :]).sum(axis=1) * 0.5 * length
        ha = np.where(f.ia_span[sel, 1] - f.ia_span[sel, 0] < 2.0, 2.0 * length, length)
        hb = np.where(f.ib_span[sel, 1] - f.ib_span[sel, 0] < 2.0, 2.0 * length, length)
        np.add.at(out, f.ia_elem[sel], ha / (2.0 * q) * integral)
        np.add.at(out, f.ib_elem[sel], hb / (2.0 * q) * integral)
    return out


def _neumann_terms(fields: SolutionFields, proj: DataProjection, load: LoadData, extra=2):
    mesh = fields.S.mesh
    f = mesh.facets
    neu = np.zeros(mesh.n_elements)
    for k_local, k in enumerate(proj.g_facets):
        e, side = int(f.b_elem[k]), int(f.b_side[k])
        p = int(mesh.degree[e])
        h_e = float(f.b_length[k])
        n = f.b_normal[k]
        t, x, y, w = edge_quadrature(mesh, e, side, p + extra, load.kinks_x, load.kinks_y)
        E = np.full(len(t), e)
        R = side_reference_points(side, t)
        gN = proj.g_at(mesh, k_local, t)
        d = traction(fields.stress(E, R), np.broadcast_to(n, (len(t), 2))) - gN
        neu[e] += h_e / p * float(np.sum(w * np.sum(d * d, axis=1)))
    return neu


def oscillation(system: AssembledSystem, load: LoadData, proj: DataProjection | None = None,
                extra: int = 4) -> np.ndarray:
    """Per-element data oscillation ``osc_T^2``."""
    mesh = system.mesh
    proj = proj or project_data(mesh, load, system.Q)
    out = np.zeros(mesh.n_elements)
    hT = mesh.diameters
    if load.f is not None:
        for p in np.unique(mesh.degree).tolist():
            elems = np.where(mesh.degree == p)[0]
            E, R, W, nq = _volume_points(mesh, elems, p, extra)
            x, y = _physical(mesh, E, R)
            d = load.eval_f(x, y) - evaluate_strain(system.Q, proj.f_coef, E, R)
            out[elems] += (hT[elems] / p) ** 2 * _per_element(np.sum(d * d, axis=1), W, nq)
    f = mesh.facets
    if load.g is not None:
        for k_local, k in enumerate(proj.g_facets):
            e, side = int(f.b_elem[k]), int(f.b_side[k])
            p = int(mesh.degree[e])
            t, x, y, w = edge_quadrature(mesh, e, side, p + extra, load.kinks_x, load.kinks_y)
            d = load.eval_g(x, y) - proj.g_at(mesh, k_local, t)
            out[e] += float(f.b_length[k]) / p * float(np.sum(w * np.sum(d * d, axis=1)))
    return out


def estimate(system: AssembledSystem, solution: MixedSolution, load: LoadData,
             lambda_choice: str = "solver", proj: DataProjection | None = None) -> EstimatorReport:
    """Evaluate all local contributions and totals."""
    fields = SolutionFields(system, solution, lambda_choice)
    mesh = system.mesh
    proj = proj or project_data(mesh, load, system.Q)
    res, E_T = _volume_terms(fields, proj)
    jump = _jump_terms(fields)
    neu = _neumann_terms(fields, proj, load)
    dev = dev_mismatch(fields)
    parts = {
        "elem_residual_sq": res,
        "jump_sq": jump,
        "neumann_sq": neu,
        "dev_mismatch_sq": dev,
        "E_T": E_T,
        "osc_sq": oscillation(system, load, proj),
    }
    meta = {"lambda_choice": lambda_choice, "E_T_points": "p+2", "dev_points": "p+1", "osc_points": "p+4"}
    return total(parts, mesh.keys, meta)


def eta_T(fields: SolutionFields, e: int, load: LoadData, proj: DataProjection) -> LocalEstimate:
    """All parts for one element (convenience wrapper around ``estimate``)."""
    rep = estimate(fields.S, fields.sol, load, fields.lambda_choice, proj)
    return rep.local(e)
