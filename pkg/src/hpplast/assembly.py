"""Assembly of the mixed elastoplastic system.

With ``(a, b)`` storage of deviators and the Gauss-Lagrange strain basis, the
blocks of ``a((u, p), (v, q))`` are

* ``A_uu = K`` (linear elasticity stiffness),
* ``A_up = -2 mu G^T diag(2 D)``,
* ``A_pp = diag(2 (2 mu + h) D)``,

where ``G`` maps displacement DOFs to ``dev eps(u)`` at the strain nodes and
``D`` are the strain basis weights. Strain vectors are flattened as
``[a_1..a_N, b_1..b_N]``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable

import numpy as np
import scipy.sparse as sp

from .mesh import QuadMesh
from .quadrature import (
    element_quadrature,
    gauss_rule,
    lagrange_1d,
    lobatto_points,
    strain_basis,
    tensor_basis,
    tensor_points,
    tensor_weights,
)
from .spaces import DisplacementSpace, StrainSpace, side_reference_points
from .tensor_core import DEV_WEIGHT, Material

VectorField = Callable[[np.ndarray, np.ndarray], tuple]

_CHUNK = 20000


@dataclass(frozen=True)
class LoadData:
    """Volume force ``f`` and Neumann traction ``g`` as ``(x, y) -> (fx, fy)``.

    ``kinks_x`` / ``kinks_y`` are coordinates where the data lose smoothness;
    edge integrals are split there.
    """

    f: VectorField | None = None
    g: VectorField | None = None
    kinks_x: tuple[float, ...] = ()
    kinks_y: tuple[float, ...] = ()
    scale: float = 1.0

    def scaled(self, factor: float) -> LoadData:
        return LoadData(self.f, self.g, self.kinks_x, self.kinks_y, self.scale * factor)

    def eval_f(self, x, y) -> np.ndarray:
        if self.f is None:
            return np.zeros((np.size(x), 2))
        fx, fy = self.f(x, y)
        return self.scale * np.column_stack([np.broadcast_to(fx, np.shape(x)), np.broadcast_to(fy, np.shape(x))])

    def eval_g(self, x, y) -> np.ndarray:
        if self.g is None:
            return np.zeros((np.size(x), 2))
        gx, gy = self.g(x, y)
        return self.scale * np.column_stack([np.broadcast_to(gx, np.shape(x)), np.broadcast_to(gy, np.shape(x))])


@dataclass
class Spaces:
    V: DisplacementSpace
    Q: StrainSpace

    @classmethod
    def build(cls, mesh: QuadMesh, material: Material) -> Spaces:
        return cls(DisplacementSpace(mesh), StrainSpace(mesh, material.sigma_y))


@dataclass
class AssembledSystem:
    mesh: QuadMesh
    material: Material
    spaces: Spaces
    K: sp.csr_matrix
    G: sp.csr_matrix  # (2N, n_u)
    load: np.ndarray
    meta: dict = field(default_factory=dict)

    @property
    def V(self) -> DisplacementSpace:
        return self.spaces.V

    @property
    def Q(self) -> StrainSpace:
        return self.spaces.Q

    @property
    def D(self) -> np.ndarray:
        return self.spaces.Q.D

    @property
    def A_uu(self) -> sp.csr_matrix:
        return self.K

    @property
    def A_up(self) -> sp.csr_matrix:
        w = np.tile(DEV_WEIGHT * self.D, 2)
        return (-2.0 * self.material.lame_mu * (self.G.T @ sp.diags(w))).tocsr()

    @property
    def A_pp(self) -> sp.dia_matrix:
        return sp.diags(np.tile(DEV_WEIGHT * self.material.two_mu_plus_h * self.D, 2))

    def block_matrix(self) -> sp.csr_matrix:
        Aup = self.A_up
        return sp.bmat([[self.K, Aup], [Aup.T, self.A_pp]], format="csr")

    def dev_strain(self, u: np.ndarray) -> np.ndarray:
        """``dev eps(u)`` at the strain nodes, shape ``(N, 2)``."""
        return (self.G @ u).reshape(2, -1).T

    def pairing(self, lam: np.ndarray, q: np.ndarray) -> float:
        """``(lambda, q)_{0,Omega}`` for dual/primal coefficient arrays ``(N, 2)``."""
        return float(DEV_WEIGHT * np.sum(self.D[:, None] * lam * q))

    def psi(self, q: np.ndarray) -> float:
        """Discrete dissipation functional from the coefficient formula."""
        norms = np.sqrt(DEV_WEIGHT * np.sum(q * q, axis=1))
        return float(np.sum(self.Q.sigma * self.D * norms))


# ---------------------------------------------------------------------------
# element matrices


@lru_cache(maxsize=None)
def _stiffness_tables(p: int):
    rule = gauss_rule(p + 1)
    pts = tensor_points(rule.points)
    w = tensor_weights(rule.weights)
    nodes = lobatto_points(p)
    return w, tensor_basis(nodes, pts, dx=1), tensor_basis(nodes, pts, dy=1)


@lru_cache(maxsize=4096)
def element_stiffness(p: int, hx: float, hy: float, lam: float, mu: float) -> np.ndarray:
    """Element stiffness with local ordering ``[ux nodes, uy nodes]``."""
    w, dxi, deta = _stiffness_tables(p)
    det = 0.25 * hx * hy
    bx = dxi * (2.0 / hx)
    by = deta * (2.0 / hy)
    wd = (w * det)[:, None]
    xx = bx.T @ (wd * bx)
    yy = by.T @ (wd * by)
    xy = bx.T @ (wd * by)
    kxx = (lam + 2 * mu) * xx + mu * yy
    kyy = (lam + 2 * mu) * yy + mu * xx
    kxy = lam * xy + mu * xy.T
    return np.block([[kxx, kxy], [kxy.T, kyy]])


@lru_cache(maxsize=None)
def _strain_tables(p: int):
    pts = tensor_points(gauss_rule(p).points)
    nodes = lobatto_points(p)
    return tensor_basis(nodes, pts, dx=1), tensor_basis(nodes, pts, dy=1)


def _sum_coo(parts, shape) -> sp.csr_matrix:
    out = sp.csr_matrix(shape)
    for rows, cols, vals in parts:
        out = out + sp.csr_matrix((vals.ravel(), (rows.ravel(), cols.ravel())), shape=shape)
    return out


def assemble_stiffness_all(V: DisplacementSpace, material: Material) -> sp.csr_matrix:
    """Stiffness on the unconstrained node set (component-major)."""
    mesh = V.mesh
    n2 = 2 * V.n_all
    parts = []
    for g in V.groups:
        sizes = mesh.sizes[g.elems]
        keys, inv = np.unique(sizes, axis=0, return_inverse=True)
        inv = inv.ravel()
        for k, (hx, hy) in enumerate(keys):
            sel = np.where(inv == k)[0]
            ke = element_stiffness(g.p, float(hx), float(hy), material.lame_lambda, material.lame_mu)
            for s0 in range(0, len(sel), _CHUNK):
                nodes = g.nodes[sel[s0:s0 + _CHUNK]]
                dof = np.concatenate([nodes, nodes + V.n_all], axis=1)
                nd = dof.shape[1]
                rows = np.repeat(dof, nd, axis=1)
                cols = np.tile(dof, (1, nd))
                vals = np.broadcast_to(ke.ravel(), rows.shape)
                parts.append((rows, cols, vals))
    return _sum_coo(parts, (n2, n2))


def assemble_strain_operator_all(V: DisplacementSpace, Q: StrainSpace) -> sp.csr_matrix:
    """``dev eps`` at strain nodes on the unconstrained node set, ``(2N, 2 n_all)``."""
    mesh = V.mesh
    rows_l, cols_l, vals_l = [], [], []
    for g in V.groups:
        dxi, deta = _strain_tables(g.p)
        npt, nb = dxi.shape
        sx = (2.0 / mesh.sizes[g.elems, 0])[:, None, None]
        sy = (2.0 / mesh.sizes[g.elems, 1])[:, None, None]
        bx = dxi[None] * sx  # (m, npt, nb)
        by = deta[None] * sy
        coef = Q.group_indices(g.elems, g.p)[:, :, None]  # (m, npt, 1)
        ux = g.nodes[:, None, :]
        uy = ux + V.n_all
        shape = bx.shape
        for r_off, c_nodes, vals in (
            (0, ux, 0.5 * bx), (0, uy, -0.5 * by),
            (Q.N, ux, 0.5 * by), (Q.N, uy, 0.5 * bx),
        ):
            rows_l.append(np.broadcast_to(coef + r_off, shape).ravel())
            cols_l.append(np.broadcast_to(c_nodes, shape).ravel())
            vals_l.append(vals.ravel())
    rows = np.concatenate(rows_l)
    cols = np.concatenate(cols_l)
    vals = np.concatenate(vals_l)
    return sp.csr_matrix((vals, (rows, cols)), shape=(2 * Q.N, 2 * V.n_all))


def assemble(mesh: QuadMesh, material: Material, spaces: Spaces | None = None,
             load: LoadData | None = None) -> AssembledSystem:
    """Assemble stiffness, strain coupling and (optionally) the load vector."""
    spaces = spaces or Spaces.build(mesh, material)
    V, Q = spaces.V, spaces.Q
    if np.any(mesh.jac_det <= 0):
        raise ValueError("singular element Jacobian")
    C2 = V.C2
    K = (C2.T @ assemble_stiffness_all(V, material) @ C2).tocsr()
    K = ((K + K.T) * 0.5).tocsr()
    G = (assemble_strain_operator_all(V, Q) @ C2).tocsr()
    rhs = assemble_load(mesh, load, V) if load is not None else np.zeros(V.n_dofs)
    meta = {"stiffness_points": "p+1", "load_points": "p+2", "backend": None}
    return AssembledSystem(mesh, material, spaces, K, G, rhs, meta)


# ---------------------------------------------------------------------------
# loads


def _split_interval(a: float, b: float, kinks) -> list[tuple[float, float]]:
    cuts = sorted(k for k in kinks if a < k < b)
    pts = [a, *cuts, b]
    return list(zip(pts[:-1], pts[1:]))


def edge_quadrature(mesh: QuadMesh, e: int, side: int, n: int, kinks_x=(), kinks_y=(),
                    span=(-1.0, 1.0)):
    """Gauss points on (part of) an element side, split at data kinks.

    Returns ``(t, x, y, w)``: side parameters, physical coordinates and
    weights including the edge Jacobian.
    """
    xa, xb, ya, yb = mesh.bounds[e]
    horizontal = side in (0, 2)
    lo, hi = (xa, xb) if horizontal else (ya, yb)
    c0 = lo + 0.5 * (span[0] + 1.0) * (hi - lo)
    c1 = lo + 0.5 * (span[1] + 1.0) * (hi - lo)
    rule = gauss_rule(n)
    ts, xs, ys, ws = [], [], [], []
    for s0, s1 in _split_interval(c0, c1, kinks_x if horizontal else kinks_y):
        c = s0 + 0.5 * (rule.points + 1.0) * (s1 - s0)
        ws.append(rule.weights * 0.5 * (s1 - s0))
        ts.append(-1.0 + 2.0 * (c - lo) / (hi - lo))
        fixed = {0: ya, 1: xb, 2: yb, 3: xa}[side]
        if horizontal:
            xs.append(c)
            ys.append(np.full_like(c, fixed))
        else:
            xs.append(np.full_like(c, fixed))
            ys.append(c)
    return np.concatenate(ts), np.concatenate(xs), np.concatenate(ys), np.concatenate(ws)


def assemble_load(mesh: QuadMesh, load: LoadData | None, V: DisplacementSpace | None = None) -> np.ndarray:
    """Load vector ``l(v) = (f, v) + <g, v>_{Gamma_N}`` on the free DOFs."""
    V = V or DisplacementSpace(mesh)
    full = np.zeros((2, V.n_all))
    if load is None:
        return np.zeros(V.n_dofs)
    if load.f is not None:
        b = mesh.bounds
        for g in V.groups:
            rule = gauss_rule(g.p + 2)
            pts = tensor_points(rule.points)
            w = tensor_weights(rule.weights)
            N = tensor_basis(lobatto_points(g.p), pts)
            xa, xb, ya, yb = (b[g.elems, k][:, None] for k in range(4))
            x = xa + 0.5 * (pts[:, 0] + 1.0) * (xb - xa)
            y = ya + 0.5 * (pts[:, 1] + 1.0) * (yb - ya)
            fv = load.eval_f(x.ravel(), y.ravel()).reshape(len(g.elems), len(w), 2)
            det = mesh.jac_det[g.elems][:, None]
            contrib = np.einsum("mq,mqc,qn->mcn", w[None, :] * det, fv, N)
            for c in range(2):
                np.add.at(full[c], g.nodes, contrib[:, c])
    if load.g is not None:
        f = mesh.facets
        for k in np.where(f.b_kind == 1)[0]:
            e, side = int(f.b_elem[k]), int(f.b_side[k])
            p = int(mesh.degree[e])
            t, x, y, w = edge_quadrature(mesh, e, side, p + 2, load.kinks_x, load.kinks_y)
            ref = side_reference_points(side, t)
            N = tensor_basis(lobatto_points(p), ref)
            gv = load.eval_g(x, y)
            contrib = (w[:, None] * gv).T @ N  # (2, nb)
            ids = V.elem_nodes[e]
            for c in range(2):
                np.add.at(full[c], ids, contrib[c])
    return np.concatenate([V.C.T @ full[0], V.C.T @ full[1]])


# ---------------------------------------------------------------------------
# projections and quadrature


def quadrature_Q_hp(mesh: QuadMesh, e: int, f: Callable) -> float:
    """Mesh-dependent rule on element ``e``; ``f`` takes physical ``(x, y)``."""
    p = int(mesh.degree[e])

    def integrand(ref):
        phys = mesh.map_F_T(e, ref)
        return f(phys[:, 0], phys[:, 1])

    det = mesh.jac_det[e]
    return element_quadrature(p, float(mesh.areas[e]), lambda ref: np.full(len(ref), det), integrand)


def _as_dev(values: np.ndarray) -> np.ndarray:
    values = np.asarray(values, dtype=float)
    if values.shape[-1] == 3:  # symmetric (xx, yy, xy)
        return np.stack([0.5 * (values[..., 0] - values[..., 1]), values[..., 2]], axis=-1)
    return values


def l2_project_to_Qhp(Q: StrainSpace, fieldfn: Callable, pointwise: bool = False,
                      extra_points: int = 2) -> np.ndarray:
    """L2 projection of a tensor field onto the strain space.

    ``fieldfn(x, y)`` returns ``(m, 2)`` deviators or ``(m, 3)`` symmetric
    tensors; the latter are projected through ``dev``. With ``pointwise`` the
    field is sampled at the strain nodes, which is the exact projection when
    the field has degree at most ``p_T`` per direction.
    """
    if pointwise:
        pts = Q.points
        return _as_dev(fieldfn(pts[:, 0], pts[:, 1]))
    mesh = Q.mesh
    out = np.empty((Q.N, 2))
    b = mesh.bounds
    for p in np.unique(mesh.degree).tolist():
        elems = np.where(mesh.degree == p)[0]
        rule = gauss_rule(p + extra_points)
        pts = tensor_points(rule.points)
        w = tensor_weights(rule.weights)
        phi = strain_basis(p, pts)  # (nq, p^2)
        xa, xb, ya, yb = (b[elems, k][:, None] for k in range(4))
        x = xa + 0.5 * (pts[:, 0] + 1.0) * (xb - xa)
        y = ya + 0.5 * (pts[:, 1] + 1.0) * (yb - ya)
        vals = _as_dev(fieldfn(x.ravel(), y.ravel())).reshape(len(elems), len(w), 2)
        det = mesh.jac_det[elems][:, None]
        mom = np.einsum("mq,mqj,qk->mkj", w[None] * det, vals, phi)
        idx = Q.group_indices(elems, p)
        out[idx] = mom / Q.D[idx][..., None]
    return out


@dataclass
class DataProjection:
    """Projected loads.

    ``f_coef`` are ``(N, 2)`` coefficients in the Gauss-Lagrange basis of
    degree ``p_T - 1``. ``g_coef[k]`` holds ``(p_T, 2)`` nodal values at the
    ``p_T`` Gauss points of Neumann boundary facet ``k`` (same order as
    ``mesh.facets.b_*`` restricted to Neumann facets, see ``g_facets``).
    """

    f_coef: np.ndarray
    g_facets: np.ndarray
    g_coef: list

    def g_at(self, mesh: QuadMesh, k: int, t: np.ndarray) -> np.ndarray:
        e = int(mesh.facets.b_elem[self.g_facets[k]])
        p = int(mesh.degree[e])
        return lagrange_1d(gauss_rule(p).points, t) @ self.g_coef[k]


def project_data(mesh: QuadMesh, load: LoadData, Q: StrainSpace | None = None,
                 extra_points: int = 2) -> DataProjection:
    """Element-wise projection of ``f`` onto degree ``p_T - 1`` and edge-wise
    projection of ``g`` onto the traces of that space on Neumann facets."""
    Q = Q or StrainSpace(mesh, 1.0)
    if load.f is None:
        f_coef = np.zeros((Q.N, 2))
    else:
        f_coef = l2_project_to_Qhp(Q, lambda x, y: load.eval_f(x, y), extra_points=extra_points)
    f = mesh.facets
    neu = np.where(f.b_kind == 1)[0]
    g_coef = []
    for k in neu:
        e, side = int(f.b_elem[k]), int(f.b_side[k])
        p = int(mesh.degree[e])
        if load.g is None:
            g_coef.append(np.zeros((p, 2)))
            continue
        t, x, y, w = edge_quadrature(mesh, e, side, p + extra_points, load.kinks_x, load.kinks_y)
        nodes = gauss_rule(p)
        L = lagrange_1d(nodes.points, t)  # (nq, p)
        mom = L.T @ (w[:, None] * load.eval_g(x, y))
        half = 0.5 * float(f.b_length[k])
        g_coef.append(mom / (nodes.weights * half)[:, None])
    return DataProjection(f_coef, neu, g_coef)
