"""Discrete spaces: constrained displacements and discontinuous plastic strains.

Displacements use a Gauss-Lobatto nodal basis of degree ``p_T`` per direction.
Local node ``(a, b)`` of an element has index ``b * (p + 1) + a``. Conformity
across hanging edges and degree jumps is enforced by expressing slave nodes as
interpolants of a master edge trace, and the resulting linear constraints are
eliminated algebraically: ``U_all = C @ U_free`` per component.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np
import scipy.sparse as sp

from .mesh import SIDE_NAMES, QuadMesh
from .quadrature import gauss_rule, lagrange_1d, lobatto_points, tensor_points, tensor_weights

# corners (SW, SE, NE, NW) forming each side, ordered along increasing coordinate
_SIDE_CORNERS = ((0, 1), (1, 2), (3, 2), (0, 3))


def side_local_nodes(p: int, side: int) -> np.ndarray:
    """Local node indices along ``side`` in increasing coordinate order."""
    k = np.arange(p + 1)
    if side == 0:
        return k
    if side == 2:
        return p * (p + 1) + k
    if side == 3:
        return k * (p + 1)
    return k * (p + 1) + p


@dataclass
class DegreeGroup:
    """Elements of one polynomial degree with their node ids."""

    p: int
    elems: np.ndarray  # (m,)
    nodes: np.ndarray  # (m, (p+1)^2) ids into the unconstrained node list


class DisplacementSpace:
    """Continuous vector-valued space with homogeneous Dirichlet conditions."""

    def __init__(self, mesh: QuadMesh):
        self.mesh = mesh
        self._build()

    # ------------------------------------------------------------- numbering

    def _build(self) -> None:
        mesh = self.mesh
        corners = mesh._corner_ints  # (ne, 4, 2)
        vert_ids = mesh.element_vertices  # (ne, 4)
        nv = int(vert_ids.max()) + 1 if mesh.n_elements else 0
        deg = mesh.degree.tolist()

        def seg_key(e, s):
            c0, c1 = _SIDE_CORNERS[s]
            return (*corners[e, c0].tolist(), *corners[e, c1].tolist())

        # master segment of every element side
        master = {}  # (e, s) -> (segment key, endpoint vertex ids)
        seg_deg: dict = {}
        table = mesh.neighbor_table
        for e, row in enumerate(table):
            for s, nbrs in enumerate(row):
                if len(nbrs) == 1 and nbrs[0][1] == -1:
                    nb = nbrs[0][0]
                    os_ = (s + 2) % 4
                    key = seg_key(nb, os_)
                    ends = (vert_ids[nb, _SIDE_CORNERS[os_][0]], vert_ids[nb, _SIDE_CORNERS[os_][1]])
                else:
                    key = seg_key(e, s)
                    ends = (vert_ids[e, _SIDE_CORNERS[s][0]], vert_ids[e, _SIDE_CORNERS[s][1]])
                master[(e, s)] = (key, (int(ends[0]), int(ends[1])))
                seg_deg[key] = min(seg_deg.get(key, deg[e]), deg[e])

        next_id = nv
        seg_nodes: dict = {}  # (segment key, degree) -> first id of degree-1 interior nodes

        def seg_block(key, q):
            nonlocal next_id
            k = (key, q)
            if k not in seg_nodes:
                seg_nodes[k] = next_id
                next_id += q - 1
            return seg_nodes[k]

        slave_rows: dict = {}  # node id -> (master ids, coefficients)
        elem_nodes = []
        for e in range(mesh.n_elements):
            p = deg[e]
            ids = np.full((p + 1) ** 2, -1, dtype=np.int64)
            ids[[0, p, (p + 1) ** 2 - 1, p * (p + 1)]] = vert_ids[e, [0, 1, 2, 3]]
            for s in range(4):
                loc = side_local_nodes(p, s)
                own = seg_key(e, s)
                start = seg_block(own, p)
                ids[loc[1:-1]] = np.arange(start, start + p - 1)
                mkey, ends = master[(e, s)]
                q = seg_deg[mkey]
                if own == mkey and p == q:
                    continue
                # slave nodes: interpolate the master trace of degree q
                mstart = seg_block(mkey, q)
                m_ids = np.concatenate([[ends[0]], np.arange(mstart, mstart + q - 1), [ends[1]]])
                t_own = lobatto_points(p)
                if own == mkey:
                    s_param = t_own
                else:
                    # own side is one half of the master side
                    axis = 0 if s in (0, 2) else 1
                    m0, m1 = mkey[axis], mkey[2 + axis]
                    o0, o1 = own[axis], own[2 + axis]
                    phys = o0 + 0.5 * (t_own + 1.0) * (o1 - o0)
                    s_param = -1.0 + 2.0 * (phys - m0) / (m1 - m0)
                coef = lagrange_1d(lobatto_points(q), s_param)
                node_ids = ids[loc]
                for k in range(p + 1):
                    nid = int(node_ids[k])
                    if nid in (ends[0], ends[1]):
                        continue
                    if k in (0, p) and own == mkey:
                        continue
                    c = coef[k]
                    keep = np.abs(c) > 1e-15
                    slave_rows[nid] = (m_ids[keep], c[keep])
            # element interior
            inner = np.arange(1, p)
            if p > 1:
                loc = (inner[:, None] * (p + 1) + inner[None, :]).ravel()
                ids[loc] = np.arange(next_id, next_id + len(loc))
                next_id += len(loc)
            elem_nodes.append(ids)

        n_all = next_id
        self.n_all = n_all
        self.elem_nodes = elem_nodes
        self._seg_nodes = seg_nodes

        # unconstrained-to-constrained map with transitive closure
        rows, cols, vals = [], [], []
        is_slave = np.zeros(n_all, dtype=bool)
        for nid, (mids, c) in slave_rows.items():
            is_slave[nid] = True
            rows.extend([nid] * len(mids))
            cols.extend(mids.tolist())
            vals.extend(c.tolist())
        free_nodes = np.where(~is_slave)[0]
        rows.extend(free_nodes.tolist())
        cols.extend(free_nodes.tolist())
        vals.extend([1.0] * len(free_nodes))
        T = sp.csr_matrix((vals, (rows, cols)), shape=(n_all, n_all))
        for _ in range(32):
            if T[:, is_slave].nnz == 0:
                break
            T = (T @ T).tocsr()
            T.data[np.abs(T.data) < 1e-15] = 0.0
            T.eliminate_zeros()
        else:  # pragma: no cover - would indicate a cyclic constraint
            raise RuntimeError("hanging-node constraints did not close")

        # Dirichlet nodes: vertices and segment nodes on Dirichlet sides
        dirichlet = np.zeros(n_all, dtype=bool)
        nx_f, ny_f = mesh.nx << mesh.max_level, mesh.ny << mesh.max_level
        uniq, _ = mesh._vertex_data
        line_of = {"bottom": (1, 0), "top": (1, ny_f), "left": (0, 0), "right": (0, nx_f)}
        for side in mesh.dirichlet_sides:
            ax, val = line_of[side]
            dirichlet[:nv][uniq[:, ax] == val] = True
            for (key, q), start in seg_nodes.items():
                if key[ax] == val and key[2 + ax] == val:
                    dirichlet[start:start + q - 1] = True

        keep = free_nodes[~dirichlet[free_nodes]]
        self.free_nodes = keep
        self.dirichlet_nodes = np.where(dirichlet)[0]
        self.is_slave = is_slave
        self.C = T[:, keep].tocsr()
        self.n_scalar = len(keep)
        self.n_dofs = 2 * self.n_scalar

    @cached_property
    def C2(self) -> sp.csr_matrix:
        return sp.block_diag([self.C, self.C], format="csr")

    @cached_property
    def groups(self) -> list[DegreeGroup]:
        out = []
        deg = self.mesh.degree
        for p in np.unique(deg).tolist():
            elems = np.where(deg == p)[0]
            nodes = np.array([self.elem_nodes[e] for e in elems], dtype=np.int64).reshape(len(elems), -1)
            out.append(DegreeGroup(p, elems, nodes))
        return out

    @cached_property
    def group_row(self) -> np.ndarray:
        """Row of each element inside its degree group's node table."""
        row = np.empty(self.mesh.n_elements, dtype=np.int64)
        for g in self.groups:
            row[g.elems] = np.arange(len(g.elems))
        return row

    @cached_property
    def _group_of_degree(self) -> dict:
        return {g.p: g for g in self.groups}

    def node_table(self, elems: np.ndarray, p: int) -> np.ndarray:
        """Node ids ``(m, (p+1)^2)`` of elements that all have degree ``p``."""
        return self._group_of_degree[p].nodes[self.group_row[elems]]

    # ------------------------------------------------------------- vectors

    def expand(self, u: np.ndarray) -> np.ndarray:
        """All-node values ``(2, n_all)`` of a free coefficient vector."""
        u = np.asarray(u, dtype=float)
        return np.vstack([self.C @ u[: self.n_scalar], self.C @ u[self.n_scalar:]])

    def element_coefficients(self, u: np.ndarray, group: DegreeGroup, full=None) -> np.ndarray:
        """Nodal coefficients ``(m, 2, (p+1)^2)`` of the group elements."""
        full = self.expand(u) if full is None else full
        return np.transpose(full[:, group.nodes], (1, 0, 2))

    def interpolate(self, fn) -> np.ndarray:
        """Nodal interpolant of a vector field ``fn(x, y) -> (ux, uy)``.

        Values are taken at the free nodes; slave nodes follow from the
        constraints, so non-polynomial fields are only approximated.
        """
        pos = self.node_positions
        ux, uy = fn(pos[self.free_nodes, 0], pos[self.free_nodes, 1])
        return np.concatenate([np.broadcast_to(ux, self.n_scalar), np.broadcast_to(uy, self.n_scalar)]).astype(float)

    @cached_property
    def node_positions(self) -> np.ndarray:
        """Physical coordinates of every unconstrained node, ``(n_all, 2)``."""
        mesh = self.mesh
        pos = np.empty((self.n_all, 2))
        verts = mesh.vertices
        pos[: len(verts)] = verts
        x0, _, y0, _ = mesh.domain
        hx0, hy0 = mesh.base_size
        scale = 2.0 ** -mesh.max_level
        for (key, q), start in self._seg_nodes.items():
            if q < 2:
                continue
            t = 0.5 * (lobatto_points(q)[1:-1] + 1.0)
            xs = key[0] + t * (key[2] - key[0])
            ys = key[1] + t * (key[3] - key[1])
            pos[start:start + q - 1, 0] = x0 + xs * hx0 * scale
            pos[start:start + q - 1, 1] = y0 + ys * hy0 * scale
        b = mesh.bounds
        for g in self.groups:
            if g.p < 2:
                continue
            inner = np.arange(1, g.p)
            loc = (inner[:, None] * (g.p + 1) + inner[None, :]).ravel()
            ref = tensor_points(lobatto_points(g.p))[loc]
            xa, xb, ya, yb = (b[g.elems, k][:, None] for k in range(4))
            pos[g.nodes[:, loc].ravel(), 0] = (xa + 0.5 * (ref[:, 0] + 1.0) * (xb - xa)).ravel()
            pos[g.nodes[:, loc].ravel(), 1] = (ya + 0.5 * (ref[:, 1] + 1.0) * (yb - ya)).ravel()
        return pos


class StrainSpace:
    """Element-wise polynomials of degree ``p_T - 1`` in the Gauss-Lagrange basis.

    Coefficient ``offset[T] + k`` belongs to Gauss point ``k`` (x fastest) of
    element ``T``. ``D`` holds ``(phi_i, 1)`` and ``sigma`` the yield weights.
    """

    def __init__(self, mesh: QuadMesh, sigma_y: float):
        self.mesh = mesh
        self.sigma_y = float(sigma_y)
        n_t = mesh.degree ** 2
        self.offsets = np.concatenate([[0], np.cumsum(n_t)])
        self.N = int(self.offsets[-1])
        self.elem_of = np.repeat(np.arange(mesh.n_elements), n_t)
        D = np.empty(self.N)
        for e in range(mesh.n_elements):
            p = int(mesh.degree[e])
            w = tensor_weights(gauss_rule(p).weights)
            D[self.offsets[e]:self.offsets[e + 1]] = w * mesh.jac_det[e]
        self.D = D
        self.sigma = np.full(self.N, self.sigma_y)

    def element_slice(self, e: int) -> slice:
        return slice(int(self.offsets[e]), int(self.offsets[e + 1]))

    def group_indices(self, elems: np.ndarray, p: int) -> np.ndarray:
        """Coefficient ids ``(m, p^2)`` of same-degree elements."""
        return self.offsets[elems][:, None] + np.arange(p * p)[None, :]

    @cached_property
    def points(self) -> np.ndarray:
        """Physical Gauss points carrying the coefficients, ``(N, 2)``."""
        out = np.empty((self.N, 2))
        b = self.mesh.bounds
        for p in np.unique(self.mesh.degree).tolist():
            elems = np.where(self.mesh.degree == p)[0]
            ref = tensor_points(gauss_rule(p).points)
            idx = self.group_indices(elems, p)
            xa, xb, ya, yb = (b[elems, k][:, None] for k in range(4))
            out[idx, 0] = xa + 0.5 * (ref[:, 0] + 1.0) * (xb - xa)
            out[idx, 1] = ya + 0.5 * (ref[:, 1] + 1.0) * (yb - ya)
        return out


# ---------------------------------------------------------------------------
# point evaluation


@dataclass
class FieldValues:
    """Displacement values and derivatives at points.

    ``grad[m, c, d] = d u_c / d x_d``; ``hess[m, c, i]`` holds
    ``(u_c,xx, u_c,yy, u_c,xy)``.
    """

    value: np.ndarray
    grad: np.ndarray
    hess: np.ndarray | None = None


def evaluate_displacement(space: DisplacementSpace, u, elems, ref, second: bool = False,
                          full=None) -> FieldValues:
    """Evaluate ``u_hp`` at reference points ``ref[m]`` of elements ``elems[m]``."""
    elems = np.asarray(elems, dtype=np.int64)
    ref = np.atleast_2d(ref)
    full = space.expand(u) if full is None else full
    mesh = space.mesh
    m = len(elems)
    val = np.empty((m, 2))
    grad = np.empty((m, 2, 2))
    hess = np.empty((m, 2, 3)) if second else None
    deg = mesh.degree[elems]
    sx = 2.0 / mesh.sizes[elems, 0]
    sy = 2.0 / mesh.sizes[elems, 1]
    for p in np.unique(deg).tolist():
        sel = np.where(deg == p)[0]
        nodes = lobatto_points(p)
        ids = space.node_table(elems[sel], p).reshape(len(sel), p + 1, p + 1)
        coef = full[:, ids]  # (2, k, p+1 (b), p+1 (a))
        lx = [lagrange_1d(nodes, ref[sel, 0], d) for d in range(3 if second else 2)]
        ly = [lagrange_1d(nodes, ref[sel, 1], d) for d in range(3 if second else 2)]

        def ev(dx, dy):
            return np.einsum("ckba,ka,kb->kc", coef, lx[dx], ly[dy])

        val[sel] = ev(0, 0)
        grad[sel, :, 0] = ev(1, 0) * sx[sel, None]
        grad[sel, :, 1] = ev(0, 1) * sy[sel, None]
        if second:
            hess[sel, :, 0] = ev(2, 0) * (sx[sel] ** 2)[:, None]
            hess[sel, :, 1] = ev(0, 2) * (sy[sel] ** 2)[:, None]
            hess[sel, :, 2] = ev(1, 1) * (sx[sel] * sy[sel])[:, None]
    return FieldValues(val, grad, hess)


def evaluate_strain(space: StrainSpace, coeffs, elems, ref, deriv: bool = False):
    """Evaluate a strain-space field ``(N, 2)`` at element reference points.

    Returns values ``(m, 2)``; with ``deriv`` also physical derivatives
    ``(m, 2, 2)`` where ``[m, j, d] = d q_j / d x_d``.
    """
    elems = np.asarray(elems, dtype=np.int64)
    ref = np.atleast_2d(ref)
    coeffs = np.asarray(coeffs)
    mesh = space.mesh
    m = len(elems)
    val = np.empty((m, coeffs.shape[1]))
    dq = np.zeros((m, coeffs.shape[1], 2)) if deriv else None
    deg = mesh.degree[elems]
    for p in np.unique(deg).tolist():
        sel = np.where(deg == p)[0]
        idx = space.offsets[elems[sel]][:, None] + np.arange(p * p)[None, :]
        c = coeffs[idx].reshape(len(sel), p, p, -1)  # (k, b, a, j)
        if p == 1:
            val[sel] = c[:, 0, 0]
            continue
        nodes = gauss_rule(p).points
        lx = lagrange_1d(nodes, ref[sel, 0])
        ly = lagrange_1d(nodes, ref[sel, 1])
        val[sel] = np.einsum("kbaj,ka,kb->kj", c, lx, ly)
        if deriv:
            dlx = lagrange_1d(nodes, ref[sel, 0], 1) * (2.0 / mesh.sizes[elems[sel], 0])[:, None]
            dly = lagrange_1d(nodes, ref[sel, 1], 1) * (2.0 / mesh.sizes[elems[sel], 1])[:, None]
            dq[sel, :, 0] = np.einsum("kbaj,ka,kb->kj", c, dlx, ly)
            dq[sel, :, 1] = np.einsum("kbaj,ka,kb->kj", c, lx, dly)
    return (val, dq) if deriv else val


def side_reference_points(side: int, t: np.ndarray) -> np.ndarray:
    """Reference coordinates of parameter ``t`` along ``side`` (increasing)."""
    t = np.asarray(t, dtype=float)
    one = np.ones_like(t)
    if side == 0:
        return np.column_stack([t, -one])
    if side == 1:
        return np.column_stack([one, t])
    if side == 2:
        return np.column_stack([t, one])
    return np.column_stack([-one, t])


def boundary_side_names(mesh: QuadMesh) -> tuple[str, ...]:
    return tuple(s for s in SIDE_NAMES if s not in mesh.dirichlet_sides)


def evaluate_at_points(space: DisplacementSpace, u, points, gradient: bool = False, full=None):
    """Values (and optionally gradients) of ``u_hp`` at physical points."""
    points = np.atleast_2d(np.asarray(points, dtype=float))
    elems = space.mesh.locate(points)
    ref = np.clip(space.mesh.to_reference(elems, points), -1.0, 1.0)
    fv = evaluate_displacement(space, u, elems, ref, full=full)
    return (fv.value, fv.grad) if gradient else fv.value
