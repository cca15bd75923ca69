"""Quadtree meshes of axis-aligned rectangles with per-element degree.

Every element is a leaf ``(level, i, j)`` of a quadtree rooted at an
``nx x ny`` grid over a rectangle. Refinement splits leaves isotropically and
closes the mesh so that edge neighbours differ by at most one level
(1-irregular) and by at most one polynomial degree.

Side numbering: 0 bottom, 1 right, 2 top, 3 left.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, Sequence

import numpy as np

SIDE_OFFSETS = ((0, -1), (1, 0), (0, 1), (-1, 0))
SIDE_NAMES = ("bottom", "right", "top", "left")
_OUTSIDE = -2
_FINER = -1


@dataclass(frozen=True)
class Element:
    index: int
    key: tuple[int, int, int]
    degree: int
    vertex_ids: tuple[int, int, int, int]
    bounds: tuple[float, float, float, float]
    parent: tuple[int, int, int] | None
    boundary: tuple[str, str, str, str]


@dataclass(frozen=True)
class Edge:
    """A facet of the mesh.

    Interior facets are the fine-level segments; on a hanging edge the coarse
    element appears with the half of its side the facet covers.
    """

    vertex_ids: tuple[int, int]
    kind: str  # "interior" | "dirichlet" | "neumann"
    elements: tuple[int, ...]
    normal: tuple[float, float]
    length: float


@dataclass(frozen=True)
class Facets:
    """Vectorized facet tables.

    Interior facets: element ``a`` lies left of / below element ``b`` and the
    stored normal points from ``a`` to ``b`` (+x or +y). ``span_*`` gives the
    parameter interval of the facet along the element side.
    """

    ia_elem: np.ndarray
    ia_side: np.ndarray
    ia_span: np.ndarray  # (n, 2)
    ib_elem: np.ndarray
    ib_side: np.ndarray
    ib_span: np.ndarray
    i_normal: np.ndarray  # (n, 2)
    i_length: np.ndarray
    b_elem: np.ndarray
    b_side: np.ndarray
    b_kind: np.ndarray  # 0 dirichlet, 1 neumann
    b_normal: np.ndarray
    b_length: np.ndarray


_OUTWARD = np.array([[0.0, -1.0], [1.0, 0.0], [0.0, 1.0], [-1.0, 0.0]])


class QuadMesh:
    def __init__(
        self,
        domain: Sequence[float],
        nx: int,
        ny: int,
        levels,
        ix,
        iy,
        degrees,
        dirichlet_sides: Iterable[str] = ("bottom",),
        generation: int = 0,
    ):
        x0, x1, y0, y1 = map(float, domain)
        if not (x1 > x0 and y1 > y0):
            raise ValueError(f"degenerate domain {domain}")
        if nx < 1 or ny < 1:
            raise ValueError("nx, ny must be >= 1")
        self.domain = (x0, x1, y0, y1)
        self.nx, self.ny = int(nx), int(ny)
        self.level = np.asarray(levels, dtype=np.int64)
        self.ix = np.asarray(ix, dtype=np.int64)
        self.iy = np.asarray(iy, dtype=np.int64)
        self.degree = np.asarray(degrees, dtype=np.int64)
        if np.any(self.degree < 1):
            raise ValueError("element degrees must be >= 1")
        self.dirichlet_sides = tuple(dirichlet_sides)
        for s in self.dirichlet_sides:
            if s not in SIDE_NAMES:
                raise ValueError(f"unknown boundary side {s!r}")
        self.generation = generation

    # ------------------------------------------------------------------ basics

    @property
    def n_elements(self) -> int:
        return len(self.level)

    def __len__(self) -> int:
        return self.n_elements

    @cached_property
    def keys(self) -> list[tuple[int, int, int]]:
        return list(zip(self.level.tolist(), self.ix.tolist(), self.iy.tolist()))

    @cached_property
    def lookup(self) -> dict[tuple[int, int, int], int]:
        return {k: e for e, k in enumerate(self.keys)}

    @property
    def max_level(self) -> int:
        return int(self.level.max())

    @cached_property
    def base_size(self) -> tuple[float, float]:
        x0, x1, y0, y1 = self.domain
        return (x1 - x0) / self.nx, (y1 - y0) / self.ny

    @cached_property
    def sizes(self) -> np.ndarray:
        """Element side lengths ``(hx, hy)``, shape ``(ne, 2)``."""
        hx0, hy0 = self.base_size
        s = np.ldexp(1.0, -self.level)
        return np.column_stack([hx0 * s, hy0 * s])

    @cached_property
    def bounds(self) -> np.ndarray:
        """``(xa, xb, ya, yb)`` per element."""
        x0, _, y0, _ = self.domain
        hx, hy = self.sizes[:, 0], self.sizes[:, 1]
        xa = x0 + self.ix * hx
        ya = y0 + self.iy * hy
        return np.column_stack([xa, xa + hx, ya, ya + hy])

    @cached_property
    def centers(self) -> np.ndarray:
        b = self.bounds
        return np.column_stack([0.5 * (b[:, 0] + b[:, 1]), 0.5 * (b[:, 2] + b[:, 3])])

    @cached_property
    def areas(self) -> np.ndarray:
        return self.sizes[:, 0] * self.sizes[:, 1]

    @cached_property
    def diameters(self) -> np.ndarray:
        return np.hypot(self.sizes[:, 0], self.sizes[:, 1])

    @cached_property
    def jac_det(self) -> np.ndarray:
        return 0.25 * self.areas

    def h_T(self, e: int) -> float:
        return float(self.diameters[e])

    # ---------------------------------------------------------------- mapping

    def corner_coords(self, e: int) -> np.ndarray:
        xa, xb, ya, yb = self.bounds[e]
        return np.array([[xa, ya], [xb, ya], [xb, yb], [xa, yb]])

    def map_F_T(self, e: int, ref) -> np.ndarray:
        """Bilinear map of reference points in ``[-1, 1]^2``."""
        ref = np.atleast_2d(np.asarray(ref, dtype=float))
        c = self.corner_coords(e)
        xi, eta = ref[:, 0], ref[:, 1]
        n = 0.25 * np.stack(
            [(1 - xi) * (1 - eta), (1 + xi) * (1 - eta), (1 + xi) * (1 + eta), (1 - xi) * (1 + eta)],
            axis=1,
        )
        return n @ c

    def jacobian(self, e: int, ref) -> tuple[np.ndarray, float]:
        """Jacobian ``dF/dxi`` and its determinant at one reference point."""
        xi, eta = np.asarray(ref, dtype=float).ravel()[:2]
        c = self.corner_coords(e)
        dxi = 0.25 * np.array([-(1 - eta), 1 - eta, 1 + eta, -(1 + eta)])
        deta = 0.25 * np.array([-(1 - xi), -(1 + xi), 1 + xi, 1 - xi])
        jac = np.column_stack([dxi @ c, deta @ c])
        return jac, float(np.linalg.det(jac))

    def to_reference(self, elems: np.ndarray, pts: np.ndarray) -> np.ndarray:
        """Invert the element maps for points ``pts[m]`` in ``elems[m]``.

        Newton on the bilinear map; exact after one step on rectangles.
        """
        elems = np.asarray(elems)
        pts = np.atleast_2d(pts)
        b = self.bounds[elems]
        ref = np.zeros_like(pts)
        for _ in range(5):
            # map and Jacobian of axis-aligned bilinear map
            phys = np.column_stack(
                [
                    0.5 * (b[:, 0] + b[:, 1]) + 0.5 * (b[:, 1] - b[:, 0]) * ref[:, 0],
                    0.5 * (b[:, 2] + b[:, 3]) + 0.5 * (b[:, 3] - b[:, 2]) * ref[:, 1],
                ]
            )
            r = pts - phys
            step = np.column_stack(
                [2 * r[:, 0] / (b[:, 1] - b[:, 0]), 2 * r[:, 1] / (b[:, 3] - b[:, 2])]
            )
            ref = ref + step
            if np.max(np.abs(step), initial=0.0) < 1e-13:
                break
        return ref

    # -------------------------------------------------------------- topology

    def covering(self, L: int, i: int, j: int) -> int:
        """Leaf covering cell ``(L, i, j)``; ``-1`` if finer leaves, ``-2`` outside."""
        if i < 0 or j < 0 or i >= (self.nx << L) or j >= (self.ny << L):
            return _OUTSIDE
        lk = self.lookup
        for k in range(L + 1):
            idx = lk.get((L - k, i >> k, j >> k))
            if idx is not None:
                return idx
        return _FINER

    def _finer_neighbors(self, L: int, i: int, j: int, side: int) -> list[int]:
        """Leaves of level ``L + 1`` across ``side`` of cell ``(L, i, j)``."""
        di, dj = SIDE_OFFSETS[side]
        ni, nj = 2 * (i + di), 2 * (j + dj)
        if side == 0:
            cells = [(ni, nj + 1), (ni + 1, nj + 1)]
        elif side == 1:
            cells = [(ni, nj), (ni, nj + 1)]
        elif side == 2:
            cells = [(ni, nj), (ni + 1, nj)]
        else:
            cells = [(ni + 1, nj), (ni + 1, nj + 1)]
        out = []
        for ci, cj in cells:
            idx = self.lookup.get((L + 1, ci, cj))
            if idx is None:
                raise RuntimeError("mesh is not 1-irregular")
            out.append(idx)
        return out

    def side_kind(self, e: int, side: int) -> str:
        """``interior``, ``dirichlet`` or ``neumann`` for an element side."""
        L, i, j = self.keys[e]
        di, dj = SIDE_OFFSETS[side]
        if self.covering(L, i + di, j + dj) != _OUTSIDE:
            return "interior"
        return "dirichlet" if SIDE_NAMES[side] in self.dirichlet_sides else "neumann"

    @cached_property
    def neighbor_table(self) -> list[list[tuple[int, int]]]:
        """Per element, per side: list of ``(neighbor, relative level)``.

        Relative level is 0 (same), -1 (coarser neighbour) or +1 (finer).
        Boundary sides have empty lists.
        """
        table = []
        for L, i, j in self.keys:
            row = []
            for side, (di, dj) in enumerate(SIDE_OFFSETS):
                c = self.covering(L, i + di, j + dj)
                if c == _OUTSIDE:
                    row.append([])
                elif c == _FINER:
                    row.append([(n, 1) for n in self._finer_neighbors(L, i, j, side)])
                else:
                    row.append([(c, int(self.level[c]) - L)])
            table.append(row)
        return table

    @cached_property
    def facets(self) -> Facets:
        ia_e, ia_s, ia_sp, ib_e, ib_s, ib_sp, i_n, i_len = ([] for _ in range(8))
        b_e, b_s, b_k, b_n, b_len = ([] for _ in range(5))
        sizes = self.sizes
        full = (-1.0, 1.0)
        for e, (L, i, j) in enumerate(self.keys):
            for side, nbrs in enumerate(self.neighbor_table[e]):
                axis = 0 if side in (1, 3) else 1  # normal axis
                length = sizes[e, 1] if axis == 0 else sizes[e, 0]
                if not nbrs:
                    b_e.append(e)
                    b_s.append(side)
                    b_k.append(0 if SIDE_NAMES[side] in self.dirichlet_sides else 1)
                    b_n.append(_OUTWARD[side])
                    b_len.append(length)
                    continue
                if len(nbrs) == 2:
                    continue  # recorded by the finer neighbours
                nb, rel = nbrs[0]
                if rel == 0 and side in (0, 3):
                    continue  # recorded from the other element
                if rel == 0:
                    span_nb = full
                else:
                    # coarse neighbour: which half of its side we touch
                    if axis == 0:
                        lower = (j % 2) == 0
                    else:
                        lower = (i % 2) == 0
                    span_nb = (-1.0, 0.0) if lower else (0.0, 1.0)
                opposite = (side + 2) % 4
                if side in (1, 2):
                    a, sa, spa, b, sb, spb = e, side, full, nb, opposite, span_nb
                else:
                    a, sa, spa, b, sb, spb = nb, opposite, span_nb, e, side, full
                ia_e.append(a)
                ia_s.append(sa)
                ia_sp.append(spa)
                ib_e.append(b)
                ib_s.append(sb)
                ib_sp.append(spb)
                i_n.append((1.0, 0.0) if axis == 0 else (0.0, 1.0))
                i_len.append(length)
        arr = np.asarray
        return Facets(
            arr(ia_e, dtype=np.int64),
            arr(ia_s, dtype=np.int64),
            arr(ia_sp, dtype=float).reshape(-1, 2),
            arr(ib_e, dtype=np.int64),
            arr(ib_s, dtype=np.int64),
            arr(ib_sp, dtype=float).reshape(-1, 2),
            arr(i_n, dtype=float).reshape(-1, 2),
            arr(i_len, dtype=float),
            arr(b_e, dtype=np.int64),
            arr(b_s, dtype=np.int64),
            arr(b_k, dtype=np.int64),
            arr(b_n, dtype=float).reshape(-1, 2),
            arr(b_len, dtype=float),
        )

    # ---------------------------------------------------------------- vertices

    @cached_property
    def _corner_ints(self) -> np.ndarray:
        """Integer corner coordinates at the finest level, ``(ne, 4, 2)``."""
        s = np.left_shift(1, self.max_level - self.level)
        i0, j0 = self.ix * s, self.iy * s
        i1, j1 = i0 + s, j0 + s
        return np.stack(
            [np.column_stack([i0, j0]), np.column_stack([i1, j0]),
             np.column_stack([i1, j1]), np.column_stack([i0, j1])],
            axis=1,
        )

    @cached_property
    def _vertex_data(self):
        flat = self._corner_ints.reshape(-1, 2)
        uniq, inv = np.unique(flat, axis=0, return_inverse=True)
        return uniq, inv.reshape(-1, 4)

    @property
    def vertices(self) -> np.ndarray:
        uniq, _ = self._vertex_data
        x0, _, y0, _ = self.domain
        hx0, hy0 = self.base_size
        scale = 2.0 ** -self.max_level
        return np.column_stack([x0 + uniq[:, 0] * hx0 * scale, y0 + uniq[:, 1] * hy0 * scale])

    @property
    def element_vertices(self) -> np.ndarray:
        return self._vertex_data[1]

    def element(self, e: int) -> Element:
        L, i, j = self.keys[e]
        return Element(
            index=e,
            key=(L, i, j),
            degree=int(self.degree[e]),
            vertex_ids=tuple(int(v) for v in self.element_vertices[e]),
            bounds=tuple(float(v) for v in self.bounds[e]),
            parent=(L - 1, i >> 1, j >> 1) if L > 0 else None,
            boundary=tuple(self.side_kind(e, s) for s in range(4)),
        )

    @property
    def elements(self) -> list[Element]:
        return [self.element(e) for e in range(self.n_elements)]

    @cached_property
    def edges(self) -> list[Edge]:
        f = self.facets
        ev = self.element_vertices
        side_verts = ((0, 1), (1, 2), (3, 2), (0, 3))
        out = []
        verts = self.vertices
        for k in range(len(f.ia_elem)):
            # endpoints come from the finer of the two sides
            e, s = (f.ia_elem[k], f.ia_side[k])
            if np.any(f.ia_span[k] != (-1.0, 1.0)):
                e, s = f.ib_elem[k], f.ib_side[k]
            v0, v1 = (int(ev[e, c]) for c in side_verts[s])
            out.append(Edge((v0, v1), "interior", (int(f.ia_elem[k]), int(f.ib_elem[k])),
                            tuple(f.i_normal[k]), float(f.i_length[k])))
        for k in range(len(f.b_elem)):
            e, s = f.b_elem[k], f.b_side[k]
            v0, v1 = (int(ev[e, c]) for c in side_verts[s])
            kind = "dirichlet" if f.b_kind[k] == 0 else "neumann"
            out.append(Edge((v0, v1), kind, (int(e),), tuple(f.b_normal[k]), float(f.b_length[k])))
        assert np.allclose([np.linalg.norm(verts[a] - verts[b]) for a, b in (x.vertex_ids for x in out)],
                           [x.length for x in out])
        return out

    # ------------------------------------------------------------- checks

    def hanging_counts(self) -> np.ndarray:
        """Number of hanging nodes on each element side (max over sides)."""
        return np.array([max(len(n) for n in row) for row in self.neighbor_table])

    def is_one_irregular(self) -> bool:
        for e, row in enumerate(self.neighbor_table):
            for nbrs in row:
                for nb, _ in nbrs:
                    if abs(int(self.level[nb]) - int(self.level[e])) > 1:
                        return False
        return True

    def max_degree_gap(self) -> int:
        gap = 0
        for e, row in enumerate(self.neighbor_table):
            for nbrs in row:
                for nb, _ in nbrs:
                    gap = max(gap, abs(int(self.degree[nb]) - int(self.degree[e])))
        return gap

    # ------------------------------------------------------------- locating

    def locate(self, pts, tol: float = 1e-10) -> np.ndarray:
        """Element index containing each point (hierarchy descent)."""
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        x0, x1, y0, y1 = self.domain
        outside = (
            (pts[:, 0] < x0 - tol) | (pts[:, 0] > x1 + tol)
            | (pts[:, 1] < y0 - tol) | (pts[:, 1] > y1 + tol)
        )
        if np.any(outside):
            raise ValueError(f"{int(outside.sum())} point(s) outside the mesh")
        hx0, hy0 = self.base_size
        codes = self._codes
        order = np.argsort(codes)
        sorted_codes = codes[order]
        result = np.full(len(pts), -1, dtype=np.int64)
        for L in range(self.max_level + 1):
            todo = result < 0
            if not np.any(todo):
                break
            nxl, nyl = self.nx << L, self.ny << L
            i = np.clip(np.floor((pts[todo, 0] - x0) / hx0 * 2**L), 0, nxl - 1).astype(np.int64)
            j = np.clip(np.floor((pts[todo, 1] - y0) / hy0 * 2**L), 0, nyl - 1).astype(np.int64)
            c = self._encode(np.full_like(i, L), i, j)
            pos = np.searchsorted(sorted_codes, c)
            pos = np.minimum(pos, len(sorted_codes) - 1)
            hit = sorted_codes[pos] == c
            idx = np.where(todo)[0]
            result[idx[hit]] = order[pos[hit]]
        if np.any(result < 0):
            raise ValueError("point location failed")
        return result

    def _encode(self, L, i, j):
        big = np.int64(1) << 26
        return (np.asarray(L, dtype=np.int64) * big + np.asarray(j, dtype=np.int64)) * big + np.asarray(i, dtype=np.int64)

    @cached_property
    def _codes(self) -> np.ndarray:
        return self._encode(self.level, self.ix, self.iy)

    def ancestor_in(self, other: QuadMesh) -> np.ndarray:
        """For each element of ``self``, the element of ``other`` containing it.

        ``other`` must be a coarsening of ``self`` (same root grid).
        """
        out = np.full(self.n_elements, -1, dtype=np.int64)
        codes = other._codes
        order = np.argsort(codes)
        sc = codes[order]
        for k in range(self.max_level + 1):
            todo = (out < 0) & (self.level >= k)
            if not np.any(todo):
                continue
            c = self._encode(self.level[todo] - k, self.ix[todo] >> k, self.iy[todo] >> k)
            pos = np.minimum(np.searchsorted(sc, c), len(sc) - 1)
            hit = sc[pos] == c
            idx = np.where(todo)[0]
            out[idx[hit]] = order[pos[hit]]
        if np.any(out < 0):
            raise ValueError("meshes are not nested")
        return out

    # ------------------------------------------------------------- export

    def export_text(self) -> str:
        v = self.vertices
        ev = self.element_vertices
        lines = [f"{len(v)} {self.n_elements}"]
        lines += [f"{x:.17g} {y:.17g}" for x, y in v]
        lines += [f"{a} {b} {c} {d} {p}" for (a, b, c, d), p in zip(ev.tolist(), self.degree.tolist())]
        return "\n".join(lines) + "\n"

    def write(self, path) -> None:
        with open(path, "w") as fh:
            fh.write(self.export_text())

    def with_degrees(self, degrees) -> QuadMesh:
        return QuadMesh(self.domain, self.nx, self.ny, self.level, self.ix, self.iy, degrees,
                        self.dirichlet_sides, self.generation + 1)


def read_mesh_text(text: str) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Parse the export format into ``(vertices, element_vertices, degrees)``."""
    rows = [ln.split() for ln in text.strip().splitlines()]
    nv, ne = int(rows[0][0]), int(rows[0][1])
    verts = np.array([[float(a), float(b)] for a, b in rows[1:1 + nv]])
    el = np.array([[int(x) for x in r] for r in rows[1 + nv:1 + nv + ne]], dtype=np.int64)
    return verts, el[:, :4], el[:, 4]


def build_rectangle_mesh(domain=(-1.0, 1.0, -1.0, 1.0), nx: int = 1, ny: int = 1, p: int = 1,
                         dirichlet_sides=("bottom",)) -> QuadMesh:
    if nx < 1 or ny < 1:
        raise ValueError("nx, ny must be >= 1")
    if p < 1:
        raise ValueError("p must be >= 1")
    jj, ii = np.divmod(np.arange(nx * ny), nx)
    return QuadMesh(domain, nx, ny, np.zeros(nx * ny, dtype=np.int64), ii, jj,
                    np.full(nx * ny, p), dirichlet_sides)


def _children(key):
    L, i, j = key
    return [(L + 1, 2 * i, 2 * j), (L + 1, 2 * i + 1, 2 * j),
            (L + 1, 2 * i, 2 * j + 1), (L + 1, 2 * i + 1, 2 * j + 1)]


def refine(mesh: QuadMesh, marked) -> QuadMesh:
    """Split marked elements into four children and close the mesh."""
    marked = sorted({int(e) for e in marked})
    if any(e < 0 or e >= mesh.n_elements for e in marked):
        raise IndexError("marked element id out of range")
    leaves = dict(zip(mesh.keys, mesh.degree.tolist()))
    split: set = set()
    queue = []
    for e in marked:
        key = mesh.keys[e]
        split.add(key)
        queue.extend(_children(key))

    def leaf_covering(L, i, j):
        if i < 0 or j < 0 or i >= (mesh.nx << L) or j >= (mesh.ny << L):
            return None
        for k in range(L + 1):
            key = (L - k, i >> k, j >> k)
            if key in split:
                return None  # region already refined at least to this key's children
            if key in leaves:
                return key
        return None

    while queue:
        L, i, j = queue.pop()
        for di, dj in SIDE_OFFSETS:
            nk = leaf_covering(L, i + di, j + dj)
            if nk is not None and nk[0] < L - 1 and nk not in split:
                split.add(nk)
                queue.extend(_children(nk))

    levels, ii, jj, degs = [], [], [], []

    def emit(key, p):
        if key in split:
            for c in _children(key):
                emit(c, p)
        else:
            levels.append(key[0])
            ii.append(key[1])
            jj.append(key[2])
            degs.append(p)

    for key, p in zip(mesh.keys, mesh.degree.tolist()):
        emit(key, p)
    new = QuadMesh(mesh.domain, mesh.nx, mesh.ny, levels, ii, jj, degs,
                   mesh.dirichlet_sides, mesh.generation + 1)
    return enforce_degree_comparability(new)


def enforce_degree_comparability(mesh: QuadMesh, max_gap: int = 1) -> QuadMesh:
    deg = mesh.degree.copy()
    table = mesh.neighbor_table
    changed = True
    touched = False
    while changed:
        changed = False
        for e, row in enumerate(table):
            for nbrs in row:
                for nb, _ in nbrs:
                    if deg[nb] - deg[e] > max_gap:
                        deg[e] = deg[nb] - max_gap
                        changed = touched = True
    if not touched:
        return mesh
    new = QuadMesh(mesh.domain, mesh.nx, mesh.ny, mesh.level, mesh.ix, mesh.iy, deg,
                   mesh.dirichlet_sides, mesh.generation)
    new.__dict__["neighbor_table"] = table
    return new


def p_refine(mesh: QuadMesh, marked) -> QuadMesh:
    """Raise the degree of marked elements by one and restore comparability."""
    deg = mesh.degree.copy()
    for e in {int(e) for e in marked}:
        if e < 0 or e >= mesh.n_elements:
            raise IndexError("marked element id out of range")
        deg[e] += 1
    new = QuadMesh(mesh.domain, mesh.nx, mesh.ny, mesh.level, mesh.ix, mesh.iy, deg,
                   mesh.dirichlet_sides, mesh.generation + 1)
    new.__dict__["neighbor_table"] = mesh.neighbor_table
    return enforce_degree_comparability(new)


def uniform_overkill(mesh: QuadMesh) -> QuadMesh:
    """Halve every element and raise every degree by one."""
    fine = refine(mesh, range(mesh.n_elements))
    return fine.with_degrees(fine.degree + 1)
