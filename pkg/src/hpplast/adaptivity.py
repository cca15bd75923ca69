"""Dörfler marking, h/p decisions and the adaptive solve-estimate-refine loop."""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field

import numpy as np
from numpy.polynomial import legendre as npleg

from .assembly import LoadData, Spaces, assemble
from .estimator import EstimatorReport, estimate
from .mesh import QuadMesh, p_refine, refine
from .quadrature import lobatto_points
from .solver import MixedSolution, SolverConfig, solve_mixed
from .spaces import DisplacementSpace, evaluate_at_points
from .tensor_core import Material

log = logging.getLogger(__name__)

MODES = ("h-uniform", "p-uniform", "h-adaptive", "hp-adaptive")


@dataclass
class AdaptConfig:
    theta: float = 0.5
    mode: str = "h-adaptive"
    p_max: int = 8
    hp_decay_threshold: float = 0.5
    max_levels: int = 10
    dof_budget: int = 300_000

    def __post_init__(self):
        if not 0.0 < self.theta <= 1.0:
            raise ValueError(f"theta must lie in (0, 1], got {self.theta}")
        if self.p_max < 1:
            raise ValueError("p_max must be >= 1")
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}, got {self.mode!r}")
        if self.max_levels < 1 or self.dof_budget < 1:
            raise ValueError("max_levels and dof_budget must be positive")


@dataclass
class Problem:
    mesh: QuadMesh
    material: Material
    load: LoadData


@dataclass
class LevelRecord:
    level: int
    mesh: QuadMesh
    spaces: Spaces
    solution: MixedSolution
    report: EstimatorReport
    dof: int
    marked: list = field(default_factory=list)  # element keys
    decisions: dict = field(default_factory=dict)  # key -> "h" | "p"
    seconds: float = 0.0


def count_dofs(spaces: Spaces) -> int:
    """Displacement DOFs plus the two components of every strain coefficient."""
    return int(spaces.V.n_dofs + 2 * spaces.Q.N)


# ---------------------------------------------------------------------------
# marking


def doerfler_mark(estimates, theta: float, keys=None) -> list[int]:
    """Greedy bulk marking; ties are broken by element key (or id)."""
    eta = np.asarray(estimates, dtype=float)
    if np.any(eta < 0):
        raise ValueError("estimates must be non-negative")
    if not 0.0 < theta <= 1.0:
        raise ValueError("theta must lie in (0, 1]")
    if eta.size == 0 or not np.any(eta > 0):
        return []
    tie = list(keys) if keys is not None else list(range(len(eta)))
    order = sorted(range(len(eta)), key=lambda e: (-eta[e], tie[e]))
    csum = np.cumsum(eta[order])
    k = int(np.searchsorted(csum, theta * csum[-1], side="left")) + 1
    return sorted(order[:min(k, len(order))])


# ---------------------------------------------------------------------------
# h/p decision


def legendre_coefficients(values: np.ndarray, p: int) -> np.ndarray:
    """Tensor Legendre coefficients ``[..., y degree, x degree]`` of nodal values."""
    vinv = np.linalg.inv(npleg.legvander(lobatto_points(p), p))
    vals = values.reshape(*values.shape[:-1], p + 1, p + 1)  # (.., b, a)
    return np.einsum("jb,...ba,ia->...ji", vinv, vals, vinv)


def decay_ratio(values: np.ndarray, p: int) -> float:
    """Ratio of the top Legendre block norm to the next one.

    ``values`` holds nodal coefficients ``(components, (p+1)^2)``. Blocks are
    ``{max(i, j) = k}``; for ``p = 1`` the bilinear mode is compared with the
    two linear modes.
    """
    c = legendre_coefficients(np.atleast_2d(values), p)  # (comp, j, i)
    i = np.arange(p + 1)
    w = (2.0 / (2 * i + 1))[None, :] * (2.0 / (2 * i + 1))[:, None]
    energy = np.sum(c * c, axis=0) * w
    kmax = np.maximum(i[None, :], i[:, None])
    if p == 1:
        top = energy[1, 1]
        nxt = energy[0, 1] + energy[1, 0]
    else:
        top = energy[kmax == p].sum()
        nxt = energy[kmax == p - 1].sum()
    if nxt <= 0.0:
        return 0.0 if top <= 0.0 else np.inf
    return float(np.sqrt(top / nxt))


def hp_decide(space: DisplacementSpace, u: np.ndarray, e: int, p_max: int = 8,
              threshold: float = 0.5, full=None) -> str:
    """``"p"`` where the local Legendre coefficients decay fast, else ``"h"``."""
    p = int(space.mesh.degree[e])
    if p >= p_max:
        return "h"
    full = space.expand(u) if full is None else full
    vals = full[:, space.elem_nodes[e]]
    return "p" if decay_ratio(vals, p) <= threshold else "h"


# ---------------------------------------------------------------------------
# driver


def prolongate(space_old: DisplacementSpace, u_old: np.ndarray, space_new: DisplacementSpace) -> np.ndarray:
    """Nodal interpolation of a coarse discrete field into a nested space."""
    pos = space_new.node_positions[space_new.free_nodes]
    vals = evaluate_at_points(space_old, u_old, pos)
    return np.concatenate([vals[:, 0], vals[:, 1]])


def next_mesh(mesh: QuadMesh, report: EstimatorReport, cfg: AdaptConfig, spaces: Spaces,
              u: np.ndarray):
    """Refined mesh, marked keys and per-key decisions."""
    n = mesh.n_elements
    if cfg.mode == "h-uniform":
        return refine(mesh, range(n)), list(mesh.keys), {}
    if cfg.mode == "p-uniform":
        return p_refine(mesh, range(n)), list(mesh.keys), {}
    marked = doerfler_mark(report.eta_sq, cfg.theta, mesh.keys)
    keys = [mesh.keys[e] for e in marked]
    if cfg.mode == "h-adaptive":
        return refine(mesh, marked), keys, {}
    full = spaces.V.expand(u)
    decisions = {}
    p_set, h_set = [], []
    for e in marked:
        d = hp_decide(spaces.V, u, e, cfg.p_max, cfg.hp_decay_threshold, full)
        decisions[mesh.keys[e]] = d
        (p_set if d == "p" else h_set).append(e)
    new = p_refine(mesh, p_set) if p_set else mesh
    new = refine(new, h_set) if h_set else new
    return new, keys, decisions


def drive(problem: Problem, cfg: AdaptConfig, solver_cfg: SolverConfig | None = None,
          keep_systems: bool = False) -> list[LevelRecord]:
    """Solve, estimate, mark and refine until ``max_levels`` or the DOF budget."""
    solver_cfg = solver_cfg or SolverConfig()
    records: list[LevelRecord] = []
    mesh = problem.mesh
    spaces = Spaces.build(mesh, problem.material)
    prev = None
    for level in range(cfg.max_levels):
        t0 = time.perf_counter()
        system = assemble(mesh, problem.material, spaces, problem.load)
        u0 = None
        if prev is not None:
            u0 = prolongate(prev.spaces.V, prev.solution.u, spaces.V)
        try:
            sol = solve_mixed(system, solver_cfg, u0)
        except Exception:
            log.error("solver failed on level %d; returning partial records", level)
            break
        rep = estimate(system, sol, problem.load)
        rec = LevelRecord(level, mesh, spaces, sol, rep, count_dofs(spaces))
        if keep_systems:
            rec.system = system
        records.append(rec)
        log.info("level %d dof %d eta %.6e path %s its %d", level, rec.dof,
                 np.sqrt(max(rep.totals["eta_sq"], 0.0)), sol.path, sol.iterations)
        if level + 1 == cfg.max_levels:
            rec.seconds = time.perf_counter() - t0
            break
        new_mesh, keys, decisions = next_mesh(mesh, rep, cfg, spaces, sol.u)
        rec.marked, rec.decisions = keys, decisions
        if not keys:
            rec.seconds = time.perf_counter() - t0
            break
        new_spaces = Spaces.build(new_mesh, problem.material)
        rec.seconds = time.perf_counter() - t0
        if count_dofs(new_spaces) > cfg.dof_budget:
            break
        prev, mesh, spaces = rec, new_mesh, new_spaces
    return records
