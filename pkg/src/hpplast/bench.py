"""Benchmark campaigns: configuration, overkill reference errors, rates and CSV output."""

from __future__ import annotations

import csv
import dataclasses
import logging
import math
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .adaptivity import MODES, AdaptConfig, LevelRecord, Problem, drive, prolongate
from .assembly import LoadData, Spaces, assemble
from .mesh import SIDE_NAMES, QuadMesh, build_rectangle_mesh, uniform_overkill
from .quadrature import gauss_rule, tensor_points, tensor_weights
from .solver import MixedSolution, SolverConfig, solve_mixed
from .spaces import evaluate_displacement, evaluate_strain
from .tensor_core import DEV_WEIGHT, Material

log = logging.getLogger(__name__)

CSV_COLUMNS = ("level", "dof", "e_u", "e_p", "e_lambda", "eta_total", "eta_res",
               "dev_part", "E_part", "osc", "efficiency_index")
OVERKILL_MODES = ("final", "per-level", "off")


# ---------------------------------------------------------------------------
# load library


def _bump_traction(x, y, top=1.0):
    """``(0, -400 min(0, x^2 - 1/4)^2)`` on the top edge, zero elsewhere."""
    on_top = y >= top - 1e-12
    return np.zeros_like(x), np.where(on_top, -400.0 * np.minimum(0.0, x * x - 0.25) ** 2, 0.0)


def load_from_id(name: str, scale: float = 1.0) -> LoadData:
    if name == "benchmark":
        return LoadData(g=_bump_traction, kinks_x=(-0.5, 0.5), scale=scale)
    if name == "none":
        return LoadData(scale=scale)
    raise ValueError(f"unknown load id {name!r}")


LOAD_IDS = ("benchmark", "none")


# ---------------------------------------------------------------------------
# configuration


@dataclass
class ExperimentConfig:
    domain: tuple = (-1.0, 1.0, -1.0, 1.0)
    nx: int = 2
    ny: int = 2
    dirichlet: tuple = ("bottom",)
    lame_lambda: float = 1000.0
    lame_mu: float = 1000.0
    hardening: float = 500.0
    sigma_y: float = 5.0
    load: str = "benchmark"
    load_scale: float = 1.0
    mode: str = "h-uniform"
    p: int = 1
    theta: float = 0.5
    levels: int = 6
    dof_budget: int = 300_000
    p_max: int = 8
    hp_threshold: float = 0.5
    newton_tol: float = 1e-10
    overkill: str = "final"
    out: str = "results/benchmark.csv"
    mesh_dir: str = ""
    dump_estimator: bool = False
    verbose: bool = False

    def __post_init__(self):
        self.domain = tuple(float(v) for v in self.domain)
        self.dirichlet = tuple(self.dirichlet)
        if len(self.domain) != 4 or self.domain[1] <= self.domain[0] or self.domain[3] <= self.domain[2]:
            raise ValueError(f"invalid domain {self.domain}")
        if min(self.lame_mu, self.hardening, self.sigma_y) <= 0 or self.lame_lambda < 0:
            raise ValueError("material constants must be positive")
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}, got {self.mode!r}")
        if self.overkill not in OVERKILL_MODES:
            raise ValueError(f"overkill must be one of {OVERKILL_MODES}")
        if self.load not in LOAD_IDS:
            raise ValueError(f"load must be one of {LOAD_IDS}")
        if not set(self.dirichlet) <= set(SIDE_NAMES) or not self.dirichlet:
            raise ValueError(f"dirichlet sides must be a nonempty subset of {SIDE_NAMES}")
        if self.p < 1 or self.nx < 1 or self.ny < 1 or self.levels < 1:
            raise ValueError("p, nx, ny and levels must be >= 1")
        self.adapt_config()  # validates theta, p_max, budget

    def material(self) -> Material:
        return Material(self.lame_lambda, self.lame_mu, self.hardening, self.sigma_y)

    def load_data(self) -> LoadData:
        return load_from_id(self.load, self.load_scale)

    def initial_mesh(self) -> QuadMesh:
        return build_rectangle_mesh(self.domain, self.nx, self.ny, self.p, self.dirichlet)

    def problem(self) -> Problem:
        return Problem(self.initial_mesh(), self.material(), self.load_data())

    def adapt_config(self) -> AdaptConfig:
        return AdaptConfig(theta=self.theta, mode=self.mode, p_max=self.p_max,
                           hp_decay_threshold=self.hp_threshold, max_levels=self.levels,
                           dof_budget=self.dof_budget)

    def solver_config(self) -> SolverConfig:
        return SolverConfig(newton_tol=self.newton_tol, verbose=self.verbose)

    def replace(self, **changes) -> ExperimentConfig:
        changes = {k: v for k, v in changes.items() if v is not None}
        return dataclasses.replace(self, **changes)


def _convert(name: str, default, raw: str):
    if isinstance(default, bool):
        low = raw.lower()
        if low not in ("true", "false", "1", "0", "yes", "no"):
            raise ValueError(f"{name}: expected a boolean, got {raw!r}")
        return low in ("true", "1", "yes")
    if isinstance(default, tuple):
        items = [s.strip() for s in raw.split(",") if s.strip()]
        return tuple(float(s) for s in items) if name == "domain" else tuple(items)
    if isinstance(default, int):
        return int(float(raw)) if "e" in raw.lower() else int(raw)
    if isinstance(default, float):
        return float(raw)
    return raw


def parse_config(text: str, **overrides) -> ExperimentConfig:
    """Parse ``key = value`` lines; ``#`` starts a comment."""
    defaults = ExperimentConfig()
    known = {f.name for f in dataclasses.fields(ExperimentConfig)}
    values = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"line {lineno}: expected key = value")
        key, raw = (s.strip() for s in line.split("=", 1))
        key = key.replace("-", "_")
        if key not in known:
            raise ValueError(f"line {lineno}: unknown key {key!r}")
        try:
            values[key] = _convert(key, getattr(defaults, key), raw)
        except ValueError as exc:
            raise ValueError(f"line {lineno}: {exc}") from None
    values.update({k: v for k, v in overrides.items() if v is not None})
    return ExperimentConfig(**values)


def load_config(path, **overrides) -> ExperimentConfig:
    return parse_config(Path(path).read_text(), **overrides)


# ---------------------------------------------------------------------------
# rows and rates


@dataclass
class ConvergenceRow:
    level: int
    dof: int
    e_u: float = math.nan
    e_p: float = math.nan
    e_lambda: float = math.nan
    eta_total: float = math.nan
    eta_res: float = math.nan
    dev_part: float = math.nan
    E_part: float = math.nan
    osc: float = math.nan
    efficiency_index: float = math.nan

    @property
    def total_error(self) -> float:
        return math.sqrt(self.e_u ** 2 + self.e_p ** 2 + self.e_lambda ** 2)

    def set_errors(self, e_u: float, e_p: float, e_lambda: float) -> None:
        self.e_u, self.e_p, self.e_lambda = e_u, e_p, e_lambda
        err = self.total_error
        self.efficiency_index = self.eta_total / err if err > 0 else math.nan

    def as_list(self) -> list[str]:
        out = []
        for name in CSV_COLUMNS:
            v = getattr(self, name)
            out.append(str(v) if isinstance(v, int) else repr(float(v)))
        return out


def row_from_record(rec: LevelRecord) -> ConvergenceRow:
    t = rec.report.totals
    root = lambda v: math.sqrt(max(v, 0.0))  # E_T may be -1e-18 from roundoff
    return ConvergenceRow(
        level=rec.level, dof=rec.dof,
        eta_total=root(t["eta_sq"]), eta_res=root(t["eta_residual_sq"]),
        dev_part=root(t["dev_mismatch_sq"]), E_part=root(t["E_T"]), osc=root(t["osc_sq"]),
    )


def fit_rate(rows, column: str, window: int) -> float:
    """Least-squares slope of ``log(column)`` against ``log(dof)`` over the last rows."""
    if window < 2 or len(rows) < window:
        raise ValueError(f"need at least {max(window, 2)} rows, got {len(rows)}")
    sel = rows[-window:]
    dof = np.array([r.dof for r in sel], dtype=float)
    val = np.array([getattr(r, column) for r in sel], dtype=float)
    if np.any(~(val > 0)) or np.any(dof <= 0):
        raise ValueError(f"column {column!r} must be positive for a log-log fit")
    return float(np.polyfit(np.log(dof), np.log(val), 1)[0])


def write_csv(rows, path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CSV_COLUMNS)
        for r in rows:
            w.writerow(r.as_list())


def read_csv(path) -> list[ConvergenceRow]:
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if tuple(reader.fieldnames or ()) != CSV_COLUMNS:
            raise ValueError(f"unexpected header {reader.fieldnames}")
        return [ConvergenceRow(int(d["level"]), int(d["dof"]),
                               *(float(d[c]) for c in CSV_COLUMNS[2:])) for d in reader]


# ---------------------------------------------------------------------------
# overkill reference and errors


def evaluate_solution_at(points, mesh: QuadMesh, spaces: Spaces, solution: MixedSolution):
    """``(u, grad u, p, lambda)`` of a discrete solution at physical points."""
    points = np.atleast_2d(np.asarray(points, dtype=float))
    elems = mesh.locate(points)
    ref = np.clip(mesh.to_reference(elems, points), -1.0, 1.0)
    fv = evaluate_displacement(spaces.V, solution.u, elems, ref)
    p = evaluate_strain(spaces.Q, solution.p, elems, ref)
    lam = evaluate_strain(spaces.Q, solution.lam, elems, ref)
    return fv.value, fv.grad, p, lam


@dataclass
class Reference:
    mesh: QuadMesh
    spaces: Spaces
    solution: MixedSolution
    seconds: float = 0.0


def overkill_reference(mesh: QuadMesh, material: Material, load: LoadData,
                       solver_cfg: SolverConfig | None = None, guess: tuple | None = None) -> Reference:
    """Solve on the mesh with every element halved and every degree raised by one.

    ``guess = (spaces, u)`` of a coarser solution seeds Newton.
    """
    t0 = time.perf_counter()
    fine = uniform_overkill(mesh)
    spaces = Spaces.build(fine, material)
    system = assemble(fine, material, spaces, load)
    u0 = prolongate(guess[0].V, guess[1], spaces.V) if guess is not None else None
    sol = solve_mixed(system, solver_cfg or SolverConfig(), u0)
    return Reference(fine, spaces, sol, time.perf_counter() - t0)


def _sym_sq(grad: np.ndarray) -> np.ndarray:
    """``|sym(grad)|_F^2`` for ``grad[m, c, d]``."""
    exy = 0.5 * (grad[:, 0, 1] + grad[:, 1, 0])
    return grad[:, 0, 0] ** 2 + grad[:, 1, 1] ** 2 + 2.0 * exy ** 2


class ErrorEvaluator:
    """Errors of coarse solutions against a fixed reference.

    Reference values are tabulated once at Gauss points of the fine mesh
    (``p + 1`` per direction, exact for the polynomial differences); coarse
    fields are evaluated through the ancestor element and its inverse map.
    """

    def __init__(self, ref: Reference, chunk: int = 100_000):
        self.ref = ref
        mesh, sp_ = ref.mesh, ref.spaces
        full = sp_.V.expand(ref.solution.u)
        blocks = []
        for p in np.unique(mesh.degree).tolist():
            elems_p = np.where(mesh.degree == p)[0]
            rule = gauss_rule(p + 1)
            rp = tensor_points(rule.points)
            wp = tensor_weights(rule.weights)
            per = max(1, chunk // len(wp))
            for s in range(0, len(elems_p), per):
                elems = elems_p[s:s + per]
                E = np.repeat(elems, len(wp))
                R = np.tile(rp, (len(elems), 1))
                W = (wp[None, :] * mesh.jac_det[elems][:, None]).ravel()
                b = mesh.bounds[E]
                X = np.column_stack([b[:, 0] + 0.5 * (R[:, 0] + 1.0) * (b[:, 1] - b[:, 0]),
                                     b[:, 2] + 0.5 * (R[:, 1] + 1.0) * (b[:, 3] - b[:, 2])])
                fv = evaluate_displacement(sp_.V, None, E, R, full=full)
                blocks.append(dict(
                    E=E, X=X, W=W, u=fv.value, grad=fv.grad,
                    p=evaluate_strain(sp_.Q, ref.solution.p, E, R),
                    lam=evaluate_strain(sp_.Q, ref.solution.lam, E, R),
                ))
        self.blocks = blocks

    def errors(self, mesh: QuadMesh, spaces: Spaces, solution: MixedSolution) -> tuple[float, float, float]:
        """``(e_u, e_p, e_lambda)``; ``e_u`` is the full H1 norm (L2 plus strain part)."""
        anc = self.ref.mesh.ancestor_in(mesh)
        full = spaces.V.expand(solution.u)
        su, sp_, sl = [], [], []
        for blk in self.blocks:
            Ec = anc[blk["E"]]
            Rc = np.clip(mesh.to_reference(Ec, blk["X"]), -1.0, 1.0)
            fv = evaluate_displacement(spaces.V, None, Ec, Rc, full=full)
            du = blk["u"] - fv.value
            dg = blk["grad"] - fv.grad
            dp = blk["p"] - evaluate_strain(spaces.Q, solution.p, Ec, Rc)
            dl = blk["lam"] - evaluate_strain(spaces.Q, solution.lam, Ec, Rc)
            W = blk["W"]
            su.append(float(W @ (np.sum(du * du, axis=1) + _sym_sq(dg))))
            sp_.append(float(W @ (DEV_WEIGHT * np.sum(dp * dp, axis=1))))
            sl.append(float(W @ (DEV_WEIGHT * np.sum(dl * dl, axis=1))))
        return tuple(math.sqrt(max(math.fsum(s), 0.0)) for s in (su, sp_, sl))


# ---------------------------------------------------------------------------
# campaign


@dataclass
class CampaignResult:
    config: ExperimentConfig
    rows: list
    records: list
    reference: Reference | None = None
    errors_available: bool = False
    files: list = field(default_factory=list)


def _mesh_dir(cfg: ExperimentConfig) -> Path:
    if cfg.mesh_dir:
        return Path(cfg.mesh_dir)
    out = Path(cfg.out)
    return out.with_name(out.stem + "_meshes")


def compute_rows(cfg: ExperimentConfig) -> CampaignResult:
    """Run the refinement loop and fill in errors according to ``cfg.overkill``."""
    problem = cfg.problem()
    solver_cfg = cfg.solver_config()
    records = drive(problem, cfg.adapt_config(), solver_cfg)
    if not records:
        raise RuntimeError("no level could be solved")
    rows = [row_from_record(r) for r in records]
    res = CampaignResult(cfg, rows, records)
    if cfg.overkill == "off":
        return res
    try:
        if cfg.overkill == "final":
            last = records[-1]
            ref = overkill_reference(last.mesh, problem.material, problem.load, solver_cfg,
                                     (last.spaces, last.solution.u))
            log.info("overkill reference: %d elements, %.1f s", ref.mesh.n_elements, ref.seconds)
            ev = ErrorEvaluator(ref)
            for row, rec in zip(rows, records):
                row.set_errors(*ev.errors(rec.mesh, rec.spaces, rec.solution))
            res.reference = ref
        else:
            for row, rec in zip(rows, records):
                ref = overkill_reference(rec.mesh, problem.material, problem.load, solver_cfg,
                                         (rec.spaces, rec.solution.u))
                row.set_errors(*ErrorEvaluator(ref).errors(rec.mesh, rec.spaces, rec.solution))
        res.errors_available = True
    except Exception as exc:  # rows stay without errors (NaN columns)
        log.error("overkill reference failed (%s); error columns left empty", exc)
        for row in rows:
            row.e_u = row.e_p = row.e_lambda = row.efficiency_index = math.nan
    return res


def run(cfg: ExperimentConfig) -> CampaignResult:
    """Full campaign: CSV, per-level mesh exports and optional estimator dumps."""
    res = compute_rows(cfg)
    write_csv(res.rows, cfg.out)
    res.files.append(Path(cfg.out))
    mdir = _mesh_dir(cfg)
    mdir.mkdir(parents=True, exist_ok=True)
    for rec in res.records:
        path = mdir / f"level_{rec.level:02d}.mesh"
        rec.mesh.write(path)
        res.files.append(path)
        if cfg.dump_estimator:
            dpath = mdir / f"level_{rec.level:02d}.eta"
            dpath.write_text(rec.report.dump())
            res.files.append(dpath)
    if not res.errors_available and cfg.overkill != "off":
        log.warning("error columns unavailable (NaN) in %s", cfg.out)
    return res
