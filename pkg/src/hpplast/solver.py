"""Nonlinear and auxiliary solves for the discrete mixed problem.

Because the strain block is diagonal, the plastic strain can be eliminated
coefficient by coefficient through the closed-form return map. What remains is
a convex, piecewise smooth energy in the displacement alone::

    E(u) = 1/2 u^T K u - l^T u - sum_k D_k (|t_k| - sigma_k)_+^2 / (2 (2 mu + h))

with trial stresses ``t = 2 mu G u``. It is minimized by semismooth Newton with
an Armijo line search; alternating minimization is the fallback.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .assembly import AssembledSystem
from .linalg import SPDFactor
from .quadrature import gauss_rule, strain_basis, tensor_points, tensor_weights
from .spaces import evaluate_displacement, evaluate_strain
from .tensor_core import DEV_WEIGHT, DevTensor2, dev_norm, stress_from_gradient

log = logging.getLogger(__name__)


class SolverError(RuntimeError):
    def __init__(self, msg: str, history=None):
        super().__init__(msg)
        self.history = history or []


@dataclass
class SolverConfig:
    newton_tol: float = 1e-10
    max_newton: int = 50
    c: float = 1.0
    fallback_max_fixed_point: int = 500
    verbose: bool = False
    method: str = "newton"  # "newton" or "alternating"

    def __post_init__(self):
        if self.newton_tol <= 0 or self.c <= 0:
            raise ValueError("tolerances and c must be positive")
        if self.max_newton < 1 or self.fallback_max_fixed_point < 1:
            raise ValueError("iteration limits must be >= 1")
        if self.method not in ("newton", "alternating"):
            raise ValueError(f"unknown method {self.method!r}")


@dataclass
class MixedSolution:
    u: np.ndarray
    p: np.ndarray  # (N, 2)
    lam: np.ndarray  # (N, 2)
    path: str = "newton"
    iterations: int = 0
    history: list = field(default_factory=list)

    @property
    def plastic(self) -> np.ndarray:
        return np.any(self.p != 0.0, axis=1)


# ---------------------------------------------------------------------------
# pointwise maps


def local_return_map(trial, sigma_i, two_mu_plus_h):
    """Minimizer of ``-t:p + (2mu+h)/2 |p|^2 + sigma |p|`` over deviators ``p``.

    Accepts a ``DevTensor2`` or ``(..., 2)`` arrays of trial stresses.
    """
    if isinstance(trial, DevTensor2):
        arr = local_return_map(trial.as_array(), sigma_i, two_mu_plus_h)
        return DevTensor2(float(arr[0]), float(arr[1]))
    t = np.asarray(trial, dtype=float)
    nrm = dev_norm(t)
    safe = np.where(nrm > 0, nrm, 1.0)
    factor = np.maximum(nrm - sigma_i, 0.0) / (two_mu_plus_h * safe)
    return factor[..., None] * t


def _return_map_derivative(t, sigma, k):
    """Blocks ``(d11, d12, d22)`` of ``dp/dt`` in ``(a, b)`` coordinates."""
    nrm = dev_norm(t)
    active = nrm > sigma
    safe = np.where(active, nrm, 1.0)
    c = np.where(active, (1.0 - sigma / safe) / k, 0.0)
    s = np.where(active, DEV_WEIGHT * sigma / (k * safe ** 3), 0.0)
    a, b = t[:, 0], t[:, 1]
    return c + s * a * a, s * a * b, c + s * b * b, active


def complementarity_violation(lam, p, sigma, c: float = 1.0) -> float:
    """Relative NCP residual ``max(sigma, |lam + c p|) lam - sigma (lam + c p)``."""
    z = lam + c * p
    phi = np.maximum(sigma, dev_norm(z))[:, None] * lam - sigma[:, None] * z
    feas = np.maximum(dev_norm(lam) - sigma, 0.0)
    return float(max(np.max(dev_norm(phi) / sigma ** 2, initial=0.0), np.max(feas / sigma, initial=0.0)))


# ---------------------------------------------------------------------------
# energy and residual of the reduced problem


class _Reduced:
    def __init__(self, system: AssembledSystem):
        self.S = system
        m = system.material
        self.mu = m.lame_mu
        self.k = m.two_mu_plus_h
        self.sigma = system.Q.sigma
        self.D = system.D
        self.N = system.Q.N
        self.load = system.load
        self.load_norm = float(np.linalg.norm(system.load))

    def trial(self, u):
        return 2.0 * self.mu * self.S.dev_strain(u)

    def strain_from_trial(self, t):
        return local_return_map(t, self.sigma, self.k)

    def energy(self, u, t=None):
        t = self.trial(u) if t is None else t
        excess = np.maximum(dev_norm(t) - self.sigma, 0.0)
        Ku = self.S.K @ u
        return 0.5 * float(u @ Ku) - float(self.load @ u) - math.fsum(self.D * excess ** 2) / (2.0 * self.k)

    def residual(self, u, p):
        Dp = (self.D[:, None] * p).T.ravel()
        return self.S.K @ u - self.load - 2.0 * DEV_WEIGHT * self.mu * (self.S.G.T @ Dp)

    def jacobian(self, t):
        d11, d12, d22, active = _return_map_derivative(t, self.sigma, self.k)
        idx = np.where(active)[0]
        if len(idx) == 0:
            return self.S.K
        rows = np.concatenate([idx, idx + self.N])
        Gs = self.S.G[rows]
        D = self.D[idx]
        M = sp.bmat(
            [[sp.diags(D * d11[idx]), sp.diags(D * d12[idx])],
             [sp.diags(D * d12[idx]), sp.diags(D * d22[idx])]],
            format="csr",
        )
        scale = 4.0 * DEV_WEIGHT * self.mu ** 2  # (2 mu) * weight * (2 mu)
        J = self.S.K - scale * (Gs.T @ M @ Gs)
        return ((J + J.T) * 0.5).tocsr()

    def multiplier(self, t, p):
        return t - self.k * p


def _log_line(it, res, comp, energy, verbose):
    line = f"{it} {res:.6e} {comp:.6e} {energy:.12e}"
    if verbose:
        log.info(line)
    return line


def solve_mixed(system: AssembledSystem, config: SolverConfig | None = None,
                u0: np.ndarray | None = None) -> MixedSolution:
    """Solve the discrete mixed problem; fall back to alternating minimization."""
    config = config or SolverConfig()
    R = _Reduced(system)
    history: list = []
    if R.load_norm == 0.0:
        N = system.Q.N
        return MixedSolution(np.zeros(system.V.n_dofs), np.zeros((N, 2)), np.zeros((N, 2)), "trivial", 0, history)
    if config.method == "newton":
        try:
            return _newton(R, config, u0, history)
        except _Stagnation as exc:
            log.warning("Newton stagnated (%s); switching to alternating minimization", exc)
    return _alternating(R, config, u0, history)


class _Stagnation(Exception):
    pass


def _newton(R: _Reduced, config: SolverConfig, u0, history) -> MixedSolution:
    tol = config.newton_tol * R.load_norm
    if u0 is None:
        fac = SPDFactor(R.S.K)
        u = fac.solve(R.load)
        fac.free()
    else:
        u = np.array(u0, dtype=float)
    t = R.trial(u)
    E = R.energy(u, t)
    for it in range(config.max_newton + 1):
        p = R.strain_from_trial(t)
        r = R.residual(u, p)
        rn = float(np.linalg.norm(r))
        lam = R.multiplier(t, p)
        comp = complementarity_violation(lam, p, R.sigma, config.c)
        history.append(_log_line(it, rn / R.load_norm, comp, E, config.verbose))
        if rn <= tol:
            return MixedSolution(u, p, lam, "newton", it, history)
        if it == config.max_newton:
            break
        fac = SPDFactor(R.jacobian(t))
        d = -fac.solve(r)
        fac.free()
        slope = float(r @ d)
        if slope >= 0:
            raise _Stagnation("non-descent direction")
        alpha = 1.0
        slack = 1e-13 * (abs(E) + abs(float(R.load @ u)))
        while True:
            un = u + alpha * d
            tn = R.trial(un)
            En = R.energy(un, tn)
            if En <= E + 1e-4 * alpha * slope + slack:
                break
            alpha *= 0.5
            if alpha < 1e-10:
                raise _Stagnation("line search failed")
        u, t, E = un, tn, En
    raise _Stagnation(f"no convergence in {config.max_newton} iterations")


def _alternating(R: _Reduced, config: SolverConfig, u0, history) -> MixedSolution:
    tol = config.newton_tol * R.load_norm
    fac = SPDFactor(R.S.K)
    GT = R.S.G.T.tocsr()
    coupling = 2.0 * DEV_WEIGHT * R.mu
    try:
        u = fac.solve(R.load) if u0 is None else np.array(u0, dtype=float)
        for it in range(config.fallback_max_fixed_point + 1):
            t = R.trial(u)
            p = R.strain_from_trial(t)
            r = R.residual(u, p)
            rn = float(np.linalg.norm(r))
            lam = R.multiplier(t, p)
            E = R.energy(u, t)
            comp = complementarity_violation(lam, p, R.sigma, config.c)
            history.append(_log_line(it, rn / R.load_norm, comp, E, config.verbose))
            if rn <= tol:
                return MixedSolution(u, p, lam, "alternating", it, history)
            Dp = (R.D[:, None] * p).T.ravel()
            u = fac.solve(R.load + coupling * (GT @ Dp))
    finally:
        fac.free()
    raise SolverError("alternating minimization did not converge", history)


# ---------------------------------------------------------------------------
# post-processing and auxiliary problem


def recover_lambda(system: AssembledSystem, u: np.ndarray, p: np.ndarray) -> np.ndarray:
    """Projection of ``dev(sigma(u, p) - H p)`` onto the strain space.

    Evaluates the fields through the generic point evaluators and projects by
    quadrature, independently of the operator used by the solver.
    """
    V, Q, mat = system.V, system.Q, system.material
    full = V.expand(u)
    mesh = system.mesh
    out = np.empty((Q.N, 2))
    for deg in np.unique(mesh.degree).tolist():
        elems = np.where(mesh.degree == deg)[0]
        rule = gauss_rule(deg + 1)
        ref = tensor_points(rule.points)
        w = tensor_weights(rule.weights)
        nq = len(w)
        E_ = np.repeat(elems, nq)
        R_ = np.tile(ref, (len(elems), 1))
        fv = evaluate_displacement(V, None, E_, R_, full=full)
        pv = evaluate_strain(Q, p, E_, R_)
        sig = stress_from_gradient(mat, fv.grad, pv)
        lam_pts = np.stack([0.5 * (sig[:, 0] - sig[:, 1]), sig[:, 2]], axis=-1) - mat.hardening * pv
        lam_pts = lam_pts.reshape(len(elems), nq, 2)
        phi = strain_basis(deg, ref)
        det = mesh.jac_det[elems][:, None]
        mom = np.einsum("mq,mqj,qk->mkj", w[None] * det, lam_pts, phi)
        idx = Q.group_indices(elems, deg)
        out[idx] = mom / Q.D[idx][..., None]
    return out


def solve_auxiliary(system: AssembledSystem, lambda_N: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Linear problem ``a((u*, p*), (v, q)) = l(v) - (lambda_N, q)``."""
    R = _Reduced(system)
    lam = np.asarray(lambda_N, dtype=float)
    if lam.shape != (R.N, 2):
        raise ValueError(f"lambda_N must have shape {(R.N, 2)}, got {lam.shape}")
    G = system.G
    Dt = sp.diags(np.tile(R.D, 2))
    schur = R.S.K - (4.0 * DEV_WEIGHT * R.mu ** 2 / R.k) * (G.T @ Dt @ G)
    rhs = R.load - (2.0 * DEV_WEIGHT * R.mu / R.k) * (G.T @ (np.tile(R.D, 2) * lam.T.ravel()))
    fac = SPDFactor(((schur + schur.T) * 0.5).tocsr())
    try:
        u = fac.solve(rhs)
    finally:
        fac.free()
    p = (R.trial(u) - lam) / R.k
    return u, p


def evaluate_energy(system: AssembledSystem, u: np.ndarray, p: np.ndarray) -> float:
    """``1/2 a((u,p),(u,p)) + psi_hp(p) - l(u)``."""
    pf = np.asarray(p).T.ravel()
    quad = float(u @ (system.K @ u)) + 2.0 * float(u @ (system.A_up @ pf)) + float(pf @ (system.A_pp @ pf))
    return 0.5 * quad + system.psi(np.asarray(p)) - float(system.load @ u)


def equation_residual(system: AssembledSystem, u: np.ndarray, p: np.ndarray) -> float:
    """Relative residual of the displacement equation."""
    pf = np.asarray(p).T.ravel()
    r = system.K @ u + system.A_up @ pf - system.load
    return float(np.linalg.norm(r) / max(np.linalg.norm(system.load), 1e-300))
