"""Sparse symmetric positive definite solves.

Uses MKL PARDISO through ``pypardiso`` when it is importable, otherwise
SuperLU from scipy. Jacobi-preconditioned CG is the last resort when a direct
factorization fails.
"""

from __future__ import annotations

import glob
import logging
import os
import sys

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

log = logging.getLogger(__name__)


def _locate_mkl_rt() -> None:
    if os.environ.get("PYPARDISO_MKL_RT"):
        return
    for root in (sys.prefix, "/usr/local", "/usr"):
        hits = sorted(glob.glob(os.path.join(root, "lib*", "**", "libmkl_rt.so*"), recursive=True), key=len)
        if hits:
            os.environ["PYPARDISO_MKL_RT"] = hits[0]
            return


def _load_pardiso():
    if os.environ.get("HPPLAST_NO_PARDISO"):
        return None
    _locate_mkl_rt()
    try:
        from pypardiso import PyPardisoSolver
    except (ImportError, OSError):
        return None
    return PyPardisoSolver


_PARDISO = _load_pardiso()


def backend_name() -> str:
    return "pardiso" if _PARDISO is not None else "superlu"


class SPDFactor:
    """Factorization of a sparse SPD matrix, reusable for many right-hand sides."""

    def __init__(self, A: sp.spmatrix, cg_tol: float = 1e-12):
        self.A = sp.csr_matrix(A)
        self.cg_tol = cg_tol
        self.backend = backend_name()
        self._impl = None
        try:
            if self.backend == "pardiso":
                self._impl = _PARDISO()
                self._impl.set_iparm(1, 1)  # user iparm
                self._impl.set_iparm(2, 2)  # nested dissection ordering
                self._impl.factorize(self.A)
            else:
                self._impl = spla.splu(sp.csc_matrix(self.A), permc_spec="MMD_AT_PLUS_A")
        except Exception as exc:  # pragma: no cover - depends on backend failures
            log.warning("direct factorization failed (%s); using CG", exc)
            self.backend = "cg"
            self._impl = None

    def solve(self, b: np.ndarray) -> np.ndarray:
        b = np.asarray(b, dtype=float)
        if self.backend == "pardiso":
            x = self._impl.solve(self.A, b)
        elif self.backend == "superlu":
            x = self._impl.solve(b)
        else:
            x = self._cg(b)
        if not np.all(np.isfinite(x)):
            raise np.linalg.LinAlgError("linear solve produced non-finite values")
        return x

    def _cg(self, b: np.ndarray) -> np.ndarray:
        d = self.A.diagonal()
        if np.any(d <= 0):
            raise np.linalg.LinAlgError("matrix is not positive definite")
        M = sp.diags(1.0 / d)
        cols = b.reshape(len(b), -1)
        out = np.empty_like(cols)
        for k in range(cols.shape[1]):
            x, info = spla.cg(self.A, cols[:, k], rtol=self.cg_tol, atol=0.0, M=M, maxiter=20 * len(b))
            if info != 0:
                raise np.linalg.LinAlgError(f"CG did not converge (info={info})")
            out[:, k] = x
        return out.reshape(b.shape)

    def free(self) -> None:
        if self.backend == "pardiso" and self._impl is not None:
            self._impl.free_memory(everything=True)
        self._impl = None


def spd_solve(A: sp.spmatrix, b: np.ndarray) -> np.ndarray:
    fac = SPDFactor(A)
    try:
        return fac.solve(b)
    finally:
        fac.free()
