"""Gauss rules, nodal Lagrange bases and the plastic-strain basis.

The plastic strain on an element of degree ``p`` lives in the tensor space of
degree ``p - 1`` spanned by the Lagrange functions through the ``p x p`` Gauss
points. On affine elements that basis is its own biorthogonal partner and the
local mass matrix is ``diag(D_k)`` with ``D_k = w_k |det J|``.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from numpy.polynomial import legendre as npleg


@dataclass(frozen=True)
class GaussRule:
    n: int
    points: np.ndarray
    weights: np.ndarray


def _legendre_and_derivative(n: int, x: np.ndarray):
    p0 = np.ones_like(x)
    if n == 0:
        return p0, np.zeros_like(x)
    p1 = x.copy()
    for k in range(2, n + 1):
        p0, p1 = p1, ((2 * k - 1) * x * p1 - (k - 1) * p0) / k
    dp = n * (x * p1 - p0) / (x * x - 1.0)
    return p1, dp


@lru_cache(maxsize=None)
def _gauss(n: int) -> tuple[tuple[float, ...], tuple[float, ...]]:
    k = np.arange(1, n + 1)
    x = np.cos(np.pi * (k - 0.25) / (n + 0.5))
    for _ in range(100):
        pn, dpn = _legendre_and_derivative(n, x)
        dx = pn / dpn
        x = x - dx
        if np.max(np.abs(dx)) < 1e-16:
            break
    pn, dpn = _legendre_and_derivative(n, x)
    w = 2.0 / ((1.0 - x * x) * dpn * dpn)
    order = np.argsort(x)
    x, w = x[order], w[order]
    # exact symmetry
    x = 0.5 * (x - x[::-1])
    w = 0.5 * (w + w[::-1])
    return tuple(x), tuple(w)


def gauss_rule(n: int) -> GaussRule:
    """``n``-point Gauss-Legendre rule on ``[-1, 1]``."""
    if n <= 0:
        raise ValueError(f"Gauss rule needs n >= 1, got {n}")
    x, w = _gauss(int(n))
    return GaussRule(int(n), np.array(x), np.array(w))


@lru_cache(maxsize=None)
def _lobatto(p: int) -> tuple[float, ...]:
    if p == 1:
        return (-1.0, 1.0)
    inner = npleg.Legendre.basis(p).deriv().roots().real
    c = npleg.Legendre.basis(p).deriv(2).coef
    d = npleg.Legendre.basis(p).deriv().coef
    for _ in range(20):
        step = npleg.legval(inner, d) / npleg.legval(inner, c)
        inner = inner - step
        if np.max(np.abs(step)) < 1e-16:
            break
    inner = np.sort(inner)
    inner = 0.5 * (inner - inner[::-1])
    return (-1.0, *inner, 1.0)


def lobatto_points(p: int) -> np.ndarray:
    """The ``p + 1`` Gauss-Lobatto points (nodes of the displacement basis)."""
    if p < 1:
        raise ValueError("degree must be >= 1")
    return np.array(_lobatto(int(p)))


@lru_cache(maxsize=None)
def _lagrange_tables(nodes: tuple[float, ...]):
    n = len(nodes)
    coef = np.linalg.inv(npleg.legvander(np.array(nodes), n - 1))
    der = np.zeros((n, n))
    for k in range(n):
        e = np.zeros(n)
        e[k] = 1.0
        dk = npleg.legder(e)
        der[: len(dk), k] = dk
    return coef, der


def lagrange_1d(nodes, x, deriv: int = 0) -> np.ndarray:
    """Values (or derivatives) of the Lagrange basis through ``nodes`` at ``x``.

    Returns an array of shape ``(len(x), len(nodes))``.
    """
    nodes = tuple(float(v) for v in np.atleast_1d(nodes))
    x = np.atleast_1d(np.asarray(x, dtype=float))
    n = len(nodes)
    coef, der = _lagrange_tables(nodes)
    c = coef
    for _ in range(deriv):
        c = der @ c
    return npleg.legvander(x, n - 1) @ c


# ---------------------------------------------------------------------------
# element-level bases


def strain_nodes(p: int) -> np.ndarray:
    """1D Gauss points carrying the plastic-strain coefficients of degree ``p``."""
    return gauss_rule(p).points


def tensor_points(x1d: np.ndarray) -> np.ndarray:
    """Tensor grid with the x index running fastest, shape ``(n*n, 2)``."""
    xi, eta = np.meshgrid(x1d, x1d, indexing="xy")
    return np.column_stack([xi.ravel(), eta.ravel()])


def tensor_weights(w1d: np.ndarray) -> np.ndarray:
    return np.outer(w1d, w1d).ravel()


def tensor_basis(nodes1d, pts: np.ndarray, dx: int = 0, dy: int = 0) -> np.ndarray:
    """Tensor Lagrange basis values, shape ``(len(pts), len(nodes1d)**2)``."""
    lx = lagrange_1d(nodes1d, pts[:, 0], dx)
    ly = lagrange_1d(nodes1d, pts[:, 1], dy)
    return np.einsum("ma,mb->mba", lx, ly).reshape(len(pts), -1)


def strain_basis(p: int, pts: np.ndarray) -> np.ndarray:
    """Plastic-strain basis of degree ``p - 1`` evaluated at reference points."""
    if p == 1:
        return np.ones((len(pts), 1))
    return tensor_basis(strain_nodes(p), pts)


@dataclass(frozen=True)
class ShapeFunctions:
    """Displacement basis of one element evaluated at reference points."""

    values: np.ndarray  # (m, n)
    dx: np.ndarray  # physical derivatives (m, n)
    dy: np.ndarray


def displacement_shape_functions(p: int, pts: np.ndarray, jac_diag=(1.0, 1.0)) -> ShapeFunctions:
    """Gauss-Lobatto nodal basis of degree ``p`` at ``pts``.

    ``jac_diag`` holds ``(dx/dxi, dy/deta)`` of an axis-aligned element map.
    """
    nodes = lobatto_points(p)
    pts = np.atleast_2d(pts)
    return ShapeFunctions(
        tensor_basis(nodes, pts),
        tensor_basis(nodes, pts, dx=1) / jac_diag[0],
        tensor_basis(nodes, pts, dy=1) / jac_diag[1],
    )


@dataclass(frozen=True)
class BiorthBasis:
    """Local strain basis data of one element.

    ``coefficients[:, j]`` expresses the dual function ``j`` in the primal
    Gauss-Lagrange basis; ``weights`` are the ``D_k``; ``yield_weights`` the
    ``sigma_k``.
    """

    coefficients: np.ndarray
    weights: np.ndarray
    yield_weights: np.ndarray
    mass: np.ndarray


def local_strain_mass(p: int, det: float) -> np.ndarray:
    """Exact local mass matrix of the strain basis on an affine element."""
    rule = gauss_rule(p + 1)
    pts = tensor_points(rule.points)
    w = tensor_weights(rule.weights) * det
    phi = strain_basis(p, pts)
    return phi.T @ (w[:, None] * phi)


def build_biorthogonal(p: int, det: float, sigma_y) -> BiorthBasis:
    """Biorthogonal dual basis, weights ``D_k`` and yield weights ``sigma_k``.

    ``sigma_y`` may be a constant or a callable of reference points.
    """
    rule = gauss_rule(p + 1)
    pts = tensor_points(rule.points)
    w = tensor_weights(rule.weights) * det
    phi = strain_basis(p, pts)
    mass = phi.T @ (w[:, None] * phi)
    weights = phi.T @ w
    if np.any(weights <= 0):
        raise ValueError("non-positive strain basis weight; element map is not affine")
    coeffs = np.linalg.solve(mass, np.diag(weights))
    sy = sigma_y(pts) if callable(sigma_y) else np.full(len(pts), float(sigma_y))
    yield_weights = (phi.T @ (w * sy)) / weights
    return BiorthBasis(coeffs, weights, yield_weights, mass)


def element_quadrature(p: int, area: float, det_fn, f) -> float:
    """Mesh-dependent rule used for the discrete plasticity functional.

    Midpoint rule for ``p == 1``, tensor Gauss with ``p`` points otherwise.
    ``det_fn`` maps reference points to ``|det J|``; ``f`` takes reference
    points and returns integrand values.
    """
    if p == 1:
        return area * float(np.asarray(f(np.zeros((1, 2))))[0])
    rule = gauss_rule(p)
    pts = tensor_points(rule.points)
    w = tensor_weights(rule.weights)
    return float(np.sum(w * np.abs(det_fn(pts)) * np.asarray(f(pts))))
