"""Small-tensor algebra for 2x2 symmetric and deviatoric tensors.

Deviatoric tensors are stored as ``(a, b)`` meaning ``[[a, b], [b, -a]]``.
The Frobenius inner product in that parametrization carries a factor 2::

    q : r = 2 * (q.a * r.a + q.b * r.b)

The array helpers at the bottom of the module work on ``(..., 2)`` arrays in
the same parametrization and are what the assembly and solver code use.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

#: Frobenius weight of the ``(a, b)`` parametrization.
DEV_WEIGHT = 2.0


@dataclass(frozen=True)
class SymTensor2:
    xx: float
    yy: float
    xy: float

    @classmethod
    def identity(cls) -> SymTensor2:
        return cls(1.0, 1.0, 0.0)

    @property
    def trace(self) -> float:
        return self.xx + self.yy

    def as_matrix(self) -> np.ndarray:
        return np.array([[self.xx, self.xy], [self.xy, self.yy]])

    def __add__(self, other: SymTensor2) -> SymTensor2:
        return SymTensor2(self.xx + other.xx, self.yy + other.yy, self.xy + other.xy)

    def __sub__(self, other: SymTensor2) -> SymTensor2:
        return SymTensor2(self.xx - other.xx, self.yy - other.yy, self.xy - other.xy)

    def __mul__(self, s: float) -> SymTensor2:
        return SymTensor2(s * self.xx, s * self.yy, s * self.xy)

    __rmul__ = __mul__


@dataclass(frozen=True)
class DevTensor2:
    """Trace-free symmetric tensor ``[[a, b], [b, -a]]``."""

    a: float
    b: float

    @classmethod
    def zero(cls) -> DevTensor2:
        return cls(0.0, 0.0)

    def as_sym(self) -> SymTensor2:
        return SymTensor2(self.a, -self.a, self.b)

    def as_matrix(self) -> np.ndarray:
        return np.array([[self.a, self.b], [self.b, -self.a]])

    def as_array(self) -> np.ndarray:
        return np.array([self.a, self.b])

    def __add__(self, other: DevTensor2) -> DevTensor2:
        return DevTensor2(self.a + other.a, self.b + other.b)

    def __sub__(self, other: DevTensor2) -> DevTensor2:
        return DevTensor2(self.a - other.a, self.b - other.b)

    def __mul__(self, s: float) -> DevTensor2:
        return DevTensor2(s * self.a, s * self.b)

    __rmul__ = __mul__

    def __neg__(self) -> DevTensor2:
        return DevTensor2(-self.a, -self.b)


@dataclass(frozen=True)
class Material:
    """Isotropic elasticity ``C`` and scalar kinematic hardening ``H``."""

    lame_lambda: float
    lame_mu: float
    hardening: float
    sigma_y: float

    def __post_init__(self):
        if not (self.lame_mu > 0 and self.hardening > 0 and self.sigma_y > 0):
            raise ValueError(
                f"lame_mu, hardening and sigma_y must be positive, got {self}"
            )
        if self.lame_lambda + self.lame_mu <= 0:
            raise ValueError("lame_lambda + lame_mu must be positive")

    @property
    def two_mu_plus_h(self) -> float:
        return 2.0 * self.lame_mu + self.hardening

    def elasticity_matrix(self) -> np.ndarray:
        """Voigt matrix acting on ``(eps_xx, eps_yy, 2 eps_xy)``."""
        lam, mu = self.lame_lambda, self.lame_mu
        return np.array(
            [[lam + 2 * mu, lam, 0.0], [lam, lam + 2 * mu, 0.0], [0.0, 0.0, mu]]
        )


def dev(t: SymTensor2 | DevTensor2) -> DevTensor2:
    if isinstance(t, DevTensor2):
        return t
    return DevTensor2(0.5 * (t.xx - t.yy), t.xy)


def apply_C(m: Material, t: SymTensor2 | DevTensor2) -> SymTensor2 | DevTensor2:
    if isinstance(t, DevTensor2):
        return 2.0 * m.lame_mu * t
    tr = m.lame_lambda * t.trace
    two_mu = 2.0 * m.lame_mu
    return SymTensor2(tr + two_mu * t.xx, tr + two_mu * t.yy, two_mu * t.xy)


def apply_H(m: Material, q: DevTensor2) -> DevTensor2:
    return m.hardening * q


def frob_inner(s, t) -> float:
    if isinstance(s, DevTensor2) and isinstance(t, DevTensor2):
        return DEV_WEIGHT * (s.a * t.a + s.b * t.b)
    if isinstance(s, DevTensor2):
        s = s.as_sym()
    if isinstance(t, DevTensor2):
        t = t.as_sym()
    return s.xx * t.xx + s.yy * t.yy + 2.0 * s.xy * t.xy


def frob_norm(t) -> float:
    return math.sqrt(frob_inner(t, t))


# ---------------------------------------------------------------------------
# vectorized (..., 2) helpers


def dev_inner(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    return DEV_WEIGHT * np.einsum("...i,...i->...", x, y)


def dev_norm(x: np.ndarray) -> np.ndarray:
    return np.sqrt(DEV_WEIGHT * np.einsum("...i,...i->...", x, x))


def dev_of_gradient(grad: np.ndarray) -> np.ndarray:
    """Deviatoric strain ``(a, b)`` of displacement gradients ``(..., 2, 2)``.

    ``grad[..., c, d]`` is ``d u_c / d x_d``.
    """
    a = 0.5 * (grad[..., 0, 0] - grad[..., 1, 1])
    b = 0.5 * (grad[..., 0, 1] + grad[..., 1, 0])
    return np.stack([a, b], axis=-1)


def stress_from_gradient(material: Material, grad: np.ndarray, p: np.ndarray) -> np.ndarray:
    """``sigma = C(eps(u) - p)`` as ``(..., 3)`` array ``(xx, yy, xy)``."""
    lam, mu = material.lame_lambda, material.lame_mu
    exx = grad[..., 0, 0] - p[..., 0]
    eyy = grad[..., 1, 1] + p[..., 0]
    exy = 0.5 * (grad[..., 0, 1] + grad[..., 1, 0]) - p[..., 1]
    tr = lam * (exx + eyy)
    return np.stack([tr + 2 * mu * exx, tr + 2 * mu * eyy, 2 * mu * exy], axis=-1)


def traction(sigma: np.ndarray, normal: np.ndarray) -> np.ndarray:
    """``sigma n`` for ``(..., 3)`` stresses and ``(..., 2)`` normals."""
    nx, ny = normal[..., 0], normal[..., 1]
    return np.stack(
        [sigma[..., 0] * nx + sigma[..., 2] * ny, sigma[..., 2] * nx + sigma[..., 1] * ny],
        axis=-1,
    )
