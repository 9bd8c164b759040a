"""Tensor calculus on the round unit sphere, sampled on a pole-free grid.

Fields are stored by their orthonormal-frame components with respect to
``e_theta = d/dtheta`` and ``e_phi = (1/sin theta) d/dphi``. Azimuthal
derivatives are spectral; colatitude derivatives are centered finite
differences that reach across the poles by reflection,
``f(-theta, phi) = f(theta, phi + pi)``, where each frame index flips sign.

Connection of the round metric in this frame::

    nabla_{e_phi} e_theta = cot(theta) e_phi
    nabla_{e_phi} e_phi   = -cot(theta) e_theta
    nabla_{e_theta} e_*   = 0
"""
from __future__ import annotations

import math

from dataclasses import dataclass, field
from functools import cached_property
from typing import Sequence

import numpy as np

__all__ = [
    "SphereGrid",
    "ScalarS2",
    "OneFormS2",
    "TTTensorS2",
    "PolynomialS2Function",
    "GridMismatch",
    "sample",
    "exterior_derivative",
    "hodge_star",
    "delta_star",
    "div_tt",
    "div_oneform",
    "laplacian",
    "lie_rotation_tt",
    "sphere_integral",
    "fejer_weights",
]

# centered first-derivative stencils, offsets 1..m (antisymmetric)
def _central_first(order: int) -> np.ndarray:
    m = order // 2
    k = np.arange(1, m + 1)
    f = np.array([math.factorial(i) for i in range(2 * m + 1)], dtype=float)
    return (-1.0) ** (k + 1) * f[m] ** 2 / (k * f[m - k] * f[m + k])


_FD_FIRST = {o: _central_first(o) for o in (2, 4, 6, 8, 10, 12, 14, 16)}


class GridMismatch(ValueError):
    pass


def fejer_weights(n: int) -> np.ndarray:
    """Fejer's first rule on cell-centred colatitudes; weights for dz, z = cos(theta)."""
    theta = (np.arange(n) + 0.5) * np.pi / n
    l = np.arange(1, n // 2 + 1)
    s = (np.cos(2 * np.outer(theta, l)) / (4 * l**2 - 1)).sum(axis=1)
    return (2.0 / n) * (1.0 - 2.0 * s)


@dataclass(frozen=True, eq=False)
class SphereGrid:
    n_theta: int = 64
    n_phi: int = 128
    fd_order: int = 12

    def __post_init__(self):
        if self.n_theta < 1 or self.n_phi < 2 or self.n_phi % 2:
            raise ValueError("need n_theta >= 1 and an even n_phi >= 2")
        if self.fd_order not in _FD_FIRST:
            raise ValueError(f"fd_order must be one of {sorted(_FD_FIRST)}")
        if self.n_theta < self.fd_order // 2:
            raise ValueError("n_theta too small for the stencil")

    def __eq__(self, other):
        return (
            isinstance(other, SphereGrid)
            and (self.n_theta, self.n_phi, self.fd_order)
            == (other.n_theta, other.n_phi, other.fd_order)
        )

    def __hash__(self):
        return hash((self.n_theta, self.n_phi, self.fd_order))

    @property
    def shape(self) -> tuple[int, int]:
        return (self.n_theta, self.n_phi)

    @cached_property
    def theta_nodes(self) -> np.ndarray:
        return (np.arange(self.n_theta) + 0.5) * np.pi / self.n_theta

    @cached_property
    def phi_nodes(self) -> np.ndarray:
        return 2 * np.pi * np.arange(self.n_phi) / self.n_phi

    @cached_property
    def mesh(self) -> tuple[np.ndarray, np.ndarray]:
        return np.meshgrid(self.theta_nodes, self.phi_nodes, indexing="ij")

    @cached_property
    def quad_weights(self) -> np.ndarray:
        w = fejer_weights(self.n_theta) * (2 * np.pi / self.n_phi)
        return np.repeat(w[:, None], self.n_phi, axis=1)

    @cached_property
    def unit_vectors(self) -> np.ndarray:
        """Cartesian positions of the nodes, shape (n_theta, n_phi, 3)."""
        th, ph = self.mesh
        return np.stack(
            [np.sin(th) * np.cos(ph), np.sin(th) * np.sin(ph), np.cos(th)], axis=-1
        )

    @cached_property
    def frame(self) -> tuple[np.ndarray, np.ndarray]:
        """Cartesian e_theta and e_phi at the nodes."""
        th, ph = self.mesh
        e_th = np.stack(
            [np.cos(th) * np.cos(ph), np.cos(th) * np.sin(ph), -np.sin(th)], axis=-1
        )
        e_ph = np.stack([-np.sin(ph), np.cos(ph), np.zeros_like(ph)], axis=-1)
        return e_th, e_ph

    # -- derivatives ------------------------------------------------------
    def d_theta(self, f: np.ndarray, parity: int = 1) -> np.ndarray:
        """Colatitude derivative; ``parity`` is the sign picked up across a pole."""
        m = self.fd_order // 2
        half = self.n_phi // 2
        across = parity * np.roll(f, half, axis=1)
        # ghost rows: theta_{-1-j} <-> theta_j and theta_{n+j} <-> theta_{n-1-j}
        top = across[:m][::-1]
        bottom = across[-m:][::-1]
        ext = np.concatenate([top, f, bottom], axis=0)
        n = self.n_theta
        out = np.zeros_like(f)
        for k, c in enumerate(_FD_FIRST[self.fd_order], start=1):
            out += c * (ext[m + k : m + k + n] - ext[m - k : m - k + n])
        return out / (np.pi / n)

    @cached_property
    def _wavenumbers(self) -> np.ndarray:
        k = np.fft.rfftfreq(self.n_phi, d=1.0 / self.n_phi)
        k = 1j * k
        k[-1] = 0.0  # drop the Nyquist mode
        return k

    def d_phi(self, f: np.ndarray) -> np.ndarray:
        return np.fft.irfft(np.fft.rfft(f, axis=1) * self._wavenumbers, n=self.n_phi, axis=1)

    @cached_property
    def sin_theta(self) -> np.ndarray:
        return np.sin(self.theta_nodes)[:, None]

    @cached_property
    def cot_theta(self) -> np.ndarray:
        return (np.cos(self.theta_nodes) / np.sin(self.theta_nodes))[:, None]


def _check(grid: SphereGrid, *others: SphereGrid) -> None:
    for g in others:
        if g != grid:
            raise GridMismatch("fields live on different sphere grids")


@dataclass(frozen=True)
class ScalarS2:
    grid: SphereGrid
    values: np.ndarray

    def __post_init__(self):
        if self.values.shape != self.grid.shape:
            raise GridMismatch(f"values shape {self.values.shape} != grid {self.grid.shape}")

    def __add__(self, other: "ScalarS2") -> "ScalarS2":
        _check(self.grid, other.grid)
        return ScalarS2(self.grid, self.values + other.values)

    def __sub__(self, other: "ScalarS2") -> "ScalarS2":
        _check(self.grid, other.grid)
        return ScalarS2(self.grid, self.values - other.values)

    def __mul__(self, c: float) -> "ScalarS2":
        return ScalarS2(self.grid, c * self.values)

    __rmul__ = __mul__


@dataclass(frozen=True)
class OneFormS2:
    grid: SphereGrid
    theta: np.ndarray
    phi: np.ndarray

    def __add__(self, other: "OneFormS2") -> "OneFormS2":
        _check(self.grid, other.grid)
        return OneFormS2(self.grid, self.theta + other.theta, self.phi + other.phi)

    def __sub__(self, other: "OneFormS2") -> "OneFormS2":
        _check(self.grid, other.grid)
        return OneFormS2(self.grid, self.theta - other.theta, self.phi - other.phi)

    def __mul__(self, c: float) -> "OneFormS2":
        return OneFormS2(self.grid, c * self.theta, c * self.phi)

    __rmul__ = __mul__

    def __neg__(self) -> "OneFormS2":
        return self * -1.0

    def sup(self) -> float:
        return float(np.max(np.hypot(self.theta, self.phi)))

    def cartesian(self) -> np.ndarray:
        e_th, e_ph = self.grid.frame
        return self.theta[..., None] * e_th + self.phi[..., None] * e_ph


@dataclass(frozen=True)
class TTTensorS2:
    """Trace-free symmetric tensor; T_phiphi = -T_thth and T_phith = T_thph."""

    grid: SphereGrid
    thth: np.ndarray
    thph: np.ndarray

    def __add__(self, other: "TTTensorS2") -> "TTTensorS2":
        _check(self.grid, other.grid)
        return TTTensorS2(self.grid, self.thth + other.thth, self.thph + other.thph)

    def __sub__(self, other: "TTTensorS2") -> "TTTensorS2":
        _check(self.grid, other.grid)
        return TTTensorS2(self.grid, self.thth - other.thth, self.thph - other.thph)

    def __mul__(self, c: float) -> "TTTensorS2":
        return TTTensorS2(self.grid, c * self.thth, c * self.thph)

    __rmul__ = __mul__

    def sup(self) -> float:
        return float(np.max(np.sqrt(2 * (self.thth**2 + self.thph**2))))

    def full(self) -> np.ndarray:
        """Frame components as an (n_theta, n_phi, 2, 2) array."""
        return np.stack(
            [np.stack([self.thth, self.thph], -1), np.stack([self.thph, -self.thth], -1)],
            -2,
        )

    def cartesian(self) -> np.ndarray:
        e = np.stack(self.grid.frame, axis=-2)  # (..., 2, 3)
        return np.einsum("...ab,...ai,...bj->...ij", self.full(), e, e)

    @classmethod
    def from_cartesian(cls, grid: SphereGrid, T: np.ndarray) -> "TTTensorS2":
        e_th, e_ph = grid.frame
        thth = np.einsum("...i,...ij,...j->...", e_th, T, e_th)
        phph = np.einsum("...i,...ij,...j->...", e_ph, T, e_ph)
        thph = np.einsum("...i,...ij,...j->...", e_th, T, e_ph)
        return cls(grid, 0.5 * (thth - phph), thph)


@dataclass(frozen=True)
class PolynomialS2Function:
    """Sum of monomials ``c * x1**a * x2**b * x3**c`` restricted to |x| = 1."""

    terms: tuple[tuple[float, tuple[int, int, int]], ...] = field(default=())

    def __post_init__(self):
        for _, e in self.terms:
            if len(e) != 3 or any(int(k) != k or k < 0 for k in e):
                raise ValueError(f"bad exponent triple {e}")

    @classmethod
    def from_dict(cls, d: dict[str, float] | Sequence) -> "PolynomialS2Function":
        """Accepts ``{"2,0,0": 1.0}`` or ``[[coef, [a, b, c]], ...]``."""
        if isinstance(d, dict):
            items = [(float(c), tuple(int(s) for s in k.split(","))) for k, c in d.items()]
        else:
            items = [(float(c), tuple(int(s) for s in e)) for c, e in d]
        return cls(tuple(items))

    def to_list(self) -> list:
        return [[c, list(e)] for c, e in self.terms]

    @property
    def degrees(self) -> set[int]:
        return {sum(e) for _, e in self.terms}

    @property
    def is_even(self) -> bool:
        return all(d % 2 == 0 for d in self.degrees)

    @property
    def is_odd(self) -> bool:
        return all(d % 2 == 1 for d in self.degrees)

    def __call__(self, x, y, z):
        out = 0.0 * x
        for c, (a, b, e) in self.terms:
            out = out + c * x**a * y**b * z**e
        return out

    def extended(self, x, r):
        """Degree-zero homogeneous extension evaluated at ``x`` with ``r = |x|``."""
        out = 0.0 * r
        for c, (a, b, e) in self.terms:
            out = out + c * x[0] ** a * x[1] ** b * x[2] ** e / r ** (a + b + e)
        return out


# ---------------------------------------------------------------------------
# operations


def sample(f, grid: SphereGrid) -> ScalarS2:
    n = grid.unit_vectors
    return ScalarS2(grid, np.asarray(f(n[..., 0], n[..., 1], n[..., 2]), dtype=float) + 0.0 * n[..., 0])


def exterior_derivative(u: ScalarS2) -> OneFormS2:
    g = u.grid
    return OneFormS2(g, g.d_theta(u.values, +1), g.d_phi(u.values) / g.sin_theta)


def hodge_star(alpha: OneFormS2) -> OneFormS2:
    # rotation by +90 degrees: *e_theta = e_phi
    return OneFormS2(alpha.grid, -alpha.phi, alpha.theta.copy())


def _covariant_oneform(eta: OneFormS2):
    """Return eta_{a;b} as (thth, thph, phth, phph) with the derivative index last."""
    g = eta.grid
    s, c = g.sin_theta, g.cot_theta
    th_th = g.d_theta(eta.theta, -1)
    ph_th = g.d_theta(eta.phi, -1)
    th_ph = g.d_phi(eta.theta) / s - c * eta.phi
    ph_ph = g.d_phi(eta.phi) / s + c * eta.theta
    return th_th, th_ph, ph_th, ph_ph


def delta_star(eta: OneFormS2) -> TTTensorS2:
    th_th, th_ph, ph_th, ph_ph = _covariant_oneform(eta)
    return TTTensorS2(eta.grid, 0.5 * (th_th - ph_ph), 0.5 * (th_ph + ph_th))


def _tensor_derivs(T: TTTensorS2):
    """Covariant derivatives T_{ab;theta} and T_{ab;phi} of the two stored components."""
    g = T.grid
    s, c = g.sin_theta, g.cot_theta
    a_th = g.d_theta(T.thth, +1)
    b_th = g.d_theta(T.thph, +1)
    a_ph = g.d_phi(T.thth) / s - 2 * c * T.thph
    b_ph = g.d_phi(T.thph) / s + 2 * c * T.thth
    return a_th, b_th, a_ph, b_ph


def div_tt(T: TTTensorS2) -> OneFormS2:
    g = T.grid
    s, c = g.sin_theta, g.cot_theta
    a_th, b_th, _, b_ph = _tensor_derivs(T)
    div_th = a_th + b_ph
    # T_{phph;ph} = -(1/s) d_phi T_thth + 2 cot T_thph
    div_ph = b_th - g.d_phi(T.thth) / s + 2 * c * T.thph
    return OneFormS2(g, div_th, div_ph)


def div_oneform(alpha: OneFormS2) -> ScalarS2:
    g = alpha.grid
    val = g.d_theta(alpha.theta, -1) + g.cot_theta * alpha.theta + g.d_phi(alpha.phi) / g.sin_theta
    return ScalarS2(g, val)


def laplacian(u: ScalarS2) -> ScalarS2:
    return div_oneform(exterior_derivative(u))


def _unit_axis(axis) -> np.ndarray:
    v = np.asarray(axis, dtype=float)
    if v.shape != (3,) or abs(np.linalg.norm(v) - 1.0) > 1e-12:
        raise ValueError("axis must be a unit 3-vector")
    return v


def rotation_field(grid: SphereGrid, axis) -> OneFormS2:
    """Y = axis x n in frame components."""
    v = _unit_axis(axis)
    Y = np.cross(np.broadcast_to(v, grid.unit_vectors.shape), grid.unit_vectors)
    e_th, e_ph = grid.frame
    return OneFormS2(grid, (Y * e_th).sum(-1), (Y * e_ph).sum(-1))


def lie_rotation_tt(T: TTTensorS2, axis) -> TTTensorS2:
    """T_{bc;a} Y^a + T_{ab} Y^a_{;c} + T_{ac} Y^a_{;b} for Y = axis x n.

    For a Killing field, Y_{theta;phi} = -v.n and Y_{phi;theta} = v.n.
    """
    v = _unit_axis(axis)
    g = T.grid
    Y = rotation_field(g, v)
    vn = g.unit_vectors @ v
    a_th, b_th, a_ph, b_ph = _tensor_derivs(T)
    grad_a = Y.theta * a_th + Y.phi * a_ph
    grad_b = Y.theta * b_th + Y.phi * b_ph
    return TTTensorS2(g, grad_a + 2 * vn * T.thph, grad_b - 2 * vn * T.thth)


def sphere_integral(u: ScalarS2 | np.ndarray) -> float:
    if isinstance(u, ScalarS2):
        vals, w = u.values, u.grid.quad_weights
    else:
        raise TypeError("expected ScalarS2")
    return float(np.sum(vals * w))
