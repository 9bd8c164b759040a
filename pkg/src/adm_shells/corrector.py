"""Leading-order conformal-factor and shift corrections.

Both corrections are flat Poisson problems ``Delta w = f`` with compactly
supported ``f``. The source is projected onto real spherical harmonics on
each sphere of a radial grid uniform in ``s = ln r``; every ``(l, m)``
coefficient then satisfies

    c'' + c' - l (l + 1) c = r^2 f_lm      (' = d/ds)

discretized with 4th-order centered differences. Outside the grid the
homogeneous solutions ``r^l`` (inside) and ``r^-(l+1)`` (outside) are exact,
so ghost values are eliminated with them and the banded system is solved
directly. Coefficients are interpolated by quintic splines in ``s``.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import make_interp_spline
from scipy.linalg import solve_banded

from .constraints import constraints, shell_sample
from .harmonics import RadialSHField, degrees, n_coeffs, real_harmonics
from .initial_data import ConformalPart, InitialData, ShellPart, ShiftPart
from .angular import BumpSeed
from .moments import _angular_rule
from .shell_fields import ShellTensorField
from .sphere_ops import fejer_weights

_D1 = np.array([1.0, -8.0, 0.0, 8.0, -1.0]) / 12.0
_D2 = np.array([-1.0, 16.0, -30.0, 16.0, -1.0]) / 12.0


@dataclass(frozen=True)
class RadialGrid3D:
    """Spherical product grid: ``n_s + 1`` radii geometric on ``[r_in, R_out]``
    times a Fejer-by-trapezoid sphere grid resolving harmonics up to ``L``."""

    r_in: float
    R_out: float
    n_s: int = 384
    L: int = 16

    def __post_init__(self):
        if not 0 < self.r_in < self.R_out:
            raise ValueError("need 0 < r_in < R_out")
        if self.n_s < 8:
            raise ValueError("too few radial intervals")

    @classmethod
    def for_shell(cls, k: float, n_s: int = 384, L: int = 16, inner: float = 0.5, outer: float = 20.0):
        return cls(inner * k, outer * k, n_s, L)

    @property
    def s(self) -> np.ndarray:
        return np.linspace(np.log(self.r_in), np.log(self.R_out), self.n_s + 1)

    @property
    def r(self) -> np.ndarray:
        return np.exp(self.s)

    @property
    def h(self) -> float:
        return (np.log(self.R_out) - np.log(self.r_in)) / self.n_s

    def sphere(self):
        n_theta = 2 * self.L + 2
        n_phi = 2 * n_theta
        th = (np.arange(n_theta) + 0.5) * np.pi / n_theta
        ph = 2 * np.pi * np.arange(n_phi) / n_phi
        T, P = np.meshgrid(th, ph, indexing="ij")
        n = np.stack([np.sin(T) * np.cos(P), np.sin(T) * np.sin(P), np.cos(T)], -1).reshape(-1, 3)
        w = np.outer(fejer_weights(n_theta), np.full(n_phi, 2 * np.pi / n_phi)).ravel()
        return n, w

    def to_json(self) -> dict:
        return {"r_in": self.r_in, "R_out": self.R_out, "n_s": self.n_s, "L": self.L}


def radial_operator(ell: int, n_s: int, h: float):
    """Banded matrix (``solve_banded`` layout, bandwidth 2) for ``c'' + c' - l(l+1) c``."""
    N = n_s + 1
    ab = np.zeros((5, N))
    a = _D2 / h**2 + _D1 / h
    a = a.copy()
    a[2] -= ell * (ell + 1)
    for i in range(N):
        for d in range(-2, 3):
            j = i + d
            coef = a[d + 2]
            if j < 0:
                # u ~ r^l below the grid
                coef *= np.exp(ell * j * h)
                j = 0
            elif j > N - 1:
                coef *= np.exp(-(ell + 1) * (j - N + 1) * h)
                j = N - 1
            ab[2 + i - j, j] += coef
    return ab


def solve_radial(rhs: np.ndarray, grid: RadialGrid3D) -> np.ndarray:
    """Solve every ``(component, l, m)`` problem; ``rhs[..., lm, i] = r_i^2 f_lm(r_i)``."""
    out = np.zeros_like(rhs)
    ell = degrees(grid.L)
    for l in range(grid.L + 1):
        sel = ell == l
        block = rhs[..., sel, :]
        if not np.any(block):
            continue
        ab = radial_operator(l, grid.n_s, grid.h)
        flat = block.reshape(-1, grid.n_s + 1).T
        out[..., sel, :] = solve_banded((2, 2), ab, flat).T.reshape(block.shape)
    return out


def _spline_field(values: np.ndarray, grid: RadialGrid3D) -> RadialSHField:
    """Quintic interpolation in ``s`` of node values ``[ncomp, nlm, n_s + 1]``."""
    ncomp, nlm, N = values.shape
    s = grid.s
    spl = make_interp_spline(s, values.reshape(-1, N).T, k=5)
    left = s[:-1]
    # local Taylor coefficients on each interval (exact: the spline is one quintic there)
    cols = [spl.derivative(j)(left) / np.prod(np.arange(1, j + 1)) if j else spl(left) for j in range(6)]
    coefs = np.stack(cols[::-1], axis=-1)  # [n_s, ncomp*nlm, 6]
    coefs = np.transpose(coefs, (1, 0, 2)).reshape(ncomp, nlm, N - 1, 6)
    return RadialSHField(
        ncomp=ncomp,
        L=grid.L,
        n_intervals=N - 1,
        s0=float(s[0]),
        s1=float(s[-1]),
        coefs=coefs,
        inner=values[..., 0].copy(),
        outer=values[..., -1].copy(),
    )


def project_source(fn, ncomp: int, grid: RadialGrid3D, support=None, segments=None) -> np.ndarray:
    """``r^2 f_lm`` at the grid radii for ``fn(x[N, 3]) -> [N, ncomp]``.

    ``segments`` is a list of ``(a, b, n, w)``: radii in ``(a, b)`` use the
    angular nodes ``n`` and weights ``w``; radii outside every segment carry
    no source. The default is the grid's full sphere rule over ``support``
    (or over every radius).
    """
    if segments is None:
        n, w = grid.sphere()
        a, b = support if support is not None else (0.0, np.inf)
        segments = [(a, b, n, w)]
    r = grid.r
    rhs = np.zeros((ncomp, n_coeffs(grid.L), len(r)))
    for a, b, n, w in segments:
        if np.isfinite(b) and (b >= grid.R_out or a <= grid.r_in):
            raise ValueError("source support must lie strictly inside the radial grid")
        idx = np.flatnonzero((r > a) & (r < b))
        if len(idx) == 0:
            continue
        Y = real_harmonics(n, grid.L)  # [n_ang, nlm]
        pts = (r[idx, None, None] * n[None]).reshape(-1, 3)
        vals = np.asarray(fn(pts), dtype=float).reshape(len(idx), len(n), ncomp)
        rhs[:, :, idx] += np.einsum("ian,a,al->nli", vals, w, Y) * (r[idx] ** 2)[None, None, :]
    return rhs


def solve_poisson(fn, ncomp: int, grid: RadialGrid3D, support=None, segments=None) -> RadialSHField:
    """``Delta w = f`` with ``w -> 0`` at infinity, as a RadialSHField."""
    rhs = project_source(fn, ncomp, grid, support, segments)
    return _spline_field(solve_radial(rhs, grid), grid)


def solve_conformal(fn, grid: RadialGrid3D, support=None, segments=None):
    """Solve ``Delta w = f`` and return ``(w, A)`` with ``w ~ A / (4 r)``."""
    w = solve_poisson(lambda x: np.asarray(fn(x)).reshape(-1, 1), 1, grid, support, segments)
    return w, float(4.0 * w.monopole()[0])


def solve_shift(fn, grid: RadialGrid3D, support=None, segments=None):
    """Solve ``Delta X_i = f_i`` and return ``(X, B)`` with ``X_i ~ B_i / r``."""
    X = solve_poisson(fn, 3, grid, support, segments)
    return X, X.monopole()


def shift_tail(B, x) -> np.ndarray:
    """``L_delta (B / r)`` in closed form: ``r^-3 (-B_i x_j - B_j x_i + (B.x) delta_ij)``."""
    x = np.asarray(x, dtype=float).reshape(-1, 3)
    B = np.asarray(B, dtype=float)
    r = np.linalg.norm(x, axis=1)
    out = -np.einsum("i,aj->aij", B, x) - np.einsum("j,ai->aij", B, x) + (x @ B)[:, None, None] * np.eye(3)
    return out / r[:, None, None] ** 3


# -- full correction ---------------------------------------------------------------------


@dataclass
class CorrectorSolution:
    v: RadialSHField
    X: RadialSHField
    A: float
    B: np.ndarray
    masses: tuple
    grid: RadialGrid3D
    residual_before: dict = field(default_factory=dict)
    residual_after: dict = field(default_factory=dict)

    def parts(self):
        return ConformalPart(self.v, self.masses), ShiftPart(self.X)

    def summary(self) -> dict:
        return {
            "A": self.A,
            "B": np.asarray(self.B).tolist(),
            "residual_before": self.residual_before,
            "residual_after": self.residual_after,
            "R_out": self.grid.R_out,
            "grid": self.grid.to_json(),
            "source_sign": "Delta(psi u') = +psi^5 H / 8, Delta X = -M",
        }

    def dumps(self) -> str:
        return json.dumps(self.summary(), indent=2, sort_keys=True)


def _psi(masses, x):
    psi = np.ones(len(x))
    for m, c in masses:
        psi = psi + m / (2.0 * np.linalg.norm(x - np.asarray(c), axis=1))
    return psi


def _sup_residual(data, k, support):
    x, w = shell_sample(k, *support, n_r=16, n_theta=12)
    H, M = constraints(data, x)
    Mn = np.linalg.norm(M, axis=1)
    return {
        "sup_H": float(np.max(np.abs(H))),
        "l2_H": float(np.sqrt(np.sum(H * H * w))),
        "sup_M": float(np.max(Mn)),
        "l2_M": float(np.sqrt(np.sum(Mn * Mn * w))),
    }


def shell_support(data: InitialData):
    """Smallest radial interval containing every shell part."""
    lo, hi = np.inf, 0.0
    for p in data.parts:
        if isinstance(p, ShellPart):
            a, b = p.field.support
            lo, hi = min(lo, a), max(hi, b)
    if hi == 0.0:
        raise ValueError("data carries no shell fields")
    return lo * data.scale, hi * data.scale


def source_segments(data: InitialData, grid: RadialGrid3D, bump_nodes: int = 64) -> list:
    """Angular rules per shell: the full sphere grid, or a Gauss rule on the
    (theta, phi) box of a bump seed (rotated with its field). Radially
    overlapping shells with different rules share the full grid."""
    groups = {}
    for p in data.parts:
        if isinstance(p, ShellPart):
            F = p.field
            a, b = F.support
            seed = F.angular.seed
            key = (a * data.scale, b * data.scale)
            rule = ("bump", seed, F.rotation) if isinstance(seed, BumpSeed) else ("sphere",)
            groups.setdefault(key, set()).add(rule)
    keys = sorted(groups)
    segments = []
    for i, key in enumerate(keys):
        rules = groups[key]
        overlaps = any(
            j != i and keys[j][0] < key[1] and key[0] < keys[j][1] and groups[keys[j]] != rules for j in range(len(keys))
        )
        if len(rules) == 1 and not overlaps and next(iter(rules))[0] == "bump":
            _, seed, rot = next(iter(rules))
            n, w = _angular_rule(seed, bump_nodes, bump_nodes)
            n = n @ np.asarray(rot, dtype=float).T
        else:
            n, w = grid.sphere()
        segments.append((key[0], key[1], n, w))
    return segments


def correct(
    data: InitialData,
    grid: RadialGrid3D | None = None,
    measure: bool = True,
    L: int = 16,
    ds: float = 0.0096,
    outer_factor: float = 20.0,
) -> CorrectorSolution:
    """Conformal and shift corrections for data whose constraint residual is
    supported on its shell fields.

    ``v`` solves ``Delta v = psi^5 H / 8`` and the factor is ``u = 1 + v / psi``
    with ``psi`` the point-mass conformal factor of the background, which makes
    ``-8 Delta_g (u - 1) = -H`` exact for ``g = psi^4 delta``. The shift solves
    ``Delta X = -M`` (``div L_delta X = Delta X`` in three dimensions). The
    default grid runs from half the inner shell radius to ``outer_factor``
    times the outer one with spacing ``ds`` in ``ln r``.
    """
    if data.scale != 1.0:
        raise ValueError("correct data before rescaling")
    if data.parts_of("conformal") or data.parts_of("shift"):
        raise ValueError("data already carries a correction")
    support = shell_support(data)
    lo, hi = support
    k = hi / 2.0
    if grid is None:
        r_in, R_out = 0.5 * lo, outer_factor * hi
        grid = RadialGrid3D(r_in, R_out, int(np.ceil(np.log(R_out / r_in) / ds)), L)
    if grid.R_out < 10 * hi:
        raise ValueError("outer radius must be at least 10 times the outer shell radius")
    masses = data.background_masses
    cache = {}

    def residual(x):
        key = x.tobytes()
        if key not in cache:
            cache.clear()
            cache[key] = constraints(data, x)
        return cache[key]

    def f_conf(x):
        H, _ = residual(x)
        return _psi(masses, x) ** 5 * H / 8.0

    def f_shift(x):
        _, M = residual(x)
        return -M

    segments = source_segments(data, grid)
    v, A = solve_conformal(f_conf, grid, segments=segments)
    X, B = solve_shift(f_shift, grid, segments=segments)
    sol = CorrectorSolution(v, X, A, B, masses, grid)
    if measure:
        sol.residual_before = _sup_residual(data, k, (lo / k, hi / k))
        sol.residual_after = _sup_residual(assemble_corrected(data, sol), k, (lo / k, hi / k))
    return sol


def assemble_corrected(
    data: InitialData,
    solution: CorrectorSolution,
    sigma_k: ShellTensorField | None = None,
    tau_k: ShellTensorField | None = None,
) -> InitialData:
    """``(u^4 (g + sigma), u^2 (pi + tau + L_{g + sigma} X))``."""
    extra = [ShellPart(f) for f in (sigma_k, tau_k) if f is not None]
    return data.with_parts(*extra, *solution.parts())
