"""Compactly supported symmetric tensors on the annulus 1 < |x| < 2 and its dilates.

Two constructions are provided, both assembled from a radial profile and an
angular payload ``(a, T)`` with ``T`` a trace-free tangent tensor and
``a = -div T``:

* momentum ansatz:  ``tau   = (q/r)(a n + n a) + ((r^2 q)'/r^2) T``
  (flat divergence free when ``div div T = 0``);
* metric ansatz:    ``sigma = (p/r)(a n + n a) + (2 r (r p)'/r^2) T``
  (annihilated by the flat linearized scalar curvature).

Here ``n = x/r`` and the angular parts are the degree-zero extensions of the
payload; a tangent one-form ``A`` on the unit sphere has Cartesian components
``A(n)/r`` and a tangent 2-tensor ``T(n)/r^2``.

A field at scale ``k``, rotated by ``R`` and multiplied by ``c`` is

    F(x) = c * k**(-w) * R F0(R^T x / k) R^T,    w = 1 (metric), 2 (momentum).
"""
from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field, replace
from functools import lru_cache
from pathlib import Path

import numpy as np

from ._jax import batched, jax, jnp
from .angular import TAU_OPS, AngularTensor, BumpSeed, PolySeed
from .sphere_ops import PolynomialS2Function, SphereGrid

FORMAT_HEADER = "CHSH1"

EYE3 = tuple(tuple(float(i == j) for j in range(3)) for i in range(3))


class InvariantViolation(ValueError):
    """A named structural requirement of a field or profile does not hold."""

    def __init__(self, name: str, detail: str):
        super().__init__(f"{name}: {detail}")
        self.name = name


@dataclass(frozen=True)
class RadialProfile:
    """``exp(-1/((r-a)(b-r)))`` on (a, b), zero outside."""

    a: float = 1.05
    b: float = 1.95

    def __post_init__(self):
        if not self.a < self.b:
            raise ValueError("profile needs a < b")

    def violations(self) -> list[str]:
        out = []
        if not (1.0 < self.a and self.b < 2.0):
            out.append("profile_support_inside_unit_shell")
        return out

    def check(self) -> None:
        v = self.violations()
        if v:
            raise InvariantViolation(v[0], f"support ({self.a}, {self.b}) must lie inside (1, 2)")

    def derivs(self, r, order: int = 3, xp=np):
        """Closed-form ``(p, p', ..., p^(order))`` for ``order <= 3``."""
        a, b = self.a, self.b
        t = (r - a) * (b - r)
        inside = t > 0
        ts = xp.where(inside, t, 1.0)
        t1 = a + b - 2.0 * r
        t2 = -2.0
        p = xp.where(inside, xp.exp(-1.0 / ts), 0.0)
        h1 = t1 / ts**2
        h2 = t2 / ts**2 - 2.0 * t1**2 / ts**3
        h3 = -6.0 * t1 * t2 / ts**3 + 6.0 * t1**3 / ts**4
        out = [p, p * h1, p * (h2 + h1**2), p * (h3 + 3.0 * h1 * h2 + h1**3)]
        return tuple(out[: order + 1])

    def __call__(self, r, xp=np):
        return self.derivs(r, 0, xp)[0]

    def to_json(self) -> dict:
        return {"a": self.a, "b": self.b}


def _rot_tuple(R) -> tuple:
    R = np.asarray(R, dtype=float)
    return tuple(tuple(float(v) for v in row) for row in R)


@dataclass(frozen=True)
class ShellTensorField:
    kind: str  # "metric" or "momentum"
    ansatz: str  # "sigma" or "tau"
    profile: RadialProfile
    angular: AngularTensor
    k: float = 1.0
    rotation: tuple = field(default=EYE3)
    amplitude: float = 1.0

    def __post_init__(self):
        if self.kind not in ("metric", "momentum"):
            raise ValueError(f"unknown kind {self.kind!r}")
        if self.ansatz not in ("sigma", "tau"):
            raise ValueError(f"unknown ansatz {self.ansatz!r}")
        if self.k <= 0:
            raise ValueError("scale must be positive")

    @property
    def weight(self) -> int:
        return 1 if self.kind == "metric" else 2

    @property
    def R(self) -> np.ndarray:
        return np.asarray(self.rotation, dtype=float)

    @property
    def support(self) -> tuple[float, float]:
        return self.k * self.profile.a, self.k * self.profile.b

    @property
    def static_key(self) -> tuple:
        return (self.ansatz, self.profile, self.angular)

    def params(self):
        return (
            jnp.asarray(self.R),
            jnp.asarray(float(self.amplitude)),
            jnp.asarray(float(self.k)),
            jnp.asarray(float(self.weight)),
        )

    def with_(self, **kw) -> "ShellTensorField":
        if "rotation" in kw:
            kw["rotation"] = _rot_tuple(kw["rotation"])
        return replace(self, **kw)

    def times(self, c: float) -> "ShellTensorField":
        return self.with_(amplitude=self.amplitude * float(c))

    def rotated(self, R) -> "ShellTensorField":
        return self.with_(rotation=np.asarray(R, dtype=float) @ self.R)

    def __call__(self, x) -> np.ndarray:
        return eval_cartesian(self, x, 0)

    # serialization -------------------------------------------------------
    def to_json(self) -> dict:
        return {
            "kind": self.kind,
            "ansatz": self.ansatz,
            "profile": self.profile.to_json(),
            "angular": self.angular.to_json(),
            "k": self.k,
            "rotation": [list(r) for r in self.rotation],
            "amplitude": self.amplitude,
        }

    @classmethod
    def from_json(cls, d: dict) -> "ShellTensorField":
        return cls(
            kind=d["kind"],
            ansatz=d["ansatz"],
            profile=RadialProfile(**d["profile"]),
            angular=AngularTensor.from_json(d["angular"]),
            k=float(d["k"]),
            rotation=_rot_tuple(d["rotation"]),
            amplitude=float(d["amplitude"]),
        )


# -- kernels ----------------------------------------------------------------


@lru_cache(maxsize=None)
def base_function(static_key):
    """Unit-scale, unrotated field ``F0(x)`` as a jax function."""
    ansatz, profile, angular = static_key
    payload = angular.jax_payload()

    def F0(x):
        r = jnp.sqrt(x @ x)
        n = x / r
        a, T = payload(n)
        p, dp = profile.derivs(r, 1, jnp)
        if ansatz == "tau":
            radial = (2.0 * r * p + r * r * dp) / (r * r)
        else:
            radial = 2.0 * r * (p + r * dp) / (r * r)
        return (p / r) * (jnp.outer(a, n) + jnp.outer(n, a)) + radial * T

    return F0


def field_function(static_key):
    """``f(x, params)`` for a field with runtime rotation, amplitude and scale."""
    F0 = base_function(static_key)

    def f(x, params):
        R, c, k, w = params
        return c * k ** (-w) * (R @ F0(R.T @ x / k) @ R.T)

    return f


@lru_cache(maxsize=None)
def _kernel(static_key, derivs: int):
    f = field_function(static_key)

    def one(x, params):
        out = [f(x, params)]
        if derivs >= 1:
            out.append(jax.jacfwd(f)(x, params))
        if derivs >= 2:
            out.append(jax.jacfwd(jax.jacfwd(f))(x, params))
        return tuple(out)

    return jax.jit(jax.vmap(one, in_axes=(0, None)))


def eval_cartesian(F: ShellTensorField, x, derivs: int = 0):
    """Components ``F_ij`` and, on request, ``d_l F_ij`` ([..., i, j, l]) and
    ``d_l d_m F_ij`` ([..., i, j, l, m])."""
    if derivs not in (0, 1, 2):
        raise ValueError("derivs must be 0, 1 or 2")
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    pts = x.reshape(-1, 3)
    if np.any(np.linalg.norm(pts, axis=1) == 0.0):
        raise ValueError("shell fields are not evaluated at the origin")
    out = batched(_kernel(F.static_key, derivs), pts, args=(F.params(),))
    if single:
        out = tuple(o[0] for o in out)
    return out[0] if derivs == 0 else out


# -- constructors -------------------------------------------------------------

# degree-3 harmonic, not axisymmetric about e1
DEFAULT_U = PolynomialS2Function.from_dict({"0,3,0": 1.0, "0,1,2": -3.0})


def _poly_seed(u) -> PolySeed:
    if u is None:
        return PolySeed(DEFAULT_U)
    if isinstance(u, PolySeed):
        return u
    if isinstance(u, PolynomialS2Function):
        return PolySeed(u)
    raise TypeError("expected a PolynomialS2Function")


def make_tau(q: RadialProfile, u=DEFAULT_U, grid: SphereGrid | None = None) -> ShellTensorField:
    """Momentum field from the scalar seed ``u`` via ``T = delta*(*du)``.

    ``grid`` is accepted for interface symmetry; the payload is exact and does
    not depend on it.
    """
    q.check()
    seed = _poly_seed(u)
    if not seed.gives_even_field:
        raise ValueError(
            "seed must have only odd-degree monomials: *du of an even u is odd under x -> -x"
        )
    return ShellTensorField("momentum", "tau", q, AngularTensor(seed, TAU_OPS))


def make_sigma(p: RadialProfile, sigma_tilde: AngularTensor) -> ShellTensorField:
    p.check()
    if not isinstance(sigma_tilde, AngularTensor):
        raise TypeError("sigma_tilde must be an AngularTensor")
    return ShellTensorField("metric", "sigma", p, sigma_tilde)


def default_pair(
    p: RadialProfile | None = None,
    q: RadialProfile | None = None,
    u=DEFAULT_U,
    axis=(1.0, 0.0, 0.0),
) -> tuple[ShellTensorField, ShellTensorField]:
    """``(sigma, tau)`` with ``sigma~`` the Lie derivative of ``tau~`` along ``axis x x``."""
    p = p or RadialProfile()
    q = q or RadialProfile()
    tau = make_tau(q, u)
    sigma = make_sigma(p, tau.angular.lie(axis))
    return sigma, tau


def make_sigma_cm(u: BumpSeed | None = None, q: RadialProfile | None = None) -> ShellTensorField:
    """Trace-free, flat-divergence-free metric perturbation supported in the
    first octant (momentum ansatz applied to a bump seed)."""
    u = u if u is not None else BumpSeed()
    q = q or RadialProfile()
    q.check()
    if isinstance(u, BumpSeed):
        if not u.in_first_octant():
            raise ValueError("bump support must lie strictly inside the first octant")
        seed = u
    else:
        raise TypeError("center-of-mass seeds are BumpSeed instances")
    return ShellTensorField("metric", "tau", q, AngularTensor(seed, TAU_OPS))


def scale_to_shell(F: ShellTensorField, k: float) -> ShellTensorField:
    if k < 1:
        raise ValueError("shell scale must be >= 1")
    if F.k != 1.0:
        raise ValueError("scale_to_shell expects a unit-scale field")
    return F.with_(k=float(k))


# -- diagnostics ----------------------------------------------------------------


def shell_points(F: ShellTensorField, n: int, seed: int = 0, margin: float = 0.0) -> np.ndarray:
    """Uniform random directions at radii inside the profile support."""
    rng = np.random.default_rng(seed)
    d = rng.normal(size=(n, 3))
    d /= np.linalg.norm(d, axis=1, keepdims=True)
    lo, hi = F.support
    w = hi - lo
    r = rng.uniform(lo + margin * w, hi - margin * w, size=(n, 1))
    return d * r


def parity_defect(F: ShellTensorField, n: int = 200, seed: int = 0) -> float:
    x = shell_points(F, n, seed)
    return float(np.max(np.abs(eval_cartesian(F, x) - eval_cartesian(F, -x))))


def flat_divergence(F: ShellTensorField, x) -> np.ndarray:
    _, d1 = eval_cartesian(F, x, 1)
    return np.einsum("...iji->...j", d1)


def linearized_scalar_curvature(F: ShellTensorField, x) -> np.ndarray:
    _, _, d2 = eval_cartesian(F, x, 2)
    return np.einsum("...ijij->...", d2) - np.einsum("...iijj->...", d2)


def spherical_divergence(F: ShellTensorField, x) -> np.ndarray:
    """Divergence from the spherical split ``h00 = F(n,n)``, ``h0a = F(n,.)``,
    ``hab`` tangential (orthonormal frame components), returned in Cartesian
    components; independent of the Cartesian derivative path."""
    x = np.asarray(x, dtype=float).reshape(-1, 3)
    r = np.linalg.norm(x, axis=1)
    n = x / r[:, None]
    th = np.arccos(np.clip(n[:, 2], -1, 1))
    ph = np.arctan2(n[:, 1], n[:, 0])
    h = 1e-4

    def frame(th, ph):
        e_t = np.stack([np.cos(th) * np.cos(ph), np.cos(th) * np.sin(ph), -np.sin(th)], -1)
        e_p = np.stack([-np.sin(ph), np.cos(ph), 0 * ph], -1)
        nn = np.stack([np.sin(th) * np.cos(ph), np.sin(th) * np.sin(ph), np.cos(th)], -1)
        return nn, e_t, e_p

    def comps(r, th, ph):
        nn, e_t, e_p = frame(th, ph)
        Fv = eval_cartesian(F, nn * r[:, None])
        E = [nn, e_t, e_p]
        return np.stack(
            [np.stack([np.einsum("ni,nij,nj->n", E[a], Fv, E[b]) for b in range(3)], -1) for a in range(3)],
            -2,
        )

    def d(fn, var):
        st = [(-2, 1 / 12), (-1, -8 / 12), (1, 8 / 12), (2, -1 / 12)]
        return sum(w * fn(s * h) for s, w in st) / h

    C = comps(r, th, ph)
    dr = d(lambda e: comps(r + e, th, ph), "r")
    dt = d(lambda e: comps(r, th + e, ph), "t")
    dp = d(lambda e: comps(r, th, ph + e), "p")
    s, c = np.sin(th), np.cos(th)
    cot = c / s
    rr = r
    # orthonormal spherical frame (e_r, e_t, e_p) divergence of a symmetric 2-tensor
    div_r = dr[:, 0, 0] + 2 * C[:, 0, 0] / rr + dt[:, 1, 0] / rr + cot * C[:, 1, 0] / rr
    div_r += dp[:, 2, 0] / (rr * s) - (C[:, 1, 1] + C[:, 2, 2]) / rr
    div_t = dr[:, 0, 1] + 3 * C[:, 0, 1] / rr + dt[:, 1, 1] / rr + cot * (C[:, 1, 1] - C[:, 2, 2]) / rr
    div_t += dp[:, 2, 1] / (rr * s)
    div_p = dr[:, 0, 2] + 3 * C[:, 0, 2] / rr + dt[:, 1, 2] / rr + 2 * cot * C[:, 1, 2] / rr
    div_p += dp[:, 2, 2] / (rr * s)
    nn, e_t, e_p = frame(th, ph)
    return div_r[:, None] * nn + div_t[:, None] * e_t + div_p[:, None] * e_p


# -- serialization ------------------------------------------------------------------


def save_field(F: ShellTensorField, path, grid: SphereGrid | None = None) -> None:
    """Header line, JSON recipe line, then a CSV table of the unit-radius
    angular payload (frame components) for inspection and load-time checks."""
    grid = grid or SphereGrid(8, 16)
    one, tt = F.angular.sample(grid)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["theta", "phi", "a_theta", "a_phi", "T_thth", "T_thph"])
    th, ph = grid.mesh
    for row in zip(*(v.ravel() for v in (th, ph, one.theta, one.phi, tt.thth, tt.thph))):
        w.writerow([repr(float(v)) for v in row])
    meta = {"field": F.to_json(), "grid": [grid.n_theta, grid.n_phi]}
    Path(path).write_text(f"{FORMAT_HEADER}\n{json.dumps(meta, sort_keys=True)}\n{buf.getvalue()}")


def load_field(path, check: bool = True) -> ShellTensorField:
    text = Path(path).read_text().split("\n", 2)
    if text[0] != FORMAT_HEADER:
        raise ValueError(f"not a {FORMAT_HEADER} file")
    meta = json.loads(text[1])
    F = ShellTensorField.from_json(meta["field"])
    if check:
        grid = SphereGrid(*meta["grid"])
        one, tt = F.angular.sample(grid)
        rows = np.array(list(csv.reader(io.StringIO(text[2])))[1:], dtype=float)
        ref = np.stack([v.ravel() for v in (one.theta, one.phi, tt.thth, tt.thph)], -1)
        if not np.allclose(rows[:, 2:], ref, rtol=1e-10, atol=1e-12):
            raise ValueError("stored payload table does not match the recipe")
    return F
