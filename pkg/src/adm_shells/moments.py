"""Shell moment functionals and the rotation/scaling moves that prescribe them.

angular moment   T(v) = int [ 1/2 tau_ij,l Y^l + tau_il Y^l_,j ] sigma_ij dx,  Y = v x x
cm moment        T(v) = int (x . v) sum (sigma_ij,k)^2 dx

Both are evaluated with a product rule: Gauss-Legendre in r over the common
profile support and an angular rule attached to the seed (Fejer x uniform for
polynomial seeds, Gauss-Legendre on the (theta, phi) box for bump seeds). The
nodes move with the field: they are scaled by k and rotated by the field's
rotation, which makes scale and rotation identities hold to round-off.

Rotations act by push-forward, ``F'(x) = R F(R^T x) R^T``; under it the moment
vector transforms as ``t' = R t`` (cm moments likewise).
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from ._jax import batched, jax, jnp
from .angular import BumpSeed
from .shell_fields import ShellTensorField, _kernel, eval_cartesian, field_function
from .sphere_ops import fejer_weights


class DegenerateSeed(ValueError):
    pass


class HypothesisViolation(RuntimeError):
    pass


class FixedPointError(RuntimeError):
    def __init__(self, msg, best=None, history=None):
        super().__init__(msg)
        self.best = best
        self.history = history or []


# -- rotations ------------------------------------------------------------------


@dataclass(frozen=True)
class Rotation:
    matrix: tuple

    def __post_init__(self):
        R = np.asarray(self.matrix, dtype=float)
        if R.shape != (3, 3):
            raise ValueError("rotation must be 3x3")
        if np.abs(R.T @ R - np.eye(3)).max() > 1e-12 or abs(np.linalg.det(R) - 1) > 1e-12:
            raise ValueError("not a proper rotation")

    @classmethod
    def of(cls, R) -> "Rotation":
        R = np.asarray(R, dtype=float)
        return cls(tuple(tuple(float(v) for v in row) for row in R))

    @property
    def R(self) -> np.ndarray:
        return np.asarray(self.matrix, dtype=float)

    @classmethod
    def about(cls, axis, angle: float) -> "Rotation":
        axis = np.asarray(axis, dtype=float)
        axis = axis / np.linalg.norm(axis)
        K = np.array([[0, -axis[2], axis[1]], [axis[2], 0, -axis[0]], [-axis[1], axis[0], 0]])
        R = np.eye(3) + np.sin(angle) * K + (1 - np.cos(angle)) * K @ K
        return cls.of(_reorthonormalize(R))

    @classmethod
    def aligning(cls, a, b) -> "Rotation":
        """Rotation taking the direction of ``a`` to the direction of ``b``."""
        a = np.asarray(a, dtype=float)
        b = np.asarray(b, dtype=float)
        a = a / np.linalg.norm(a)
        b = b / np.linalg.norm(b)
        axis = np.cross(a, b)
        s, c = np.linalg.norm(axis), float(a @ b)
        if s < 1e-14:
            if c > 0:
                return cls.of(np.eye(3))
            # antiparallel: half turn about the least-index axis not parallel to a
            for e in np.eye(3):
                w = e - (e @ a) * a
                if np.linalg.norm(w) > 1e-8:
                    return cls.about(w, np.pi)
        return cls.about(axis, np.arctan2(s, c))

    @classmethod
    def random(cls, rng: np.random.Generator) -> "Rotation":
        q = rng.normal(size=4)
        q /= np.linalg.norm(q)
        w, x, y, z = q
        R = np.array(
            [
                [1 - 2 * (y * y + z * z), 2 * (x * y - z * w), 2 * (x * z + y * w)],
                [2 * (x * y + z * w), 1 - 2 * (x * x + z * z), 2 * (y * z - x * w)],
                [2 * (x * z - y * w), 2 * (y * z + x * w), 1 - 2 * (x * x + y * y)],
            ]
        )
        return cls.of(_reorthonormalize(R))


def _reorthonormalize(R):
    u, _, vt = np.linalg.svd(R)
    return u @ vt


def rotate_pullback(F: ShellTensorField, R) -> ShellTensorField:
    """``R F(R^T x) R^T``."""
    R = R if isinstance(R, Rotation) else Rotation.of(R)
    return F.rotated(R.R)


# -- quadrature -------------------------------------------------------------------


@dataclass(frozen=True)
class MomentVector:
    values: np.ndarray
    resolution: tuple
    error: float
    kind: str = "angular"
    meta: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        return {
            "kind": self.kind,
            "values": [float(v) for v in self.values],
            "resolution": list(self.resolution),
            "error": float(self.error),
            **self.meta,
        }


LOW = (48, 24, 48)
HIGH = (64, 32, 64)
BUMP_LOW = (40, 64, 64)
BUMP_HIGH = (48, 80, 80)


def _angular_rule(seed, n_theta: int, n_phi: int):
    if isinstance(seed, BumpSeed):
        (t0, t1), (p0, p1) = seed.theta, seed.phi
        xt, wt = np.polynomial.legendre.leggauss(n_theta)
        xp, wp = np.polynomial.legendre.leggauss(n_phi)
        th = 0.5 * (t1 + t0) + 0.5 * (t1 - t0) * xt
        ph = 0.5 * (p1 + p0) + 0.5 * (p1 - p0) * xp
        wt = wt * 0.5 * (t1 - t0) * np.sin(th)
        wp = wp * 0.5 * (p1 - p0)
    else:
        th = (np.arange(n_theta) + 0.5) * np.pi / n_theta
        wt = fejer_weights(n_theta)
        ph = 2 * np.pi * np.arange(n_phi) / n_phi
        wp = np.full(n_phi, 2 * np.pi / n_phi)
    T, P = np.meshgrid(th, ph, indexing="ij")
    n = np.stack([np.sin(T) * np.cos(P), np.sin(T) * np.sin(P), np.cos(T)], -1).reshape(-1, 3)
    return n, np.outer(wt, wp).ravel()


def shell_quadrature(fields, resolution=None):
    """Nodes and weights for integrals over the common support of ``fields``."""
    fields = list(fields)
    ks = {f.k for f in fields}
    if len(ks) != 1:
        raise ValueError("fields live on different shells")
    k = ks.pop()
    rots = {f.rotation for f in fields}
    R = fields[0].R if len(rots) == 1 else np.eye(3)
    seeds = [f.angular.seed for f in fields]
    bump = next((s for s in seeds if isinstance(s, BumpSeed)), None)
    if resolution is None:
        resolution = BUMP_HIGH if bump is not None else HIGH
    n_r, n_t, n_p = resolution
    if bump is not None and len(rots) != 1:
        raise ValueError("bump-seeded fields must share their rotation")
    n, w_ang = _angular_rule(bump if bump is not None else seeds[0], n_t, n_p)
    a = max(f.profile.a for f in fields)
    b = min(f.profile.b for f in fields)
    if a >= b:
        return np.zeros((0, 3)), np.zeros(0)
    xr, wr = np.polynomial.legendre.leggauss(n_r)
    r = 0.5 * (a + b) + 0.5 * (b - a) * xr
    wr = wr * 0.5 * (b - a) * r * r
    pts = (r[:, None, None] * n[None, :, :]).reshape(-1, 3) * k
    w = (wr[:, None] * w_ang[None, :]).ravel() * k**3
    return pts @ R.T, w


def _sum(v):
    # numpy's pairwise summation; deterministic for fixed shapes
    return float(np.sum(v))


def _dY():
    # dY[v][l, j] = d_j (v x x)^l
    eps = np.zeros((3, 3, 3))
    for i, j, k in [(0, 1, 2), (1, 2, 0), (2, 0, 1)]:
        eps[i, j, k], eps[i, k, j] = 1.0, -1.0
    return np.einsum("lmj,vm->vlj", eps, np.eye(3))


_DY = _dY()


def _angular_integrands(sigma, tau, pts):
    t, dt = eval_cartesian(tau, pts, 1)
    s = eval_cartesian(sigma, pts, 0)
    out = []
    for v in range(3):
        Y = np.cross(np.eye(3)[v], pts)
        integ = 0.5 * np.einsum("nijl,nl,nij->n", dt, Y, s) + np.einsum("nil,lj,nij->n", t, _DY[v], s)
        out.append(integ)
    return np.stack(out, 0)


def _angular_values(sigma, tau, resolution):
    pts, w = shell_quadrature([sigma, tau], resolution)
    if len(w) == 0:
        return np.zeros(3)
    I = _angular_integrands(sigma, tau, pts)
    return np.array([_sum(I[v] * w) for v in range(3)])


def angular_moments(sigma, tau, low=None, high=None) -> MomentVector:
    """``(T(e1), T(e2), T(e3))`` with a two-resolution error estimate."""
    bump = any(isinstance(f.angular.seed, BumpSeed) for f in (sigma, tau))
    low = low or (BUMP_LOW if bump else LOW)
    high = high or (BUMP_HIGH if bump else HIGH)
    lo = _angular_values(sigma, tau, low)
    hi = _angular_values(sigma, tau, high)
    return MomentVector(hi, tuple(high), float(np.max(np.abs(hi - lo))), "angular")


def angular_moment(sigma, tau, v, resolution=None) -> float:
    """Moment along an arbitrary vector (linear in v)."""
    return float(_angular_values(sigma, tau, resolution) @ np.asarray(v, dtype=float))


def _cm_values(sigma, resolution):
    pts, w = shell_quadrature([sigma], resolution)
    if len(w) == 0:
        return np.zeros(3)
    _, ds = eval_cartesian(sigma, pts, 1)
    sq = np.einsum("nijk,nijk->n", ds, ds)
    return np.array([_sum(pts[:, p] * sq * w) for p in range(3)])


def cm_moments(sigma, low=None, high=None) -> MomentVector:
    bump = isinstance(sigma.angular.seed, BumpSeed)
    low = low or (BUMP_LOW if bump else LOW)
    high = high or (BUMP_HIGH if bump else HIGH)
    lo = _cm_values(sigma, low)
    hi = _cm_values(sigma, high)
    return MomentVector(hi, tuple(high), float(np.max(np.abs(hi - lo))), "cm")


def cm_moment(sigma, v, resolution=None) -> float:
    return float(_cm_values(sigma, resolution) @ np.asarray(v, dtype=float))


# -- independent evaluations ---------------------------------------------------------


def lie_derivative(F: ShellTensorField, v, x) -> np.ndarray:
    """Lie derivative of F along ``v x x`` by differentiating the rotated field
    ``exp(t V)^T F(exp(t V) x) exp(t V)`` at t = 0."""
    v = np.asarray(v, dtype=float)
    v = jnp.asarray(v / np.linalg.norm(v))
    V = jnp.array([[0.0, -v[2], v[1]], [v[2], 0.0, -v[0]], [-v[1], v[0], 0.0]])
    f = field_function(F.static_key)
    R, c, k, w = F.params()

    def rotated(t, x):
        Rt = jnp.eye(3) + jnp.sin(t) * V + (1.0 - jnp.cos(t)) * (V @ V)
        return f(x, (Rt.T @ R, c, k, w))

    def one(x):
        return jax.jvp(lambda t: rotated(t, x), (0.0,), (1.0,))[1]

    return batched(jax.jit(jax.vmap(one)), np.asarray(x, dtype=float).reshape(-1, 3))


def angular_moments_lie(sigma, tau, resolution=None) -> np.ndarray:
    """``1/2 int (L_Y tau)_ij sigma_ij`` for Y = e_p x x."""
    pts, w = shell_quadrature([sigma, tau], resolution)
    s = eval_cartesian(sigma, pts)
    out = []
    for v in np.eye(3):
        L = lie_derivative(tau, v, pts)
        out.append(_sum(0.5 * np.einsum("nij,nij->n", L, s) * w))
    return np.array(out)


def angular_moments_factorized(sigma, tau, n_r: int = 64, n_theta: int = 32) -> np.ndarray:
    """Radial x angular product form for unrotated unit-amplitude polynomial pairs:

    T(v) = (int p q dr) int_S (L_Y a).eta  +  (int 1/2 P Q r^-2 dr) int_S (L_Y T):S
    with P = 2 r (r p)', Q = (r^2 q)' and the Lie derivatives taken on the sphere.
    """
    from .angular import _cart_payload, _symbolic, op_lie

    if tau.ansatz != "tau" or sigma.ansatz != "sigma":
        raise ValueError("expects (sigma-ansatz, tau-ansatz) fields")
    p, q = sigma.profile, tau.profile
    a_, b_ = max(p.a, q.a), min(p.b, q.b)
    xr, wr = np.polynomial.legendre.leggauss(n_r)
    r = 0.5 * (a_ + b_) + 0.5 * (b_ - a_) * xr
    wr = wr * 0.5 * (b_ - a_)
    pv, dpv = p.derivs(r, 1)
    qv, dqv = q.derivs(r, 1)
    P = 2 * r * (pv + r * dpv)
    Q = 2 * r * qv + r * r * dqv
    I1 = float(np.sum(pv * qv * wr))
    I2 = float(np.sum(0.5 * P * Q / r**2 * wr))
    n, wa = _angular_rule(None, n_theta, 2 * n_theta)
    _, eta, S = _symbolic(sigma.angular)
    _, a, T = _symbolic(tau.angular)
    sig_pl = jax.vmap(_cart_payload(eta, S))
    e_v, S_v = (np.asarray(o) for o in sig_pl(jnp.asarray(n)))
    out = []
    for v in np.eye(3):
        fn = jax.vmap(_cart_payload(op_lie(a, tuple(v)), op_lie(T, tuple(v))))
        la, lT = (np.asarray(o) for o in fn(jnp.asarray(n)))
        A1 = np.sum(np.einsum("ni,ni->n", la, e_v) * wa)
        A2 = np.sum(np.einsum("nij,nij->n", lT, S_v) * wa)
        out.append(I1 * A1 + I2 * A2)
    scale = sigma.amplitude * tau.amplitude
    return scale * np.array(out)


# -- prescribing moments --------------------------------------------------------------


def _unresolved(mv: MomentVector) -> bool:
    """True when the moment is not distinguishable from zero at quadrature accuracy."""
    size = float(np.linalg.norm(mv.values))
    return size == 0.0 or size <= 10.0 * mv.error


def target_angular(sigma, tau, lam, base: MomentVector | None = None):
    """Rotate both fields and rescale tau so the angular moment vector equals ``lam``."""
    lam = np.asarray(lam, dtype=float)
    if np.linalg.norm(lam) == 0:
        raise ValueError("target must be nonzero; compose two shells for a zero target")
    base = base or angular_moments(sigma, tau)
    t = base.values
    if _unresolved(base):
        raise DegenerateSeed("base angular moment vanishes; choose a different seed u")
    R = Rotation.aligning(t, lam)
    c = np.linalg.norm(lam) / np.linalg.norm(t)
    return rotate_pullback(sigma, R), rotate_pullback(tau, R).times(c)


def target_cm(sigma, beta, base: MomentVector | None = None):
    beta = np.asarray(beta, dtype=float)
    if np.linalg.norm(beta) == 0:
        raise ValueError("target must be nonzero; compose two shells for a zero target")
    base = base or cm_moments(sigma)
    t = base.values
    if _unresolved(base):
        raise DegenerateSeed("base cm moment vanishes; the seed must be one-sided")
    R = Rotation.aligning(t, beta)
    c = np.linalg.norm(beta) / np.linalg.norm(t)
    return rotate_pullback(sigma, R).times(np.sqrt(c))


def balance_pair(sigma, tau, n: int = 400):
    """Rescale ``(s sigma, tau / s)`` so both have the same sup norm; moments unchanged."""
    from .shell_fields import shell_points

    ms = np.abs(eval_cartesian(sigma, shell_points(sigma, n, 3))).max()
    mt = np.abs(eval_cartesian(tau, shell_points(tau, n, 3))).max()
    s = np.sqrt(mt / ms)
    return sigma.times(s), tau.times(1.0 / s)


def continuous_selection(alpha, base, alpha0):
    """Pair for target ``alpha`` from a pair solving the problem for ``alpha0``."""
    alpha = np.asarray(alpha, dtype=float)
    alpha0 = np.asarray(alpha0, dtype=float)
    if np.linalg.norm(alpha) == 0 or np.linalg.norm(alpha0) == 0:
        raise ValueError("selection needs nonzero vectors")
    sigma, tau = base
    R1 = Rotation.aligning(alpha0, alpha)
    s = np.sqrt(np.linalg.norm(alpha) / np.linalg.norm(alpha0))
    return rotate_pullback(sigma, R1).times(s), rotate_pullback(tau, R1).times(s)


def selection_lipschitz_check(alpha, base, alpha0, n: int = 200, seed: int = 0) -> dict:
    """Sampled check of |F' - F| <= |alpha - alpha0| (|F|/(2|alpha0|) + 3/2 |DF|)."""
    from .shell_fields import shell_points

    alpha = np.asarray(alpha, dtype=float)
    alpha0 = np.asarray(alpha0, dtype=float)
    new = continuous_selection(alpha, base, alpha0)
    d = np.linalg.norm(alpha - alpha0)
    worst = 0.0
    for F, G in zip(base, new):
        x = shell_points(F, n, seed)
        v, dv = eval_cartesian(F, x, 1)
        lhs = np.linalg.norm((eval_cartesian(G, x) - v).reshape(len(x), -1), axis=1)
        rhs = d * (
            np.linalg.norm(v.reshape(len(x), -1), axis=1) / (2 * np.linalg.norm(alpha0))
            + 1.5 * np.linalg.norm(dv.reshape(len(x), -1), axis=1)
        )
        worst = max(worst, float(np.max(lhs - rhs)))
    return {"distance": float(d), "max_excess": worst, "ok": worst <= 1e-12}


# -- fixed point driver --------------------------------------------------------------


@dataclass
class FixedPointResult:
    z: np.ndarray
    iterations: int
    residual: float
    history: list


def fixed_point_target(
    f: Callable,
    z0,
    a: float,
    tol: float = 1e-4,
    max_iter: int = 50,
    omega: float = 1.0,
    min_omega: float = 1e-3,
) -> FixedPointResult:
    """Find z with f(z) = z0 by ``z <- z - omega (f(z) - z0)``.

    Every queried point must satisfy ``|f(z) - z| <= a``; otherwise the
    existence argument does not apply and HypothesisViolation is raised.
    ``iterations`` counts evaluations of ``f``.
    """
    z0 = np.asarray(z0, dtype=float)
    z = z0.copy()
    history = []

    def query(z):
        fz = np.asarray(f(z), dtype=float)
        gap = float(np.linalg.norm(fz - z))
        res = float(np.linalg.norm(fz - z0))
        history.append({"z": z.tolist(), "f": fz.tolist(), "gap": gap, "residual": res, "omega": omega})
        if gap > a:
            raise HypothesisViolation(f"|f(z) - z| = {gap:.3e} exceeds a = {a:.3e} at z = {z.tolist()}")
        return fz, res

    fz, res = query(z)
    best = (res, z.copy())
    while res > tol:
        if len(history) >= max_iter:
            raise FixedPointError(
                f"no convergence in {max_iter} evaluations (best residual {best[0]:.3e})",
                best=best[1],
                history=history,
            )
        trial = z - omega * (fz - z0)
        ft, rt = query(trial)
        if rt > res and omega > min_omega:
            omega *= 0.5
            continue
        z, fz, res = trial, ft, rt
        if res < best[0]:
            best = (res, z.copy())
    return FixedPointResult(z, len(history), res, history)
