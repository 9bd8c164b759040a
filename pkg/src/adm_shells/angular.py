"""Exact tangent-tensor algebra on the unit sphere.

Tangent fields are represented by their Cartesian components as sympy
expressions in the unit normal ``n = (n1, n2, n3)``; a value at ``x`` means
the value at ``x/|x|`` (degree-zero extension). The tangential derivative of
such a function is ``D_l f = (df/dn_k) (delta_kl - n_k n_l)``, which only
depends on the restriction to the sphere, so polynomial payloads can be
reduced modulo ``|n|^2 = 1`` after every step.

The same operators exist on a sampled grid in :mod:`adm_shells.sphere_ops`;
the two are checked against each other in the test suite.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
import sympy as sp

from ._jax import jax, jnp
from .sphere_ops import OneFormS2, PolynomialS2Function, SphereGrid, TTTensorS2

N_SYMS = sp.symbols("n1 n2 n3", real=True)
_N = sp.Matrix(N_SYMS)
_P = sp.eye(3) - _N * _N.T
_SPHERE = N_SYMS[0] ** 2 + N_SYMS[1] ** 2 + N_SYMS[2] ** 2 - 1

MAX_BUMP_DERIV = 6


# -- one-dimensional bump and its symbolic derivative chain ---------------


def _make_bump_classes():
    classes = []
    for k in range(MAX_BUMP_DERIV + 1):
        classes.append(type(f"B{k}", (sp.Function,), {"nargs": 1}))
    for k, cls in enumerate(classes):
        nxt = classes[k + 1] if k < MAX_BUMP_DERIV else None

        def fdiff(self, argindex=1, _nxt=nxt):
            if _nxt is None:
                raise ValueError("bump derivative order exceeded")
            return _nxt(self.args[0])

        cls.fdiff = fdiff
    return classes


BUMP_FUNCS = _make_bump_classes()


BUMP_SHARPNESS = 4.0


def bump1d(s):
    """exp(c - c/(1 - s^2)) on |s| < 1, zero elsewhere; peak value 1 at s = 0.

    c = 4 keeps the function well away from its flat edges, which makes
    Gauss-Legendre converge quickly on squared third derivatives.
    """
    c = BUMP_SHARPNESS
    inside = jnp.abs(s) < 1.0
    ss = jnp.where(inside, s, 0.0)
    return jnp.where(inside, jnp.exp(c - c / (1.0 - ss * ss)), 0.0)


def _bump_derivs():
    fns = [bump1d]
    for _ in range(MAX_BUMP_DERIV):
        fns.append(jax.jacfwd(fns[-1]))
    return fns


_BUMP_JAX = _bump_derivs()
_JAX_MODULE = {f"B{k}": f for k, f in enumerate(_BUMP_JAX)}
_JAX_MODULE.update({"atan2": jnp.arctan2, "acos": jnp.arccos, "sqrt": jnp.sqrt, "exp": jnp.exp})


# -- seeds ----------------------------------------------------------------


@dataclass(frozen=True)
class PolySeed:
    poly: PolynomialS2Function

    @property
    def gives_even_field(self) -> bool:
        # the antipodal map reverses the orientation of the sphere, so *du is
        # even exactly when u is odd
        return self.poly.is_odd

    def sympy(self):
        return sp.expand(
            sum(
                (sp.nsimplify(c, rational=True) * N_SYMS[0] ** a * N_SYMS[1] ** b * N_SYMS[2] ** e
                 for c, (a, b, e) in self.poly.terms),
                sp.Integer(0),
            )
        )

    def to_json(self) -> dict:
        return {"type": "poly", "terms": self.poly.to_list()}


@dataclass(frozen=True)
class BumpSeed:
    """Separable bump in (theta, phi) supported in a coordinate box."""

    theta: tuple[float, float] = (0.3, 1.2)
    phi: tuple[float, float] = (0.3, 1.2)

    def __post_init__(self):
        for lo, hi in (self.theta, self.phi):
            if not lo < hi:
                raise ValueError("empty bump box")

    @property
    def gives_even_field(self) -> bool:
        return False

    def in_first_octant(self) -> bool:
        (t0, t1), (p0, p1) = self.theta, self.phi
        return 0 < t0 and t1 < np.pi / 2 and 0 < p0 and p1 < np.pi / 2

    def sympy(self):
        (t0, t1), (p0, p1) = (tuple(sp.nsimplify(v) for v in b) for b in (self.theta, self.phi))
        theta = sp.acos(N_SYMS[2])
        phi = sp.atan2(N_SYMS[1], N_SYMS[0])
        B0 = BUMP_FUNCS[0]
        return B0((2 * theta - t0 - t1) / (t1 - t0)) * B0((2 * phi - p0 - p1) / (p1 - p0))

    def to_json(self) -> dict:
        return {"type": "bump", "theta": list(self.theta), "phi": list(self.phi)}


class ZeroSeed:
    """The zero function, handy for degenerate checks."""

    gives_even_field = True

    def __eq__(self, other):
        return isinstance(other, ZeroSeed)

    def __hash__(self):
        return hash("ZeroSeed")

    def sympy(self):
        return sp.Integer(0)

    def to_json(self) -> dict:
        return {"type": "zero"}


def seed_from_json(d: dict):
    t = d.get("type")
    if t == "poly":
        return PolySeed(PolynomialS2Function.from_dict(d["terms"]))
    if t == "bump":
        return BumpSeed(tuple(d["theta"]), tuple(d["phi"]))
    if t == "zero":
        return ZeroSeed()
    raise ValueError(f"unknown seed type {t!r}")


# -- symbolic operators ---------------------------------------------------


def _reduce(e):
    e = sp.expand(e)
    if e.is_polynomial(*N_SYMS) and e.has(N_SYMS[2]):
        e = sp.expand(sp.rem(e, _SPHERE, N_SYMS[2]))
    return e


def tangential_gradient(f) -> list:
    g = [sp.diff(f, nk) for nk in N_SYMS]
    return [_reduce(sum(g[k] * _P[k, l] for k in range(3))) for l in range(3)]


def op_grad(u) -> sp.Matrix:
    return sp.Matrix(tangential_gradient(u))


def op_star(a: sp.Matrix) -> sp.Matrix:
    # n x a: rotates e_theta into e_phi
    return _N.cross(a).applyfunc(_reduce)


def op_dstar(b: sp.Matrix) -> sp.Matrix:
    DB = sp.Matrix(3, 3, lambda i, l: tangential_gradient(b[i])[l])
    M = _P * DB * _P
    return ((M + M.T) / 2 - M.trace() / 2 * _P).applyfunc(_reduce)


def op_div(T: sp.Matrix) -> sp.Matrix:
    DT = [[tangential_gradient(T[i, j]) for j in range(3)] for i in range(3)]
    w = sp.Matrix(
        [sum(DT[k][j][l] * _P[j, l] for j in range(3) for l in range(3)) for k in range(3)]
    )
    return (_P * w).applyfunc(_reduce)


def _rotation_gradient(v):
    # dY[l, i] = d_i Y^l for Y = v x x
    return sp.Matrix(3, 3, lambda l, i: sum(sp.LeviCivita(l, m, i) * v[m] for m in range(3)))


def op_lie(F: sp.Matrix, axis) -> sp.Matrix:
    v = sp.Matrix([sp.nsimplify(a) for a in axis])
    Y = v.cross(_N)
    dY = _rotation_gradient(v)
    if F.shape == (3, 1):
        DF = [tangential_gradient(F[i]) for i in range(3)]
        out = sp.Matrix(
            [sum(Y[l] * DF[i][l] + F[l] * dY[l, i] for l in range(3)) for i in range(3)]
        )
    else:
        DF = [[tangential_gradient(F[i, j]) for j in range(3)] for i in range(3)]
        out = sp.Matrix(
            3,
            3,
            lambda i, j: sum(
                Y[l] * DF[i][j][l] + F[l, j] * dY[l, i] + F[i, l] * dY[l, j] for l in range(3)
            ),
        )
    return out.applyfunc(_reduce)


def _apply(ops: tuple, seed):
    val = seed.sympy()
    for op in ops:
        if op == "grad":
            val = op_grad(val)
        elif op == "star":
            val = op_star(val)
        elif op == "dstar":
            val = op_dstar(val)
        elif op == "div":
            val = op_div(val)
        elif isinstance(op, tuple) and op[0] == "lie":
            val = op_lie(val, op[1])
        else:
            raise ValueError(f"unknown angular op {op!r}")
    return val


TAU_OPS = ("grad", "star", "dstar")


@dataclass(frozen=True)
class AngularTensor:
    """Trace-free tangent tensor produced from a seed function by ``ops``."""

    seed: object
    ops: tuple = TAU_OPS

    def __post_init__(self):
        if not self.ops or not (self.ops[-1] in ("dstar",) or isinstance(self.ops[-1], tuple)):
            raise ValueError("angular payload must end in a tensor-valued op")

    @property
    def gives_even_field(self) -> bool:
        return self.seed.gives_even_field

    def lie(self, axis) -> "AngularTensor":
        axis = tuple(float(a) for a in axis)
        if abs(np.linalg.norm(axis) - 1.0) > 1e-12:
            raise ValueError("axis must be a unit vector")
        return AngularTensor(self.seed, self.ops + (("lie", axis),))

    def to_json(self) -> dict:
        return {
            "seed": self.seed.to_json(),
            "ops": [list(o) if isinstance(o, tuple) else o for o in self.ops],
        }

    @classmethod
    def from_json(cls, d: dict) -> "AngularTensor":
        ops = tuple(
            ("lie", tuple(o[1])) if isinstance(o, list) and o and o[0] == "lie" else o
            for o in d["ops"]
        )
        return cls(seed_from_json(d["seed"]), ops)

    # symbolic payload
    def symbolic(self):
        """``(kind, a, T)``: Cartesian matrices in ``n`` or frame components in (theta, phi)."""
        return _symbolic(self)

    def jax_payload(self):
        """Callable ``n -> (a, T)`` with ``a = -div T``; arrays of shape (3,), (3, 3)."""
        return _jax_payload(self)

    def sample(self, grid: SphereGrid) -> tuple[OneFormS2, TTTensorS2]:
        """Evaluate ``(-div T, T)`` on the grid nodes in frame components."""
        fn = jax.jit(jax.vmap(self.jax_payload()))
        n = grid.unit_vectors.reshape(-1, 3)
        a, T = fn(jnp.asarray(n))
        a = np.asarray(a).reshape(grid.shape + (3,))
        T = np.asarray(T).reshape(grid.shape + (3, 3))
        e_th, e_ph = grid.frame
        one = OneFormS2(grid, (a * e_th).sum(-1), (a * e_ph).sum(-1))
        return one, TTTensorS2.from_cartesian(grid, T)


TH, PH = sp.symbols("theta phi", real=True)


def _frame_apply(ops: tuple, u):
    """Same operators in the orthonormal (e_theta, e_phi) frame; fine away from the poles."""
    s, c = sp.sin(TH), sp.cos(TH)
    cot = c / s
    val = u
    for op in ops:
        if op == "grad":
            val = ("one", sp.diff(val, TH), sp.diff(val, PH) / s)
        elif op == "star":
            _, a_t, a_p = val
            val = ("one", -a_p, a_t)
        elif op == "dstar":
            _, e_t, e_p = val
            tt = sp.diff(e_t, TH)
            pp = sp.diff(e_p, PH) / s + cot * e_t
            tp = sp.diff(e_t, PH) / s - cot * e_p
            pt = sp.diff(e_p, TH)
            val = ("tt", (tt - pp) / 2, (tp + pt) / 2)
        else:
            raise ValueError(f"op {op!r} is not available for bump seeds")
    return val


def _frame_div(tt, tp):
    s, c = sp.sin(TH), sp.cos(TH)
    cot = c / s
    d_t = sp.diff(tt, TH) + sp.diff(tp, PH) / s + 2 * cot * tt
    d_p = sp.diff(tp, TH) - sp.diff(tt, PH) / s + 2 * cot * tp
    return d_t, d_p


@lru_cache(maxsize=None)
def _symbolic(at: AngularTensor):
    if isinstance(at.seed, BumpSeed):
        (t0, t1), (p0, p1) = (tuple(sp.nsimplify(v) for v in b) for b in (at.seed.theta, at.seed.phi))
        B0 = BUMP_FUNCS[0]
        u = B0((2 * TH - t0 - t1) / (t1 - t0)) * B0((2 * PH - p0 - p1) / (p1 - p0))
        kind, tt, tp = _frame_apply(at.ops, u)
        if kind != "tt":
            raise ValueError("angular payload must end in a tensor-valued op")
        d_t, d_p = _frame_div(tt, tp)
        return "frame", (-d_t, -d_p), (tt, tp)
    T = _apply(at.ops, at.seed)
    if not isinstance(T, sp.Matrix):
        T = sp.zeros(3, 3)
    a = -op_div(T)
    return "cart", a, T


def _as_f64(c, like):
    return jnp.asarray(c, dtype=jnp.float64) + 0.0 * like


@lru_cache(maxsize=None)
def _jax_payload(at: AngularTensor):
    kind, a, T = _symbolic(at)
    if kind == "frame":
        f = sp.lambdify([TH, PH], [list(a), list(T)], modules=[_JAX_MODULE, "jax"], cse=True)

        def payload(n):
            z = jnp.clip(n[2], -1.0 + 1e-15, 1.0 - 1e-15)
            th = jnp.arccos(z)
            rho = jnp.sqrt(n[0] ** 2 + n[1] ** 2)
            ph = jnp.arctan2(n[1], jnp.where(rho > 0, n[0], 1.0))
            (a_t, a_p), (tt, tp) = f(th, ph)
            e_t = jnp.stack([jnp.cos(th) * jnp.cos(ph), jnp.cos(th) * jnp.sin(ph), -jnp.sin(th)])
            e_p = jnp.stack([-jnp.sin(ph), jnp.cos(ph), 0.0 * ph])
            av = _as_f64(a_t, th) * e_t + _as_f64(a_p, th) * e_p
            Tv = _as_f64(tt, th) * (jnp.outer(e_t, e_t) - jnp.outer(e_p, e_p)) + _as_f64(
                tp, th
            ) * (jnp.outer(e_t, e_p) + jnp.outer(e_p, e_t))
            return av, Tv

        return payload
    return _cart_payload(a, T)


def _cart_payload(a, T):
    f = sp.lambdify([N_SYMS], [list(a), T.tolist()], modules=[_JAX_MODULE, "jax"], cse=True)

    def payload(n):
        av, Tv = f(n)
        av = jnp.stack([_as_f64(c, n[0]) for c in av])
        Tv = jnp.stack([jnp.stack([_as_f64(c, n[0]) for c in row]) for row in Tv])
        return av, Tv

    return payload


def scalar_function(seed):
    """Jax callable for the degree-zero extension of ``seed`` (used for seeds' own checks)."""
    expr = seed.sympy()
    f = sp.lambdify([N_SYMS], expr, modules=[_JAX_MODULE, "jax"])
    return lambda x: jnp.asarray(f(x / jnp.linalg.norm(x)), dtype=jnp.float64) + 0.0 * x[0]


def lie_oneform_payload(at: AngularTensor, axis):
    """Callable ``n -> (L_Y a, L_Y T)`` for the factorized moment cross-check."""
    kind, a, T = _symbolic(at)
    if kind != "cart":
        raise ValueError("Lie payload needs a polynomial seed")
    axis = tuple(float(v) for v in axis)
    return _cart_payload(op_lie(a, axis), op_lie(T, axis))
