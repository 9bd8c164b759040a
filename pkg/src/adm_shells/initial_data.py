"""Initial data ``(g, pi)`` composed from analytic pieces.

    g(y)  = u^4 (delta + sum h_a)(x)
    pi(y) = lam^-1 u^2 (sum pi_b + L_ghat X)(x),     x = y / lam

``h_a`` are metric parts (Schwarzschild, shells, ...), ``pi_b`` momentum
parts, ``u`` an optional conformal factor, ``X`` an optional shift one-form
and ``lam`` a chart rescaling. Every built-in piece is a jax function of
``(x, params)`` keyed by a hashable static description, so composite
kernels compile once per structure and are reused when only parameters
change. Derivatives come from forward-mode autodiff; data wrapping plain
numpy callables uses 4th-order centered differences with ``h = 1e-3 |x|``.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from functools import lru_cache
from typing import Callable

import numpy as np

from ._jax import batched, jax, jnp
from .geometry import conformal_killing
from .harmonics import RadialSHField, sh_function
from .shell_fields import ShellTensorField, field_function


class SingularMetric(ValueError):
    pass


# -- parts ------------------------------------------------------------------------


@dataclass(frozen=True)
class SchwarzschildPart:
    """``(psi^4 - 1) delta`` with ``psi = 1 + m / (2 |x - c|)``."""

    m: float
    center: tuple = (0.0, 0.0, 0.0)
    role = "metric"

    def __post_init__(self):
        if self.m <= 0:
            raise ValueError("mass must be positive")

    @property
    def static(self):
        return ("schw",)

    def params(self):
        return (jnp.asarray(float(self.m)), jnp.asarray(np.asarray(self.center, dtype=float)))


@dataclass(frozen=True)
class ShellPart:
    field: ShellTensorField

    @property
    def role(self):
        return self.field.kind

    @property
    def static(self):
        return ("shell", self.field.static_key)

    def params(self):
        return self.field.params()


@dataclass(frozen=True)
class BowenYorkPart:
    """Flat-space transverse traceless momentum with prescribed J (``angular``) or P (``linear``)."""

    mode: str
    vector: tuple
    center: tuple = (0.0, 0.0, 0.0)
    role = "momentum"

    def __post_init__(self):
        if self.mode not in ("angular", "linear"):
            raise ValueError("mode is 'angular' or 'linear'")

    @property
    def static(self):
        return ("by", self.mode)

    def params(self):
        return (
            jnp.asarray(np.asarray(self.vector, dtype=float)),
            jnp.asarray(np.asarray(self.center, dtype=float)),
        )

    def __call__(self, x) -> np.ndarray:
        k = jax.jit(jax.vmap(_part_fn(self.static), in_axes=(0, None)))
        return batched(k, np.asarray(x, dtype=float).reshape(-1, 3), args=(self.params(),))


@dataclass(frozen=True)
class ConformalPart:
    """``u = 1 + v / psi_b`` with ``v`` a harmonic expansion and ``psi_b`` the
    background factor of the listed point masses (1 if none)."""

    v: RadialSHField
    masses: tuple = ()
    role = "conformal"

    @property
    def static(self):
        return ("conf", self.v.static, len(self.masses))

    def params(self):
        M = np.array([[m, *c] for m, c in self.masses], dtype=float).reshape(-1, 4)
        return (self.v.params(), jnp.asarray(M))


@dataclass(frozen=True)
class ShiftPart:
    X: RadialSHField
    role = "shift"

    @property
    def static(self):
        return ("shift", self.X.static)

    def params(self):
        return self.X.params()


@dataclass(frozen=True, eq=False)
class CallablePart:
    """User-supplied numpy evaluators ``metric(x) -> [N,3,3]``, ``momentum(x) -> [N,3,3]``."""

    metric: Callable | None = None
    momentum: Callable | None = None
    role = "callable"

    @property
    def static(self):
        return ("callable", id(self))

    def params(self):
        return ()


def _schw_psi(x, m, c):
    return 1.0 + m / (2.0 * jnp.linalg.norm(x - c))


def _part_fn(static):
    tag = static[0]
    if tag == "schw":
        return lambda x, p: (_schw_psi(x, *p) ** 4 - 1.0) * jnp.eye(3)
    if tag == "shell":
        return field_function(static[1])
    if tag == "by":
        return _by_angular if static[1] == "angular" else _by_linear
    raise ValueError(f"no tensor function for {tag!r}")


def _by_angular(x, p):
    J, c = p
    y = x - c
    r = jnp.linalg.norm(y)
    n = y / r
    w = jnp.cross(J, n)  # w_i = eps_ikl J^k n^l
    return 3.0 / r**3 * (jnp.outer(n, w) + jnp.outer(w, n))


def _by_linear(x, p):
    P, c = p
    y = x - c
    r = jnp.linalg.norm(y)
    n = y / r
    return 1.5 / r**2 * (jnp.outer(P, n) + jnp.outer(n, P) - (jnp.eye(3) - jnp.outer(n, n)) * (P @ n))


def _conformal_fn(static):
    _, vstatic, nm = static
    vf = sh_function(vstatic)

    def u(x, p):
        vp, M = p
        psi = 1.0
        for a in range(nm):
            psi = psi + M[a, 0] / (2.0 * jnp.linalg.norm(x - M[a, 1:]))
        return 1.0 + vf(x, vp)[0] / psi

    return u


# -- data ----------------------------------------------------------------------------


@dataclass(frozen=True)
class InitialData:
    parts: tuple = ()
    scale: float = 1.0
    inner_radius: float = 0.0
    derivs: str = "auto"
    decay: tuple = (1.0, 2.0)  # |g - delta| = O(r^-1), |pi| = O(r^-2)

    def __post_init__(self):
        roles = [p.role for p in self.parts]
        if roles.count("conformal") > 1 or roles.count("shift") > 1:
            raise ValueError("at most one conformal factor and one shift")
        if "callable" in roles and self.derivs != "fd":
            object.__setattr__(self, "derivs", "fd")
        if self.scale <= 0:
            raise ValueError("scale must be positive")

    # structure ----------------------------------------------------------------
    @property
    def signature(self) -> tuple:
        return tuple((p.role, p.static) for p in self.parts)

    def params(self):
        return (tuple(p.params() for p in self.parts), jnp.asarray(float(self.scale)))

    def with_parts(self, *extra) -> "InitialData":
        return replace(self, parts=self.parts + tuple(extra))

    def parts_of(self, role: str) -> list:
        return [p for p in self.parts if p.role == role]

    @property
    def background_masses(self) -> tuple:
        return tuple((p.m, tuple(p.center)) for p in self.parts if isinstance(p, SchwarzschildPart))

    # evaluation ---------------------------------------------------------------
    def _callable(self):
        cps = self.parts_of("callable")
        return cps[0] if cps else None

    def _pts(self, x):
        x = _points(x, self.inner_radius)
        for p in self.parts:
            c = getattr(p, "center", None)
            if c is not None and np.any(np.all(x == np.asarray(c, dtype=float), axis=1)):
                raise ValueError("evaluation at a puncture")
        return x

    def metric(self, x) -> np.ndarray:
        x = self._pts(x)
        cp = self._callable()
        if cp is not None:
            return _callable_sum(self, x, "metric")
        return batched(_values_kernel(self.signature, "g"), x, args=(self.params(),))

    def momentum(self, x) -> np.ndarray:
        x = self._pts(x)
        cp = self._callable()
        if cp is not None:
            return _callable_sum(self, x, "momentum")
        return batched(_values_kernel(self.signature, "pi"), x, args=(self.params(),))

    def metric_derivs(self, x, order: int = 2):
        x = self._pts(x)
        if self.derivs == "fd":
            return fd_derivs(self.metric, x, order)
        return batched(_deriv_kernel(self.signature, "g", order), x, args=(self.params(),))

    def momentum_derivs(self, x, order: int = 1):
        x = self._pts(x)
        if self.derivs == "fd":
            return fd_derivs(self.momentum, x, order)
        return batched(_deriv_kernel(self.signature, "pi", order), x, args=(self.params(),))

    def check_decay(self, radii=(10.0, 30.0, 100.0, 300.0), n: int = 64, seed: int = 0) -> dict:
        """Sampled ``max |g - delta| r`` and ``max |pi| r^2`` over a log-spaced radius set."""
        rng = np.random.default_rng(seed)
        d = rng.normal(size=(n, 3))
        d /= np.linalg.norm(d, axis=1, keepdims=True)
        out = {"radii": list(radii), "metric": [], "momentum": []}
        for r in radii:
            x = d * r
            out["metric"].append(float(np.abs(self.metric(x) - np.eye(3)).max() * r ** self.decay[0]))
            out["momentum"].append(float(np.abs(self.momentum(x)).max() * r ** self.decay[1]))
        return out


def _points(x, inner):
    x = np.asarray(x, dtype=float).reshape(-1, 3)
    r = np.linalg.norm(x, axis=1)
    if np.any(r <= inner) or np.any(r == 0):
        raise ValueError(f"evaluation point inside the excluded radius {inner}")
    return x


def _callable_sum(data, y, what):
    base = np.eye(3) if what == "metric" else np.zeros((3, 3))
    x = y / data.scale
    out = np.zeros((len(x), 3, 3)) + base
    for p in data.parts:
        if p.role in ("conformal", "shift"):
            raise ValueError("callable data cannot carry conformal or shift parts")
        if p.role == "callable":
            fn = getattr(p, what)
            if fn is not None:
                out = out + np.asarray(fn(x), dtype=float) - base
        elif p.role == what:
            k = jax.jit(jax.vmap(_part_fn(p.static), in_axes=(0, None)))
            out = out + batched(k, x, args=(p.params(),))
    return out if what == "metric" else out / data.scale


@lru_cache(maxsize=None)
def composite(signature):
    """``(g, pi)`` jax functions of ``(y, params)`` for a part signature."""
    fns = []
    for role, static in signature:
        if role in ("metric", "momentum"):
            fns.append(_part_fn(static))
        elif role == "conformal":
            fns.append(_conformal_fn(static))
        elif role == "shift":
            sf = sh_function(static[1])
            fns.append(lambda x, p, sf=sf: sf(x, p))
        else:
            raise ValueError("callable parts have no jax form")
    roles = [r for r, _ in signature]

    def ghat(x, P):
        out = jnp.eye(3)
        for role, f, p in zip(roles, fns, P):
            if role == "metric":
                out = out + f(x, p)
        return out

    def conformal(x, P):
        for role, f, p in zip(roles, fns, P):
            if role == "conformal":
                return f(x, p)
        return 1.0

    def g(y, params):
        P, lam = params
        x = y / lam
        return conformal(x, P) ** 4 * ghat(x, P)

    def pi(y, params):
        P, lam = params
        x = y / lam
        out = jnp.zeros((3, 3))
        for role, f, p in zip(roles, fns, P):
            if role == "momentum":
                out = out + f(x, p)
            elif role == "shift":
                X = f(x, p)
                dX = jax.jacfwd(f)(x, p)
                G = ghat(x, P)
                dG = jax.jacfwd(ghat)(x, P)
                out = out + conformal_killing(G, dG, X, dX, jnp)
        return conformal(x, P) ** 2 * out / lam

    return g, pi


@lru_cache(maxsize=None)
def _values_kernel(signature, what):
    g, pi = composite(signature)
    f = g if what == "g" else pi
    return jax.jit(jax.vmap(f, in_axes=(0, None)))


@lru_cache(maxsize=None)
def _deriv_kernel(signature, what, order):
    g, pi = composite(signature)
    f = g if what == "g" else pi

    def one(x, params):
        out = [f(x, params), jax.jacfwd(f)(x, params)]
        if order >= 2:
            out.append(jax.jacfwd(jax.jacfwd(f))(x, params))
        return tuple(out)

    return jax.jit(jax.vmap(one, in_axes=(0, None)))


_D1 = ((-2, 1.0 / 12), (-1, -8.0 / 12), (1, 8.0 / 12), (2, -1.0 / 12))


def fd_derivs(fn, x, order: int = 2, rel_step: float = 1e-3):
    """Values and 4th-order centered differences with step ``rel_step * |x|``."""
    x = np.asarray(x, dtype=float).reshape(-1, 3)
    h = rel_step * np.linalg.norm(x, axis=1)
    E = np.eye(3)
    v = fn(x)
    d1 = np.zeros(v.shape + (3,))
    for l in range(3):
        for s, w in _D1:
            d1[..., l] += w * fn(x + s * h[:, None] * E[l]) / h[:, None, None]
    if order < 2:
        return v, d1
    d2 = np.zeros(v.shape + (3, 3))
    for l in range(3):
        for m in range(l, 3):
            acc = 0.0
            for s, w in _D1:
                for t, u in _D1:
                    acc = acc + w * u * fn(x + (s * E[l] + t * E[m]) * h[:, None])
            acc = acc / (h * h)[:, None, None]
            d2[..., l, m] = acc
            d2[..., m, l] = acc
    return v, d1, d2


# -- convenience builders ---------------------------------------------------------------


def flat_data() -> InitialData:
    return InitialData(())


def data_from_callables(metric=None, momentum=None, inner_radius: float = 0.0) -> InitialData:
    return InitialData((CallablePart(metric, momentum),), inner_radius=inner_radius, derivs="fd")


def with_shells(data: InitialData, *fields: ShellTensorField) -> InitialData:
    return data.with_parts(*(ShellPart(f) for f in fields))
