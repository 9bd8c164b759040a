"""Constraint map, its flat linearization, weighted norms and residual reports."""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from ._jax import batched, jax, jnp
from .geometry import hamiltonian_density, momentum_density
from .initial_data import (  # noqa: F401  (re-exported)
    BowenYorkPart,
    CallablePart,
    ConformalPart,
    InitialData,
    SchwarzschildPart,
    ShellPart,
    ShiftPart,
    SingularMetric,
    composite,
    data_from_callables,
    flat_data,
    with_shells,
)
from .shell_fields import (
    ShellTensorField,
    eval_cartesian,
    field_function,
    flat_divergence,
    linearized_scalar_curvature,
)
from .sphere_ops import fejer_weights


def chunk_for(signature) -> int:
    """Smaller batches for kernels that differentiate harmonic expansions twice."""
    return 256 if any(role in ("conformal", "shift") for role, _ in signature) else 4096


def _check_metric(G):
    ev = np.linalg.eigvalsh(G)
    if not np.all(np.isfinite(ev)) or np.any(ev <= 0):
        raise SingularMetric("metric is not positive definite at a queried point")


@lru_cache(maxsize=None)
def _constraint_kernel(signature):
    g, pi = composite(signature)

    def one(x, params):
        G = g(x, params)
        dG = jax.jacfwd(g)(x, params)
        ddG = jax.jacfwd(jax.jacfwd(g))(x, params)
        P = pi(x, params)
        dP = jax.jacfwd(pi)(x, params)
        H = hamiltonian_density(G, dG, ddG, P, jnp)
        M = momentum_density(G, dG, P, dP, jnp)
        return H, M, jnp.linalg.eigvalsh(G)[0]

    return jax.jit(jax.vmap(one, in_axes=(0, None)))


def constraints(data: InitialData, x) -> tuple[np.ndarray, np.ndarray]:
    """Hamiltonian and momentum constraint values at the points ``x``."""
    x = np.asarray(x, dtype=float).reshape(-1, 3)
    if data.derivs == "fd":
        G, dG, ddG = data.metric_derivs(x, 2)
        P, dP = data.momentum_derivs(x, 1)
        _check_metric(G)
        return hamiltonian_density(G, dG, ddG, P), momentum_density(G, dG, P, dP)
    if np.any(np.linalg.norm(x, axis=1) <= data.inner_radius):
        raise ValueError("evaluation point inside the excluded radius")
    H, M, lam = batched(_constraint_kernel(data.signature), x, chunk=chunk_for(data.signature), args=(data.params(),))
    if not np.all(lam > 0):
        raise SingularMetric("metric is not positive definite at a queried point")
    return H, M


def hamiltonian(data: InitialData, x):
    H, _ = constraints(data, x)
    return H[0] if np.ndim(x) == 1 else H


def momentum(data: InitialData, x):
    _, M = constraints(data, x)
    return M[0] if np.ndim(x) == 1 else M


def linearized_L(sigma: ShellTensorField, x):
    """``sum (sigma_ij,ij - sigma_ii,jj)``."""
    return linearized_scalar_curvature(sigma, x)


def flat_div(tau: ShellTensorField, x):
    return flat_divergence(tau, x)


# -- weighted norms ---------------------------------------------------------------------


@dataclass
class NormReport:
    value: float
    R_out: float
    tail_estimate: float
    truncation_change: float

    def __float__(self):
        return self.value


def _field_fn(F):
    if isinstance(F, ShellTensorField):
        f = field_function(F.static_key)
        P = F.params()
        return lambda x: f(x, P)
    return F


def weighted_norm(
    F,
    order: int,
    p: float,
    q_decay: float,
    R_out: float | None = None,
    decay: float | None = None,
    n_r: int = 96,
    n_theta: int = 24,
) -> NormReport:
    """``(int sum_{|a|<=order} (|D^a F| rho^{|a|+q})^p rho^-3 dx)^(1/p)``, rho = max(|x|, 1).

    ``F`` is a ShellTensorField or a jax-traceable function of one point.
    The volume element is Euclidean. Multi-indices are unordered, so each
    mixed second derivative appears once. The ball is cut at ``R_out`` and
    the tail beyond it is estimated from ``|F| ~ r^-decay``.
    """
    if order not in (0, 1, 2):
        raise ValueError("order must be 0, 1 or 2")
    if not p > 3:
        raise ValueError("need p > 3")
    if not 0.5 < q_decay < 1:
        raise ValueError("need 1/2 < q < 1")
    if isinstance(F, ShellTensorField):
        lo, hi = F.support
        R_out = R_out or 100.0 * F.k * 2.0
        decay = np.inf if decay is None else decay
        segments = [(0.0, lo), (lo, hi), (hi, R_out)]
    else:
        if R_out is None:
            raise ValueError("R_out is required for general functions")
        segments = [(0.0, 1.0), (1.0, R_out)]
    f = _field_fn(F)

    def terms(x):
        out = [jnp.sum(f(x) ** 2)]
        if order >= 1:
            d1 = jax.jacfwd(f)(x)
            out.append(jnp.sum(d1**2, axis=tuple(range(d1.ndim - 1))))
        if order >= 2:
            d2 = jax.jacfwd(jax.jacfwd(f))(x)
            out.append(jnp.sum(d2**2, axis=tuple(range(d2.ndim - 2))))
        return tuple(out)

    kern = jax.jit(jax.vmap(terms))

    def integral(segs):
        total = 0.0
        th = (np.arange(n_theta) + 0.5) * np.pi / n_theta
        ph = 2 * np.pi * np.arange(2 * n_theta) / (2 * n_theta)
        T, Ph = np.meshgrid(th, ph, indexing="ij")
        n = np.stack([np.sin(T) * np.cos(Ph), np.sin(T) * np.sin(Ph), np.cos(T)], -1).reshape(-1, 3)
        wa = np.outer(fejer_weights(n_theta), np.full(2 * n_theta, np.pi / n_theta)).ravel()
        for a, b in segs:
            if b <= a:
                continue
            if a > 0 and b / a > 4:
                # geometric segment: integrate in s = ln r
                xs, ws = np.polynomial.legendre.leggauss(n_r)
                s = 0.5 * (np.log(b) + np.log(a)) + 0.5 * (np.log(b) - np.log(a)) * xs
                r = np.exp(s)
                wr = ws * 0.5 * (np.log(b) - np.log(a)) * r**3
            else:
                xs, ws = np.polynomial.legendre.leggauss(n_r)
                r = 0.5 * (a + b) + 0.5 * (b - a) * xs
                wr = ws * 0.5 * (b - a) * r * r
            pts = (r[:, None, None] * n[None]).reshape(-1, 3)
            w = (wr[:, None] * wa[None]).ravel()
            vals = batched(kern, pts)
            rho = np.maximum(np.linalg.norm(pts, axis=1), 1.0)
            dens = (np.sqrt(vals[0]) * rho**q_decay) ** p
            if order >= 1:
                d1 = vals[1].reshape(len(pts), -1)
                dens = dens + np.sum((np.sqrt(d1) * rho[:, None] ** (1 + q_decay)) ** p, axis=1)
                if order >= 2:
                    d2 = vals[2].reshape(len(pts), 3, 3)
                    iu = np.triu_indices(3)
                    d2 = d2[:, iu[0], iu[1]]
                    dens = dens + np.sum((np.sqrt(d2) * rho[:, None] ** (2 + q_decay)) ** p, axis=1)
            total += float(np.sum(dens * rho**-3.0 * w))
        return total

    I = integral(segments)
    # truncation sensitivity: the same integral cut at R_out / 2
    cut = [(a, min(b, 0.5 * R_out)) for a, b in segments]
    I_half = integral(cut)
    tail = 0.0
    if decay is not None and np.isfinite(decay):
        # |F| ~ c r^-decay: integrand ~ r^{p(q - decay) - 1}
        expo = p * (q_decay - decay)
        if expo >= 0:
            tail = np.inf
        else:
            dens_edge = max(I - I_half, 0.0) / max(np.log(2.0), 1e-300)
            tail = dens_edge / (-expo) if dens_edge > 0 else 0.0
    return NormReport(I ** (1.0 / p), float(R_out), float(tail), float(I - I_half))


# -- residual reports ------------------------------------------------------------------


@dataclass
class ConstraintResidual:
    rows: list = field(default_factory=list)
    fitted_exponent: float = float("nan")

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["k", "sup_H", "l2_H", "sup_M", "l2_M", "fitted_exponent"])
        for r in self.rows:
            w.writerow([repr(r["k"]), repr(r["sup_H"]), repr(r["l2_H"]), repr(r["sup_M"]), repr(r["l2_M"]), repr(self.fitted_exponent)])
        return buf.getvalue()


def shell_sample(k: float, a: float = 1.0, b: float = 2.0, n_r: int = 24, n_theta: int = 16):
    """Product nodes and Euclidean weights on ``{k a < |x| < k b}``."""
    xr, wr = np.polynomial.legendre.leggauss(n_r)
    r = k * (0.5 * (a + b) + 0.5 * (b - a) * xr)
    wr = wr * 0.5 * (b - a) * k * r * r
    th = (np.arange(n_theta) + 0.5) * np.pi / n_theta
    ph = 2 * np.pi * np.arange(2 * n_theta) / (2 * n_theta)
    T, P = np.meshgrid(th, ph, indexing="ij")
    n = np.stack([np.sin(T) * np.cos(P), np.sin(T) * np.sin(P), np.cos(T)], -1).reshape(-1, 3)
    wa = np.outer(fejer_weights(n_theta), np.full(2 * n_theta, np.pi / n_theta)).ravel()
    return (r[:, None, None] * n[None]).reshape(-1, 3), (wr[:, None] * wa[None]).ravel()


def fit_exponent(ks, values) -> float:
    """Least-squares slope ``d`` in ``values ~ C k^-d``."""
    ks = np.asarray(ks, dtype=float)
    v = np.asarray(values, dtype=float)
    A = np.stack([np.ones_like(ks), -np.log(ks)], 1)
    coef, *_ = np.linalg.lstsq(A, np.log(v), rcond=None)
    return float(coef[1])


def residual_report(build, k_list, region=(1.0, 2.0), n_r: int = 24, n_theta: int = 16) -> ConstraintResidual:
    """Constraint residuals of ``build(k)`` over the shells ``A_k`` for each k."""
    k_list = list(k_list)
    if not k_list:
        raise ValueError("empty region list")
    rows = []
    for k in k_list:
        data = build(k)
        x, w = shell_sample(k, *region, n_r=n_r, n_theta=n_theta)
        H, M = constraints(data, x)
        Mn = np.linalg.norm(M, axis=1)
        rows.append(
            {
                "k": float(k),
                "sup_H": float(np.max(np.abs(H))),
                "l2_H": float(np.sqrt(np.sum(H * H * w))),
                "sup_M": float(np.max(Mn)),
                "l2_M": float(np.sqrt(np.sum(Mn * Mn * w))),
            }
        )
    rep = ConstraintResidual(rows)
    if len(k_list) >= 2:
        rep.fitted_exponent = fit_exponent([r["k"] for r in rows], [max(r["sup_H"], r["sup_M"]) for r in rows])
    return rep
