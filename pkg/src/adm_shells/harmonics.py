"""Real spherical harmonics and fields expanded in them with radial splines.

Harmonics are evaluated in polynomial form: ``Ybar_lm(z) * Re/Im (x + i y)^m``
for unit vectors, so the same code runs under numpy and jax and has no
coordinate singularity. Index ``l*l + l + m`` with ``m < 0`` the sine family.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ._jax import jnp


def lm_index(l: int, m: int) -> int:
    return l * l + l + m


def n_coeffs(L: int) -> int:
    return (L + 1) ** 2


def _legendre_tables(L: int):
    m = np.arange(L + 1)
    qmm = np.sqrt((2 * m + 1) / (4 * np.pi))
    for mm in range(1, L + 1):
        qmm[mm:] *= np.sqrt((2 * mm - 1) / (2 * mm))
    a = np.zeros((L + 1, L + 1))
    b = np.zeros((L + 1, L + 1))
    for l in range(L + 1):
        for mm in range(l - 1):
            a[l, mm] = np.sqrt((4 * l * l - 1) / (l * l - mm * mm))
            b[l, mm] = np.sqrt(((l - 1) ** 2 - mm * mm) / (4 * (l - 1) ** 2 - 1))
    # gather indices into the flat (l, m) table and the power of (x + i y)
    rows, cols, fam = [], [], []
    for l in range(L + 1):
        for mm in range(-l, l + 1):
            rows.append(l * (L + 1) + abs(mm))
            cols.append(abs(mm))
            fam.append(0 if mm == 0 else (1 if mm > 0 else -1))
    return qmm, a, b, np.array(rows), np.array(cols), np.array(fam)


def real_harmonics(n, L: int, xp=np):
    """Orthonormal real harmonics up to degree L at unit vectors ``n`` ([..., 3]).

    Returns an array [..., (L+1)^2]. The Legendre recursion runs over ``l``
    with all orders ``m`` handled at once, which keeps traced graphs small.
    """
    x, y, z = n[..., 0:1], n[..., 1:2], n[..., 2:3]
    qmm, a, b, rows, cols, fam = _legendre_tables(L)
    m = np.arange(L + 1)
    # Re/Im of (x + i y)^m for every m
    cm, sm = [1.0 + 0.0 * x], [0.0 * x]
    for _ in range(L):
        c, s_ = cm[-1], sm[-1]
        cm.append(c * x - s_ * y)
        sm.append(s_ * x + c * y)
    cm = xp.concatenate(cm, axis=-1)
    sm = xp.concatenate(sm, axis=-1)
    qs = []
    q2, q1 = 0.0 * z + 0.0 * m, 0.0 * z + 0.0 * m
    for l in range(L + 1):
        rec = a[l] * (z * q1 - b[l] * q2)
        q = xp.where(m == l, qmm + 0.0 * z, xp.where(m == l - 1, z * np.sqrt(2 * m + 3) * qmm, rec))
        qs.append(q)
        q2, q1 = q1, q
    Q = xp.concatenate(qs, axis=-1)  # [..., (L+1)*(L+1)], index l*(L+1)+m
    ql = Q[..., rows]
    trig = xp.where(fam > 0, cm[..., cols], xp.where(fam < 0, sm[..., cols], 1.0))
    scale = np.where(fam == 0, 1.0, np.sqrt(2.0))
    return scale * ql * trig


def degrees(L: int) -> np.ndarray:
    return np.array([l for l in range(L + 1) for _ in range(2 * l + 1)])


@dataclass(frozen=True)
class RadialSHField:
    """``f_c(x) = sum_lm c_{c,lm}(ln r) Y_lm(x/r)`` for ``c`` in ``range(ncomp)``.

    The radial coefficients are piecewise quintics on a uniform grid in
    ``s = ln r`` over ``[s0, s1]``; outside they continue as the harmonic
    solutions ``r^l`` (inside) and ``r^-(l+1)`` (outside).
    """

    ncomp: int
    L: int
    n_intervals: int
    s0: float
    s1: float
    coefs: np.ndarray  # [ncomp, nlm, n_intervals, 6], highest power first
    inner: np.ndarray  # [ncomp, nlm] values at s0
    outer: np.ndarray  # [ncomp, nlm] values at s1

    def __hash__(self):
        return hash(self.static)

    def __eq__(self, other):
        return self is other

    @property
    def static(self) -> tuple:
        return ("sh", self.ncomp, self.L, self.n_intervals)

    def params(self):
        return (
            jnp.asarray(self.s0),
            jnp.asarray(self.s1),
            jnp.asarray(self.coefs),
            jnp.asarray(self.inner),
            jnp.asarray(self.outer),
        )

    def monopole(self) -> np.ndarray:
        """``lim r f_c`` averaged over directions, per component."""
        r1 = np.exp(self.s1)
        return r1 * self.outer[:, 0] / np.sqrt(4 * np.pi)

    def __call__(self, x) -> np.ndarray:
        from ._jax import batched, jax

        fn = sh_function(self.static)
        k = jax.jit(jax.vmap(fn, in_axes=(0, None)))
        return batched(k, np.asarray(x, dtype=float).reshape(-1, 3), args=(self.params(),))


def sh_function(static):
    """jax ``f(x, params) -> [ncomp]`` for the given static structure."""
    _, ncomp, L, N = static
    ell = jnp.asarray(degrees(L), dtype=jnp.float64)

    def f(x, params):
        s0, s1, coefs, inner, outer = params
        r = jnp.sqrt(x @ x)
        n = x / r
        s = jnp.log(r)
        h = (s1 - s0) / N
        idx = jnp.clip(jnp.floor((s - s0) / h).astype(jnp.int32), 0, N - 1)
        t = jnp.clip(s, s0, s1) - (s0 + idx * h)
        c = coefs[:, :, idx, :]  # [ncomp, nlm, 6]
        powers = jnp.stack([t**5, t**4, t**3, t**2, t, jnp.ones_like(t)])
        mid = c @ powers
        inside = inner * jnp.exp(ell * (s - s0))
        outside = outer * jnp.exp(-(ell + 1.0) * (s - s1))
        radial = jnp.where(s < s0, inside, jnp.where(s > s1, outside, mid))
        Y = real_harmonics(n, L, jnp)
        return radial @ Y

    return f
