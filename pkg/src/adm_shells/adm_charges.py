"""ADM energy, linear momentum, angular momentum and center of mass.

Each charge is a flux through the Euclidean sphere ``|x| = rho`` with the
Euclidean area element. J and C carry the ``1/E`` normalization by default;
pass ``normalize=False`` for the bare fluxes (``E J`` and ``E C``).
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field, replace

import numpy as np

from .initial_data import BowenYorkPart, InitialData, SchwarzschildPart
from .sphere_ops import fejer_weights

DEFAULT_RADII = (50.0, 100.0, 200.0)
SPHERE_RES = (32, 64)
EPS = np.zeros((3, 3, 3))
EPS[0, 1, 2] = EPS[1, 2, 0] = EPS[2, 0, 1] = 1.0
EPS[0, 2, 1] = EPS[2, 1, 0] = EPS[1, 0, 2] = -1.0


def unit_sphere(n_theta: int = SPHERE_RES[0], n_phi: int = SPHERE_RES[1]):
    """Fejer-by-trapezoid nodes and weights on the unit sphere (weights sum to 4 pi)."""
    th = (np.arange(n_theta) + 0.5) * np.pi / n_theta
    ph = 2 * np.pi * np.arange(n_phi) / n_phi
    T, P = np.meshgrid(th, ph, indexing="ij")
    n = np.stack([np.sin(T) * np.cos(P), np.sin(T) * np.sin(P), np.cos(T)], -1).reshape(-1, 3)
    w = np.outer(fejer_weights(n_theta), np.full(n_phi, 2 * np.pi / n_phi)).ravel()
    return n, w


def _check_radius(data: InitialData, rho: float):
    if not rho > max(data.inner_radius, 0.0):
        raise ValueError(f"radius {rho} is not beyond the inner radius {data.inner_radius}")


def _metric_flux_terms(data, rho, res):
    n, w = unit_sphere(*res)
    x = rho * n
    G, dG = data.metric_derivs(x, 1)
    # sum_ij (g_ij,i - g_ii,j) n_j
    flux = np.einsum("aiji,aj->a", dG, n) - np.einsum("aiij,aj->a", dG, n)
    return n, w * rho * rho, x, G, flux


def energy(data: InitialData, rho: float, res=SPHERE_RES) -> float:
    _check_radius(data, rho)
    _, w, _, _, flux = _metric_flux_terms(data, rho, res)
    return float(np.sum(flux * w) / (16 * np.pi))


def linear_momentum(data: InitialData, rho: float, res=SPHERE_RES) -> np.ndarray:
    _check_radius(data, rho)
    n, w = unit_sphere(*res)
    P = data.momentum(rho * n)
    return np.einsum("aij,aj,a->i", P, n, w * rho * rho) / (8 * np.pi)


def _need_E(E):
    if E is None or not E > 0:
        raise ValueError("a positive energy is required for the 1/E normalization")


def angular_momentum(data: InitialData, rho: float, E: float | None = None, normalize: bool = True, res=SPHERE_RES):
    """``(1/8 pi E) int pi(Y_p, n)``; ``Y_p = e_p x x``."""
    if normalize:
        _need_E(E)
    _check_radius(data, rho)
    n, w = unit_sphere(*res)
    x = rho * n
    P = data.momentum(x)
    # (e_p x x)^i = eps_{p l i} x^l
    Y = np.einsum("pli,al->api", EPS, x)
    out = np.einsum("ajk,apj,ak,a->p", P, Y, n, w * rho * rho) / (8 * np.pi)
    return out / E if normalize else out


def center_of_mass(data: InitialData, rho: float, E: float | None = None, normalize: bool = True, res=SPHERE_RES):
    if normalize:
        _need_E(E)
    _check_radius(data, rho)
    n, w, x, G, flux = _metric_flux_terms(data, rho, res)
    tr = np.einsum("aii->a", G)
    second = np.einsum("aip,ai->ap", G, n) - tr[:, None] * n
    out = np.einsum("ap,a->p", x * flux[:, None] - second, w) / (16 * np.pi)
    return out / E if normalize else out


def extrapolate(samples, exponent: float = 1.0):
    """Richardson limit of ``value(rho)`` assuming an expansion in ``rho^-exponent``.

    ``samples`` is a list of ``(rho, value)`` with at least 3 radii. Returns
    ``(limit, error)`` where ``error`` is the change made by the last
    elimination step.
    """
    samples = sorted(samples, key=lambda s: s[0])
    if len(samples) < 3:
        raise ValueError("extrapolation needs at least 3 radii")
    h = np.array([s[0] for s in samples], dtype=float) ** -exponent
    T = [np.asarray(s[1], dtype=float) for s in samples]
    # Neville recursion at h = 0; level j combines samples i..i+j
    prev = T[-1]
    j = 0
    while len(T) > 1:
        j += 1
        prev = T[-1]
        T = [(h[i + j] * T[i] - h[i] * T[i + 1]) / (h[i + j] - h[i]) for i in range(len(T) - 1)]
    limit = T[0]
    err = np.abs(limit - prev)
    return (float(limit), float(err)) if limit.ndim == 0 else (limit, err)


@dataclass
class ChargeSet:
    E: float
    P: list
    J: list | None
    C: list | None
    radii: list
    order: int
    errors: dict = field(default_factory=dict)
    normalized_by_E: bool = True
    samples: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        return {
            "E": self.E,
            "P": list(self.P),
            "J": None if self.J is None else list(self.J),
            "C": None if self.C is None else list(self.C),
            "radii": list(self.radii),
            "errors": self.errors,
            "normalized_by_E": self.normalized_by_E,
            "conventions": {"E": "1/(16 pi)", "P": "1/(8 pi)", "J": "1/(8 pi E)", "C": "1/(16 pi E)"},
        }

    def dumps(self) -> str:
        return json.dumps(self.to_json(), indent=2, sort_keys=True)


def charges(
    data: InitialData,
    radii=DEFAULT_RADII,
    normalize: bool = True,
    exponent: float = 1.0,
    res=SPHERE_RES,
) -> ChargeSet:
    """All four charges, extrapolated in ``1/rho`` over ``radii``.

    J and C fluxes are extrapolated unnormalized and divided by the
    extrapolated E. They are withheld (None) when normalization is requested
    and E is not positive.
    """
    radii = [float(r) for r in radii]
    S = {"E": [], "P": [], "J": [], "C": []}
    for rho in radii:
        S["E"].append(energy(data, rho, res))
        S["P"].append(linear_momentum(data, rho, res))
        S["J"].append(angular_momentum(data, rho, normalize=False, res=res))
        S["C"].append(center_of_mass(data, rho, normalize=False, res=res))
    ext = {}
    errors = {}
    for key, vals in S.items():
        if len(radii) >= 3:
            lim, err = extrapolate(list(zip(radii, vals)), exponent)
        else:
            lim, err = np.asarray(vals[-1]), np.abs(np.asarray(vals[-1]) - np.asarray(vals[0]))
        ext[key] = lim
        errors[key] = np.atleast_1d(err).tolist()
        errors[key + "_drift"] = np.atleast_1d(np.abs(np.asarray(vals[-1]) - np.asarray(vals[-2]))).tolist()
    E = float(ext["E"])
    J, C = np.asarray(ext["J"]), np.asarray(ext["C"])
    if normalize:
        if E > 0:
            errors["J"] = (np.asarray(errors["J"]) / E).tolist()
            errors["C"] = (np.asarray(errors["C"]) / E).tolist()
            J, C = J / E, C / E
        else:
            J = C = None
    return ChargeSet(
        E=E,
        P=np.asarray(ext["P"]).tolist(),
        J=None if J is None else J.tolist(),
        C=None if C is None else C.tolist(),
        radii=radii,
        order=len(radii) - 1,
        errors=errors,
        normalized_by_E=normalize,
        samples={k: np.asarray(v).tolist() for k, v in S.items()},
    )


# -- reference data ---------------------------------------------------------------------


def schwarzschild_data(m: float = 1.0, center=(0.0, 0.0, 0.0)) -> InitialData:
    """Isotropic time-symmetric Schwarzschild data ``(1 + m / 2|x - c|)^4 delta``."""
    return InitialData((SchwarzschildPart(float(m), tuple(float(c) for c in center)),))


def bowen_york_pi(vector, mode: str = "angular", center=(0.0, 0.0, 0.0)) -> BowenYorkPart:
    """Flat-space transverse traceless momentum with angular momentum J (``angular``)
    or linear momentum P (``linear``). The returned part evaluates ``pi(x)``
    when called and can be added to InitialData."""
    v = np.asarray(vector, dtype=float)
    if v.shape != (3,) or not np.any(v != 0):
        raise ValueError("need a nonzero 3-vector")
    return BowenYorkPart(mode, tuple(v), tuple(float(c) for c in center))


def rescale_data(data: InitialData, lam: float) -> InitialData:
    """Constant rescaling ``g -> lam^2 g``, ``pi -> lam pi`` read in the chart ``y = lam x``.

    In components: ``gbar(y) = g(y / lam)`` and ``pibar(y) = pi(y / lam) / lam``,
    which keeps the data asymptotically flat in the same chart. E, P, J and C
    all scale by ``lam``.
    """
    if not lam > 0:
        raise ValueError("scale factor must be positive")
    return replace(data, scale=data.scale * float(lam), inner_radius=data.inner_radius * float(lam))


def mass_ratio_scale(E, P, E_t, P_t) -> float:
    """``lam`` with ``lam^2 = (E^2 - |P|^2) / (E_t^2 - |P_t|^2)``."""
    num = E * E - float(np.dot(P, P))
    den = E_t * E_t - float(np.dot(P_t, P_t))
    if num <= 0 or den <= 0:
        raise ValueError("energy-momentum vectors must be timelike")
    return float(np.sqrt(num / den))
