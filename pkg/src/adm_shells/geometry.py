"""Pointwise Riemannian formulas on Cartesian components.

Derivative arrays carry the differentiation index last:
``dG[..., i, j, k] = d_k G_ij`` and ``ddG[..., i, j, k, l] = d_k d_l G_ij``.
Everything works for numpy and jax.numpy arrays with leading batch axes.
"""
from __future__ import annotations

import numpy as np


def christoffel(G, dG, xp=np):
    """``Gamma^i_jk`` as [..., i, j, k]."""
    gi = xp.linalg.inv(G)
    low = 0.5 * (
        xp.einsum("...ljk->...ljk", dG)
        + xp.einsum("...lkj->...ljk", dG)
        - xp.einsum("...jkl->...ljk", dG)
    )
    return xp.einsum("...il,...ljk->...ijk", gi, low), gi


def scalar_curvature(G, dG, ddG, xp=np):
    gam, gi = christoffel(G, dG, xp)
    # d_m g^{il} = -g^{ia} d_m G_ab g^{bl}
    dgi = -xp.einsum("...ia,...abm,...bl->...ilm", gi, dG, gi)
    low = 0.5 * (dG + xp.einsum("...lkj->...ljk", dG) - xp.einsum("...jkl->...ljk", dG))
    dlow = 0.5 * (
        ddG + xp.einsum("...lkjm->...ljkm", ddG) - xp.einsum("...jklm->...ljkm", ddG)
    )
    dgam = xp.einsum("...ilm,...ljk->...ijkm", dgi, low) + xp.einsum("...il,...ljkm->...ijkm", gi, dlow)
    ric = (
        xp.einsum("...ijki->...jk", dgam)
        - xp.einsum("...iijk->...jk", dgam)
        + xp.einsum("...iip,...pjk->...jk", gam, gam)
        - xp.einsum("...ikp,...pij->...jk", gam, gam)
    )
    return xp.einsum("...jk,...jk->...", gi, ric)


def hamiltonian_density(G, dG, ddG, P, xp=np):
    """``R(g) + 1/2 (tr_g pi)^2 - |pi|_g^2``."""
    gi = xp.linalg.inv(G)
    tr = xp.einsum("...ij,...ij->...", gi, P)
    sq = xp.einsum("...ia,...jb,...ij,...ab->...", gi, gi, P, P)
    return scalar_curvature(G, dG, ddG, xp) + 0.5 * tr * tr - sq


def momentum_density(G, dG, P, dP, xp=np):
    """``(div_g pi)_j = g^ik (d_k pi_ij - Gamma^l_ki pi_lj - Gamma^l_kj pi_il)``."""
    gam, gi = christoffel(G, dG, xp)
    cov = (
        xp.einsum("...ijk->...ijk", dP)
        - xp.einsum("...lki,...lj->...ijk", gam, P)
        - xp.einsum("...lkj,...il->...ijk", gam, P)
    )
    return xp.einsum("...ik,...ijk->...j", gi, cov)


def conformal_killing(G, dG, X, dX, xp=np):
    """``X_i;j + X_j;i - (div X) g_ij`` for a one-form X (``dX[..., i, l] = d_l X_i``)."""
    gam, gi = christoffel(G, dG, xp)
    cov = dX - xp.einsum("...kij,...k->...ij", gam, X)
    div = xp.einsum("...ij,...ij->...", gi, cov)
    return cov + xp.swapaxes(cov, -1, -2) - div[..., None, None] * G
