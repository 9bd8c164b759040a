import numpy as np
import pytest
from scipy.integrate import quad

from adm_shells import pipeline
from adm_shells.adm_charges import bowen_york_pi, schwarzschild_data
from adm_shells.constraints import (
    ConstraintResidual,
    InitialData,
    constraints,
    fit_exponent,
    residual_report,
    shell_sample,
    weighted_norm,
)
from adm_shells.initial_data import (
    SingularMetric,
    data_from_callables,
    flat_data,
    with_shells,
)


def _points(n=64, lo=2.0, hi=20.0, seed=0):
    rng = np.random.default_rng(seed)
    d = rng.normal(size=(n, 3))
    d /= np.linalg.norm(d, axis=1, keepdims=True)
    return d * rng.uniform(lo, hi, (n, 1))


def test_flat_data_satisfies_constraints():
    H, M = constraints(flat_data(), _points())
    assert np.all(H == 0) and np.all(M == 0)


def test_schwarzschild_is_vacuum():
    H, M = constraints(schwarzschild_data(1.0, (0.3, -0.2, 0.1)), _points())
    assert np.max(np.abs(H)) < 1e-12 and np.max(np.abs(M)) < 1e-14


def test_bowen_york_is_momentum_free():
    for mode in ("angular", "linear"):
        data = InitialData((bowen_york_pi((0.2, 0.5, -1.0), mode),), inner_radius=1.0)
        _, M = constraints(data, _points())
        assert np.max(np.abs(M)) < 1e-14


def test_finite_difference_path_agrees_with_autodiff():
    exact = schwarzschild_data(1.0)
    fd = data_from_callables(metric=exact.metric, inner_radius=0.5)
    x = _points(16, 3.0, 8.0)
    Ge, dGe, ddGe = exact.metric_derivs(x, 2)
    _, dGf, ddGf = fd.metric_derivs(x, 2)
    assert np.max(np.abs(dGe - dGf)) < 1e-9
    assert np.max(np.abs(ddGe - ddGf)) < 1e-7
    H, _ = constraints(fd, x)
    assert np.max(np.abs(H)) < 1e-6


def test_singular_metric_reported():
    bad = data_from_callables(metric=lambda x: np.broadcast_to(np.diag([1.0, 1.0, -1.0]), (len(x), 3, 3)))
    with pytest.raises(SingularMetric):
        constraints(bad, _points(4))


def test_points_inside_excluded_radius_rejected():
    data = InitialData((bowen_york_pi((0, 0, 1.0)),), inner_radius=1.0)
    with pytest.raises(ValueError):
        constraints(data, np.array([[0.5, 0.0, 0.0]]))


def test_evaluation_at_puncture_rejected():
    with pytest.raises(ValueError):
        schwarzschild_data(1.0, (1.0, 0.0, 0.0)).metric(np.array([[1.0, 0.0, 0.0]]))


def test_decay_is_bounded():
    rep = schwarzschild_data(1.0).check_decay()
    m = np.asarray(rep["metric"])
    assert np.all(m < 2.5) and abs(m[-1] - 2.0) < 0.05  # psi^4 - 1 ~ 2m/r


def test_weighted_norm_against_radial_quadrature():
    from adm_shells._jax import jnp

    p, q, R = 4.0, 0.75, 30.0

    def F(x):
        return jnp.exp(-(x @ x))

    rep = weighted_norm(F, 0, p, q, R_out=R)

    def integrand(r):
        rho = max(r, 1.0)
        return (np.exp(-r * r) * rho**q) ** p * rho**-3 * 4 * np.pi * r * r

    exact = (quad(integrand, 0, 1)[0] + quad(integrand, 1, R, limit=200)[0]) ** (1 / p)
    assert abs(rep.value - exact) < 1e-8 * exact


def test_weighted_norm_rejects_bad_exponents(pair):
    with pytest.raises(ValueError):
        weighted_norm(pair[0], 0, 2.0, 0.75)
    with pytest.raises(ValueError):
        weighted_norm(pair[0], 0, 4.0, 1.5)
    with pytest.raises(ValueError):
        weighted_norm(pair[0], 3, 4.0, 0.75)


def test_weighted_norm_of_shell_field_is_scale_covariant(pair):
    # sigma^k has |D^a sigma^k| rho^{|a|} ~ k^-1 on A_k; the norm shrinks with k
    sigma = pair[0]
    n1 = weighted_norm(sigma, 1, 4.0, 0.75, n_r=48, n_theta=16).value
    n4 = weighted_norm(sigma.with_(k=4.0), 1, 4.0, 0.75, n_r=48, n_theta=16).value
    assert 0 < n4 < n1


def test_fit_exponent_recovers_power_law():
    ks = np.array([2.0, 4.0, 8.0, 16.0])
    assert abs(fit_exponent(ks, 3.0 * ks**-4.0) - 4.0) < 1e-12


def test_shell_sample_volume():
    _, w = shell_sample(3.0, 1.0, 2.0)
    assert abs(w.sum() - 4 / 3 * np.pi * 27 * 7) < 1e-9 * w.sum()


def test_residual_report_csv(cfg):
    fields = pipeline.targeted_fields(cfg, cfg.alpha, (0.0, 0.0, 0.0), 1.0)
    rep = residual_report(lambda k: with_shells(flat_data(), *fields.shells(k)), [4, 8], n_r=8, n_theta=8)
    assert isinstance(rep, ConstraintResidual)
    assert abs(rep.fitted_exponent - 4.0) < 0.1
    lines = rep.to_csv().splitlines()
    assert lines[0] == "k,sup_H,l2_H,sup_M,l2_M,fitted_exponent" and len(lines) == 3
    with pytest.raises(ValueError):
        residual_report(lambda k: flat_data(), [])
