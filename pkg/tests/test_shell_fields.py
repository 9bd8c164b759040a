import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from adm_shells.shell_fields import (
    FORMAT_HEADER,
    InvariantViolation,
    RadialProfile,
    default_pair,
    eval_cartesian,
    flat_divergence,
    linearized_scalar_curvature,
    load_field,
    make_sigma_cm,
    make_tau,
    parity_defect,
    save_field,
    scale_to_shell,
    shell_points,
    spherical_divergence,
)
from adm_shells.sphere_ops import PolynomialS2Function
from adm_shells.verify import random_polynomial


def test_profile_support_must_sit_inside_unit_shell():
    assert RadialProfile().violations() == []
    bad = RadialProfile(1.0, 1.95)
    assert bad.violations() == ["profile_support_inside_unit_shell"]
    with pytest.raises(InvariantViolation) as err:
        make_tau(bad)
    assert err.value.name == "profile_support_inside_unit_shell"
    with pytest.raises(ValueError):
        RadialProfile(1.5, 1.2)


def test_profile_derivatives_match_finite_differences():
    p = RadialProfile()
    r = np.linspace(1.1, 1.9, 9)
    h = 1e-3
    d = p.derivs(r, 3)
    for j in range(3):
        f = [p.derivs(r + s * h, 3)[j] for s in (-2, -1, 1, 2)]
        fd = (f[0] - 8 * f[1] + 8 * f[2] - f[3]) / (12 * h)
        assert np.allclose(fd, d[j + 1], rtol=1e-6, atol=1e-6 * np.abs(d[j + 1]).max())


def test_even_degree_seed_rejected():
    with pytest.raises(ValueError):
        make_tau(RadialProfile(), PolynomialS2Function.from_dict({"2,0,0": 1.0, "0,0,2": -1.0}))


def test_fields_vanish_outside_and_at_shell_boundary(pair):
    sigma, tau = pair
    rng = np.random.default_rng(0)
    d = rng.normal(size=(50, 3))
    d /= np.linalg.norm(d, axis=1, keepdims=True)
    for F in (sigma, tau):
        for r in (0.5, 1.0, 2.0, 3.0):
            v, dv = eval_cartesian(F, r * d, 1)
            assert np.max(np.abs(v)) < 1e-10 and np.max(np.abs(dv)) < 1e-10


def test_fields_are_symmetric_and_trace_free(pair):
    sigma, tau = pair
    for F in (sigma, tau):
        v = eval_cartesian(F, shell_points(F, 100, 1))
        assert np.allclose(v, np.swapaxes(v, 1, 2), atol=1e-14)
    t = eval_cartesian(tau, shell_points(tau, 100, 2))
    assert np.max(np.abs(np.einsum("aii->a", t))) < 1e-12


@settings(max_examples=5, deadline=None)
@given(st.integers(0, 2**31 - 1), st.sampled_from([1, 3, 5]))
def test_linearized_constraints_hold_for_random_seeds(seed, degree):
    u = random_polynomial(np.random.default_rng(seed), degree)
    sigma, tau = default_pair(u=u)
    xs = shell_points(sigma, 60, seed % 1000)
    _, dt = eval_cartesian(tau, xs, 1)
    _, _, dds = eval_cartesian(sigma, xs, 2)
    assert np.max(np.abs(flat_divergence(tau, xs))) <= 1e-10 * max(1.0, np.abs(dt).max())
    assert np.max(np.abs(linearized_scalar_curvature(sigma, xs))) <= 1e-10 * max(1.0, np.abs(dds).max())


def test_spherical_divergence_agrees_with_cartesian(pair):
    _, tau = pair
    x = shell_points(tau, 50, 5)
    assert np.max(np.abs(spherical_divergence(tau, x) - flat_divergence(tau, x))) < 1e-9


@given(st.floats(1.0, 50.0))
@settings(max_examples=10, deadline=None)
def test_shell_scaling_weights(k):
    sigma, tau = default_pair()
    x = shell_points(sigma, 20, 7)
    for F, w in ((sigma, 1), (tau, 2)):
        Fk = scale_to_shell(F, k)
        assert np.allclose(eval_cartesian(Fk, k * x), k**-w * eval_cartesian(F, x), rtol=1e-12, atol=1e-15)


def test_scale_below_one_rejected(pair):
    with pytest.raises(ValueError):
        scale_to_shell(pair[0], 0.5)


def test_parity(pair):
    assert parity_defect(pair[0]) <= 1e-12
    assert parity_defect(pair[1]) <= 1e-12
    # the octant bump is one-sided, so its parity defect is strictly positive
    assert parity_defect(make_sigma_cm(), n=2000) > 0


def test_serialization_round_trip(tmp_path, pair):
    sigma, tau = pair
    F = scale_to_shell(tau, 3.0).rotated(np.array([[0, -1, 0], [1, 0, 0], [0, 0, 1.0]]))
    path = tmp_path / "tau.chsh"
    save_field(F, path)
    assert path.read_text().startswith(FORMAT_HEADER + "\n")
    G = load_field(path)
    assert G == F
    x = shell_points(F, 20, 3)
    assert np.array_equal(eval_cartesian(F, x), eval_cartesian(G, x))


def test_tampered_file_rejected(tmp_path, pair):
    path = tmp_path / "s.chsh"
    save_field(pair[1], path)
    lines = path.read_text().split("\n")
    row = lines[3].split(",")
    row[2] = repr(float(row[2]) + 1.0)
    lines[3] = ",".join(row)
    path.write_text("\n".join(lines))
    with pytest.raises(ValueError):
        load_field(path)
