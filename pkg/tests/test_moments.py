import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from adm_shells.moments import (
    DegenerateSeed,
    FixedPointError,
    HypothesisViolation,
    Rotation,
    angular_moment,
    angular_moments,
    angular_moments_factorized,
    angular_moments_lie,
    cm_moment,
    cm_moments,
    continuous_selection,
    fixed_point_target,
    rotate_pullback,
    selection_lipschitz_check,
    target_angular,
    target_cm,
)
from adm_shells.shell_fields import (
    RadialProfile,
    default_pair,
    make_sigma,
    make_sigma_cm,
    make_tau,
    parity_defect,
)
from adm_shells.sphere_ops import PolynomialS2Function

unit = st.tuples(*[st.floats(-1, 1)] * 3).filter(lambda v: np.linalg.norm(v) > 0.1)


@pytest.fixture(scope="module")
def unit_pair():
    return default_pair()


@pytest.fixture(scope="module")
def t_base(unit_pair):
    return angular_moments(*unit_pair)


@given(st.integers(0, 2**31 - 1))
def test_random_rotation_is_proper(seed):
    R = Rotation.random(np.random.default_rng(seed)).R
    assert np.allclose(R.T @ R, np.eye(3), atol=1e-12) and abs(np.linalg.det(R) - 1) < 1e-12


@given(unit, unit)
def test_aligning_maps_direction(a, b):
    R = Rotation.aligning(a, b).R
    a, b = np.asarray(a), np.asarray(b)
    assert np.allclose(R @ a / np.linalg.norm(a), b / np.linalg.norm(b), atol=1e-10)


def test_aligning_antiparallel_is_a_half_turn():
    R = Rotation.aligning((1.0, 0, 0), (-1.0, 0, 0)).R
    assert np.allclose(R @ [1.0, 0, 0], [-1.0, 0, 0])
    # half turn about e2, the least-index axis not parallel to e1
    assert np.allclose(R @ [0, 1.0, 0], [0, 1.0, 0])
    assert np.allclose(R @ [0, 0, 1.0], [0, 0, -1.0])


def test_invalid_rotation_rejected():
    with pytest.raises(ValueError):
        Rotation.of(np.diag([1.0, 1.0, -1.0]))


def test_base_moment_two_resolution_estimate(t_base):
    assert np.linalg.norm(t_base.values) > 0
    assert t_base.error <= 1e-6 * np.linalg.norm(t_base.values)


def test_moment_matches_lie_and_factorized_forms(unit_pair, t_base):
    lie = angular_moments_lie(*unit_pair)
    fac = angular_moments_factorized(*unit_pair)
    scale = np.linalg.norm(t_base.values)
    assert np.linalg.norm(lie - t_base.values) <= 1e-8 * scale
    assert np.linalg.norm(fac - t_base.values) <= 1e-8 * scale


def test_axisymmetric_tau_gives_zero_moment_about_its_axis(unit_pair):
    tau = make_tau(RadialProfile(), PolynomialS2Function.from_dict({"0,0,3": 1.0}))
    sigma = unit_pair[0]
    assert abs(angular_moment(sigma, tau, (0, 0, 1))) < 1e-12


def test_zero_sigma_gives_zero(unit_pair):
    sigma, tau = unit_pair
    assert np.all(angular_moments(sigma.times(0.0), tau).values == 0)
    assert np.all(cm_moments(make_sigma_cm().times(0.0)).values == 0)


def test_bilinearity(unit_pair, t_base):
    sigma, tau = unit_pair
    got = angular_moments(sigma.times(2.0), tau.times(-3.0)).values
    assert np.allclose(got, -6.0 * t_base.values, rtol=1e-13, atol=1e-13)
    v, w = np.array([1.0, 2.0, -1.0]), np.array([0.5, 0.0, 3.0])
    lhs = angular_moment(sigma, tau, v + 2 * w)
    assert abs(lhs - (angular_moment(sigma, tau, v) + 2 * angular_moment(sigma, tau, w))) < 1e-12 * abs(lhs)


def test_cm_moment_quadratic_and_positive():
    sc = make_sigma_cm()
    t = cm_moments(sc)
    assert np.all(t.values > 0)
    assert t.error <= 1e-6 * np.linalg.norm(t.values)
    assert np.allclose(cm_moments(sc.times(3.0)).values, 9.0 * t.values, rtol=1e-12)
    assert abs(cm_moment(sc, (1, 0, 0)) - t.values[0]) < 1e-9 * t.values[0]


def test_cm_moment_of_even_field_vanishes(unit_pair):
    assert np.max(np.abs(cm_moments(unit_pair[0]).values)) < 1e-10


def test_rotation_identity_and_parity(unit_pair):
    sigma, _ = unit_pair
    assert rotate_pullback(sigma, np.eye(3)) == sigma
    R = Rotation.random(np.random.default_rng(8))
    assert parity_defect(rotate_pullback(sigma, R)) <= 1e-12


def test_target_identity_when_target_is_base(unit_pair, t_base):
    s, t = target_angular(*unit_pair, t_base.values, t_base)
    assert np.allclose(s.R, np.eye(3)) and abs(t.amplitude - unit_pair[1].amplitude) < 1e-14


@settings(max_examples=8, deadline=None)
@given(unit)
def test_target_angular_closed_loop(unit_pair, t_base, lam):
    s, t = target_angular(*unit_pair, lam, t_base)
    got = angular_moments(s, t).values
    assert np.linalg.norm(got - lam) <= 1e-6 * np.linalg.norm(lam)


def test_target_cm_positive_scaling_only():
    sc = make_sigma_cm()
    base = cm_moments(sc)
    beta = 64 * np.pi * np.array([0.0, 0.0, 1.0])
    out = target_cm(sc, beta, base)
    assert out.amplitude > 0
    assert np.linalg.norm(cm_moments(out).values - beta) <= 1e-6 * np.linalg.norm(beta)


def test_degenerate_and_zero_targets(unit_pair):
    sigma, tau = unit_pair
    with pytest.raises(DegenerateSeed):
        target_angular(sigma.times(0.0), tau, (1.0, 0, 0))
    with pytest.raises(ValueError):
        target_angular(sigma, tau, (0.0, 0, 0))
    with pytest.raises(DegenerateSeed):
        target_cm(sigma, (1.0, 0, 0))  # an even field has no cm moment


def test_orientation_flip_is_compensated(unit_pair, t_base):
    sigma, tau = unit_pair
    lam = np.array([0.2, -1.0, 0.4])
    flipped = angular_moments(sigma.times(-1.0), tau.times(-1.0))
    assert np.allclose(flipped.values, t_base.values)
    s, t = target_angular(sigma, tau.times(-1.0), lam)
    assert np.linalg.norm(angular_moments(s, t).values - lam) <= 1e-6 * np.linalg.norm(lam)


def test_continuous_selection(unit_pair, t_base):
    a0 = t_base.values
    s, t = continuous_selection(2 * a0, unit_pair, a0)
    assert np.allclose(angular_moments(s, t).values, 2 * a0, rtol=1e-10)
    R = Rotation.about((0, 0, 1), np.pi / 6).R
    s, t = continuous_selection(R @ a0, unit_pair, a0)
    assert np.linalg.norm(angular_moments(s, t).values - R @ a0) <= 1e-6 * np.linalg.norm(a0)
    s, t = continuous_selection(a0, unit_pair, a0)
    assert s == unit_pair[0] and t == unit_pair[1]


def test_selection_bound_holds(unit_pair, t_base):
    a0 = t_base.values
    for alpha in (1.1 * a0, a0 + 0.05 * np.linalg.norm(a0) * np.array([0, 1.0, 0])):
        assert selection_lipschitz_check(alpha, unit_pair, a0)["ok"]


def test_fixed_point_identity():
    res = fixed_point_target(lambda z: z, [1.0, 2.0, 3.0], a=0.1)
    assert res.iterations == 1 and np.allclose(res.z, [1, 2, 3])


def test_fixed_point_affine_shift():
    a = 0.5
    e = np.array([0.0, 0.6, 0.8])
    res = fixed_point_target(lambda z: z + 0.3 * a * e, np.zeros(3), a=a, tol=1e-12)
    assert np.allclose(res.z, -0.3 * a * e, atol=1e-12)


@given(st.floats(0.1, 0.9), st.integers(0, 1000))
@settings(max_examples=20, deadline=None)
def test_fixed_point_contraction(scale, seed):
    rng = np.random.default_rng(seed)
    M = np.eye(3) + 0.3 * scale * rng.uniform(-1, 1, (3, 3)) / 3
    z0 = rng.normal(size=3) * 0.1
    res = fixed_point_target(lambda z: M @ z, z0, a=1.0, tol=1e-10, max_iter=200)
    assert np.linalg.norm(M @ res.z - z0) <= 1e-10


def test_fixed_point_hypothesis_violation():
    with pytest.raises(HypothesisViolation):
        fixed_point_target(lambda z: z + 1.0, np.zeros(2), a=0.5)


def test_fixed_point_non_convergence_reports_best():
    # f(z) - z0 oscillates with no fixed point inside the iteration budget
    with pytest.raises(FixedPointError) as err:
        fixed_point_target(lambda z: -z + 0.01, np.zeros(1), a=10.0, max_iter=5, min_omega=1.0)
    assert err.value.best is not None and len(err.value.history) == 5
