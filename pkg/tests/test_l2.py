import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate

from anosovforms.exterior import MetricFrame
from anosovforms.forms import (
    BumpProfile,
    ExpFourierProfile,
    FormField,
    alpha_field,
    atom_field,
    ixomega_field,
    random_field,
    volume_field,
)
from anosovforms.l2 import (
    L2Result,
    adjoint_residual,
    decomposition_consistency,
    integrate_function,
    l2_inner,
    orbit_obstruction,
    orthogonality_check,
    pointwise_inner,
    star_alpha_identity,
    weak_closedness,
)
from anosovforms.model import Point, build_default_model, periodic_points
from anosovforms.quadrature import QuadratureSpec

MODEL = build_default_model()
RHO = MODEL.rho
SMALL = QuadratureSpec(N=2**12)


def pair(k, rng):
    sets = list(itertools.combinations(range(1, MODEL.n + 1), k))
    ix = [sets[j] for j in rng.integers(len(sets), size=3)]
    return random_field(MODEL, k, rng, indices=ix), random_field(MODEL, k, rng, indices=ix)


def bump_norm2(prof):
    """1/2 int bump^2 rho^(2s) ds, the squared norm of a stable-plane bump atom with a torus wave."""
    lo, hi = prof.support
    val, _ = integrate.quad(lambda s: float(prof(s)) ** 2 * RHO ** (2 * s), lo, hi, epsabs=0.0, epsrel=1e-13)
    return 0.5 * val


# -- inner products ----------------------------------------------------------------------


def test_unit_norms_at_default_lattice():
    a, w = alpha_field(MODEL), volume_field(MODEL)
    for r in (l2_inner(a, a, target=1.0), l2_inner(w, w, target=1.0)):
        assert r.passed and r.sigma <= 1e-3
        assert r.value == pytest.approx(1.0, abs=1e-12)


def test_inner_symmetric():
    rng = np.random.default_rng(0)
    a, b = pair(2, rng)
    assert l2_inner(a, b, SMALL).value == pytest.approx(l2_inner(b, a, SMALL).value, rel=1e-14, abs=1e-16)


def test_single_atom_norm_matches_scalar_integral():
    # rho^s cos(2 pi s) theta_u ^ ds: pointwise norm^2 = cos^2(2 pi s)
    w = atom_field(MODEL, (1, 4), ExpFourierProfile(RHO, (0.0, 1.0)))
    assert l2_inner(w, w, QuadratureSpec(N=2**14)).value == pytest.approx(0.5, abs=1e-10)
    # bump on theta_s1 ^ theta_s2 with a torus wave: 1/2 int bump^2 rho^(2s) ds
    prof = BumpProfile.bump(1.3)
    b = FormField(MODEL, 2, atom_field(MODEL, (2, 3), prof, freq=(1, -2, 0), phase=0.4).atoms)
    want = bump_norm2(prof)
    r = l2_inner(b, b, target=want)
    assert r.passed and r.value == pytest.approx(want, rel=1e-6)


def test_inner_degree_mismatch():
    with pytest.raises(ValueError, match="degree"):
        l2_inner(alpha_field(MODEL), volume_field(MODEL))


def test_pointwise_inner_with_constant_metric():
    # the coordinate Euclidean metric: |ds|^2 = 1 everywhere
    euclid = MetricFrame(np.eye(4))
    a = alpha_field(MODEL)
    x, s = np.random.default_rng(1).random((10, 3)), np.linspace(0, 0.9, 10)
    assert np.allclose(pointwise_inner(a, a, x, s, euclid), 1.0, atol=1e-12)


def test_error_bars_cover_truth():
    prof = BumpProfile.bump(1.0)
    b = atom_field(MODEL, (2, 3), prof, freq=(1, 1, 0))
    want = bump_norm2(prof)
    hits = 0
    seeds = 400
    for seed in range(seeds):
        r = l2_inner(b, b, QuadratureSpec("stratified", 256, seed=seed), target=want)
        hits += r.passed
    assert hits / seeds >= 0.99


def test_integrate_function_constant_and_rounding_term():
    r = integrate_function(MODEL, lambda x, s: np.full(len(s), 2.0), SMALL, target=2.0)
    assert r.value == pytest.approx(2.0, abs=1e-12) and r.passed and 0 < r.sigma < 1e-12
    assert len(r.replicas) == 8


# -- star identity ------------------------------------------------------------------------


def test_star_alpha_identity():
    rep = star_alpha_identity(MODEL)
    assert rep.passed and rep.max_deviation <= 1e-12 and rep.nilpotence <= 1e-12


def test_star_alpha_identity_negative_control():
    rep = star_alpha_identity(MODEL, metric=MetricFrame(np.diag([1.0, 2.0, 3.0, 4.0])))
    assert not rep.passed and rep.max_deviation > 1e-3


# -- adjoint ----------------------------------------------------------------------------


def test_adjoint_alpha_and_volume_exact():
    # invariant forms: both sides vanish up to the rounding of log(base) in the profiles
    for w in (alpha_field(MODEL), volume_field(MODEL)):
        assert abs(adjoint_residual(w, w, SMALL).value) <= 1e-15


@pytest.mark.parametrize("k", [1, 2, 3])
def test_adjoint_random_pairs(k):
    rng = np.random.default_rng(10 + k)
    for _ in range(5):
        xi, eta = pair(k, rng)
        r = adjoint_residual(xi, eta, SMALL)
        assert r.passed, r


def test_adjoint_finite_difference_mode():
    rng = np.random.default_rng(20)
    xi, eta = pair(2, rng)
    procedural = [FormField(MODEL, 2, evaluator=w.evaluate_batch, breakpoints=w.breakpoints) for w in (xi, eta)]
    r = adjoint_residual(*procedural, SMALL, mode="finite_difference")
    assert r.passed and abs(r.value) < 1e-5


def test_adjoint_wrong_sign_is_detected():
    # -<xi, *L*eta> alone is far from <L xi, eta>; the identity is not vacuous
    xi = atom_field(MODEL, (1, 4), ExpFourierProfile(RHO, (1.0, 0.5)))
    eta = atom_field(MODEL, (1, 4), ExpFourierProfile(RHO, (0.3,), (0.0, 0.8)))
    lhs = l2_inner(xi.lie_derivative_field(), eta, SMALL)
    rhs = l2_inner(xi, eta.star().lie_derivative_field().star(), SMALL)
    # int [ln rho (1 + cos/2) - pi sin] [0.3 + 0.8 sin] ds
    assert lhs.value == pytest.approx(0.3 * math.log(RHO) - 0.4 * math.pi, abs=1e-10)
    assert abs(lhs.value + rhs.value) <= 3 * math.hypot(lhs.sigma, rhs.sigma)
    assert abs(lhs.value - rhs.value) > 100 * math.hypot(lhs.sigma, rhs.sigma)


# -- orthogonality ----------------------------------------------------------------------


def test_orthogonality_self_case_exact():
    assert orthogonality_check(ixomega_field(MODEL), SMALL).value == 0.0


@settings(max_examples=10)
@given(st.integers(0, 2**32 - 1))
def test_orthogonality_random_theta(seed):
    theta = random_field(MODEL, 3, np.random.default_rng(seed))
    assert orthogonality_check(theta, SMALL).passed


def test_orthogonality_linear_in_ixomega():
    theta = random_field(MODEL, 3, np.random.default_rng(30))
    a = orthogonality_check(theta, SMALL).value
    b = orthogonality_check(theta + ixomega_field(MODEL) * 2.5, SMALL).value
    assert b == pytest.approx(a, abs=1e-14)


def test_orthogonality_degree_check():
    with pytest.raises(ValueError, match="n - 1"):
        orthogonality_check(alpha_field(MODEL))


# -- weak closedness ------------------------------------------------------------------------


def test_weak_closedness_constant_form_exact():
    w = atom_field(MODEL, (1, 4))
    assert weak_closedness(w, SMALL).value == pytest.approx(0.0, abs=1e-14)


@settings(max_examples=10)
@given(st.integers(0, 2**32 - 1))
def test_weak_closedness_and_decomposition_agree(seed):
    omega = random_field(MODEL, 2, np.random.default_rng(seed))
    direct, paired = decomposition_consistency(omega, SMALL)
    assert direct.passed and paired.passed
    assert abs(direct.value - paired.value) <= 3 * math.hypot(direct.sigma, paired.sigma)


def test_d_alpha_vanishes():
    d = alpha_field(MODEL).exterior_derivative()
    x, s = np.random.default_rng(2).random((32, 3)), np.linspace(0, 0.95, 32)
    assert np.abs(d.coefficients_batch(x, s)).max(initial=0.0) <= 1e-12


def test_weak_closedness_errors():
    w = atom_field(MODEL, (1, 4))
    proc = FormField(MODEL, 2, evaluator=w.evaluate_batch)
    with pytest.raises(TypeError):
        weak_closedness(proc)
    with pytest.raises(ValueError, match="n - 2"):
        weak_closedness(alpha_field(MODEL))


# -- periodic orbits -----------------------------------------------------------------------


@pytest.mark.parametrize("period", [1, 2, 3, 4])
def test_orbit_integrals(period):
    rng = np.random.default_rng(period)
    coboundary = random_field(MODEL, 1, rng).lie_derivative_field()
    psi = atom_field(MODEL, (), ExpFourierProfile(1.0, (0.5, 1.0), (0.0, -0.7)))
    for pt in periodic_points(MODEL, period):
        assert orbit_obstruction(alpha_field(MODEL), pt, period).value == pytest.approx(period, abs=1e-10)
        assert abs(orbit_obstruction(coboundary, pt, period).value) <= 1e-10
        assert abs(orbit_obstruction(psi.lie_derivative_field(), pt, period).value) <= 1e-10
    # the function psi itself does not integrate to zero
    assert orbit_obstruction(psi, periodic_points(MODEL, 1)[0], 1).value == pytest.approx(0.5, abs=1e-12)


def test_orbit_start_mid_roof():
    pt = periodic_points(MODEL, 2)[0]
    moved = Point(pt.x, 0.37)
    assert orbit_obstruction(alpha_field(MODEL), moved, 2).value == pytest.approx(2.0, abs=1e-12)


def test_orbit_errors():
    with pytest.raises(ValueError, match="not periodic"):
        orbit_obstruction(alpha_field(MODEL), Point((0.1, 0.2, 0.3), 0.0), 1)
    with pytest.raises(ValueError, match="degrees 0 and 1"):
        orbit_obstruction(atom_field(MODEL, (1, 4)), Point((0.0, 0.0, 0.0), 0.0), 1)
    with pytest.raises(ValueError, match="positive"):
        orbit_obstruction(alpha_field(MODEL), Point((0.0, 0.0, 0.0), 0.0), 0)


def test_orbit_integral_report():
    oi = orbit_obstruction(alpha_field(MODEL), Point((0.0, 0.0, 0.0), 0.0), 1)
    assert oi.to_dict()["period"] == 1.0 and oi.return_distance <= 1e-12


def test_l2result_pass_rule():
    assert L2Result(1.0, 0.1, 1.25).passed and not L2Result(1.0, 0.1, 1.35).passed
