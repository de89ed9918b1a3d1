import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from numpy.polynomial.legendre import leggauss

from anosovforms.exterior import AltForm, compound, hodge_star
from anosovforms.forms import (
    BumpProfile,
    ExpFourierProfile,
    FormAtom,
    FormField,
    alpha_field,
    atom_field,
    deck_factor,
    evaluate,
    exterior_derivative,
    gluing_check,
    ixomega_field,
    lie_derivative,
    parse_atom,
    pullback_batch,
    pullback_evaluate,
    random_field,
    volume_field,
)
from anosovforms.model import Point, TangentVector, anosov_metric, build_default_model, flow, tangent_flow

from oracles import deck_recursion

MODEL = build_default_model()
RHO = MODEL.rho
LOG_RHO = math.log(RHO)


def rand_point(rng):
    return Point(tuple(rng.random(3)), float(rng.random()))


def rand_vectors(rng, p, k):
    return [TangentVector.from_components(p, rng.normal(size=4)) for _ in range(k)]


def u_vec(p):
    return TangentVector.from_components(p, MODEL.frame[:, 0])


def x_vec(p):
    return TangentVector.from_components(p, MODEL.generator)


def rho_atom():
    return atom_field(MODEL, (1, 4))  # rho^s theta_u ^ ds


def dense_at(field, x, s):
    """Coefficients of the field at one point in the coordinate basis dx^I."""
    c = field.coefficients_batch(np.array([x]), np.array([s]))[0]
    return AltForm.from_dense(MODEL.n, field.degree, c @ compound(MODEL.coframe, field.degree))


seeds = st.integers(0, 2**32 - 1)


# -- evaluation ------------------------------------------------------------------------


def test_evaluate_examples():
    p = Point((0.2, 0.4, 0.6), 0.37)
    assert evaluate(alpha_field(MODEL), p, [x_vec(p)]) == 1.0
    assert evaluate(rho_atom(), p, [u_vec(p), x_vec(p)]) == pytest.approx(RHO**0.37, rel=1e-14)
    v = rand_vectors(np.random.default_rng(0), p, 1)[0]
    assert evaluate(random_field(MODEL, 2, np.random.default_rng(1)), p, [v, v]) == pytest.approx(0, abs=1e-14)


def test_evaluate_errors():
    p, q = Point((0.1, 0.1, 0.1), 0.1), Point((0.2, 0.1, 0.1), 0.1)
    with pytest.raises(ValueError, match="based"):
        evaluate(alpha_field(MODEL), p, [x_vec(q)])
    with pytest.raises(ValueError):
        evaluate(rho_atom(), p, [x_vec(p)])


@given(st.integers(1, 3), seeds)
def test_alternating_and_multilinear(k, seed):
    rng = np.random.default_rng(seed)
    field = random_field(MODEL, k, rng)
    p = rand_point(rng)
    vs = rand_vectors(rng, p, k)
    base = evaluate(field, p, vs)
    if k >= 2:
        swapped = [vs[1], vs[0]] + vs[2:]
        assert evaluate(field, p, swapped) == pytest.approx(-base, abs=1e-12 * (1 + abs(base)))
    w = rand_vectors(rng, p, 1)[0]
    a, b = rng.normal(size=2)
    mixed = TangentVector.from_components(p, a * vs[0].components + b * w.components)
    lhs = evaluate(field, p, [mixed] + vs[1:])
    rhs = a * base + b * evaluate(field, p, [w] + vs[1:])
    assert lhs == pytest.approx(rhs, abs=1e-11 * (1 + abs(lhs)))


# -- pullback -------------------------------------------------------------------------


@pytest.mark.parametrize("s0,t", [(0.3, 0.0), (0.3, 0.5), (0.3, 0.7), (0.8, 2.4), (0.1, -0.35), (0.6, -3.9),
                                  (0.25, 17.0)])
def test_pullback_matches_deck_recursion(s0, t):
    p = Point((0.3, 0.1, 0.7), s0)
    got = pullback_evaluate(rho_atom(), t, p, [u_vec(p), x_vec(p)])
    want = deck_recursion(lambda s: RHO**s, RHO, s0, t)
    assert got == pytest.approx(want, rel=1e-12)
    assert got == pytest.approx(RHO ** (s0 + t), rel=1e-12)


def test_pullback_examples():
    rng = np.random.default_rng(5)
    p = rand_point(rng)
    vs = rand_vectors(rng, p, 4)
    omega = volume_field(MODEL)
    base = evaluate(omega, p, vs)
    for t in (-6.2, 0.0, 3.7):
        assert pullback_evaluate(omega, t, p, vs) == pytest.approx(base, rel=1e-10)
    field = random_field(MODEL, 2, rng)
    assert pullback_evaluate(field, 0.0, p, vs[:2]) == evaluate(field, p, vs[:2])


@given(st.integers(1, 3), st.floats(-5, 5), st.floats(-5, 5), seeds)
def test_pullback_cocycle(k, t, tau, seed):
    rng = np.random.default_rng(seed)
    field = random_field(MODEL, k, rng)
    p = rand_point(rng)
    vs = rand_vectors(rng, p, k)
    direct = pullback_evaluate(field, t + tau, p, vs)
    q = flow(MODEL, p, t)
    moved = [tangent_flow(MODEL, v, t) for v in vs]
    moved = [TangentVector(q, v.torus_part, v.s_part) for v in moved]
    nested = pullback_evaluate(field, tau, q, moved)
    scale = max(1.0, abs(direct)) * np.prod([np.linalg.norm(MODEL.coframe @ v.components) for v in vs])
    assert abs(direct - nested) <= 1e-9 * scale


@given(st.floats(-10, 10), seeds)
def test_invariant_forms(t, seed):
    rng = np.random.default_rng(seed)
    p = rand_point(rng)
    for field in (alpha_field(MODEL), volume_field(MODEL), ixomega_field(MODEL)):
        vs = rand_vectors(rng, p, field.degree)
        assert pullback_evaluate(field, t, p, vs) == pytest.approx(evaluate(field, p, vs), rel=1e-10, abs=1e-10)


def test_ixomega_is_minus_coordinate_three_form():
    # i_X moves past dx^1 ^ dx^2 ^ dx^3 into the last slot: sign (-1)^3
    ix = ixomega_field(MODEL)
    rng = np.random.default_rng(2)
    p = rand_point(rng)
    V = rng.normal(size=(3, 4))
    vs = [TangentVector.from_components(p, v) for v in V]
    assert evaluate(ix, p, vs) == pytest.approx(-np.linalg.det(V[:, :3]), rel=1e-12)


# -- Lie derivative ---------------------------------------------------------------------


def test_lie_derivative_examples():
    p = Point((0.4, 0.3, 0.2), 0.55)
    for mode in ("analytic", "finite_difference"):
        assert lie_derivative(alpha_field(MODEL), p, [x_vec(p)], mode) == pytest.approx(0, abs=1e-10)
    got = lie_derivative(rho_atom(), p, [u_vec(p), x_vec(p)])
    assert got == pytest.approx(LOG_RHO * RHO**0.55, rel=1e-14)
    with pytest.raises(ValueError):
        lie_derivative(rho_atom(), p, [u_vec(p), x_vec(p)], "finite_difference", h=0.0)
    proc = rho_atom().lie_derivative_field("finite_difference")
    with pytest.raises(TypeError):
        lie_derivative(proc, p, [u_vec(p), x_vec(p)])


def test_finite_difference_is_second_order():
    rng = np.random.default_rng(11)
    field = random_field(MODEL, 2, rng)
    p = Point((0.3, 0.6, 0.2), 0.43)
    vs = rand_vectors(rng, p, 2)
    exact = lie_derivative(field, p, vs)
    hs = np.array([4e-2, 2e-2, 1e-2, 5e-3])
    errs = np.array([abs(lie_derivative(field, p, vs, "finite_difference", h) - exact) for h in hs])
    slope = np.polyfit(np.log(hs), np.log(errs), 1)[0]
    assert slope == pytest.approx(2.0, abs=0.1)


@given(st.integers(1, 3), seeds)
def test_fd_lie_field_matches_analytic(k, seed):
    rng = np.random.default_rng(seed)
    field = random_field(MODEL, k, rng)
    x, s = rng.random((16, 3)), rng.random(16)
    a = field.lie_derivative_field().coefficients_batch(x, s)
    b = field.lie_derivative_field("finite_difference").coefficients_batch(x, s)
    assert np.abs(a - b).max() <= 1e-7 * max(1.0, np.abs(a).max())


# -- exterior derivative -----------------------------------------------------------------


def test_exterior_derivative_examples():
    x, s = np.random.default_rng(0).random((8, 3)), np.linspace(0, 0.99, 8)
    assert np.abs(exterior_derivative(volume_field(MODEL)).coefficients_batch(x, s)).max(initial=0) == 0
    assert np.abs(exterior_derivative(alpha_field(MODEL)).coefficients_batch(x, s)).max(initial=0) == 0
    with pytest.raises(TypeError):
        rho_atom().lie_derivative_field("finite_difference").exterior_derivative()


@given(st.integers(0, 2), seeds)
def test_d_squared_is_zero(k, seed):
    rng = np.random.default_rng(seed)
    field = random_field(MODEL, k, rng) if k else FormField(MODEL, 0, [
        FormAtom((), BumpProfile.bump(1.3), (1, -2, 1), 0.4),
        FormAtom((), ExpFourierProfile(1.0, (0.2, 0.5), (0.0, 0.7)), (0, 0, 0))])
    dd = field.exterior_derivative().exterior_derivative()
    x, s = rng.random((32, 3)), rng.random(32)
    assert np.abs(dd.coefficients_batch(x, s)).max(initial=0) <= 1e-9


def _circulation(field, x, s, a, b, eps):
    """Line integral of a 1-form around the parallelogram centred at (x, s)."""
    nodes, weights = leggauss(8)
    tau = 0.5 * (nodes + 1)
    w = 0.5 * weights
    centre = np.append(x, s)
    corners = [centre + eps * (-a - b) / 2, centre + eps * (a - b) / 2, centre + eps * (a + b) / 2,
               centre + eps * (-a + b) / 2]
    total = 0.0
    for i in range(4):
        start, end = corners[i], corners[(i + 1) % 4]
        pts = start + tau[:, None] * (end - start)
        V = np.broadcast_to(end - start, (len(tau), 1, 4))
        total += np.dot(w, field.evaluate_batch(pts[:, :3], pts[:, 3], V))
    return total


@given(seeds)
def test_exterior_derivative_stokes(seed):
    rng = np.random.default_rng(seed)
    field = random_field(MODEL, 1, rng)
    x, s = rng.random(3), float(rng.uniform(0.2, 0.8))
    a, b = rng.normal(size=(2, 4))
    eps = 2e-3
    d = field.exterior_derivative().evaluate_batch(x[None], np.array([s]), np.array([[a, b]]))[0]
    # the centred circulation has an even error expansion in eps: extrapolate
    coarse = _circulation(field, x, s, a, b, eps) / eps**2
    fine = _circulation(field, x, s, a, b, eps / 2) / (eps / 2) ** 2
    stokes = (4 * fine - coarse) / 3
    scale = np.linalg.norm(MODEL.coframe @ a) * np.linalg.norm(MODEL.coframe @ b) * max(1.0, field.sup_norm())
    assert abs(d - stokes) <= 1e-6 * scale


@given(st.integers(1, 3), seeds)
def test_cartan_formula(k, seed):
    rng = np.random.default_rng(seed)
    field = random_field(MODEL, k, rng)
    cartan = field.exterior_derivative().interior_X() + field.interior_X().exterior_derivative()
    x, s = rng.random((32, 3)), rng.random(32)
    lx = field.lie_derivative_field().coefficients_batch(x, s)
    assert np.abs(cartan.coefficients_batch(x, s) - lx).max() <= 1e-9 * max(1.0, np.abs(lx).max())


# -- star ----------------------------------------------------------------------------


@given(st.integers(0, 4), seeds)
def test_field_star_matches_exterior_star(k, seed):
    rng = np.random.default_rng(seed)
    field = random_field(MODEL, k, rng) if 0 < k < 4 else (volume_field(MODEL) if k == 4 else
                                                            FormField(MODEL, 0, [FormAtom((), ExpFourierProfile())]))
    x, s = rng.random(3), float(rng.random())
    want = hodge_star(dense_at(field, x, s), anosov_metric(MODEL, s))
    got = dense_at(field.star(), x, s)
    assert (got - want).max_abs() <= 1e-11 * max(1.0, want.max_abs())


@given(st.integers(1, 3), seeds)
def test_procedural_star_matches_analytic(k, seed):
    rng = np.random.default_rng(seed)
    field = random_field(MODEL, k, rng)
    proc = FormField(MODEL, k, evaluator=field.evaluate_batch)
    x, s = rng.random((8, 3)), rng.random(8)
    a = field.star().coefficients_batch(x, s)
    assert np.allclose(proc.star().coefficients_batch(x, s), a, atol=1e-12 * max(1.0, np.abs(a).max()))


# -- gluing and validation --------------------------------------------------------------


def test_gluing_examples():
    assert gluing_check(alpha_field(MODEL)).residual == 0.0
    assert gluing_check(rho_atom()).passed
    bad = FormField(MODEL, 2, [FormAtom((1, 4), ExpFourierProfile(RHO * 1.01))], validate=False)
    rep = gluing_check(bad)
    assert not rep.passed and rep.residual > rep.tol
    with pytest.raises(ValueError):
        gluing_check(alpha_field(MODEL), samples=0)


@given(st.integers(0, 4), seeds)
def test_random_fields_glue(k, seed):
    rng = np.random.default_rng(seed)
    field = random_field(MODEL, k, rng) if 0 < k < 4 else volume_field(MODEL)
    assert gluing_check(field).passed


def test_atom_validation():
    with pytest.raises(ValueError, match="deck factor"):
        atom_field(MODEL, (2, 4))  # splits the stable rotation block
    with pytest.raises(ValueError, match="bump"):
        atom_field(MODEL, (1, 4), ExpFourierProfile(RHO), freq=(1, 0, 0))
    with pytest.raises(ValueError, match="does not match"):
        atom_field(MODEL, (1, 4), ExpFourierProfile(2.0))
    with pytest.raises(ValueError):
        BumpProfile.bump(delta=0.0)
    with pytest.raises(ValueError, match="delta|bump"):
        atom_field(MODEL, (1,), BumpProfile.bump(delta=0.01), freq=(1, 0, 0))
    assert deck_factor(MODEL, (2, 3)) == pytest.approx(1 / RHO, rel=1e-13)
    assert deck_factor(MODEL, (1, 2, 3, 4)) == pytest.approx(1.0, rel=1e-13)


def test_bump_profile_is_c2_at_support_ends():
    b = BumpProfile.bump(1.0)
    lo, hi = b.support
    for fn in (b, b.derivative(), b.derivative().derivative()):
        assert abs(float(fn(lo + 1e-9))) <= 1e-6 and abs(float(fn(hi - 1e-9))) <= 1e-6


def test_parse_atom():
    a = parse_atom("index=1,4; profile=expfourier; cos=1, 0.5; sin=0, 0.2", MODEL)
    assert a.index == (1, 4) and a.profile.base == pytest.approx(RHO)
    b = parse_atom("index=4,1", MODEL)
    assert b.index == (1, 4) and b.profile.cos[0] == -1.0
    c = parse_atom("index=2,3; freq=1,0,-1; profile=bump; amplitude=2", MODEL)
    assert c.oscillating and isinstance(c.profile, BumpProfile)
    for bad in ("freq=1,0,0", "index=1; profile=spline", "index=2,4", "index 1"):
        with pytest.raises(ValueError):
            parse_atom(bad, MODEL)


def test_pullback_batch_eigen_coordinates():
    rng = np.random.default_rng(4)
    field = random_field(MODEL, 2, rng)
    p = rand_point(rng)
    V = rng.normal(size=(2, 4))
    ts = np.linspace(-3, 3, 7)
    a = pullback_batch(field, p, V, ts)
    b = pullback_batch(field, p, V @ MODEL.coframe.T, ts, eigen=True)
    assert np.allclose(a, b, rtol=1e-10, atol=1e-12)
