import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from anosovforms.constants import KOROBOV_PARAMETER, LATTICE_N
from anosovforms.quadrature import (
    QuadratureSpec,
    composite_gauss,
    gauss_panels,
    korobov_vector,
    p2_criterion,
    periodize,
    refine_breaks,
)

from oracles import p2_direct

# [DERIVED] oracles.p2_direct for z = (1, a, a^2, a^3) mod 2^16, a = 19303, frozen
P2_DEFAULT = 1.4866643731559215e-04


def test_p2_matches_direct_sum():
    for n, a in ((256, 3), (1024, 77), (4096, 1487)):
        z = korobov_vector(n, 4, a)
        assert p2_criterion(z, n) == pytest.approx(p2_direct(z.tolist(), n), rel=1e-12)


def test_default_lattice_quality():
    z = korobov_vector(LATTICE_N, 4)
    assert p2_criterion(z, LATTICE_N) == pytest.approx(P2_DEFAULT, rel=1e-10)
    rng = np.random.default_rng(0)
    others = [int(a) for a in rng.integers(2, LATTICE_N // 2, size=200) if a != KOROBOV_PARAMETER]
    assert all(p2_criterion(korobov_vector(LATTICE_N, 4, a), LATTICE_N) >= P2_DEFAULT for a in others)


@given(st.integers(0, 15), st.floats(-3, 3), st.floats(0.1, 4))
def test_gauss_panel_exact_for_polynomials(deg, a, width):
    got = composite_gauss(lambda t: t**deg, [a, a + width / 2, a + width])
    want = ((a + width) ** (deg + 1) - a ** (deg + 1)) / (deg + 1)
    assert got == pytest.approx(want, rel=1e-12, abs=1e-12)


def test_composite_gauss_exponential():
    got = composite_gauss(lambda t: np.exp(-0.3 * t), refine_breaks(np.array([0.0, 40.0]), 4))
    assert got == pytest.approx((1 - math.exp(-12)) / 0.3, rel=1e-14)
    assert composite_gauss(np.exp, [1.0]) == 0.0


def test_refine_breaks():
    out = refine_breaks(np.array([0.0, 1.0, 3.0]), 2)
    assert np.allclose(out, [0, 0.25, 0.5, 0.75, 1, 1.5, 2, 2.5, 3])
    assert np.array_equal(refine_breaks(np.array([0.0, 1.0]), 0), [0.0, 1.0])
    t, w = gauss_panels(out)
    assert len(t) == 8 * 8 and w.sum() == pytest.approx(3.0, rel=1e-15)


def test_periodize():
    u = np.linspace(0, 1, 1001)
    s, jac = periodize(u)
    assert np.all(np.diff(s) >= 0) and s[0] == 0 and s[-1] == pytest.approx(1.0)
    assert composite_gauss(lambda x: periodize(x)[1], [0.0, 0.5, 1.0]) == pytest.approx(1.0, rel=1e-14)


def test_quadrature_spec_validation():
    with pytest.raises(ValueError, match="replicas"):
        QuadratureSpec(shifts=4)
    with pytest.raises(ValueError, match="rule"):
        QuadratureSpec(rule="sobol")
    with pytest.raises(ValueError):
        QuadratureSpec(N=0)


@pytest.mark.parametrize("rule", ["lattice", "stratified"])
def test_replicas_deterministic_and_in_cube(rule):
    q = QuadratureSpec(rule, 512, seed=3)
    a, b = q.replicas(4), q.replicas(4)
    assert len(a) == 8
    for x, y in zip(a, b):
        assert np.array_equal(x, y)
        assert x.shape == (512, 4) and x.min() >= 0 and x.max() < 1
    c = QuadratureSpec(rule, 512, seed=4).replicas(4)
    assert not np.array_equal(a[0], c[0])


def test_stratified_one_point_per_stratum():
    pts = QuadratureSpec("stratified", 256, seed=1).replicas(3)[0]
    for j in range(3):
        assert sorted(np.floor(pts[:, j] * 256).astype(int)) == list(range(256))


def test_lattice_integrates_smooth_periodic_function():
    def func(u):
        return np.prod(1 + 0.5 * np.cos(2 * math.pi * u), axis=1)

    mean, se, vals = QuadratureSpec(N=LATTICE_N).integrate(func, 4)
    assert mean == pytest.approx(1.0, abs=1e-12)
    assert len(vals) == 8 and se < 1e-10
