"""L^2 pairings of forms on the suspension and the identities they satisfy.

Integrals over M use the unit cube [0,1)^m x [0,1) as fundamental domain
with the volume form dx^1 ^ ... ^ dx^m ^ ds (total mass 1).  The roof
coordinate is fed through a sine periodization so that integrands which
are smooth on M but only continuous across s = 0 in coordinates still see
a periodic integrand.  Error bars come from independently shifted replicas
plus a floating-point summation term.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable

import numpy as np
from scipy import stats

from .constants import FD_STEP, ORBIT_RETURN_TOL
from .exterior import AltForm, MetricFrame, basis_masks, compound, hodge_star, indices_of, inner_matrix, interior
from .forms import FormField, alpha_field, ixomega_field
from .model import Point, SuspensionFlow, anosov_metric, flow
from .quadrature import QuadratureSpec, gauss_panels, periodize, refine_breaks

__all__ = [
    "L2Result",
    "StarReport",
    "OrbitIntegral",
    "integrate_function",
    "l2_inner",
    "star_alpha_identity",
    "adjoint_residual",
    "orthogonality_check",
    "weak_closedness",
    "decomposition_consistency",
    "orbit_obstruction",
]

SIGMAS = 3.0


@dataclass(frozen=True)
class L2Result:
    """An integral with its error bar; ``passed`` means |value - target| <= 3 sigma."""

    value: float
    sigma: float
    target: float = 0.0
    replicas: tuple = ()

    @property
    def passed(self) -> bool:
        return abs(self.value - self.target) <= SIGMAS * self.sigma

    def to_dict(self) -> dict:
        return {"value": self.value, "sigma": self.sigma, "target": self.target, "pass": self.passed}


@lru_cache(maxsize=None)
def _t_calibration(replicas: int) -> float:
    """Widening of the standard error so that 3 sigma has Gaussian 3-sigma
    coverage although the spread is estimated from few replicas."""
    level = stats.norm.cdf(SIGMAS)
    return float(stats.t.ppf(level, replicas - 1) / SIGMAS)


def integrate_function(f: SuspensionFlow, func: Callable[[np.ndarray, np.ndarray], np.ndarray],
                       quad: QuadratureSpec | None = None, target: float = 0.0) -> L2Result:
    """Integrate func(x, s) over M against dx ds.

    sigma combines the standard error over shifted replicas, widened to
    Student-t coverage for B - 1 degrees of freedom, with a
    summation-rounding term sqrt(N) eps mean|integrand|.
    """
    quad = quad or QuadratureSpec()
    vals, mags = [], []
    for u in quad.replicas(f.n):
        s, jac = periodize(u[:, -1])
        s = np.where(s >= 1.0, 0.0, s)
        y = func(u[:, :-1], s) * jac
        vals.append(np.sum(y) / quad.N)
        mags.append(np.sum(np.abs(y)) / quad.N)
    vals = np.array(vals)
    stat = vals.std(ddof=1) / math.sqrt(len(vals)) * _t_calibration(len(vals))
    rounding = math.sqrt(quad.N) * np.finfo(float).eps * max(mags)
    return L2Result(float(vals.mean()), float(math.hypot(stat, rounding)), target, tuple(vals.tolist()))


def _form_logs(f: SuspensionFlow, k: int) -> np.ndarray:
    return np.array([f.log_moduli[[i - 1 for i in indices_of(mk)]].sum() for mk in basis_masks(f.n, k)])


def pointwise_inner(omega: FormField, eta: FormField, x: np.ndarray, s: np.ndarray,
                    metric: MetricFrame | None = None) -> np.ndarray:
    """<omega, eta>_g at the points (x, s).

    With ``metric`` None the Anosov metric is used: the eigen-coframe is
    orthogonal with |theta_I|^2 = |mu_I|^(-2 s).  A constant ``metric`` is
    applied in suspension coordinates through the general exterior algebra.
    """
    if omega.model is not eta.model:
        raise ValueError("forms live on different models")
    if omega.degree != eta.degree:
        raise ValueError(f"degree mismatch: {omega.degree} vs {eta.degree}")
    f, k = omega.model, omega.degree
    a, b = omega.coefficients_batch(x, s), eta.coefficients_batch(x, s)
    if metric is None:
        w = np.exp(-2 * s[:, None] * _form_logs(f, k)[None, :])
        return (a * b * w).sum(axis=1)
    to_dx = compound(f.coframe, k)
    G = inner_matrix(f.n, k, metric)
    return np.einsum("ni,ij,nj->n", a @ to_dx, G, b @ to_dx)


def l2_inner(omega: FormField, eta: FormField, quad: QuadratureSpec | None = None,
             metric: MetricFrame | None = None, target: float = 0.0) -> L2Result:
    """<omega, eta>_g = int_M omega ^ *eta."""
    if omega.degree != eta.degree:
        raise ValueError(f"degree mismatch: {omega.degree} vs {eta.degree}")
    return integrate_function(omega.model, lambda x, s: pointwise_inner(omega, eta, x, s, metric), quad, target)


@dataclass(frozen=True)
class StarReport:
    max_deviation: float
    nilpotence: float
    tol: float
    samples: int

    @property
    def passed(self) -> bool:
        return self.max_deviation <= self.tol and self.nilpotence <= self.tol

    def to_dict(self) -> dict:
        return {"max_deviation": self.max_deviation, "nilpotence": self.nilpotence, "tol": self.tol,
                "samples": self.samples, "pass": self.passed}


def star_alpha_identity(f: SuspensionFlow, tol: float = 1e-12, samples: int = 64, seed: int = 0,
                        metric: MetricFrame | None = None) -> StarReport:
    """max over sample points of |*_g(i_X Omega) - (-1)^(n-1) alpha|.

    Everything is done in suspension coordinates with the general Hodge
    star of the exterior algebra (not the eigen-frame shortcut used for
    fields).  ``metric`` replaces the Anosov metric by a constant one.
    """
    n = f.n
    omega = AltForm.basis(n, tuple(range(1, n + 1)))
    X = f.generator
    ix = interior(X, omega)
    alpha = AltForm.basis(n, (n,))
    rng = np.random.default_rng(seed)
    worst = 0.0
    for s in rng.random(samples):
        g = anosov_metric(f, float(s)) if metric is None else metric
        dev = hodge_star(ix, g) - alpha * (-1.0) ** (n - 1)
        worst = max(worst, dev.max_abs())
    nil = interior(X, ix).max_abs()
    return StarReport(float(worst), float(nil), tol, samples)


def _lie(field: FormField, mode: str, h: float) -> FormField:
    return field.lie_derivative_field(mode, h)


def adjoint_residual(xi: FormField, eta: FormField, quad: QuadratureSpec | None = None, mode: str = "analytic",
                     h: float = FD_STEP) -> L2Result:
    """<L_X xi, eta> - (-1)^(k(n-k)+1) <xi, *L_X* eta>, integrated pointwise on one point set.

    In finite-difference mode the run is repeated with step 2h and the
    change is added to sigma, so the Richardson truncation error is part
    of the error bar.
    """
    if xi.degree != eta.degree:
        raise ValueError(f"degree mismatch: {xi.degree} vs {eta.degree}")
    f, n, k = xi.model, xi.model.n, xi.degree
    sign = (-1.0) ** (k * (n - k) + 1)

    def run(step: float) -> L2Result:
        lxi = _lie(xi, mode, step)
        adj = _lie(eta.star(), mode, step).star()

        def integrand(x, s):
            return pointwise_inner(lxi, eta, x, s) - sign * pointwise_inner(xi, adj, x, s)

        return integrate_function(f, integrand, quad)

    res = run(h)
    if mode == "finite_difference":
        coarse = run(2 * h)
        res = L2Result(res.value, res.sigma + abs(res.value - coarse.value), res.target, res.replicas)
    return res


def orthogonality_check(theta: FormField, quad: QuadratureSpec | None = None, mode: str = "analytic",
                        h: float = FD_STEP) -> L2Result:
    """<L_X Theta, i_X Omega>_g for an (n-1)-form Theta."""
    f = theta.model
    if theta.degree != f.n - 1:
        raise ValueError(f"Theta must have degree n - 1 = {f.n - 1}")
    lth, ix = _lie(theta, mode, h), ixomega_field(f)
    res = l2_inner(lth, ix, quad)
    if mode == "finite_difference":
        coarse = l2_inner(_lie(theta, mode, 2 * h), ix, quad)
        res = L2Result(res.value, res.sigma + abs(res.value - coarse.value), res.target, res.replicas)
    return res


def _need_d(omega: FormField):
    if not omega.analytic:
        raise TypeError("procedural form without exterior derivative")


def weak_closedness(omega: FormField, quad: QuadratureSpec | None = None) -> L2Result:
    """int_M d(omega) ^ alpha for an (n-2)-form omega."""
    _need_d(omega)
    f = omega.model
    if omega.degree != f.n - 2:
        raise ValueError(f"omega must have degree n - 2 = {f.n - 2}")
    top = omega.exterior_derivative().wedge_constant(AltForm.basis(f.n, (f.n,)))
    # the full coframe wedge equals the coordinate volume form
    return integrate_function(f, lambda x, s: top.coefficients_batch(x, s)[:, 0], quad)


def decomposition_consistency(omega: FormField, quad: QuadratureSpec | None = None) -> tuple[L2Result, L2Result]:
    """Both sides of int d(omega) ^ alpha = (-1)^(n-1) <d omega, *alpha>_g."""
    _need_d(omega)
    f = omega.model
    direct = weak_closedness(omega, quad)
    paired = l2_inner(omega.exterior_derivative(), alpha_field(f).star(), quad)
    sign = (-1.0) ** (f.n - 1)
    return direct, L2Result(sign * paired.value, paired.sigma, paired.target, paired.replicas)


@dataclass(frozen=True)
class OrbitIntegral:
    point: Point
    period: float
    value: float
    return_distance: float

    def to_dict(self) -> dict:
        return {"x": list(self.point.x), "s": self.point.s, "period": self.period, "value": self.value,
                "return_distance": self.return_distance}


def orbit_obstruction(omega: FormField, point: Point, period: float, level: int = 2) -> OrbitIntegral:
    """int_0^period omega(X) (degree 1) or omega (degree 0) along the orbit of point."""
    f = omega.model
    if omega.degree not in (0, 1):
        raise ValueError("orbit integrals are defined for degrees 0 and 1")
    if not period > 0:
        raise ValueError("period must be positive")
    back = flow(f, point, period)
    dist = point.distance(back)
    if dist > ORBIT_RETURN_TOL:
        raise ValueError(f"start point is not periodic with period {period} (return distance {dist:.3g})")
    marks = [j * 0.5 - point.s for j in range(0, math.ceil(2 * (point.s + period)) + 1)]
    for b in omega.breakpoints:
        marks.extend(j + b - point.s for j in range(0, math.ceil(point.s + period) + 1))
    marks = np.array(marks)
    edges = np.unique(np.concatenate([[0.0], marks[(marks > 1e-12) & (marks < period - 1e-12)], [period]]))
    t, w = gauss_panels(refine_breaks(edges, level))
    x, s, ms = f.flow_batch(point.x, point.s, t)
    V = np.broadcast_to(f.generator, (len(t), omega.degree, f.n))
    vals = omega.evaluate_batch(x, s, V)
    return OrbitIntegral(point, float(period), float(np.dot(w, vals)), float(dist))
