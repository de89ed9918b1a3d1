"""Solve L_X eta = xi in intermediate degrees by integrating along the flow.

Each argument vector is split along the constant decomposition
TM = E^cs + E^uu.  Terms whose vectors all lie in E^cs are integrated
forward, -int_0^T (f_tau^* xi) dtau; terms with an E^uu vector are integrated
backward, +int_0^T (f_{-tau}^* xi) dtau.  In both cases the integrand
contracts exponentially, so a finite horizon with an explicit tail bound
suffices.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .asymmetry import RateFit
from .constants import FD_STEP, MAX_REFINE_LEVEL, PANEL_LENGTH, SPLIT_DROP_NORM
from .forms import FormField, pullback_batch
from .model import Point, SuspensionFlow, flow
from .quadrature import gauss_panels, refine_breaks

__all__ = [
    "CaseTerm",
    "CaseSplit",
    "SolveResult",
    "ConvergenceProfile",
    "case_split",
    "eta_t",
    "solve",
    "residual_identity",
    "convergence_profile",
]

REFUSAL = "uniqueness not guaranteed; refused in solver mode"


@dataclass(frozen=True, eq=False)
class CaseTerm:
    sign: int
    coords: np.ndarray  # (k, n), eigen-coframe coordinates
    tags: tuple[str, ...]
    frame: np.ndarray = field(repr=False)

    @property
    def vectors(self) -> np.ndarray:
        """The term's vectors in suspension coordinates."""
        return self.coords @ self.frame.T

    @property
    def case(self) -> int:
        return 2 if "uu" in self.tags else 1


@dataclass(frozen=True, eq=False)
class CaseSplit:
    terms: list

    def reassemble(self, omega: FormField, p: Point) -> float:
        """sum of sign * omega(term) at p; equals omega(vs) by multilinearity."""
        x, s = np.array([p.x]), np.array([p.s])
        return float(sum(t.sign * omega.evaluate_batch(x, s, t.vectors[None])[0] for t in self.terms))


def _components(vs) -> np.ndarray:
    if isinstance(vs, np.ndarray):
        return np.atleast_2d(vs).astype(float)
    return np.array([v.components for v in vs], dtype=float)


def case_split(f: SuspensionFlow, vs) -> CaseSplit:
    """Expand v_j = v_j^cs + v_j^uu into 2^k terms.

    Within a term the uu-tagged vectors are moved to the front (stable
    order); ``sign`` is the parity of that reordering.  Pieces with norm
    below SPLIT_DROP_NORM are dropped.
    """
    V = _components(vs)
    C = V @ f.coframe.T
    uu = np.append(f.automorphism.unstable_mask, False)
    parts = {"uu": C * uu, "cs": C * ~uu}
    terms = []
    for tags in itertools.product(("cs", "uu"), repeat=len(V)):
        vecs = [parts[tag][j] for j, tag in enumerate(tags)]
        if any(np.linalg.norm(f.frame @ v) < SPLIT_DROP_NORM for v in vecs):
            continue
        order = sorted(range(len(tags)), key=lambda j: tags[j] != "uu")
        inversions = sum(1 for a in range(len(order)) for b in range(a + 1, len(order)) if order[a] > order[b])
        terms.append(CaseTerm(-1 if inversions % 2 else 1, np.array([vecs[j] for j in order]).reshape(len(V), f.n),
                              tuple(tags[j] for j in order), f.frame))
    return CaseSplit(terms)


def _check_degree(xi: FormField):
    n, k = xi.model.n, xi.degree
    if not 2 <= k <= n - 2:
        raise ValueError(f"degree {k} outside [2, {n - 2}]: {REFUSAL}")


def _breaks(s0: float, direction: int, t: float, field_breaks: Sequence[float]) -> np.ndarray:
    """Panel edges in tau on [0, t]: where the lifted roof coordinate
    s0 + direction*tau hits the panel grid (which contains every deck
    crossing) or a field breakpoint."""
    if t <= 0:
        return np.array([0.0])
    lo, hi = (s0, s0 + t) if direction > 0 else (s0 - t, s0)
    marks = [PANEL_LENGTH * j for j in range(math.floor(lo / PANEL_LENGTH), math.ceil(hi / PANEL_LENGTH) + 1)]
    for b in field_breaks:
        marks.extend(j + b for j in range(math.floor(lo) - 1, math.ceil(hi) + 1))
    taus = direction * (np.array(marks) - s0)
    inner = taus[(taus > 1e-12) & (taus < t - 1e-12)]
    return np.unique(np.concatenate([[0.0], inner, [t]]))


def _term_integral(xi: FormField, p: Point, C: np.ndarray, case: int, t: float, level: int) -> float:
    """Signed integral for one case term given in eigen coordinates C:
    -int f_tau^* (case 1) or +int f_{-tau}^* (case 2)."""
    direction = 1 if case == 1 else -1
    edges = refine_breaks(_breaks(p.s, direction, t, xi.breakpoints), level)
    taus, w = gauss_panels(edges)
    if taus.size == 0:
        return 0.0
    vals = pullback_batch(xi, p, C, direction * taus, eigen=True)
    return float(-direction * np.dot(w, vals))


def _eta(xi: FormField, p: Point, split: CaseSplit, t: float, level: int) -> tuple[float, list[float]]:
    parts = [term.sign * _term_integral(xi, p, term.coords, term.case, t, level) for term in split.terms]
    return float(sum(parts)), parts


def eta_t(xi: FormField, p: Point, vs, t: float, level: int = 1) -> float:
    """The finite-time approximant eta_t(vs) at p."""
    _check_degree(xi)
    if t < 0:
        raise ValueError("t must be >= 0")
    return _eta(xi, p, case_split(xi.model, vs), t, level)[0]


@dataclass(frozen=True, eq=False)
class SolveResult:
    value: float
    horizon: float
    tail_bound: float
    quadrature_error: float
    case_breakdown: list = field(default_factory=list)
    refinement_level: int = 0
    converged: bool = True

    def to_dict(self) -> dict:
        return {
            "value": self.value,
            "T": self.horizon,
            "tail_bound": self.tail_bound,
            "quad_error": self.quadrature_error,
            "refinement_level": self.refinement_level,
            "converged": self.converged,
            "case_breakdown": self.case_breakdown,
        }


def _vector_norm(f: SuspensionFlow, p: Point, c: np.ndarray) -> float:
    """Anosov length of the vector with eigen coordinates c."""
    return math.sqrt(float((c**2 * f.metric_weights(p.s)).sum()))


def solve(xi: FormField, p: Point, vs, tol: float, rates: RateFit | None, horizon_cap: float | None = None,
          sup_norm: float | None = None) -> SolveResult:
    """eta(vs) at p, with horizon from the tail bound and Gauss refinement.

    The tail of each term is bounded by C e^{-nu T} / nu times
    sup|xi|_g times the product of the Anosov lengths of its vectors; the
    horizon makes the summed tail at most tol/2, and panels are halved
    until successive estimates agree to tol/2.
    """
    _check_degree(xi)
    if rates is None or not rates.nu_hat > 0:
        raise ValueError("contraction rate missing or not positive: convergence not guaranteed")
    if not tol > 0:
        raise ValueError("tol must be positive")
    f = xi.model
    split = case_split(f, vs)
    sup = xi.sup_norm() if sup_norm is None else sup_norm
    scale = sum(sup * math.prod(_vector_norm(f, p, c) for c in term.coords) for term in split.terms)
    C, nu = rates.C_hat, rates.nu_hat
    if scale == 0.0:
        T = 0.0
    else:
        T = max(0.0, math.log(C * scale / (nu * tol / 2)) / nu)
    if horizon_cap is not None:
        T = min(T, float(horizon_cap))
    tail = C * math.exp(-nu * T) / nu * scale
    prev, parts = _eta(xi, p, split, T, 0)
    err, level = math.inf, 0
    while level < MAX_REFINE_LEVEL:
        level += 1
        cur, parts = _eta(xi, p, split, T, level)
        err = abs(cur - prev)
        prev = cur
        if err <= tol / 2:
            break
    breakdown = [{"case": term.case, "tags": list(term.tags), "sign": term.sign, "contribution": c}
                 for term, c in zip(split.terms, parts)]
    return SolveResult(prev, T, tail, err, breakdown, level, bool(err <= tol / 2 and tail <= tol / 2 * (1 + 1e-9)))


def residual_identity(xi: FormField, p: Point, vs, t: float, h: float = FD_STEP, level: int = 2) -> float:
    """|L_X eta_t - (xi - f_{+-t}^* xi)| on vs at p.

    L_X eta_t is a Richardson-extrapolated central difference of eta_t
    along the flow (vectors transported with the point); the right side
    uses the exact pullback, with +t for case-1 terms and -t for case-2.
    """
    _check_degree(xi)
    f = xi.model
    split = case_split(f, vs)
    lhs = rhs = 0.0
    x0, s0 = np.array([p.x]), np.array([p.s])
    for term in split.terms:
        C = term.coords

        def shifted(step: float) -> float:
            q = flow(f, p, step)
            B = np.eye(f.n)
            B[:-1, :-1] = f.automorphism.eigen_power([math.floor(p.s + step)])[0]
            return _term_integral(xi, q, C @ B.T, term.case, t, level)

        def central(step: float) -> float:
            return (shifted(step) - shifted(-step)) / (2 * step)

        lhs += term.sign * (4 * central(h / 2) - central(h)) / 3
        direction = 1 if term.case == 1 else -1
        now = xi.evaluate_batch(x0, s0, term.vectors[None])[0]
        later = pullback_batch(xi, p, C, [direction * t], eigen=True)[0]
        rhs += term.sign * (now - later)
    return abs(lhs - rhs)


@dataclass(frozen=True, eq=False)
class ConvergenceProfile:
    rows: list  # (t, eta_t, |eta_t - eta_inf|)
    eta_inf: float
    slope: float
    r2: float


def convergence_profile(xi: FormField, p: Point, vs, t_list: Sequence[float], rates: RateFit,
                        tol: float = 1e-13) -> ConvergenceProfile:
    """eta_t against the converged value, with the log-linear decay slope."""
    t_arr = np.asarray(t_list, dtype=float)
    if np.any(np.diff(t_arr) <= 0):
        raise ValueError("t_list must be increasing")
    inf = solve(xi, p, vs, tol, rates).value
    split = case_split(xi.model, vs)
    rows = []
    for t in t_arr:
        val = _eta(xi, p, split, float(t), 2)[0]
        rows.append((float(t), val, abs(val - inf)))
    err = np.array([r[2] for r in rows])
    ok = err > 0
    slope, r2 = math.nan, math.nan
    if ok.sum() >= 2:
        y = np.log(err[ok])
        slope, icpt = np.polyfit(t_arr[ok], y, 1)
        ss_tot = float(((y - y.mean()) ** 2).sum())
        r2 = 1.0 - float(((y - slope * t_arr[ok] - icpt) ** 2).sum()) / ss_tot if ss_tot else 1.0
    return ConvergenceProfile(rows, inf, float(slope), float(r2))
