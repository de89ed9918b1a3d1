"""Backward contraction of parallelepipeds with a strong-unstable side.

A flow is asymmetric when Tf_{-t} shrinks every (n-2)-parallelepiped having
a side in E^uu exponentially fast.  For a codimension-one volume-preserving
flow the extremal configuration is the unstable section Y together with
n-3 strong-stable vectors, giving the rate nu of the stable bundle.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .constants import SPLIT_DROP_NORM
from .model import Point, SuspensionFlow, TangentVector, anosov_metric, splitting

__all__ = [
    "RateFit",
    "Series",
    "AsymmetryVerdict",
    "default_t_grid",
    "unstable_section",
    "contraction_series",
    "fit_rate",
    "is_asymmetric",
]


def default_t_grid() -> np.ndarray:
    return np.linspace(0.0, 40.0, 81)


@dataclass(frozen=True)
class RateFit:
    C_hat: float
    nu_hat: float
    r2: float
    t_range: tuple[float, float]

    def bound(self, t) -> np.ndarray:
        return self.C_hat * np.exp(-self.nu_hat * np.asarray(t, dtype=float))


@dataclass(frozen=True, eq=False)
class Series:
    """Log-volumes of Tf_{-t}(sides) on a time grid."""

    t: np.ndarray
    log_volume: np.ndarray
    label: str = ""

    @property
    def volume(self) -> np.ndarray:
        return np.exp(self.log_volume)

    def pairs(self) -> list[tuple[float, float]]:
        return list(zip(self.t.tolist(), self.volume.tolist()))


def unstable_section(f: SuspensionFlow, p: Point, which: int = 0) -> TangentVector:
    """Unit vector (Anosov metric) along the ``which``-th unstable eigen direction."""
    Q = f.frame
    idx = np.flatnonzero(f.automorphism.unstable_mask)[which]
    return TangentVector.from_components(p, Q[:, idx] * math.exp(-p.s * f.log_moduli[idx]))


def _log_volumes(f: SuspensionFlow, p: Point, V: np.ndarray, taus: np.ndarray) -> np.ndarray:
    """log k-volume of Tf_tau(V) in the Anosov metric at the image point.

    In the orthonormal frame at the image the block-b coordinates of a
    transported vector are rot_b^m c_b |mu_b|^(s + tau); rows are normalised
    in log space before the Gram determinant is taken.
    """
    C = V @ f.coframe.T  # (k, n)
    # roundoff from the frame change would otherwise be amplified by e^{|lambda| t}
    C = np.where(np.abs(C) <= SPLIT_DROP_NORM * np.abs(C).max(axis=1, keepdims=True), 0.0, C)
    ms = np.floor(p.s + taus).astype(np.int64)
    R = np.eye(f.n)[None].repeat(len(taus), axis=0)
    R[:, :-1, :-1] = f.automorphism.eigen_rotation(ms)
    rot = np.einsum("tij,kj->tki", R, C)  # (T, k, n)
    logscale = (p.s + taus)[:, None] * f.log_moduli[None, :]  # (T, n)
    with np.errstate(divide="ignore"):
        logabs = np.log(np.abs(rot)) + logscale[:, None, :]
    top = logabs.max(axis=2, keepdims=True)
    rows = np.sign(rot) * np.exp(logabs - top)
    lognorm = top[..., 0] + 0.5 * np.log((rows**2).sum(axis=2))
    unit = rows / np.sqrt((rows**2).sum(axis=2, keepdims=True))
    det = np.linalg.det(unit @ np.swapaxes(unit, 1, 2))
    with np.errstate(divide="ignore"):
        return lognorm.sum(axis=1) + 0.5 * np.log(np.clip(det, 0.0, None))


def contraction_series(f: SuspensionFlow, p: Point, sides: Sequence[TangentVector], t_grid=None,
                       label: str = "") -> Series:
    """Volumes of Tf_{-t}(v_1 ^ ... ^ v_j ^ Y) for t on the grid.

    One side must lie in E^uu; the others are arbitrary but the set must be
    linearly independent.
    """
    t = default_t_grid() if t_grid is None else np.asarray(t_grid, dtype=float)
    if not 1 <= len(sides) <= f.n - 2:
        raise ValueError(f"need between 1 and n - 2 = {f.n - 2} sides")
    V = np.array([v.components for v in sides])
    for v in sides:
        if v.base != p:
            raise ValueError("side is not based at p")
    eig = V @ f.coframe.T
    uu = f.automorphism.unstable_mask
    in_uu = [np.abs(c[:-1][~uu]).max(initial=0.0) + abs(c[-1]) <= 1e-12 * np.abs(c).max() for c in eig]
    if not any(in_uu):
        raise ValueError("no side lies in E^uu")
    logs = _log_volumes(f, p, V, -t)
    if not np.isfinite(logs[0]) or logs[0] < math.log(1e-12):
        raise ValueError("degenerate side set: zero volume at t = 0")
    return Series(t, logs, label)


def fit_rate(series) -> RateFit:
    """Least squares log V = log C - nu t."""
    if isinstance(series, Series):
        t, y = series.t, series.log_volume
    else:
        arr = np.asarray(series, dtype=float)
        t, vol = arr[:, 0], arr[:, 1]
        if np.any(vol <= 0):
            raise ValueError("nonpositive volumes: pass a log-domain Series instead")
        y = np.log(vol)
    if len(t) < 8 or t.max() - t.min() < 10:
        raise ValueError("fit needs at least 8 samples spread over 10 time units")
    if not np.all(np.isfinite(y)):
        raise ValueError("non-finite log volume in series")
    slope, icpt = np.polyfit(t, y, 1)
    resid = y - (slope * t + icpt)
    ss_tot = float(((y - y.mean()) ** 2).sum())
    ss_res = float((resid**2).sum())
    r2 = 1.0 if ss_tot == 0 else 1.0 - ss_res / ss_tot
    return RateFit(float(math.exp(icpt)), float(-slope), r2, (float(t.min()), float(t.max())))


@dataclass(frozen=True, eq=False)
class AsymmetryVerdict:
    asymmetric: bool
    worst: RateFit
    min_nu: float
    min_r2_worst: float
    bound_violations: int
    fits: list = field(repr=False)
    series: list = field(repr=False)


def _unit_sides(f: SuspensionFlow, p: Point, vecs: np.ndarray) -> list[TangentVector]:
    g = anosov_metric(f, p.s).gram
    return [TangentVector.from_components(p, v / math.sqrt(v @ g @ v)) for v in vecs]


def _stable_sides(f: SuspensionFlow, p: Point, count: int, rng: np.random.Generator) -> np.ndarray:
    """``count`` random Anosov-orthonormal vectors in E^ss at p."""
    Ess = splitting(f).Ess
    if count > Ess.shape[1]:
        raise ValueError("not enough stable directions")
    g = anosov_metric(f, p.s).gram
    B = Ess @ rng.normal(size=(Ess.shape[1], count))
    out = []
    for j in range(count):
        v = B[:, j]
        for w in out:
            v = v - (w @ g @ v) * w
        out.append(v / math.sqrt(v @ g @ v))
    return np.array(out).reshape(count, f.n)


def is_asymmetric(f: SuspensionFlow, samples: int = 100, tol: float = 1e-3, seed: int = 0,
                  t_grid=None) -> AsymmetryVerdict:
    """Sample base points and side configurations and fit contraction rates.

    For each base point three configurations are measured: Y with n-3
    stable sides (the extremal case), Y with n-3 random sides, and Y with
    fewer random sides.  The global constants are the smallest rate and
    largest prefactor among extremal fits; every series must stay below
    C e^{-nu t} (1 + tol) and every fitted rate must exceed tol.
    """
    if f.n < 4:
        raise ValueError("asymmetry makes sense only if n >= 4")
    if samples < 1:
        raise ValueError("samples must be >= 1")
    t = default_t_grid() if t_grid is None else np.asarray(t_grid, dtype=float)
    rng = np.random.default_rng(seed)
    k = f.n - 3
    worst_fits, all_fits, all_series = [], [], []
    for i in range(samples):
        p = Point(tuple(rng.random(f.m)), float(rng.random()))
        Y = unstable_section(f, p)
        configs = [("worst", _unit_sides(f, p, _stable_sides(f, p, k, rng)))]
        configs.append(("random", _unit_sides(f, p, rng.normal(size=(k, f.n)))))
        j = int(rng.integers(0, k)) if k > 0 else 0
        configs.append((f"lower{j + 1}", _unit_sides(f, p, rng.normal(size=(j, f.n))) if j else []))
        for name, sides in configs:
            s = contraction_series(f, p, [Y] + sides, t, label=f"{i}:{name}")
            fit = fit_rate(s)
            all_series.append(s)
            all_fits.append(fit)
            if name == "worst":
                worst_fits.append(fit)
    nu = min(fit.nu_hat for fit in worst_fits)
    C = max(fit.C_hat for fit in worst_fits)
    worst = RateFit(C, nu, min(fit.r2 for fit in worst_fits), (float(t.min()), float(t.max())))
    violations = 0
    for s in all_series:
        limit = math.log(C * (1 + tol)) - nu * s.t
        violations += int(np.any(s.log_volume > limit))
    min_nu = min(fit.nu_hat for fit in all_fits)
    return AsymmetryVerdict(
        asymmetric=bool(min_nu > tol and violations == 0),
        worst=worst,
        min_nu=min_nu,
        min_r2_worst=worst.r2,
        bound_violations=violations,
        fits=all_fits,
        series=all_series,
    )
