"""Deterministic quadrature rules.

Time integrals use composite Gauss-Legendre panels; manifold integrals use
randomly shifted rank-1 lattice rules (or Latin-hypercube samples) on the
unit cube, with an error bar taken from the spread of the shifted replicas.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable

import numpy as np

from .constants import GAUSS_NODES, KOROBOV_PARAMETER, LATTICE_N, LATTICE_SHIFTS


@lru_cache(maxsize=None)
def _legendre(nodes: int) -> tuple[np.ndarray, np.ndarray]:
    x, w = np.polynomial.legendre.leggauss(nodes)
    return x, w


def refine_breaks(breaks: np.ndarray, level: int) -> np.ndarray:
    """Split every interval of ``breaks`` into 2**level equal panels."""
    breaks = np.asarray(breaks, dtype=float)
    if level == 0 or len(breaks) < 2:
        return breaks
    parts = 2**level
    frac = np.arange(parts) / parts
    left, width = breaks[:-1], np.diff(breaks)
    inner = (left[:, None] + width[:, None] * frac[None, :]).ravel()
    return np.append(inner, breaks[-1])


def gauss_panels(breaks: np.ndarray, nodes: int = GAUSS_NODES) -> tuple[np.ndarray, np.ndarray]:
    """Nodes and weights of the composite Gauss rule on consecutive panels."""
    breaks = np.asarray(breaks, dtype=float)
    if len(breaks) < 2:
        return np.empty(0), np.empty(0)
    x, w = _legendre(nodes)
    mid = 0.5 * (breaks[1:] + breaks[:-1])
    half = 0.5 * np.diff(breaks)
    t = (mid[:, None] + half[:, None] * x[None, :]).ravel()
    wt = (half[:, None] * w[None, :]).ravel()
    return t, wt


def composite_gauss(func: Callable[[np.ndarray], np.ndarray], breaks, nodes: int = GAUSS_NODES) -> float:
    t, w = gauss_panels(breaks, nodes)
    if t.size == 0:
        return 0.0
    return float(np.dot(w, func(t)))


def korobov_vector(n: int, d: int, a: int = KOROBOV_PARAMETER) -> np.ndarray:
    return np.array([pow(a, j, n) for j in range(d)], dtype=np.int64)


def p2_criterion(z: np.ndarray, n: int) -> float:
    """Worst-case squared error of the lattice rule in the weighted
    Korobov space with smoothness 2 (all weights 1)."""
    k = np.arange(n, dtype=np.int64)
    prod = np.ones(n)
    for zj in z:
        x = (k * int(zj) % n) / n
        prod *= 1 + 2 * math.pi**2 * (x * x - x + 1.0 / 6)
    return float(prod.mean() - 1)


def periodize(u: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Sine transform s = u - sin(2 pi u) / (2 pi) and its Jacobian; makes
    integrands that are smooth but not periodic in u periodic to first order."""
    s = u - np.sin(2 * math.pi * u) / (2 * math.pi)
    return s, 1 - np.cos(2 * math.pi * u)


@dataclass(frozen=True)
class QuadratureSpec:
    """A seeded rule on [0,1)^d: ``rule`` is "lattice" or "stratified"."""

    rule: str = "lattice"
    N: int = LATTICE_N
    seed: int = 0
    shifts: int = LATTICE_SHIFTS

    def __post_init__(self):
        if self.rule not in ("lattice", "stratified"):
            raise ValueError(f"unknown rule {self.rule!r}")
        if self.N < 1:
            raise ValueError("N must be positive")
        if self.shifts < 8:
            raise ValueError("error bars need at least 8 independent replicas")

    def replicas(self, d: int) -> list[np.ndarray]:
        """The point sets, one (N, d) array per replica."""
        rng = np.random.default_rng(self.seed)
        if self.rule == "lattice":
            z = korobov_vector(self.N, d)
            base = (np.arange(self.N, dtype=np.int64)[:, None] * z[None, :] % self.N) / self.N
            return [np.mod(base + rng.random(d), 1.0) for _ in range(self.shifts)]
        out = []
        for _ in range(self.shifts):
            strata = np.stack([rng.permutation(self.N) for _ in range(d)], axis=1)
            out.append((strata + rng.random((self.N, d))) / self.N)
        return out

    def integrate(self, func: Callable[[np.ndarray], np.ndarray], d: int) -> tuple[float, float, np.ndarray]:
        """Mean over replicas, its standard error, and the replica values."""
        vals = np.array([np.sum(func(pts)) / self.N for pts in self.replicas(d)])
        return float(vals.mean()), float(vals.std(ddof=1) / math.sqrt(len(vals))), vals
