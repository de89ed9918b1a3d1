"""Exterior algebra over a finite-dimensional oriented inner-product space.

Forms are stored sparsely: an index set {i_1 < ... < i_k} (1-based) is
encoded as the bit mask sum(1 << (i - 1)).  Signs of reorderings are
obtained by counting transpositions on the masks, so every operation on
forms with exact coefficients is exact up to floating-point rounding.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Iterable, Mapping, Sequence

import numpy as np

from .constants import EXACT_TOL, MAX_DIM

__all__ = [
    "AltForm",
    "MetricFrame",
    "mask_of",
    "indices_of",
    "basis_masks",
    "merge_sign",
    "wedge",
    "interior",
    "hodge_star",
    "hodge_matrix",
    "inner",
    "inner_matrix",
    "compound",
    "k_volume",
    "log_k_volume",
    "dual_one_form",
    "volume_form",
    "selftest",
]


def mask_of(indices: Iterable[int]) -> int:
    """Bit mask of a 1-based index set; rejects repeated indices."""
    mask = 0
    for i in indices:
        if i < 1:
            raise ValueError(f"indices are 1-based, got {i}")
        bit = 1 << (i - 1)
        if mask & bit:
            raise ValueError(f"repeated index {i}")
        mask |= bit
    return mask


def indices_of(mask: int) -> tuple[int, ...]:
    out = []
    i = 1
    while mask:
        if mask & 1:
            out.append(i)
        mask >>= 1
        i += 1
    return tuple(out)


@lru_cache(maxsize=None)
def basis_masks(n: int, k: int) -> tuple[int, ...]:
    """Masks of all k-subsets of {1..n} in lexicographic order."""
    return tuple(mask_of(c) for c in itertools.combinations(range(1, n + 1), k))


@lru_cache(maxsize=None)
def _position(n: int, k: int) -> dict[int, int]:
    return {m: i for i, m in enumerate(basis_masks(n, k))}


def merge_sign(a: int, b: int) -> int:
    """Sign of the permutation sorting the concatenation (a, b) of two
    disjoint index sets; 0 if they intersect."""
    if a & b:
        return 0
    swaps = 0
    while b:
        low = b & -b
        # elements of a above this element of b must hop over it
        swaps += bin(a & ~((low << 1) - 1)).count("1")
        b ^= low
    return -1 if swaps & 1 else 1


@dataclass(frozen=True)
class AltForm:
    """An alternating k-form on R^n with sparse coefficients.

    ``coeffs`` maps index-set masks to reals; absent keys are zero.
    """

    n: int
    k: int
    coeffs: Mapping[int, float] = field(default_factory=dict)

    def __post_init__(self):
        if not 0 <= self.n <= MAX_DIM:
            raise ValueError(f"dimension {self.n} outside [0, {MAX_DIM}]")
        if not 0 <= self.k <= self.n:
            raise ValueError(f"degree {self.k} outside [0, {self.n}]")
        full = (1 << self.n) - 1
        clean = {}
        for m, c in self.coeffs.items():
            if m & ~full or bin(m).count("1") != self.k:
                raise ValueError(f"index set {indices_of(m)} is not a {self.k}-subset of 1..{self.n}")
            if c != 0.0:
                clean[m] = float(c)
        object.__setattr__(self, "coeffs", clean)

    @classmethod
    def basis(cls, n: int, indices: Sequence[int], coeff: float = 1.0) -> "AltForm":
        """The form coeff * dx^{i_1} ^ ... ^ dx^{i_k}, any index order."""
        indices = tuple(indices)
        mask = mask_of(indices)
        # sign of sorting the given order
        sign = 1
        for a, b in itertools.combinations(range(len(indices)), 2):
            if indices[a] > indices[b]:
                sign = -sign
        return cls(n, len(indices), {mask: sign * coeff})

    @classmethod
    def zero(cls, n: int, k: int) -> "AltForm":
        return cls(n, k, {})

    @classmethod
    def scalar(cls, n: int, value: float) -> "AltForm":
        return cls(n, 0, {0: value})

    @classmethod
    def from_dense(cls, n: int, k: int, values: Sequence[float]) -> "AltForm":
        masks = basis_masks(n, k)
        if len(values) != len(masks):
            raise ValueError(f"expected {len(masks)} coefficients, got {len(values)}")
        return cls(n, k, dict(zip(masks, map(float, values))))

    def to_dense(self) -> np.ndarray:
        pos = _position(self.n, self.k)
        out = np.zeros(len(pos))
        for m, c in self.coeffs.items():
            out[pos[m]] = c
        return out

    def __getitem__(self, indices: Sequence[int]) -> float:
        return self.coeffs.get(mask_of(indices), 0.0)

    def _check(self, other: "AltForm"):
        if not isinstance(other, AltForm):
            return NotImplemented
        if (self.n, self.k) != (other.n, other.k):
            raise ValueError(f"cannot combine ({self.n},{self.k}) with ({other.n},{other.k}) forms")

    def __add__(self, other: "AltForm") -> "AltForm":
        self._check(other)
        out = dict(self.coeffs)
        for m, c in other.coeffs.items():
            out[m] = out.get(m, 0.0) + c
        return AltForm(self.n, self.k, out)

    def __neg__(self) -> "AltForm":
        return AltForm(self.n, self.k, {m: -c for m, c in self.coeffs.items()})

    def __sub__(self, other: "AltForm") -> "AltForm":
        return self + (-other)

    def __mul__(self, scale: float) -> "AltForm":
        return AltForm(self.n, self.k, {m: scale * c for m, c in self.coeffs.items()})

    __rmul__ = __mul__

    def max_abs(self) -> float:
        return max((abs(c) for c in self.coeffs.values()), default=0.0)

    def __call__(self, *vectors) -> float:
        """Evaluate on k vectors: sum_I c_I det(V[I, :])."""
        if len(vectors) != self.k:
            raise ValueError(f"{self.k}-form evaluated on {len(vectors)} vectors")
        if self.k == 0:
            return self.coeffs.get(0, 0.0)
        V = np.asarray(vectors, dtype=float).T
        total = 0.0
        for m, c in self.coeffs.items():
            rows = [i - 1 for i in indices_of(m)]
            total += c * np.linalg.det(V[rows, :])
        return float(total)


def wedge(a: AltForm, b: AltForm) -> AltForm:
    """Exterior product.  Degree overflow yields the zero n-form."""
    if a.n != b.n:
        raise ValueError(f"dimension mismatch {a.n} != {b.n}")
    if a.k + b.k > a.n:
        return AltForm.zero(a.n, a.n)
    out: dict[int, float] = {}
    for ma, ca in a.coeffs.items():
        for mb, cb in b.coeffs.items():
            s = merge_sign(ma, mb)
            if s:
                m = ma | mb
                out[m] = out.get(m, 0.0) + s * ca * cb
    return AltForm(a.n, a.k + b.k, out)


def interior(v: Sequence[float], a: AltForm) -> AltForm:
    """Contraction i_v a, inserting v in the first slot."""
    if a.k == 0:
        raise ValueError("interior product of a 0-form is undefined")
    v = np.asarray(v, dtype=float)
    if v.shape != (a.n,):
        raise ValueError(f"vector of length {v.shape} for a form on R^{a.n}")
    out: dict[int, float] = {}
    for m, c in a.coeffs.items():
        for pos, i in enumerate(indices_of(m)):
            if v[i - 1] == 0.0:
                continue
            rest = m & ~(1 << (i - 1))
            sign = -1.0 if pos & 1 else 1.0
            out[rest] = out.get(rest, 0.0) + sign * v[i - 1] * c
    return AltForm(a.n, a.k - 1, out)


def compound(M: np.ndarray, k: int) -> np.ndarray:
    """k-th compound matrix: all k x k minors, rows and columns in
    lexicographic subset order."""
    M = np.asarray(M, dtype=float)
    rows, cols = M.shape
    if k == 0:
        return np.ones((1, 1))
    rc = np.array(list(itertools.combinations(range(rows), k)))
    cc = np.array(list(itertools.combinations(range(cols), k)))
    sub = M[rc[:, None, :, None], cc[None, :, None, :]]
    return np.linalg.det(sub)


@dataclass(frozen=True, eq=False)
class MetricFrame:
    """Constant inner product on R^n with an orientation and reference volume.

    The reference volume form is ``volume_scale * vol(g)`` where vol(g) is
    the positively oriented Riemannian volume; ``volume_scale = 1`` means
    the Hodge star is taken relative to vol(g) itself.
    """

    gram: np.ndarray
    orientation: int = 1
    volume_scale: float = 1.0

    def __post_init__(self):
        g = np.array(self.gram, dtype=float)
        if g.ndim != 2 or g.shape[0] != g.shape[1]:
            raise ValueError("gram must be square")
        if not np.allclose(g, g.T, rtol=0, atol=EXACT_TOL * max(1.0, np.abs(g).max())):
            raise ValueError("non-SPD metric: gram is not symmetric")
        g = 0.5 * (g + g.T)
        if np.linalg.eigvalsh(g).min() <= 0:
            raise ValueError("non-SPD metric: gram has a non-positive eigenvalue")
        if self.orientation not in (1, -1):
            raise ValueError("orientation must be +1 or -1")
        if not self.volume_scale > 0:
            raise ValueError("volume_scale must be positive")
        g.setflags(write=False)
        object.__setattr__(self, "gram", g)

    @classmethod
    def euclidean(cls, n: int) -> "MetricFrame":
        return cls(np.eye(n))

    @classmethod
    def with_coordinate_volume(cls, gram, orientation: int = 1) -> "MetricFrame":
        """Metric whose star is taken relative to dx^1 ^ ... ^ dx^n."""
        return cls(gram, orientation, float(np.linalg.det(gram)) ** -0.5)

    @property
    def n(self) -> int:
        return self.gram.shape[0]

    @property
    def covector_gram(self) -> np.ndarray:
        return np.linalg.inv(self.gram)


def _check_metric(a: AltForm, m: MetricFrame):
    if m.n != a.n:
        raise ValueError(f"metric of dimension {m.n} for forms on R^{a.n}")


def volume_form(m: MetricFrame) -> AltForm:
    """The reference volume form omega of the frame."""
    coeff = m.orientation * m.volume_scale * math.sqrt(np.linalg.det(m.gram))
    return AltForm(m.n, m.n, {(1 << m.n) - 1: coeff})


def inner_matrix(n: int, k: int, m: MetricFrame) -> np.ndarray:
    """Gram matrix of the induced inner product on k-forms (coordinate basis)."""
    return compound(m.covector_gram, k)


def inner(a: AltForm, b: AltForm, m: MetricFrame) -> float:
    if (a.n, a.k) != (b.n, b.k):
        raise ValueError(f"degree mismatch: {a.k} vs {b.k}")
    _check_metric(a, m)
    return float(a.to_dense() @ inner_matrix(a.n, a.k, m) @ b.to_dense())


@lru_cache(maxsize=None)
def _euclidean_star(n: int, k: int) -> np.ndarray:
    """Matrix of the Euclidean star on k-forms in an orthonormal coframe."""
    src = basis_masks(n, k)
    dst = _position(n, n - k)
    full = (1 << n) - 1
    S = np.zeros((len(dst), len(src)))
    for j, mask in enumerate(src):
        comp = full & ~mask
        S[dst[comp], j] = merge_sign(mask, comp)
    return S


def hodge_matrix(n: int, k: int, m: MetricFrame) -> np.ndarray:
    """Dense matrix of the Hodge star Lambda^k -> Lambda^(n-k).

    Computed by Cholesky-orthonormalising the coframe (Ginv = L L^T, so
    eps = L^{-1} dx is orthonormal and positively oriented), applying the
    Euclidean star there and converting back.
    """
    if m.n != n:
        raise ValueError(f"metric of dimension {m.n} for forms on R^{n}")
    L = np.linalg.cholesky(m.covector_gram)
    Linv = np.linalg.inv(L)
    to_eps = compound(L, k).T  # coefficients in dx -> coefficients in eps
    from_eps = compound(Linv, n - k).T
    return m.orientation * m.volume_scale * (from_eps @ _euclidean_star(n, k) @ to_eps)


def hodge_star(a: AltForm, m: MetricFrame) -> AltForm:
    _check_metric(a, m)
    return AltForm.from_dense(a.n, a.n - a.k, hodge_matrix(a.n, a.k, m) @ a.to_dense())


def k_volume(vs: Sequence[Sequence[float]], m: MetricFrame) -> float:
    """k-dimensional volume of the parallelepiped spanned by ``vs``."""
    V = np.asarray(vs, dtype=float)
    if V.ndim != 2 or not 1 <= V.shape[0] <= m.n or V.shape[1] != m.n:
        raise ValueError(f"need between 1 and {m.n} vectors of length {m.n}")
    det = np.linalg.det(V @ m.gram @ V.T)
    return math.sqrt(det) if det > 0 else 0.0


def log_k_volume(vs: Sequence[Sequence[float]], m: MetricFrame) -> float:
    """log of :func:`k_volume`, robust to widely different side lengths."""
    V = np.asarray(vs, dtype=float)
    norms = np.sqrt(np.einsum("ij,jk,ik->i", V, m.gram, V))
    if np.any(norms == 0):
        return -math.inf
    U = V / norms[:, None]
    det = np.linalg.det(U @ m.gram @ U.T)
    if det <= 0:
        return -math.inf
    return float(np.log(norms).sum() + 0.5 * math.log(det))


def dual_one_form(v: Sequence[float], m: MetricFrame) -> AltForm:
    """theta_v = <v, .>_m."""
    v = np.asarray(v, dtype=float)
    return AltForm.from_dense(m.n, 1, m.gram @ v)


def _random_spd(rng: np.random.Generator, n: int) -> np.ndarray:
    B = rng.normal(size=(n, n))
    return B @ B.T + n * np.eye(n) * 0.5


def _random_form(rng: np.random.Generator, n: int, k: int) -> AltForm:
    return AltForm.from_dense(n, k, rng.uniform(-1, 1, size=math.comb(n, k)))


def selftest(trials: int = 1000, seed: int = 0, max_n: int = 6) -> dict:
    """Randomised check of the star involution, the defining identity of
    the star and the dual-form identity; returns the maximum errors."""
    rng = np.random.default_rng(seed)
    errs = {"star_involution": 0.0, "star_defining_identity": 0.0, "dual_form_identity": 0.0}
    for _ in range(trials):
        n = int(rng.integers(1, max_n + 1))
        k = int(rng.integers(0, n + 1))
        m = MetricFrame(_random_spd(rng, n), orientation=int(rng.choice([-1, 1])))
        a = _random_form(rng, n, k)
        back = hodge_star(hodge_star(a, m), m)
        errs["star_involution"] = max(errs["star_involution"], (back - (-1) ** (k * (n - k)) * a).max_abs())

        xi, eta = _random_form(rng, n, k), _random_form(rng, n, k)
        lhs = wedge(xi, hodge_star(eta, m))
        rhs = inner(xi, eta, m) * volume_form(m)
        errs["star_defining_identity"] = max(errs["star_defining_identity"], (lhs - rhs).max_abs())

        v = rng.normal(size=n)
        lhs = hodge_star(interior(v, volume_form(m)), m)
        rhs = (-1) ** (n - 1) * dual_one_form(v, m)
        errs["dual_form_identity"] = max(errs["dual_form_identity"], (lhs - rhs).max_abs())
    return {
        "trials": trials,
        "seed": seed,
        "max_n": max_n,
        "max_error": errs,
        "tolerance": EXACT_TOL,
        "passed": all(e <= EXACT_TOL for e in errs.values()),
    }
