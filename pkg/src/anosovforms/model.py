"""Suspension flows of hyperbolic toral automorphisms.

The manifold is the mapping torus T^m x [0,1] / (x, 1) ~ (A x, 0), and the
flow moves the roof coordinate s at unit speed.  Everything is worked out on
the cylinder cover, where the deck map is (x, s) -> (A x, s - 1): whenever a
trajectory crosses s = 1 both the torus position and the torus part of any
transported tangent vector are multiplied by A (by A^{-1} crossing s = 0
downwards).

Tangent vectors are handled in the real (block-)eigenframe of A.  There the
tangent flow is block diagonal, each block being a signed scalar or a 2x2
rotation-scaling, so arbitrary powers are computed in log-polar form: a
per-coordinate log magnitude ``m * log|mu|`` and a sign or rotation angle.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

import numpy as np

from .constants import HYPERBOLIC_TOL, MAX_PERIODIC_POINTS
from .exterior import MetricFrame

__all__ = [
    "EigenBlock",
    "HyperbolicAutomorphism",
    "SuspensionFlow",
    "Point",
    "TangentVector",
    "Splitting",
    "HyperbolicityConstants",
    "DEFAULT_MATRIX",
    "build_default_model",
    "build_symmetric_model",
    "newton_root",
    "flow",
    "tangent_flow",
    "splitting",
    "canonical_alpha",
    "volume_form",
    "anosov_metric",
    "measure_constants",
    "periodic_points",
    "periodic_points_exact",
    "flow_checks",
]

DEFAULT_MATRIX = ((0, 1, 0), (0, 0, 1), (1, 1, 0))


def newton_root(coeffs: Sequence[float], x0: float, tol: float = 1e-15, maxiter: int = 100) -> float:
    """Newton iteration on the polynomial with ``coeffs`` (highest first)."""
    p = np.poly1d(coeffs)
    dp = p.deriv()
    x = float(x0)
    for _ in range(maxiter):
        step = p(x) / dp(x)
        x -= step
        if abs(step) <= tol * max(1.0, abs(x)):
            return x
    raise RuntimeError("Newton iteration did not converge")


def _int_det(M: Sequence[Sequence[int]]) -> int:
    """Exact determinant by fraction-free (Bareiss) elimination."""
    a = [[int(v) for v in row] for row in M]
    n = len(a)
    sign, prev = 1, 1
    for k in range(n - 1):
        if a[k][k] == 0:
            for r in range(k + 1, n):
                if a[r][k] != 0:
                    a[k], a[r] = a[r], a[k]
                    sign = -sign
                    break
            else:
                return 0
        for i in range(k + 1, n):
            for j in range(k + 1, n):
                a[i][j] = (a[i][j] * a[k][k] - a[i][k] * a[k][j]) // prev
        prev = a[k][k]
    return sign * a[n - 1][n - 1]


def _int_matmul(A, B):
    return [[sum(A[i][k] * B[k][j] for k in range(len(B))) for j in range(len(B[0]))] for i in range(len(A))]


def _int_power(A, p: int):
    m = len(A)
    out = [[int(i == j) for j in range(m)] for i in range(m)]
    base = [list(map(int, row)) for row in A]
    while p:
        if p & 1:
            out = _int_matmul(out, base)
        base = _int_matmul(base, base)
        p >>= 1
    return out


@dataclass(frozen=True)
class EigenBlock:
    """One diagonal block of the real eigenframe.

    ``kind`` is "real" (scalar ``sign * modulus``) or "rotation" (the 2x2
    block ``modulus * [[cos, -sin], [sin, cos]]`` of ``angle``).
    """

    kind: str
    modulus: float
    start: int
    angle: float = 0.0
    sign: int = 1

    @property
    def size(self) -> int:
        return 1 if self.kind == "real" else 2

    @property
    def log_modulus(self) -> float:
        return math.log(self.modulus)

    @property
    def unstable(self) -> bool:
        return self.modulus > 1


@dataclass(frozen=True, eq=False)
class HyperbolicAutomorphism:
    """Integer matrix with |det| = 1 and no eigenvalue on the unit circle.

    ``frame`` holds the real eigenframe as columns: unstable blocks first
    (largest modulus first), then stable ones.  The stable columns are
    rescaled so that det(frame) = +1.
    """

    matrix: np.ndarray
    blocks: tuple[EigenBlock, ...] = field(init=False)
    frame: np.ndarray = field(init=False)
    frame_inv: np.ndarray = field(init=False)

    def __post_init__(self):
        A = np.array(self.matrix)
        if A.ndim != 2 or A.shape[0] != A.shape[1] or A.shape[0] < 2:
            raise ValueError("automorphism matrix must be square of size >= 2")
        if not np.all(np.equal(np.mod(A, 1), 0)):
            raise ValueError("automorphism matrix must have integer entries")
        A = A.astype(np.int64)
        det = _int_det(A.tolist())
        if abs(det) != 1:
            raise ValueError(f"|det A| must be 1, got {det}")
        A.setflags(write=False)
        object.__setattr__(self, "matrix", A)

        vals, vecs = np.linalg.eig(A.astype(float))
        if np.any(np.abs(np.abs(vals) - 1) <= HYPERBOLIC_TOL):
            raise ValueError("not hyperbolic: eigenvalue of modulus 1")
        order = sorted(range(len(vals)), key=lambda i: (-abs(vals[i]), -vals[i].imag))
        cols, specs = [], []
        used = set()
        for i in order:
            if i in used:
                continue
            lam = vals[i]
            if abs(lam.imag) <= 1e-12 * abs(lam):
                used.add(i)
                v = np.real(vecs[:, i])
                cols.append(v / np.linalg.norm(v))
                specs.append("real")
            else:
                # pair with the conjugate eigenvalue
                j = min((j for j in range(len(vals)) if j not in used and j != i),
                        key=lambda j: abs(vals[j] - np.conj(lam)))
                used.update((i, j))
                v = vecs[:, i] if lam.imag > 0 else vecs[:, j]
                cols.extend([np.real(v), np.imag(v)])
                specs.append("rotation")
        P = np.column_stack(cols)
        if np.linalg.cond(P) > 1e8:
            raise ValueError("automorphism is not diagonalisable over C")
        stable = np.array([False] * P.shape[1])
        pos = 0
        moduli = []
        for kind in specs:
            size = 1 if kind == "real" else 2
            blk = np.linalg.solve(P, A @ P)[pos:pos + size, pos:pos + size]
            moduli.append(math.sqrt(abs(np.linalg.det(blk))) if size == 2 else abs(blk[0, 0]))
            stable[pos:pos + size] = moduli[-1] < 1
            pos += size
        detP = np.linalg.det(P)
        P[:, stable] *= abs(detP) ** (-1.0 / stable.sum())
        if np.linalg.det(P) < 0:
            P[:, -1] *= -1
        Pinv = np.linalg.inv(P)
        B = Pinv @ A @ P
        blocks, pos = [], 0
        for kind, mod in zip(specs, moduli):
            if kind == "real":
                blocks.append(EigenBlock("real", abs(float(B[pos, pos])), pos, sign=int(np.sign(B[pos, pos]))))
                pos += 1
            else:
                blk = B[pos:pos + 2, pos:pos + 2]
                r = math.sqrt(np.linalg.det(blk))
                blocks.append(EigenBlock("rotation", r, pos, angle=math.atan2(blk[1, 0], blk[0, 0])))
                pos += 2
        P.setflags(write=False)
        Pinv.setflags(write=False)
        object.__setattr__(self, "blocks", tuple(blocks))
        object.__setattr__(self, "frame", P)
        object.__setattr__(self, "frame_inv", Pinv)

    @property
    def m(self) -> int:
        return self.matrix.shape[0]

    @property
    def det(self) -> int:
        return _int_det(self.matrix.tolist())

    @property
    def inverse(self) -> np.ndarray:
        """Exact integer inverse (adjugate times det = +-1)."""
        inv = np.rint(np.linalg.inv(self.matrix.astype(float))).astype(np.int64)
        if not np.array_equal(inv @ self.matrix, np.eye(self.m, dtype=np.int64)):
            raise ArithmeticError("integer inverse failed")
        return inv

    @property
    def log_moduli(self) -> np.ndarray:
        """log|mu| for each eigenframe coordinate."""
        out = np.empty(self.m)
        for b in self.blocks:
            out[b.start:b.start + b.size] = b.log_modulus
        return out

    @property
    def unstable_mask(self) -> np.ndarray:
        return self.log_moduli > 0

    def block_matrix(self) -> np.ndarray:
        """The real Jordan form frame_inv @ A @ frame, with exact structure."""
        return self.eigen_power(1)[0]

    def eigen_rotation(self, ms) -> np.ndarray:
        """Orthogonal part of B^m in the eigenframe, shape (len(ms), m, m)."""
        ms = np.atleast_1d(np.asarray(ms, dtype=np.int64))
        out = np.zeros((len(ms), self.m, self.m))
        for b in self.blocks:
            i = b.start
            if b.kind == "real":
                out[:, i, i] = np.where(ms % 2 == 0, 1.0, float(b.sign))
            else:
                ang = ms * b.angle
                c, s = np.cos(ang), np.sin(ang)
                out[:, i, i], out[:, i, i + 1] = c, -s
                out[:, i + 1, i], out[:, i + 1, i + 1] = s, c
        return out

    def eigen_power(self, ms) -> np.ndarray:
        """B^m in the eigenframe from log-polar block data."""
        ms = np.atleast_1d(np.asarray(ms, dtype=np.int64))
        scale = np.exp(ms[:, None] * self.log_moduli[None, :])
        return self.eigen_rotation(ms) * scale[:, None, :]

    def characteristic_polynomial(self) -> list[int]:
        """Integer coefficients of det(x I - A), highest degree first."""
        return [int(round(c)) for c in np.poly(self.matrix.astype(float))]


def _unit_mod(v: float) -> float:
    r = float(v) % 1.0
    return 0.0 if r >= 1.0 else r


@dataclass(frozen=True)
class Point:
    """A point of the suspension, normalised to the unit-cube fundamental domain."""

    x: tuple[float, ...]
    s: float

    def __post_init__(self):
        x = tuple(_unit_mod(v) for v in self.x)
        s = float(self.s)
        if not 0.0 <= s < 1.0:
            raise ValueError(f"roof coordinate {s} outside [0, 1); use flow() to normalise")
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "s", s)

    def distance(self, other: "Point") -> float:
        """Distance on the cube with torus coordinates taken mod 1."""
        dx = np.asarray(self.x) - np.asarray(other.x)
        dx = np.abs(dx - np.rint(dx))
        ds = abs(self.s - other.s)
        ds = min(ds, 1 - ds)
        return float(max(dx.max(initial=0.0), ds))


@dataclass(frozen=True, eq=False)
class TangentVector:
    base: Point
    torus_part: np.ndarray
    s_part: float = 0.0

    def __post_init__(self):
        t = np.array(self.torus_part, dtype=float)
        if t.shape != (len(self.base.x),):
            raise ValueError("torus part must match the torus dimension")
        t.setflags(write=False)
        object.__setattr__(self, "torus_part", t)
        object.__setattr__(self, "s_part", float(self.s_part))

    @property
    def components(self) -> np.ndarray:
        return np.append(self.torus_part, self.s_part)

    @classmethod
    def from_components(cls, base: Point, comps) -> "TangentVector":
        comps = np.asarray(comps, dtype=float)
        return cls(base, comps[:-1], comps[-1])


@dataclass(frozen=True, eq=False)
class SuspensionFlow:
    """Suspension of ``automorphism`` under the constant roof 1.

    Coordinates on each tangent space are (torus components, s component);
    the generator X is the last unit vector.  ``frame`` is the n x n
    eigenframe block-diag(P, 1): its columns are the eigen directions
    followed by X, and its dual rows are the coframe theta_1..theta_m, ds.
    """

    automorphism: HyperbolicAutomorphism
    roof: float = 1.0

    def __post_init__(self):
        if self.roof != 1.0:
            raise ValueError("only the constant roof 1 is supported")
        if self.automorphism.det != 1:
            raise ValueError("det A = -1 gives a non-orientable suspension")

    @property
    def m(self) -> int:
        return self.automorphism.m

    @property
    def n(self) -> int:
        return self.m + 1

    @property
    def A(self) -> np.ndarray:
        return self.automorphism.matrix

    @property
    def generator(self) -> np.ndarray:
        X = np.zeros(self.n)
        X[-1] = 1.0
        return X

    @property
    def frame(self) -> np.ndarray:
        Q = np.eye(self.n)
        Q[:-1, :-1] = self.automorphism.frame
        return Q

    @property
    def coframe(self) -> np.ndarray:
        Qi = np.eye(self.n)
        Qi[:-1, :-1] = self.automorphism.frame_inv
        return Qi

    @property
    def log_moduli(self) -> np.ndarray:
        """log|mu| per eigenframe coordinate, 0 for the flow direction."""
        return np.append(self.automorphism.log_moduli, 0.0)

    @property
    def unstable_dim(self) -> int:
        return int(self.automorphism.unstable_mask.sum())

    @property
    def rho(self) -> float:
        """Largest eigenvalue modulus."""
        return max(b.modulus for b in self.automorphism.blocks)

    def metric_weights(self, s) -> np.ndarray:
        """Squared lengths of the eigenframe vectors in the Anosov metric at
        roof coordinate s: |mu|^(2 s) per coordinate; shape (..., n)."""
        s = np.asarray(s, dtype=float)
        return np.exp(2 * s[..., None] * self.log_moduli)

    def torus_orbit(self, x: np.ndarray, ms: np.ndarray) -> np.ndarray:
        """A^m x mod 1 for each m, by repeated exact integer steps."""
        ms = np.asarray(ms, dtype=np.int64)
        out = np.empty((len(ms), self.m))
        if len(ms) == 0:
            return out
        lo, hi = int(min(ms.min(), 0)), int(max(ms.max(), 0))
        table = {0: np.mod(np.asarray(x, dtype=float), 1.0)}
        cur = table[0]
        for k in range(1, hi + 1):
            cur = np.mod(self.A @ cur, 1.0)
            table[k] = cur
        cur, Ainv = table[0], self.automorphism.inverse
        for k in range(-1, lo - 1, -1):
            cur = np.mod(Ainv @ cur, 1.0)
            table[k] = cur
        stack = np.array([table[k] for k in range(lo, hi + 1)])
        out = stack[ms - lo]
        out[out >= 1.0] = 0.0
        return out

    def flow_batch(self, x, s: float, ts) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Flowed positions for many times: (x_t, s_t, deck crossings)."""
        ts = np.asarray(ts, dtype=float)
        lifted = s + ts
        ms = np.floor(lifted).astype(np.int64)
        s_t = lifted - ms
        # guard against s_t == 1.0 from rounding
        over = s_t >= 1.0
        ms[over] += 1
        s_t[over] -= 1.0
        return self.torus_orbit(x, ms), s_t, ms

    def flow_points(self, x: np.ndarray, s: np.ndarray, t: float) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Flow many base points by the same time t: (x_t, s_t, crossings)."""
        x = np.atleast_2d(np.asarray(x, dtype=float))
        lifted = np.asarray(s, dtype=float) + t
        ms = np.floor(lifted).astype(np.int64)
        s_t = lifted - ms
        over = s_t >= 1.0
        ms[over] += 1
        s_t[over] -= 1.0
        x_t = np.empty_like(x)
        for k in np.unique(ms):
            sel = ms == k
            Ak = np.array(_int_power(self.A.tolist() if k >= 0 else self.automorphism.inverse.tolist(), abs(int(k))),
                          dtype=float)
            x_t[sel] = np.mod(x[sel] @ Ak.T, 1.0)
        x_t[x_t >= 1.0] = 0.0
        return x_t, s_t, ms

    def transport_points(self, V: np.ndarray, ms) -> np.ndarray:
        """Deck action on per-point vector stacks: V (N, k, n), ms (N,)."""
        V = np.asarray(V, dtype=float)
        C = V @ self.coframe.T
        Bm = self.automorphism.eigen_power(ms)
        out = np.empty_like(V)
        eig = np.einsum("nij,nkj->nki", Bm, C[..., :-1])
        out[..., :-1] = eig @ self.automorphism.frame.T
        out[..., -1] = C[..., -1]
        return out

    def transport_eigen(self, C: np.ndarray, ms) -> np.ndarray:
        """Deck action on vectors given by eigen coordinates C (k, n).

        Working from eigen coordinates keeps exact zeros exact; a round trip
        through suspension coordinates would seed every eigen direction with
        roundoff that long horizons amplify by up to rho^|m|.
        """
        C = np.asarray(C, dtype=float)
        Bm = self.automorphism.eigen_power(ms)
        out = np.empty((Bm.shape[0],) + C.shape)
        eig = np.einsum("nij,kj->nki", Bm, C[:, :-1])
        out[..., :-1] = eig @ self.automorphism.frame.T
        out[..., -1] = C[:, -1]
        return out

    def transport(self, vectors: np.ndarray, ms) -> np.ndarray:
        """Apply the deck action A^m to the torus part of vectors.

        ``vectors`` has shape (k, n); returns (len(ms), k, n).
        """
        V = np.asarray(vectors, dtype=float)
        C = V @ self.coframe.T  # eigen coordinates, (k, n)
        Bm = self.automorphism.eigen_power(ms)  # (N, m, m)
        out = np.empty((Bm.shape[0],) + C.shape)
        eig = np.einsum("nij,kj->nki", Bm, C[:, :-1])
        out[..., :-1] = eig @ self.automorphism.frame.T
        out[..., -1] = C[:, -1]
        return out


def build_default_model() -> SuspensionFlow:
    """Suspension of the companion matrix of x^3 - x - 1 (n = 4)."""
    return SuspensionFlow(HyperbolicAutomorphism(np.array(DEFAULT_MATRIX)))


def build_symmetric_model() -> SuspensionFlow:
    """Cat map [[2,1],[1,1]] plus its inverse (n = 5).  Stable and unstable
    spectra are mirror images, so this flow is not asymmetric."""
    C = np.array([[2, 1], [1, 1]])
    Ci = np.array([[1, -1], [-1, 2]])
    A = np.zeros((4, 4), dtype=np.int64)
    A[:2, :2], A[2:, 2:] = C, Ci
    return SuspensionFlow(HyperbolicAutomorphism(A))


def flow(f: SuspensionFlow, p: Point, t: float) -> Point:
    x, s, _ = f.flow_batch(p.x, p.s, [t])
    return Point(tuple(x[0]), float(s[0]))


def tangent_flow(f: SuspensionFlow, v: TangentVector, t: float) -> TangentVector:
    x, s, ms = f.flow_batch(v.base.x, v.base.s, [t])
    comps = f.transport(v.components[None, :], ms)[0, 0]
    return TangentVector.from_components(Point(tuple(x[0]), float(s[0])), comps)


def log_norm_flow(f: SuspensionFlow, v: TangentVector, ts) -> np.ndarray:
    """log ||Tf_t v|| in the Anosov metric, overflow-free for any t.

    In the eigenframe the deck action only rotates within blocks, so the
    Anosov length of the block-b component after time t is
    |c_b| * |mu_b|^(s + t).
    """
    ts = np.asarray(ts, dtype=float)
    c = f.coframe @ v.components
    logs = []
    for b in f.automorphism.blocks:
        norm = np.linalg.norm(c[b.start:b.start + b.size])
        if norm > 0:
            logs.append(math.log(norm) + (v.base.s + ts) * b.log_modulus)
    if c[-1] != 0:
        logs.append(np.full_like(ts, math.log(abs(c[-1]))))
    if not logs:
        return np.full_like(ts, -math.inf)
    L = np.stack(np.broadcast_arrays(*logs))
    top = L.max(axis=0)
    return top + 0.5 * np.log(np.exp(2 * (L - top)).sum(axis=0))


@dataclass(frozen=True, eq=False)
class Splitting:
    """Constant invariant splitting, as columns in suspension coordinates."""

    Euu: np.ndarray
    Ess: np.ndarray
    Ec: np.ndarray

    @property
    def dims(self) -> dict[str, int]:
        return {"uu": self.Euu.shape[1], "ss": self.Ess.shape[1], "c": self.Ec.shape[1]}


def splitting(f: SuspensionFlow) -> Splitting:
    """Eigen directions at s = 0, where they are orthonormal in the Anosov metric."""
    Q = f.frame
    mask = f.automorphism.unstable_mask
    return Splitting(Q[:, :-1][:, mask], Q[:, :-1][:, ~mask], Q[:, -1:])


def anosov_metric(f: SuspensionFlow, s: float = 0.0) -> MetricFrame:
    """Anosov metric at roof coordinate s.

    The eigenframe vectors are orthogonal with squared lengths |mu|^(2 s),
    X is unit and orthogonal to the rest.  These weights are exactly what
    the deck identification requires, so the metric is continuous on the
    suspension, and since det A = 1 and det P = 1 its volume is Omega.
    """
    Qi = f.coframe
    W = np.diag(f.metric_weights(s))
    return MetricFrame(Qi.T @ W @ Qi)


def canonical_alpha(f: SuspensionFlow):
    from .forms import alpha_field

    return alpha_field(f)


def volume_form(f: SuspensionFlow):
    from .forms import volume_field

    return volume_field(f)


@dataclass(frozen=True)
class HyperbolicityConstants:
    c: float
    nu: float
    lam: float
    max_residual: float


def _envelope_fit(ts: np.ndarray, logs: np.ndarray, threshold: float) -> tuple[float, float, float]:
    """Fit log ratio envelope by a line; returns (c, rate, max residual)."""
    env = logs.max(axis=0)
    slope, icpt = np.polyfit(ts, env, 1)
    resid = float(np.abs(env - (slope * ts + icpt)).max())
    if resid > threshold:
        raise ValueError(f"constants not exponential: envelope residual {resid:.3g}")
    rate = -slope
    c = float(np.exp(np.max(np.append(env + rate * ts, 0.0))))
    return c, float(rate), resid


def measure_constants(f: SuspensionFlow, t_grid: Sequence[float], samples: int = 100,
                      seed: int = 0, threshold: float = 0.05) -> HyperbolicityConstants:
    """Fit (c, nu, lambda) from sampled forward stable and backward unstable stretching."""
    ts = np.asarray(t_grid, dtype=float)
    if ts.ndim != 1 or len(ts) < 2 or np.any(ts <= 0) or np.any(np.diff(ts) <= 0):
        raise ValueError("t_grid must be increasing and positive")
    rng = np.random.default_rng(seed)
    sp = splitting(f)
    logs_s, logs_u = [], []
    for _ in range(samples):
        base = Point(tuple(rng.random(f.m)), float(rng.random()))
        g = anosov_metric(f, base.s)
        for basis, sign, store in ((sp.Ess, 1.0, logs_s), (sp.Euu, -1.0, logs_u)):
            w = basis @ rng.normal(size=basis.shape[1])
            w /= math.sqrt(w @ g.gram @ w)
            v = TangentVector.from_components(base, w)
            store.append(log_norm_flow(f, v, sign * ts))
    c_s, nu, r_s = _envelope_fit(ts, np.array(logs_s), threshold)
    c_u, lam, r_u = _envelope_fit(ts, np.array(logs_u), threshold)
    return HyperbolicityConstants(max(c_s, c_u, 1.0), nu, lam, max(r_s, r_u))


def flow_checks(f: SuspensionFlow, samples: int = 200, t_max: float = 20.0, seed: int = 0) -> dict:
    """Worst errors of the group law, the tangent chain rule and volume
    preservation over random (p, t, tau) with |t|, |tau| <= t_max / 2 and
    |t| <= t_max for the volume check."""
    rng = np.random.default_rng(seed)
    group = chain = volume = 0.0
    for _ in range(samples):
        p = Point(tuple(rng.random(f.m)), float(rng.random()))
        t, tau = rng.uniform(-t_max / 2, t_max / 2, size=2)
        group = max(group, flow(f, flow(f, p, t), tau).distance(flow(f, p, t + tau)))
        v = TangentVector.from_components(p, rng.normal(size=f.n))
        two = tangent_flow(f, tangent_flow(f, v, t), tau).components
        one = tangent_flow(f, v, t + tau).components
        chain = max(chain, float(np.abs(two - one).max() / np.abs(one).max()))
        T = rng.uniform(-t_max, t_max)
        _, _, ms = f.flow_batch(p.x, p.s, [T])
        jac = f.transport(np.eye(f.n), ms)[0]
        volume = max(volume, abs(abs(float(np.linalg.det(jac))) - 1.0))
    return {"samples": samples, "group_law": group, "tangent_chain_rule": chain, "volume_det": volume}


def periodic_points_exact(f: SuspensionFlow, period: int) -> list[tuple[Fraction, ...]]:
    """All x in [0,1)^m with A^p x = x mod Z^m, as exact fractions.

    With U (A^p - I) V = D in Smith normal form, the solutions are
    x = V y with y_i in (1/d_i) Z, reduced mod 1.
    """
    from sympy import ZZ
    from sympy.polys.matrices import DomainMatrix
    from sympy.polys.matrices.normalforms import smith_normal_decomp

    if period < 1:
        raise ValueError("period must be >= 1")
    m = f.m
    Ap = _int_power(f.A.tolist(), period)
    M = [[Ap[i][j] - (i == j) for j in range(m)] for i in range(m)]
    det = abs(_int_det(M))
    if det == 0:
        raise ValueError("A^p - I is singular")
    if det > MAX_PERIODIC_POINTS:
        raise OverflowError(f"{det} periodic points of period {period} exceed the limit {MAX_PERIODIC_POINTS}")
    D, _, V = smith_normal_decomp(DomainMatrix([[ZZ(v) for v in row] for row in M], (m, m), ZZ))
    d = [abs(int(D[i, i].element)) for i in range(m)]
    Vm = [[int(V[i, j].element) for j in range(m)] for i in range(m)]
    pts = set()
    for flat in range(det):
        y, rest = [], flat
        for di in d:
            y.append(Fraction(rest % di, di))
            rest //= di
        x = tuple(sum((Vm[i][j] * y[j] for j in range(m)), Fraction(0)) % 1 for i in range(m))
        pts.add(x)
    if len(pts) != det:
        raise ArithmeticError("Smith reduction produced duplicate points")
    return sorted(pts)


def periodic_points(f: SuspensionFlow, period: int) -> list[Point]:
    """Points (x, 0) on closed orbits of period ``period``."""
    return [Point(tuple(float(c) for c in x), 0.0) for x in periodic_points_exact(f, period)]
