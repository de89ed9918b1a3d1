"""Differential forms on a suspension flow.

A form is either a finite sum of analytic *atoms* or a *procedural*
evaluator.  An atom is

    profile(s) * cos(2 pi q.x + phase) * theta_I

where theta_I is a wedge of the eigen-coframe (theta_1..theta_m, ds).  On the
cylinder cover the coframe is constant and X = d/ds, so pullbacks, Lie
derivatives and exterior derivatives of atoms have closed forms.

Deck invariance forces profile(s) = lambda_I profile(s - 1) when q = 0,
where lambda_I is the factor theta_I picks up under A; those atoms carry an
``ExpFourierProfile`` with base lambda_I.  Atoms with q != 0 carry a
``BumpProfile`` vanishing near s = 0 and s = 1, so they glue trivially.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from numpy.polynomial import Polynomial

from .constants import BUMP_DELTA, EXACT_TOL, FD_STEP
from .exterior import AltForm, basis_masks, compound, indices_of, interior, mask_of, merge_sign, wedge
from .model import Point, SuspensionFlow, TangentVector

__all__ = [
    "ExpFourierProfile",
    "BumpProfile",
    "FormAtom",
    "FormField",
    "GluingReport",
    "deck_factor",
    "alpha_field",
    "volume_field",
    "ixomega_field",
    "atom_field",
    "coefficient_field",
    "evaluate",
    "pullback_evaluate",
    "pullback_batch",
    "lie_derivative",
    "exterior_derivative",
    "gluing_check",
    "parse_atom",
    "random_atom",
    "random_field",
]

TWO_PI = 2 * math.pi


class ExpFourierProfile:
    """base^s * sum_j (cos_j cos(2 pi j s) + sin_j sin(2 pi j s))."""

    breakpoints: tuple[float, ...] = ()

    def __init__(self, base: float = 1.0, cos: Sequence[float] = (1.0,), sin: Sequence[float] = ()):
        if not base > 0:
            raise ValueError("profile base must be positive")
        J = max(len(cos), len(sin))
        self.base = float(base)
        self.cos = np.zeros(J)
        self.cos[: len(cos)] = cos
        self.sin = np.zeros(J)
        self.sin[: len(sin)] = sin

    def __call__(self, s):
        s = np.asarray(s, dtype=float)
        j = np.arange(len(self.cos))
        ang = TWO_PI * s[..., None] * j
        per = (np.cos(ang) * self.cos + np.sin(ang) * self.sin).sum(axis=-1)
        return self.base**s * per

    def derivative(self) -> "ExpFourierProfile":
        lb, w = math.log(self.base), TWO_PI * np.arange(len(self.cos))
        return ExpFourierProfile(self.base, lb * self.cos + w * self.sin, lb * self.sin - w * self.cos)

    def scaled(self, c: float) -> "ExpFourierProfile":
        return ExpFourierProfile(self.base, c * self.cos, c * self.sin)

    def times_exp(self, mu: float) -> "ExpFourierProfile":
        return ExpFourierProfile(self.base * mu, self.cos, self.sin)

    def to_dict(self) -> dict:
        return {"type": "expfourier", "base": self.base, "cos": self.cos.tolist(), "sin": self.sin.tolist()}


class BumpProfile:
    """base^s * poly(s) on (lo, hi), zero elsewhere."""

    def __init__(self, poly: Polynomial, support: tuple[float, float], base: float = 1.0):
        lo, hi = support
        if not 0 < lo < hi < 1:
            raise ValueError("bump support must lie strictly inside (0, 1)")
        self.poly = Polynomial(poly.coef if isinstance(poly, Polynomial) else poly)
        self.support = (float(lo), float(hi))
        self.base = float(base)

    @classmethod
    def bump(cls, amplitude: float = 1.0, delta: float = BUMP_DELTA) -> "BumpProfile":
        """amplitude * (1 - y^2)^3 with y = (2s - 1) / (1 - 2 delta); C^2 at the support ends."""
        y = Polynomial([-1.0, 2.0]) / (1 - 2 * delta)
        return cls(float(amplitude) * (1 - y**2) ** 3, (delta, 1 - delta))

    @property
    def breakpoints(self) -> tuple[float, ...]:
        return self.support

    @property
    def delta(self) -> float:
        return min(self.support[0], 1 - self.support[1])

    def __call__(self, s):
        s = np.asarray(s, dtype=float)
        inside = (s > self.support[0]) & (s < self.support[1])
        return np.where(inside, self.base**s * self.poly(s), 0.0)

    def derivative(self) -> "BumpProfile":
        return BumpProfile(math.log(self.base) * self.poly + self.poly.deriv(), self.support, self.base)

    def scaled(self, c: float) -> "BumpProfile":
        return BumpProfile(float(c) * self.poly, self.support, self.base)

    def times_exp(self, mu: float) -> "BumpProfile":
        return BumpProfile(self.poly, self.support, self.base * mu)

    def to_dict(self) -> dict:
        return {"type": "bump", "base": self.base, "poly": self.poly.coef.tolist(), "support": list(self.support)}


def deck_factor(f: SuspensionFlow, index: Sequence[int]) -> float:
    """Factor lambda_I with theta_I(A v) = lambda_I theta_I(v), for index sets
    that contain each rotation block entirely or not at all."""
    mask = mask_of(index)
    lam = 1.0
    for b in f.automorphism.blocks:
        bits = [(mask >> (b.start + j)) & 1 for j in range(b.size)]
        if b.kind == "rotation":
            if sum(bits) == 1:
                raise ValueError(f"index {tuple(index)} splits a rotation block; its deck factor is not scalar")
            if sum(bits) == 2:
                lam *= b.modulus**2
        elif bits[0]:
            lam *= b.sign * b.modulus
    return lam


@dataclass(frozen=True, eq=False)
class FormAtom:
    """profile(s) * cos(2 pi q.x + phase) * theta_index (sorted 1-based index)."""

    index: tuple[int, ...]
    profile: object
    freq: tuple[int, ...] = ()
    phase: float = 0.0

    @property
    def mask(self) -> int:
        return mask_of(self.index)

    @property
    def oscillating(self) -> bool:
        return any(self.freq)

    def with_profile(self, profile) -> "FormAtom":
        return FormAtom(self.index, profile, self.freq, self.phase)

    def to_dict(self) -> dict:
        return {"index": list(self.index), "freq": list(self.freq), "phase": self.phase,
                "profile": self.profile.to_dict()}


def _sorted_atom(index, profile, freq, phase) -> FormAtom:
    inversions = sum(1 for i in range(len(index)) for j in range(i + 1, len(index)) if index[i] > index[j])
    prof = profile.scaled(-1.0) if inversions % 2 else profile
    return FormAtom(tuple(sorted(index)), prof, tuple(int(q) for q in freq), float(phase))


Evaluator = Callable[[np.ndarray, np.ndarray, np.ndarray], np.ndarray]


class FormField:
    """A degree-k form on the suspension of ``model``.

    Exactly one of ``atoms`` or ``evaluator`` is given.  A procedural
    evaluator maps (x (N, m), s (N,), V (N, k, n)) to N values, with V in
    suspension coordinates; it is trusted to be alternating, multilinear and
    to glue across s = 1 (see :func:`gluing_check`).
    """

    def __init__(self, model: SuspensionFlow, degree: int, atoms: Sequence[FormAtom] | None = None,
                 evaluator: Evaluator | None = None, validate: bool = True, breakpoints: Sequence[float] = (),
                 coefficients: Callable | None = None):
        if (atoms is None) == (evaluator is None):
            raise ValueError("give either atoms or an evaluator")
        if not 0 <= degree <= model.n:
            raise ValueError(f"degree {degree} outside [0, {model.n}]")
        self.model = model
        self.degree = degree
        self.atoms = None if atoms is None else tuple(atoms)
        self.evaluator = evaluator
        self._breakpoints = tuple(breakpoints)
        self._coefficients = coefficients
        if self.atoms is not None:
            for a in self.atoms:
                self._check_atom(a, validate)

    def _check_atom(self, a: FormAtom, validate: bool):
        f = self.model
        if len(a.index) != self.degree or list(a.index) != sorted(set(a.index)):
            raise ValueError(f"atom index {a.index} is not a sorted {self.degree}-set")
        if a.index and not 1 <= a.index[0] <= a.index[-1] <= f.n:
            raise ValueError(f"atom index {a.index} outside 1..{f.n}")
        if len(a.freq) not in (0, f.m):
            raise ValueError(f"frequency vector must have {f.m} entries")
        if not validate:
            return
        if a.oscillating:
            if not isinstance(a.profile, BumpProfile) or a.profile.delta < BUMP_DELTA - 1e-15:
                raise ValueError(f"q != 0 atoms need a bump profile supported in ({BUMP_DELTA}, {1 - BUMP_DELTA})")
        elif isinstance(a.profile, ExpFourierProfile):
            lam = deck_factor(f, a.index)
            if lam <= 0:
                raise ValueError(f"index {a.index} has negative deck factor {lam}")
            if abs(a.profile.base - lam) > EXACT_TOL * lam:
                raise ValueError(f"profile base {a.profile.base} does not match deck factor {lam}")

    @property
    def analytic(self) -> bool:
        return self.atoms is not None

    @property
    def breakpoints(self) -> tuple[float, ...]:
        """Roof coordinates in (0, 1) where the field is only finitely smooth."""
        pts = set(self._breakpoints)
        for a in self.atoms or ():
            pts.update(getattr(a.profile, "breakpoints", ()))
        return tuple(sorted(pts))

    # -- arithmetic ---------------------------------------------------------

    def _same(self, other: "FormField"):
        if other.model is not self.model or other.degree != self.degree:
            raise ValueError("fields live on different models or have different degrees")

    def __add__(self, other: "FormField") -> "FormField":
        self._same(other)
        if self.analytic and other.analytic:
            return FormField(self.model, self.degree, self.atoms + other.atoms, validate=False)
        a, b = self, other
        return FormField(self.model, self.degree,
                         evaluator=lambda x, s, V: a.evaluate_batch(x, s, V) + b.evaluate_batch(x, s, V),
                         breakpoints=a.breakpoints + b.breakpoints)

    def __mul__(self, c: float) -> "FormField":
        if self.analytic:
            return FormField(self.model, self.degree, [a.with_profile(a.profile.scaled(c)) for a in self.atoms],
                             validate=False)
        src = self
        return FormField(self.model, self.degree, evaluator=lambda x, s, V: c * src.evaluate_batch(x, s, V),
                         breakpoints=self.breakpoints)

    __rmul__ = __mul__

    def __neg__(self) -> "FormField":
        return self * -1.0

    def __sub__(self, other: "FormField") -> "FormField":
        return self + (-other)

    # -- evaluation ---------------------------------------------------------

    def evaluate_batch(self, x, s, V) -> np.ndarray:
        """Values at points (x, s) on vector stacks V of shape (N, k, n).

        Atoms are evaluated on the cylinder cover, so s outside [0, 1) is
        allowed for non-oscillating atoms.
        """
        x = np.atleast_2d(np.asarray(x, dtype=float))
        s = np.atleast_1d(np.asarray(s, dtype=float))
        V = np.asarray(V, dtype=float).reshape(len(s), self.degree, self.model.n)
        if not self.analytic:
            return np.asarray(self.evaluator(x, s, V), dtype=float)
        theta = V @ self.model.coframe.T
        out = np.zeros(len(s))
        for a in self.atoms:
            val = a.profile(s)
            if a.oscillating:
                val = val * np.cos(TWO_PI * (x @ np.asarray(a.freq, dtype=float)) + a.phase)
            elif a.phase:
                val = val * math.cos(a.phase)
            if self.degree:
                cols = [i - 1 for i in a.index]
                val = val * np.linalg.det(theta[:, :, cols])
            out += val
        return out

    def coefficients_batch(self, x, s) -> np.ndarray:
        """Coefficients in the eigen-coframe basis (lexicographic index sets), shape (N, C(n, k))."""
        x = np.atleast_2d(np.asarray(x, dtype=float))
        s = np.atleast_1d(np.asarray(s, dtype=float))
        masks = basis_masks(self.model.n, self.degree)
        out = np.zeros((len(s), len(masks)))
        if self.analytic:
            pos = {mk: i for i, mk in enumerate(masks)}
            for a in self.atoms:
                val = a.profile(s)
                if a.oscillating:
                    val = val * np.cos(TWO_PI * (x @ np.asarray(a.freq, dtype=float)) + a.phase)
                elif a.phase:
                    val = val * math.cos(a.phase)
                out[:, pos[a.mask]] += val
            return out
        if self._coefficients is not None:
            return np.asarray(self._coefficients(x, s), dtype=float)
        Q = self.model.frame
        for j, mk in enumerate(masks):
            cols = [i - 1 for i in indices_of(mk)]
            V = np.broadcast_to(Q[:, cols].T, (len(s), self.degree, self.model.n))
            out[:, j] = self.evaluate_batch(x, s, V)
        return out

    def sup_norm(self, samples: int = 4096, seed: int = 0) -> float:
        """Upper estimate of max_p |omega_p|_g in the Anosov metric."""
        n, k = self.model.n, self.degree
        logs = np.array([self.model.log_moduli[[i - 1 for i in indices_of(mk)]].sum()
                         for mk in basis_masks(n, k)])
        if self.analytic:
            s = np.linspace(0.0, 1.0, 2001)
            total = np.zeros_like(s)
            pos = {mk: i for i, mk in enumerate(basis_masks(n, k))}
            for a in self.atoms:
                # |theta_I|_g = |mu_I|^(-s)
                total += np.abs(a.profile(s)) * np.exp(-s * logs[pos[a.mask]])
            return float(total.max() * 1.01)
        rng = np.random.default_rng(seed)
        x, s = rng.random((samples, self.model.m)), rng.random(samples)
        C = self.coefficients_batch(x, s)
        norms = np.sqrt((C**2 * np.exp(-2 * s[:, None] * logs[None, :])).sum(axis=1))
        return float(2.0 * norms.max())

    # -- calculus on atoms --------------------------------------------------

    def _need_atoms(self, what: str):
        if not self.analytic:
            raise TypeError(f"{what} needs an analytic (atom) field")

    def lie_derivative_field(self, mode: str = "analytic", h: float = FD_STEP) -> "FormField":
        """L_X of the field: exact profile derivative for atoms, or a
        Richardson-extrapolated central difference of pullbacks."""
        if mode == "analytic":
            self._need_atoms("analytic Lie derivative")
            return FormField(self.model, self.degree, [a.with_profile(a.profile.derivative()) for a in self.atoms],
                             validate=False)
        if mode != "finite_difference":
            raise ValueError(f"unknown mode {mode!r}")
        src, f, k = self, self.model, self.degree

        def pulled(x, s, step):
            # coefficients of f_step^* omega: c(f_step p) @ compound(B^m, k)
            xp, sp, mp = f.flow_points(x, s, step)
            c = src.coefficients_batch(xp, sp)
            out = np.empty_like(c)
            for m in np.unique(mp):
                sel = mp == m
                B = np.eye(f.n)
                B[:-1, :-1] = f.automorphism.eigen_power([m])[0]
                out[sel] = c[sel] @ compound(B, k)
            return out

        def coeffs(x, s):
            def d(step):
                return (pulled(x, s, step) - pulled(x, s, -step)) / (2 * step)
            return (4 * d(h / 2) - d(h)) / 3

        return coefficient_field(f, k, coeffs, self.breakpoints)

    def exterior_derivative(self) -> "FormField":
        self._need_atoms("exterior derivative")
        f, n, k = self.model, self.model.n, self.degree
        if k == n:
            return FormField(f, n, [], validate=False)
        out = []
        ds = AltForm.basis(n, (n,))
        P = f.automorphism.frame
        for a in self.atoms:
            theta = AltForm(n, k, {a.mask: 1.0})
            for mk, c in wedge(ds, theta).coeffs.items():
                out.append(FormAtom(indices_of(mk), a.profile.derivative().scaled(c), a.freq, a.phase))
            if a.oscillating:
                # d cos(2 pi q.x + phase) = 2 pi cos(2 pi q.x + phase + pi/2) (q^T P) theta
                qP = TWO_PI * (np.asarray(a.freq, dtype=float) @ P)
                for i, w in enumerate(qP):
                    if w == 0.0:
                        continue
                    for mk, c in wedge(AltForm.basis(n, (i + 1,)), theta).coeffs.items():
                        out.append(FormAtom(indices_of(mk), a.profile.scaled(c * w), a.freq, a.phase + math.pi / 2))
        return FormField(f, k + 1, out, validate=False)

    def interior_X(self) -> "FormField":
        self._need_atoms("i_X")
        f, n = self.model, self.model.n
        out = []
        for a in self.atoms:
            for mk, c in interior(f.generator, AltForm(n, self.degree, {a.mask: 1.0})).coeffs.items():
                out.append(FormAtom(indices_of(mk), a.profile.scaled(c), a.freq, a.phase))
        return FormField(f, self.degree - 1, out, validate=False)

    def wedge_constant(self, form: AltForm) -> "FormField":
        """Wedge with a constant form given in the eigen-coframe, on the right."""
        self._need_atoms("wedge")
        f, n = self.model, self.model.n
        out = []
        for a in self.atoms:
            for mk, c in wedge(AltForm(n, self.degree, {a.mask: 1.0}), form).coeffs.items():
                out.append(FormAtom(indices_of(mk), a.profile.scaled(c), a.freq, a.phase))
        return FormField(f, self.degree + form.k, out, validate=False)

    def star(self) -> "FormField":
        """Hodge star for the Anosov metric.  The eigen-coframe is orthogonal
        with |theta_i|^2 = |mu_i|^(-2 s) and vol(g) = theta_1 ^ ... ^ ds, so
        *theta_I = sign(I, I^c) |mu_I|^(-2 s) theta_{I^c}."""
        f, n = self.model, self.model.n
        full = (1 << n) - 1
        if not self.analytic:
            return self._procedural_star()
        out = []
        for a in self.atoms:
            comp = full & ~a.mask
            mu = math.exp(-2 * f.log_moduli[[i - 1 for i in a.index]].sum())
            out.append(FormAtom(indices_of(comp), a.profile.times_exp(mu).scaled(merge_sign(a.mask, comp)),
                                a.freq, a.phase))
        return FormField(f, n - self.degree, out, validate=False)

    def _procedural_star(self) -> "FormField":
        f, n, k = self.model, self.model.n, self.degree
        full = (1 << n) - 1
        src_masks = basis_masks(n, k)
        dst = {mk: i for i, mk in enumerate(basis_masks(n, n - k))}
        perm = [dst[full & ~mk] for mk in src_masks]
        signs = np.array([merge_sign(mk, full & ~mk) for mk in src_masks], dtype=float)
        logs = np.array([f.log_moduli[[i - 1 for i in indices_of(mk)]].sum() for mk in src_masks])
        src = self

        def coeffs(x, s):
            c = src.coefficients_batch(x, s) * signs * np.exp(-2 * s[:, None] * logs[None, :])
            out = np.zeros_like(c)
            out[:, perm] = c
            return out

        return coefficient_field(f, n - k, coeffs, self.breakpoints)

    def to_dict(self) -> dict:
        if not self.analytic:
            return {"degree": self.degree, "procedural": True}
        return {"degree": self.degree, "atoms": [a.to_dict() for a in self.atoms]}


def coefficient_field(f: SuspensionFlow, degree: int, coeffs: Callable, breakpoints: Sequence[float] = ()) -> FormField:
    """Procedural field from a function (x, s) -> eigen-coframe coefficients (N, C(n, k))."""
    cols = [[i - 1 for i in indices_of(mk)] for mk in basis_masks(f.n, degree)]

    def ev(x, s, V):
        c = coeffs(x, s)
        if degree == 0:
            return c[:, 0]
        theta = V @ f.coframe.T
        return sum(c[:, j] * np.linalg.det(theta[:, :, cj]) for j, cj in enumerate(cols))

    return FormField(f, degree, evaluator=ev, breakpoints=breakpoints, coefficients=coeffs)


def atom_field(f: SuspensionFlow, index: Sequence[int], profile=None, freq: Sequence[int] = (), phase: float = 0.0,
               validate: bool = True) -> FormField:
    """Field of a single atom; the default profile is deck_factor^s."""
    if profile is None:
        profile = ExpFourierProfile(deck_factor(f, index))
    if not freq:
        freq = (0,) * f.m
    return FormField(f, len(index), [_sorted_atom(tuple(index), profile, freq, phase)], validate=validate)


def alpha_field(f: SuspensionFlow) -> FormField:
    """The canonical 1-form ds."""
    return atom_field(f, (f.n,))


def volume_field(f: SuspensionFlow) -> FormField:
    """Omega = dx^1 ^ ... ^ dx^m ^ ds, which equals the full coframe wedge since det P = 1."""
    return atom_field(f, tuple(range(1, f.n + 1)))


def ixomega_field(f: SuspensionFlow) -> FormField:
    return volume_field(f).interior_X()


def _vectors(f: SuspensionFlow, p: Point, vs: Sequence[TangentVector]) -> np.ndarray:
    for v in vs:
        if v.base != p:
            raise ValueError("tangent vector is not based at the evaluation point")
    return np.array([v.components for v in vs]).reshape(len(vs), f.n)


def evaluate(omega: FormField, p: Point, vs: Sequence[TangentVector]) -> float:
    if len(vs) != omega.degree:
        raise ValueError(f"{omega.degree}-form needs {omega.degree} vectors, got {len(vs)}")
    V = _vectors(omega.model, p, vs)
    return float(omega.evaluate_batch(np.array([p.x]), np.array([p.s]), V[None])[0])


def pullback_batch(omega: FormField, p: Point, V: np.ndarray, ts, eigen: bool = False) -> np.ndarray:
    """(f_t^* omega)_p(V) for many t, with V of shape (k, n) at p.

    With ``eigen`` the rows of V are eigen-coframe coordinates rather than
    suspension coordinates.
    """
    f = omega.model
    ts = np.asarray(ts, dtype=float)
    x, s, ms = f.flow_batch(p.x, p.s, ts)
    moved = f.transport_eigen(V, ms) if eigen else f.transport(V, ms)
    return omega.evaluate_batch(x, s, moved)


def pullback_evaluate(omega: FormField, t: float, p: Point, vs: Sequence[TangentVector]) -> float:
    if len(vs) != omega.degree:
        raise ValueError(f"{omega.degree}-form needs {omega.degree} vectors, got {len(vs)}")
    return float(pullback_batch(omega, p, _vectors(omega.model, p, vs), [t])[0])


def lie_derivative(omega: FormField, p: Point, vs: Sequence[TangentVector], mode: str = "analytic",
                   h: float = FD_STEP) -> float:
    """L_X omega at p on vs: exact for atoms, or (pullback(h) - pullback(-h)) / 2h."""
    if mode == "analytic":
        return evaluate(omega.lie_derivative_field("analytic"), p, vs)
    if mode != "finite_difference":
        raise ValueError(f"unknown mode {mode!r}")
    if not h > 0:
        raise ValueError("finite-difference step must be positive")
    vals = pullback_batch(omega, p, _vectors(omega.model, p, vs), [h, -h])
    return float((vals[0] - vals[1]) / (2 * h))


def exterior_derivative(omega: FormField) -> FormField:
    return omega.exterior_derivative()


@dataclass(frozen=True)
class GluingReport:
    residual: float
    tol: float
    samples: int

    @property
    def passed(self) -> bool:
        return self.residual <= self.tol


def gluing_check(omega: FormField, samples: int = 64, tol: float = 1e-12, seed: int = 0) -> GluingReport:
    """Compare omega at (x, 1) on a frame with omega at the deck image
    (A x, 0) on the transported frame."""
    if samples < 1:
        raise ValueError("samples must be >= 1")
    f = omega.model
    rng = np.random.default_rng(seed)
    x = rng.random((samples, f.m))
    V = rng.normal(size=(samples, omega.degree, f.n))
    top = omega.evaluate_batch(x, np.ones(samples), V)
    xd = np.mod(x @ f.A.T.astype(float), 1.0)
    Vd = f.transport_points(V, np.ones(samples, dtype=np.int64))
    bottom = omega.evaluate_batch(xd, np.zeros(samples), Vd)
    scale = max(1.0, float(np.abs(top).max(initial=0.0)))
    return GluingReport(float(np.abs(top - bottom).max(initial=0.0)) / scale, tol, samples)


def random_atom(f: SuspensionFlow, degree: int, rng: np.random.Generator, oscillating: bool | None = None,
                max_freq: int = 2, index: Sequence[int] | None = None) -> FormAtom:
    """A random admissible atom of the given degree (on ``index`` if given)."""
    sets = [c for c in itertools.combinations(range(1, f.n + 1), degree)] if index is None else [tuple(index)]
    plain = []
    for c in sets:
        try:
            if deck_factor(f, c) > 0:
                plain.append(c)
        except ValueError:
            pass
    if oscillating is None:
        oscillating = not plain or rng.random() < 0.5
    if oscillating:
        index = sets[rng.integers(len(sets))]
        q = np.zeros(f.m, dtype=int)
        while not q.any():
            q = rng.integers(-max_freq, max_freq + 1, size=f.m)
        prof = BumpProfile.bump(float(rng.uniform(0.5, 1.5)))
        return FormAtom(tuple(index), prof, tuple(int(v) for v in q), float(rng.uniform(0, TWO_PI)))
    index = plain[rng.integers(len(plain))]
    J = int(rng.integers(1, 3))
    prof = ExpFourierProfile(deck_factor(f, index), rng.uniform(-1, 1, J + 1), np.append(0.0, rng.uniform(-1, 1, J)))
    return FormAtom(tuple(index), prof, (0,) * f.m, 0.0)


def random_field(f: SuspensionFlow, degree: int, rng: np.random.Generator, atoms: int = 3,
                 indices: Sequence[Sequence[int]] | None = None) -> FormField:
    """Sum of random atoms; ``indices`` pins their index sets so that two
    fields built from the same list have overlapping components."""
    if indices is None:
        sets = list(itertools.combinations(range(1, f.n + 1), degree))
        indices = [sets[i] for i in rng.integers(len(sets), size=atoms)]
    return FormField(f, degree, [random_atom(f, degree, rng, index=ix) for ix in indices])


def parse_atom(text: str, f: SuspensionFlow) -> FormAtom:
    """Parse ``index=1,4; freq=0,0,0; profile=expfourier; cos=1; sin=``.

    Keys: index (1-based eigen-coframe indices, n = ds), freq, phase,
    profile (``expfourier`` with base=auto|float, cos, sin; or ``bump`` with
    amplitude, delta).
    """
    fields = {}
    for part in text.split(";"):
        part = part.strip()
        if not part:
            continue
        if "=" not in part:
            raise ValueError(f"atom field {part!r} is not key=value")
        key, val = part.split("=", 1)
        fields[key.strip().lower()] = val.strip()

    def nums(key, conv=float, default=()):
        raw = fields.get(key, "")
        return tuple(conv(v) for v in raw.replace(",", " ").split()) if raw else tuple(default)

    if "index" not in fields:
        raise ValueError("atom needs an index")
    index = nums("index", int)
    freq = nums("freq", int, (0,) * f.m)
    kind = fields.get("profile", "expfourier").lower()
    if kind == "expfourier":
        base = fields.get("base", "auto")
        base = deck_factor(f, index) if base == "auto" else float(base)
        profile = ExpFourierProfile(base, nums("cos", float, (1.0,)), nums("sin"))
    elif kind == "bump":
        profile = BumpProfile.bump(float(fields.get("amplitude", 1.0)), float(fields.get("delta", BUMP_DELTA)))
    else:
        raise ValueError(f"unknown profile type {kind!r}")
    atom = _sorted_atom(index, profile, freq, float(fields.get("phase", 0.0)))
    FormField(f, len(index), [atom])
    return atom
