"""Closed-form test functions on R^k: bumps, plateau cutoffs, jet functions.

Everything is a sympy expression in the canonical symbols ``y0..y{k-1}``
together with a support box.  Products, linear combinations, derivatives,
translations and argument scalings stay inside the family, and jets at the
origin are evaluated symbolically (exactly for the piecewise-polynomial
branches the W-projector relies on).
"""

from __future__ import annotations

import math
from functools import lru_cache

import numpy as np
import sympy as sp

from .geometry import Box, unbounded_box

_LAMBDIFY_CACHE: dict = {}


@lru_cache(maxsize=None)
def coords(k: int):
    return sp.symbols(f"y0:{k}", real=True) if k > 1 else (sp.Symbol("y0", real=True),)


def _numeric(expr, k: int):
    key = (k, expr)
    fn = _LAMBDIFY_CACHE.get(key)
    if fn is None:
        fn = sp.lambdify(coords(k), expr, modules="numpy")
        _LAMBDIFY_CACHE[key] = fn
    return fn


class TestFunction:
    """A closed-form function on R^k with box-valued support metadata."""

    __test__ = False  # not a pytest collectible

    def __init__(self, k: int, expr, box: Box):
        self.k = int(k)
        expr = sp.sympify(expr)
        # unify symbols that share a coordinate name but differ in
        # assumptions (sympify("y0") is not coords(1)[0])
        canon = {s.name: s for s in coords(self.k)}
        repl = {s: canon[s.name] for s in expr.free_symbols
                if s.name in canon and s is not canon[s.name]}
        self.expr = expr.xreplace(repl) if repl else expr
        self.box = box

    # -- algebra -------------------------------------------------------------

    def __add__(self, other: "TestFunction") -> "TestFunction":
        if not isinstance(other, TestFunction) or other.k != self.k:
            return NotImplemented
        return TestFunction(self.k, self.expr + other.expr, self.box.hull(other.box))

    def __sub__(self, other: "TestFunction") -> "TestFunction":
        return self + other.scaled(-1)

    def scaled(self, c) -> "TestFunction":
        return TestFunction(self.k, sp.sympify(c) * self.expr, self.box)

    def __mul__(self, other):
        if isinstance(other, TestFunction):
            if other.k != self.k:
                raise ValueError("rank mismatch")
            return TestFunction(self.k, self.expr * other.expr,
                                self.box.intersect(other.box))
        return self.scaled(other)

    __rmul__ = __mul__

    def conjugate(self) -> "TestFunction":
        return TestFunction(self.k, sp.conjugate(self.expr), self.box)

    def derivative(self, a) -> "TestFunction":
        a = tuple(int(n) for n in a)
        if len(a) != self.k:
            raise ValueError("multi-index rank mismatch")
        expr = self.expr
        for sym, n in zip(coords(self.k), a):
            if n:
                expr = sp.diff(expr, sym, n)
        return TestFunction(self.k, expr, self.box)

    def translate(self, vec) -> "TestFunction":
        subs = {sym: sym - sp.sympify(v) for sym, v in zip(coords(self.k), vec)}
        return TestFunction(self.k, self.expr.subs(subs, simultaneous=True),
                            self.box.shift(vec))

    def scale_argument(self, rho) -> "TestFunction":
        """Return y -> f(rho * y); the support shrinks by 1/rho."""
        subs = {sym: sp.sympify(rho) * sym for sym in coords(self.k)}
        return TestFunction(self.k, self.expr.subs(subs, simultaneous=True),
                            self.box.scale(1.0 / float(rho)))

    # -- analysis ------------------------------------------------------------

    def jet(self, a) -> complex:
        """Derivative value at the origin (exact for polynomial branches)."""
        val = self.derivative(a).expr.subs({s: 0 for s in coords(self.k)})
        return complex(sp.N(val))

    def __call__(self, points: np.ndarray) -> np.ndarray:
        pts = np.asarray(points, dtype=float)
        if self.k == 1 and pts.ndim == 1:
            comps = [pts]
        else:
            comps = [pts[..., i] for i in range(self.k)]
        fn = _numeric(self.expr, self.k)
        with np.errstate(all="ignore"):
            out = fn(*comps)
        out = np.asarray(out, dtype=complex)
        if out.shape != comps[0].shape:
            out = np.broadcast_to(out, comps[0].shape).copy()
        return np.nan_to_num(out, nan=0.0, posinf=0.0, neginf=0.0)

    # -- serialization -------------------------------------------------------

    def to_dict(self) -> dict:
        lo = [None if math.isinf(v) else v for v in self.box.lo]
        hi = [None if math.isinf(v) else v for v in self.box.hi]
        return {"k": self.k, "expr": sp.srepr(self.expr), "box": [lo, hi]}

    @classmethod
    def from_dict(cls, data: dict) -> "TestFunction":
        k = int(data["k"])
        expr = sp.parse_expr(data["expr"], local_dict={s.name: s for s in coords(k)})
        lo = [-math.inf if v is None else v for v in data["box"][0]]
        hi = [math.inf if v is None else v for v in data["box"][1]]
        return cls(k, expr, Box(tuple(lo), tuple(hi)))


# -- profile pieces ----------------------------------------------------------

def _bump_profile(u):
    """exp(-1/(1-u^2)) inside (-1, 1), zero outside."""
    return sp.Piecewise((sp.exp(-1 / (1 - u ** 2)), u ** 2 < 1), (0, True))


def _transition(s, lo, hi):
    """Smooth 0 -> 1 transition on (lo, hi) built from exp(-1/t)."""
    t = (s - lo) / (hi - lo)
    b1 = sp.exp(-1 / t)
    b2 = sp.exp(-1 / (1 - t))
    return b1 / (b1 + b2)


def _profile_mass() -> float:
    nodes, weights = np.polynomial.legendre.leggauss(120)
    vals = np.exp(-1.0 / (1.0 - nodes ** 2))
    return float(np.dot(weights, vals))


PROFILE_MASS = _profile_mass()


def bump(center, radius, normalized: bool = False) -> TestFunction:
    """Product bump supported on the box center +- radius."""
    center = tuple(np.atleast_1d(center).tolist())
    radius = tuple(np.atleast_1d(np.broadcast_to(radius, len(center))).tolist())
    k = len(center)
    expr = sp.Integer(1)
    for sym, c, r in zip(coords(k), center, radius):
        expr *= _bump_profile((sym - c) / r)
    if normalized:
        expr /= sp.Float(PROFILE_MASS ** k * math.prod(radius))
    box = Box(tuple(c - r for c, r in zip(center, radius)),
              tuple(c + r for c, r in zip(center, radius)))
    return TestFunction(k, expr, box)


def chi_cutoff(k: int, r_inner: float = 1.0, r_outer: float = 2.0,
               sharpness: int = 1) -> TestFunction:
    """Radial cutoff: 0 for |y| <= r_inner, 1 for |y| >= r_outer.

    ``sharpness`` reparametrizes the transition (s -> s^sharpness in the
    profile argument), giving inequivalent cutoffs for independence tests.
    """
    ys = coords(k)
    r2 = sum(sym ** 2 for sym in ys)
    s = sp.sqrt(r2)
    t = ((s - r_inner) / (r_outer - r_inner)) ** sharpness
    b1 = sp.exp(-1 / t)
    b2 = sp.exp(-1 / (1 - t))
    expr = sp.Piecewise((0, r2 <= r_inner ** 2), (1, r2 >= r_outer ** 2),
                        (b1 / (b1 + b2), True))
    return TestFunction(k, expr, unbounded_box(k))


def plateau(k: int, r_flat: float, r_support: float) -> TestFunction:
    """1 on |y| <= r_flat, 0 outside |y| >= r_support, radial and smooth."""
    ys = coords(k)
    r2 = sum(sym ** 2 for sym in ys)
    s = sp.sqrt(r2)
    expr = sp.Piecewise((1, r2 <= r_flat ** 2), (0, r2 >= r_support ** 2),
                        (1 - _transition(s, r_flat, r_support), True))
    return TestFunction(k, expr, Box((-r_support,) * k, (r_support,) * k))


def jet_bump(a, r_flat: float = 0.5, r_support: float = 1.0) -> TestFunction:
    """w_a(y) = y^a / a! near the origin, cut off smoothly.

    Satisfies d^b w_a(0) = delta_ab exactly, because w_a coincides with the
    monomial on |y| <= r_flat.
    """
    a = tuple(int(n) for n in a)
    k = len(a)
    mono = sp.Integer(1)
    fact = 1
    for sym, n in zip(coords(k), a):
        mono *= sym ** n
        fact *= math.factorial(n)
    cut = plateau(k, r_flat, r_support)
    return TestFunction(k, mono / fact * cut.expr, cut.box)


def from_expr(k: int, expr, box: Box | None = None) -> TestFunction:
    return TestFunction(k, expr, box if box is not None else unbounded_box(k))
