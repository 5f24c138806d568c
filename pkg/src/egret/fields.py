"""Off-shell polynomial functionals of a scalar field as graph terms.

A Field is a finite sum of graph terms.  Each term carries a complex
coefficient, explicit (hbar, kappa, lambda) degrees, a tuple of vertices and
a tuple of propagator edges.  A vertex holds either a smearing test function
(bound, integrated over) or a fixed spacetime point, plus the multiset of
field factors d^a(phi) sitting at it; functional derivatives expose legs.

Evaluation at a configuration h contracts the whole term as a tensor network
over per-vertex quadrature grids; two fields built over the same smearing
boxes and quadrature spec therefore share grids, so identities that hold
pointwise for the kernels survive evaluation at machine precision.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field as dc_field, replace
from fractions import Fraction

import numpy as np

from .errors import ConfigurationError
from .functions import TestFunction
from .geometry import Box, empty_box
from .propagators import (Kernel, conjugate_kernel, evaluate_kernel,
                          reflect_kernel)
from .quadrature import QuadratureSpec, box_rule

# -- polynomials in the field and its derivatives ------------------------------

MultiIndex = tuple  # length-d tuple of naturals
Monomial = tuple    # sorted tuple of MultiIndex, one entry per field factor


def _mono(factors) -> Monomial:
    return tuple(sorted(tuple(int(n) for n in a) for a in factors))


class FieldPolynomial:
    """Polynomial in d^a(phi) with numeric coefficients, at a single point."""

    def __init__(self, d: int, terms: dict | None = None):
        self.d = int(d)
        self.terms: dict = {}
        for mono, c in (terms or {}).items():
            mono = _mono(mono)
            if any(len(a) != self.d for a in mono):
                raise ConfigurationError("multi-index rank mismatch")
            if c != 0:
                self.terms[mono] = self.terms.get(mono, 0) + c

    @classmethod
    def phi_power(cls, d: int, n: int, coeff=1) -> "FieldPolynomial":
        return cls(d, {((0,) * d,) * n: coeff})

    @classmethod
    def monomial(cls, d: int, factors, coeff=1) -> "FieldPolynomial":
        return cls(d, {_mono(factors): coeff})

    def __add__(self, other):
        out = dict(self.terms)
        for mono, c in other.terms.items():
            out[mono] = out.get(mono, 0) + c
        return FieldPolynomial(self.d, out)

    def scale(self, c):
        return FieldPolynomial(self.d, {m: v * c for m, v in self.terms.items()})

    def __mul__(self, other):
        if isinstance(other, FieldPolynomial):
            out = {}
            for m1, c1 in self.terms.items():
                for m2, c2 in other.terms.items():
                    mono = _mono(m1 + m2)
                    out[mono] = out.get(mono, 0) + c1 * c2
            return FieldPolynomial(self.d, out)
        return self.scale(other)

    def spacetime_derivative(self, mu: int) -> "FieldPolynomial":
        """Total derivative d_mu by the Leibniz rule."""
        out = {}
        for mono, c in self.terms.items():
            for i, a in enumerate(mono):
                lifted = list(mono)
                lifted[i] = tuple(n + (1 if j == mu else 0)
                                  for j, n in enumerate(a))
                key = _mono(lifted)
                out[key] = out.get(key, 0) + c
        return FieldPolynomial(self.d, out)

    def multi_derivative(self, a: MultiIndex) -> "FieldPolynomial":
        poly = self
        for mu, n in enumerate(a):
            for _ in range(n):
                poly = poly.spacetime_derivative(mu)
        return poly

    def var_derivative(self, a: MultiIndex) -> "FieldPolynomial":
        """Partial derivative with respect to the factor d^a(phi)."""
        a = tuple(int(n) for n in a)
        out = {}
        for mono, c in self.terms.items():
            count = mono.count(a)
            if count:
                rest = list(mono)
                rest.remove(a)
                key = tuple(rest)
                out[key] = out.get(key, 0) + c * count
        return FieldPolynomial(self.d, out)

    def degree(self) -> int:
        return max((len(m) for m in self.terms), default=0)

    def parity(self) -> "FieldPolynomial":
        return FieldPolynomial(self.d, {m: c * (-1) ** len(m)
                                        for m, c in self.terms.items()})

    def is_zero(self) -> bool:
        return not self.terms

    def __repr__(self):
        return f"FieldPolynomial({self.terms})"


def mass_dimension(mono: Monomial, d: int) -> Fraction:
    """Sum of (d-2)/2 + |a| over the factors."""
    return sum((Fraction(d - 2, 2) + sum(a) for a in mono), Fraction(0))


# -- graph terms ---------------------------------------------------------------

@dataclass(frozen=True)
class Vertex:
    smearing: TestFunction | None
    factors: tuple = ()
    legs: tuple = ()          # tuple of (slot, multi-index)
    point: tuple | None = None

    def __post_init__(self):
        object.__setattr__(self, "factors", _mono(self.factors))
        object.__setattr__(self, "legs",
                           tuple((int(s), tuple(int(n) for n in a))
                                 for s, a in self.legs))
        if (self.smearing is None) == (self.point is None):
            raise ConfigurationError("vertex needs a smearing xor a point")


@dataclass(frozen=True)
class Edge:
    i: int
    j: int
    kernel: Kernel  # evaluated at x_i - x_j


@dataclass(frozen=True)
class GraphTerm:
    coeff: complex
    vertices: tuple
    edges: tuple = ()
    hbar: int = 0
    kappa: int = 0
    lam: int = 0

    @property
    def degree(self):
        return (self.hbar, self.kappa, self.lam)

    def scaled(self, c) -> "GraphTerm":
        return replace(self, coeff=self.coeff * c)


def _smearing_key(v: Vertex):
    if v.point is not None:
        return ("pt", v.point)
    return ("fn", str(v.smearing.expr), v.smearing.box.lo, v.smearing.box.hi)


def _vertex_key(v: Vertex):
    return (_smearing_key(v), v.factors, v.legs)


def _kernel_key(k: Kernel):
    return (k.label, k.d, k.m, k.mu, k.deriv, k.conj)


def _normalized_edges(edges, perm):
    """Relabel endpoints by perm, orient i < j, collect the reflection sign."""
    out = []
    sigma = 1.0
    for e in edges:
        i, j = perm[e.i], perm[e.j]
        kern = e.kernel
        if i > j:
            i, j = j, i
            kern, s = reflect_kernel(kern)
            sigma *= s
        out.append((i, j, _kernel_key(kern), kern))
    out.sort(key=lambda t: t[:3])
    return tuple(Edge(i, j, k) for i, j, _, k in out), \
        tuple((i, j, kk) for i, j, kk, _ in out), sigma


def canonical_term(term: GraphTerm):
    """Return (key, coeff) with vertices sorted and edges oriented i < j.

    Vertices with identical invariants are permuted (within their tie group)
    to minimize the edge encoding, so isomorphic terms share a key.
    """
    n = len(term.vertices)
    keyed = sorted(range(n), key=lambda i: _vertex_key(term.vertices[i]))
    groups = []
    for idx in keyed:
        if groups and _vertex_key(term.vertices[groups[-1][-1]]) == \
                _vertex_key(term.vertices[idx]):
            groups[-1].append(idx)
        else:
            groups.append([idx])
    if math.prod(math.factorial(len(g)) for g in groups) > 720:
        perms = [sum(groups, [])]
    else:
        perms = [list(itertools.chain.from_iterable(choice))
                 for choice in itertools.product(
                     *[list(itertools.permutations(g)) for g in groups])]
    best = None
    for order in perms:
        perm = {old: new for new, old in enumerate(order)}
        edges, enc, sigma = _normalized_edges(term.edges, perm)
        cand = (enc, -sigma)  # prefer sigma = +1 deterministically
        if best is None or cand < best[0]:
            best = (cand, order, edges, sigma)
    _, order, edges, sigma = best
    vkeys = tuple(_vertex_key(term.vertices[i]) for i in order)
    key = (term.degree, vkeys, best[0][0])
    canon = GraphTerm(term.coeff * sigma,
                      tuple(term.vertices[i] for i in order), edges,
                      term.hbar, term.kappa, term.lam)
    return key, canon


class Field:
    """Finite sum of graph terms over a fixed spacetime dimension."""

    def __init__(self, d: int, terms=()):
        self.d = int(d)
        self.terms = list(terms)

    # -- constructors ---------------------------------------------------------

    @classmethod
    def number(cls, d: int, value, hbar: int = 0, kappa: int = 0,
               lam: int = 0) -> "Field":
        if value == 0:
            return cls(d)
        return cls(d, [GraphTerm(value, (), (), hbar, kappa, lam)])

    @classmethod
    def local(cls, poly: FieldPolynomial, g: TestFunction, coeff=1,
              hbar: int = 0, kappa: int = 0, lam: int = 0) -> "Field":
        terms = []
        for mono, c in sorted(poly.terms.items()):
            v = Vertex(smearing=g, factors=mono)
            terms.append(GraphTerm(coeff * c, (v,), (), hbar, kappa, lam))
        return cls(poly.d, terms)

    # -- ring-ish structure ----------------------------------------------------

    def __add__(self, other: "Field") -> "Field":
        if other.d != self.d:
            raise ConfigurationError("dimension mismatch")
        return Field(self.d, self.terms + other.terms)

    def __sub__(self, other: "Field") -> "Field":
        return self + other.scale(-1)

    def scale(self, c) -> "Field":
        return Field(self.d, [t.scaled(c) for t in self.terms])

    def __mul__(self, other):
        """Classical (pointwise) product; graphs are joined disjointly."""
        if not isinstance(other, Field):
            return self.scale(other)
        out = []
        for t1 in self.terms:
            off = len(t1.vertices)
            for t2 in other.terms:
                edges = t1.edges + tuple(
                    Edge(e.i + off, e.j + off, e.kernel) for e in t2.edges)
                out.append(GraphTerm(t1.coeff * t2.coeff,
                                     t1.vertices + t2.vertices, edges,
                                     t1.hbar + t2.hbar, t1.kappa + t2.kappa,
                                     t1.lam + t2.lam))
        return Field(self.d, out)

    def shift_degrees(self, hbar=0, kappa=0, lam=0) -> "Field":
        return Field(self.d, [replace(t, hbar=t.hbar + hbar,
                                      kappa=t.kappa + kappa, lam=t.lam + lam)
                              for t in self.terms])

    def conjugate(self) -> "Field":
        out = []
        for t in self.terms:
            verts = tuple(
                replace(v, smearing=v.smearing.conjugate())
                if v.smearing is not None else v
                for v in t.vertices)
            edges = tuple(Edge(e.i, e.j, conjugate_kernel(e.kernel))
                          for e in t.edges)
            out.append(GraphTerm(np.conj(t.coeff), verts, edges,
                                 t.hbar, t.kappa, t.lam))
        return Field(self.d, out)

    def parity(self) -> "Field":
        out = []
        for t in self.terms:
            n = sum(len(v.factors) + len(v.legs) for v in t.vertices)
            out.append(t.scaled((-1) ** n))
        return Field(self.d, out)

    def translate(self, vec) -> "Field":
        out = []
        for t in self.terms:
            verts = []
            for v in t.vertices:
                if v.point is not None:
                    verts.append(replace(v, point=tuple(
                        p + w for p, w in zip(v.point, vec))))
                else:
                    verts.append(replace(v, smearing=v.smearing.translate(vec)))
            out.append(replace(t, vertices=tuple(verts)))
        return Field(self.d, out)

    # -- structure queries ------------------------------------------------------

    def support(self) -> Box:
        box = empty_box(self.d)
        for t in self.terms:
            for v in t.vertices:
                if not v.factors and not v.legs:
                    continue
                if v.point is not None:
                    box = box.hull(Box(v.point, v.point))
                else:
                    box = box.hull(v.smearing.box)
        return box

    def open_legs(self) -> int:
        slots = set()
        for t in self.terms:
            for v in t.vertices:
                for s, _ in v.legs:
                    slots.add(s)
        return len(slots)

    def hbar_degrees(self):
        return sorted({t.hbar for t in self.simplify().terms})

    def is_zero(self, tol: float = 0.0) -> bool:
        return all(abs(t.coeff) <= tol for t in self.simplify().terms)

    def is_one(self) -> bool:
        s = self.simplify()
        if len(s.terms) != 1:
            return False
        t = s.terms[0]
        return (not t.vertices and not t.edges and t.degree == (0, 0, 0)
                and abs(t.coeff - 1) < 1e-14)

    def max_coeff(self) -> float:
        return max((abs(t.coeff) for t in self.terms), default=0.0)

    def simplify(self, rel_tol: float = 1e-12) -> "Field":
        merged: dict = {}
        for term in self.terms:
            key, canon = canonical_term(term)
            if key in merged:
                merged[key] = replace(merged[key],
                                      coeff=merged[key].coeff + canon.coeff)
            else:
                merged[key] = canon
        scale = max((abs(t.coeff) for t in merged.values()), default=0.0)
        cut = rel_tol * max(scale, 1.0)
        out = [merged[k] for k in sorted(merged, key=repr)
               if abs(merged[k].coeff) > cut]
        return Field(self.d, out)

    # -- functional derivative ---------------------------------------------------

    def functional_derivative(self, order: int = 1) -> "Field":
        """Expose ``order`` legs; symmetrized sum over ordered removals."""
        cur = self
        for _ in range(order):
            nxt = []
            for t in cur.terms:
                slot = max([s for v in t.vertices for s, _ in v.legs],
                           default=-1) + 1
                for vi, v in enumerate(t.vertices):
                    seen = set()
                    for a in v.factors:
                        if a in seen:
                            continue
                        seen.add(a)
                        count = v.factors.count(a)
                        rest = list(v.factors)
                        rest.remove(a)
                        nv = replace(v, factors=tuple(rest),
                                     legs=v.legs + ((slot, a),))
                        verts = t.vertices[:vi] + (nv,) + t.vertices[vi + 1:]
                        nxt.append(replace(t, coeff=t.coeff * count,
                                           vertices=verts))
            cur = Field(self.d, nxt)
        return cur

    def contract_legs(self, etas) -> "Field":
        """Pair leg slot i with test function etas[i]; returns a plain field."""
        out = []
        for t in self.terms:
            verts = []
            coeff = t.coeff
            for v in t.vertices:
                if not v.legs:
                    verts.append(v)
                    continue
                smear = v.smearing
                if smear is None:
                    raise ConfigurationError("cannot contract a point vertex leg")
                for s, a in v.legs:
                    smear = smear * etas[s].derivative(a)
                verts.append(Vertex(smearing=smear, factors=v.factors))
            out.append(replace(t, coeff=coeff, vertices=tuple(verts)))
        return Field(self.d, out)

    # -- serialization ------------------------------------------------------------

    def to_dict(self) -> dict:
        terms = []
        for t in self.terms:
            verts = []
            for v in t.vertices:
                dv = {"factors": [list(a) for a in v.factors],
                      "legs": [[s, list(a)] for s, a in v.legs]}
                if v.point is not None:
                    dv["point"] = list(v.point)
                else:
                    dv["smearing"] = v.smearing.to_dict()
                verts.append(dv)
            edges = [{"i": e.i, "j": e.j, "label": e.kernel.label,
                      "d": e.kernel.d, "m": e.kernel.m, "mu": e.kernel.mu,
                      "deriv": list(e.kernel.deriv), "conj": e.kernel.conj}
                     for e in t.edges]
            terms.append({"coeff": [t.coeff.real, t.coeff.imag],
                          "hbar": t.hbar, "kappa": t.kappa, "lam": t.lam,
                          "vertices": verts, "edges": edges})
        return {"schema": 1, "dimension": self.d, "terms": terms}

    @classmethod
    def from_dict(cls, data: dict) -> "Field":
        if data.get("schema") != 1:
            raise ConfigurationError("unknown field schema")
        d = int(data["dimension"])
        terms = []
        for td in data["terms"]:
            verts = []
            for dv in td["vertices"]:
                legs = tuple((s, tuple(a)) for s, a in dv.get("legs", []))
                if "point" in dv:
                    verts.append(Vertex(smearing=None, point=tuple(dv["point"]),
                                        factors=[tuple(a) for a in dv["factors"]],
                                        legs=legs))
                else:
                    verts.append(Vertex(
                        smearing=TestFunction.from_dict(dv["smearing"]),
                        factors=[tuple(a) for a in dv["factors"]], legs=legs))
            edges = tuple(Edge(e["i"], e["j"],
                               Kernel(e["label"], e["d"], e["m"], e["mu"],
                                      tuple(e["deriv"]), e["conj"]))
                          for e in td["edges"])
            coeff = complex(td["coeff"][0], td["coeff"][1])
            terms.append(GraphTerm(coeff, tuple(verts), edges,
                                   td["hbar"], td["kappa"], td["lam"]))
        return cls(d, terms)


# -- evaluation -----------------------------------------------------------------

_LETTERS = "abcdefghijkl"


class _DerivCache:
    def __init__(self, h: TestFunction | None):
        self.h = h
        self.cache = {}

    def get(self, a) -> TestFunction:
        if a not in self.cache:
            self.cache[a] = self.h.derivative(a)
        return self.cache[a]


def _term_value(term: GraphTerm, dcache: _DerivCache | None,
                spec: QuadratureSpec, eps: float) -> complex:
    if any(v.legs for v in term.vertices):
        raise ConfigurationError("field has open legs; contract them first")
    if not term.vertices:
        return term.coeff
    vecs, pts = [], []
    for v in term.vertices:
        if v.factors and dcache is None:
            return 0.0  # evaluation at phi = 0
        if v.point is not None:
            p = np.array([v.point], dtype=float)
            vec = np.ones(1, dtype=complex)
        else:
            box = v.smearing.box
            if not box.is_bounded():
                raise ConfigurationError("bound vertex with unbounded support")
            p, w = box_rule(box, spec)
            vec = w * v.smearing(p)
        for a in v.factors:
            vec = vec * dcache.get(a)(p)
        vecs.append(vec)
        pts.append(p)
    n = len(vecs)
    subs = [_LETTERS[i] for i in range(n)]
    operands = list(vecs)
    labels = list(subs)
    for e in term.edges:
        diff = pts[e.i][:, None, :] - pts[e.j][None, :, :]
        operands.append(evaluate_kernel(e.kernel, diff, eps))
        labels.append(_LETTERS[e.i] + _LETTERS[e.j])
    expr = ",".join(labels) + "->"
    val = np.einsum(expr, *operands, optimize="greedy")
    return term.coeff * complex(val)


def field_pairings(field: Field, h: TestFunction | None,
                   spec: QuadratureSpec | None = None,
                   eps: float = 0.0) -> dict:
    """Per-degree values of the field at configuration h (None means phi=0)."""
    spec = spec or QuadratureSpec()
    dcache = _DerivCache(h) if h is not None else None
    out: dict = {}
    for term in field.terms:
        val = _term_value(term, dcache, spec, eps)
        if term.degree in out:
            out[term.degree] += val
        else:
            out[term.degree] = val
    return {k: out[k] for k in sorted(out)}


def omega0(field: Field, spec: QuadratureSpec | None = None,
           eps: float = 0.0) -> dict:
    """Vacuum pairing: evaluation at phi = 0, per formal degree."""
    return field_pairings(field, None, spec, eps)


def evaluate(field: Field, h: TestFunction, spec: QuadratureSpec | None = None,
             eps: float = 0.0, at: dict | None = None):
    """Evaluate at configuration h.  Returns the per-degree dict, or a single
    number when ``at`` supplies values for (hbar, kappa, lambda)."""
    vals = field_pairings(field, h, spec, eps)
    if at is None:
        return vals
    hb, kp, lm = at.get("hbar", 1.0), at.get("kappa", 1.0), at.get("lam", 1.0)
    return sum(v * hb ** dh * kp ** dk * lm ** dl
               for (dh, dk, dl), v in vals.items())


def pairing_residual(field: Field, configs, spec: QuadratureSpec | None = None,
                     eps: float = 0.0) -> float:
    """Max |pairing| over omega0 and the supplied configurations."""
    worst = 0.0
    for h in [None, *configs]:
        vals = field_pairings(field, h, spec, eps)
        for v in vals.values():
            worst = max(worst, abs(v))
    return worst
