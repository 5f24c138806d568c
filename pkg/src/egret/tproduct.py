"""Time-ordered products of local functionals by iterated Feynman-kernel stars.

The n-fold product is built as a left-associated chain of star products whose
two-point kernel is the Feynman propagator.  Chaining is exact here: the
falling-factorial contraction weights compose so that the result is symmetric
in its entries, carries one power of hbar per contraction line, and reduces to
an ordinary star product (with the on-shell two-point kernel) whenever one
group of entries lies outside the past shadow of the rest.

Renormalization enters only through kernel classes of non-negative singular
order.  The shipped models never produce one; a mock kernel rule can declare
a class singular, in which case the saturated pair is replaced by the pairing
of the extended kernel against the correlation of the vertex smearings.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, replace

import numpy as np
import sympy as sp

from .balanced import balanced_decompose, is_balanced
from .distributions import (DistributionOffOrigin, _multi_indices_upto,
                            mass_homogeneity_residual, scaling_adjoint)
from .errors import (ConfigurationError, NotInvertibleError,
                     UnresolvedRenormalizationError)
from .extension import extend
from .fields import (Edge, Field, FieldPolynomial, GraphTerm, Vertex,
                     mass_dimension, pairing_residual)
from .functions import TestFunction, bump, jet_bump
from .geometry import Box, avoids_past_shadow
from .propagators import Kernel, kernel_expr
from .quadrature import QuadratureSpec, box_rule
from .series import FormalSeries, Orders
from .star import _contract_pair, star


# -- local entries ---------------------------------------------------------------


def awi_lift(poly: FieldPolynomial) -> dict:
    """Rewrite A as sum_a d^a B_a with balanced B_a; returns {a: B_a}.

    Balanced monomials keep the derivative weight on the field factors as low
    as the equivalence class allows, so the kernels that show up after
    contraction stay inside the shipped catalog.  A balanced A passes through
    unchanged.
    """
    if is_balanced(poly):
        return {(0,) * poly.d: poly}
    return balanced_decompose(poly)


def lifted_local(poly: FieldPolynomial, g: TestFunction, coeff=1,
                 kappa: int = 0, lam: int = 0) -> Field:
    """The smeared local entry A(g), with outer derivatives moved onto g.

    Each piece d^a B_a of the lift contributes B_a smeared with
    (-1)^|a| d^a g, which is the same functional integrated by parts.
    """
    d = poly.d
    out = Field(d)
    for a, B in sorted(awi_lift(poly).items()):
        clean = FieldPolynomial(d, {m: complex(c) for m, c in B.terms.items()})
        if clean.is_zero():
            continue
        sm = g.derivative(a).scaled((-1.0) ** sum(a)) if sum(a) else g
        out = out + Field.local(clean, sm, coeff=coeff, kappa=kappa, lam=lam)
    return out


@dataclass(frozen=True)
class Interaction:
    """A local interaction S(g) = sum_k integral (g kappa)^k L_k.

    `terms` lists (k, L_k) with k >= 1 the coupling order of the vertex and
    L_k a field polynomial; the k-th piece is smeared with g^k.
    """
    g: TestFunction
    terms: tuple

    def __post_init__(self):
        object.__setattr__(self, "terms", tuple(
            (int(k), poly) for k, poly in self.terms))
        for k, poly in self.terms:
            if k < 1:
                raise ConfigurationError("coupling order must be >= 1")
            if poly.d != self.g.k:
                raise ConfigurationError("interaction density rank mismatch")

    @classmethod
    def single(cls, poly: FieldPolynomial, g: TestFunction,
               k: int = 1) -> "Interaction":
        return cls(g, ((k, poly),))

    @property
    def d(self) -> int:
        return self.g.k

    def field(self) -> Field:
        out = Field(self.d)
        for k, poly in self.terms:
            gk = self.g
            for _ in range(k - 1):
                gk = gk * self.g
            out = out + lifted_local(poly, gk, kappa=k)
        return out.simplify()


# -- renormalization hooks --------------------------------------------------------


@dataclass(frozen=True)
class MockKernelRule:
    """Declares one contraction class singular and supplies its density.

    `derivs` is the sorted multiset of edge derivative multi-indices that make
    up the class (e.g. ((0,), (0,)) for an underived double line); `density`
    is the replacement two-point density as a sympy expression in the relative
    coordinates and `sd` its declared scaling degree.
    """
    derivs: tuple
    density: object
    sd: float
    name: str = "mock-kernel"

    def __post_init__(self):
        object.__setattr__(self, "derivs", tuple(
            sorted(tuple(int(n) for n in a) for a in self.derivs)))


class _NumericProbe:
    """Duck-typed test function: rank, box, and pointwise values."""

    def __init__(self, k: int, box: Box, fn):
        self.k = int(k)
        self.box = box
        self._fn = fn

    def __call__(self, points):
        return self._fn(np.asarray(points, dtype=float))


def correlation_pairing(ext, g1: TestFunction, g2: TestFunction,
                        spec: QuadratureSpec | None = None) -> complex:
    """<t(x1 - x2), g1(x1) g2(x2)> for an extended kernel t.

    In the relative coordinate u = x1 - x2 this is a single pairing against
    w(u) = integral g1(u + y) g2(y) dy.  The subtraction jets of w at u = 0
    come out of the same quadrature grid exactly, and the local (delta) part
    of the extension acts on them directly.
    """
    spec = spec or QuadratureSpec()
    k = ext.density.k
    if g1.k != k or g2.k != k:
        raise ConfigurationError("smearing rank does not match the kernel")
    py, wy = box_rule(g2.box, spec)
    gv = wy * np.asarray(g2(py), dtype=complex)

    def corr(nodes, da=None):
        g = g1 if da is None else g1.derivative(da)
        shifted = nodes[:, None, :] + py[None, :, :]
        vals = np.asarray(g(shifted.reshape(-1, k)), dtype=complex)
        return vals.reshape(len(nodes), len(py)) @ gv

    jets = {}
    if ext.omega >= 0:
        for a in _multi_indices_upto(k, ext.omega):
            jets[a] = complex(
                np.sum(gv * np.asarray(g1.derivative(a)(py), dtype=complex)))
    bumps = {a: jet_bump(a, ext.r_flat, ext.r_support)
             for a, j in jets.items() if j != 0}

    def probe_fn(nodes):
        out = corr(nodes)
        for a, wa in bumps.items():
            out = out - jets[a] * np.asarray(wa(nodes), dtype=complex)
        return out

    box = Box(tuple(a - b for a, b in zip(g1.box.lo, g2.box.hi)),
              tuple(a - b for a, b in zip(g1.box.hi, g2.box.lo)))
    breaks = ()
    if bumps:
        box = box.hull(Box((-ext.r_support,) * k, (ext.r_support,) * k))
        breaks = (ext.r_flat, ext.r_support)
    val = ext.density.pairing(_NumericProbe(k, box, probe_fn), spec,
                              breaks=breaks)
    for a, c in ext.delta.items():
        val += c * (-1.0) ** sum(a) * jets.get(tuple(a), 0.0)
    return complex(val)


# -- the product -------------------------------------------------------------------


class TProduct:
    """Time-ordered products for one model (spacetime dimension and mass).

    Entries are local functionals; `T` accepts plain fields or tuples
    (poly, g), (poly, g, kappa) or (poly, g, kappa, lam) which are lifted
    through `lifted_local`.  `policy`, `counterterms`, `r_flat` and
    `r_support` configure the extension used when a mock kernel rule marks a
    contraction class singular.
    """

    def __init__(self, d: int, m: float, mu: float = 1.0,
                 mock: MockKernelRule | None = None, policy: str | None = None,
                 counterterms: dict | None = None, r_flat: float = 0.5,
                 r_support: float = 1.0, spec: QuadratureSpec | None = None):
        self.d = int(d)
        self.m = float(m)
        self.mu = float(mu)
        self.kernel = Kernel("feynman", self.d, self.m, self.mu)
        self.star_kernel = (Kernel("wightman", 1, self.m, self.mu)
                            if self.d == 1
                            else Kernel("hadamard", 2, 0.0, self.mu))
        self.mock = mock
        self.policy = policy
        self.counterterms = {tuple(a): c
                             for a, c in (counterterms or {}).items()}
        self.r_flat = float(r_flat)
        self.r_support = float(r_support)
        self.spec = spec or QuadratureSpec()
        self.backend = ("d1-massive-numeric" if self.d == 1
                        else "d2-massless-log")
        self.records = []
        self._ext = None

    # -- entry handling ---------------------------------------------------------

    def entry(self, item) -> Field:
        if isinstance(item, Field):
            if item.d != self.d:
                raise ConfigurationError("entry dimension mismatch")
            return item
        poly, g, *rest = item
        kappa = rest[0] if rest else 0
        lam = rest[1] if len(rest) > 1 else 0
        return lifted_local(poly, g, kappa=kappa, lam=lam)

    # -- the product -------------------------------------------------------------

    def T(self, entries, orders: Orders | None = None) -> Field:
        fields = [self.entry(e) for e in entries]
        out = self._chain_T(fields, orders)
        for ins, rest in self.insertion_terms(fields):
            sub = self._chain_T([ins] + list(rest), orders)
            out = out + sub.scale(-1j).shift_degrees(hbar=1)
        return out.simplify()

    def _chain_T(self, fields, orders: Orders | None = None) -> Field:
        if not fields:
            return Field.number(self.d, 1.0)
        acc = fields[0]
        for f in fields[1:]:
            acc = star(acc, f, self.kernel, orders)
        return self._renormalize(acc.simplify())

    def insertion_terms(self, fields):
        """Pairwise counterterm entries added on top of the bare chain.

        The base product has none; a product composed with a renormalization
        map yields, per entry pair, the local field obtained by contracting
        the pair into the map's kernel, to be multiplied into the remaining
        entries with one extra power of hbar over i.
        """
        return ()

    def _hbar_ok(self, t: GraphTerm) -> bool:
        """One hbar per contraction line; substituted kernel classes and
        counterterm insertions keep the lines' powers without the lines."""
        if self.mock is None:
            return t.hbar == len(t.edges)
        return t.hbar >= len(t.edges)

    def raw_chain(self, entries, orders: Orders | None = None) -> list:
        """Unsimplified chain terms; vertex positions follow entry order.

        Internal building block for constructions that must know which vertex
        came from which entry; not available with a mock kernel rule, whose
        substitution removes vertices.
        """
        if self.mock is not None:
            raise ConfigurationError(
                "positional chains are not defined once kernel classes "
                "are replaced by scalars")
        fields = [self.entry(e) for e in entries]
        terms = list(fields[0].terms)
        for f in fields[1:]:
            nxt = []
            for s in terms:
                for t in f.terms:
                    cap = None
                    if orders is not None:
                        if (s.kappa + t.kappa > orders.kappa
                                or s.lam + t.lam > orders.lam):
                            continue
                        cap = orders.hbar - s.hbar - t.hbar
                        if cap < 0:
                            continue
                    nxt.extend(_contract_pair(s, t, self.kernel, 1, 0, cap))
            terms = nxt
        return terms

    # -- singular classes ---------------------------------------------------------

    def class_order(self, derivs: tuple) -> int:
        """Singular order of a contraction class (multiset of edge derivs)."""
        if self.mock is not None and tuple(sorted(derivs)) == self.mock.derivs:
            return int(math.floor(self.mock.sd + 0.25)) - self.d
        sd = 0.0
        for a in derivs:
            w = sum(a)
            sd += max(0, w - 1) if self.d == 1 else w
        return int(math.floor(sd + 0.25)) - self.d

    def _mock_extension(self, derivs: tuple, omega: int):
        if self.mock is None or tuple(sorted(derivs)) != self.mock.derivs:
            raise UnresolvedRenormalizationError(
                f"contraction class {derivs} has singular order {omega} "
                "and no extension is shipped for it")
        if self._ext is None:
            dist = DistributionOffOrigin(self.d, self.mock.density,
                                         degree=self.mock.sd,
                                         name=self.mock.name)
            ext = extend(dist, policy=self.policy, omega=omega,
                         r_flat=self.r_flat, r_support=self.r_support)
            if self.counterterms:
                ext = ext.shifted(self.counterterms)
            self._ext = ext
        return self._ext

    def _record(self, derivs, ext, value):
        for rec in self.records:
            if rec["class"] == [list(a) for a in derivs]:
                rec["count"] += 1
                return
        self.records.append({
            "class": [list(a) for a in derivs],
            "omega": ext.omega,
            "policy": self.policy,
            "delta": {" ".join(map(str, a)): [complex(c).real, complex(c).imag]
                      for a, c in sorted(ext.delta.items())},
            "value": [value.real, value.imag],
            "count": 1,
        })

    def _renormalize(self, F: Field) -> Field:
        out = []
        for t in F.terms:
            pair_edges = {}
            for e in t.edges:
                key = (min(e.i, e.j), max(e.i, e.j))
                pair_edges.setdefault(key, []).append(e)
            singular = []
            for key in sorted(pair_edges):
                derivs = tuple(sorted(e.kernel.deriv for e in pair_edges[key]))
                om = self.class_order(derivs)
                if om < 0:
                    continue
                singular.append((key, derivs,
                                 self._mock_extension(derivs, om)))
            if not singular:
                out.append(t)
                continue
            coeff = t.coeff
            drop = set()
            for (i, j), derivs, ext in singular:
                vi, vj = t.vertices[i], t.vertices[j]
                if (vi.factors or vj.factors or vi.legs or vj.legs
                        or vi.point is not None or vj.point is not None):
                    raise ConfigurationError(
                        "singular kernel class with spectator structure on "
                        "its endpoints is outside the shipped engine")
                if any({e.i, e.j} & {i, j} and {e.i, e.j} != {i, j}
                       for e in t.edges):
                    raise ConfigurationError(
                        "singular kernel class must saturate both endpoints")
                val = correlation_pairing(ext, vi.smearing, vj.smearing,
                                          self.spec)
                coeff = coeff * val
                drop.update((i, j))
                self._record(derivs, ext, val)
            keep = [v for idx, v in enumerate(t.vertices) if idx not in drop]
            remap = {}
            for idx in range(len(t.vertices)):
                if idx not in drop:
                    remap[idx] = len(remap)
            edges = tuple(Edge(remap[e.i], remap[e.j], e.kernel)
                          for e in t.edges if e.i not in drop)
            out.append(GraphTerm(coeff, tuple(keep), edges,
                                 t.hbar, t.kappa, t.lam))
        return Field(F.d, out).simplify()


class SymmetrizedStarProduct(TProduct):
    """Entry-symmetrized plain star products; ignores time ordering.

    Linear, symmetric, with the identity as its one-slot product, so any
    relation that uses only those properties still holds; causal
    factorization does not.  Serves as the negative control in the harness.
    """

    def T(self, entries, orders: Orders | None = None) -> Field:
        fields = [self.entry(e) for e in entries]
        if not fields:
            return Field.number(self.d, 1.0)
        out = Field(self.d)
        for perm in itertools.permutations(range(len(fields))):
            acc = fields[perm[0]]
            for idx in perm[1:]:
                acc = star(acc, fields[idx], self.star_kernel, orders)
            out = out + acc
        return out.scale(1.0 / math.factorial(len(fields))).simplify()


# -- generating functional -----------------------------------------------------------


def smatrix(T: TProduct, S, korder: int, lam_cap: int = 1,
            as_series: bool = False):
    """The formal S-matrix 1 + sum_n (i/hbar)^n / n! T_n(S x ... x S).

    `S` is an Interaction or a Field whose terms all carry coupling degree
    at least one; the sum is truncated at total kappa + lambda order
    `korder` + `lam_cap`.  Grading is audited on the way: every term must
    carry one hbar per contraction line, and vacuum terms of odd total
    factor degree must be absent.
    """
    Sf = S.field() if isinstance(S, Interaction) else S
    if any(t.kappa + t.lam < 1 for t in Sf.terms):
        raise ConfigurationError(
            "the S-matrix needs entries of coupling degree >= 1")
    orders = Orders(8 * (korder + lam_cap) + 8, korder, lam_cap)
    out = Field.number(T.d, 1.0)
    for n in range(1, korder + lam_cap + 1):
        Tn = T.T([Sf] * n, orders)
        _audit_grading(T, Tn)
        out = out + Tn.scale(1j ** n / math.factorial(n)) \
                      .shift_degrees(hbar=-n)
    out = out.simplify()
    if as_series:
        return field_series(out, Orders(orders.hbar, korder, lam_cap))
    return out


def _audit_grading(T: TProduct, F: Field):
    for t in F.terms:
        if not T._hbar_ok(t):
            raise ConfigurationError("hbar grading violated: "
                                     f"{t.hbar} powers on {len(t.edges)} lines")


def field_series(F: Field, orders: Orders) -> FormalSeries:
    """Degree-indexed view of a field; coefficients are degree-zeroed fields."""
    slices = {}
    for t in F.terms:
        slices.setdefault(t.degree, []).append(
            replace(t, hbar=0, kappa=0, lam=0))
    coeffs = {deg: Field(F.d, ts).simplify() for deg, ts in slices.items()}
    return FormalSeries(coeffs, orders, laurent=True, zero=Field(F.d))


def star_inverse(F: Field, kernel: Kernel, orders: Orders) -> Field:
    """Star-inverse of 1 + (terms of coupling degree >= 1), by the
    geometric series; the truncation orders bound the number of steps."""
    one = Field.number(F.d, 1.0)
    X = (F - one).simplify()
    if any(t.kappa + t.lam < 1 for t in X.terms):
        raise NotInvertibleError(
            "star inverse needs a unit plus coupling-degree >= 1 remainder")
    out = one
    power = one
    for _ in range(orders.kappa + orders.lam):
        power = star(power, X, kernel, orders).scale(-1.0).simplify()
        if power.is_zero():
            break
        out = out + power
    return out.simplify()


# -- causal Wick expansion -------------------------------------------------------------


def _submonomial_choices(mono):
    """(sub, rest, C) splits of a monomial; C is the multinomial count."""
    classes = sorted(set(mono))
    counts = [mono.count(a) for a in classes]
    for picks in itertools.product(*[range(c + 1) for c in counts]):
        C = math.prod(math.comb(c, p) for c, p in zip(counts, picks))
        sub, rest = [], []
        for a, c, p in zip(classes, counts, picks):
            sub.extend([a] * p)
            rest.extend([a] * (c - p))
        yield tuple(sub), tuple(rest), C


def causal_wick_expand(T: TProduct, entries, spec: QuadratureSpec | None = None,
                       configs=(), tol: float = 1e-6) -> dict:
    """Expand T over submonomial splits and compare with the direct product.

    Each entry monomial A_j splits into a contracted part and a spectator
    part; the vacuum value of the product of contracted parts multiplies the
    spectators, with multinomial counts fixed by the one-entry identity.
    Returns a record with the expansion field and the comparison residual.
    """
    if T.mock is not None or getattr(T, "zmap", None) is not None:
        raise ConfigurationError(
            "the expansion bookkeeping needs intact vertex slots")
    norm = []
    for item in entries:
        poly, g, *rest = item
        kappa = rest[0] if rest else 0
        lam = rest[1] if len(rest) > 1 else 0
        norm.append((poly, g, kappa, lam))
    d = T.d
    direct = T.T([(p, g, k, l) for p, g, k, l in norm])

    per_entry = []
    for poly, g, kappa, lam in norm:
        opts = []
        for mono, c in sorted(poly.terms.items()):
            for sub, rest, C in _submonomial_choices(mono):
                opts.append((c * C, sub, rest, g, kappa, lam))
        per_entry.append(opts)

    out_terms = []
    n_choices = 0
    for combo in itertools.product(*per_entry):
        n_choices += 1
        subfields = [Field.local(FieldPolynomial(d, {sub: 1}), g,
                                 kappa=kappa, lam=lam)
                     for _, sub, _, g, kappa, lam in combo]
        chain = T.raw_chain(subfields)
        scale = math.prod(c for c, *_ in combo)
        rests = [rest for _, _, rest, _, _, _ in combo]
        for t in chain:
            if any(v.factors for v in t.vertices):
                continue
            verts = tuple(replace(v, factors=r)
                          for v, r in zip(t.vertices, rests))
            out_terms.append(GraphTerm(t.coeff * scale, verts, t.edges,
                                       t.hbar, t.kappa, t.lam))
    expansion = Field(d, out_terms).simplify()
    resid = pairing_residual((direct - expansion).simplify(), configs,
                             spec or T.spec)
    return {"expansion": expansion, "direct": direct, "choices": n_choices,
            "residual": resid, "passed": resid < tol}


# -- vacuum kernels ----------------------------------------------------------------


def _as_monomial(item, d: int):
    if isinstance(item, FieldPolynomial):
        if len(item.terms) != 1:
            raise ConfigurationError("vacuum kernels take single monomials")
        mono, c = next(iter(item.terms.items()))
        if c != 1:
            raise ConfigurationError("vacuum kernels take unit coefficients")
        return mono
    return tuple(tuple(int(n) for n in a) for a in item)


def _full_matchings(ma, mb):
    """Perfect matchings of two factor multisets, as class maps with counts.

    Yields ({(a, b): e}, weight) where the weight counts the pairings that
    realize the map: prod m_a! prod n_b! / prod e_ab!.
    """
    a_classes = sorted(set(ma))
    b_classes = sorted(set(mb))
    acounts = [ma.count(a) for a in a_classes]
    bcounts = [mb.count(b) for b in b_classes]

    def rec(i, caps, acc):
        if i == len(a_classes):
            yield dict(acc)
            return
        target = acounts[i]

        def fill(j, left, cur):
            if j == len(b_classes):
                if left == 0:
                    yield from rec(i + 1, caps, acc + cur)
                return
            for e in range(min(left, caps[j]) + 1):
                caps[j] -= e
                yield from fill(j + 1, left - e,
                                cur + ([( (a_classes[i], b_classes[j]), e)]
                                       if e else []))
                caps[j] += e

        yield from fill(0, target, [])

    for emap in rec(0, list(bcounts), []):
        w = math.prod(math.factorial(c) for c in acounts)
        w *= math.prod(math.factorial(c) for c in bcounts)
        for e in emap.values():
            w //= math.factorial(e)
        yield emap, w


def t_vev(T: TProduct, monos, eps: float = 0.0) -> DistributionOffOrigin:
    """Closed-form vacuum kernel of the n-fold product, n <= 2.

    For n = 2 the kernel is a function of y = x1 - x2: a sum over perfect
    matchings of the factor multisets, one Feynman kernel per line with the
    derivative orders of the matched slots and a sign per right-slot
    derivative.  The overall hbar power (half the total factor degree) is
    stripped; callers track it through the grading.
    """
    monos = [_as_monomial(x, T.d) for x in monos]
    y = sp.symbols(f"y0:{T.d}", real=True)
    if len(monos) == 1:
        const = sp.Float(1) if not monos[0] else sp.Float(0)
        return DistributionOffOrigin(T.d, const, degree=0.0, order=0,
                                     name="t1")
    if len(monos) != 2:
        raise ConfigurationError(
            "closed-form vacuum kernels shipped for n <= 2")
    ma, mb = monos
    expr = sp.Float(0)
    best_deg = 0
    best_log = 0
    if len(ma) == len(mb):
        for emap, w in _full_matchings(ma, mb):
            piece = sp.Integer(w)
            deg = 0
            logs = 0
            for (a, b), e in emap.items():
                kern = Kernel("feynman", T.d, T.m, T.mu,
                              deriv=tuple(x + yy for x, yy in zip(a, b)))
                piece *= ((-1) ** sum(b) * kernel_expr(kern, eps)) ** e
                deg += (sum(a) + sum(b)) * e
                if T.d == 2 and sum(a) + sum(b) == 0:
                    logs += e
            expr = expr + piece
            best_deg = max(best_deg, deg)
            best_log = max(best_log, logs)
    degree = 0.0 if T.d == 1 else float(best_deg)
    order = 0 if T.d == 1 else best_log
    name = "t2(" + ",".join(str(m) for m in monos) + ")"
    return DistributionOffOrigin(T.d, sp.expand(expr), degree=degree,
                                 order=order, name=name)


# -- axiom harness ------------------------------------------------------------------


def _phi(d: int, n: int) -> FieldPolynomial:
    return FieldPolynomial.phi_power(d, n)


def _d1_probes():
    return [bump((1.0,), 3.8), bump((0.4,), 3.2).scaled(0.7),
            bump((1.8,), 3.0).scaled(1.3)]


def _d2_probes():
    return [bump((0.0, 0.0), 2.6), bump((0.4, -0.2), 2.2).scaled(0.8)]


def _check_symmetry(T, spec, tol):
    d = T.d
    if d == 1:
        ents = [(_phi(1, 3), bump((-0.3,), 0.5)),
                (_phi(1, 2), bump((0.4,), 0.6)),
                (_phi(1, 1), bump((0.05,), 0.45))]
    else:
        ents = [(_phi(2, 2), bump((0.0, 0.0), 0.6)),
                (_phi(2, 2), bump((0.3, 0.2), 0.5)),
                (_phi(2, 1), bump((-0.2, 0.1), 0.5))]
    worst = 0.0
    base2 = T.T(ents[:2])
    worst = max(worst, (base2 - T.T(ents[:2][::-1])).simplify().max_coeff())
    base3 = T.T(ents)
    for perm in itertools.permutations(ents):
        worst = max(worst, (base3 - T.T(list(perm))).simplify().max_coeff())
    return {"name": "symmetry", "residual": worst, "tol": 0.0,
            "passed": worst == 0.0}


def _check_causality(T, spec, tol, configs):
    cases = []
    late, early = bump((2.0,), 0.45), bump((0.0,), 0.5)
    A, B = (_phi(1, 4), late), (_phi(1, 4), early)
    cases.append(("later-left n=2",
                  T.T([A, B]),
                  star(T.T([A]), T.T([B]), T.star_kernel)))
    cases.append(("later-right n=2",
                  T.T([B, A]),
                  star(T.T([A]), T.T([B]), T.star_kernel)))
    lt = (_phi(1, 3), bump((2.2,), 0.4))
    e1 = (_phi(1, 2), bump((0.1,), 0.5))
    e2 = (_phi(1, 2), bump((-0.2,), 0.45))
    cases.append(("split 1|23",
                  T.T([lt, e1, e2]),
                  star(T.T([lt]), T.T([e1, e2]), T.star_kernel)))
    l1 = (_phi(1, 2), bump((2.0,), 0.4))
    l2 = (_phi(1, 3), bump((2.3,), 0.5))
    e3 = (_phi(1, 2), bump((0.0,), 0.5))
    cases.append(("split 12|3",
                  T.T([l1, l2, e3]),
                  star(T.T([l1, l2]), T.T([e3]), T.star_kernel)))
    c1 = (_phi(1, 2), bump((4.0,), 0.4))
    c2 = (_phi(1, 2), bump((2.0,), 0.4))
    c3 = (_phi(1, 2), bump((0.0,), 0.4))
    chain = star(star(T.T([c1]), T.T([c2]), T.star_kernel),
                 T.T([c3]), T.star_kernel)
    cases.append(("chain 1|2|3", T.T([c1, c2, c3]), chain))
    for g, f in [(late, early), (lt[1], e1[1]), (l1[1], e3[1]),
                 (c1[1], c2[1]), (c2[1], c3[1])]:
        if not avoids_past_shadow(g.box, f.box):
            raise ConfigurationError("causality probe geometry is wrong")
    detail = {}
    worst = 0.0
    for label, lhs, rhs in cases:
        r = pairing_residual((lhs - rhs).simplify(), configs, spec)
        detail[label] = r
        worst = max(worst, r)
    return {"name": "causal-factorization", "residual": worst, "tol": tol,
            "passed": worst < tol, "detail": detail}


def _check_s_causality(T, spec, tol, configs):
    gH = bump((2.2,), 0.5)
    gG = bump((1.0,), 0.9)
    gF = bump((-0.2,), 0.5)
    if not avoids_past_shadow(gH.box, gF.box):
        raise ConfigurationError("factorization probe geometry is wrong")
    SH = lifted_local(_phi(1, 4), gH, kappa=1)
    SG = lifted_local(_phi(1, 4), gG, kappa=1)
    SF = lifted_local(_phi(1, 4), gF, kappa=1)
    orders = Orders(64, 2, 0)
    lhs = smatrix(T, (SH + SG + SF).simplify(), 2, lam_cap=0)
    mid = star_inverse(smatrix(T, SG, 2, lam_cap=0), T.star_kernel, orders)
    rhs = star(star(smatrix(T, (SH + SG).simplify(), 2, lam_cap=0), mid,
                    T.star_kernel, orders),
               smatrix(T, (SG + SF).simplify(), 2, lam_cap=0),
               T.star_kernel, orders)
    r = pairing_residual((lhs - rhs).simplify(), configs, spec)
    return {"name": "s-matrix-causal-factorization", "residual": r,
            "tol": tol, "passed": r < tol}


def _check_field_independence(T, spec, tol, configs):
    gA, gB = bump((0.6,), 0.7), bump((-0.4,), 0.6)
    eta = bump((0.1,), 1.2)
    A, B = _phi(1, 4), _phi(1, 3)
    lhs = T.T([(A, gA), (B, gB)]).functional_derivative(1)
    lhs = lhs.contract_legs([eta])
    z = (0,)
    rhs = T.T([(A.var_derivative(z), gA * eta), (B, gB)]) \
        + T.T([(A, gA), (B.var_derivative(z), gB * eta)])
    r1 = pairing_residual((lhs - rhs).simplify(), configs, spec)
    detail = {"derivation": r1}
    r = r1
    try:
        rec = causal_wick_expand(T, [(_phi(1, 2), gA), (_phi(1, 3), gB)],
                                 spec=spec, configs=configs, tol=tol)
        detail["wick-expansion"] = rec["residual"]
        r = max(r1, rec["residual"])
    except ConfigurationError:
        detail["wick-expansion"] = "skipped: merged counterterm slots"
    return {"name": "field-independence", "residual": r, "tol": tol,
            "passed": r < tol, "detail": detail}


def _check_unitarity(T, spec, tol, configs):
    S = lifted_local(_phi(1, 4), bump((0.2,), 0.7), kappa=1)
    orders = Orders(64, 2, 0)
    Sm = smatrix(T, S, 2, lam_cap=0)
    prod = star(Sm.conjugate(), Sm, T.star_kernel, orders)
    diff = (prod - Field.number(T.d, 1.0)).simplify()
    r = pairing_residual(diff, configs, spec)
    return {"name": "unitarity", "residual": r, "tol": tol,
            "passed": r < tol}


def _check_parity(T, spec, tol):
    d = T.d
    if d == 1:
        ents = [(_phi(1, 3), bump((0.2,), 0.5)),
                (_phi(1, 2), bump((-0.3,), 0.5))]
        odd = [(_phi(1, 1), bump((0.1,), 0.4)),
               (_phi(1, 2), bump((0.5,), 0.5)),
               (_phi(1, 2), bump((-0.4,), 0.5))]
    else:
        ents = [(_phi(2, 1), bump((0.2, 0.0), 0.5)),
                (_phi(2, 2), bump((-0.3, 0.1), 0.5))]
        odd = [(_phi(2, 1), bump((0.0, 0.0), 0.5)),
               (_phi(2, 2), bump((0.4, -0.2), 0.5)),
               (_phi(2, 2), bump((-0.4, 0.2), 0.5))]
    flipped = T.T([(p.parity(), g) for p, g in ents])
    r1 = (T.T(ents).parity() - flipped).simplify().max_coeff()
    vac = [abs(t.coeff) for t in T.T(odd).terms
           if all(not v.factors for v in t.vertices)]
    r = max([r1, *vac])
    return {"name": "parity-and-odd-vanishing", "residual": r, "tol": 0.0,
            "passed": r == 0.0}


def _check_grading(T, spec, tol):
    F = T.T([(_phi(1, 4), bump((0.3,), 0.6)),
             (_phi(1, 4), bump((-0.2,), 0.6))])
    bad = sum(1 for t in F.terms if not T._hbar_ok(t))
    vev_hbar = sorted({t.hbar for t in F.terms
                       if all(not v.factors for v in t.vertices)})
    if vev_hbar != [4]:
        bad += 1
    G = T.T([(_phi(1, 3), bump((0.1,), 0.5)),
             (_phi(1, 2), bump((0.4,), 0.5))])
    bad += sum(1 for t in G.terms
               if all(not v.factors for v in t.vertices))
    return {"name": "hbar-grading", "residual": float(bad), "tol": 0.0,
            "passed": bad == 0}


def _entry_var_derivative(F: Field, a) -> Field:
    """Derivative of a sum of one-vertex local terms by the factor d^a(phi)."""
    out = []
    for t in F.terms:
        (v,) = t.vertices
        count = v.factors.count(a)
        if count:
            rest = list(v.factors)
            rest.remove(a)
            out.append(replace(t, coeff=t.coeff * count,
                               vertices=(replace(v, factors=tuple(rest)),)))
    return Field(F.d, out)


def _h_contractions(T: TProduct, h: TestFunction, ents) -> Field:
    """One propagator line from h into each entry slot of the bare chain.

    The attached line carries the slot's factor derivative order on the
    kernel, a sign per derivative, and one power of hbar; the factor itself
    is removed with its multiplicity.
    """
    terms = []
    for k, ent in enumerate(ents):
        classes = sorted({a for t in ent.terms
                          for v in t.vertices for a in v.factors})
        for a in classes:
            dent = _entry_var_derivative(ent, a)
            if dent.is_zero():
                continue
            entries2 = list(ents)
            entries2[k] = dent
            kern = replace(T.kernel, deriv=a)
            sign = (-1.0) ** sum(a)
            for t in T.raw_chain(entries2):
                verts = (Vertex(smearing=h, factors=()),) + t.vertices
                edges = tuple(Edge(e.i + 1, e.j + 1, e.kernel)
                              for e in t.edges) + (Edge(0, 1 + k, kern),)
                terms.append(GraphTerm(t.coeff * sign, verts, edges,
                                       t.hbar + 1, t.kappa, t.lam))
    return Field(T.d, terms)


def field_equation_rhs(T: TProduct, h: TestFunction, rest) -> Field:
    """phi(h) T(rest) plus one propagator line from h into each entry slot.

    This is the graph form of the product's off-shell field equation.  The
    contraction sum runs over the bare chain and again over each pairwise
    counterterm insertion, mirroring how the product itself is assembled.
    """
    ents = [T.entry(e) for e in rest]
    out = Field.local(_phi(T.d, 1), h) * T.T(ents)
    out = out + _h_contractions(T, h, ents)
    for ins, rem in T.insertion_terms(ents):
        out = out + _h_contractions(T, h, [ins] + list(rem)) \
            .scale(-1j).shift_degrees(hbar=1)
    return out.simplify()


def _check_field_equation(T, spec, tol, configs):
    h = bump((0.3,), 0.6)
    F1 = (_phi(1, 4), bump((0.0,), 0.7))
    F2 = (_phi(1, 2), bump((0.5,), 0.5))
    worst = 0.0
    detail = {}
    for label, rest in [("n=2", [F1]), ("n=3", [F1, F2])]:
        lhs = T.T([(_phi(1, 1), h), *rest])
        diff = (lhs - field_equation_rhs(T, h, rest)).simplify()
        r = max(diff.max_coeff(), pairing_residual(diff, configs, spec))
        detail[label] = r
        worst = max(worst, r)
    return {"name": "field-equation", "residual": worst, "tol": tol,
            "passed": worst < tol, "detail": detail}


def _check_scaling(T, spec, tol):
    if T.d == 1:
        h = bump((0.35,), 0.3)
        worst = 0.0
        detail = {}
        for mono in (_phi(1, 2), _phi(1, 3)):
            pair = (mono, mono)

            def fam(m, pair=pair):
                return t_vev(TProduct(1, m, T.mu), pair)

            D = float(sum(mass_dimension(_as_monomial(p, 1), 1)
                          for p in pair))
            rep = mass_homogeneity_residual(fam, T.m, h, degree=D,
                                            order=0, spec=spec, step=5e-4)
            detail[f"deg={D}"] = rep["residual"]
            worst = max(worst, rep["residual"])
        return {"name": "scaling", "residual": worst, "tol": tol,
                "passed": worst < tol, "detail": detail}
    # The probe sits in the spacelike wedge, clear of the null cone: there
    # the sharp (eps = 0) kernel is smooth and the adjoint-Euler residual is
    # pure quadrature error; a fixed grid cannot resolve the regularized
    # cone crossing, and the real log turns timelike arguments into nans.
    rspec = replace(T.spec.tighter(3),
                    angular_points=max(T.spec.angular_points, 192))
    mono = _phi(2, 2)
    dist = t_vev(T, (mono, mono))
    h = bump((0.0, 1.2), 0.55)
    probe = scaling_adjoint(h, float(dist.degree), 2, power=dist.order)
    r = abs(dist.pairing(probe, rspec))
    return {"name": "scaling", "residual": float(r), "tol": tol,
            "passed": r < tol,
            "detail": {"degree": float(dist.degree), "order": dist.order}}


_D1_SUITE = ("symmetry", "causal-factorization",
             "s-matrix-causal-factorization", "field-independence",
             "unitarity", "parity-and-odd-vanishing", "hbar-grading",
             "field-equation", "scaling")
_D2_SUITE = ("symmetry", "parity-and-odd-vanishing", "scaling")


def check_axioms(T: TProduct, suite="all", spec: QuadratureSpec | None = None,
                 tol: float = 1e-6, scaling_tol: float = 1e-5) -> dict:
    """Run the product axioms appropriate to the backend; returns a report.

    Each check builds its own probe geometry; numeric residuals are absolute
    pairing values over a fixed family of order-one configurations.
    """
    if spec is None:
        spec = T.spec if T.d == 1 else QuadratureSpec(panels=4, points=8)
    names = (_D1_SUITE if T.d == 1 else _D2_SUITE) if suite == "all" \
        else tuple(suite)
    configs = _d1_probes() if T.d == 1 else _d2_probes()
    checks = []
    for name in names:
        if name == "symmetry":
            checks.append(_check_symmetry(T, spec, tol))
        elif name == "causal-factorization":
            checks.append(_check_causality(T, spec, tol, configs))
        elif name == "s-matrix-causal-factorization":
            checks.append(_check_s_causality(T, spec, tol, configs))
        elif name == "field-independence":
            checks.append(_check_field_independence(T, spec, tol, configs))
        elif name == "unitarity":
            checks.append(_check_unitarity(T, spec, tol, configs))
        elif name == "parity-and-odd-vanishing":
            checks.append(_check_parity(T, spec, tol))
        elif name == "hbar-grading":
            checks.append(_check_grading(T, spec, tol))
        elif name == "field-equation":
            checks.append(_check_field_equation(T, spec, tol, configs))
        elif name == "scaling":
            checks.append(_check_scaling(T, spec, scaling_tol))
        else:
            raise ConfigurationError(f"unknown check {name!r}")
    for c in checks:
        c["residual"] = float(c["residual"])
        c["passed"] = bool(c["passed"])
        if "detail" in c:
            c["detail"] = {k: (v if isinstance(v, (list, str)) else float(v))
                           for k, v in c["detail"].items()}
    return {"backend": T.backend,
            "passed": all(c["passed"] for c in checks),
            "checks": checks}
