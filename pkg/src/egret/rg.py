"""Finite renormalizations and interacting fields on top of the product engine.

A renormalization map is the identity plus local pair kernels: delta-type
two-point counterterms that contract a pair of entry monomials into a single
merged vertex.  Such maps form a group under composition (at pair order the
kernels simply add), they act on products entrywise, and the solver below
recovers the unique map linking two products that differ by admissible
counterterms in a singular kernel class.

Bogoliubov's formula turns the generating functional into interacting
fields.  The lambda derivative is taken exactly, one probe slot per product,
so the coupling-order coefficients are plain fields and their structural
properties (causality under late perturbations, commutator relations,
the off-shell field equation, locality of the generated algebra) can be
checked numerically against independently built right-hand sides.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .distributions import _multi_indices_upto
from .errors import ConfigurationError
from .fields import Field, FieldPolynomial, GraphTerm, Vertex, _vertex_key, \
    field_pairings, pairing_residual
from .functions import TestFunction, bump
from .geometry import Box, _interval_distance, avoids_past_shadow, \
    spacelike_separated
from .quadrature import QuadratureSpec, box_rule, richardson
from .series import Orders
from .star import star
from .tproduct import Interaction, TProduct, _d1_probes, _d2_probes, \
    _full_matchings, _phi, lifted_local, smatrix, star_inverse


# -- renormalization maps --------------------------------------------------------


@dataclass(frozen=True)
class ZKernel:
    """One local pair kernel: jets of delta coefficients on a monomial pair.

    `monos` is the unordered pair of contracted sub-monomials (each a tuple
    of factor multi-indices), `jets` maps derivative multi-indices a to the
    constant coefficient of d^a(delta) in relative coordinates, and `hbar`
    is the power of hbar the kernel carries (the collapsed contraction lines
    minus the one line the composition consumes).
    """

    monos: tuple
    jets: tuple
    hbar: int = 1

    def __post_init__(self):
        P, Q = self.monos
        P = tuple(sorted(tuple(int(n) for n in a) for a in P))
        Q = tuple(sorted(tuple(int(n) for n in a) for a in Q))
        if not P or not Q:
            raise ConfigurationError("pair kernels need nonempty monomials")
        object.__setattr__(self, "monos", tuple(sorted((P, Q))))
        jets = []
        for a, c in (self.jets.items() if isinstance(self.jets, dict)
                     else self.jets):
            jets.append((tuple(int(n) for n in a), complex(c)))
        object.__setattr__(self, "jets", tuple(sorted(jets)))
        object.__setattr__(self, "hbar", int(self.hbar))
        if self.hbar < 0:
            raise ConfigurationError("kernel hbar power must be >= 0")


@dataclass(frozen=True)
class ZMap:
    """A renormalization map: identity at first order plus pair kernels."""

    d: int
    kernels: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "d", int(self.d))
        object.__setattr__(self, "kernels", tuple(self.kernels))
        for kern in self.kernels:
            for mono in kern.monos:
                if any(len(a) != self.d for a in mono):
                    raise ConfigurationError("kernel multi-index rank mismatch")
            for a, _ in kern.jets:
                if len(a) != self.d:
                    raise ConfigurationError("jet multi-index rank mismatch")

    @classmethod
    def identity(cls, d: int) -> "ZMap":
        return cls(d, ())

    def is_identity(self) -> bool:
        return not self.kernels

    def to_dict(self) -> dict:
        kerns = []
        for k in self.kernels:
            kerns.append({
                "monos": [[list(a) for a in mono] for mono in k.monos],
                "jets": [[list(a), [c.real, c.imag]] for a, c in k.jets],
                "hbar": k.hbar,
            })
        return {"schema": 1, "dimension": self.d, "kernels": kerns}

    @classmethod
    def from_dict(cls, data: dict) -> "ZMap":
        if data.get("schema") != 1:
            raise ConfigurationError("unknown map schema")
        kerns = []
        for k in data["kernels"]:
            monos = tuple(tuple(tuple(a) for a in mono) for mono in k["monos"])
            jets = tuple((tuple(a), complex(c[0], c[1])) for a, c in k["jets"])
            kerns.append(ZKernel(monos, jets, k.get("hbar", 1)))
        return cls(int(data["dimension"]), tuple(kerns))


def _single_vertex(t: GraphTerm) -> Vertex:
    if len(t.vertices) != 1 or t.edges:
        raise ConfigurationError("renormalization maps act on local entries")
    (v,) = t.vertices
    if v.legs or v.smearing is None:
        raise ConfigurationError(
            "renormalization maps act on smeared local entries")
    return v


def _embedding_count(factors: tuple, sub: tuple) -> int:
    """Number of ways to pick the multiset `sub` out of `factors`."""
    out = 1
    for a in set(sub):
        out *= math.comb(factors.count(a), sub.count(a))
        if out == 0:
            return 0
    return out


def _removed(factors: tuple, sub: tuple) -> tuple:
    rest = list(factors)
    for a in sub:
        rest.remove(a)
    return tuple(rest)


def z_pair_insertion(Z: ZMap, Fa: Field, Fb: Field) -> Field:
    """The bilinear pair part z(A, B) of the map, applied to local fields.

    For each kernel, every embedding of one contracted monomial into an A
    factor multiset and of the other into a B multiset merges the two
    vertices into one, smeared with the product of the smearings; the delta
    coefficient multiplies in and the kernel's hbar power adds to the term's.
    Derivative jets would spread over the merged vertex by the Leibniz rule
    and are not shipped.
    """
    if Fa.d != Z.d or Fb.d != Z.d:
        raise ConfigurationError("dimension mismatch")
    out = []
    for ta in Fa.terms:
        if not ta.vertices:
            continue
        va = _single_vertex(ta)
        for tb in Fb.terms:
            if not tb.vertices:
                continue
            vb = _single_vertex(tb)
            for kern in Z.kernels:
                P, Q = kern.monos
                for p, q in sorted({(P, Q), (Q, P)}):
                    nA = _embedding_count(va.factors, p)
                    nB = _embedding_count(vb.factors, q)
                    if nA == 0 or nB == 0:
                        continue
                    for a, c in kern.jets:
                        if c == 0:
                            continue
                        if any(a):
                            raise ConfigurationError(
                                "derivative delta kernels cannot be inserted; "
                                "only the scalar delta part is shipped")
                        merged = Vertex(
                            smearing=va.smearing * vb.smearing,
                            factors=_removed(va.factors, p)
                            + _removed(vb.factors, q))
                        out.append(GraphTerm(
                            ta.coeff * tb.coeff * c * nA * nB, (merged,), (),
                            ta.hbar + tb.hbar + kern.hbar,
                            ta.kappa + tb.kappa, ta.lam + tb.lam))
    return Field(Z.d, out).simplify()


def z_apply(Z: ZMap, F: Field, order: int = 2) -> Field:
    """Z(F) = F + (1/2!) z(F, F) + ..., truncated at `order`.

    Shipped maps carry kernels only at pair order, so the series is
    exhausted at order 2; Z(0) = 0 and the first-order piece is the
    identity by construction.
    """
    if order < 1:
        raise ConfigurationError("the map series starts at first order")
    out = F
    if order >= 2:
        out = out + z_pair_insertion(Z, F, F).scale(0.5)
    return out.simplify()


def z_compose(Z1: ZMap, Z2: ZMap, order: int = 2) -> ZMap:
    """Composition Z1 after Z2; at pair order the kernels add."""
    if Z1.d != Z2.d:
        raise ConfigurationError("dimension mismatch")
    if order > 2 and Z1.kernels and Z2.kernels:
        raise ConfigurationError(
            "composition beyond pair order needs kernel re-expansion, "
            "which is not shipped")
    merged: dict = {}
    for kern in Z1.kernels + Z2.kernels:
        key = (kern.monos, kern.hbar)
        jets = dict(merged.get(key, ()))
        for a, c in kern.jets:
            jets[a] = jets.get(a, 0) + c
        merged[key] = tuple(sorted(jets.items()))
    kernels = []
    for (monos, hbar), jets in sorted(merged.items()):
        jets = tuple((a, c) for a, c in jets if c != 0)
        if jets:
            kernels.append(ZKernel(monos, jets, hbar))
    return ZMap(Z1.d, tuple(kernels))


def z_invert(Z: ZMap, order: int = 2) -> ZMap:
    """Group inverse; at pair order the kernels negate."""
    if order > 2 and Z.kernels:
        raise ConfigurationError(
            "inversion beyond pair order needs kernel re-expansion, "
            "which is not shipped")
    kernels = tuple(ZKernel(k.monos, tuple((a, -c) for a, c in k.jets), k.hbar)
                    for k in Z.kernels)
    return ZMap(Z.d, kernels)


def verify_zmap(Z: ZMap, spec: QuadratureSpec | None = None,
                tol: float = 1e-8) -> dict:
    """Check the defining properties of a map on probe entries.

    Zero maps to zero and first order is the identity (structural); the
    kernels act only on the diagonal (insertion with separated supports
    vanishes), commute with translations, and are field independent
    (functional derivative passes through the insertion).
    """
    d = Z.d
    spec = spec or QuadratureSpec()
    if Z.kernels:
        P, Q = Z.kernels[0].monos
        pa = FieldPolynomial.monomial(d, P + ((0,) * d,))
        pb = FieldPolynomial.monomial(d, Q + ((0,) * d,))
    else:
        pa = pb = _phi(d, 2)
    gA, gB = bump((0.2,) * d, 0.8), bump((-0.1,) * d, 0.7)
    Fa, Fb = Field.local(pa, gA), Field.local(pb, gB)
    eta = bump((0.1,) * d, 1.1)
    probe = bump((0.0,) * d, 1.4)
    checks = []

    checks.append({"name": "zero-at-zero",
                   "residual": float(not z_apply(Z, Field(d)).is_zero()),
                   "tol": 0.0})
    checks.append({"name": "first-order-identity",
                   "residual": (z_apply(Z, Fa, 1) - Fa).simplify().max_coeff(),
                   "tol": 0.0})

    far_a = Field.local(pa, bump((-1.6,) * d, 0.4))
    far_b = Field.local(pb, bump((1.6,) * d, 0.4))
    sep = z_pair_insertion(Z, far_a, far_b)
    checks.append({"name": "delta-support",
                   "residual": pairing_residual(sep, [probe], spec),
                   "tol": tol})

    vec = (0.31,) * d
    ins = z_pair_insertion(Z, Fa, Fb)
    moved = z_pair_insertion(Z, Fa.translate(vec), Fb.translate(vec))
    tdiff = (moved - ins.translate(vec)).simplify()
    checks.append({"name": "translation-covariance",
                   "residual": max(tdiff.max_coeff(),
                                   pairing_residual(tdiff, [probe], spec)),
                   "tol": tol})

    lhs = ins.functional_derivative(1).contract_legs([eta])
    rhs = Field(d)
    for poly, g, other_poly, other_g, flip in [(pa, gA, pb, gB, False),
                                               (pb, gB, pa, gA, True)]:
        for a in sorted({x for mono in poly.terms for x in mono}):
            dp = poly.var_derivative(a)
            if dp.is_zero():
                continue
            dent = Field.local(dp, g * eta.derivative(a))
            rest = Field.local(other_poly, other_g)
            rhs = rhs + (z_pair_insertion(Z, rest, dent) if flip
                         else z_pair_insertion(Z, dent, rest))
    fdiff = (lhs - rhs).simplify()
    checks.append({"name": "field-independence",
                   "residual": max(fdiff.max_coeff(),
                                   pairing_residual(fdiff, [probe], spec)),
                   "tol": tol})

    for c in checks:
        c["residual"] = float(c["residual"])
        c["passed"] = bool(c["residual"] <= c["tol"])
    return {"passed": all(c["passed"] for c in checks), "checks": checks}


# -- products composed with a map ---------------------------------------------------


class ComposedProduct(TProduct):
    """A product precomposed with a renormalization map, entrywise.

    The composed generating functional expands, per entry pair, into the
    bare chain plus the chain with that pair replaced by its kernel
    contraction, carrying hbar over i.  Pair kernels cover joint entry
    counts up to three; beyond that double insertions appear and the
    construction refuses.
    """

    def __init__(self, base: TProduct, zmap: ZMap):
        if base.d != zmap.d:
            raise ConfigurationError("map dimension does not match the product")
        super().__init__(base.d, base.m, base.mu, mock=base.mock,
                         policy=base.policy, counterterms=base.counterterms,
                         r_flat=base.r_flat, r_support=base.r_support,
                         spec=base.spec)
        self.zmap = zmap
        self.backend = base.backend + "+rg"

    def insertion_terms(self, fields):
        if not self.zmap.kernels or len(fields) < 2:
            return ()
        if len(fields) > 3:
            raise ConfigurationError(
                "composed products are shipped for n <= 3 entries; higher "
                "orders need double insertions")
        out = []
        for i in range(len(fields)):
            for j in range(i + 1, len(fields)):
                ins = z_pair_insertion(self.zmap, fields[i], fields[j])
                if ins.is_zero():
                    continue
                rest = [f for k, f in enumerate(fields) if k not in (i, j)]
                out.append((ins, rest))
        return out

    def _hbar_ok(self, t: GraphTerm) -> bool:
        if self.zmap.kernels:
            return t.hbar >= len(t.edges)
        return super()._hbar_ok(t)


def _saturation_weight(P, Q, derivs) -> int:
    """Contraction weight with which the saturated pair (P, Q) makes the
    edge-derivative class `derivs`; zero when the class cannot arise."""
    want = tuple(sorted(tuple(int(n) for n in a) for a in derivs))
    if len(P) != len(Q) or len(want) != len(P):
        return 0
    total = 0
    for emap, w in _full_matchings(list(P), list(Q)):
        got = []
        for (a, b), e in emap.items():
            got.extend([tuple(x + y for x, y in zip(a, b))] * e)
        if tuple(sorted(got)) == want:
            total += w
    return total


def shifted_product(T: TProduct, Z: ZMap) -> TProduct:
    """Rebuild the product whose generating functional is the composition.

    Only products with a declared singular kernel class can absorb a pair
    kernel: the delta coefficients turn into extension counterterm shifts
    c_a -> c_a + C_a / (i w), with w the saturated contraction weight of
    the class.  This is the mock-backend form of composing with Z.
    """
    if T.mock is None:
        raise ConfigurationError(
            "counterterm shifts need a product with a singular kernel class")
    shifts = dict(T.counterterms)
    for kern in Z.kernels:
        P, Q = kern.monos
        w = _saturation_weight(P, Q, T.mock.derivs)
        if w == 0:
            raise ConfigurationError(
                "kernel class does not match the product's singular class")
        if kern.hbar != len(T.mock.derivs) - 1:
            raise ConfigurationError(
                "kernel hbar power is inconsistent with the class grading")
        for a, c in kern.jets:
            shifts[a] = shifts.get(a, 0) + c / (1j * w)
    return TProduct(T.d, T.m, T.mu, mock=T.mock, policy=T.policy,
                    counterterms=shifts, r_flat=T.r_flat,
                    r_support=T.r_support, spec=T.spec)


def _infer_pair(T: TProduct, That: TProduct):
    rule = That.mock or T.mock
    if rule is None:
        raise ConfigurationError(
            "provide the saturating entry pair when no kernel class is "
            "declared")
    if any(sum(a) for a in rule.derivs):
        raise ConfigurationError(
            "provide the saturating entry pair for derived kernel classes")
    d = T.d
    mono = ((0,) * d,) * len(rule.derivs)
    return mono, mono


def solve_Z(T: TProduct, That: TProduct, order: int = 2, pair=None,
            probes=None, amax: int = 0, spec: QuadratureSpec | None = None,
            tol: float = 1e-8) -> dict:
    """Recover the map Z composing one product into the other, order by order.

    At first order the products must agree entrywise.  At second order the
    difference of the two-slot products on a saturating entry pair is a pure
    number per probe smearing pair; matching those numbers against the jets
    of the smearing correlation (computed on the same quadrature grid the
    products use) recovers the delta coefficients by least squares, so an
    injected counterterm comes back at rounding error.  Probe pairs enter in
    slot order; odd-derivative jets are reported in that convention.
    """
    if order != 2:
        raise ConfigurationError("the solver is shipped to second order")
    if T.d != That.d:
        raise ConfigurationError("products live in different dimensions")
    d = T.d
    spec = spec or That.spec
    P, Q = _infer_pair(T, That) if pair is None else \
        (tuple(tuple(a) for a in pair[0]), tuple(tuple(a) for a in pair[1]))
    pa = FieldPolynomial.monomial(d, P)
    pb = FieldPolynomial.monomial(d, Q)
    aa = _multi_indices_upto(d, amax)
    if probes is None:
        probes = []
        for i in range(len(aa) + 2):
            c = 0.1 + 0.13 * i
            probes.append((bump((c,) * d, 0.7 + 0.05 * i),
                           bump((-c / 2,) * d, 0.8 - 0.04 * i)
                           .scaled(1.0 + 0.2 * i)))

    g0 = probes[0][0]
    r1 = (That.T([(pa, g0, 1)]) - T.T([(pa, g0, 1)])).simplify().max_coeff()

    def pure_number(g, f):
        diff = (That.T([(pa, g, 1), (pb, f, 1)])
                - T.T([(pa, g, 1), (pb, f, 1)])).simplify()
        num = 0j
        stray = 0.0
        hbars = set()
        for t in diff.terms:
            if t.vertices:
                stray = max(stray, abs(t.coeff))
            else:
                num += t.coeff
                hbars.add(t.hbar)
        return num, stray, hbars

    Dvals, rows, hset = [], [], set()
    cancel = 0.0
    for g, f in probes:
        num, stray, hbars = pure_number(g, f)
        cancel = max(cancel, stray)
        hset |= hbars
        Dvals.append(num)
        # replicate the engine's subtraction jets bit for bit: canonical
        # vertex order, grid on the second smearing's box
        first, second = sorted(
            (g, f), key=lambda u: _vertex_key(Vertex(smearing=u, factors=())))
        py, wy = box_rule(second.box, spec)
        sv = wy * np.asarray(second(py), dtype=complex)
        rows.append([(-1.0) ** sum(a)
                     * complex(np.sum(sv * np.asarray(
                         first.derivative(a)(py), dtype=complex)))
                     for a in aa])
    scale = max([1.0] + [abs(v) for v in Dvals])
    if r1 > tol or cancel > tol * scale:
        raise ConfigurationError(
            "the two products differ by more than a local pair kernel")
    if len(hset) > 1:
        raise ConfigurationError(
            "the product difference mixes hbar gradings")

    M = np.array(rows, dtype=complex)
    D = np.array(Dvals, dtype=complex)
    C = np.linalg.lstsq(M, 1j * D, rcond=None)[0]
    solve_res = float(np.max(np.abs(M @ C - 1j * D))) if len(D) else 0.0
    if solve_res > tol * scale:
        raise ConfigurationError(
            "residual mismatch after solving; the two products are not an "
            "axiom-compliant pair")
    C = [0j if abs(c) <= 1e-12 * max(1.0, float(np.max(np.abs(C)))) else
         complex(c) for c in C]

    gd, fd = bump((-1.5,) * d, 0.4), bump((1.5,) * d, 0.4)
    dnum, _, _ = pure_number(gd, fd)
    vec = (0.37,) * d
    tnum, _, _ = pure_number(probes[0][0].translate(vec),
                             probes[0][1].translate(vec))

    kernels = ()
    if any(c != 0 for c in C):
        e = hset.pop()
        jets = tuple((a, c) for a, c in zip(aa, C) if c != 0)
        kernels = (ZKernel((P, Q), jets, e - 1),)
    report = {
        "first-order": float(r1),
        "cancellation": float(cancel),
        "solve-residual": solve_res,
        "delta-support": float(abs(dnum)),
        "translation": float(abs(tnum - Dvals[0])),
    }
    report["passed"] = all(v <= tol * scale for v in report.values())
    return {"zmap": ZMap(d, kernels), "report": report}


# -- interacting fields ---------------------------------------------------------------


def _slice(F: Field, kappa=None, lam=None, kappa_max=None) -> Field:
    ts = F.terms
    if kappa is not None:
        ts = [t for t in ts if t.kappa == kappa]
    if kappa_max is not None:
        ts = [t for t in ts if t.kappa <= kappa_max]
    if lam is not None:
        ts = [t for t in ts if t.lam == lam]
    return Field(F.d, list(ts))


@dataclass
class InteractingField:
    """Coupling-graded interacting field; the zeroth coefficient is the base."""

    base: Field
    interaction: Field
    korder: int
    field: Field

    def coefficient(self, k: int) -> Field:
        return _slice(self.field, kappa=k).simplify()

    def hbar_floor(self) -> int:
        return min((t.hbar for t in self.field.simplify().terms), default=0)


def bogoliubov(T: TProduct, S, F, korder: int = 2) -> InteractingField:
    """Interacting field of F under S, by the inverse-times-derivative formula.

    The lambda linearization is exact: the derivative series puts the probe
    in one slot per product, so no formal parameter is consumed.  Entries of
    S may carry a lambda degree of their own (the commutator checks use
    that); coupling powers are truncated at `korder` in total.
    """
    Sf = (S.field() if isinstance(S, Interaction) else S).simplify()
    Ff = T.entry(F).simplify()
    if any(t.kappa + t.lam < 1 for t in Sf.terms):
        raise ConfigurationError("interaction entries need coupling degree >= 1")
    lam_cap = max((t.lam for t in Sf.terms), default=0)
    orders = Orders(8 * (korder + lam_cap + 1) + 8, korder, lam_cap)
    nmax = korder + lam_cap + 1
    Sprime = Field(T.d)
    for n in range(1, nmax + 1):
        Tn = T.T([Sf] * (n - 1) + [Ff], orders)
        Sprime = Sprime + Tn.scale(1j ** n / math.factorial(n - 1)) \
                            .shift_degrees(hbar=-n)
    Sm = smatrix(T, Sf, korder, lam_cap=lam_cap) if korder + lam_cap \
        else Field.number(T.d, 1.0)
    inv = star_inverse(Sm, T.star_kernel, orders)
    full = star(inv, Sprime.simplify(), T.star_kernel, orders) \
        .scale(-1j).shift_degrees(hbar=1).simplify()
    return InteractingField(Ff, Sf, korder, full)


def interaction_source(S: Interaction, h: TestFunction) -> Field:
    """The interaction's field derivative smeared with h, factor by factor."""
    out = Field(S.d)
    for k, poly in S.terms:
        gk = S.g
        for _ in range(k - 1):
            gk = gk * S.g
        for a in sorted({x for mono in poly.terms for x in mono}):
            dp = poly.var_derivative(a)
            if dp.is_zero():
                continue
            out = out + lifted_local(dp, gk * h.derivative(a), kappa=k)
    return out.simplify()


# -- interacting property checks --------------------------------------------------------


def _default_interaction(T: TProduct) -> Interaction:
    if T.d == 1:
        return Interaction.single(_phi(1, 4), bump((0.1,), 0.7))
    return Interaction.single(_phi(2, 2), bump((0.0, 0.0), 0.4))


def _check_bogoliubov_identity(T, S, korder, spec, tol, configs):
    h = bump((0.3,) * T.d, 0.5)
    Ff = Field.local(_phi(T.d, 1), h)
    fs = bogoliubov(T, S, Ff, korder)
    r = (fs.coefficient(0) - Ff).simplify().max_coeff()
    return {"name": "bogoliubov-identity", "residual": r, "tol": 0.0,
            "passed": r == 0.0}


def _check_hbar_power_series(T, S, korder, spec, tol, configs):
    h = bump((0.25,) * T.d, 0.5)
    fs = bogoliubov(T, S, Field.local(_phi(T.d, 1), h), korder)
    neg = sum(1 for t in fs.field.terms if t.hbar < 0)
    Sf = S.field() if isinstance(S, Interaction) else S
    sm_floor = min(t.hbar
                   for t in smatrix(T, Sf, max(korder, 1), lam_cap=0).terms)
    bad = neg + (0 if sm_floor < 0 else 1)
    return {"name": "hbar-power-series", "residual": float(bad), "tol": 0.0,
            "passed": bad == 0,
            "detail": {"negative-terms": float(neg),
                       "smatrix-hbar-floor": float(sm_floor)}}


def _check_glz(T, S, korder, spec, tol, configs):
    hF = bump((0.5,) * T.d, 0.5)
    hG = bump((-0.4,) * T.d, 0.45)
    Ff = Field.local(_phi(T.d, 1), hF)
    Gf = Field.local(_phi(T.d, 1), hG)
    Sf = S.field() if isinstance(S, Interaction) else S
    FS = bogoliubov(T, Sf, Ff, korder).field
    GS = bogoliubov(T, Sf, Gf, korder).field
    cap = Orders(64, 2 * korder, 0)
    comm = (star(GS, FS, T.star_kernel, cap)
            - star(FS, GS, T.star_kernel, cap)).simplify()
    lhs = _slice(comm, kappa_max=korder).scale(-1j).shift_degrees(hbar=-1)
    A = bogoliubov(T, (Sf + Gf.shift_degrees(lam=1)).simplify(), Ff, korder)
    B = bogoliubov(T, (Sf + Ff.shift_degrees(lam=1)).simplify(), Gf, korder)
    rhs = (_slice(A.field, lam=1) - _slice(B.field, lam=1)) \
        .shift_degrees(lam=-1)
    r = pairing_residual((lhs - rhs).simplify(), configs, spec)
    return {"name": "glz", "residual": r, "tol": tol, "passed": r < tol}


def _check_interacting_causality(T, S, korder, spec, tol, configs):
    h = bump((0.2,) * T.d, 0.5)
    gG = bump((2.4,) + (0.0,) * (T.d - 1), 0.45)
    if not avoids_past_shadow(gG.box, h.box):
        raise ConfigurationError("perturbation probe geometry is wrong")
    Ff = Field.local(_phi(T.d, 1), h)
    Gf = lifted_local(_phi(T.d, 4 if T.d == 1 else 2), gG, kappa=1)
    Sf = S.field() if isinstance(S, Interaction) else S
    F1 = bogoliubov(T, Sf, Ff, korder).field
    F2 = bogoliubov(T, (Sf + Gf).simplify(), Ff, korder).field
    r = pairing_residual((F1 - F2).simplify(), configs, spec)
    return {"name": "interacting-causality", "residual": r, "tol": tol,
            "passed": r < tol}


def _check_interacting_field_equation(T, S, korder, spec, tol, configs):
    if not isinstance(S, Interaction):
        raise ConfigurationError(
            "the field equation check needs the interaction in split form")
    # the attached kernel line has a kink in its second derivative on the
    # diagonal, so this check buys extra panels for its pairings
    rspec = spec.tighter(2)
    h = bump((0.3,), 0.5)
    Lh = h.derivative((2,)) + h.scaled(T.m ** 2)
    lhs = bogoliubov(T, S, Field.local(_phi(1, 1), Lh), korder).field
    free = Field.local(_phi(1, 1), Lh)
    src = bogoliubov(T, S, interaction_source(S, h), korder).field
    diff = (lhs - free - src).simplify()
    r = pairing_residual(diff, configs, rspec)
    return {"name": "interacting-field-equation", "residual": r, "tol": tol,
            "passed": r < tol}


def _check_spacelike_commutativity(T, S, korder, spec, tol, configs):
    # time-asymmetric centers, so the order-epsilon part of the smoothed
    # commutator does not vanish by symmetry and the ladder earns its keep
    hF = bump((0.15, 2.2), 0.4)
    hG = bump((-0.1, -2.2), 0.4)
    if not spacelike_separated(hF.box, hG.box):
        raise ConfigurationError("commutator probe geometry is wrong")
    Sf = S.field() if isinstance(S, Interaction) else S
    FS = bogoliubov(T, Sf, Field.local(_phi(2, 1), hF), korder).field
    GS = bogoliubov(T, Sf, Field.local(_phi(2, 1), hG), korder).field
    cap = Orders(64, 2 * korder, 0)
    comm = _slice((star(GS, FS, T.star_kernel, cap)
                   - star(FS, GS, T.star_kernel, cap)).simplify(),
                  kappa_max=korder)
    ladder = (0.1, 0.05, 0.025)
    raw = worst = 0.0
    for h in [None, *configs]:
        tables = [field_pairings(comm, h, spec, eps=e) for e in ladder]
        keys = sorted(set().union(*[t.keys() for t in tables]))
        for key in keys:
            vals = [t.get(key, 0j) for t in tables]
            raw = max(raw, abs(vals[0]))
            worst = max(worst, abs(richardson(vals)))
    return {"name": "spacelike-commutativity", "residual": worst, "tol": tol,
            "passed": worst < tol,
            "detail": {"eps-ladder": [float(e) for e in ladder],
                       "unextrapolated": raw}}


def _check_unitarity_transport(T, S, korder, spec, tol, configs):
    h = bump((0.4,) * T.d, 0.5)
    Ff = Field.local(_phi(T.d, 1), h, coeff=0.3 + 0.7j)
    Sf = S.field() if isinstance(S, Interaction) else S
    lhs = bogoliubov(T, Sf, Ff, korder).field.conjugate()
    rhs = bogoliubov(T, Sf.conjugate(), Ff.conjugate(), korder).field
    r = pairing_residual((lhs - rhs).simplify(), configs, spec)
    return {"name": "unitarity-transport", "residual": r, "tol": tol,
            "passed": r < tol}


_D1_INTERACTING = ("bogoliubov-identity", "hbar-power-series", "glz",
                   "interacting-causality", "interacting-field-equation",
                   "unitarity-transport")
_D2_INTERACTING = ("bogoliubov-identity", "hbar-power-series",
                   "spacelike-commutativity")

_INTERACTING_CHECKS = {
    "bogoliubov-identity": _check_bogoliubov_identity,
    "hbar-power-series": _check_hbar_power_series,
    "glz": _check_glz,
    "interacting-causality": _check_interacting_causality,
    "interacting-field-equation": _check_interacting_field_equation,
    "spacelike-commutativity": _check_spacelike_commutativity,
    "unitarity-transport": _check_unitarity_transport,
}


def interacting_property_checks(T: TProduct, S: Interaction | None = None,
                                korder: int = 2, suite="all",
                                spec: QuadratureSpec | None = None,
                                tol: float = 1e-6,
                                sep_tol: float = 1e-4) -> dict:
    """Run the interacting-field properties appropriate to the backend.

    Each check builds its own probes; the d=2 commutator check extrapolates
    its light-cone smoothing to zero and is held to `sep_tol`.
    """
    S = S or _default_interaction(T)
    if spec is None:
        spec = T.spec if T.d == 1 else QuadratureSpec(panels=3, points=6)
    names = (_D1_INTERACTING if T.d == 1 else _D2_INTERACTING) \
        if suite == "all" else tuple(suite)
    configs = _d1_probes() if T.d == 1 else _d2_probes()
    checks = []
    for name in names:
        fn = _INTERACTING_CHECKS.get(name)
        if fn is None:
            raise ConfigurationError(f"unknown check {name!r}")
        use_tol = sep_tol if name == "spacelike-commutativity" else tol
        checks.append(fn(T, S, korder, spec, use_tol, configs))
    for c in checks:
        c["residual"] = float(c["residual"])
        c["passed"] = bool(c["passed"])
        if "detail" in c:
            c["detail"] = {k: (v if isinstance(v, (list, str)) else float(v))
                           for k, v in c["detail"].items()}
    return {"backend": T.backend, "korder": korder,
            "passed": all(c["passed"] for c in checks), "checks": checks}


# -- local algebras --------------------------------------------------------------------


def double_cone(x, y) -> Box:
    """Box hull of the double cone with past apex x and future apex y."""
    x = tuple(float(v) for v in x)
    y = tuple(float(v) for v in y)
    if len(x) != len(y):
        raise ConfigurationError("apex rank mismatch")
    dt = y[0] - x[0]
    if dt <= 0:
        raise ConfigurationError("the future apex must lie later")
    if len(x) == 1:
        return Box((x[0],), (y[0],))
    if abs(y[1] - x[1]) >= dt:
        raise ConfigurationError("the apexes are not timelike separated")
    mid = (x[1] + y[1]) / 2
    return Box((x[0], mid - dt / 2), (y[0], mid + dt / 2))


def _in_past_shadow(pt, O: Box) -> bool:
    if len(pt) == 1:
        return pt[0] <= O.hi[0]
    dist = _interval_distance(pt[1], pt[1], O.lo[1], O.hi[1])
    return pt[0] <= O.hi[0] - dist


def _grid(box: Box, n: int = 41):
    axes = [np.linspace(lo, hi, n) for lo, hi in zip(box.lo, box.hi)]
    mesh = np.meshgrid(*axes, indexing="ij")
    return np.stack([m.ravel() for m in mesh], axis=-1)


def local_algebra_check(T: TProduct, O: Box, g1: TestFunction,
                        g2: TestFunction, F, korder: int = 2,
                        poly: FieldPolynomial | None = None,
                        spec: QuadratureSpec | None = None, tol: float = 1e-6,
                        configs=None) -> dict:
    """Independence of the interacting field from the cutoff outside the
    causal past of the region.

    Preconditions (the causal special case): the probe is localized in O,
    both cutoffs equal one on O, and they agree on the past shadow of O.
    A violation is reported as out-of-case rather than checked, since the
    general statement needs an intertwining unitary that is not shipped.
    """
    d = T.d
    poly = poly if poly is not None else _phi(d, 4 if d == 1 else 2)
    Ff = T.entry(F)
    fbox = Ff.support()
    contained = all(O.lo[i] <= fbox.lo[i] and fbox.hi[i] <= O.hi[i]
                    for i in range(d))
    if not contained:
        return {"skipped": True, "case": "out-of-case",
                "reason": "the probe field is not localized in the region"}
    pts = _grid(g1.box.hull(g2.box))
    inside = np.array([O.contains(p) for p in pts])
    shadow = np.array([_in_past_shadow(p, O) for p in pts])
    v1 = np.asarray(g1(pts), dtype=complex)
    v2 = np.asarray(g2(pts), dtype=complex)
    plateau_dev = float(max(np.max(np.abs(v1[inside] - 1.0), initial=0.0),
                            np.max(np.abs(v2[inside] - 1.0), initial=0.0)))
    if plateau_dev > 1e-10:
        return {"skipped": True, "case": "out-of-case",
                "reason": "a cutoff is not one on the region",
                "deviation": plateau_dev}
    shadow_dev = float(np.max(np.abs(v1[shadow] - v2[shadow]), initial=0.0))
    if shadow_dev > 1e-10:
        return {"skipped": True, "case": "out-of-case",
                "reason": "the cutoffs differ on the past shadow of the "
                          "region", "deviation": shadow_dev}
    F1 = bogoliubov(T, Interaction.single(poly, g1), Ff, korder).field
    F2 = bogoliubov(T, Interaction.single(poly, g2), Ff, korder).field
    if configs is None:
        configs = _d1_probes() if d == 1 else _d2_probes()
    r = pairing_residual((F1 - F2).simplify(), configs, spec or T.spec)
    return {"skipped": False, "residual": float(r), "tol": tol,
            "passed": bool(r < tol),
            "region": [list(O.lo), list(O.hi)]}
