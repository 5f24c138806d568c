"""Deformation quantization product on off-shell functionals.

F star G contracts field factors of F against field factors of G through a
fixed two-point kernel H, one power of hbar per contraction:

    F star G = sum_n (hbar^n / n!) < H^(x n), d^n F  (x)  d^n G >

On graph terms the sum is finite: contraction patterns are multisets of
factor pairings, and each pattern enters with the falling-factorial count
of ways to realize it.  The bilinear single-contraction core is shared with
the classical Poisson bracket, which uses the commutator kernel and no hbar.
"""

from __future__ import annotations

import math
from dataclasses import replace

from .errors import ConfigurationError
from .fields import Edge, Field, GraphTerm
from .propagators import Kernel
from .series import Orders

# -- contraction pattern enumeration -------------------------------------------


def _factor_slots(term: GraphTerm):
    """Multiplicities of (vertex index, multi-index) factor slots."""
    slots = {}
    for vi, v in enumerate(term.vertices):
        if v.legs:
            raise ConfigurationError("star product needs closed fields")
        for a in v.factors:
            slots[(vi, a)] = slots.get((vi, a), 0) + 1
    return slots


def _patterns(left_slots, right_slots, max_edges):
    """Yield {class: count} maps; a class is ((vi, a), (wj, b))."""
    classes = [(ls, rs) for ls in left_slots for rs in right_slots]

    def rec(idx, left_cap, right_cap, budget, current):
        yield dict(current)
        if budget == 0 or idx >= len(classes):
            return
        for k in range(idx, len(classes)):
            ls, rs = classes[k]
            if left_cap[ls] == 0 or right_cap[rs] == 0:
                continue
            left_cap[ls] -= 1
            right_cap[rs] -= 1
            current[classes[k]] = current.get(classes[k], 0) + 1
            yield from rec(k, left_cap, right_cap, budget - 1, current)
            left_cap[ls] += 1
            right_cap[rs] += 1
            current[classes[k]] -= 1
            if not current[classes[k]]:
                del current[classes[k]]

    yield from rec(0, dict(left_slots), dict(right_slots),
                   max_edges, {})


def _falling(m: int, r: int) -> int:
    return math.prod(range(m - r + 1, m + 1))


def _pattern_weight(pattern, left_slots, right_slots) -> int:
    used_l, used_r = {}, {}
    for (ls, rs), e in pattern.items():
        used_l[ls] = used_l.get(ls, 0) + e
        used_r[rs] = used_r.get(rs, 0) + e
    w = 1
    for ls, r in used_l.items():
        w *= _falling(left_slots[ls], r)
    for rs, s in used_r.items():
        w *= _falling(right_slots[rs], s)
    for e in pattern.values():
        w //= math.factorial(e)
    return w


def _remove_factors(term: GraphTerm, used) -> tuple:
    verts = list(term.vertices)
    for (vi, a), r in used.items():
        factors = list(verts[vi].factors)
        for _ in range(r):
            factors.remove(a)
        verts[vi] = replace(verts[vi], factors=tuple(factors))
    return tuple(verts)


def _contract_pair(s: GraphTerm, t: GraphTerm, kernel: Kernel,
                   hbar_per_edge: int, min_edges: int, max_edges,
                   edge_scale=1.0):
    """All contractions of term s against term t through `kernel`."""
    left = _factor_slots(s)
    right = _factor_slots(t)
    cap = min(sum(left.values()), sum(right.values()))
    if max_edges is not None:
        cap = min(cap, max_edges)
    off = len(s.vertices)
    out = []
    for pattern in _patterns(left, right, cap):
        n = sum(pattern.values())
        if n < min_edges:
            continue
        used_l, used_r = {}, {}
        sign = 1.0
        edges = list(s.edges) + [Edge(e.i + off, e.j + off, e.kernel)
                                 for e in t.edges]
        for ((vi, a), (wj, b)), e in sorted(pattern.items()):
            used_l[(vi, a)] = used_l.get((vi, a), 0) + e
            used_r[(wj, b)] = used_r.get((wj, b), 0) + e
            sign *= (-1.0) ** (sum(b) * e)
            kern = replace(kernel,
                           deriv=tuple(x + y for x, y in zip(a, b)))
            edges.extend([Edge(vi, wj + off, kern)] * e)
        weight = _pattern_weight(pattern, left, right)
        verts = _remove_factors(s, used_l) + _remove_factors(t, used_r)
        out.append(GraphTerm(s.coeff * t.coeff * weight * sign
                             * edge_scale ** n,
                             verts, tuple(edges),
                             s.hbar + t.hbar + hbar_per_edge * n,
                             s.kappa + t.kappa, s.lam + t.lam))
    return out


def star(F: Field, G: Field, kernel: Kernel,
         orders: Orders | None = None) -> Field:
    """The star product of two fields through the two-point kernel."""
    if F.d != G.d or kernel.d != F.d:
        raise ConfigurationError("dimension mismatch in star product")
    if kernel.deriv != tuple([0] * kernel.d) or kernel.conj:
        raise ConfigurationError("pass the base two-point kernel")
    out = []
    for s in F.terms:
        for t in G.terms:
            if orders is not None:
                if (s.kappa + t.kappa > orders.kappa
                        or s.lam + t.lam > orders.lam):
                    continue
                cap = orders.hbar - s.hbar - t.hbar
                if cap < 0:
                    continue
            else:
                cap = None
            out.extend(_contract_pair(s, t, kernel, 1, 0, cap))
    return Field(F.d, out).simplify()


def star_commutator(F: Field, G: Field, kernel: Kernel,
                    orders: Orders | None = None) -> Field:
    return star(F, G, kernel, orders) - star(G, F, kernel, orders)


def poisson_bracket(F: Field, G: Field, m: float = 1.0, d: int = 1,
                    mu: float = 1.0) -> Field:
    """Peierls bracket: one commutator-kernel contraction, no hbar."""
    kernel = Kernel("commutator", d, m, mu)
    out = []
    for s in F.terms:
        for t in G.terms:
            out.extend(_contract_pair(s, t, kernel, 0, 1, 1))
    return Field(F.d, out).simplify()
