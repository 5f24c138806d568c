"""Balanced decomposition of local field polynomials.

Every polynomial in the field and its derivatives splits uniquely as
A = sum_a d^a(B_a) where each B_a is balanced.  Balanced monomials are
picked grade by grade: within the grade of fixed field degree J and total
derivative weight W, the image of the total derivatives from weight W-1 is
eliminated exactly over the rationals, and the non-pivot monomials (in
lexicographic column order) form the balanced complement.
"""

from __future__ import annotations

import itertools
from functools import lru_cache

import sympy

from .errors import ConfigurationError
from .fields import FieldPolynomial, Monomial


def _weight(mono: Monomial) -> int:
    return sum(sum(a) for a in mono)


def multi_indices(d: int, weight: int):
    """All length-d multi-indices with |a| = weight, in sorted order."""
    if d == 1:
        return [(weight,)]
    out = []
    for head in range(weight + 1):
        for tail in multi_indices(d - 1, weight - head):
            out.append((head,) + tail)
    return sorted(out)


@lru_cache(maxsize=None)
def grade_monomials(d: int, degree: int, weight: int):
    """Monomials with `degree` factors and total derivative weight `weight`."""
    if degree == 0:
        return ((),) if weight == 0 else ()
    singles = [a for w in range(weight + 1) for a in multi_indices(d, w)]
    out = set()
    for combo in itertools.combinations_with_replacement(singles, degree):
        if sum(sum(a) for a in combo) == weight:
            out.add(tuple(sorted(combo)))
    return tuple(sorted(out))


def _as_vector(poly: FieldPolynomial, basis):
    index = {m: i for i, m in enumerate(basis)}
    vec = [0] * len(basis)
    for mono, c in poly.terms.items():
        vec[index[mono]] = c
    return vec


@lru_cache(maxsize=None)
def balanced_monomials(d: int, degree: int, weight: int):
    """The balanced complement in the given grade."""
    basis = grade_monomials(d, degree, weight)
    if not basis:
        return ()
    rows = []
    for mono in grade_monomials(d, degree, weight - 1) if weight else ():
        poly = FieldPolynomial(d, {mono: 1})
        for mu in range(d):
            rows.append(_as_vector(poly.spacetime_derivative(mu), basis))
    if not rows:
        return basis
    _, pivots = sympy.Matrix(rows).rref()
    return tuple(m for i, m in enumerate(basis) if i not in set(pivots))


def is_balanced(poly: FieldPolynomial) -> bool:
    for mono in poly.terms:
        if mono not in balanced_monomials(poly.d, len(mono), _weight(mono)):
            return False
    return True


def _solve_grade(d: int, degree: int, weight: int, rhs_poly: FieldPolynomial):
    """Find balanced B_a with sum_a d^a(B_a) equal to rhs in this grade."""
    basis = grade_monomials(d, degree, weight)
    columns, labels = [], []
    for k in range(weight + 1):
        for a in multi_indices(d, k):
            for b in balanced_monomials(d, degree, weight - k):
                poly = FieldPolynomial(d, {b: 1}).multi_derivative(a)
                columns.append(_as_vector(poly, basis))
            labels.extend((a, b) for b in balanced_monomials(d, degree,
                                                             weight - k))
    if len(columns) != len(basis):
        raise ConfigurationError("balanced complement miscounted in grade "
                                 f"(degree={degree}, weight={weight})")
    M = sympy.Matrix(columns).T
    rhs = _as_vector(rhs_poly, basis)
    re = M.LUsolve(sympy.Matrix([sympy.nsimplify(complex(c).real, rational=True)
                                 for c in rhs]))
    im = M.LUsolve(sympy.Matrix([sympy.nsimplify(complex(c).imag, rational=True)
                                 for c in rhs]))
    out = {}
    for (a, b), cr, ci in zip(labels, re, im):
        c = cr if ci == 0 else cr + sympy.I * ci
        if c != 0:
            block = out.setdefault(a, {})
            block[b] = block.get(b, 0) + c
    return out


def balanced_decompose(poly: FieldPolynomial) -> dict:
    """Split A into {a: B_a} with A = sum_a d^a(B_a), each B_a balanced."""
    grades: dict = {}
    for mono, c in poly.terms.items():
        key = (len(mono), _weight(mono))
        grades.setdefault(key, {})[mono] = c
    result: dict = {}
    for (degree, weight), terms in sorted(grades.items()):
        part = _solve_grade(poly.d, degree, weight,
                            FieldPolynomial(poly.d, terms))
        for a, block in part.items():
            tgt = result.setdefault(a, {})
            for b, c in block.items():
                tgt[b] = tgt.get(b, 0) + c
    return {a: FieldPolynomial(poly.d, block)
            for a, block in sorted(result.items())}


def reassemble(parts: dict, d: int) -> FieldPolynomial:
    total = FieldPolynomial(d)
    for a, poly in parts.items():
        total = total + poly.multi_derivative(a)
    return total
