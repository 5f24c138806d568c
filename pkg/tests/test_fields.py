import json

import numpy as np
import pytest
from scipy import integrate

from egret.errors import ConfigurationError
from egret.fields import (Edge, Field, FieldPolynomial, GraphTerm, Vertex,
                          evaluate, field_pairings, mass_dimension, omega0)
from egret.functions import bump, from_expr
from egret.propagators import Kernel, reflect_kernel
from egret.quadrature import QuadratureSpec

SPEC = QuadratureSpec(panels=12, points=12)


def poly_phi2(d=1):
    return FieldPolynomial.phi_power(d, 2)


def test_polynomial_leibniz_and_var_derivative():
    # d/dx (phi^2) = 2 phi phi'
    p = FieldPolynomial.phi_power(1, 2)
    dp = p.spacetime_derivative(0)
    assert dp.terms == {((0,), (1,)): 2}
    # d/d(phi') of phi (phi')^2 = 2 phi phi'
    q = FieldPolynomial.monomial(1, [(0,), (1,), (1,)])
    vq = q.var_derivative((1,))
    assert vq.terms == {((0,), (1,)): 2}
    # second var derivative empties out
    assert q.var_derivative((2,)).is_zero()


def test_polynomial_product_collects_monomials():
    p = FieldPolynomial(1, {((0,),): 2, ((1,),): 1})
    sq = p * p
    assert sq.terms[((0,), (0,))] == 4
    assert sq.terms[((0,), (1,))] == 4
    assert sq.terms[((1,), (1,))] == 1


def test_mass_dimension_fractional():
    from fractions import Fraction
    assert mass_dimension(((0,), (0,)), 1) == Fraction(-1)
    assert mass_dimension(((0, 0), (0, 0)), 2) == 0
    assert mass_dimension(((1,), (0,)), 1) == 0
    assert mass_dimension(((1,),), 1) == Fraction(1, 2)
    assert mass_dimension(((0, 1), (1, 0)), 2) == 2


def test_local_field_matches_direct_quadrature():
    g = bump(center=(0.3,), radius=0.8)
    h = from_expr(1, "cos(2*y0)")
    F = Field.local(poly_phi2(), g)
    val = evaluate(F, h, SPEC, at={})
    ref, _ = integrate.quad(
        lambda x: float(g(np.array([[x]])).real) * np.cos(2 * x) ** 2,
        -0.5, 1.1, limit=200)
    assert abs(val - ref) < 1e-8


def test_two_vertex_edge_term_matches_nested_quadrature():
    m = 1.0
    f = bump(center=(-0.6,), radius=0.5)
    g = bump(center=(0.9,), radius=0.5)
    kern = Kernel("wightman", 1, m)
    term = GraphTerm(1.0, (Vertex(f), Vertex(g)), (Edge(0, 1, kern),))
    F = Field(1, [term])
    val = omega0(F, SPEC)[(0, 0, 0)]

    def wight(t):
        return np.exp(-1j * m * t) / (2 * m)

    def inner(x):
        re, _ = integrate.quad(
            lambda y: (float(f(np.array([[x]])).real)
                       * float(g(np.array([[y]])).real)
                       * wight(x - y).real), 0.4, 1.4, limit=200)
        im, _ = integrate.quad(
            lambda y: (float(f(np.array([[x]])).real)
                       * float(g(np.array([[y]])).real)
                       * wight(x - y).imag), 0.4, 1.4, limit=200)
        return re, im

    re, _ = integrate.quad(lambda x: inner(x)[0], -1.1, -0.1, limit=200)
    im, _ = integrate.quad(lambda x: inner(x)[1], -1.1, -0.1, limit=200)
    assert abs(val - (re + 1j * im)) < 1e-8


def test_point_vertex_evaluation():
    h = from_expr(1, "exp(y0)")
    v = Vertex(smearing=None, point=(0.25,), factors=[(0,), (0,)])
    F = Field(1, [GraphTerm(3.0, (v,), ())])
    val = evaluate(F, h, SPEC, at={})
    assert abs(val - 3.0 * np.exp(0.5)) < 1e-12


def test_classical_product_is_pointwise():
    g1 = bump(center=(0.0,), radius=0.7)
    g2 = bump(center=(0.4,), radius=0.6)
    h = from_expr(1, "sin(y0) + 1")
    F = Field.local(poly_phi2(), g1)
    G = Field.local(FieldPolynomial.phi_power(1, 1), g2, hbar=0, kappa=1)
    FG = F * G
    a = evaluate(F, h, SPEC, at={})
    b = evaluate(G, h, SPEC, at={})
    prod = field_pairings(FG, h, SPEC)
    assert set(prod) == {(0, 1, 0)}
    assert abs(prod[(0, 1, 0)] - a * b) < 1e-10 * max(1, abs(a * b))


def test_functional_derivative_matches_finite_difference():
    g = bump(center=(0.1,), radius=0.9)
    poly = FieldPolynomial(1, {((0,), (0,), (0,)): 1.0, ((0,), (1,)): 0.5})
    F = Field.local(poly, g)
    h = from_expr(1, "cos(y0)")
    eta = from_expr(1, "exp(-y0**2)")
    dF = F.functional_derivative().contract_legs([eta])
    lhs = evaluate(dF, h, SPEC, at={})

    def val(t):
        ht = from_expr(1, f"cos(y0) + {t}*exp(-y0**2)")
        return evaluate(F, ht, SPEC, at={})

    s = 1e-4
    fd = (val(s) - val(-s)) / (2 * s)
    assert abs(lhs - fd) < 1e-7


def test_second_functional_derivative_symmetry():
    g = bump(center=(0.0,), radius=0.8)
    F = Field.local(FieldPolynomial.phi_power(1, 3), g)
    h = from_expr(1, "sin(y0)")
    e1 = from_expr(1, "exp(-2*y0**2)")
    e2 = from_expr(1, "cos(3*y0)")
    d2 = F.functional_derivative(order=2)
    v12 = evaluate(d2.contract_legs([e1, e2]), h, SPEC, at={})
    v21 = evaluate(d2.contract_legs([e2, e1]), h, SPEC, at={})
    assert abs(v12 - v21) < 1e-10 * max(1, abs(v12))
    # 6 * integral of g h eta1 eta2
    direct = evaluate(
        Field.local(FieldPolynomial.phi_power(1, 1),
                    (g * e1) * e2).scale(6.0), h, SPEC, at={})
    assert abs(v12 - direct) < 1e-10 * max(1, abs(direct))


def test_open_legs_refuse_evaluation():
    g = bump(center=(0.0,), radius=0.5)
    F = Field.local(poly_phi2(), g).functional_derivative()
    with pytest.raises(ConfigurationError):
        omega0(F, SPEC)


def test_simplify_merges_isomorphic_terms():
    f = bump(center=(-0.5,), radius=0.4)
    g = bump(center=(0.5,), radius=0.4)
    kern = Kernel("wightman", 1, 1.0)
    refl, sigma = reflect_kernel(kern)  # W(-z) = sigma * refl(z)
    t1 = GraphTerm(1.0, (Vertex(f), Vertex(g)), (Edge(0, 1, kern),))
    # the same object stored with swapped vertices and the reflected kernel
    t2 = GraphTerm(2.0 * sigma, (Vertex(g), Vertex(f)), (Edge(0, 1, refl),))
    F = Field(1, [t1, t2]).simplify()
    assert len(F.terms) == 1
    assert abs(F.terms[0].coeff - 3.0) < 1e-14
    # and cancellation drops the term entirely
    G = Field(1, [t1, t2.scaled(-0.5)]).simplify()
    assert not G.terms


def test_parity_translation_conjugation():
    g = bump(center=(0.2,), radius=0.6)
    F = Field.local(FieldPolynomial.phi_power(1, 3), g, coeff=1 + 2j)
    h = from_expr(1, "sin(y0) + y0**2/4")

    flip = evaluate(F.parity(), h, SPEC, at={})
    hneg = from_expr(1, "-(sin(y0) + y0**2/4)")
    assert abs(flip - evaluate(F, hneg, SPEC, at={})) < 1e-10

    shifted = evaluate(F.translate((0.3,)), h, SPEC, at={})
    hshift = from_expr(1, "sin(y0 + 0.3) + (y0 + 0.3)**2/4")
    assert abs(shifted - evaluate(F, hshift, SPEC, at={})) < 1e-9

    conj = evaluate(F.conjugate(), h, SPEC, at={})
    assert abs(conj - np.conj(evaluate(F, h, SPEC, at={}))) < 1e-10


def test_support_box():
    g1 = bump(center=(0.0,), radius=0.5)
    g2 = bump(center=(3.0,), radius=0.5)
    F = Field.local(poly_phi2(), g1) * Field.local(poly_phi2(), g2)
    box = F.support()
    assert box.lo[0] == pytest.approx(-0.5)
    assert box.hi[0] == pytest.approx(3.5)
    # numbers and factorless vertices do not contribute support
    assert Field.number(1, 4.0).support().is_empty()


def test_omega0_drops_factored_vertices():
    g = bump(center=(0.0,), radius=0.5)
    F = Field.local(poly_phi2(), g) + Field.number(1, 2.5)
    vals = omega0(F, SPEC)
    assert vals == {(0, 0, 0): 2.5}


def test_json_round_trip_preserves_values():
    f = bump(center=(-0.4,), radius=0.4)
    g = bump(center=(0.7,), radius=0.4)
    kern = Kernel("feynman", 1, 1.0)
    term = GraphTerm(0.5 - 1.5j, (Vertex(f, factors=[(0,)]), Vertex(g)),
                     (Edge(0, 1, kern),), hbar=1, kappa=2)
    F = Field(1, [term])
    blob = json.dumps(F.to_dict())
    G = Field.from_dict(json.loads(blob))
    h = from_expr(1, "cos(y0)")
    va = field_pairings(F, h, SPEC)
    vb = field_pairings(G, h, SPEC)
    assert set(va) == set(vb) == {(1, 2, 0)}
    assert abs(va[(1, 2, 0)] - vb[(1, 2, 0)]) < 1e-14


def test_d2_local_field_value():
    g = bump(center=(0.0, 0.0), radius=0.8)
    h = from_expr(2, "cos(y0) * exp(-y1**2)")
    F = Field.local(FieldPolynomial.phi_power(2, 2), g)
    val = evaluate(F, h, QuadratureSpec(panels=6, points=10), at={})

    def integrand(x, t):
        return (float(g(np.array([[t, x]]))[0].real)
                * (np.cos(t) * np.exp(-x ** 2)) ** 2)

    ref, _ = integrate.dblquad(integrand, -0.9, 0.9,
                               lambda t: -0.9, lambda t: 0.9, epsabs=1e-10)
    assert abs(val - ref) < 1e-7
