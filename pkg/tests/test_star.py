import numpy as np
import pytest
from scipy import integrate

from egret.errors import ConfigurationError, UnsupportedKernelError
from egret.fields import (Edge, Field, FieldPolynomial, GraphTerm, Vertex,
                          omega0, pairing_residual)
from egret.functions import bump, from_expr
from egret.propagators import Kernel
from egret.quadrature import QuadratureSpec
from egret.series import Orders
from egret.star import poisson_bracket, star, star_commutator

SPEC = QuadratureSpec(panels=12, points=12)
M = 1.0
W1 = Kernel("wightman", 1, M)


def phi(g, n=1, d=1):
    return Field.local(FieldPolynomial.phi_power(d, n), g)


def test_linear_star_linear_matches_quadrature_oracle():
    f = bump(center=(-0.7,), radius=0.5)
    g = bump(center=(0.8,), radius=0.5)
    S = star(phi(f), phi(g), W1)
    vals = omega0(S, SPEC)
    assert set(vals) == {(0, 0, 0), (1, 0, 0)}
    assert vals[(0, 0, 0)] == 0

    def fr(x):
        return float(f(np.array([[x]]))[0].real)

    def gr(y):
        return float(g(np.array([[y]]))[0].real)

    def kern(x, y, part):
        z = np.exp(-1j * M * (x - y)) / (2 * M)
        return fr(x) * gr(y) * (z.real if part == "re" else z.imag)

    re, _ = integrate.dblquad(lambda y, x: kern(x, y, "re"),
                              -1.2, -0.2, 0.3, 1.3, epsabs=1e-10)
    im, _ = integrate.dblquad(lambda y, x: kern(x, y, "im"),
                              -1.2, -0.2, 0.3, 1.3, epsabs=1e-10)
    assert abs(vals[(1, 0, 0)] - (re + 1j * im)) < 1e-8


def test_quadratic_star_quadratic_contraction_weights():
    f = bump(center=(-0.6,), radius=0.4)
    g = bump(center=(0.6,), radius=0.4)
    S = star(phi(f, 2), phi(g, 2), W1)
    vf = Vertex(f, factors=[(0,), (0,)])
    vg = Vertex(g, factors=[(0,), (0,)])
    v1f = Vertex(f, factors=[(0,)])
    v1g = Vertex(g, factors=[(0,)])
    v0f = Vertex(f)
    v0g = Vertex(g)
    expected = Field(1, [
        GraphTerm(1.0, (vf, vg), ()),
        GraphTerm(4.0, (v1f, v1g), (Edge(0, 1, W1),), hbar=1),
        GraphTerm(2.0, (v0f, v0g), (Edge(0, 1, W1), Edge(0, 1, W1)), hbar=2),
    ])
    diff = S - expected
    assert diff.is_zero(1e-12 * expected.max_coeff())


def test_truncation_caps_contractions():
    f = bump(center=(-0.6,), radius=0.4)
    g = bump(center=(0.6,), radius=0.4)
    S = star(phi(f, 2), phi(g, 2), W1, orders=Orders(hbar=1, kappa=2))
    assert {t.hbar for t in S.terms} == {0, 1}


def test_unit_is_neutral():
    g = bump(center=(0.0,), radius=0.6)
    F = phi(g, 3)
    one = Field.number(1, 1.0)
    assert (star(one, F, W1) - F).is_zero(1e-14)
    assert (star(F, one, W1) - F).is_zero(1e-14)


def test_associativity_structural():
    f = bump(center=(-0.9,), radius=0.4)
    g = bump(center=(0.0,), radius=0.4)
    k = bump(center=(0.9,), radius=0.4)
    A = phi(f, 2)
    B = Field.local(FieldPolynomial(1, {((0,), (1,)): 1.0}), g)
    C = phi(k, 2)
    left = star(star(A, B, W1), C, W1)
    right = star(A, star(B, C, W1), W1)
    diff = left - right
    assert diff.is_zero(1e-12 * left.max_coeff())


def test_conjugation_antihomomorphism():
    f = bump(center=(-0.5,), radius=0.4)
    g = bump(center=(0.5,), radius=0.4)
    F = phi(f, 2).scale(0.5 + 2j)
    G = phi(g, 2)
    left = star(F, G, W1).conjugate()
    right = star(G.conjugate(), F.conjugate(), W1)
    assert (left - right).is_zero(1e-12 * left.max_coeff())


def test_commutator_linear_fields_is_i_hbar_poisson():
    f = bump(center=(-0.4,), radius=0.35)
    g = bump(center=(0.4,), radius=0.35)
    comm = star_commutator(phi(f), phi(g), W1)
    pb = poisson_bracket(phi(f), phi(g), m=M, d=1)
    diff = comm - pb.scale(1j).shift_degrees(hbar=1)
    h = from_expr(1, "cos(y0)")
    assert pairing_residual(diff, [h], SPEC) < 1e-10


def test_poisson_antisymmetry_structural():
    f = bump(center=(-0.4,), radius=0.35)
    g = bump(center=(0.4,), radius=0.35)
    F, G = phi(f, 2), phi(g, 3)
    s = poisson_bracket(F, G, m=M) + poisson_bracket(G, F, m=M)
    assert s.is_zero(1e-12 * max(1.0, poisson_bracket(F, G, m=M).max_coeff()))


def test_poisson_leibniz_structural():
    f = bump(center=(-0.8,), radius=0.3)
    g = bump(center=(0.0,), radius=0.3)
    k = bump(center=(0.8,), radius=0.3)
    F, G, K = phi(f, 2), phi(g), phi(k, 2)
    lhs = poisson_bracket(F, G * K, m=M)
    rhs = poisson_bracket(F, G, m=M) * K + G * poisson_bracket(F, K, m=M)
    assert (lhs - rhs).is_zero(1e-12 * lhs.max_coeff())


def test_poisson_jacobi_structural():
    f = bump(center=(-0.8,), radius=0.3)
    g = bump(center=(0.0,), radius=0.3)
    k = bump(center=(0.8,), radius=0.3)
    F, G, K = phi(f, 2), phi(g, 2), phi(k, 2)
    total = (poisson_bracket(F, poisson_bracket(G, K, m=M), m=M)
             + poisson_bracket(G, poisson_bracket(K, F, m=M), m=M)
             + poisson_bracket(K, poisson_bracket(F, G, m=M), m=M))
    scale = poisson_bracket(F, poisson_bracket(G, K, m=M), m=M).max_coeff()
    assert total.is_zero(1e-12 * max(1.0, scale))


def test_star_support_and_degree_bookkeeping():
    f = bump(center=(-1.0,), radius=0.3)
    g = bump(center=(1.0,), radius=0.3)
    F = phi(f, 2).shift_degrees(kappa=1)
    G = phi(g, 2).shift_degrees(kappa=1)
    S = star(F, G, W1)
    box = S.support()
    assert box.lo[0] >= -1.35 and box.hi[0] <= 1.35
    assert {t.kappa for t in S.terms} == {2}
    assert sorted({t.hbar for t in S.terms}) == [0, 1, 2]


def test_d2_star_derivative_factors_rejected():
    f = bump(center=(0.0, 0.0), radius=0.4)
    g = bump(center=(0.0, 2.0), radius=0.4)
    H2 = Kernel("hadamard", 2, 0.0)
    F = Field.local(FieldPolynomial(2, {((0, 1),): 1.0}), f)
    G = Field.local(FieldPolynomial.phi_power(2, 1), g)
    with pytest.raises(UnsupportedKernelError):
        star(F, G, H2)
    # plain factors are fine
    S = star(phi(f, 1, d=2), phi(g, 1, d=2), H2)
    assert sorted({t.hbar for t in S.terms}) == [0, 1]


def test_star_requires_base_kernel():
    f = bump(center=(0.0,), radius=0.4)
    with pytest.raises(ConfigurationError):
        star(phi(f), phi(f), Kernel("wightman", 1, M, deriv=(1,)))
