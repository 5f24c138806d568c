import json
import math

import numpy as np
import pytest
import sympy as sp
from scipy import integrate

from egret.errors import (ConfigurationError, NotInvertibleError,
                          UnsupportedKernelError,
                          UnresolvedRenormalizationError)
from egret.extension import ExtensionResult
from egret.distributions import DistributionOffOrigin
from egret.fields import (Field, FieldPolynomial, field_pairings, omega0,
                          pairing_residual)
from egret.functions import bump, jet_bump
from egret.propagators import Kernel
from egret.quadrature import QuadratureSpec
from egret.series import Orders
from egret.star import star
from egret.tproduct import (Interaction, MockKernelRule,
                            SymmetrizedStarProduct, TProduct, awi_lift,
                            causal_wick_expand, check_axioms,
                            correlation_pairing, field_series, lifted_local,
                            smatrix, star_inverse, t_vev, _check_causality,
                            _check_field_independence, _check_symmetry,
                            _d1_probes)

SPEC = QuadratureSpec()
M = 1.0


def phi(n, d=1):
    return FieldPolynomial.phi_power(d, n)


def fvals(g, x):
    return np.asarray(g(np.asarray(x, dtype=float)))


# -- contraction weights -----------------------------------------------------------


def falling(m, e):
    return math.prod(range(m - e + 1, m + 1))


def test_t2_weights_match_falling_factorial_oracle():
    # independent count of the contraction patterns between phi^m and phi^n
    T = TProduct(1, M)
    g, f = bump((0.4,), 0.5), bump((-0.3,), 0.5)
    for m, n in [(2, 2), (3, 3), (4, 3)]:
        F = T.T([(phi(m), g), (phi(n), f)])
        got = {}
        for t in F.terms:
            got[t.hbar] = got.get(t.hbar, 0) + t.coeff
        for e in range(min(m, n) + 1):
            expect = falling(m, e) * falling(n, e) / math.factorial(e)
            assert abs(got[e] - expect) < 1e-12, (m, n, e)


def test_t2_vacuum_matches_scipy_oracle():
    T = TProduct(1, M)
    g, f = bump((0.4,), 0.4), bump((-0.3,), 0.4)
    vals = omega0(T.T([(phi(2), g), (phi(2), f)]), SPEC)
    # only the fully contracted part survives at phi = 0
    assert abs(vals.get((0, 0, 0), 0)) == 0
    assert abs(vals.get((1, 0, 0), 0)) == 0

    def gr(x):
        return float(fvals(g, [x])[0].real)

    def fr(y):
        return float(fvals(f, [y])[0].real)

    def integrand(y, x, part):
        z = 2 * (np.exp(-1j * M * abs(x - y)) / (2 * M)) ** 2 * gr(x) * fr(y)
        return z.real if part == "re" else z.imag

    re, _ = integrate.dblquad(lambda y, x: integrand(y, x, "re"),
                              0.0, 0.8, -0.7, 0.1, epsabs=1e-11)
    im, _ = integrate.dblquad(lambda y, x: integrand(y, x, "im"),
                              0.0, 0.8, -0.7, 0.1, epsabs=1e-11)
    assert abs(vals[(2, 0, 0)] - (re + 1j * im)) < 1e-8


def test_symmetry_is_exact_at_n3():
    T = TProduct(1, M)
    ents = [(phi(3), bump((-0.3,), 0.5)), (phi(2), bump((0.4,), 0.6)),
            (phi(1), bump((0.0,), 0.4))]
    base = T.T(ents)
    assert (base - T.T(ents[::-1])).simplify().max_coeff() == 0.0


def test_causal_factorization_on_ordered_supports():
    T = TProduct(1, M)
    A = (phi(3), bump((2.0,), 0.4))
    B = (phi(2), bump((0.0,), 0.5))
    lhs = T.T([A, B])
    rhs = star(T.T([A]), T.T([B]), T.star_kernel)
    probes = [bump((1.0,), 2.6)]
    assert pairing_residual((lhs - rhs).simplify(), probes, SPEC) < 1e-12
    # the same factorization with the later entry in the second slot
    swapped = T.T([B, A])
    assert pairing_residual((swapped - rhs).simplify(), probes, SPEC) < 1e-12


# -- derivative monomials ------------------------------------------------------------


def test_lift_moves_derivatives_onto_smearings():
    p = FieldPolynomial(1, {((0,), (1,)): 1})  # phi dphi
    lift = awi_lift(p)
    assert set(lift) == {(1,)}
    assert set(lift[(1,)].terms) == {((0,), (0,))}
    assert abs(complex(lift[(1,)].terms[((0,), (0,))]) - 0.5) < 1e-15

    g, h = bump((0.2,), 0.6), bump((0.0,), 0.8)
    field = lifted_local(p, g)
    got = field_pairings(field, h, SPEC)[(0, 0, 0)]
    xs = np.linspace(-0.9, 0.9, 4001)
    gv = fvals(g, xs).real
    hv = fvals(h, xs).real
    dh = np.gradient(hv, xs, edge_order=2)
    oracle = integrate.simpson(gv * hv * dh, x=xs)
    assert abs(got - oracle) < 1e-6


def test_unlifted_derivative_pair_is_rejected():
    g, f = bump((0.2,), 0.4), bump((-0.2,), 0.4)
    p = FieldPolynomial(1, {((0,), (1,)): 1})
    with pytest.raises(UnsupportedKernelError):
        star(Field.local(p, g), Field.local(p, f), Kernel("feynman", 1, M))


def test_t2_with_lifted_entry_matches_scipy_oracle():
    T = TProduct(1, M)
    g, f = bump((0.3,), 0.4), bump((-0.3,), 0.4)
    p = FieldPolynomial(1, {((0,), (1,)): 1})
    # the imaginary part of the squared kernel has a kink on the diagonal,
    # and here the supports overlap where both smearings are large
    vals = omega0(T.T([(p, g), (phi(2), f)]), SPEC.tighter(4))
    dg = g.derivative((1,))

    def integrand(y, x, part):
        z = (-float(fvals(dg, [x])[0].real) * float(fvals(f, [y])[0].real)
             * (np.exp(-1j * M * abs(x - y)) / (2 * M)) ** 2)
        return z.real if part == "re" else z.imag

    re, _ = integrate.dblquad(lambda y, x: integrand(y, x, "re"),
                              -0.1, 0.7, -0.7, 0.1, epsabs=1e-11)
    im, _ = integrate.dblquad(lambda y, x: integrand(y, x, "im"),
                              -0.1, 0.7, -0.7, 0.1, epsabs=1e-11)
    assert abs(vals[(2, 0, 0)] - (re + 1j * im)) < 1e-8


# -- causal Wick expansion ------------------------------------------------------------


def test_one_entry_expansion_is_the_binomial_identity():
    g = bump((0.1,), 0.5)
    h1, h2 = bump((0.0,), 0.7), bump((0.3,), 0.5).scaled(0.6)
    xs = np.linspace(-0.8, 0.9, 4001)
    gv = fvals(g, xs).real
    a, b = fvals(h1, xs).real, fvals(h2, xs).real
    lhs = integrate.simpson(gv * (a + b) ** 4, x=xs)
    rhs = sum(math.comb(4, k) * integrate.simpson(gv * a ** k * b ** (4 - k), x=xs)
              for k in range(5))
    assert abs(lhs - rhs) < 1e-12

    field = Field.local(phi(4), g)
    got = field_pairings(field, h1 + h2, SPEC)[(0, 0, 0)]
    assert abs(got - lhs) < 1e-7


def test_causal_wick_expansion_matches_direct_product():
    T = TProduct(1, M)
    rec = causal_wick_expand(T, [(phi(2), bump((0.3,), 0.5)),
                                 (phi(3), bump((-0.2,), 0.5))],
                             configs=_d1_probes(), tol=1e-8)
    assert rec["choices"] == 3 * 4
    assert rec["passed"]
    assert (rec["direct"] - rec["expansion"]).simplify().max_coeff() == 0.0


def test_causal_wick_expansion_rejects_mock_backends():
    T = TProduct(1, M, mock=mock_rule(), policy="W")
    with pytest.raises(ConfigurationError):
        causal_wick_expand(T, [(phi(2), bump((0.3,), 0.5)),
                               (phi(2), bump((-0.2,), 0.5))])


# -- vacuum kernels ---------------------------------------------------------------


def test_tvev_closed_form_d1():
    T = TProduct(1, M)
    dist = t_vev(T, (phi(2), phi(2)))
    ys = np.array([[0.3], [-0.7], [1.9]])
    got = dist.density_at(ys)
    expect = np.exp(-2j * M * np.abs(ys[:, 0])) / 2
    assert np.max(np.abs(got - expect)) < 1e-12

    # odd total degree pairs to nothing
    zero = t_vev(T, (phi(2), phi(3)))
    assert np.max(np.abs(zero.density_at(ys))) == 0.0

    with pytest.raises(ConfigurationError):
        t_vev(T, (phi(2), phi(2), phi(2)))


def test_tvev_closed_form_d2_metadata():
    T = TProduct(2, 0.0)
    dist = t_vev(T, (phi(2, d=2), phi(2, d=2)))
    assert dist.degree == 0.0 and dist.order == 2
    pts = np.array([[0.1, 0.8], [0.0, 1.4]])
    got = dist.density_at(pts)
    w = pts[:, 1] ** 2 - pts[:, 0] ** 2
    expect = 2 * (np.log(w) / (4 * np.pi)) ** 2
    assert np.max(np.abs(got - expect)) < 1e-12


def test_t2_vacuum_is_translation_invariant():
    T = TProduct(1, M)
    g, f = bump((0.4,), 0.4), bump((-0.3,), 0.4)
    base = omega0(T.T([(phi(2), g), (phi(2), f)]), SPEC)[(2, 0, 0)]
    moved = omega0(T.T([(phi(2), g.translate((5.0,))),
                        (phi(2), f.translate((5.0,)))]), SPEC)[(2, 0, 0)]
    assert abs(base - moved) < 1e-10


# -- mock singular kernel --------------------------------------------------------------


def mock_rule():
    return MockKernelRule(((0,), (0,)),
                          1 / sp.Abs(sp.Symbol("y0", real=True)),
                          sd=1.0, name="mock-d4")


def test_mock_kernel_requires_policy():
    T = TProduct(1, M, mock=mock_rule())
    with pytest.raises(UnresolvedRenormalizationError):
        T.T([(phi(2), bump((0.3,), 0.4)), (phi(2), bump((-0.2,), 0.4))])


def w_oracle(g, f, u):
    lo, hi = f.box.lo[0], f.box.hi[0]
    val, _ = integrate.quad(lambda y: float(fvals(g, [u + y])[0].real)
                            * float(fvals(f, [y])[0].real), lo, hi,
                            epsabs=1e-12, limit=200)
    return val


def test_mock_w_value_matches_scipy_oracle():
    g, f = bump((0.3,), 0.4), bump((-0.2,), 0.4)
    T = TProduct(1, M, mock=mock_rule(), policy="W")
    F = T.T([(phi(2), g), (phi(2), f)])
    vac = [t for t in F.terms if not t.vertices]
    assert len(vac) == 1 and vac[0].hbar == 2
    got = vac[0].coeff / 2  # the contraction weight 2 multiplies the pairing

    j = jet_bump((0,), 0.5, 1.0)
    w0 = w_oracle(g, f, 0.0)

    def integrand(u):
        sub = w_oracle(g, f, u) - w0 * float(fvals(j, [u])[0].real)
        return sub / abs(u)

    val, _ = integrate.quad(integrand, -1.3, 1.3,
                            points=[-1.0, -0.5, -0.3, 0.0, 0.5, 1.0],
                            epsabs=1e-10, limit=400)
    assert abs(got - val) < 1e-7
    assert T.records[0]["class"] == [[0], [0]]
    assert T.records[0]["policy"] == "W"
    assert T.records[0]["count"] == 1


def test_mock_counterterm_shifts_by_delta_jet():
    g, f = bump((0.3,), 0.4), bump((-0.2,), 0.4)
    base = TProduct(1, M, mock=mock_rule(), policy="W")
    shift = TProduct(1, M, mock=mock_rule(), policy="W",
                     counterterms={(0,): 0.37})
    ents = [(phi(2), g), (phi(2), f)]
    vb = [t.coeff for t in base.T(ents).terms if not t.vertices][0]
    vs = [t.coeff for t in shift.T(ents).terms if not t.vertices][0]
    w0 = w_oracle(g, f, 0.0)
    assert abs((vs - vb) - 2 * 0.37 * w0) < 1e-9


def test_mock_substitution_is_translation_invariant():
    g, f = bump((0.3,), 0.4), bump((-0.2,), 0.4)
    a = [t.coeff for t in TProduct(1, M, mock=mock_rule(), policy="W")
         .T([(phi(2), g), (phi(2), f)]).terms if not t.vertices][0]
    b = [t.coeff for t in TProduct(1, M, mock=mock_rule(), policy="W")
         .T([(phi(2), g.translate((3.0,))),
             (phi(2), f.translate((3.0,)))]).terms if not t.vertices][0]
    assert abs(a - b) < 1e-9


def test_mock_spectator_structure_is_rejected():
    T = TProduct(1, M, mock=mock_rule(), policy="W")
    with pytest.raises(ConfigurationError):
        T.T([(phi(3), bump((0.3,), 0.4)), (phi(3), bump((-0.2,), 0.4))])


def test_correlation_pairing_regular_density_oracle():
    g, f = bump((0.5,), 0.4), bump((-0.5,), 0.4)
    dist = DistributionOffOrigin(1, sp.Abs(sp.Symbol("y0", real=True)) ** -0.5)
    got = correlation_pairing(ExtensionResult(dist, -1), g, f, SPEC)

    def integrand(y, x):
        return (float(fvals(g, [x])[0].real) * float(fvals(f, [y])[0].real)
                / math.sqrt(abs(x - y)))

    val, _ = integrate.dblquad(integrand, 0.1, 0.9, -0.9, -0.1, epsabs=1e-11)
    assert abs(got - val) < 1e-8


# -- generating functional --------------------------------------------------------------


def test_smatrix_slices():
    T = TProduct(1, M)
    S = Interaction.single(phi(4), bump((0.1,), 0.6))
    Sm = smatrix(T, S, 2, lam_cap=0)
    Sf = S.field()
    k1 = Field(1, [t for t in Sm.terms if t.kappa == 1])
    expect1 = Sf.scale(1j).shift_degrees(hbar=-1)
    assert (k1 - expect1).simplify().max_coeff() < 1e-14
    k2 = Field(1, [t for t in Sm.terms if t.kappa == 2])
    expect2 = T.T([Sf, Sf]).scale(-0.5).shift_degrees(hbar=-2)
    assert (k2 - expect2).simplify().max_coeff() < 1e-12


def test_smatrix_series_view():
    T = TProduct(1, M)
    S = Interaction.single(phi(4), bump((0.1,), 0.6))
    series = smatrix(T, S, 2, lam_cap=0, as_series=True)
    assert (-1, 1, 0) in set(series.support())
    slice1 = series.coefficient((-1, 1, 0))
    expect = field_series(S.field().scale(1j),
                          series.orders).coefficient((0, 1, 0))
    assert (slice1 - expect).simplify().max_coeff() < 1e-14


def test_smatrix_star_inverse_is_two_sided():
    T = TProduct(1, M)
    S = Interaction.single(phi(4), bump((0.1,), 0.6))
    orders = Orders(64, 2, 0)
    Sm = smatrix(T, S, 2, lam_cap=0)
    inv = star_inverse(Sm, T.star_kernel, orders)
    one = Field.number(1, 1.0)
    assert (star(inv, Sm, T.star_kernel, orders) - one).simplify().max_coeff() < 1e-12
    assert (star(Sm, inv, T.star_kernel, orders) - one).simplify().max_coeff() < 1e-12


def test_smatrix_rejects_coupling_free_entries():
    T = TProduct(1, M)
    with pytest.raises(ConfigurationError):
        smatrix(T, Field.local(phi(4), bump((0.1,), 0.6)), 2)
    with pytest.raises(NotInvertibleError):
        star_inverse(Field.number(1, 2.0), T.star_kernel, Orders(8, 1, 0))


def test_interaction_validation():
    with pytest.raises(ConfigurationError):
        Interaction.single(phi(4), bump((0.1,), 0.6), k=0)
    S = Interaction.single(phi(4), bump((0.1,), 0.6), k=2)
    assert {t.kappa for t in S.field().terms} == {2}


# -- the axiom harness -------------------------------------------------------------


def test_axiom_report_d1():
    rep = check_axioms(TProduct(1, M))
    assert rep["passed"], rep
    names = [c["name"] for c in rep["checks"]]
    assert names == ["symmetry", "causal-factorization",
                     "s-matrix-causal-factorization", "field-independence",
                     "unitarity", "parity-and-odd-vanishing", "hbar-grading",
                     "field-equation", "scaling"]
    json.dumps(rep)


def test_axiom_report_d2():
    rep = check_axioms(TProduct(2, 0.0))
    assert rep["passed"], rep
    json.dumps(rep)


def test_symmetrized_control_fails_causality_only():
    T = SymmetrizedStarProduct(1, M)
    assert _check_symmetry(T, SPEC, 1e-6)["passed"]
    rep = _check_causality(T, SPEC, 1e-6, _d1_probes())
    assert not rep["passed"]
    assert rep["residual"] > 1e-3


def test_broken_combinatorics_fail_field_independence(monkeypatch):
    # with-replacement counts in place of the falling factorials
    monkeypatch.setattr("egret.star._falling", lambda m, r: m ** r)
    T = TProduct(1, M)
    rep = _check_field_independence(T, SPEC, 1e-6, _d1_probes())
    assert not rep["passed"]
    assert rep["residual"] > 1e-3
