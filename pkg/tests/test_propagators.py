import numpy as np
import pytest

from egret.errors import UnsupportedKernelError
from egret.functions import bump
from egret.propagators import (Kernel, antisymmetric_part_check, conjugation_check,
                               evaluate_kernel, feynman_glue_check, kernel_expr,
                               kg_residual, reflect_kernel, scaling_check)
from egret.quadrature import segment_rule

RNG = np.random.default_rng(7)
T1 = RNG.uniform(-3, 3, size=(40, 1))
T1 = T1[np.abs(T1[:, 0]) > 0.15]

# d=2 sample points kept away from the light cone for pointwise checks
_cand = RNG.uniform(-2, 2, size=(300, 2))
P2 = _cand[np.abs(np.abs(_cand[:, 0]) - np.abs(_cand[:, 1])) > 0.35][:60]


def test_wightman_value_at_zero():
    k = Kernel("wightman", 1, 1.0)
    assert evaluate_kernel(k, np.array([[0.0]]))[0] == pytest.approx(0.5)
    # W(t) = exp(-i t)/2 for m=1
    val = evaluate_kernel(k, np.array([[0.7]]))[0]
    assert val == pytest.approx(np.exp(-0.7j) / 2, abs=1e-15)


def test_commutator_is_antisymmetric_part():
    assert antisymmetric_part_check(1, 1.3, 1.0, T1) < 1e-14
    assert antisymmetric_part_check(2, 0.0, 1.0, P2) < 1e-4


def test_kg_residuals():
    for label in ("wightman", "commutator"):
        assert kg_residual(Kernel(label, 1, 1.0), T1) < 1e-8
    # time-ordered kernel solves KG away from the diagonal
    assert kg_residual(Kernel("feynman", 1, 1.0), T1) < 1e-8
    # d=2 Hadamard: box H = 0 exactly for every eps
    assert kg_residual(Kernel("hadamard", 2, 0.0), P2, eps=0.05) < 1e-6


def test_retarded_is_greens_function():
    # <-D_ret, h'' + m^2 h> = h(0) for h supported around the origin
    m = 1.0
    h = bump(center=[0.4], radius=[1.0])
    k = Kernel("retarded", 1, m)
    x, w = segment_rule(-0.6, 1.4, 40, 12, breaks=(0.0,))
    pts = x[:, None]
    integrand = -evaluate_kernel(k, pts) * (
        h.derivative((2,))(pts) + m ** 2 * h(pts))
    val = np.dot(w, integrand)
    assert val == pytest.approx(h(np.array([[0.0]]))[0], abs=1e-8)


def test_retarded_support():
    k = Kernel("retarded", 1, 2.0)
    assert np.all(evaluate_kernel(k, np.array([[-0.5], [-2.0]])) == 0)
    k2 = Kernel("retarded", 2, 0.0)
    pts = np.array([[1.0, 2.0], [-1.0, 0.1], [1.0, 0.2]])
    vals = evaluate_kernel(k2, pts)
    assert vals[0] == 0 and vals[1] == 0 and vals[2] == -0.5


def test_feynman_gluing_and_continuity():
    assert feynman_glue_check(1, 1.0, 1.0, T1) < 1e-14
    assert feynman_glue_check(2, 0.0, 1.0, P2) < 1e-3
    k = Kernel("feynman", 1, 1.0)
    left = evaluate_kernel(k, np.array([[-1e-9]]))[0]
    right = evaluate_kernel(k, np.array([[1e-9]]))[0]
    assert abs(left - right) < 1e-8


def test_conjugation_symmetry():
    assert conjugation_check(1, 1.0, 1.0, T1) < 1e-15
    # exact at any eps in d=2 by construction
    assert conjugation_check(2, 0.0, 1.0, P2, eps=0.05) < 1e-13


def test_homogeneous_scaling():
    assert scaling_check(1, 1.0, 1.0, T1) < 1e-14
    assert scaling_check(2, 0.0, 1.0, P2) < 1e-12


def test_reflection_rules():
    pts = T1
    for label, m in (("wightman", 1.0), ("commutator", 1.0), ("feynman", 1.0),
                     ("retarded", 1.0)):
        k = Kernel(label, 1, m)
        k2, sigma = reflect_kernel(k)
        assert np.allclose(evaluate_kernel(k, -pts),
                           sigma * evaluate_kernel(k2, pts))
    kd = Kernel("wightman", 1, 1.0, deriv=(1,))
    k2, sigma = reflect_kernel(kd)
    assert np.allclose(evaluate_kernel(kd, -pts), sigma * evaluate_kernel(k2, pts))


def test_sympy_exprs_match_numeric():
    import sympy as sp
    y = sp.Symbol("y0", real=True)
    for label in ("wightman", "commutator", "feynman"):
        k = Kernel(label, 1, 1.0)
        expr = kernel_expr(k)
        f = sp.lambdify(y, expr, modules="numpy")
        assert np.allclose(f(T1[:, 0]), evaluate_kernel(k, T1), atol=1e-14)


def test_catalog_guards():
    with pytest.raises(UnsupportedKernelError):
        Kernel("feynman", 1, 1.0, deriv=(2,))
    with pytest.raises(UnsupportedKernelError):
        Kernel("wightman", 2, 0.0)  # no massless d=2 Wightman function
    with pytest.raises(UnsupportedKernelError):
        Kernel("hadamard", 2, 0.0, deriv=(1, 0))
    with pytest.raises(UnsupportedKernelError):
        Kernel("wightman", 3, 1.0)
    with pytest.raises(UnsupportedKernelError):
        Kernel("wightman", 1, 0.0)
