"""Propagator kernel catalog.

Shipped backends:

* d=1, m > 0: the two-point function is W(t) = exp(-i m t) / (2 m).  The
  commutator function is D(t) = -sin(m t)/m, the retarded function
  D_ret(t) = -theta(t) sin(m t)/m (so -D_ret is the Green's function of
  d^2/dt^2 + m^2), and the time-ordered kernel is W(|t|).
* d=2, m = 0: the Hadamard function with scale mu,
  H(z) = -(1/4 pi) log(mu^2 (x^2 - (t - i eps)^2)), together with the exact
  piecewise commutator/retarded functions.  eps > 0 smooths the light cone;
  checks extrapolate eps -> 0.

Kernels are value objects; ``deriv`` is a spacetime multi-index applied to
the translation-invariant argument.  d=1 time-ordered kernels stop at first
derivatives: one more derivative would pick up a delta on the diagonal, which
the shipped models never need.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np
import sympy as sp

from .errors import UnsupportedKernelError

LABELS = ("wightman", "hadamard", "commutator", "retarded", "advanced", "feynman")

# labels whose kernels are even/odd under z -> -z (d=1 and d=2 alike)
_EVEN = {"feynman"}
_ODD = {"commutator"}
_CONJ_FLIP = {"wightman", "hadamard"}  # K(-z) = conj(K(z))
_SWAP = {"retarded": "advanced", "advanced": "retarded"}


@dataclass(frozen=True)
class Kernel:
    label: str
    d: int
    m: float
    mu: float = 1.0
    deriv: tuple = ()
    conj: bool = False

    def __post_init__(self):
        if self.label not in LABELS:
            raise UnsupportedKernelError(f"unknown kernel label {self.label!r}")
        if self.d not in (1, 2):
            raise UnsupportedKernelError(f"no backend for d={self.d}")
        if self.d == 1 and self.m <= 0:
            raise UnsupportedKernelError("d=1 backend needs m > 0")
        if self.d == 2 and self.m != 0:
            raise UnsupportedKernelError("d=2 backend is massless")
        if self.d == 2 and self.label == "wightman":
            raise UnsupportedKernelError(
                "the massless d=2 two-point function is infrared divergent; "
                "use the hadamard kernel with a scale mu")
        deriv = tuple(int(n) for n in (self.deriv or (0,) * self.d))
        object.__setattr__(self, "deriv", deriv)
        if len(deriv) != self.d:
            raise UnsupportedKernelError("derivative multi-index rank mismatch")
        order = sum(deriv)
        if self.d == 1 and self.label in ("feynman", "retarded", "advanced"):
            if order > 1:
                raise UnsupportedKernelError(
                    f"{self.label} kernel derivatives beyond first order hit "
                    "the diagonal delta; not part of the shipped catalog")
        if self.d == 2 and order > 0:
            raise UnsupportedKernelError("d=2 kernels ship underived only")

    @property
    def order(self) -> int:
        return sum(self.deriv)


def conjugate_kernel(k: Kernel) -> Kernel:
    return replace(k, conj=not k.conj)


def reflect_kernel(k: Kernel):
    """Return (k2, sigma) with K(-z) = sigma * K2(z)."""
    sigma = (-1.0) ** k.order
    if k.label in _EVEN:
        return k, sigma
    if k.label in _ODD:
        return k, -sigma
    if k.label in _CONJ_FLIP:
        return conjugate_kernel(k), sigma
    return replace(k, label=_SWAP[k.label]), sigma


def _eval_d1(k: Kernel, t: np.ndarray) -> np.ndarray:
    m = k.m
    n = k.deriv[0]
    if k.label == "wightman":
        return (-1j * m) ** n * np.exp(-1j * m * t) / (2 * m)
    if k.label == "commutator":
        return ((-1j * m) ** n * np.exp(-1j * m * t)
                - (1j * m) ** n * np.exp(1j * m * t)) / (2j * m)
    if k.label == "feynman":
        base = np.exp(-1j * m * np.abs(t)) / (2 * m)
        if n == 0:
            return base
        return -0.5j * np.sign(t) * np.exp(-1j * m * np.abs(t))
    if k.label == "retarded":
        return np.where(t > 0, -np.sin(m * t) / m, 0.0).astype(complex)
    if k.label == "advanced":
        # D_adv(t) = D_ret(-t)
        return np.where(t < 0, np.sin(m * t) / m, 0.0).astype(complex)
    raise UnsupportedKernelError(f"{k.label} has no d=1 backend")


def _eval_d2(k: Kernel, t: np.ndarray, x: np.ndarray, eps: float) -> np.ndarray:
    mu2 = k.mu ** 2
    if k.label == "hadamard":
        w = x ** 2 - (t - 1j * eps) ** 2
        return -np.log(mu2 * w) / (4 * np.pi)
    if k.label == "feynman":
        s = t ** 2 - x ** 2
        return -np.log(mu2 * (-s + 1j * eps)) / (4 * np.pi)
    if k.label == "commutator":
        s = t ** 2 - x ** 2
        return (-0.5 * np.sign(t) * (s > 0)).astype(complex)
    if k.label == "retarded":
        s = t ** 2 - x ** 2
        return (-0.5 * (t > 0) * (s > 0)).astype(complex)
    if k.label == "advanced":
        s = t ** 2 - x ** 2
        return (-0.5 * (t < 0) * (s > 0)).astype(complex)
    raise UnsupportedKernelError(
        "the massless d=2 two-point function is infrared divergent; "
        "use the hadamard kernel with a scale mu")


def evaluate_kernel(k: Kernel, z: np.ndarray, eps: float = 0.0) -> np.ndarray:
    """Evaluate on points z of shape (..., d); eps only matters for d=2."""
    z = np.asarray(z, dtype=float)
    if k.d == 1:
        t = z[..., 0] if z.ndim > 1 else z
        out = _eval_d1(k, np.asarray(t, dtype=float))
    else:
        out = _eval_d2(k, z[..., 0], z[..., 1], eps)
    return np.conj(out) if k.conj else out


def kernel_expr(k: Kernel, eps=None):
    """Closed form as a sympy expression in the relative coordinates."""
    if k.d == 1:
        t = sp.Symbol("y0", real=True)
        m = sp.Float(k.m)
        if k.label == "wightman":
            base = sp.exp(-sp.I * m * t) / (2 * m)
        elif k.label == "commutator":
            base = -sp.sin(m * t) / m
        elif k.label == "feynman":
            base = sp.exp(-sp.I * m * sp.Abs(t)) / (2 * m)
        else:
            raise UnsupportedKernelError(f"no closed form shipped for {k.label}")
        expr = sp.diff(base, t, k.deriv[0]) if k.deriv[0] else base
    else:
        t, x = sp.Symbol("y0", real=True), sp.Symbol("y1", real=True)
        e = sp.Float(0) if eps is None else eps
        mu2 = sp.Float(k.mu) ** 2
        if k.label == "hadamard":
            expr = -sp.log(mu2 * (x ** 2 - (t - sp.I * e) ** 2)) / (4 * sp.pi)
        elif k.label == "feynman":
            expr = -sp.log(mu2 * (-(t ** 2 - x ** 2) + sp.I * e)) / (4 * sp.pi)
        else:
            raise UnsupportedKernelError(f"no closed form shipped for {k.label}")
    return sp.conjugate(expr) if k.conj else expr


# -- catalog checks ----------------------------------------------------------

def _stencil_second(fn, z, axis, h):
    shifts = (-2, -1, 0, 1, 2)
    coeff = (-1 / 12, 4 / 3, -5 / 2, 4 / 3, -1 / 12)
    acc = 0
    for s, c in zip(shifts, coeff):
        zz = np.array(z, dtype=float, copy=True)
        zz[..., axis] += s * h
        acc = acc + c * fn(zz)
    return acc / h ** 2


def kg_residual(k: Kernel, points: np.ndarray, eps: float = 0.0,
                h: float = 1e-3) -> float:
    """Max |(box + m^2) K| over the sample points via 5-point stencils.

    Points must avoid the kink/cone sets where the kernel is distributional.
    """
    pts = np.asarray(points, dtype=float)
    if pts.ndim == 1:
        pts = pts[:, None]
    fn = lambda z: evaluate_kernel(k, z, eps)
    box_k = _stencil_second(fn, pts, 0, h)
    for axis in range(1, k.d):
        box_k = box_k - _stencil_second(fn, pts, axis, h)
    res = box_k + k.m ** 2 * fn(pts)
    return float(np.max(np.abs(res)))


def antisymmetric_part_check(d: int, m: float, mu: float, points: np.ndarray,
                             eps_ladder=None) -> float:
    """Residual of (1/i)(H(z) - H(-z)) = commutator function."""
    from .quadrature import richardson
    label = "wightman" if d == 1 else "hadamard"
    h_k = Kernel(label, d, m, mu)
    c_k = Kernel("commutator", d, m, mu)
    pts = np.asarray(points, dtype=float)
    if eps_ladder is None:
        eps_ladder = [0.0] if d == 1 else [0.05, 0.025, 0.0125]
    vals = []
    for eps in eps_ladder:
        anti = (evaluate_kernel(h_k, pts, eps)
                - evaluate_kernel(h_k, -pts, eps)) / 1j
        vals.append(anti)
    if len(vals) > 1:
        anti = richardson(np.stack(vals))
    else:
        anti = vals[0]
    return float(np.max(np.abs(anti - evaluate_kernel(c_k, pts))))


def conjugation_check(d: int, m: float, mu: float, points: np.ndarray,
                      eps: float = 0.05) -> float:
    """Residual of conj(H(z)) = H(-z)."""
    label = "wightman" if d == 1 else "hadamard"
    k = Kernel(label, d, m, mu)
    pts = np.asarray(points, dtype=float)
    return float(np.max(np.abs(np.conj(evaluate_kernel(k, pts, eps))
                               - evaluate_kernel(k, -pts, eps))))


def scaling_check(d: int, m: float, mu: float, points: np.ndarray,
                  rhos=(2.0, 4.0, 0.5), eps: float = 0.05) -> float:
    """Residual of the homogeneous scaling of the two-point function.

    d=1: rho^{d-2} W_{m/rho}(rho z) = W_m(z) exactly.  d=2 (m=0): the same
    combination shifts by -log(rho)/(2 pi), a pure scale change of mu; the
    smoothing parameter co-scales with the argument.
    """
    pts = np.asarray(points, dtype=float)
    worst = 0.0
    for rho in rhos:
        if d == 1:
            k0 = Kernel("wightman", 1, m)
            k1 = Kernel("wightman", 1, m / rho)
            dev = rho ** (d - 2) * evaluate_kernel(k1, pts * rho) \
                - evaluate_kernel(k0, pts)
        else:
            k0 = Kernel("hadamard", 2, 0.0, mu)
            dev = evaluate_kernel(k0, pts * rho, eps * rho) \
                - evaluate_kernel(k0, pts, eps) + math.log(rho) / (2 * np.pi)
        worst = max(worst, float(np.max(np.abs(dev))))
    return worst


def feynman_glue_check(d: int, m: float, mu: float, points: np.ndarray,
                       eps_ladder=None) -> float:
    """Residual of K_F(z) = theta(t) H(z) + theta(-t) H(-z) off t = 0."""
    from .quadrature import richardson
    label = "wightman" if d == 1 else "hadamard"
    h_k = Kernel(label, d, m, mu)
    f_k = Kernel("feynman", d, m, mu)
    pts = np.asarray(points, dtype=float)
    t = pts[..., 0]
    if eps_ladder is None:
        eps_ladder = [0.0] if d == 1 else [0.05, 0.025, 0.0125]
    devs = []
    for eps in eps_ladder:
        glued = np.where(t > 0, evaluate_kernel(h_k, pts, eps),
                         evaluate_kernel(h_k, -pts, eps))
        devs.append(glued - evaluate_kernel(f_k, pts, eps))
    dev = richardson(np.stack(devs)) if len(devs) > 1 else devs[0]
    return float(np.max(np.abs(dev)))
