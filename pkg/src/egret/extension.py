"""Extension of distributions across the origin.

A density with scaling degree sd < k pairs with any test function already;
the direct extension is unique and a cutoff ladder recovers it.  Once
sd >= k the pairing diverges and a renormalization choice enters.  The
routines here implement the standard constructions and expose the finite
ambiguity as explicit delta-jet coefficients:

  * direct_extend: cutoff ladder chi(y/rho) h with an Aitken limit,
  * w_extend: subtract the Taylor jet of h through the singular order,
  * diff_renorm: rewrite t as derivatives of an integrable density,
  * analytic_ms: analytic regularization of 1/|y| with minimal subtraction.

Every renormalized object is an ExtensionResult: a density paired through
the W projector plus a finite list of delta-jet counterterms.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field as dc_field, replace

import numpy as np
import sympy as sp

from .distributions import (DistributionOffOrigin, _multi_indices_upto,
                            fit_ladder, project_W, subtracted_pairing)
from .errors import ExtensionError, UnresolvedRenormalizationError
from .functions import TestFunction, chi_cutoff, coords
from .quadrature import QuadratureSpec, aitken_limit


def _boosted(spec: QuadratureSpec) -> QuadratureSpec:
    return replace(spec, radial_panels=max(spec.radial_panels, 96),
                   radial_points=max(spec.radial_points, 16))


def singular_order(dist: DistributionOffOrigin, h: TestFunction | None = None,
                   spec: QuadratureSpec | None = None) -> int:
    """omega = sd(t) - k, the order of subtractions the extension needs.

    Negative values mean the direct extension applies.  A declared
    homogeneity degree is trusted; otherwise the scaling ladder runs.
    """
    if dist.degree is not None:
        sd = float(dist.degree)
    else:
        if h is None:
            raise ExtensionError("no declared degree; supply a probe h")
        from .distributions import scaling_degree_estimate
        sd = scaling_degree_estimate(dist, h, spec)["estimate"]
    return int(np.floor(sd + 0.25)) - dist.k


def direct_extend(dist: DistributionOffOrigin, h: TestFunction,
                  spec: QuadratureSpec | None = None, levels: int = 12,
                  sharpness: int = 1) -> dict:
    """Cutoff ladder <t, chi(y/rho_j) h> with rho_j = 2^-j, Aitken limit.

    Valid when sd(t) < k; the tail below the cutoff shrinks like
    rho^(k - sd), so the ladder converges geometrically.
    """
    spec = _boosted(spec or QuadratureSpec())
    chi = chi_cutoff(dist.k, sharpness=sharpness)
    vals = []
    for j in range(levels):
        rho = 2.0 ** (-j)
        cut = chi.scale_argument(1.0 / rho)
        vals.append(dist.pairing(cut * h, spec, r_lo=rho,
                                 breaks=(2.0 * rho,)))
    # the tail below the cutoff is a power series rho^(gap + n) with
    # gap = k - sd; eliminate the modes one by one with exact ratios
    # (Richardson), reading gap off the ladder when no degree is declared
    seq = [complex(v) for v in vals]
    if dist.degree is not None:
        gap = dist.k - float(dist.degree)
    else:
        # difference ratios approach 2^-gap geometrically; accelerate the
        # ratio sequence itself to recover the gap
        ratios = []
        for i in range(len(seq) - 2):
            d0, d1 = seq[i + 1] - seq[i], seq[i + 2] - seq[i + 1]
            if abs(d0) > 1e-300 and abs(d1) < abs(d0):
                ratios.append(abs(d1) / abs(d0))
        q = float(aitken_limit(ratios).real) if ratios else 0.5
        q = min(max(q, 1e-9), 1.0 - 1e-9)
        gap = -math.log2(q)
    limit = aitken_limit(seq)
    if gap > 1e-9:
        for j in range(min(6, len(seq) - 2)):
            f = 2.0 ** (gap + j)
            seq = [(f * seq[i + 1] - seq[i]) / (f - 1)
                   for i in range(len(seq) - 1)]
        limit = seq[-1]
    return {"value": complex(limit), "ladder": [complex(v) for v in vals]}


# -- extension results ------------------------------------------------------------


@dataclass
class ExtensionResult:
    """A renormalized distribution: W-projected density plus delta jets."""

    density: DistributionOffOrigin | None
    omega: int = -1
    delta: dict = dc_field(default_factory=dict)
    r_flat: float = 0.5
    r_support: float = 1.0
    method: str = "direct"

    @property
    def k(self) -> int:
        if self.density is not None:
            return self.density.k
        if self.delta:
            return len(next(iter(self.delta)))
        raise ExtensionError("empty extension result")

    def pair(self, h: TestFunction, spec: QuadratureSpec | None = None) -> complex:
        spec = _boosted(spec or QuadratureSpec())
        val = 0.0 + 0.0j
        if self.density is not None:
            val += subtracted_pairing(self.density, h, self.omega,
                                      self.r_flat, self.r_support, spec)
        for a, c in self.delta.items():
            val += c * (-1) ** sum(a) * h.jet(a)
        return complex(val)

    def shifted(self, coeffs: dict) -> "ExtensionResult":
        """Add delta-jet counterterms <d^a delta, h> = (-1)^|a| d^a h(0)."""
        delta = dict(self.delta)
        for a, c in coeffs.items():
            a = tuple(int(n) for n in a)
            if self.omega >= 0 and sum(a) > self.omega:
                raise ExtensionError(
                    "ambiguity shift beyond the singular order")
            delta[a] = delta.get(a, 0) + c
        return ExtensionResult(self.density, self.omega, delta,
                               self.r_flat, self.r_support, self.method)

    def scaling_ladder(self, h: TestFunction,
                       spec: QuadratureSpec | None = None,
                       levels: int = 17, window: int = 8) -> dict:
        """Scaling estimate of the extension, delta jets handled exactly."""
        vals = []
        for j in range(levels):
            rho = 2.0 ** (-j)
            h_rho = h.scale_argument(1.0 / rho).scaled(rho ** (-self.k))
            vals.append(self.pair(h_rho, spec))
        return fit_ladder(vals, window)


def ambiguity_shift(result: ExtensionResult, coeffs: dict) -> ExtensionResult:
    return result.shifted(coeffs)


def w_extend(dist: DistributionOffOrigin, omega: int | None = None,
             r_flat: float = 0.5, r_support: float = 1.0) -> ExtensionResult:
    """The W-extension: pair h through h - sum_{|a|<=omega} d^a h(0) w_a."""
    if omega is None:
        omega = singular_order(dist)
    if omega < 0:
        return ExtensionResult(dist, -1, method="direct")
    return ExtensionResult(dist, omega, r_flat=r_flat, r_support=r_support,
                           method="W")


def extend(dist: DistributionOffOrigin, policy: str | None = None,
           omega: int | None = None, h: TestFunction | None = None,
           spec: QuadratureSpec | None = None, **kwargs) -> ExtensionResult:
    """Extension entry point; raises when a choice is needed but missing."""
    if omega is None:
        omega = singular_order(dist, h, spec)
    if omega < 0:
        return ExtensionResult(dist, -1, method="direct")
    if policy is None:
        raise UnresolvedRenormalizationError(
            f"{dist.name}: singular order {omega} needs a renormalization "
            "policy ('W' subtraction or explicit counterterms)")
    if policy == "W":
        return w_extend(dist, omega, **kwargs)
    raise UnresolvedRenormalizationError(f"unknown policy {policy!r}")


# -- differential renormalization ----------------------------------------------------


def diff_renorm(base: DistributionOffOrigin, b, h: TestFunction,
                spec: QuadratureSpec | None = None) -> complex:
    """Pair the extension of d^b(base) with h as (-1)^|b| <base, d^b h>.

    `base` must be locally integrable; the derivative is taken in the sense
    of distributions, which fixes one particular extension.
    """
    b = tuple(int(n) for n in b)
    return base.pairing(h.derivative(b), _boosted(spec or QuadratureSpec())) \
        * (-1) ** sum(b)


# -- analytic regularization with minimal subtraction ---------------------------------


def analytic_ms(h: TestFunction, sigma: float = 0.05,
                spec: QuadratureSpec | None = None) -> dict:
    """Minimal subtraction of t = 1/|y| in one dimension.

    The regularized family |y|^(-1-z) equals (1/(z(z-1))) d^2/dy^2 |y|^(1-z)
    away from z = 0, and the right side pairs with h for any small z because
    |y|^(1-z) is locally integrable.  Sampling z on {s, -s, is, -is} and
    fitting the Laurent series c_(-1)/z + c_0 + c_1 z + c_2 z^2 isolates the
    pole (which must be -2 h(0) / z) and the finite part, which is the
    minimally subtracted extension.
    """
    spec = _boosted(spec or QuadratureSpec())
    y = coords(1)[0]
    h2 = h.derivative((2,))
    samples = []
    zetas = [sigma, -sigma, 1j * sigma, -1j * sigma]
    for z in zetas:
        dens = DistributionOffOrigin(1, sp.Abs(y) ** (1 - z))
        val = dens.pairing(h2, spec) / (z * (z - 1))
        samples.append(val)
    A = np.array([[1.0 / z, 1.0, z, z * z] for z in zetas])
    coef = np.linalg.solve(A, np.array(samples))
    return {"pole": complex(coef[0]), "finite_part": complex(coef[1]),
            "samples": [complex(v) for v in samples],
            "zetas": [complex(z) for z in zetas]}


# -- Taylor expansion in the mass -----------------------------------------------------


_FD_WEIGHTS = {
    0: ([0], [1.0]),
    1: ([-2, -1, 1, 2], [1 / 12, -2 / 3, 2 / 3, -1 / 12]),
    2: ([-2, -1, 0, 1, 2], [-1 / 12, 4 / 3, -5 / 2, 4 / 3, -1 / 12]),
    3: ([-2, -1, 1, 2], [-1 / 2, 1.0, -1.0, 1 / 2]),
}


def mass_taylor_split(family, m0: float, order: int, h: TestFunction,
                      spec: QuadratureSpec | None = None,
                      step: float = 0.05) -> dict:
    """Taylor coefficients in m of <t_m, h> at m0 plus a remainder probe.

    family(m) -> DistributionOffOrigin.  Central differences through
    `order` (at most 3); the remainder at m is the pairing minus the jet.
    """
    spec = spec or QuadratureSpec()
    if order > 3:
        raise ExtensionError("mass Taylor implemented through order 3")
    cache: dict = {}

    def P(m: float) -> complex:
        if m not in cache:
            cache[m] = family(m).pairing(h, spec)
        return cache[m]

    coeffs = []
    for j in range(order + 1):
        offs, wts = _FD_WEIGHTS[j]
        der = sum(w * P(m0 + o * step) for o, w in zip(offs, wts)) \
            / step ** j
        coeffs.append(der / math.factorial(j))

    def remainder(m: float) -> complex:
        jet = sum(c * (m - m0) ** j for j, c in enumerate(coeffs))
        return P(m) - jet

    return {"coefficients": [complex(c) for c in coeffs],
            "remainder": remainder}
