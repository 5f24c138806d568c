"""Truncated formal series in (hbar, kappa, lambda) with generic coefficients.

Coefficients live in any vector space V that supports ``v + w`` and
``v * scalar``.  Degrees are triples ``(n_hbar, n_kappa, n_lambda)``;
``n_hbar`` may be negative when the series is flagged as Laurent, the other
two slots are always nonnegative.  Every series carries explicit truncation
orders and arithmetic never stores a degree beyond them.
"""

from __future__ import annotations

from dataclasses import dataclass

from .errors import ConfigurationError, NotInvertibleError, OrderError

Degree = tuple[int, int, int]


@dataclass(frozen=True)
class Orders:
    """Inclusive truncation orders per slot."""

    hbar: int
    kappa: int
    lam: int = 1

    def admits(self, deg: Degree) -> bool:
        return deg[0] <= self.hbar and deg[1] <= self.kappa and deg[2] <= self.lam

    def meet(self, other: "Orders") -> "Orders":
        return Orders(min(self.hbar, other.hbar), min(self.kappa, other.kappa),
                      min(self.lam, other.lam))


def _iszero(v):
    probe = getattr(v, "is_zero", None)
    if callable(probe):
        return probe()
    return v == 0


class FormalSeries:
    """Sparse truncated series; see module docstring for conventions."""

    def __init__(self, coeffs: dict, orders: Orders, laurent: bool = False, zero=0j):
        self.orders = orders
        self.laurent = laurent
        self.zero = zero
        data = {}
        for deg, val in coeffs.items():
            deg = (int(deg[0]), int(deg[1]), int(deg[2]))
            if deg[1] < 0 or deg[2] < 0:
                raise ConfigurationError(f"negative kappa/lambda degree {deg}")
            if deg[0] < 0 and not laurent:
                raise ConfigurationError(
                    f"negative hbar degree {deg} on a non-Laurent series")
            if not orders.admits(deg):
                raise ConfigurationError(f"degree {deg} beyond truncation {orders}")
            if not _iszero(val):
                data[deg] = val
        self.coeffs = data

    # -- access ------------------------------------------------------------

    def coefficient(self, deg: Degree):
        deg = tuple(deg)
        if not self.orders.admits(deg):
            raise OrderError(f"degree {deg} beyond truncation {self.orders}")
        return self.coeffs.get(deg, self.zero)

    def items(self):
        """Deterministic iteration in lexicographic degree order."""
        return [(deg, self.coeffs[deg]) for deg in sorted(self.coeffs)]

    def support(self):
        return sorted(self.coeffs)

    def is_zero(self) -> bool:
        return not self.coeffs

    # -- linear structure ----------------------------------------------------

    def _like(self, coeffs, orders=None, laurent=None):
        return FormalSeries(coeffs, orders or self.orders,
                            self.laurent if laurent is None else laurent, self.zero)

    def add(self, other: "FormalSeries") -> "FormalSeries":
        orders = self.orders.meet(other.orders)
        out = {}
        for deg in set(self.coeffs) | set(other.coeffs):
            if not orders.admits(deg):
                continue
            a, b = self.coeffs.get(deg), other.coeffs.get(deg)
            out[deg] = a if b is None else (b if a is None else a + b)
        return self._like(out, orders, self.laurent or other.laurent)

    def scale(self, scalar) -> "FormalSeries":
        return self._like({d: v * scalar for d, v in self.coeffs.items()})

    def shift(self, deg: Degree) -> "FormalSeries":
        """Multiply by the monomial of the given degree."""
        out = {}
        for d, v in self.coeffs.items():
            nd = (d[0] + deg[0], d[1] + deg[1], d[2] + deg[2])
            if self.orders.admits(nd):
                out[nd] = v
        laurent = self.laurent or deg[0] < 0
        return self._like(out, laurent=laurent)

    def __add__(self, other):
        return self.add(other)

    def __sub__(self, other):
        return self.add(other.scale(-1))

    def truncate(self, orders: Orders) -> "FormalSeries":
        keep = {d: v for d, v in self.coeffs.items() if orders.admits(d)}
        return FormalSeries(keep, orders, self.laurent, self.zero)

    def map_coefficients(self, fn) -> "FormalSeries":
        return self._like({d: fn(v) for d, v in self.coeffs.items()})

    # -- multiplicative structure -------------------------------------------

    def combine(self, other: "FormalSeries", product) -> "FormalSeries":
        """Cauchy product; ``product(v, w)`` supplies the coefficient bilinear map."""
        orders = self.orders.meet(other.orders)
        out = {}
        for d1, v1 in self.items():
            for d2, v2 in other.items():
                deg = (d1[0] + d2[0], d1[1] + d2[1], d1[2] + d2[2])
                if not orders.admits(deg):
                    continue
                term = product(v1, v2)
                out[deg] = term if deg not in out else out[deg] + term
        return FormalSeries(out, orders, self.laurent or other.laurent, self.zero)

    def derivative_at_zero(self, n: int) -> "FormalSeries":
        """n-th lambda-derivative at lambda = 0, an (hbar, kappa)-series.

        Returns n! times the lambda-degree-n slice, with the lambda degree
        reset to zero.
        """
        if n > self.orders.lam:
            raise OrderError(f"lambda order {n} beyond truncation {self.orders.lam}")
        fact = 1
        for j in range(1, n + 1):
            fact *= j
        out = {}
        for (h, k, l), v in self.coeffs.items():
            if l == n:
                out[(h, k, 0)] = v * fact
        return self._like(out)

    def invert_unit_plus_nilpotent(self, product, one) -> "FormalSeries":
        """Inverse of ``1 + N`` by the geometric series.

        Requires the constant term to be exactly ``one`` and every other term
        to carry positive kappa + lambda degree, which makes N nilpotent under
        the truncation.
        """
        const = self.coeffs.get((0, 0, 0))
        if const is None or not _iszero(const - one):
            raise NotInvertibleError("constant term is not the unit")
        nil = {d: v for d, v in self.coeffs.items() if d != (0, 0, 0)}
        if any(d[1] + d[2] == 0 for d in nil):
            raise NotInvertibleError(
                "non-constant term with zero kappa+lambda degree; geometric "
                "series does not terminate")
        n_series = self._like(nil)
        result = self._like({(0, 0, 0): one})
        power = self._like({(0, 0, 0): one})
        steps = self.orders.kappa + self.orders.lam
        for j in range(1, steps + 1):
            power = power.combine(n_series, product).scale(-1)
            if power.is_zero():
                break
            result = result + power
        return result


def unit_series(one, orders: Orders, laurent: bool = False, zero=0j) -> FormalSeries:
    return FormalSeries({(0, 0, 0): one}, orders, laurent, zero)
