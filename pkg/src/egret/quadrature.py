"""Deterministic quadrature: composite Gauss-Legendre boxes, radial-angular
rules around the origin, extrapolation ladders, and an order-preserving
parallel map.

All rules are pure functions of their parameters, so two evaluations with the
same spec produce bitwise-identical grids regardless of thread count.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from functools import lru_cache

import numpy as np

from .errors import QuadratureBudgetError
from .geometry import Box


@dataclass(frozen=True)
class QuadratureSpec:
    panels: int = 12          # panels per box axis
    points: int = 12          # Gauss-Legendre points per panel
    radial_panels: int = 48   # geometric panels for radial rules
    radial_points: int = 8
    angular_points: int = 48  # azimuthal points (k >= 2)
    polar_points: int = 24    # polar Gauss points (k == 3)
    r_floor: float = 1e-18    # relative inner radius when the origin is covered
    eps: float = 0.05         # light-cone smoothing scale (d=2 kernels)
    eps_levels: int = 3
    threads: int = 1

    def tighter(self, factor: int = 2) -> "QuadratureSpec":
        return replace(self, panels=self.panels * factor,
                       radial_panels=self.radial_panels * factor)


@lru_cache(maxsize=None)
def _leggauss(n: int):
    x, w = np.polynomial.legendre.leggauss(n)
    return x, w


def segment_rule(lo: float, hi: float, panels: int, points: int,
                 breaks: tuple = ()):
    """Composite GL nodes/weights on [lo, hi], panel edges snapped to breaks."""
    edges = set(np.linspace(lo, hi, panels + 1).tolist())
    for b in breaks:
        if lo < b < hi:
            edges.add(float(b))
    edges = sorted(edges)
    x, w = _leggauss(points)
    nodes, weights = [], []
    for a, b in zip(edges[:-1], edges[1:]):
        half = 0.5 * (b - a)
        nodes.append(0.5 * (a + b) + half * x)
        weights.append(half * w)
    return np.concatenate(nodes), np.concatenate(weights)


def box_rule(box: Box, spec: QuadratureSpec, breaks: tuple = ()):
    """Tensor rule on a bounded box: points (N, k), weights (N,)."""
    if not box.is_bounded():
        raise ValueError("box rule needs a bounded box")
    axes = [segment_rule(lo, hi, spec.panels, spec.points, breaks)
            for lo, hi in zip(box.lo, box.hi)]
    grids = np.meshgrid(*[a[0] for a in axes], indexing="ij")
    pts = np.stack([g.reshape(-1) for g in grids], axis=-1)
    wgrids = np.meshgrid(*[a[1] for a in axes], indexing="ij")
    w = np.ones(pts.shape[0])
    for g in wgrids:
        w = w * g.reshape(-1) if w.shape else g.reshape(-1)
    w = np.prod(np.stack([g.reshape(-1) for g in wgrids], axis=0), axis=0)
    return pts, w


def geometric_radial_rule(r_lo: float, r_hi: float, panels: int, points: int):
    """GL points on geometrically graded panels of [r_lo, r_hi]."""
    if not (0 < r_lo < r_hi):
        raise ValueError("need 0 < r_lo < r_hi")
    q = (r_lo / r_hi) ** (1.0 / panels)
    edges = [r_hi * q ** j for j in range(panels + 1)]
    x, w = _leggauss(points)
    nodes, weights = [], []
    for b, a in zip(edges[:-1], edges[1:]):  # edges descend; panel is [a, b]
        half = 0.5 * (b - a)
        nodes.append(0.5 * (a + b) + half * x)
        weights.append(half * w)
    r = np.concatenate(nodes)
    order = np.argsort(r)
    return r[order], np.concatenate(weights)[order]


def sphere_rule(k: int, spec: QuadratureSpec):
    """Directions and weights integrating over the unit sphere S^{k-1}."""
    if k == 1:
        return np.array([[1.0], [-1.0]]), np.array([1.0, 1.0])
    if k == 2:
        m = spec.angular_points
        th = 2 * np.pi * (np.arange(m) + 0.5) / m
        dirs = np.stack([np.cos(th), np.sin(th)], axis=-1)
        return dirs, np.full(m, 2 * np.pi / m)
    if k == 3:
        m = spec.angular_points
        th = 2 * np.pi * (np.arange(m) + 0.5) / m
        u, wu = _leggauss(spec.polar_points)
        su = np.sqrt(1 - u ** 2)
        dirs = np.stack([np.outer(u, np.ones(m)),
                         np.outer(su, np.cos(th)),
                         np.outer(su, np.sin(th))], axis=-1).reshape(-1, 3)
        w = np.outer(wu, np.full(m, 2 * np.pi / m)).reshape(-1)
        return dirs, w
    raise ValueError(f"no sphere rule for k={k}")


def radial_angular_rule(k: int, r_lo: float, r_hi: float, spec: QuadratureSpec):
    """Product rule on the shell r_lo <= |y| <= r_hi including r^{k-1}."""
    r, wr = geometric_radial_rule(r_lo, r_hi, spec.radial_panels,
                                  spec.radial_points)
    dirs, wd = sphere_rule(k, spec)
    pts = r[:, None, None] * dirs[None, :, :]
    w = (wr * r ** (k - 1))[:, None] * wd[None, :]
    return pts.reshape(-1, k), w.reshape(-1)


def richardson(values, ratio: float = 2.0):
    """Extrapolate a ladder v(e), v(e/ratio), ... assuming an error series
    c1 e + c2 e^2 + ...; works elementwise on arrays."""
    table = [np.asarray(v, dtype=complex) for v in values]
    n = len(table)
    for j in range(1, n):
        factor = ratio ** j
        table = [(factor * table[i + 1] - table[i]) / (factor - 1)
                 for i in range(len(table) - 1)]
    out = table[0]
    return out if out.shape else complex(out)


def aitken_limit(values, tol: float = 0.0):
    """Aitken/geometric limit of a convergent ladder; falls back to the last
    value when differences stop behaving geometrically."""
    v = [complex(x) for x in values]
    if len(v) < 3:
        return v[-1]
    d1 = v[-1] - v[-2]
    d0 = v[-2] - v[-3]
    if abs(d0) <= 1e-300 or abs(d1) >= abs(d0):
        return v[-1]
    q = d1 / d0
    return v[-1] + d1 * q / (1 - q)


def parallel_map(fn, items, threads: int = 1):
    """Order-preserving map; the result never depends on thread count."""
    items = list(items)
    if threads <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))


def refine_until(compute, start: QuadratureSpec, tol: float, max_rounds: int = 3):
    """Evaluate ``compute(spec)`` on successively tighter specs until two
    rounds agree within tol.  Deterministic in its inputs."""
    spec = start
    prev = compute(spec)
    for _ in range(max_rounds):
        spec = spec.tighter()
        cur = compute(spec)
        if abs(cur - prev) <= tol:
            return cur
        prev = cur
    raise QuadratureBudgetError(
        f"refinement did not reach tol={tol}; last delta {abs(cur - prev):.3e}")
