"""Adaptive Gauss-Kronrod (G7/K15) panel quadrature for vector-valued integrands.

Integrands take a 1-D array of abscissae of length ``n`` and return an array
whose leading axis has length ``n``; trailing axes are integrated
componentwise, and error control uses the maximum over components.
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import NonConvergent

_XGK = np.array([
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144845693013,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.000000000000000000000000000000000,
])
_WGK = np.array([
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
])
_WG = np.array([
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
])

# 15 nodes on [-1, 1], ascending; Gauss nodes sit at the odd positions.
_NODES = np.concatenate([-_XGK[:-1], _XGK[::-1]])
_KWEIGHTS = np.concatenate([_WGK[:-1], _WGK[::-1]])
_GWEIGHTS = np.zeros(15)
_GWEIGHTS[1::2] = np.concatenate([_WG[:-1], _WG[::-1]])

Integrand = Callable[[np.ndarray], np.ndarray]


@dataclass
class QuadResult:
    value: np.ndarray
    error: float
    n_evals: int
    upper: float


def _norm(a) -> float:
    return float(np.max(np.abs(a))) if np.size(a) else 0.0


def gauss_kronrod(f: Integrand, a: float, b: float):
    """One K15 panel on [a, b]; returns (value, |K15 - G7|)."""
    half = 0.5 * (b - a)
    mid = 0.5 * (a + b)
    vals = np.asarray(f(mid + half * _NODES))
    kron = half * np.tensordot(_KWEIGHTS, vals, axes=(0, 0))
    gauss = half * np.tensordot(_GWEIGHTS, vals, axes=(0, 0))
    return kron, _norm(kron - gauss)


class _Panels:
    """Heap of panels ordered by error estimate, refined by bisection."""

    def __init__(self, f: Integrand):
        self.f = f
        self.heap: list = []
        self.n_evals = 0
        self._count = 0

    def add(self, a: float, b: float):
        val, err = gauss_kronrod(self.f, a, b)
        self.n_evals += 15
        self._count += 1
        heapq.heappush(self.heap, (-err, self._count, a, b, val))
        return val, err

    def total(self):
        value = sum(item[4] for item in self.heap)
        error = sum(-item[0] for item in self.heap)
        return value, error

    def refine(self, abs_tol: float, max_panels: int):
        value, error = self.total()
        while error > abs_tol:
            if len(self.heap) >= max_panels:
                raise NonConvergent(
                    f"quadrature error {error:.3e} above tolerance {abs_tol:.3e} "
                    f"after {max_panels} panels"
                )
            neg_err, _, a, b, val = heapq.heappop(self.heap)
            m = 0.5 * (a + b)
            v1, e1 = self.add(a, m)
            v2, e2 = self.add(m, b)
            value = value - val + v1 + v2
            error = error + neg_err + e1 + e2
        # Re-sum once to shed the drift of the incremental updates.
        return self.total()


def integrate_adaptive(f: Integrand, a: float, b: float, abs_tol: float = 1e-10,
                       n_initial: int = 8, max_panels: int = 4000) -> QuadResult:
    """Globally adaptive integral of ``f`` over the finite interval [a, b]."""
    panels = _Panels(f)
    edges = np.linspace(a, b, n_initial + 1)
    for lo, hi in zip(edges[:-1], edges[1:]):
        panels.add(float(lo), float(hi))
    value, error = panels.refine(abs_tol, max_panels)
    return QuadResult(np.asarray(value), float(error), panels.n_evals, b)


def integrate_to_tail(f: Integrand, start: float = 0.0, abs_tol: float = 1e-9,
                      panel_width: float = 1.0, tail_tol: float = 1e-13,
                      quiet_panels: int = 5, cap: float = 1e3,
                      max_panels: int = 20000) -> QuadResult:
    """Integrate ``f`` over [start, inf) by marching panels until the tail dies out.

    Marching stops once ``quiet_panels`` consecutive panels each contribute
    less than ``tail_tol``; the collected panels are then refined until the
    summed error estimate falls below ``abs_tol``; ``max_panels`` bounds the
    number of panels refinement may add on top of the marched ones.
    """
    panels = _Panels(f)
    quiet = 0
    lo = start
    while quiet < quiet_panels:
        if lo >= start + cap:
            raise NonConvergent(f"integrand tail still above {tail_tol:g} at cutoff {cap:g}")
        hi = lo + panel_width
        val, err = panels.add(lo, hi)
        quiet = quiet + 1 if max(_norm(val), err) < tail_tol else 0
        lo = hi
    value, error = panels.refine(abs_tol, len(panels.heap) + max_panels)
    return QuadResult(np.asarray(value), float(error), panels.n_evals, lo)
