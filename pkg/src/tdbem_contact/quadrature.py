"""Gauss rules, wavefront panel splits and generic element-pair integration.

The assembly hot loop lives in `_galerkin` (compiled); this module exposes
the same panel logic through a plain Python interface that accepts an
arbitrary kernel callback and estimates its own error by panel halving.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _galerkin
from .errors import QuadratureError


@dataclass(frozen=True)
class QuadratureRule:
    nodes: np.ndarray
    weights: np.ndarray


@dataclass(frozen=True)
class PanelSplit:
    breakpoints: np.ndarray
    kinds: np.ndarray  # 1 wavefront kink, 2 singular point


@dataclass(frozen=True)
class QuadratureConfig:
    """Orders of the compiled assembly rules.

    order: regular and wavefront-crossing pairs; far_order: pairs farther
    apart than 1.5 h that no wavefront crosses; sing_order and levels:
    coincident and shared-vertex pairs (geometric grading depth).
    """

    order: int = 8
    far_order: int = 6
    sing_order: int = 10
    levels: int = 5

    def as_dict(self):
        return {"order": self.order, "far_order": self.far_order,
                "sing_order": self.sing_order, "levels": self.levels}


MAX_LEVELS = 9


def gauss_rule(order: int) -> QuadratureRule:
    if order < 1:
        raise ValueError("order must be >= 1")
    x, w = np.polynomial.legendre.leggauss(order)
    return QuadratureRule(0.5 * (x + 1.0), 0.5 * w)


@dataclass(frozen=True)
class Segment:
    a: np.ndarray
    b: np.ndarray

    @property
    def length(self):
        return float(np.hypot(*(self.b - self.a)))

    @property
    def tangent(self):
        return (self.b - self.a) / self.length

    @property
    def normal(self):
        t = self.tangent
        return np.array([t[1], -t[0]])

    def point(self, u):
        u = np.asarray(u, float)
        return self.a + u[..., None] * (self.b - self.a)


def _relation(e: Segment, f: Segment, tol=1e-14):
    if np.allclose(e.a, f.a, atol=tol) and np.allclose(e.b, f.b, atol=tol):
        return 1, 0.0, 0.0
    for se, pe in ((0.0, e.a), (1.0, e.b)):
        for sf, pf in ((0.0, f.a), (1.0, f.b)):
            if np.allclose(pe, pf, atol=tol):
                return 2, se, sf
    return 0, 0.0, 0.0


def split_at_wavefronts(test: Segment, trial: Segment, radii) -> tuple:
    """Outer (test) and trial-element breakpoints.

    The outer split holds the parameters at which a wavefront circle centred
    on the test point passes through a trial endpoint or becomes tangent to
    the trial segment, plus singular points.  The trial split is the one for
    the test midpoint (the compiled integrator recomputes it per outer
    node).
    """
    radii = np.asarray([r for r in radii if r > 0], float)
    bps = np.empty(16)
    kinds = np.empty(16, np.int64)
    k = _galerkin._outer_breaks(test.a, test.tangent, test.length, trial.a,
                                trial.tangent, trial.normal, trial.length,
                                radii, len(radii), bps, kinds)
    rel, se, sf = _relation(test, trial)
    ob = list(zip(bps[:k], kinds[:k]))
    ib = []
    x = test.point(0.5)
    for R in radii:
        w = x - trial.a
        hf = trial.length
        kk = _galerkin._quad_roots(hf * hf, -2 * hf * float(trial.tangent @ w),
                                   float(w @ w) - R * R, bps, 0, 1, kinds)
        ib += list(zip(bps[:kk], kinds[:kk]))
    if rel == 1:
        ob += [(0.0, 2), (1.0, 2)]
        ib += [(0.5, 2)]
    elif rel == 2:
        ob += [(se, 2)]
        ib += [(sf, 2)]

    def mk(lst):
        lst = sorted(set((float(np.clip(b, 0, 1)), int(t)) for b, t in lst))
        return PanelSplit(np.array([b for b, _ in lst]), np.array([t for _, t in lst], np.int64))
    return mk(ob), mk(ib)


def composite_nodes(split: PanelSplit, order: int, levels: int):
    xs = np.empty(_galerkin.MAXPTS)
    ws = np.empty(_galerkin.MAXPTS)
    n = _galerkin.composite_rule(np.asarray(split.breakpoints, float),
                                 np.asarray(split.kinds, np.int64), len(split.breakpoints),
                                 order, levels, xs, ws)
    return xs[:n].copy(), ws[:n].copy()


def integrate_pair(kernel, test: Segment, trial: Segment, order: int = 8,
                   radii=(), levels: int = 4, rtol: float = 1e-8,
                   max_depth: int = 12, fail_rtol: float = 1e-6):
    """Double integral of kernel(x, y) -> (..., p, q) over a segment pair
    against the linear local bases.

    Returns an array (p, 2, q, 2): [i, alpha, j, beta] pairs kernel entry
    (i, j) with the test basis alpha and trial basis beta.  The rule is
    refined (order increased, grading deepened) until two successive levels
    agree to rtol; raises QuadratureError when the last change exceeds
    fail_rtol after max_depth refinements.
    """
    rel, se, sf = _relation(test, trial)
    radii = tuple(r for r in radii if r > 0)

    def once(n, lev):
        osplit, _ = split_at_wavefronts(test, trial, radii)
        ox, ow = composite_nodes(osplit, n, lev)
        total = None
        for a, wa in zip(ox, ow):
            x = test.point(a)
            extra = []
            for R in radii:
                for end in (0.0, 1.0):
                    if abs(np.hypot(*(x - trial.point(end))) - R) < 0.05 * trial.length:
                        extra.append((end, 2))
            w = x - trial.a
            hf = trial.length
            b = np.empty(8)
            t = np.empty(8, np.int64)
            lst = []
            for R in radii:
                k = _galerkin._quad_roots(hf * hf, -2 * hf * float(trial.tangent @ w),
                                          float(w @ w) - R * R, b, 0, 1, t)
                lst += list(zip(b[:k], t[:k]))
            if rel == 1:
                lst.append((a, 2))
            elif rel == 2:
                lst.append((sf, 2))
            lst += extra
            isplit = PanelSplit(np.array([p for p, _ in lst], float),
                                np.array([q for _, q in lst], np.int64))
            ix, iw = composite_nodes(isplit, n, lev)
            if rel == 1:
                # graded panels narrower than an ulp of `a` collapse onto it
                ix = np.where(ix == a, np.nextafter(a, 0.5), ix)
            y = trial.point(ix)
            K = np.asarray(kernel(np.broadcast_to(x, y.shape), y), float)
            if K.ndim == 1:
                K = K[:, None, None]
            pa = np.array([1 - a, a])
            pb = np.stack([1 - ix, ix])
            contrib = wa * np.einsum('a,n,bn,nij->iajb', pa, iw, pb, K)
            total = contrib if total is None else total + contrib
        return total * test.length * trial.length

    prev = once(order, levels)
    n, lev = order, levels
    for _ in range(max_depth):
        # grading deeper than ~1e-8 of the element would put nodes on the
        # singular point in floating point; refine the order only
        n, lev = n + 4, min(lev + 1, MAX_LEVELS)
        cur = once(n, lev)
        scale = max(np.max(np.abs(cur)), 1e-300)
        change = np.max(np.abs(cur - prev)) / scale
        if change <= rtol:
            return cur
        prev = cur
    if change > fail_rtol:
        raise QuadratureError(f"integrate_pair did not converge (change {change:.2e})")
    return cur
