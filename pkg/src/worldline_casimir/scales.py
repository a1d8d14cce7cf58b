"""Exact admissible scale sets: at which s = sqrt(T) does a scaled loop
placed at a given center of mass intersect a surface?

Everything is done in loop-frame relative offsets: for a primitive with
constant axis c and free axis f,

    A = level - cm[c]        (distance from the cm to the carrier line)
    B = edge  - cm[f]        (edge position relative to the cm)

so per-loop segment data can be computed once and reused for every cm.

This module is the exact reference engine.  It is deliberately simple and
is validated against the scan oracle below; the production kernels in
:mod:`worldline_casimir.kernels` must agree with it.
"""

from __future__ import annotations

import math

import numpy as np

from .geometry import Kind, Primitive, Scene
from .intervals import INF, IntervalUnion, grid_interval_union, union_all

_ALL = IntervalUnion.single(0.0, INF)  # every positive scale


def _check_finite(*vals) -> None:
    for v in vals:
        if not math.isfinite(v):
            raise ValueError("non-finite input to scale computation")


def segment_halfline_scales(p, q, A: float, B: float, side: int) -> IntervalUnion:
    """Scales s > 0 at which the scaled segment (s*p, s*q) + cm crosses the
    half-line {z = level, side*x >= side*edge}.

    p and q are consecutive loop points as (x, z) pairs relative to the
    center of mass; A and B are the relative level and edge offsets.  The
    crossing height in the loop frame is h = A/s; the crossing exists iff
    h lies in the half-open range [min(p_z, q_z), max(p_z, q_z)), and its
    abscissa is x(h) = alpha + beta*h, linear in h.  Both the range and the
    side condition are linear inequalities in s, so the result is a single
    interval (possibly empty).
    """
    px, pz = float(p[0]), float(p[1])
    qx, qz = float(q[0]), float(q[1])
    _check_finite(px, pz, qx, qz, A, B)
    if side not in (-1, 1):
        raise ValueError("side must be +1 or -1")
    if qz == pz:
        # segment parallel to the carrier line: crossings at the shared
        # endpoints belong to the neighbouring segments
        return IntervalUnion.empty()

    z_lo, z_hi = (pz, qz) if pz < qz else (qz, pz)
    lo, hi = 0.0, INF

    # range condition  z_lo <= A/s < z_hi  (s > 0)
    if A == 0.0:
        if not (z_lo <= 0.0 < z_hi):
            return IntervalUnion.empty()
    elif A > 0.0:
        if z_hi <= 0.0:
            return IntervalUnion.empty()
        lo = max(lo, A / z_hi)
        if z_lo > 0.0:
            hi = min(hi, A / z_lo)
    else:
        if z_lo >= 0.0:
            return IntervalUnion.empty()
        lo = max(lo, A / z_lo)
        if z_hi < 0.0:
            hi = min(hi, A / z_hi)

    # side condition  side*s*alpha >= side*(B - beta*A)
    beta = (qx - px) / (qz - pz)
    alpha = px - beta * pz
    lhs = side * alpha
    rhs = side * (B - beta * A)
    if lhs == 0.0:
        if rhs > 0.0:
            return IntervalUnion.empty()
    elif lhs > 0.0:
        lo = max(lo, rhs / lhs)
    else:
        hi = min(hi, rhs / lhs)

    # lo = 0 encodes "admissible at arbitrarily small scales" (only possible
    # for A = 0); the propertime integral rejects it if it survives the
    # scene intersection
    return IntervalUnion.single(max(lo, 0.0), hi)


def _offsets(primitive: Primitive, cm) -> tuple[float, float]:
    A = primitive.level - float(cm[primitive.const_axis])
    B = primitive.edge - float(cm[primitive.free_axis]) \
        if primitive.kind is Kind.HALF_PLANE else 0.0
    return A, B


def plane_scales_1d(z_lo: float, z_hi: float, A: float) -> IntervalUnion:
    """Admissible scales for a full carrier line from the loop's extents."""
    if A == 0.0:
        return _ALL  # a centered loop straddles its own level at every scale
    e = z_hi if A > 0.0 else z_lo
    if e == 0.0 or A / e <= 0.0:
        return IntervalUnion.empty()
    return IntervalUnion.single(A / e, INF)


def loop_primitive_scales(loop: np.ndarray, primitive: Primitive,
                          cm) -> IntervalUnion:
    """Admissible scales for one loop against one primitive.

    ``loop`` is an (N, d) array of centered points; ``cm`` is the center of
    mass in the same reduced coordinates.
    """
    d = loop.shape[1]
    if primitive.const_axis >= d:
        raise ValueError("primitive axis outside loop dimension")
    zc = loop[:, primitive.const_axis]
    A, B = _offsets(primitive, cm)
    if primitive.kind is Kind.PLANE:
        return plane_scales_1d(float(zc.min()), float(zc.max()), A)
    xc = loop[:, primitive.free_axis]
    n = loop.shape[0]
    pieces = []
    for i in range(n):
        j = (i + 1) % n
        piece = segment_halfline_scales((xc[i], zc[i]), (xc[j], zc[j]),
                                        A, B, primitive.side)
        if piece:
            pieces.append(piece)
    return union_all(pieces)


def loop_scene_scales(loop: np.ndarray, scene: Scene, cm) -> IntervalUnion:
    """Scales at which the loop pierces both surface groups of the scene."""
    if loop.shape[1] != scene.reduced_dim:
        raise ValueError("loop dimension does not match scene")
    cm = np.atleast_1d(np.asarray(cm, dtype=float))
    if cm.shape != (scene.reduced_dim,):
        raise ValueError("center of mass dimension does not match scene")
    if scene.reduced_dim == 1:
        # promote to the (x, z) convention with a trivial lateral coordinate
        loop = np.column_stack([np.zeros(loop.shape[0]), loop[:, 0]])
        cm = np.array([0.0, cm[0]])
    g1 = union_all(loop_primitive_scales(loop, p, cm) for p in scene.sigma1)
    if not g1:
        return g1
    g2 = union_all(loop_primitive_scales(loop, p, cm) for p in scene.sigma2)
    return g1.intersect(g2)


# -- scan oracle ------------------------------------------------------

def _polygon_hits_primitive(pts: np.ndarray, primitive: Primitive) -> bool:
    """Direct segment-by-segment test of a concrete polygon (absolute
    coordinates) against a primitive, with half-open crossing ranges."""
    z = pts[:, primitive.const_axis]
    zn = np.roll(z, -1)
    lo = np.minimum(z, zn)
    hi = np.maximum(z, zn)
    level = primitive.level
    crossing = (lo <= level) & (level < hi)
    if primitive.kind is Kind.PLANE:
        return bool(crossing.any())
    if not crossing.any():
        return False
    x = pts[:, primitive.free_axis]
    xn = np.roll(x, -1)
    idx = np.nonzero(crossing)[0]
    t = (level - z[idx]) / (zn[idx] - z[idx])
    x_cross = x[idx] + t * (xn[idx] - x[idx])
    return bool(np.any(primitive.side * x_cross >= primitive.side * primitive.edge))


def _hits_group(pts: np.ndarray, group) -> bool:
    return any(_polygon_hits_primitive(pts, p) for p in group)


def _batch_hits_primitive(pts: np.ndarray, primitive: Primitive) -> np.ndarray:
    """Vectorized form of :func:`_polygon_hits_primitive` over a stack of
    polygons of shape (batch, N, 2); returns a (batch,) Boolean array."""
    z = pts[:, :, primitive.const_axis]
    zn = np.roll(z, -1, axis=1)
    level = primitive.level
    crossing = (np.minimum(z, zn) <= level) & (level < np.maximum(z, zn))
    if primitive.kind is Kind.PLANE:
        return crossing.any(axis=1)
    x = pts[:, :, primitive.free_axis]
    xn = np.roll(x, -1, axis=1)
    with np.errstate(divide="ignore", invalid="ignore"):
        t = (level - z) / (zn - z)
        x_cross = x + t * (xn - x)
    ok = crossing & (primitive.side * x_cross >= primitive.side * primitive.edge)
    return ok.any(axis=1)


def brute_force_scales(loop: np.ndarray, scene: Scene, cm,
                       s_grid: np.ndarray, refine: int = 48) -> IntervalUnion:
    """Scan oracle: test the intersection predicate pointwise on a grid.

    Intended for validation only; cost is O(len(s_grid) * N * primitives).
    Each grid transition is then sharpened by ``refine`` bisection steps of
    the same Boolean predicate (set refine=0 for the raw grid resolution).
    If the set is still admissible at the top of the grid the last interval
    is extended to infinity.  Structure beyond the top of the grid is
    invisible to the scan, so comparisons against the exact engine should
    clip both sets at the top grid value.
    """
    s_grid = np.asarray(s_grid, dtype=float)
    if s_grid.size < 100 or np.any(np.diff(s_grid) <= 0):
        raise ValueError("need an increasing scale grid with >= 100 points")
    cm = np.atleast_1d(np.asarray(cm, dtype=float))
    if loop.shape[1] == 1:
        loop = np.column_stack([np.zeros(loop.shape[0]), loop[:, 0]])
        cm = np.array([0.0, cm[0]])
    pts = s_grid[:, None, None] * loop[None, :, :] + cm
    mask1 = np.zeros(s_grid.shape, dtype=bool)
    for p in scene.sigma1:
        mask1 |= _batch_hits_primitive(pts, p)
    mask2 = np.zeros(s_grid.shape, dtype=bool)
    for p in scene.sigma2:
        mask2 |= _batch_hits_primitive(pts, p)
    mask = mask1 & mask2

    def predicate(s: float) -> bool:
        poly = s * loop + cm
        return _hits_group(poly, scene.sigma1) and _hits_group(poly, scene.sigma2)

    def bisect(s_out: float, s_in: float) -> float:
        # predicate(s_in) is True, predicate(s_out) is False; return the
        # transition point to near machine precision
        for _ in range(refine):
            mid = math.sqrt(s_out * s_in)
            if predicate(mid):
                s_in = mid
            else:
                s_out = mid
        return s_in

    ivs = []
    n = mask.size
    i = 0
    while i < n:
        if not mask[i]:
            i += 1
            continue
        j = i
        while j + 1 < n and mask[j + 1]:
            j += 1
        lo = float(s_grid[i])
        if refine and i > 0:
            lo = bisect(float(s_grid[i - 1]), lo)
        if j == n - 1:
            hi = INF
        else:
            hi = float(s_grid[j])
            if refine:
                hi = bisect(float(s_grid[j + 1]), hi)
        if lo < hi:
            ivs.append((lo, hi))
        i = j + 1
    return IntervalUnion(ivs)
