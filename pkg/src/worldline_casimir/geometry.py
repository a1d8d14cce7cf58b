"""Surface configurations in the dimensionally reduced cross-section.

All plate configurations studied here are translationally invariant along
one or two directions, so surfaces reduce to points (1d) or to lines and
half-lines (2d) in the cross-plane.  A scene holds two disjoint surface
groups; only worldlines piercing both groups contribute to the
interaction energy.

Axis convention for reduced_dim = 2: axis 0 is the lateral coordinate x,
axis 1 is the distance coordinate z.  In 1d the single axis is z.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from enum import Enum


class Kind(Enum):
    PLANE = "plane"        # full line {coord[const_axis] == level}
    HALF_PLANE = "half"    # half-line, additionally side*coord[free] >= side*edge


@dataclass(frozen=True)
class Primitive:
    """One reduced surface: a line or half-line.

    A half-line is stored per axis pair (constant axis, level, edge on the
    free axis, side), so horizontal plates with edges and vertical plates
    share a single intersection kernel.
    """
    kind: Kind
    const_axis: int = 1
    level: float = 0.0
    edge: float = 0.0
    side: int = 0

    def __post_init__(self):
        import math
        if not math.isfinite(self.level) or not math.isfinite(self.edge):
            raise ValueError("primitive coordinates must be finite")
        if self.kind is Kind.HALF_PLANE and self.side not in (-1, 1):
            raise ValueError("half-plane needs side +1 or -1")
        if self.const_axis not in (0, 1):
            raise ValueError("const_axis must be 0 or 1")

    @property
    def free_axis(self) -> int:
        return 1 - self.const_axis

    def scaled(self, factor: float) -> "Primitive":
        return replace(self, level=self.level * factor, edge=self.edge * factor)


def plane(level: float, const_axis: int = 1) -> Primitive:
    return Primitive(Kind.PLANE, const_axis=const_axis, level=level)


def half_line(const_axis: int, level: float, edge: float, side: int) -> Primitive:
    return Primitive(Kind.HALF_PLANE, const_axis=const_axis, level=level,
                     edge=edge, side=side)


def _overlap(p: Primitive, q: Primitive) -> bool:
    if p.const_axis == q.const_axis:
        if p.level != q.level:
            return False
        # same carrier line: ranges on the free axis
        if p.kind is Kind.PLANE or q.kind is Kind.PLANE:
            return True
        if p.side == q.side:
            return True
        lo, hi = (p, q) if p.side == 1 else (q, p)
        # lo occupies v >= lo.edge, hi occupies v <= hi.edge
        return lo.edge <= hi.edge
    # perpendicular carrier lines meet at one point; check both constraints
    pt = {p.const_axis: p.level, q.const_axis: q.level}
    for prim in (p, q):
        if prim.kind is Kind.HALF_PLANE:
            v = pt[prim.free_axis]
            if prim.side * v < prim.side * prim.edge:
                return False
    return True


@dataclass(frozen=True)
class Scene:
    sigma1: tuple[Primitive, ...]
    sigma2: tuple[Primitive, ...]
    reduced_dim: int
    distance: float
    name: str = "custom"
    params: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        if self.reduced_dim not in (1, 2):
            raise ValueError("reduced_dim must be 1 or 2")
        if not self.sigma1 or not self.sigma2:
            raise ValueError("both surface groups must be nonempty")
        if self.distance <= 0:
            raise ValueError("distance must be positive")
        if self.reduced_dim == 1:
            for prim in self.sigma1 + self.sigma2:
                if prim.kind is not Kind.PLANE:
                    raise ValueError("1d scenes admit only plane primitives")
        for p in self.sigma1:
            for q in self.sigma2:
                if _overlap(p, q):
                    raise ValueError("surface groups must be disjoint point sets")

    @property
    def invariant_directions(self) -> int:
        return 3 - self.reduced_dim

    def scaled(self, factor: float) -> "Scene":
        """Same scene with all lengths multiplied by ``factor``."""
        return replace(
            self,
            sigma1=tuple(p.scaled(factor) for p in self.sigma1),
            sigma2=tuple(p.scaled(factor) for p in self.sigma2),
            distance=self.distance * factor,
        )


def _check_a(a: float) -> None:
    if not a > 0:
        raise ValueError(f"distance must be positive, got {a}")


def preset_parallel_plates(a: float) -> Scene:
    """Two infinite parallel plates at distance ``a`` (1d reduction)."""
    _check_a(a)
    return Scene((plane(0.0),), (plane(a),), reduced_dim=1, distance=a,
                 name="parallel", params={"a": a})


def preset_perpendicular(a: float) -> Scene:
    """Semi-infinite plate perpendicularly above an infinite plate.

    The lower plate is the line z = 0; the upper plate reduces to the
    vertical half-line {x = 0, z >= a}.
    """
    _check_a(a)
    return Scene((plane(0.0),),
                 (half_line(const_axis=0, level=0.0, edge=a, side=+1),),
                 reduced_dim=2, distance=a,
                 name="perpendicular", params={"a": a})


def preset_one_semi_infinite(a: float) -> Scene:
    """Semi-infinite plate (x <= 0) parallel above an infinite plate."""
    _check_a(a)
    return Scene((plane(0.0),),
                 (half_line(const_axis=1, level=a, edge=0.0, side=-1),),
                 reduced_dim=2, distance=a,
                 name="one_semi_infinite", params={"a": a})


def preset_two_semi_infinite(a: float) -> Scene:
    """Two parallel semi-infinite plates (x <= 0) with aligned edges."""
    _check_a(a)
    return Scene((half_line(const_axis=1, level=0.0, edge=0.0, side=-1),),
                 (half_line(const_axis=1, level=a, edge=0.0, side=-1),),
                 reduced_dim=2, distance=a,
                 name="two_semi_infinite", params={"a": a})


def preset_comb(a: float, d_spacing: float, n_teeth: int) -> Scene:
    """A stack of ``n_teeth`` vertical half-lines above an infinite plate.

    Tooth k sits at x = k * d_spacing with z >= a.
    """
    _check_a(a)
    if d_spacing <= 0:
        raise ValueError("tooth spacing must be positive")
    if n_teeth < 1:
        raise ValueError("need at least one tooth")
    teeth = tuple(half_line(const_axis=0, level=k * d_spacing, edge=a, side=+1)
                  for k in range(n_teeth))
    return Scene((plane(0.0),), teeth, reduced_dim=2, distance=a,
                 name="comb", params={"a": a, "d_spacing": d_spacing,
                                      "n_teeth": n_teeth})


PRESETS = {
    "parallel": preset_parallel_plates,
    "perpendicular": preset_perpendicular,
    "one_semi_infinite": preset_one_semi_infinite,
    "two_semi_infinite": preset_two_semi_infinite,
    "comb": preset_comb,
}


def make_scene(name: str, **params) -> Scene:
    if name not in PRESETS:
        raise ValueError(f"unknown geometry {name!r}; known: {sorted(PRESETS)}")
    return PRESETS[name](**params)
