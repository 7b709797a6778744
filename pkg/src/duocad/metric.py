"""Vector-aware distance between designs.

The distance from design D to design E samples a fixed number of points on
every curve of D, measures each sample's exact (closed-form) distance to the
nearest curve of E, normalizes by the canvas extent, and caps each
contribution at a maximum.  The symmetric distance averages both directions.
Normalizing by the canvas makes the value invariant to uniform rescaling of
both designs together with the canvas.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

from .core import ARC, CIRCLE, LINE, Curve, DegenerateCurve, Design, Point

# Distances below this are treated as exact zeros, so that a design has
# distance exactly 0.0 to itself despite floating-point sampling noise.
ZERO_SNAP = 1e-12


@dataclass(frozen=True)
class MetricConfig:
    samples_per_curve: int = 10
    canvas_extent: float = 40.0
    cap: float = 0.25
    aggregation: str = "mean"  # "mean" | "sum"

    def __post_init__(self) -> None:
        if self.samples_per_curve < 2:
            raise ValueError("samples_per_curve must be >= 2")
        if self.canvas_extent <= 0:
            raise ValueError("canvas_extent must be positive")
        if not 0 < self.cap <= 1:
            raise ValueError("cap must be in (0, 1]")
        if self.aggregation not in ("mean", "sum"):
            raise ValueError(f"unknown aggregation {self.aggregation!r}")


DEFAULT_METRIC = MetricConfig()


# ---------------------------------------------------------------------------
# Curve parameters


def circle_params(curve: Curve) -> tuple[Point, float]:
    """Center and radius of a circle given by two points on its diameter."""
    if curve.kind != CIRCLE:
        raise DegenerateCurve(f"expected circle, got {curve.kind}")
    curve.validate()
    a, b = curve.control_points
    center = Point((a.x + b.x) / 2.0, (a.y + b.y) / 2.0)
    return center, a.dist(b) / 2.0


@dataclass(frozen=True)
class ArcParams:
    center: Point
    radius: float
    start_angle: float
    end_angle: float
    ccw: bool

    @property
    def sweep(self) -> float:
        return abs(self.end_angle - self.start_angle)


def arc_params(curve: Curve) -> ArcParams:
    """Circumcircle and oriented angular span of a three-point arc.

    The orientation is chosen so that traversing from the start angle to the
    end angle passes through the middle control point.  end_angle is adjusted
    by a full turn so the traversal is monotonic: increasing when
    counterclockwise, decreasing otherwise.
    """
    if curve.kind != ARC:
        raise DegenerateCurve(f"expected arc, got {curve.kind}")
    curve.validate()
    a, b, c = curve.control_points
    d = 2.0 * ((a.x - c.x) * (b.y - c.y) - (b.x - c.x) * (a.y - c.y))
    a2 = a.x * a.x + a.y * a.y
    b2 = b.x * b.x + b.y * b.y
    c2 = c.x * c.x + c.y * c.y
    ux = ((a2 - c2) * (b.y - c.y) - (b2 - c2) * (a.y - c.y)) / d
    uy = ((b2 - c2) * (a.x - c.x) - (a2 - c2) * (b.x - c.x)) / d
    center = Point(ux, uy)
    radius = center.dist(a)
    ccw = (b.x - a.x) * (c.y - a.y) - (b.y - a.y) * (c.x - a.x) > 0
    start = math.atan2(a.y - center.y, a.x - center.x)
    end = math.atan2(c.y - center.y, c.x - center.x)
    if ccw:
        span = (end - start) % (2.0 * math.pi)
        end = start + (span if span > 0 else 2.0 * math.pi)
    else:
        span = (start - end) % (2.0 * math.pi)
        end = start - (span if span > 0 else 2.0 * math.pi)
    return ArcParams(center, radius, start, end, ccw)


# ---------------------------------------------------------------------------
# Sampling


def sample_curve(curve: Curve, n: int) -> list[Point]:
    """n points spread over the curve.

    Lines and arcs include both endpoints; circles spread a full turn
    starting at the first diameter point, excluding the wrap-around
    duplicate.  Circle samples step clockwise from the start point.
    """
    if n < 2:
        raise ValueError("need at least 2 samples per curve")
    curve.validate()
    if curve.kind == LINE:
        a, b = curve.control_points
        out = []
        for i in range(n):
            t = i / (n - 1)
            out.append(Point(a.x * (1.0 - t) + b.x * t, a.y * (1.0 - t) + b.y * t))
        return out
    if curve.kind == CIRCLE:
        center, radius = circle_params(curve)
        first = curve.control_points[0]
        theta0 = math.atan2(first.y - center.y, first.x - center.x)
        return [
            Point(
                center.x + radius * math.cos(theta0 - 2.0 * math.pi * k / n),
                center.y + radius * math.sin(theta0 - 2.0 * math.pi * k / n),
            )
            for k in range(n)
        ]
    params = arc_params(curve)
    out = []
    for i in range(n):
        t = i / (n - 1)
        theta = params.start_angle * (1.0 - t) + params.end_angle * t
        out.append(
            Point(
                params.center.x + params.radius * math.cos(theta),
                params.center.y + params.radius * math.sin(theta),
            )
        )
    return out


# ---------------------------------------------------------------------------
# Closed-form point-to-curve distance


def _dist_point_segment(p: Point, a: Point, b: Point) -> float:
    vx, vy = b.x - a.x, b.y - a.y
    wx, wy = p.x - a.x, p.y - a.y
    t = (wx * vx + wy * vy) / (vx * vx + vy * vy)
    t = min(1.0, max(0.0, t))
    return math.hypot(wx - t * vx, wy - t * vy)


def dist_point_curve(p: Point, curve: Curve) -> float:
    """Exact Euclidean distance from ``p`` to the curve's point set, in canvas units."""
    if curve.kind == LINE:
        a, b = curve.control_points
        if a.dist(b) <= 0:
            raise DegenerateCurve("line control points coincide")
        d = _dist_point_segment(p, a, b)
    elif curve.kind == CIRCLE:
        center, radius = circle_params(curve)
        d = abs(p.dist(center) - radius)
    elif curve.kind == ARC:
        params = arc_params(curve)
        theta = math.atan2(p.y - params.center.y, p.x - params.center.x)
        if params.ccw:
            rel = (theta - params.start_angle) % (2.0 * math.pi)
            inside = rel <= params.end_angle - params.start_angle
        else:
            rel = (params.start_angle - theta) % (2.0 * math.pi)
            inside = rel <= params.start_angle - params.end_angle
        if inside:
            d = abs(p.dist(params.center) - params.radius)
        else:
            start, _, end = curve.control_points
            d = min(p.dist(start), p.dist(end))
    else:
        raise DegenerateCurve(f"unknown curve kind {curve.kind!r}")
    return 0.0 if d < ZERO_SNAP else d


def dist_point_design(p: Point, target: Design, cfg: MetricConfig = DEFAULT_METRIC) -> float:
    """Normalized, capped distance from a point to the nearest curve of ``target``.

    An empty target yields the cap: a point with nothing to match is maximally
    wrong, but no worse than that.
    """
    if target.is_empty():
        return cfg.cap
    raw = min(dist_point_curve(p, c) for c in target.curves)
    return min(raw / cfg.canvas_extent, cfg.cap)


# ---------------------------------------------------------------------------
# Chamfer distance


def asym_chamfer(source: Design, target: Design, cfg: MetricConfig = DEFAULT_METRIC) -> float:
    """Aggregate of dist_point_design over all sampled points of ``source``.

    0.0 when the source is empty (no samples, nothing misplaced).
    """
    values = [
        dist_point_design(p, target, cfg)
        for curve in source.curves
        for p in sample_curve(curve, cfg.samples_per_curve)
    ]
    if not values:
        return 0.0
    total = math.fsum(values)
    return total / len(values) if cfg.aggregation == "mean" else total


def chamfer(a: Design, b: Design, cfg: MetricConfig = DEFAULT_METRIC) -> float:
    """Symmetric chamfer distance: the average of both asymmetric directions."""
    return 0.5 * (asym_chamfer(a, b, cfg) + asym_chamfer(b, a, cfg))


def is_success(
    design: Design,
    target: Design,
    threshold: float = 0.2,
    cfg: MetricConfig = DEFAULT_METRIC,
) -> bool:
    """Whether ``design`` reconstructs ``target`` to within ``threshold``."""
    if threshold <= 0:
        raise ValueError("threshold must be positive")
    return chamfer(design, target, cfg) < threshold
