"""2D CAD kernel: designs as curve sets over shared control points, plus edit actions.

A design is an unordered collection of curves (lines, circles, arcs), each
defined by its control points.  Control points are shared: two curves whose
control points coincide within ``EPS_ID`` are coupled, so moving or deleting
the point affects every curve that references it.  All values here are
immutable; every edit produces a new design.
"""
from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass
from typing import Iterable, Literal, Sequence

log = logging.getLogger(__name__)

# Point identity for action-target resolution and duplicate detection.
EPS_ID = 1e-6
# Geometric degeneracy threshold (zero-length lines, collinear arcs).
EPS_GEOM = 1e-9
# Half-side of the square canvas: valid play coordinates lie in [-20, 20].
CANVAS_BOUND = 20.0


class CadError(Exception):
    """Base class for kernel errors."""


class DegenerateCurve(CadError):
    """A curve's control points do not define valid geometry."""


class UnresolvedReference(CadError):
    """An action targets a curve or point that does not exist in the design."""


class DegenerateResult(CadError):
    """An edit would produce an invalid curve or a duplicate curve."""


class OutOfBounds(CadError):
    """An edit would move a control point off the canvas."""


# ---------------------------------------------------------------------------
# Points and curves


@dataclass(frozen=True, slots=True, order=True)
class Point:
    x: float
    y: float

    def translated(self, dx: float, dy: float) -> "Point":
        return Point(self.x + dx, self.y + dy)

    def dist(self, other: "Point") -> float:
        return math.hypot(self.x - other.x, self.y - other.y)

    def is_finite(self) -> bool:
        return math.isfinite(self.x) and math.isfinite(self.y)

    def in_bounds(self, bound: float = CANVAS_BOUND) -> bool:
        return abs(self.x) <= bound and abs(self.y) <= bound


LINE: Literal["line"] = "line"
CIRCLE: Literal["circle"] = "circle"
ARC: Literal["arc"] = "arc"
CurveKind = Literal["line", "circle", "arc"]

_ARITY = {LINE: 2, CIRCLE: 2, ARC: 3}


@dataclass(frozen=True, slots=True, order=True)
class Curve:
    """A line (2 endpoints), circle (2 diameter points), or arc (start, mid, end).

    The dataclass itself does not validate; use the :func:`line` /
    :func:`circle` / :func:`arc` factories or :meth:`validate` when geometry
    must be sound.  Deserialized action logs construct raw curves so that
    replays of noisy data never fail at parse time.
    """

    kind: str
    control_points: tuple[Point, ...]

    def validate(self) -> "Curve":
        if self.kind not in _ARITY:
            raise DegenerateCurve(f"unknown curve kind {self.kind!r}")
        if len(self.control_points) != _ARITY[self.kind]:
            raise DegenerateCurve(
                f"{self.kind} needs {_ARITY[self.kind]} control points, "
                f"got {len(self.control_points)}"
            )
        for p in self.control_points:
            if not p.is_finite():
                raise DegenerateCurve(f"non-finite control point in {self.kind}")
        if self.kind in (LINE, CIRCLE):
            a, b = self.control_points
            if a.dist(b) <= EPS_GEOM:
                raise DegenerateCurve(f"{self.kind} control points coincide")
        else:
            a, b, c = self.control_points
            if min(a.dist(b), b.dist(c), a.dist(c)) <= EPS_GEOM:
                raise DegenerateCurve("arc control points coincide")
            area = abs(
                (b.x - a.x) * (c.y - a.y) - (b.y - a.y) * (c.x - a.x)
            ) / 2.0
            if area <= EPS_GEOM * EPS_GEOM:
                raise DegenerateCurve("arc control points are collinear")
        return self

    def translated(self, dx: float, dy: float) -> "Curve":
        return Curve(self.kind, tuple(p.translated(dx, dy) for p in self.control_points))


def line(a: Point, b: Point) -> Curve:
    return Curve(LINE, (a, b)).validate()


def circle(a: Point, b: Point) -> Curve:
    return Curve(CIRCLE, (a, b)).validate()


def arc(start: Point, mid: Point, end: Point) -> Curve:
    return Curve(ARC, (start, mid, end)).validate()


def curves_identical(a: Curve, b: Curve, eps: float = EPS_ID) -> bool:
    """Same kind and control points within ``eps`` (circles: either diameter order)."""
    if a.kind != b.kind or len(a.control_points) != len(b.control_points):
        return False

    def pointwise(ps: Sequence[Point], qs: Sequence[Point]) -> bool:
        return all(p.dist(q) <= eps for p, q in zip(ps, qs))

    if pointwise(a.control_points, b.control_points):
        return True
    if a.kind == CIRCLE:
        return pointwise(a.control_points, tuple(reversed(b.control_points)))
    return False


# ---------------------------------------------------------------------------
# Designs


@dataclass(frozen=True, slots=True)
class Design:
    """An unordered set of curves.  The empty design is the game's start state."""

    curves: tuple[Curve, ...] = ()

    @staticmethod
    def of(curves: Iterable[Curve]) -> "Design":
        return Design(tuple(curves)).validate()

    def validate(self) -> "Design":
        for c in self.curves:
            c.validate()
        for i, a in enumerate(self.curves):
            for b in self.curves[i + 1 :]:
                if curves_identical(a, b):
                    raise DegenerateResult(f"duplicate {a.kind} curves in design")
        return self

    def is_empty(self) -> bool:
        return not self.curves

    def control_points(self) -> tuple[Point, ...]:
        """Canonical control points, lexicographically sorted.

        Raw coordinates within EPS_ID of one another collapse to a single
        representative (the lexicographically smallest member).
        """
        return tuple(sorted(self._canonical_map().values(), key=lambda p: (p.x, p.y)))

    def point_index(self) -> dict[Point, tuple[int, ...]]:
        """Map each canonical control point to the indices of curves referencing it."""
        canon = self._canonical_map()
        index: dict[Point, list[int]] = {}
        for i, c in enumerate(self.curves):
            for p in c.control_points:
                lst = index.setdefault(canon[p], [])
                if not lst or lst[-1] != i:
                    lst.append(i)
        return {p: tuple(ix) for p, ix in index.items()}

    def _canonical_map(self) -> dict[Point, Point]:
        raws = sorted(
            {p for c in self.curves for p in c.control_points}, key=lambda p: (p.x, p.y)
        )
        canons: list[Point] = []
        mapping: dict[Point, Point] = {}
        for p in raws:
            best = None
            best_d = EPS_ID
            for q in canons:
                d = p.dist(q)
                if d < best_d or (d == best_d and best is None):
                    best, best_d = q, d
            if best is None:
                canons.append(p)
                mapping[p] = p
            else:
                mapping[p] = best
        return mapping


def canonicalize_point(design: Design, p: Point) -> Point | None:
    """Resolve ``p`` to the nearest existing control point within EPS_ID.

    Ties are broken lexicographically by (x, y).  Returns None when no
    control point lies within EPS_ID.
    """
    best: Point | None = None
    best_d = math.inf
    for q in design.control_points():
        d = p.dist(q)
        if d < best_d or (d == best_d and best is not None and (q.x, q.y) < (best.x, best.y)):
            best, best_d = q, d
    if best is None or best_d > EPS_ID:
        return None
    return best


def design_equal(a: Design, b: Design, eps: float = EPS_ID) -> bool:
    """True iff a bijection matches curves by kind and control points within ``eps``.

    Insensitive to curve order and, for circles, to diameter-point order.
    """
    if len(a.curves) != len(b.curves):
        return False
    compatible = [
        [j for j, cb in enumerate(b.curves) if curves_identical(ca, cb, eps)]
        for ca in a.curves
    ]
    matched: list[int | None] = [None] * len(b.curves)

    def augment(i: int, seen: set[int]) -> bool:
        for j in compatible[i]:
            if j in seen:
                continue
            seen.add(j)
            if matched[j] is None or augment(matched[j], seen):
                matched[j] = i
                return True
        return False

    return all(augment(i, set()) for i in range(len(a.curves)))


# ---------------------------------------------------------------------------
# Actions


@dataclass(frozen=True, slots=True)
class MakeCurve:
    curve: Curve


@dataclass(frozen=True, slots=True)
class RemoveCurve:
    curve: Curve


@dataclass(frozen=True, slots=True)
class MoveCurve:
    curve: Curve
    delta: tuple[float, float]


@dataclass(frozen=True, slots=True)
class MovePoint:
    point: Point
    new_point: Point


@dataclass(frozen=True, slots=True)
class DeletePoint:
    point: Point


Action = MakeCurve | RemoveCurve | MoveCurve | MovePoint | DeletePoint

STRICT: Literal["strict"] = "strict"
LENIENT: Literal["lenient"] = "lenient"
ApplyMode = Literal["strict", "lenient"]


def _check_result(curves: Sequence[Curve], bound: float = CANVAS_BOUND) -> Design:
    """Validate an edited curve list and wrap it in a design.

    Geometry violations raise DegenerateResult; off-canvas points raise
    OutOfBounds.
    """
    try:
        design = Design.of(curves)
    except DegenerateCurve as exc:
        raise DegenerateResult(str(exc)) from exc
    for c in design.curves:
        for p in c.control_points:
            if not p.in_bounds(bound):
                raise OutOfBounds(f"point ({p.x}, {p.y}) outside [-{bound}, {bound}]")
    return design


def _find_curve(design: Design, target: Curve) -> int:
    for i, c in enumerate(design.curves):
        if curves_identical(c, target):
            return i
    raise UnresolvedReference(f"no matching {target.kind} in design")


def apply(design: Design, action: Action) -> Design:
    """Apply one edit, returning a new validated design.

    Because control points are shared, moving a point (directly or via
    move_curve) reshapes every curve that references it, and deleting a
    point deletes every curve that references it.
    """
    if isinstance(action, MakeCurve):
        curve = action.curve.validate()
        for existing in design.curves:
            if curves_identical(existing, curve):
                log.warning("make_curve: duplicate %s ignored", curve.kind)
                return design
        return _check_result(design.curves + (curve,))

    if isinstance(action, RemoveCurve):
        i = _find_curve(design, action.curve)
        return _check_result(design.curves[:i] + design.curves[i + 1 :])

    if isinstance(action, MoveCurve):
        dx, dy = action.delta
        if not (math.isfinite(dx) and math.isfinite(dy)):
            raise DegenerateResult("non-finite translation delta")
        i = _find_curve(design, action.curve)
        canon = design._canonical_map()
        moved = {canon[p] for p in design.curves[i].control_points}
        new_curves = tuple(
            Curve(
                c.kind,
                tuple(
                    p.translated(dx, dy) if canon[p] in moved else p
                    for p in c.control_points
                ),
            )
            for c in design.curves
        )
        return _check_result(new_curves)

    if isinstance(action, MovePoint):
        target = canonicalize_point(design, action.point)
        if target is None:
            raise UnresolvedReference(
                f"no control point near ({action.point.x}, {action.point.y})"
            )
        dest = action.new_point
        new_curves = tuple(
            Curve(
                c.kind,
                tuple(dest if p.dist(target) <= EPS_ID else p for p in c.control_points),
            )
            for c in design.curves
        )
        return _check_result(new_curves)

    if isinstance(action, DeletePoint):
        target = canonicalize_point(design, action.point)
        if target is None:
            raise UnresolvedReference(
                f"no control point near ({action.point.x}, {action.point.y})"
            )
        kept = tuple(
            c
            for c in design.curves
            if all(p.dist(target) > EPS_ID for p in c.control_points)
        )
        return _check_result(kept)

    raise TypeError(f"not an action: {action!r}")


def apply_all(
    design: Design, actions: Sequence[Action], mode: ApplyMode = STRICT
) -> tuple[Design, list[int]]:
    """Fold :func:`apply` over ``actions`` left to right.

    Strict mode raises on the first failure (the exception carries
    ``action_index``).  Lenient mode skips failing actions and returns
    their indices.
    """
    skipped: list[int] = []
    current = design
    for i, action in enumerate(actions):
        try:
            current = apply(current, action)
        except CadError as exc:
            if mode == STRICT:
                exc.action_index = i  # type: ignore[attr-defined]
                raise
            skipped.append(i)
    return current, skipped


# ---------------------------------------------------------------------------
# Canonical serialization
#
# Wire formats are fixed: designs are {"curves": [{"type", "control_points"}]}
# and actions are {"name", "arguments"}.  Floats serialize via Python's
# shortest round-trip repr, so dumps are byte-deterministic.


def to_canonical_json(obj: object) -> str:
    return json.dumps(obj, separators=(",", ":"), allow_nan=False)


def point_to_obj(p: Point) -> list[float]:
    return [float(p.x), float(p.y)]


def parse_point(obj: object) -> Point:
    if not isinstance(obj, (list, tuple)) or len(obj) != 2:
        raise ValueError(f"point must be [x, y], got {obj!r}")
    return Point(float(obj[0]), float(obj[1]))


def curve_to_obj(c: Curve) -> dict:
    return {
        "type": c.kind,
        "control_points": [point_to_obj(p) for p in c.control_points],
    }


def parse_curve(obj: dict) -> Curve:
    if not isinstance(obj, dict):
        raise ValueError(f"curve must be an object, got {obj!r}")
    kind = obj.get("type")
    if kind not in _ARITY:
        raise ValueError(f"unknown curve type {kind!r}")
    pts = obj.get("control_points")
    if not isinstance(pts, list):
        raise ValueError("curve is missing control_points")
    return Curve(kind, tuple(parse_point(p) for p in pts))


def design_to_obj(d: Design) -> dict:
    return {"curves": [curve_to_obj(c) for c in d.curves]}


def parse_design(obj: dict, validate: bool = True) -> Design:
    if not isinstance(obj, dict) or not isinstance(obj.get("curves"), list):
        raise ValueError("design must be an object with a 'curves' list")
    design = Design(tuple(parse_curve(c) for c in obj["curves"]))
    return design.validate() if validate else design


_ACTION_NAMES = {
    MakeCurve: "make_curve",
    RemoveCurve: "remove_curve",
    MoveCurve: "move_curve",
    MovePoint: "move_point",
    DeletePoint: "delete_point",
}


def action_to_obj(a: Action) -> dict:
    if isinstance(a, (MakeCurve, RemoveCurve)):
        args = curve_to_obj(a.curve)
    elif isinstance(a, MoveCurve):
        args = curve_to_obj(a.curve)
        args["delta"] = [float(a.delta[0]), float(a.delta[1])]
    elif isinstance(a, MovePoint):
        args = {"point": point_to_obj(a.point), "new_point": point_to_obj(a.new_point)}
    elif isinstance(a, DeletePoint):
        args = {"point": point_to_obj(a.point)}
    else:
        raise TypeError(f"not an action: {a!r}")
    return {"name": _ACTION_NAMES[type(a)], "arguments": args}


def parse_action(obj: dict) -> Action:
    """Parse one action object.  Geometry is not validated; apply() does that."""
    if not isinstance(obj, dict):
        raise ValueError(f"action must be an object, got {obj!r}")
    name = obj.get("name")
    args = obj.get("arguments")
    if not isinstance(args, dict):
        raise ValueError(f"action {name!r} is missing arguments")
    if name == "make_curve":
        return MakeCurve(parse_curve(args))
    if name == "remove_curve":
        return RemoveCurve(parse_curve(args))
    if name == "move_curve":
        delta = args.get("delta")
        if not isinstance(delta, (list, tuple)) or len(delta) != 2:
            raise ValueError("move_curve needs a 2-element delta")
        return MoveCurve(parse_curve(args), (float(delta[0]), float(delta[1])))
    if name == "move_point":
        return MovePoint(parse_point(args.get("point")), parse_point(args.get("new_point")))
    if name == "delete_point":
        return DeletePoint(parse_point(args.get("point")))
    raise ValueError(f"unknown action name {name!r}")


# ---------------------------------------------------------------------------
# Canvas <-> screen mapping (shared by SVG message encoding and rendering)


def canvas_to_screen(x: float, y: float, size: int = 512) -> tuple[float, float]:
    """Map canvas coordinates ([-20, 20], y up) to screen pixels (y down)."""
    scale = size / (2.0 * CANVAS_BOUND)
    return (x + CANVAS_BOUND) * scale, (CANVAS_BOUND - y) * scale


def screen_to_canvas(sx: float, sy: float, size: int = 512) -> tuple[float, float]:
    scale = size / (2.0 * CANVAS_BOUND)
    return sx / scale - CANVAS_BOUND, CANVAS_BOUND - sy / scale
