"""Shared seeded generators for designs, curves, and action sequences."""
from __future__ import annotations

import math
import random

import pytest

from duocad.core import (
    ARC,
    CIRCLE,
    LINE,
    Action,
    CadError,
    Curve,
    DeletePoint,
    Design,
    MakeCurve,
    MoveCurve,
    MovePoint,
    Point,
    RemoveCurve,
    STRICT,
    apply,
    curves_identical,
)


def random_point(rng: random.Random, bound: float = 16.0) -> Point:
    return Point(rng.uniform(-bound, bound), rng.uniform(-bound, bound))


def random_line(rng: random.Random, bound: float = 16.0, max_len: float = 18.0) -> Curve:
    while True:
        a = random_point(rng, bound)
        b = random_point(rng, bound)
        if 1.0 <= a.dist(b) <= max_len:
            return Curve(LINE, (a, b))


def random_circle(rng: random.Random, bound: float = 12.0, max_radius: float = 5.0) -> Curve:
    center = random_point(rng, bound - max_radius)
    radius = rng.uniform(0.8, max_radius)
    theta = rng.uniform(0.0, 2.0 * math.pi)
    a = Point(center.x + radius * math.cos(theta), center.y + radius * math.sin(theta))
    b = Point(center.x - radius * math.cos(theta), center.y - radius * math.sin(theta))
    return Curve(CIRCLE, (a, b))


def random_arc(rng: random.Random, bound: float = 12.0, max_radius: float = 5.0) -> Curve:
    center = random_point(rng, bound - max_radius)
    radius = rng.uniform(1.0, max_radius)
    start = rng.uniform(0.0, 2.0 * math.pi)
    span = rng.uniform(0.6, 4.5) * rng.choice([-1.0, 1.0])

    def at(theta: float) -> Point:
        return Point(center.x + radius * math.cos(theta), center.y + radius * math.sin(theta))

    return Curve(ARC, (at(start), at(start + span / 2.0), at(start + span)))


def random_curve(rng: random.Random, bound: float = 12.0) -> Curve:
    kind = rng.choice([LINE, CIRCLE, ARC])
    if kind == LINE:
        return random_line(rng, bound)
    if kind == CIRCLE:
        return random_circle(rng, bound)
    return random_arc(rng, bound)


def random_design(rng: random.Random, max_curves: int = 5, min_curves: int = 1) -> Design:
    n = rng.randint(min_curves, max_curves)
    curves: list[Curve] = []
    while len(curves) < n:
        c = random_curve(rng)
        if any(curves_identical(c, other) for other in curves):
            continue
        curves.append(c)
    return Design.of(curves)


def random_valid_actions(
    rng: random.Random, design: Design, length: int = 6
) -> tuple[list[Action], Design]:
    """A sequence of ``length`` actions that applies cleanly in strict mode."""
    actions: list[Action] = []
    current = design
    while len(actions) < length:
        action = _candidate_action(rng, current)
        try:
            current = apply(current, action)
        except CadError:
            continue
        actions.append(action)
    return actions, current


def _candidate_action(rng: random.Random, design: Design) -> Action:
    roll = rng.random()
    if design.is_empty() or roll < 0.35:
        return MakeCurve(random_curve(rng))
    if roll < 0.5:
        return RemoveCurve(rng.choice(design.curves))
    if roll < 0.65:
        delta = (rng.uniform(-2.0, 2.0), rng.uniform(-2.0, 2.0))
        return MoveCurve(rng.choice(design.curves), delta)
    points = design.control_points()
    p = points[rng.randrange(len(points))]
    if roll < 0.9:
        return MovePoint(p, Point(p.x + rng.uniform(-2.0, 2.0), p.y + rng.uniform(-2.0, 2.0)))
    return DeletePoint(p)


@pytest.fixture
def rng() -> random.Random:
    return random.Random(20240601)
