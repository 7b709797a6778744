"""Built-in targets for practice sessions, demos, and tests."""
from __future__ import annotations

from .core import Design, Point, arc, circle, line


def smiley_face() -> Design:
    """The practice target: face outline, two eyes, and a smile arc."""
    return Design.of(
        [
            circle(Point(0.0, -12.0), Point(0.0, 12.0)),
            circle(Point(-6.0, 3.0), Point(-3.0, 3.0)),
            circle(Point(3.0, 3.0), Point(6.0, 3.0)),
            arc(Point(-6.0, -3.0), Point(0.0, -8.0), Point(6.0, -3.0)),
        ]
    )


def simple_shapes() -> Design:
    """Solo warm-up target: one line, one circle, one arc."""
    return Design.of(
        [
            line(Point(-15.0, -15.0), Point(15.0, -15.0)),
            circle(Point(-10.0, 5.0), Point(-2.0, 5.0)),
            arc(Point(2.0, 5.0), Point(7.0, 10.0), Point(12.0, 5.0)),
        ]
    )


FIXTURES = {
    "smiley_face": smiley_face,
    "simple_shapes": simple_shapes,
}


def fixture(name: str) -> Design:
    try:
        return FIXTURES[name]()
    except KeyError:
        raise ValueError(f"unknown fixture {name!r}") from None
