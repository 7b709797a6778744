"""Instruction messages: optional text plus an optional freehand drawing.

Drawings are ordered stroke sequences captured as polylines in canvas
coordinates.  They travel on the wire as an SVG fragment restricted to
absolute M/L path commands, which keeps the encoding bit-exact and trivially
invertible.
"""
from __future__ import annotations

import math
import re
from dataclasses import dataclass
from typing import Literal

from .core import CadError, Point, canvas_to_screen, screen_to_canvas

SVG_SIZE = 512


class ParseError(CadError):
    """Malformed SVG path data; ``offset`` is the byte offset into the path string."""

    def __init__(self, message: str, offset: int = 0):
        super().__init__(f"{message} (at offset {offset})")
        self.offset = offset


class UnsupportedCommand(CadError):
    """An SVG path command outside the M/L subset."""


@dataclass(frozen=True, slots=True)
class Stroke:
    points: tuple[Point, ...]

    def __post_init__(self) -> None:
        if len(self.points) < 2:
            raise ValueError("a stroke needs at least 2 points")
        for p in self.points:
            if not p.is_finite():
                raise ValueError("stroke points must be finite")

    def length(self) -> float:
        return math.fsum(
            a.dist(b) for a, b in zip(self.points, self.points[1:])
        )


@dataclass(frozen=True, slots=True)
class Drawing:
    strokes: tuple[Stroke, ...] = ()

    def is_empty(self) -> bool:
        return not self.strokes


@dataclass(frozen=True, slots=True)
class Message:
    text: str = ""
    drawing: Drawing = Drawing()

    def is_empty(self) -> bool:
        return not self.text and self.drawing.is_empty()


AblationMode = Literal["none", "drop_text", "drop_drawing"]
Modality = Literal["text_only", "drawing_only", "multimodal", "empty"]


def message_modality(m: Message) -> Modality:
    has_text = bool(m.text)
    has_drawing = not m.drawing.is_empty()
    if has_text and has_drawing:
        return "multimodal"
    if has_text:
        return "text_only"
    if has_drawing:
        return "drawing_only"
    return "empty"


def ablate(m: Message, mode: AblationMode) -> Message:
    """Drop one channel if present.  The result may be empty; evaluation keeps it."""
    if mode == "none":
        return m
    if mode == "drop_text":
        return Message("", m.drawing)
    if mode == "drop_drawing":
        return Message(m.text, Drawing())
    raise ValueError(f"unknown ablation mode {mode!r}")


def stroke_stats(d: Drawing) -> tuple[int, float]:
    """(stroke count, total ink) where ink is the summed polyline arc length."""
    return len(d.strokes), math.fsum(s.length() for s in d.strokes)


# ---------------------------------------------------------------------------
# SVG subset codec


def _fmt(v: float) -> str:
    return repr(float(v))


def drawing_to_svg(d: Drawing, size: int = SVG_SIZE) -> str:
    """One red M/L path per stroke, in the screen frame of the shared viewBox."""
    paths = []
    for stroke in d.strokes:
        coords = [canvas_to_screen(p.x, p.y, size) for p in stroke.points]
        data = "M " + " L ".join(f"{_fmt(x)} {_fmt(y)}" for x, y in coords)
        paths.append(f'<path d="{data}"/>')
    body = "".join(paths)
    return (
        f'<g stroke="#FF0000" fill="none" stroke-linecap="round" '
        f'stroke-linejoin="round">{body}</g>'
    )


_NUM = re.compile(r"[-+]?(?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?")


def _parse_path_data(data: str, size: int) -> Stroke:
    pos = 0
    points: list[Point] = []
    pending: str | None = None
    n = len(data)
    while pos < n:
        ch = data[pos]
        if ch in " ,\t\r\n":
            pos += 1
            continue
        if ch.isalpha():
            if ch in ("M", "L"):
                if ch == "M" and points:
                    raise UnsupportedCommand(f"multiple subpaths in one stroke (offset {pos})")
                pending = ch
                pos += 1
                continue
            raise UnsupportedCommand(f"unsupported path command {ch!r} (offset {pos})")
        m = _NUM.match(data, pos)
        if not m:
            raise ParseError(f"expected a number, found {ch!r}", pos)
        if pending is None and not points:
            raise ParseError("path data must start with M", pos)
        x = float(m.group())
        pos = m.end()
        m2 = _NUM.match(data, _skip_sep(data, pos))
        if not m2:
            raise ParseError("coordinate pair is missing its y value", pos)
        y = float(m2.group())
        pos = m2.end()
        cx, cy = screen_to_canvas(x, y, size)
        points.append(Point(cx, cy))
        # Repeated pairs continue the polyline, as in the SVG path grammar.
        pending = None
    if len(points) < 2:
        raise ParseError("stroke has fewer than 2 points", n)
    return Stroke(tuple(points))


def _skip_sep(data: str, pos: int) -> int:
    while pos < len(data) and data[pos] in " ,\t\r\n":
        pos += 1
    return pos


_PATH_D = re.compile(r"<path\s[^>]*?d=\"([^\"]*)\"")


def svg_to_drawing(svg: str, size: int = SVG_SIZE) -> Drawing:
    """Inverse of :func:`drawing_to_svg` on the emitted M/L subset."""
    strokes = tuple(_parse_path_data(m.group(1), size) for m in _PATH_D.finditer(svg))
    return Drawing(strokes)


# ---------------------------------------------------------------------------
# Record serialization


def message_to_obj(m: Message) -> dict:
    return {
        "text": m.text,
        "strokes": [
            [[float(p.x), float(p.y)] for p in s.points] for s in m.drawing.strokes
        ],
    }


def parse_message(obj: dict) -> Message:
    if not isinstance(obj, dict):
        raise ValueError(f"message must be an object, got {obj!r}")
    text = obj.get("text", "")
    if not isinstance(text, str):
        raise ValueError("message text must be a string")
    strokes_obj = obj.get("strokes", [])
    if not isinstance(strokes_obj, list):
        raise ValueError("message strokes must be a list")
    strokes = tuple(
        Stroke(tuple(Point(float(x), float(y)) for x, y in pts)) for pts in strokes_obj
    )
    return Message(text, Drawing(strokes))
