"""Deterministic rendering of designs and drawing overlays.

Scenes map the canvas square ([-20, 20] each axis, y up) onto a fixed
viewBox with the y axis flipped, emit curves as black SVG elements and
overlay strokes as red paths, and can rasterize to an RGB bitmap.  Output is
byte-deterministic: curves render in sorted order and floats use their
shortest round-trip representation.
"""
from __future__ import annotations

import io
import math
from dataclasses import dataclass
from typing import TYPE_CHECKING, Sequence

from PIL import Image, ImageDraw

from .core import ARC, CIRCLE, LINE, CANVAS_BOUND, Curve, Design, canvas_to_screen
from .message import Drawing, drawing_to_svg
from .metric import arc_params, circle_params

if TYPE_CHECKING:
    from .engine import Round


@dataclass(frozen=True)
class RenderStyle:
    size: int = 512
    design_width: float = 3.0
    overlay_width: float = 3.0
    design_color: str = "#000000"
    overlay_color: str = "#FF0000"
    background: str = "#FFFFFF"

    def __post_init__(self) -> None:
        if self.size < 1:
            raise ValueError("raster size must be positive")
        if self.design_width <= 0 or self.overlay_width <= 0:
            raise ValueError("stroke widths must be positive")


DEFAULT_STYLE = RenderStyle()


@dataclass(frozen=True)
class Scene:
    design: Design
    overlay: Drawing = Drawing()
    style: RenderStyle = DEFAULT_STYLE


@dataclass(frozen=True)
class Bitmap:
    width: int
    height: int
    pixels: bytes  # row-major RGB

    def pixel(self, x: int, y: int) -> tuple[int, int, int]:
        i = 3 * (y * self.width + x)
        return self.pixels[i], self.pixels[i + 1], self.pixels[i + 2]


def _fmt(v: float) -> str:
    return repr(float(v))


def _curve_svg(curve: Curve, size: int) -> str:
    if curve.kind == LINE:
        a, b = curve.control_points
        x1, y1 = canvas_to_screen(a.x, a.y, size)
        x2, y2 = canvas_to_screen(b.x, b.y, size)
        return (
            f'<line x1="{_fmt(x1)}" y1="{_fmt(y1)}" '
            f'x2="{_fmt(x2)}" y2="{_fmt(y2)}"/>'
        )
    scale = size / (2.0 * CANVAS_BOUND)
    if curve.kind == CIRCLE:
        center, radius = circle_params(curve)
        cx, cy = canvas_to_screen(center.x, center.y, size)
        return f'<circle cx="{_fmt(cx)}" cy="{_fmt(cy)}" r="{_fmt(radius * scale)}"/>'
    params = arc_params(curve)
    start, _, end = curve.control_points
    x1, y1 = canvas_to_screen(start.x, start.y, size)
    x2, y2 = canvas_to_screen(end.x, end.y, size)
    r = _fmt(params.radius * scale)
    large = 1 if params.sweep > math.pi else 0
    # The y flip reverses the angular direction, so a counterclockwise canvas
    # arc sweeps in the negative-angle direction on screen.
    sweep = 0 if params.ccw else 1
    return (
        f'<path d="M {_fmt(x1)} {_fmt(y1)} '
        f'A {r} {r} 0 {large} {sweep} {_fmt(x2)} {_fmt(y2)}"/>'
    )


def scene_to_svg(scene: Scene) -> str:
    """Canonical SVG document for a design with an optional stroke overlay."""
    st = scene.style
    size = st.size
    curves = "".join(_curve_svg(c.validate(), size) for c in sorted(scene.design.curves))
    overlay = drawing_to_svg(scene.overlay, size)
    return (
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{size}" height="{size}" '
        f'viewBox="0 0 {size} {size}">'
        f'<rect width="{size}" height="{size}" fill="{st.background}"/>'
        f'<g stroke="{st.design_color}" fill="none" stroke-width="{_fmt(st.design_width)}" '
        f'stroke-linecap="round">{curves}</g>'
        f'<g stroke-width="{_fmt(st.overlay_width)}">{overlay}</g>'
        f"</svg>"
    )


def _curve_polyline(curve: Curve, width: int, height: int) -> list[tuple[float, float]]:
    """Dense pixel-space polyline approximation used by the rasterizer."""

    def to_px(x: float, y: float) -> tuple[float, float]:
        return (
            (x + CANVAS_BOUND) / (2.0 * CANVAS_BOUND) * width,
            (CANVAS_BOUND - y) / (2.0 * CANVAS_BOUND) * height,
        )

    if curve.kind == LINE:
        a, b = curve.control_points
        return [to_px(a.x, a.y), to_px(b.x, b.y)]
    if curve.kind == CIRCLE:
        center, radius = circle_params(curve)
        n = _arc_segments(radius, 2.0 * math.pi, width)
        return [
            to_px(
                center.x + radius * math.cos(2.0 * math.pi * k / n),
                center.y + radius * math.sin(2.0 * math.pi * k / n),
            )
            for k in range(n + 1)
        ]
    params = arc_params(curve)
    n = _arc_segments(params.radius, params.sweep, width)
    pts = []
    for k in range(n + 1):
        t = k / n
        theta = params.start_angle * (1.0 - t) + params.end_angle * t
        pts.append(
            to_px(
                params.center.x + params.radius * math.cos(theta),
                params.center.y + params.radius * math.sin(theta),
            )
        )
    return pts


def _arc_segments(radius: float, sweep: float, raster_width: int) -> int:
    px_len = abs(sweep) * radius * raster_width / (2.0 * CANVAS_BOUND)
    return max(8, min(1024, int(px_len)))


def rasterize(scene: Scene, width: int | None = None, height: int | None = None) -> Bitmap:
    """Rasterize a scene onto a white background.  Deterministic per config."""
    st = scene.style
    width = st.size if width is None else width
    height = st.size if height is None else height
    img = Image.new("RGB", (width, height), st.background)
    draw = ImageDraw.Draw(img)
    design_w = max(1, round(st.design_width * width / st.size))
    overlay_w = max(1, round(st.overlay_width * width / st.size))
    for curve in sorted(scene.design.curves):
        pts = _curve_polyline(curve.validate(), width, height)
        draw.line(pts, fill=st.design_color, width=design_w, joint="curve")
    for stroke in scene.overlay.strokes:
        pts = [
            (
                (p.x + CANVAS_BOUND) / (2.0 * CANVAS_BOUND) * width,
                (CANVAS_BOUND - p.y) / (2.0 * CANVAS_BOUND) * height,
            )
            for p in stroke.points
        ]
        draw.line(pts, fill=st.overlay_color, width=overlay_w, joint="curve")
    return Bitmap(width, height, img.tobytes("raw", "RGB"))


def png_bytes(bitmap: Bitmap) -> bytes:
    img = Image.frombytes("RGB", (bitmap.width, bitmap.height), bitmap.pixels)
    buf = io.BytesIO()
    img.save(buf, format="PNG")
    return buf.getvalue()


def save_png(bitmap: Bitmap, path: str) -> None:
    with open(path, "wb") as fh:
        fh.write(png_bytes(bitmap))


# ---------------------------------------------------------------------------
# Interaction history


@dataclass(frozen=True)
class HistoryPanel:
    """One round of context: the state the instruction annotated, and the result."""

    text: str
    before_svg: str
    after_svg: str


def render_history(rounds: Sequence["Round"], style: RenderStyle = DEFAULT_STYLE) -> list[HistoryPanel]:
    """Per-round panels, oldest first: design-with-overlay, resulting design, text."""
    panels = []
    for r in rounds:
        panels.append(
            HistoryPanel(
                text=r.message.text,
                before_svg=scene_to_svg(Scene(r.design_before, r.message.drawing, style)),
                after_svg=scene_to_svg(Scene(r.design_after, Drawing(), style)),
            )
        )
    return panels
