"""Dataset pipeline: record files, import normalization, splits, and statistics.

Record files are newline-delimited canonical rollout records.  Import
normalizes source designs onto an integer grid for duplicate detection,
buckets them by a curve-type signature, and rescales them for play subject
to minimum-gap rules.  Splits group designs by how many rollouts
reconstructed them successfully.
"""
from __future__ import annotations

import csv
import hashlib
import io
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Iterator, Sequence

import json

from .core import (
    ARC,
    CIRCLE,
    LINE,
    CadError,
    Curve,
    Design,
    Point,
    curve_to_obj,
    design_equal,
    design_to_obj,
    to_canonical_json,
)
from .engine import Rollout, parse_rollout, rollout_to_json
from .message import message_modality, stroke_stats
from .metric import DEFAULT_METRIC, MetricConfig, chamfer, circle_params, arc_params

# Success rule shared by splits, benchmark selection, and the analysis filter.
SUCCESS_THRESHOLD = 0.2

DEFAULT_ANGLE_TOL = math.radians(0.5)
DEFAULT_MIN_GAP = 1.0


class DegenerateBoundingBox(CadError):
    """Design has no spatial extent to normalize."""


class MinGapViolation(CadError):
    """Rescaled design has elements closer than the minimum gap."""

    def __init__(self, reason: str, pair: tuple[object, object]):
        super().__init__(reason)
        self.pair = pair


# ---------------------------------------------------------------------------
# Record IO


def iter_records(path: str | Path) -> Iterator[Rollout]:
    with open(path, "r", encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                yield parse_rollout(json.loads(line))
            except (ValueError, KeyError) as exc:
                raise ValueError(f"{path}:{line_no}: bad record: {exc}") from exc


def load_records(path: str | Path) -> list[Rollout]:
    return list(iter_records(path))


def save_records(path: str | Path, rollouts: Iterable[Rollout]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for r in rollouts:
            fh.write(rollout_to_json(r))
            fh.write("\n")


# ---------------------------------------------------------------------------
# Signatures


@dataclass(frozen=True)
class Signature:
    h_lines: int = 0
    v_lines: int = 0
    skew_lines: int = 0
    arcs: int = 0
    circles: int = 0

    def total(self) -> int:
        return self.h_lines + self.v_lines + self.skew_lines + self.arcs + self.circles

    def as_tuple(self) -> tuple[int, int, int, int, int]:
        return (self.h_lines, self.v_lines, self.skew_lines, self.arcs, self.circles)


def signature(design: Design, angle_tol: float = DEFAULT_ANGLE_TOL) -> Signature:
    """Bucket key: counts of horizontal/vertical/skewed lines, arcs, circles."""
    h = v = s = arcs = circles = 0
    slope = math.tan(angle_tol)
    for c in design.curves:
        if c.kind == CIRCLE:
            circles += 1
        elif c.kind == ARC:
            arcs += 1
        else:
            a, b = c.control_points
            dx, dy = abs(b.x - a.x), abs(b.y - a.y)
            if dy <= slope * dx:
                h += 1
            elif dx <= slope * dy:
                v += 1
            else:
                s += 1
    return Signature(h, v, s, arcs, circles)


# ---------------------------------------------------------------------------
# Normalization and identity


def normalize_to_grid(design: Design) -> Design:
    """Canonical dedup form: scale/translate the bounding box into a centered
    20-unit square and snap control points to the integer grid.

    The result is for identity only, never for play: snapping may collapse
    short curves, and exact duplicates created by snapping are dropped.
    """
    pts = [p for c in design.curves for p in c.control_points]
    if not pts:
        return Design()
    min_x, max_x = min(p.x for p in pts), max(p.x for p in pts)
    min_y, max_y = min(p.y for p in pts), max(p.y for p in pts)
    extent = max(max_x - min_x, max_y - min_y)
    if extent <= 0:
        raise DegenerateBoundingBox("design has a single-point bounding box")
    scale = 20.0 / extent
    cx, cy = (min_x + max_x) / 2.0, (min_y + max_y) / 2.0

    def snap(p: Point) -> Point:
        return Point(float(round((p.x - cx) * scale)), float(round((p.y - cy) * scale)))

    curves = []
    for c in design.curves:
        points = tuple(snap(p) for p in c.control_points)
        if c.kind == CIRCLE and (points[1].x, points[1].y) < (points[0].x, points[0].y):
            points = (points[1], points[0])
        curves.append(Curve(c.kind, points))
    unique: list[Curve] = []
    for c in sorted(curves):
        if not unique or unique[-1] != c:
            unique.append(c)
    return Design(tuple(unique))


def design_id(design: Design) -> str:
    """Stable identity of a design: hash of its normalized canonical form."""
    normalized = normalize_to_grid(design)
    payload = to_canonical_json([curve_to_obj(c) for c in normalized.curves])
    return hashlib.sha1(payload.encode("ascii")).hexdigest()[:16]


# ---------------------------------------------------------------------------
# Rescaling for play


def _line_direction(c: Curve) -> tuple[float, float]:
    a, b = c.control_points
    dx, dy = b.x - a.x, b.y - a.y
    n = math.hypot(dx, dy)
    return dx / n, dy / n


def rescale_for_play(
    design: Design,
    scale: float,
    min_gap: float = DEFAULT_MIN_GAP,
    angle_tol: float = DEFAULT_ANGLE_TOL,
    bound: float = 20.0,
) -> Design:
    """Uniformly rescale a design and enforce construction-interface gaps.

    Rejects (MinGapViolation) when any two distinct control points, any two
    parallel lines, or any two near-concentric circles/arcs end up closer
    than ``min_gap``, or when the scaled design leaves the canvas.
    """
    if scale <= 0:
        raise ValueError("scale must be positive")
    scaled = Design.of(
        Curve(c.kind, tuple(Point(p.x * scale, p.y * scale) for p in c.control_points))
        for c in design.curves
    )
    for p in (p for c in scaled.curves for p in c.control_points):
        if not p.in_bounds(bound):
            raise MinGapViolation(
                f"scaled point ({p.x}, {p.y}) leaves the canvas", (p, None)
            )
    points = scaled.control_points()
    for i, p in enumerate(points):
        for q in points[i + 1 :]:
            if p.dist(q) < min_gap:
                raise MinGapViolation(
                    f"control points ({p.x}, {p.y}) and ({q.x}, {q.y}) are "
                    f"{p.dist(q):.3g} apart (< {min_gap})",
                    (p, q),
                )
    lines = [c for c in scaled.curves if c.kind == LINE]
    for i, a in enumerate(lines):
        da = _line_direction(a)
        ax, ay = a.control_points[0].x, a.control_points[0].y
        for b in lines[i + 1 :]:
            db = _line_direction(b)
            cross = abs(da[0] * db[1] - da[1] * db[0])
            if cross > math.sin(angle_tol):
                continue
            bx, by = b.control_points[0].x, b.control_points[0].y
            sep = abs((bx - ax) * da[1] - (by - ay) * da[0])
            if sep < min_gap:
                raise MinGapViolation(
                    f"parallel lines {sep:.3g} apart (< {min_gap})", (a, b)
                )
    circular = [
        (c,) + (circle_params(c) if c.kind == CIRCLE else _arc_circle(c))
        for c in scaled.curves
        if c.kind in (CIRCLE, ARC)
    ]
    for i, (a, ca, ra) in enumerate(circular):
        for b, cb, rb in circular[i + 1 :]:
            if ca.dist(cb) < min_gap and abs(ra - rb) < min_gap:
                raise MinGapViolation(
                    f"concentric {a.kind} and {b.kind} radii differ by "
                    f"{abs(ra - rb):.3g} (< {min_gap})",
                    (a, b),
                )
    return scaled


def _arc_circle(c: Curve) -> tuple[Point, float]:
    params = arc_params(c)
    return params.center, params.radius


# ---------------------------------------------------------------------------
# Exclusion filtering


@dataclass(frozen=True)
class Excluded:
    rollout: Rollout
    reason: str  # "missing_rounds" | "no_actions" | "empty_message" | "above_threshold"


def exclusion_filter(
    records: Sequence[Rollout],
    inclusion_threshold: float | None = SUCCESS_THRESHOLD,
    metric: MetricConfig = DEFAULT_METRIC,
) -> tuple[list[Rollout], list[Excluded]]:
    """Partition records into analysis-ready and excluded-with-reason."""
    kept: list[Rollout] = []
    excluded: list[Excluded] = []
    for r in records:
        reason = _exclusion_reason(r, inclusion_threshold, metric)
        if reason is None:
            kept.append(r)
        else:
            excluded.append(Excluded(r, reason))
    return kept, excluded


def _chain_broken(r: Rollout) -> bool:
    if not r.rounds or not r.rounds[0].design_before.is_empty():
        return True
    return any(
        not design_equal(r.rounds[i - 1].design_after, r.rounds[i].design_before, 0.0)
        for i in range(1, len(r.rounds))
    )


def _exclusion_reason(
    r: Rollout, inclusion_threshold: float | None, metric: MetricConfig
) -> str | None:
    if _chain_broken(r):
        return "missing_rounds"
    if all(not rnd.actions for rnd in r.rounds):
        return "no_actions"
    if any(rnd.message.is_empty() for rnd in r.rounds):
        return "empty_message"
    if inclusion_threshold is not None:
        if chamfer(r.final_design(), r.target, metric) >= inclusion_threshold:
            return "above_threshold"
    return None


# ---------------------------------------------------------------------------
# Splits


@dataclass(frozen=True)
class SplitSpec:
    coverage_max: int = 2  # 1..coverage_max successes
    dense_min: int = 3
    very_dense_min: int = 30
    eval_min: int = 3  # benchmark selection rule


@dataclass(frozen=True)
class DesignSplit:
    design_id: str
    split: str  # "coverage" | "dense" | "very_dense"
    successes: int
    in_eval: bool


def rollout_succeeded(r: Rollout, metric: MetricConfig = DEFAULT_METRIC) -> bool:
    return chamfer(r.final_design(), r.target, metric) < SUCCESS_THRESHOLD


def build_splits(
    records: Sequence[Rollout],
    spec: SplitSpec = SplitSpec(),
    metric: MetricConfig = DEFAULT_METRIC,
) -> list[DesignSplit]:
    """Assign each design (with >= 1 successful rollout) to exactly one split.

    Success counts between coverage_max and very_dense_min land in the dense
    set; the eval flag marks designs meeting the benchmark selection rule.
    """
    successes: dict[str, int] = {}
    for r in records:
        did = design_id(r.target)
        successes.setdefault(did, 0)
        if rollout_succeeded(r, metric):
            successes[did] += 1
    out = []
    for did in sorted(successes):
        n = successes[did]
        if n < 1:
            continue
        if n >= spec.very_dense_min:
            split = "very_dense"
        elif n > spec.coverage_max:
            split = "dense"
        else:
            split = "coverage"
        out.append(DesignSplit(did, split, n, n >= spec.eval_min))
    return out


def splits_to_manifest(splits: Sequence[DesignSplit]) -> str:
    lines = [
        to_canonical_json(
            {
                "design_id": s.design_id,
                "split": s.split,
                "successes": s.successes,
                "eval": s.in_eval,
            }
        )
        for s in splits
    ]
    return "\n".join(lines) + ("\n" if lines else "")


# ---------------------------------------------------------------------------
# Per-round statistics


@dataclass(frozen=True)
class RoundStats:
    group: str  # "round_1", "round_2", ... or "generation" / "refinement"
    n: int
    text_only: int
    drawing_only: int
    multimodal: int
    empty: int
    mean_strokes: float
    mean_ink: float
    mean_text_len: float
    mean_distance_after: float


def _aggregate(group: str, rows: list[tuple[str, int, float, int, float]]) -> RoundStats:
    n = len(rows)
    counts = {"text_only": 0, "drawing_only": 0, "multimodal": 0, "empty": 0}
    for modality, _, _, _, _ in rows:
        counts[modality] += 1
    return RoundStats(
        group=group,
        n=n,
        text_only=counts["text_only"],
        drawing_only=counts["drawing_only"],
        multimodal=counts["multimodal"],
        empty=counts["empty"],
        mean_strokes=math.fsum(r[1] for r in rows) / n,
        mean_ink=math.fsum(r[2] for r in rows) / n,
        mean_text_len=math.fsum(r[3] for r in rows) / n,
        mean_distance_after=math.fsum(r[4] for r in rows) / n,
    )


def round_stats(
    records: Sequence[Rollout], metric: MetricConfig = DEFAULT_METRIC
) -> list[RoundStats]:
    """Message and accuracy statistics per round index, then grouped
    generation (round 1) vs refinement (rounds 2+)."""
    per_index: dict[int, list] = {}
    for r in records:
        for i, rnd in enumerate(r.rounds, start=1):
            strokes, ink = stroke_stats(rnd.message.drawing)
            row = (
                message_modality(rnd.message),
                strokes,
                ink,
                len(rnd.message.text),
                chamfer(rnd.design_after, r.target, metric),
            )
            per_index.setdefault(i, []).append(row)
    out = [_aggregate(f"round_{i}", per_index[i]) for i in sorted(per_index)]
    generation = per_index.get(1, [])
    refinement = [row for i, rows in per_index.items() if i > 1 for row in rows]
    if generation:
        out.append(_aggregate("generation", generation))
    if refinement:
        out.append(_aggregate("refinement", refinement))
    return out


def stats_to_csv(rows: Sequence[RoundStats]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(
        [
            "group",
            "n",
            "text_only",
            "drawing_only",
            "multimodal",
            "empty",
            "mean_strokes",
            "mean_ink",
            "mean_text_len",
            "mean_distance_after",
        ]
    )
    for r in rows:
        writer.writerow(
            [
                r.group,
                r.n,
                r.text_only,
                r.drawing_only,
                r.multimodal,
                r.empty,
                f"{r.mean_strokes:.6g}",
                f"{r.mean_ink:.6g}",
                f"{r.mean_text_len:.6g}",
                f"{r.mean_distance_after:.6g}",
            ]
        )
    return buf.getvalue()


# ---------------------------------------------------------------------------
# Import pipeline


@dataclass(frozen=True)
class ImportResult:
    accepted: list[Design]
    rejected: list[tuple[int, str]]  # (input index, reason)


def import_designs(
    designs: Sequence[Design],
    rescale: float | None = None,
    min_gap: float = DEFAULT_MIN_GAP,
    one_per_bucket: bool = True,
) -> ImportResult:
    """Dedup by normalized identity, optionally keep one design per signature
    bucket, and rescale with gap checks when requested."""
    accepted: list[Design] = []
    rejected: list[tuple[int, str]] = []
    seen_ids: set[str] = set()
    seen_buckets: set[tuple[int, ...]] = set()
    for i, d in enumerate(designs):
        try:
            did = design_id(d)
        except DegenerateBoundingBox as exc:
            rejected.append((i, str(exc)))
            continue
        if did in seen_ids:
            rejected.append((i, "duplicate design"))
            continue
        bucket = signature(d).as_tuple()
        if one_per_bucket and bucket in seen_buckets:
            rejected.append((i, f"signature bucket {bucket} already filled"))
            continue
        out = d
        if rescale is not None:
            try:
                out = rescale_for_play(d, rescale, min_gap)
            except (MinGapViolation, CadError) as exc:
                rejected.append((i, str(exc)))
                continue
        seen_ids.add(did)
        seen_buckets.add(bucket)
        accepted.append(out)
    return ImportResult(accepted, rejected)


@dataclass(frozen=True)
class DatasetRecord:
    rollout: Rollout
    design_id: str
    split: str | None = None


def annotate_records(
    records: Sequence[Rollout], splits: Sequence[DesignSplit] | None = None
) -> list[DatasetRecord]:
    by_id = {s.design_id: s.split for s in splits} if splits else {}
    out = []
    for r in records:
        did = design_id(r.target)
        out.append(DatasetRecord(r, did, by_id.get(did)))
    return out


def load_designs(path: str | Path) -> list[Design]:
    """Read newline-delimited design objects (unvalidated, for import tooling)."""
    from .core import parse_design

    out = []
    with open(path, "r", encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                out.append(parse_design(json.loads(line), validate=False))
            except ValueError as exc:
                raise ValueError(f"{path}:{line_no}: bad design: {exc}") from exc
    return out


def save_designs(path: str | Path, designs: Iterable[Design]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for d in designs:
            fh.write(to_canonical_json(design_to_obj(d)))
            fh.write("\n")
