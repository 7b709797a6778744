"""duocad: a two-player CAD reconstruction game with an agent benchmark.

Designs are curve sets over shared control points; a designer who sees the
target instructs a maker who edits the design, over multiple rounds, until
the reconstruction falls within a chamfer-distance threshold.
"""
from .core import (
    Action,
    ApplyMode,
    CadError,
    Curve,
    DegenerateCurve,
    DegenerateResult,
    DeletePoint,
    Design,
    LENIENT,
    MakeCurve,
    MoveCurve,
    MovePoint,
    OutOfBounds,
    Point,
    RemoveCurve,
    STRICT,
    UnresolvedReference,
    apply,
    apply_all,
    arc,
    canonicalize_point,
    circle,
    design_equal,
    line,
)
from .engine import (
    Dyad,
    Game,
    GameConfig,
    Rollout,
    Round,
    condition_preset,
    dynamic_threshold,
    play,
)
from .harness import EvalItem, baseline_agent, build_benchmark, evaluate, proportional_improvement
from .message import Drawing, Message, Stroke, ablate, message_modality
from .metric import MetricConfig, asym_chamfer, chamfer, is_success
from .render import Bitmap, RenderStyle, Scene, rasterize, scene_to_svg

__version__ = "0.1.0"

__all__ = [
    "Action",
    "ApplyMode",
    "Bitmap",
    "CadError",
    "Curve",
    "DegenerateCurve",
    "DegenerateResult",
    "DeletePoint",
    "Design",
    "Drawing",
    "Dyad",
    "EvalItem",
    "Game",
    "GameConfig",
    "LENIENT",
    "MakeCurve",
    "Message",
    "MetricConfig",
    "MoveCurve",
    "MovePoint",
    "OutOfBounds",
    "Point",
    "RemoveCurve",
    "RenderStyle",
    "Rollout",
    "Round",
    "STRICT",
    "Scene",
    "Stroke",
    "UnresolvedReference",
    "ablate",
    "apply",
    "apply_all",
    "arc",
    "asym_chamfer",
    "baseline_agent",
    "build_benchmark",
    "canonicalize_point",
    "chamfer",
    "circle",
    "condition_preset",
    "design_equal",
    "dynamic_threshold",
    "evaluate",
    "is_success",
    "line",
    "message_modality",
    "play",
    "proportional_improvement",
    "rasterize",
    "scene_to_svg",
]
