"""Two-player game state machine.

A game pairs a designer (who sees the target only as a render) with a maker
(who edits the design and never sees the target).  Each round appends a
(design, message, actions, new design) tuple; the game ends by submission
under the dynamic threshold, by round limit, or by running out the shared
clock.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Protocol, Sequence

from .core import (
    Action,
    CadError,
    Design,
    LENIENT,
    action_to_obj,
    apply_all,
    design_equal,
    design_to_obj,
    parse_action,
    parse_design,
    to_canonical_json,
)
from .message import Message, message_modality, message_to_obj, parse_message
from .metric import DEFAULT_METRIC, MetricConfig, chamfer
from .render import DEFAULT_STYLE, HistoryPanel, RenderStyle, Scene, render_history, scene_to_svg


class EngineError(CadError):
    pass


class ModalityViolation(EngineError):
    """Message uses a channel the condition forbids, or exceeds the char limit."""


class RoundLimitExceeded(EngineError):
    pass


class TimeExhausted(EngineError):
    pass


class EmptyMessage(EngineError):
    pass


class UnknownPreset(EngineError):
    pass


class AgentError(EngineError):
    """An agent raised during play; ``round_index`` is 1-based."""

    def __init__(self, role: str, round_index: int, cause: BaseException):
        super().__init__(f"{role} agent failed at round {round_index}: {cause}")
        self.role = role
        self.round_index = round_index
        self.cause = cause


@dataclass(frozen=True)
class GameConfig:
    max_rounds: int = 10
    total_time: float | None = 540.0
    win_threshold: float = 0.2
    # Per-round submission thresholds; None selects the default linear ramp.
    submission_schedule: tuple[float, ...] | None = None
    lives: int = 3
    modality: str = "multimodal"  # "multimodal" | "text_only" | "drawing_only"
    char_limit: int | None = None
    designer_time: float | None = None
    maker_time: float | None = None
    designer_time_multiplier: float = 1.0
    reveal_distance: bool = True
    metric: MetricConfig = DEFAULT_METRIC

    def __post_init__(self) -> None:
        if self.max_rounds < 1:
            raise ValueError("max_rounds must be >= 1")
        if self.modality not in ("multimodal", "text_only", "drawing_only"):
            raise ValueError(f"unknown modality {self.modality!r}")
        if self.submission_schedule is not None:
            sched = tuple(self.submission_schedule)
            if len(sched) != self.max_rounds:
                raise ValueError("submission_schedule must have one entry per round")
            if any(b < a for a, b in zip(sched, sched[1:])):
                raise ValueError("submission_schedule must be nondecreasing")


# First-round threshold of the default linear submission ramp.
DEFAULT_SCHEDULE_START = 0.05


def dynamic_threshold(cfg: GameConfig, round_index: int) -> float:
    """Submission threshold for 1-based ``round_index``: strict early, permissive late."""
    if not 1 <= round_index <= cfg.max_rounds:
        raise ValueError(f"round index {round_index} outside 1..{cfg.max_rounds}")
    if cfg.submission_schedule is not None:
        return cfg.submission_schedule[round_index - 1]
    if cfg.max_rounds == 1:
        return cfg.win_threshold
    t = (round_index - 1) / (cfg.max_rounds - 1)
    return DEFAULT_SCHEDULE_START + t * (cfg.win_threshold - DEFAULT_SCHEDULE_START)


@dataclass(frozen=True)
class Round:
    design_before: Design
    message: Message
    actions: tuple[Action, ...]
    design_after: Design
    duration: float | None = None


@dataclass(frozen=True)
class Rollout:
    target: Design
    rounds: tuple[Round, ...]
    outcome: str  # "won" | "lost" | "excluded"
    meta: dict = field(default_factory=dict)

    def final_design(self) -> Design:
        return self.rounds[-1].design_after if self.rounds else Design()


class DesignerAgent(Protocol):
    def produce_message(
        self, target_render: str, current_render: str, history: Sequence[HistoryPanel]
    ) -> Message: ...


class MakerAgent(Protocol):
    def propose_actions(
        self, message: Message, current: Design, history: Sequence[Round]
    ) -> Sequence[Action]: ...


@dataclass(frozen=True)
class StepResult:
    round: Round
    distance: float
    submittable: bool
    skipped: tuple[int, ...]


class Dyad:
    """Lives bookkeeping for one designer-maker pair across a series of games."""

    def __init__(self, dyad_id: str = "", lives: int = 3):
        self.dyad_id = dyad_id
        self.lives = lives

    @property
    def ejected(self) -> bool:
        return self.lives <= 0

    def record_loss(self) -> None:
        self.lives -= 1


class Game:
    """Single-owner state machine for one rollout in progress.

    All mutation flows through :meth:`step` and :meth:`finalize`; distinct
    games never share state.  The clock is advisory: with ``clock=None`` the
    game is untimed, which is the mode unit tests use.
    """

    def __init__(
        self,
        target: Design,
        cfg: GameConfig = GameConfig(),
        clock: Callable[[], float] | None = None,
        meta: dict | None = None,
    ):
        self.target = target.validate()
        self.cfg = cfg
        self.clock = clock
        self.meta = dict(meta or {})
        self.rounds: list[Round] = []
        self.distances: list[float] = []
        self.finished = False
        self.outcome: str | None = None
        self._started = clock() if clock else None

    @property
    def current(self) -> Design:
        return self.rounds[-1].design_after if self.rounds else Design()

    @property
    def round_count(self) -> int:
        return len(self.rounds)

    @property
    def last_distance(self) -> float:
        if self.distances:
            return self.distances[-1]
        return chamfer(Design(), self.target, self.cfg.metric)

    def has_nonempty_actions(self) -> bool:
        return any(r.actions for r in self.rounds)

    def elapsed(self) -> float:
        if self.clock is None or self._started is None:
            return 0.0
        return self.clock() - self._started

    def check_time(self) -> None:
        if self.cfg.total_time is not None and self.elapsed() > self.cfg.total_time:
            raise TimeExhausted(f"time budget {self.cfg.total_time}s exhausted")

    def validate_message(self, message: Message) -> None:
        modality = message_modality(message)
        if modality == "empty":
            raise EmptyMessage("message has neither text nor drawing")
        if self.cfg.modality == "text_only" and not message.drawing.is_empty():
            raise ModalityViolation("this condition forbids drawing")
        if self.cfg.modality == "drawing_only" and message.text:
            raise ModalityViolation("this condition forbids text")
        if self.cfg.char_limit is not None and len(message.text) > self.cfg.char_limit:
            raise ModalityViolation(
                f"text exceeds the {self.cfg.char_limit} character limit"
            )

    def step(
        self, message: Message, actions: Sequence[Action], duration: float | None = None
    ) -> StepResult:
        """Append one round: apply the actions leniently and score the result."""
        if self.finished:
            raise EngineError("game already finished")
        if self.round_count >= self.cfg.max_rounds:
            raise RoundLimitExceeded(f"round limit {self.cfg.max_rounds} reached")
        self.check_time()
        self.validate_message(message)
        before = self.current
        after, skipped = apply_all(before, list(actions), LENIENT)
        rnd = Round(before, message, tuple(actions), after, duration)
        self.rounds.append(rnd)
        distance = chamfer(after, self.target, self.cfg.metric)
        self.distances.append(distance)
        threshold = dynamic_threshold(self.cfg, self.round_count)
        submittable = distance < threshold and self.has_nonempty_actions()
        return StepResult(rnd, distance, submittable, tuple(skipped))

    def finalize(self, submitted: bool, dyad: Dyad | None = None) -> Rollout:
        """Close the game.  Won iff submitted with the final design inside the
        win threshold and at least one round carried actions; a loss costs the
        dyad a life."""
        if self.finished:
            raise EngineError("game already finished")
        self.finished = True
        won = (
            submitted
            and self.has_nonempty_actions()
            and self.last_distance < self.cfg.win_threshold
        )
        self.outcome = "won" if won else "lost"
        if not won and dyad is not None:
            dyad.record_loss()
        meta = dict(self.meta)
        meta.setdefault("final_distance", self.last_distance)
        return Rollout(self.target, tuple(self.rounds), self.outcome, meta)


def play(
    target: Design,
    designer: DesignerAgent,
    maker: MakerAgent,
    cfg: GameConfig = GameConfig(),
    clock: Callable[[], float] | None = None,
    meta: dict | None = None,
    style: RenderStyle = DEFAULT_STYLE,
    dyad: Dyad | None = None,
) -> Rollout:
    """Run a full game, submitting as soon as a round clears its threshold.

    The designer only ever receives renders; the maker receives the message,
    the editable design, and the round history, but never the target.
    """
    game = Game(target, cfg, clock, meta)
    target_svg = scene_to_svg(Scene(target, style=style))
    while True:
        current_svg = scene_to_svg(Scene(game.current, style=style))
        history = render_history(game.rounds, style)
        try:
            message = designer.produce_message(target_svg, current_svg, history)
        except Exception as exc:  # noqa: BLE001 - agent faults become AgentError
            raise AgentError("designer", game.round_count + 1, exc) from exc
        try:
            actions = maker.propose_actions(message, game.current, tuple(game.rounds))
        except Exception as exc:  # noqa: BLE001
            raise AgentError("maker", game.round_count + 1, exc) from exc
        result = game.step(message, actions)
        if result.submittable:
            return game.finalize(submitted=True, dyad=dyad)
        if game.round_count >= cfg.max_rounds:
            return game.finalize(submitted=False, dyad=dyad)
        if cfg.total_time is not None and game.elapsed() > cfg.total_time:
            return game.finalize(submitted=False, dyad=dyad)


def condition_preset(name: str) -> GameConfig:
    """Named study/collection configurations."""
    presets = {
        "mm_refine": GameConfig(
            max_rounds=3,
            total_time=None,
            designer_time=30.0,
            maker_time=120.0,
            char_limit=200,
            modality="multimodal",
        ),
        "text_refine": GameConfig(
            max_rounds=3,
            total_time=None,
            designer_time=30.0,
            maker_time=120.0,
            char_limit=200,
            modality="text_only",
        ),
        "draw_refine": GameConfig(
            max_rounds=3,
            total_time=None,
            designer_time=30.0,
            maker_time=120.0,
            char_limit=200,
            modality="drawing_only",
        ),
        "mm_genonly": GameConfig(
            max_rounds=1,
            total_time=None,
            designer_time=90.0,
            maker_time=360.0,
            char_limit=600,
            modality="multimodal",
        ),
        "dataset": GameConfig(
            max_rounds=10,
            total_time=540.0,
            char_limit=None,
            modality="multimodal",
            designer_time_multiplier=2.0,
            lives=3,
        ),
    }
    try:
        return presets[name]
    except KeyError:
        raise UnknownPreset(f"unknown condition preset {name!r}") from None


# ---------------------------------------------------------------------------
# Rollout records (newline-delimited canonical JSON)


def round_to_obj(r: Round) -> dict:
    return {
        "design_before": design_to_obj(r.design_before),
        "message": message_to_obj(r.message),
        "actions": [action_to_obj(a) for a in r.actions],
        "design_after": design_to_obj(r.design_after),
        "duration": r.duration,
    }


def rollout_to_obj(r: Rollout) -> dict:
    return {
        "target": design_to_obj(r.target),
        "rounds": [round_to_obj(rnd) for rnd in r.rounds],
        "outcome": r.outcome,
        "meta": {k: r.meta[k] for k in sorted(r.meta)},
    }


def rollout_to_json(r: Rollout) -> str:
    return to_canonical_json(rollout_to_obj(r))


def parse_round(obj: dict) -> Round:
    if not isinstance(obj, dict):
        raise ValueError("round must be an object")
    duration = obj.get("duration")
    if duration is not None:
        duration = float(duration)
    return Round(
        design_before=parse_design(obj["design_before"], validate=False),
        message=parse_message(obj["message"]),
        actions=tuple(parse_action(a) for a in obj.get("actions", [])),
        design_after=parse_design(obj["design_after"], validate=False),
        duration=duration,
    )


def parse_rollout(obj: dict) -> Rollout:
    if not isinstance(obj, dict):
        raise ValueError("rollout must be an object")
    outcome = obj.get("outcome")
    if outcome not in ("won", "lost", "excluded"):
        raise ValueError(f"unknown outcome {outcome!r}")
    meta = obj.get("meta", {})
    if not isinstance(meta, dict):
        raise ValueError("meta must be an object")
    return Rollout(
        target=parse_design(obj["target"], validate=False),
        rounds=tuple(parse_round(r) for r in obj.get("rounds", [])),
        outcome=outcome,
        meta=meta,
    )


def verify_rollout(r: Rollout, eps: float = 0.0) -> list[str]:
    """Replay-check a rollout; returns a list of problems (empty when sound).

    Checks the start-empty and chaining invariants and that re-applying each
    round's actions in lenient mode reproduces its recorded design_after.
    """
    problems = []
    if r.rounds and not r.rounds[0].design_before.is_empty():
        problems.append("round 1 must start from the empty design")
    for i, rnd in enumerate(r.rounds):
        if i > 0 and not design_equal(r.rounds[i - 1].design_after, rnd.design_before, eps):
            problems.append(f"round {i + 1} design_before breaks the chain")
        try:
            replayed, _ = apply_all(rnd.design_before, list(rnd.actions), LENIENT)
        except CadError as exc:
            problems.append(f"round {i + 1} replay failed: {exc}")
            continue
        if not design_equal(replayed, rnd.design_after, eps):
            problems.append(f"round {i + 1} design_after does not match replay")
    return problems
