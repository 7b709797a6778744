"""Agent benchmark: instruction-execution items, proportional improvement, baselines.

Benchmark items are single rounds lifted from successful rollouts of
well-covered designs.  An agent plays the maker for each item; its score is
the proportional improvement (PI): the fraction of the remaining distance to
the target that its actions removed.  Negative PI means the actions made the
design worse.
"""
from __future__ import annotations

import csv
import io
import json
import math
import random
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Protocol, Sequence, runtime_checkable

from .core import (
    Action,
    CadError,
    Design,
    LENIENT,
    MakeCurve,
    MovePoint,
    Point,
    RemoveCurve,
    apply_all,
    curves_identical,
    design_to_obj,
    line,
    parse_design,
    to_canonical_json,
)
from .engine import MakerAgent, Round, Rollout, parse_round, round_to_obj
from .message import AblationMode, Message, ablate, message_to_obj, parse_message
from .metric import DEFAULT_METRIC, MetricConfig, chamfer
from .dataset import SplitSpec, design_id, rollout_succeeded


class ZeroBaseline(CadError):
    """The item's design already matches the target; PI is undefined."""


@dataclass(frozen=True)
class EvalItem:
    rollout_id: str
    round_index: int  # 1-based; 1 = generation, 2+ = refinement
    history: tuple[Round, ...]
    current: Design
    message: Message
    target: Design
    human_after: Design

    @property
    def group(self) -> str:
        return "generation" if self.round_index == 1 else "refinement"


def proportional_improvement(
    actions: Sequence[Action], item: EvalItem, metric: MetricConfig = DEFAULT_METRIC
) -> float:
    """(distance before - distance after) / distance before, with lenient apply."""
    before = chamfer(item.current, item.target, metric)
    if before <= 0:
        raise ZeroBaseline("item design already matches the target")
    after_design, _ = apply_all(item.current, list(actions), LENIENT)
    after = chamfer(after_design, item.target, metric)
    return (before - after) / before


def build_benchmark(
    records: Sequence[Rollout],
    spec: SplitSpec = SplitSpec(),
    metric: MetricConfig = DEFAULT_METRIC,
) -> list[EvalItem]:
    """All rounds of all successful rollouts of designs with enough successes.

    Items whose starting design already matches the target are dropped (their
    PI denominator would be zero).  Items sort by (rollout id, round index).
    """
    successes: dict[str, list[tuple[str, Rollout]]] = {}
    for i, r in enumerate(records):
        if not rollout_succeeded(r, metric):
            continue
        rid = str(r.meta.get("rollout_id", f"r{i:05d}"))
        successes.setdefault(design_id(r.target), []).append((rid, r))
    items: list[EvalItem] = []
    for did in sorted(successes):
        rollouts = successes[did]
        if len(rollouts) < spec.eval_min:
            continue
        for rid, r in sorted(rollouts, key=lambda pair: pair[0]):
            for i, rnd in enumerate(r.rounds, start=1):
                if chamfer(rnd.design_before, r.target, metric) <= 0:
                    continue
                items.append(
                    EvalItem(
                        rollout_id=rid,
                        round_index=i,
                        history=r.rounds[: i - 1],
                        current=rnd.design_before,
                        message=rnd.message,
                        target=r.target,
                        human_after=rnd.design_after,
                    )
                )
    items.sort(key=lambda it: (it.rollout_id, it.round_index))
    return items


# ---------------------------------------------------------------------------
# Evaluation


@dataclass(frozen=True)
class ItemResult:
    rollout_id: str
    round_index: int
    group: str
    pi: float
    failed: bool
    n_actions: int


@dataclass(frozen=True)
class EvalReport:
    results: tuple[ItemResult, ...]
    generation_mean: float
    refinement_mean: float
    generation_count: int
    refinement_count: int
    failure_count: int

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["rollout_id", "round_index", "group", "pi", "failed", "n_actions"])
        for r in self.results:
            writer.writerow(
                [r.rollout_id, r.round_index, r.group, repr(r.pi), int(r.failed), r.n_actions]
            )
        return buf.getvalue()


def summary_table(reports: dict[str, EvalReport]) -> str:
    """Rows = agents/ablations, columns = generation / refinement mean PI."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["agent", "generation", "refinement", "failures"])
    for name in sorted(reports):
        rep = reports[name]
        writer.writerow(
            [name, f"{rep.generation_mean:.4f}", f"{rep.refinement_mean:.4f}", rep.failure_count]
        )
    return buf.getvalue()


@runtime_checkable
class ItemAware(Protocol):
    """Privileged agents that peek at per-item data (targets, human replays)."""

    def bind_item(self, item: EvalItem) -> None: ...


def evaluate(
    agent: MakerAgent,
    items: Sequence[EvalItem],
    ablation: AblationMode = "none",
    seed: int = 0,
    metric: MetricConfig = DEFAULT_METRIC,
) -> EvalReport:
    """Score an agent over benchmark items under an optional modality ablation.

    Agent exceptions are recorded as failures and score 0; they never abort
    the run.  Results keep the canonical item order, so evaluation of a
    deterministic agent is reproducible for a fixed seed and ablation.
    """
    if not items:
        raise ValueError("evaluate needs at least one item")
    if hasattr(agent, "reset"):
        agent.reset(seed)
    results: list[ItemResult] = []
    for item in sorted(items, key=lambda it: (it.rollout_id, it.round_index)):
        msg = ablate(item.message, ablation)
        if isinstance(agent, ItemAware):
            agent.bind_item(item)
        try:
            actions = list(agent.propose_actions(msg, item.current, item.history))
            pi = proportional_improvement(actions, item, metric)
            failed = False
        except Exception:  # noqa: BLE001 - failures are data
            actions = []
            pi = 0.0
            failed = True
        results.append(
            ItemResult(item.rollout_id, item.round_index, item.group, pi, failed, len(actions))
        )
    gen = [r.pi for r in results if r.group == "generation"]
    ref = [r.pi for r in results if r.group == "refinement"]
    return EvalReport(
        results=tuple(results),
        generation_mean=math.fsum(gen) / len(gen) if gen else 0.0,
        refinement_mean=math.fsum(ref) / len(ref) if ref else 0.0,
        generation_count=len(gen),
        refinement_count=len(ref),
        failure_count=sum(r.failed for r in results),
    )


# ---------------------------------------------------------------------------
# Baseline agents


class NoopMaker:
    """Returns no actions; calibrates PI = 0."""

    def propose_actions(self, message, current, history):
        return []


class OracleMaker:
    """Privileged: deletes everything and rebuilds the target; calibrates PI = 1."""

    def __init__(self, target: Design | None = None):
        self.target = target

    def bind_item(self, item: EvalItem) -> None:
        self.target = item.target

    def propose_actions(self, message, current: Design, history):
        if self.target is None:
            raise ValueError("oracle maker has no target bound")
        actions: list[Action] = [RemoveCurve(c) for c in current.curves]
        actions.extend(MakeCurve(c) for c in self.target.curves)
        return actions


class ReplayHumanMaker:
    """Privileged: reproduces the recorded human outcome for each item."""

    def __init__(self):
        self._after: Design | None = None

    def bind_item(self, item: EvalItem) -> None:
        self._after = item.human_after

    def propose_actions(self, message, current: Design, history):
        if self._after is None:
            raise ValueError("replay maker has no item bound")
        actions: list[Action] = [RemoveCurve(c) for c in current.curves]
        actions.extend(MakeCurve(c) for c in self._after.curves)
        return actions


class RandomMaker:
    """Emits up to ``max_actions`` random valid edits from a seeded generator."""

    def __init__(self, seed: int = 0, max_actions: int = 5):
        self.max_actions = max_actions
        self._rng = random.Random(seed)

    def reset(self, seed: int) -> None:
        self._rng = random.Random(seed)

    def propose_actions(self, message, current: Design, history):
        actions: list[Action] = []
        scratch = current
        n = self._rng.randint(1, self.max_actions)
        for _ in range(n):
            action = self._random_action(scratch)
            if action is None:
                continue
            try:
                scratch, _ = apply_all(scratch, [action], LENIENT)
            except CadError:
                continue
            actions.append(action)
        return actions

    def _random_action(self, design: Design) -> Action | None:
        rng = self._rng
        for _ in range(8):
            choice = rng.random()
            if choice < 0.5 or design.is_empty():
                x = rng.uniform(-15.0, 15.0)
                y = rng.uniform(-15.0, 15.0)
                dx = rng.uniform(1.0, 4.0) * rng.choice([-1.0, 1.0])
                dy = rng.uniform(1.0, 4.0) * rng.choice([-1.0, 1.0])
                try:
                    return MakeCurve(line(Point(x, y), Point(x + dx, y + dy)))
                except CadError:
                    continue
            points = design.control_points()
            p = points[rng.randrange(len(points))]
            q = Point(
                min(20.0, max(-20.0, p.x + rng.uniform(-2.0, 2.0))),
                min(20.0, max(-20.0, p.y + rng.uniform(-2.0, 2.0))),
            )
            return MovePoint(p, q)
        return None


class GreedyKMaker:
    """Privileged: per call, removes up to k curves that do not belong and adds
    up to k target curves that are missing."""

    def __init__(self, k: int, target: Design | None = None):
        if k < 1:
            raise ValueError("k must be >= 1")
        self.k = k
        self.target = target

    def bind_item(self, item: EvalItem) -> None:
        self.target = item.target

    def propose_actions(self, message, current: Design, history):
        if self.target is None:
            raise ValueError("greedy maker has no target bound")
        spurious = [
            c
            for c in sorted(current.curves)
            if not any(curves_identical(c, t) for t in self.target.curves)
        ]
        missing = [
            t
            for t in sorted(self.target.curves)
            if not any(curves_identical(t, c) for c in current.curves)
        ]
        actions: list[Action] = [RemoveCurve(c) for c in spurious[: self.k]]
        actions.extend(MakeCurve(t) for t in missing[: self.k])
        return actions


def baseline_agent(kind: str, seed: int = 0) -> MakerAgent:
    """Construct a baseline by spec string: noop, oracle, random, greedy:k, replay."""
    if kind == "noop":
        return NoopMaker()
    if kind == "oracle":
        return OracleMaker()
    if kind == "random":
        return RandomMaker(seed)
    if kind == "replay":
        return ReplayHumanMaker()
    if kind.startswith("greedy:"):
        return GreedyKMaker(int(kind.split(":", 1)[1]))
    raise ValueError(f"unknown baseline agent {kind!r}")


# ---------------------------------------------------------------------------
# Item serialization (for shipping benchmarks as files)


def item_to_obj(item: EvalItem) -> dict:
    return {
        "rollout_id": item.rollout_id,
        "round_index": item.round_index,
        "history": [round_to_obj(r) for r in item.history],
        "current": design_to_obj(item.current),
        "message": message_to_obj(item.message),
        "target": design_to_obj(item.target),
        "human_after": design_to_obj(item.human_after),
    }


def parse_item(obj: dict) -> EvalItem:
    return EvalItem(
        rollout_id=str(obj["rollout_id"]),
        round_index=int(obj["round_index"]),
        history=tuple(parse_round(r) for r in obj.get("history", [])),
        current=parse_design(obj["current"], validate=False),
        message=parse_message(obj["message"]),
        target=parse_design(obj["target"], validate=False),
        human_after=parse_design(obj["human_after"], validate=False),
    )


def save_items(path: str | Path, items: Iterable[EvalItem]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for item in items:
            fh.write(to_canonical_json(item_to_obj(item)))
            fh.write("\n")


def load_items(path: str | Path) -> list[EvalItem]:
    out = []
    with open(path, "r", encoding="utf-8") as fh:
        for line_no, raw in enumerate(fh, start=1):
            raw = raw.strip()
            if not raw:
                continue
            try:
                out.append(parse_item(json.loads(raw)))
            except (ValueError, KeyError) as exc:
                raise ValueError(f"{path}:{line_no}: bad item: {exc}") from exc
    return out
