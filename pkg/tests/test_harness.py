from __future__ import annotations

import json

import pytest

from conftest import random_design
from duocad.core import Design, MakeCurve, Point, RemoveCurve, design_equal, line
from duocad.dataset import SplitSpec
from duocad.engine import Round, Rollout
from duocad.harness import (
    EvalItem,
    GreedyKMaker,
    NoopMaker,
    OracleMaker,
    RandomMaker,
    ReplayHumanMaker,
    ZeroBaseline,
    baseline_agent,
    build_benchmark,
    evaluate,
    item_to_obj,
    load_items,
    parse_item,
    proportional_improvement,
    save_items,
    summary_table,
)
from duocad.message import Drawing, Message, Stroke
from duocad.metric import MetricConfig, chamfer
from test_dataset import build_rollout, corpus_with_success_counts, corpus_target


def P(x, y):
    return Point(float(x), float(y))


def make_item(current: Design, target: Design, round_index: int = 1, rid: str = "r0") -> EvalItem:
    return EvalItem(
        rollout_id=rid,
        round_index=round_index,
        history=(),
        current=current,
        message=Message("adjust it", Drawing((Stroke((P(0, 0), P(1, 1))),))),
        target=target,
        human_after=target,
    )


TARGET = Design.of([line(P(-9, 0), P(9, 0)), line(P(0, -9), P(0, 9))])
HALF = Design.of([line(P(-9, 0), P(9, 0))])


class TestProportionalImprovement:
    def test_exact_reconstruction_is_one(self):
        item = make_item(Design(), TARGET)
        actions = [MakeCurve(c) for c in TARGET.curves]
        assert proportional_improvement(actions, item) == 1.0

    def test_empty_actions_zero(self):
        item = make_item(HALF, TARGET)
        assert proportional_improvement([], item) == 0.0

    def test_positive_and_negative_arithmetic(self):
        item = make_item(HALF, TARGET)
        gain = proportional_improvement([MakeCurve(TARGET.curves[1])], item)
        assert gain == 1.0
        loss = proportional_improvement([RemoveCurve(HALF.curves[0])], item)
        assert loss < 0

    def test_zero_baseline_raises(self):
        item = make_item(TARGET, TARGET)
        with pytest.raises(ZeroBaseline):
            proportional_improvement([], item)

    def test_scale_consistency(self):
        item = make_item(HALF, TARGET)
        actions = [MakeCurve(TARGET.curves[1])]
        for s in (0.5, 2.0, 10.0):
            cfg = MetricConfig(canvas_extent=40.0 * s)
            assert abs(
                proportional_improvement(actions, item)
                - proportional_improvement(actions, item, cfg)
            ) <= 1e-12


class TestBuildBenchmark:
    def test_constructed_fixture_counts(self):
        # 4 designs x 3 successful 2-round rollouts -> 24 items, half generation.
        records = []
        for d in range(4):
            target = corpus_target(d)
            for s in range(3):
                records.append(
                    build_rollout(target, hit=True, rounds=2, meta={"rollout_id": f"d{d}s{s}"})
                )
        items = build_benchmark(records)
        assert len(items) == 24
        assert sum(1 for it in items if it.group == "generation") == 12
        assert sum(1 for it in items if it.group == "refinement") == 12

    def test_two_successes_contribute_nothing(self):
        records, _ = corpus_with_success_counts({2: 1})
        assert build_benchmark(records) == []

    def test_round_indices_consecutive(self):
        records = [build_rollout(corpus_target(0), hit=True, rounds=3, meta={"rollout_id": f"s{i}"}) for i in range(3)]
        items = build_benchmark(records)
        per_rollout = {}
        for it in items:
            per_rollout.setdefault(it.rollout_id, []).append(it.round_index)
        for indices in per_rollout.values():
            assert indices == list(range(1, len(indices) + 1))

    def test_unsuccessful_rollouts_not_itemized(self):
        target = corpus_target(1)
        records = [build_rollout(target, hit=True, meta={"rollout_id": f"s{i}"}) for i in range(3)]
        records.append(build_rollout(target, hit=False, meta={"rollout_id": "miss"}))
        items = build_benchmark(records)
        assert all(it.rollout_id != "miss" for it in items)

    def test_zero_baseline_items_dropped(self):
        # A 2-round rollout whose second round starts at the finished design.
        target = corpus_target(0)
        full = Design(target.curves)
        rounds = (
            Round(Design(), Message("go"), tuple(MakeCurve(c) for c in target.curves), full),
            Round(full, Message("hold"), (), full),
        )
        records = [Rollout(target, rounds, "won", {"rollout_id": f"s{i}"}) for i in range(3)]
        items = build_benchmark(records)
        assert all(it.round_index == 1 for it in items)


class TestBaselines:
    def test_oracle_reaches_target(self, rng):
        current, target = random_design(rng, 3), random_design(rng, 4)
        maker = OracleMaker(target)
        actions = maker.propose_actions(Message("x"), current, ())
        from duocad.core import apply_all, LENIENT

        after, _ = apply_all(current, actions, LENIENT)
        assert design_equal(after, target, 0.0)

    def test_noop(self):
        assert NoopMaker().propose_actions(Message("x"), TARGET, ()) == []

    def test_random_is_seeded_and_valid(self):
        a = RandomMaker(7).propose_actions(Message("x"), TARGET, ())
        b = RandomMaker(7).propose_actions(Message("x"), TARGET, ())
        assert a == b and 1 <= len(a) <= 5
        from duocad.core import apply_all, STRICT

        apply_all(TARGET, a, STRICT)  # all proposed actions apply cleanly

    def test_greedy_one_partial(self):
        item = make_item(Design(), Design.of([line(P(-9, -6), P(9, -6)), line(P(-9, 0), P(9, 0)), line(P(-9, 6), P(9, 6))]))
        maker = GreedyKMaker(1)
        maker.bind_item(item)
        actions = maker.propose_actions(item.message, item.current, ())
        assert len(actions) == 1
        pi = proportional_improvement(actions, item)
        assert 0 < pi < 1

    def test_greedy_removes_spurious(self):
        target = Design.of([line(P(-9, 0), P(9, 0))])
        current = Design.of([line(P(-9, 0), P(9, 0)), line(P(-9, 5), P(9, 5))])
        maker = GreedyKMaker(2, target)
        actions = maker.propose_actions(Message("x"), current, ())
        assert any(isinstance(a, RemoveCurve) for a in actions)

    def test_baseline_agent_specs(self):
        assert isinstance(baseline_agent("noop"), NoopMaker)
        assert isinstance(baseline_agent("oracle"), OracleMaker)
        assert isinstance(baseline_agent("random", 3), RandomMaker)
        assert isinstance(baseline_agent("greedy:2"), GreedyKMaker)
        assert isinstance(baseline_agent("replay"), ReplayHumanMaker)
        with pytest.raises(ValueError):
            baseline_agent("telepathy")


def benchmark_items(n_designs: int = 3) -> list:
    records = []
    for d in range(n_designs):
        target = corpus_target(d)
        for s in range(3):
            records.append(build_rollout(target, hit=True, rounds=2, meta={"rollout_id": f"d{d}s{s}"}))
    return build_benchmark(records)


class TestEvaluate:
    def test_oracle_means_are_one(self):
        report = evaluate(OracleMaker(), benchmark_items())
        assert report.generation_mean == 1.0
        assert report.refinement_mean == 1.0
        assert report.failure_count == 0

    def test_noop_means_are_zero(self):
        report = evaluate(NoopMaker(), benchmark_items())
        assert report.generation_mean == 0.0
        assert report.refinement_mean == 0.0

    def test_greedy_strictly_between(self):
        report = evaluate(GreedyKMaker(1), benchmark_items())
        assert 0.0 < report.generation_mean < 1.0

    def test_worsening_agent_negative(self):
        class Worsener:
            def propose_actions(self, message, current, history):
                return [RemoveCurve(current.curves[0])] if current.curves else []

        items = [it for it in benchmark_items() if it.round_index == 2]
        report = evaluate(Worsener(), items)
        assert report.refinement_mean < 0.0

    def test_unchanged_design_scores_exactly_zero(self):
        class DuplicateMaker:
            def propose_actions(self, message, current, history):
                return [MakeCurve(current.curves[0])] if current.curves else []

        items = [it for it in benchmark_items() if it.round_index == 2]
        report = evaluate(DuplicateMaker(), items)
        assert all(r.pi == 0.0 for r in report.results)

    def test_failures_score_zero_and_counted(self):
        class Flaky:
            def __init__(self):
                self.calls = 0

            def propose_actions(self, message, current, history):
                self.calls += 1
                if self.calls % 2 == 0:
                    raise RuntimeError("flaky")
                return []

        items = benchmark_items()
        report = evaluate(Flaky(), items)
        assert report.failure_count == len(items) // 2
        assert all(r.pi == 0.0 for r in report.results)

    def test_replay_human_matches_recorded_outcome(self):
        items = benchmark_items()
        report = evaluate(ReplayHumanMaker(), items)
        refinement = [r for r in report.results if r.group == "refinement"]
        assert all(r.pi > 0 for r in refinement)
        assert report.refinement_mean > 0

    def test_deterministic(self):
        items = benchmark_items()
        a = evaluate(RandomMaker(), items, seed=5)
        b = evaluate(RandomMaker(), items, seed=5)
        assert a == b

    def test_ablation_soundness(self):
        seen = []

        class Instrumented:
            def propose_actions(self, message, current, history):
                seen.append(message)
                return []

        items = benchmark_items()
        evaluate(Instrumented(), items, ablation="drop_text")
        assert all(m.text == "" for m in seen)
        seen.clear()
        evaluate(Instrumented(), items, ablation="drop_drawing")
        assert all(m.drawing.is_empty() for m in seen)

    def test_results_in_canonical_order(self):
        items = list(reversed(benchmark_items()))
        report = evaluate(NoopMaker(), items)
        keys = [(r.rollout_id, r.round_index) for r in report.results]
        assert keys == sorted(keys)

    def test_csv_and_summary(self):
        report = evaluate(NoopMaker(), benchmark_items())
        csv_text = report.to_csv()
        assert csv_text.splitlines()[0] == "rollout_id,round_index,group,pi,failed,n_actions"
        table = summary_table({"noop": report})
        assert "noop" in table and "generation" in table


class TestItemSerialization:
    def test_round_trip(self, tmp_path):
        items = benchmark_items()
        path = tmp_path / "items.ndjson"
        save_items(path, items)
        back = load_items(path)
        assert len(back) == len(items)
        assert [item_to_obj(i) for i in back] == [item_to_obj(i) for i in items]

    def test_parse_item_fields(self):
        item = benchmark_items()[0]
        back = parse_item(json.loads(json.dumps(item_to_obj(item))))
        assert back.rollout_id == item.rollout_id
        assert design_equal(back.target, item.target, 0.0)
