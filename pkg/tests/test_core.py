from __future__ import annotations

import json
import math
import random

import pytest

from conftest import random_design, random_valid_actions
from duocad.core import (
    CANVAS_BOUND,
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
    action_to_obj,
    apply,
    apply_all,
    arc,
    canonicalize_point,
    circle,
    design_equal,
    design_to_obj,
    line,
    parse_action,
    parse_design,
    to_canonical_json,
)


def P(x, y):
    return Point(float(x), float(y))


class TestCurveValidation:
    def test_line_needs_separated_endpoints(self):
        with pytest.raises(DegenerateCurve):
            line(P(1, 1), P(1, 1))

    def test_circle_needs_separated_diameter(self):
        with pytest.raises(DegenerateCurve):
            circle(P(0, 0), P(0, 1e-10))

    def test_arc_rejects_collinear(self):
        with pytest.raises(DegenerateCurve):
            arc(P(0, 0), P(1, 0), P(2, 0))

    def test_arc_rejects_coincident(self):
        with pytest.raises(DegenerateCurve):
            arc(P(0, 0), P(0, 0), P(1, 1))

    def test_nonfinite_rejected(self):
        with pytest.raises(DegenerateCurve):
            line(P(0, 0), P(math.inf, 0))

    def test_valid_curves_pass(self):
        line(P(0, 0), P(5, 0))
        circle(P(0, -18), P(0, 18))
        arc(P(-1, 0), P(0, 1), P(1, 0))


class TestCanonicalizePoint:
    def test_within_tolerance(self):
        d = Design.of([line(P(0, 0), P(5, 0))])
        assert canonicalize_point(d, P(0, 0.0000005)) == P(0, 0)

    def test_far_point_absent(self):
        d = Design.of([line(P(0, 0), P(5, 0))])
        assert canonicalize_point(d, P(5, 5)) is None

    def test_tolerance_boundary(self):
        d = Design.of([line(P(1, 0), P(-1, 0))])
        assert canonicalize_point(d, P(0.0000002, 0)) is None

    def test_nearest_wins(self):
        d = Design.of([line(P(0, 0), P(0.000002, 1))])
        got = canonicalize_point(d, P(0.0000019, 1))
        assert got == P(0.000002, 1)


class TestApply:
    def test_make_curve_from_empty(self):
        d = apply(Design(), MakeCurve(circle(P(0, -18), P(0, 18))))
        assert len(d.curves) == 1
        from duocad.metric import circle_params

        center, radius = circle_params(d.curves[0])
        assert center == P(0, 0)
        assert radius == 18

    def test_duplicate_make_is_warning_noop(self, caplog):
        d = Design.of([line(P(0, 0), P(5, 0))])
        with caplog.at_level("WARNING"):
            d2 = apply(d, MakeCurve(line(P(0, 0), P(5, 0))))
        assert d2 is d
        assert any("duplicate" in r.message for r in caplog.records)

    def test_move_point_reshapes_all_sharing_curves(self):
        d = Design.of([line(P(0, 0), P(5, 0)), line(P(0, 0), P(0, 5))])
        d2 = apply(d, MovePoint(P(0, 0), P(1, 1)))
        expected = Design.of([line(P(1, 1), P(5, 0)), line(P(1, 1), P(0, 5))])
        assert design_equal(d2, expected, 0.0)

    def test_delete_point_cascades(self):
        d = Design.of([line(P(0, 0), P(5, 0)), line(P(0, 0), P(0, 5))])
        d2 = apply(d, DeletePoint(P(0, 0)))
        assert d2.is_empty()

    def test_delete_point_leaves_unrelated_curves(self):
        d = Design.of([line(P(0, 0), P(5, 0)), line(P(10, 10), P(12, 10))])
        d2 = apply(d, DeletePoint(P(0, 0)))
        assert design_equal(d2, Design.of([line(P(10, 10), P(12, 10))]), 0.0)

    def test_move_curve_translates_and_reshapes_shared(self):
        shared = line(P(0, 0), P(5, 0))
        other = line(P(0, 0), P(0, 5))
        d = Design.of([shared, other])
        d2 = apply(d, MoveCurve(shared, (1.0, 1.0)))
        expected = Design.of([line(P(1, 1), P(6, 1)), line(P(1, 1), P(0, 5))])
        assert design_equal(d2, expected, 0.0)

    def test_remove_curve_keeps_shared_partner(self):
        d = Design.of([line(P(0, 0), P(5, 0)), line(P(0, 0), P(0, 5))])
        d2 = apply(d, RemoveCurve(line(P(0, 0), P(5, 0))))
        assert design_equal(d2, Design.of([line(P(0, 0), P(0, 5))]), 0.0)

    def test_unresolved_remove(self):
        with pytest.raises(UnresolvedReference):
            apply(Design(), RemoveCurve(line(P(0, 0), P(5, 0))))

    def test_unresolved_move_point(self):
        with pytest.raises(UnresolvedReference):
            apply(Design.of([line(P(0, 0), P(5, 0))]), MovePoint(P(9, 9), P(1, 1)))

    def test_degenerate_result(self):
        d = Design.of([line(P(0, 0), P(5, 0))])
        with pytest.raises(DegenerateResult):
            apply(d, MovePoint(P(5, 0), P(0, 0)))

    def test_move_creating_duplicate_is_degenerate(self):
        d = Design.of([line(P(0, 0), P(5, 0)), line(P(0, 5), P(5, 5))])
        with pytest.raises(DegenerateResult):
            apply(d, MoveCurve(line(P(0, 5), P(5, 5)), (0.0, -5.0)))

    def test_out_of_bounds(self):
        d = Design.of([line(P(0, 0), P(5, 0))])
        with pytest.raises(OutOfBounds):
            apply(d, MovePoint(P(5, 0), P(25, 0)))
        with pytest.raises(OutOfBounds):
            apply(Design(), MakeCurve(line(P(0, 0), P(21, 0))))


class TestApplyAll:
    def test_empty_sequence_is_identity(self):
        d = Design.of([line(P(0, 0), P(5, 0))])
        out, skipped = apply_all(d, [])
        assert out is d and skipped == []

    def test_fold_matches_sequential_apply(self):
        actions = [
            MakeCurve(line(P(0, 0), P(5, 0))),
            MovePoint(P(5, 0), P(5, 5)),
        ]
        out, _ = apply_all(Design(), actions)
        step = apply(apply(Design(), actions[0]), actions[1])
        assert design_equal(out, step, 0.0)
        assert design_equal(out, Design.of([line(P(0, 0), P(5, 5))]), 0.0)

    def test_lenient_skips_and_reports_indices(self):
        actions = [
            MakeCurve(circle(P(0, -18), P(0, 18))),
            RemoveCurve(line(P(9, 9), P(8, 8))),
            MovePoint(P(0, -18), P(0, -16)),
        ]
        out, skipped = apply_all(Design(), actions, LENIENT)
        assert skipped == [1]
        assert design_equal(out, Design.of([circle(P(0, -16), P(0, 18))]), 0.0)

    def test_strict_raises_with_index(self):
        actions = [
            MakeCurve(line(P(0, 0), P(5, 0))),
            RemoveCurve(line(P(9, 9), P(8, 8))),
        ]
        with pytest.raises(UnresolvedReference) as info:
            apply_all(Design(), actions, STRICT)
        assert info.value.action_index == 1

    def test_composition_law(self, rng):
        for _ in range(25):
            base = random_design(rng, 3)
            a1, mid = random_valid_actions(rng, base, 3)
            a2, end = random_valid_actions(rng, mid, 3)
            combined, _ = apply_all(base, a1 + a2)
            assert design_equal(combined, end, 0.0)

    def test_make_then_remove_is_identity(self, rng):
        for _ in range(20):
            d = random_design(rng, 4)
            c = line(P(-19, -19), P(-19, 19))
            out, _ = apply_all(d, [MakeCurve(c), RemoveCurve(c)])
            assert design_equal(out, d, 0.0)


class TestDesign:
    def test_rejects_duplicates(self):
        with pytest.raises(DegenerateResult):
            Design.of([line(P(0, 0), P(5, 0)), line(P(0, 0), P(5, 0))])

    def test_circle_diameter_order_duplicate(self):
        with pytest.raises(DegenerateResult):
            Design.of([circle(P(0, 0), P(2, 0)), circle(P(2, 0), P(0, 0))])

    def test_point_index_is_inverse_of_membership(self, rng):
        for _ in range(20):
            d = random_design(rng, 5)
            index = d.point_index()
            for p, curve_ids in index.items():
                for i in curve_ids:
                    assert any(q.dist(p) <= 1e-6 for q in d.curves[i].control_points)
            for i, c in enumerate(d.curves):
                for q in c.control_points:
                    assert any(
                        q.dist(p) <= 1e-6 and i in ids for p, ids in index.items()
                    )

    def test_point_index_holds_after_apply(self, rng):
        d = random_design(rng, 4)
        actions, final = random_valid_actions(rng, d, 8)
        rebuilt = Design.of(final.curves)
        assert rebuilt.point_index() == final.point_index()

    def test_delete_point_makes_it_unresolvable(self, rng):
        for _ in range(10):
            d = random_design(rng, 4)
            p = d.control_points()[0]
            d2 = apply(d, DeletePoint(p))
            assert canonicalize_point(d2, p) is None


class TestDesignEqual:
    def test_reflexive(self, rng):
        d = random_design(rng, 5)
        assert design_equal(d, d, 0.0)

    def test_circle_diameter_symmetry(self):
        a = Design.of([circle(P(1, 2), P(3, 2))])
        b = Design.of([circle(P(3, 2), P(1, 2))])
        assert design_equal(a, b, 1e-6)

    def test_beyond_tolerance(self):
        a = Design.of([line(P(0, 0), P(1, 0))])
        b = Design.of([line(P(0, 0), P(1, 0.01))])
        assert not design_equal(a, b, 1e-6)

    def test_order_insensitive(self):
        c1, c2 = line(P(0, 0), P(5, 0)), circle(P(0, 0), P(2, 2))
        assert design_equal(Design.of([c1, c2]), Design.of([c2, c1]), 0.0)

    def test_needs_bijection_not_greedy(self):
        # Both curves of `a` are within eps of b's first curve only if eps is
        # large; with a proper matching the pairing still resolves.
        a = Design.of([line(P(0, 0), P(5, 0)), line(P(0, 0.5), P(5, 0.5))])
        b = Design.of([line(P(0, 0.5), P(5, 0.5)), line(P(0, 0), P(5, 0))])
        assert design_equal(a, b, 0.6)
        assert not design_equal(a, Design.of([line(P(0, 0), P(5, 0)), line(P(0, 3), P(5, 3))]), 0.6)


class TestSerialization:
    def test_design_round_trip(self, rng):
        for _ in range(10):
            d = random_design(rng, 5)
            blob = to_canonical_json(design_to_obj(d))
            back = parse_design(json.loads(blob))
            assert design_equal(d, back, 0.0)
            assert to_canonical_json(design_to_obj(back)) == blob

    def test_design_wire_shape(self):
        d = Design.of([circle(P(0, -18), P(0, 18))])
        assert design_to_obj(d) == {
            "curves": [
                {"type": "circle", "control_points": [[0.0, -18.0], [0.0, 18.0]]}
            ]
        }

    @pytest.mark.parametrize(
        "action",
        [
            MakeCurve(line(P(0, 0), P(5, 0))),
            RemoveCurve(circle(P(0, 0), P(2, 0))),
            MoveCurve(line(P(0, 0), P(5, 0)), (1.5, -2.0)),
            MovePoint(P(0, -15), P(0, -16)),
            DeletePoint(P(3, 4)),
        ],
    )
    def test_action_round_trip(self, action):
        obj = action_to_obj(action)
        assert parse_action(json.loads(to_canonical_json(obj))) == action

    def test_action_wire_shapes(self):
        assert action_to_obj(MovePoint(P(0, -15), P(0, -16))) == {
            "name": "move_point",
            "arguments": {"point": [0.0, -15.0], "new_point": [0.0, -16.0]},
        }
        assert action_to_obj(DeletePoint(P(1, 2))) == {
            "name": "delete_point",
            "arguments": {"point": [1.0, 2.0]},
        }
        obj = action_to_obj(MoveCurve(line(P(0, 0), P(5, 0)), (1.0, 2.0)))
        assert obj["arguments"]["delta"] == [1.0, 2.0]
        assert obj["arguments"]["type"] == "line"

    def test_unknown_action_rejected(self):
        with pytest.raises(ValueError):
            parse_action({"name": "teleport", "arguments": {}})

    def test_shortest_repr_floats(self):
        d = Design.of([line(P(0.1, 0.2), P(5, 0))])
        blob = to_canonical_json(design_to_obj(d))
        assert "[0.1,0.2]" in blob


class TestDeterminism:
    def test_apply_deterministic(self, rng):
        d = random_design(rng, 4)
        actions, _ = random_valid_actions(rng, d, 6)
        out1, _ = apply_all(d, actions)
        out2, _ = apply_all(d, actions)
        assert design_equal(out1, out2, 0.0)
        assert design_to_obj(out1) == design_to_obj(out2)
