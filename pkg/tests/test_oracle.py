import pytest

from layoutattack.errors import ValidationError
from layoutattack.metrics import metric_E
from layoutattack.oracle import OracleConfig, execute_plan
from layoutattack.planning import plan_same
from layoutattack.scene import LabeledBox, SceneLayout
from layoutattack.victims import VictimObject, VictimSet

from conftest import box, make_prediction_scene, random_box


def simple_plan(scene, target="lamp"):
    victims = VictimSet(
        entries=(VictimObject(index=0, box=scene.objects[0].box, category=target),)
    )
    return plan_same(scene, victims, target)


class TestExecutePlan:
    def scene(self, n=3):
        entries = [(box(0.2 + 0.2 * i, 0.5, 0.1, 0.1), "cat") for i in range(n)]
        return make_prediction_scene("s", entries)

    def test_perfect_attacker_reproduces_plan(self):
        scene = self.scene()
        plan = simple_plan(scene)
        out = execute_plan(scene, plan, OracleConfig(1.0, 0.0, seed=1))
        assert [o.category for o in out.objects] == ["lamp"] * 3
        assert [o.box for o in out.objects] == [o.box for o in scene.objects]
        assert all(o.confidence == 1.0 for o in out.objects)

    def test_zero_probability_keeps_original_labels(self):
        scene = self.scene()
        plan = simple_plan(scene)
        out = execute_plan(scene, plan, OracleConfig(0.0, 0.0, seed=1))
        assert [o.category for o in out.objects] == ["cat"] * 3

    def test_flip_count_near_binomial_expectation(self):
        n = 10_000
        objects = tuple(
            LabeledBox(box(0.5, 0.5, 0.1, 0.1), "cat", confidence=0.9)
            for _ in range(n)
        )
        scene = SceneLayout("big", 640, 480, objects)
        plan = simple_plan(scene)
        out = execute_plan(scene, plan, OracleConfig(0.5, 0.0, seed=123))
        flips = sum(1 for o in out.objects if o.category == "lamp")
        sigma = (n * 0.25) ** 0.5
        assert abs(flips - n / 2) <= 3 * sigma

    def test_plan_scene_mismatch(self):
        scene = self.scene(3)
        plan = simple_plan(self.scene(2))
        with pytest.raises(ValidationError, match="covers"):
            execute_plan(scene, plan, OracleConfig(1.0, 0.0, seed=1))

    def test_object_count_preserved(self, rng):
        for _ in range(20):
            n = int(rng.integers(1, 8))
            entries = [(random_box(rng), "cat") for _ in range(n)]
            scene = make_prediction_scene("s", entries)
            plan = simple_plan(scene)
            out = execute_plan(scene, plan, OracleConfig(0.7, 0.05, seed=9))
            assert len(out) == n

    def test_deterministic(self):
        scene = self.scene()
        plan = simple_plan(scene)
        config = OracleConfig(0.5, 0.03, seed=77)
        a = execute_plan(scene, plan, config)
        b = execute_plan(scene, plan, config)
        assert a == b

    def test_jitter_respects_box_invariants(self, rng):
        entries = [(box(0.02, 0.98, 0.05, 0.05), "cat"), (box(0.5, 0.5, 0.9, 0.9), "cat")]
        scene = make_prediction_scene("s", entries)
        plan = simple_plan(scene)
        out = execute_plan(scene, plan, OracleConfig(1.0, 0.8, seed=4))
        for o in out.objects:
            assert 0.0 <= o.box.cx <= 1.0
            assert 0.0 <= o.box.cy <= 1.0
            assert 0.0 < o.box.w <= 1.0
            assert 0.0 < o.box.h <= 1.0

    def test_perfect_attack_satisfies_existence(self):
        scene = self.scene()
        plan = simple_plan(scene, target="dog")
        out = execute_plan(scene, plan, OracleConfig(1.0, 0.0, seed=2))
        assert metric_E(out, "dog")

    def test_config_validation(self):
        with pytest.raises(ValidationError):
            OracleConfig(flip_probability=1.5)
        with pytest.raises(ValidationError):
            OracleConfig(jitter_scale=-0.1)
