"""Acceptance suite.

Each test prints one `ACCEPTANCE <nn> <name>: PASS|FAIL` line and enforces
its stated tolerance and runtime budget. Expected values come from
independent oracles: exhaustive permutation search for assignments,
corner arithmetic for geometry, and scipy densities for mixtures.
"""

from __future__ import annotations

import dataclasses
import itertools
import time
from functools import lru_cache

import numpy as np
import pytest
from scipy.stats import multivariate_normal

from layoutattack.boxes import boxes_to_array, giou, iou, l1_box
from layoutattack.cli import main as cli_main
from layoutattack.corpus import Corpus, write_predictions
from layoutattack.metrics import evaluate
from layoutattack.mixture import CategoryGMM, fit_all_categories, fit_gmm, weighted_density
from layoutattack.oracle import OracleConfig, execute_plan
from layoutattack.planning import (
    generate_plan,
    match_layout,
    plan_random,
    plan_same,
)
from layoutattack.scene import LabeledBox, LabelSpace, SceneLayout
from layoutattack.synthetic import build_world, write_coco_file, write_embeddings
from layoutattack.util import derive_seed
from layoutattack.victims import (
    VictimObject,
    VictimSet,
    build_victim_set,
    localize_r2,
    random_victim_set,
)

from conftest import box, random_box


def report_line(number: int, name: str, ok: bool) -> bool:
    print(f"ACCEPTANCE {number:02d} {name}: {'PASS' if ok else 'FAIL'}")
    return ok


@lru_cache(maxsize=None)
def permutation_table(n: int, m: int) -> np.ndarray:
    return np.array(list(itertools.permutations(range(m), n)), dtype=np.intp)


def brute_force_min_total(cost: np.ndarray) -> float:
    n, m = cost.shape
    perms = permutation_table(n, m)
    totals = cost[np.arange(n)[None, :], perms].sum(axis=1)
    return float(totals.min())


def prediction_scene(scene_id, labeled_boxes, confidence=0.9):
    return SceneLayout(
        scene_id,
        640,
        480,
        tuple(LabeledBox(b, c, confidence=confidence) for b, c in labeled_boxes),
    )


def annotation_scene(scene_id, labeled_boxes):
    return SceneLayout(
        scene_id, 640, 480, tuple(LabeledBox(b, c) for b, c in labeled_boxes)
    )


# ------------------------------------------------------------------ 1


def test_acceptance_01_assignment_matches_exhaustive_search():
    rng = np.random.default_rng(42)
    start = time.perf_counter()
    mismatches = 0
    for _ in range(500):
        n = int(rng.integers(1, 8))
        m = int(rng.integers(n, 10))
        scene = prediction_scene(
            "s", [(random_box(rng), "cat") for _ in range(n)]
        )
        corpus_scene = annotation_scene(
            "t", [(random_box(rng), "cat") for _ in range(m)]
        )
        result = match_layout(scene, VictimSet(entries=()), corpus_scene)
        cost = _pair_cost(scene, corpus_scene)
        if result.total_cost != brute_force_min_total(cost):
            mismatches += 1
    elapsed = time.perf_counter() - start
    ok = mismatches == 0 and elapsed < 10.0
    assert report_line(1, "assignment equals exhaustive minimum", ok), (
        f"mismatches={mismatches} elapsed={elapsed:.2f}s"
    )


def _pair_cost(scene, corpus_scene):
    from layoutattack.planning import pair_cost_matrix

    return pair_cost_matrix(
        boxes_to_array([o.box for o in scene.objects]),
        boxes_to_array([o.box for o in corpus_scene.objects]),
    )


# ------------------------------------------------------------------ 2


def test_acceptance_02_geometry_suite():
    rng = np.random.default_rng(7)
    ok = True
    for _ in range(10_000):
        a, b = random_box(rng), random_box(rng)
        iou_ab, iou_ba = iou(a, b), iou(b, a)
        giou_ab, giou_ba = giou(a, b), giou(b, a)
        ok = ok and giou_ab <= iou_ab + 1e-12
        ok = ok and abs(iou_ab - iou_ba) <= 1e-12
        ok = ok and abs(giou_ab - giou_ba) <= 1e-12
        ok = ok and iou(a, a) == 1.0 and giou(a, a) == 1.0
        ok = ok and giou_ab > -1.0
    hand_derived = (
        abs(iou(box(0.5, 0.5, 0.5, 1), box(0.75, 0.5, 0.5, 1)) - 1 / 3) <= 1e-12
        and abs(giou(box(0.25, 0.5, 0.5, 1), box(0.75, 0.5, 0.5, 1)) - 0.0) <= 1e-12
        and abs(l1_box(box(0.5, 0.5, 0.2, 0.4), box(0.6, 0.5, 0.4, 0.2)) - 0.5) <= 1e-12
    )
    ok = ok and hand_derived
    assert report_line(2, "geometry invariants and hand-derived values", ok)


# ------------------------------------------------------------------ 3


def test_acceptance_03_em_monotonicity_and_recovery():
    start = time.perf_counter()
    rng = np.random.default_rng(11)
    centers = np.array(
        [
            [0.25, 0.3, 0.1, 0.12],
            [0.6, 0.5, 0.2, 0.18],
            [0.8, 0.75, 0.12, 0.1],
        ]
    )
    parts = [
        rng.normal(c, 0.03, size=(5000 // 3 + 1, 4)) for c in centers
    ]
    samples = np.vstack(parts)[:5000]
    model = fit_gmm(samples, n_components=5, seed=19)
    trace = model.log_likelihood_trace
    monotone = all(later >= earlier - 1e-9 for earlier, later in zip(trace, trace[1:]))

    mu1 = np.array([0.3, 0.3, 0.1, 0.1])
    mu2 = np.array([0.7, 0.7, 0.25, 0.2])
    two = np.vstack(
        [rng.normal(mu1, 0.02, size=(2500, 4)), rng.normal(mu2, 0.02, size=(2500, 4))]
    )
    recovered = fit_gmm(two, n_components=2, seed=4)
    fitted = np.array(sorted(recovered.means.tolist()))
    expected = np.array(sorted([mu1.tolist(), mu2.tolist()]))
    recovery = bool(np.all(np.abs(fitted - expected) < 0.05))

    elapsed = time.perf_counter() - start
    ok = monotone and recovery and elapsed < 30.0
    assert report_line(3, "EM log-likelihood monotone and recovers clusters", ok), (
        f"monotone={monotone} recovery={recovery} elapsed={elapsed:.2f}s"
    )


# ------------------------------------------------------------------ 4


def test_acceptance_04_density_scaling_fidelity():
    rng = np.random.default_rng(23)
    samples = rng.uniform(0.1, 0.9, size=(800, 4))
    model = fit_gmm(samples, n_components=5, seed=3)
    ok = True
    for _ in range(1000):
        probe = rng.uniform(0.0, 1.0, size=4)
        mixture = sum(
            float(w) * multivariate_normal.pdf(probe, mean=mu, cov=cov)
            for w, mu, cov in zip(model.weights, model.means, model.covariances)
        )
        expected = mixture / model.component_count
        ok = ok and abs(weighted_density(model, probe) - expected) <= 1e-12 * max(
            expected, 1.0
        )

    single = CategoryGMM(
        "single",
        np.array([1.0]),
        np.array([[0.5, 0.4, 0.2, 0.2]]),
        (0.25 * np.eye(4))[None, :, :],
    )
    peak = weighted_density(single, np.array([0.5, 0.4, 0.2, 0.2]))
    closed_form = 1.0 / (4.0 * np.pi**2 * np.sqrt(np.linalg.det(0.25 * np.eye(4))))
    q1_exact = abs(peak - closed_form) <= 1e-12 * closed_form
    for _ in range(100):
        probe = rng.uniform(0.0, 1.0, size=4)
        ref = multivariate_normal.pdf(probe, mean=single.means[0], cov=single.covariances[0])
        q1_exact = q1_exact and abs(weighted_density(single, probe) - ref) <= 1e-12 * max(
            ref, 1e-300
        )
    ok = ok and q1_exact
    assert report_line(4, "density equals mixture over component count", ok)


# ------------------------------------------------------------------ 5


def test_acceptance_05_self_match_dominance():
    rng = np.random.default_rng(31)
    space = LabelSpace(["a", "b", "c", "d", "e", "f"])
    successes = 0
    for i in range(50):
        n = int(rng.integers(2, 7))
        categories = [space.name(int(rng.integers(len(space)))) for _ in range(n)]
        boxes = [random_box(rng) for _ in range(n)]
        scene = prediction_scene(f"v{i:02d}", list(zip(boxes, categories)))
        absent = [c for c in space if c not in categories]
        target = absent[int(rng.integers(len(absent)))]
        victims = VictimSet(
            entries=(VictimObject(index=0, box=boxes[0], category=target),)
        )
        injected = annotation_scene(
            f"inj{i:02d}", [(boxes[0], target)] + list(zip(boxes[1:], categories[1:]))
        )
        background = [
            annotation_scene(
                f"bg{i:02d}_{j}",
                [(random_box(rng), space.name(int(rng.integers(len(space)))))
                 for _ in range(int(rng.integers(1, 6)))],
            )
            for j in range(6)
        ]
        corpus = Corpus(space, background + [injected])
        try:
            plan, _ = generate_plan(scene, victims, corpus)
        except Exception:
            continue
        labels_kept = all(
            a.target_category == a.original_category
            for a in plan.assignments
            if a.index != 0
        )
        if plan.source_scene_id == injected.scene_id and plan.s2 == 0.0 and labels_kept:
            successes += 1
    ok = successes == 50
    assert report_line(5, "self-match wins with zero match loss", ok), (
        f"{successes}/50"
    )


# ------------------------------------------------------------------ 6


def test_acceptance_06_localization_prefers_the_mode():
    rng = np.random.default_rng(57)
    mode = np.array([0.5, 0.3, 0.2, 0.15])
    samples = rng.normal(mode, 0.02, size=(500, 4))
    model = fit_gmm(samples, n_components=5, seed=8, category="target")
    hits = 0
    for i in range(100):
        mode_box = box(*np.clip(rng.normal(mode, 0.005), [0, 0, 0.02, 0.02], 1.0))
        tail_box = box(
            float(rng.uniform(0.05, 0.95)),
            float(rng.uniform(0.85, 0.95)),
            float(rng.uniform(0.4, 0.6)),
            float(rng.uniform(0.4, 0.6)),
        )
        mode_index = int(rng.integers(2))
        entries = [(tail_box, "other"), (tail_box, "other")]
        entries[mode_index] = (mode_box, "other")
        entries[1 - mode_index] = (tail_box, "other")
        scene = prediction_scene(f"s{i}", entries)
        if localize_r2(scene, "target", model) == mode_index:
            hits += 1
    ok = hits >= 95
    assert report_line(6, "density localization picks the mode box", ok), f"{hits}/100"


# ------------------------------------------------------------------ 7 & 10


@pytest.fixture(scope="module")
def end_to_end_run():
    start = time.perf_counter()
    world = build_world(seed=101, corpus_size=200, victim_count=200, kind="r2")
    models, _ = fit_all_categories(world.corpus, seed=7)

    plans = {"glow": [], "random": [], "same": []}
    for request in world.requests:
        scene = world.victim_scenes[request.scene_id]
        victims = build_victim_set(request, scene, models)
        glow_plan, _ = generate_plan(scene, victims, world.corpus)
        plans["glow"].append(glow_plan)
        baseline_victims = random_victim_set(
            request, scene, derive_seed(991, f"victim:{request.scene_id}")
        )
        plans["random"].append(
            plan_random(
                scene,
                baseline_victims,
                world.corpus.label_space,
                derive_seed(991, f"plan:{request.scene_id}"),
            )
        )
        plans["same"].append(plan_same(scene, baseline_victims, request.target_category))

    reports = {}
    for name, plan_list in plans.items():
        tagged = [
            dataclasses.replace(p, request_kind="r2", percentile=50) for p in plan_list
        ]
        plans[name] = tagged
        dumps = {}
        for plan in tagged:
            scene = world.victim_scenes[plan.scene_id]
            dumps[plan.scene_id] = execute_plan(
                scene,
                plan,
                OracleConfig(1.0, 0.0, seed=derive_seed(55, f"sim:{plan.scene_id}")),
            )
        reports[name] = evaluate(
            world.requests, tagged, dumps, world.corpus, models
        )
    elapsed = time.perf_counter() - start
    return world, plans, reports, elapsed


def test_acceptance_07_perfect_attacker_end_to_end(end_to_end_run):
    world, plans, reports, elapsed = end_to_end_run
    glow = reports["glow"]
    random_report = reports["random"]
    all_planned = len(plans["glow"]) == 200 and glow.evaluated_count == 200
    existence_rate = glow.rates.get("E", 0.0)
    glow_t = glow.rates.get("T", 0.0)
    random_t = random_report.rates.get("T", 0.0)
    ok = (
        all_planned
        and existence_rate == 1.0
        and glow_t >= random_t
        and glow_t > random_t
        and elapsed < 120.0
    )
    assert report_line(7, "perfect-attacker run: existence 1.0, density beats random", ok), (
        f"planned={len(plans['glow'])} evaluated={glow.evaluated_count} "
        f"E={existence_rate:.3f} T(glow)={glow_t:.3f} T(random)={random_t:.3f} "
        f"elapsed={elapsed:.1f}s"
    )


def test_acceptance_10_layout_generator_beats_baselines(end_to_end_run):
    _, _, reports, _ = end_to_end_run
    glow_er = reports["glow"].rates.get("E+R", 0.0)
    same_er = reports["same"].rates.get("E+R", 0.0)
    random_er = reports["random"].rates.get("E+R", 0.0)
    ok = glow_er > same_er and glow_er > random_er
    assert report_line(10, "composite rate exceeds both baselines", ok), (
        f"E+R glow={glow_er:.3f} same={same_er:.3f} random={random_er:.3f}"
    )


# ------------------------------------------------------------------ 8


def test_acceptance_08_exact_count_discipline():
    world = build_world(seed=67, corpus_size=150, victim_count=60, kind="r3", count=2)
    models, _ = fit_all_categories(world.corpus, seed=13)
    mismatches = 0
    outcomes = {True: 0, False: 0}
    for generator in ("glow", "same"):
        plans = []
        for request in world.requests:
            scene = world.victim_scenes[request.scene_id]
            try:
                victims = build_victim_set(request, scene, models)
                if generator == "glow":
                    plan, _ = generate_plan(scene, victims, world.corpus)
                else:
                    plan = plan_same(scene, victims, request.target_category)
            except Exception:
                continue
            plans.append(
                dataclasses.replace(plan, request_kind="r3", percentile=50)
            )
        dumps = {
            plan.scene_id: execute_plan(
                world.victim_scenes[plan.scene_id],
                plan,
                OracleConfig(1.0, 0.0, seed=derive_seed(3, plan.scene_id)),
            )
            for plan in plans
        }
        report = evaluate(world.requests, plans, dumps, world.corpus, models)
        by_scene = {p.scene_id: p for p in plans}
        for record in report.per_scene:
            plan = by_scene[record["scene_id"]]
            expected = plan.target_count(plan.victims.categories[0]) == 2
            outcomes[expected] += 1
            if record["C"]["pass"] != expected:
                mismatches += 1
    variety = outcomes[True] > 0 and outcomes[False] > 0
    ok = mismatches == 0 and variety
    assert report_line(8, "exact-count metric mirrors plan label counts", ok), (
        f"mismatches={mismatches} pass_cases={outcomes[True]} fail_cases={outcomes[False]}"
    )


# ------------------------------------------------------------------ 9


def test_acceptance_09_pipeline_determinism(tmp_path):
    world = build_world(seed=5, corpus_size=80, victim_count=12)
    inputs = tmp_path / "inputs"
    inputs.mkdir()
    write_coco_file(world.corpus, inputs / "corpus.json")
    write_predictions(world.victim_scenes.values(), inputs / "predictions.jsonl")
    write_embeddings(inputs / "embeddings.txt")

    def run_pipeline(out_dir):
        out_dir.mkdir()
        config = out_dir / "run.conf"
        config.write_text(
            f"corpus = {inputs / 'corpus.json'}\n"
            f"predictions = {inputs / 'predictions.jsonl'}\n"
            f"embeddings = {inputs / 'embeddings.txt'}\n"
            f"models = {out_dir / 'models.json'}\n"
            f"requests = {out_dir / 'requests.jsonl'}\n"
            f"plans = {out_dir / 'plans.jsonl'}\n"
            f"dump = {out_dir / 'dump.jsonl'}\n"
            f"report = {out_dir / 'report.json'}\n"
            "seed = 99\n"
        )
        flags = ["--config", str(config)]
        assert cli_main(["fit"] + flags) == 0
        assert cli_main(["rank-labels", "--request", "r2"] + flags) == 0
        assert cli_main(["plan", "--generator", "glow", "--percentile", "50"] + flags) == 0
        assert cli_main(["simulate", "--percentile", "50"] + flags) == 0
        assert cli_main(["evaluate", "--percentile", "50"] + flags) == 0
        return {
            name: (out_dir / name).read_bytes()
            for name in (
                "models.json",
                "requests.jsonl",
                "plans.jsonl",
                "dump.jsonl",
                "report.json",
            )
        }

    first = run_pipeline(tmp_path / "run1")
    second = run_pipeline(tmp_path / "run2")
    ok = first == second
    assert report_line(9, "repeated pipeline runs are byte-identical", ok), (
        [name for name in first if first[name] != second[name]]
    )
