"""Localize a victim and generate layout-matched attack plans.

Given a request "show me <target>", the pipeline:

  1. localizes the victim: the existing prediction box whose geometry is
     most plausible for the target category,
  2. scans corpus scenes containing the target, scoring each by victim
     alignment (s1, IoU-based) minus weighted layout-match loss (s2,
     assignment-based),
  3. relabels every non-victim object after its matched box in the
     winning corpus scene.

The baselines skip all of that: same/random/identity relabeling.

Run: python3 demos/03_generate_attack_plans.py
"""

from layoutattack.mixture import fit_all_categories
from layoutattack.planning import (
    PlanConfig,
    generate_plan,
    plan_identity,
    plan_random,
    plan_same,
)
from layoutattack.victims import build_victim_set
from layoutattack.synthetic import build_world


def show_plan(title, plan):
    labels = " ".join(
        f"{a.original_category}->{a.target_category}" for a in plan.assignments
    )
    extra = ""
    if plan.score is not None:
        extra = (
            f"  [source={plan.source_scene_id} s1={plan.s1:.3f} "
            f"s2={plan.s2:.4f} score={plan.score:.3f}]"
        )
    print(f"  {title:<9} {labels}{extra}")


def main():
    world = build_world(seed=2024, corpus_size=150, victim_count=10)
    models, _ = fit_all_categories(world.corpus, n_components=5, seed=7)

    request = world.requests[0]
    scene = world.victim_scenes[request.scene_id]
    print(
        f"request: show me a {request.target_category!r} in scene "
        f"{request.scene_id} (objects: {', '.join(sorted(scene.categories()))})"
    )

    victims = build_victim_set(request, scene, models)
    victim = victims.entries[0]
    print(
        f"victim localized: object {victim.index} "
        f"({scene.objects[victim.index].category!r} at "
        f"cy={victim.box.cy:.2f}) will become {victim.category!r}"
    )

    plan, ranked = generate_plan(scene, victims, world.corpus, PlanConfig())
    print(f"\ncandidates scored: {len(ranked)}; top three:")
    for candidate in ranked[:3]:
        print(
            f"  corpus scene {candidate.scene_id}: s1={candidate.s1:.3f} "
            f"s2={candidate.s2:.4f} score={candidate.score:.3f} "
            f"matched={candidate.matched_fraction:.2f} gate={'ok' if candidate.passed_gate else 'REJECTED'}"
        )

    print("\nplans (original->target per object):")
    show_plan("layout", plan)
    show_plan("same", plan_same(scene, victims, request.target_category))
    show_plan("random", plan_random(scene, victims, world.corpus.label_space, seed=5))
    show_plan("identity", plan_identity(scene, victims))


if __name__ == "__main__":
    main()
