"""Close the loop: simulated attacker plus the consistency metrics.

The seeded oracle attacker flips each object's label to its plan target
with probability p (p=1 is a perfect attacker), standing in for a real
perturbation method. The metric suite then scores the post-attack
predictions:

  T    victim boxes sit where the target category plausibly lives
  F    victims fooled with enough overlap, co-occurrence check passes
  E    the target label exists in the predictions
  R    some corpus scene recalls the predicted layout
  and the composite columns per request kind (here r2: T, F+T, E+R).

Run: python3 demos/04_simulate_and_evaluate.py
"""

import dataclasses

from layoutattack.metrics import evaluate
from layoutattack.mixture import fit_all_categories
from layoutattack.oracle import OracleConfig, execute_plan
from layoutattack.planning import generate_plan, plan_random, plan_same
from layoutattack.util import derive_seed
from layoutattack.victims import build_victim_set, random_victim_set
from layoutattack.synthetic import build_world


def plans_for(generator, world, models, seed=9):
    plans = []
    for request in world.requests:
        scene = world.victim_scenes[request.scene_id]
        if generator == "layout":
            victims = build_victim_set(request, scene, models)
            plan, _ = generate_plan(scene, victims, world.corpus)
        else:
            victims = random_victim_set(
                request, scene, derive_seed(seed, f"victim:{request.scene_id}")
            )
            if generator == "same":
                plan = plan_same(scene, victims, request.target_category)
            else:
                plan = plan_random(
                    scene,
                    victims,
                    world.corpus.label_space,
                    derive_seed(seed, f"plan:{request.scene_id}"),
                )
        plans.append(dataclasses.replace(plan, request_kind="r2", percentile=50))
    return plans


def main():
    world = build_world(seed=2024, corpus_size=150, victim_count=40)
    models, _ = fit_all_categories(world.corpus, n_components=5, seed=7)

    print("perfect attacker (flip probability 1.0), 40 scenes\n")
    for generator in ("layout", "same", "random"):
        plans = plans_for(generator, world, models)
        dumps = {
            p.scene_id: execute_plan(
                world.victim_scenes[p.scene_id],
                p,
                OracleConfig(1.0, 0.0, seed=derive_seed(3, p.scene_id)),
            )
            for p in plans
        }
        report = evaluate(world.requests, plans, dumps, world.corpus, models)
        rates = "  ".join(f"{k}={report.rates.get(k, 0):.2f}" for k in report.columns)
        print(f"  {generator:>7}: {rates}")

    print(
        "\nAll generators satisfy existence (the victim always flips to the\n"
        "target), but only layout-matched plans keep the scene recallable\n"
        "and the victim placement plausible."
    )
    print("\nAn imperfect attacker degrades everything smoothly:")
    plans = plans_for("layout", world, models)
    for p_flip in (1.0, 0.7, 0.4):
        dumps = {
            p.scene_id: execute_plan(
                world.victim_scenes[p.scene_id],
                p,
                OracleConfig(p_flip, 0.01, seed=derive_seed(3, p.scene_id)),
            )
            for p in plans
        }
        report = evaluate(world.requests, plans, dumps, world.corpus, models)
        rates = "  ".join(f"{k}={report.rates.get(k, 0):.2f}" for k in report.columns)
        print(f"  flip p={p_flip:.1f}: {rates}")


if __name__ == "__main__":
    main()
