"""Pick target labels for a scene by word-vector distance.

A target label must be absent from the scene. Absent categories are
ranked by their mean cosine distance to the labels already present, and a
percentile tag picks a spot in that ranking: 5 lands on far-away labels
(hard, out-of-context targets), 95 on close-by ones (easy targets).

Run: python3 demos/02_rank_target_labels.py
"""

from layoutattack.words import absent_categories, avg_distance, rank_targets
from layoutattack.synthetic import build_world, label_space, write_embeddings


def main(tmp_embeddings="/tmp/demo_embeddings.txt"):
    write_embeddings(tmp_embeddings)
    from layoutattack.words import load_word_vectors

    table = load_word_vectors(tmp_embeddings, label_space())

    world = build_world(seed=2024, corpus_size=30, victim_count=5)
    scene_id, scene = next(iter(world.victim_scenes.items()))
    present = sorted(scene.categories())
    print(f"scene {scene_id} contains: {', '.join(present)}")

    print("\nabsent categories by mean word distance (descending):")
    scored = sorted(
        ((avg_distance(c, scene, table), c) for c in absent_categories(scene, table)),
        reverse=True,
    )
    for distance, category in scored:
        print(f"  {category:>8}  {distance:.4f}")

    print("\npercentile picks:")
    for percentile in (5, 50, 95):
        print(f"  {percentile:>2} -> {rank_targets(scene, table, percentile)}")
    print(
        "\nWith anchor-derived toy embeddings, the 95th-percentile pick is\n"
        "usually the anchor partner of something already in the scene."
    )


if __name__ == "__main__":
    main()
