"""Build a small synthetic dataset on disk and show every file format.

Creates, under demos/data/:

  corpus.json       COCO-style annotations (the layout corpus)
  predictions.jsonl detector-style predictions for the victim scenes
  embeddings.txt    a toy word-vector table for the label space

The synthetic world gives each category a characteristic image position
(balloons and kites up top, benches and hydrants at the bottom), which is
exactly the structure the placement models and layout matching exploit.

Run: python3 demos/00_build_synthetic_world.py
"""

from pathlib import Path

from layoutattack.corpus import write_predictions
from layoutattack.synthetic import (
    ANCHOR_PAIRS,
    anchor,
    build_world,
    write_coco_file,
    write_embeddings,
)

DATA_DIR = Path(__file__).parent / "data"


def main():
    DATA_DIR.mkdir(exist_ok=True)
    world = build_world(seed=2024, corpus_size=150, victim_count=25)

    print("category anchors (cx, cy, w, h):")
    for a, b in ANCHOR_PAIRS:
        print(f"  {a:>8} / {b:<8} -> {anchor(a)}")

    write_coco_file(world.corpus, DATA_DIR / "corpus.json")
    write_predictions(world.victim_scenes.values(), DATA_DIR / "predictions.jsonl")
    write_embeddings(DATA_DIR / "embeddings.txt")

    print(f"\ncorpus scenes:      {len(world.corpus)}")
    print(f"victim scenes:      {len(world.victim_scenes)}")
    print(f"total annotations:  {world.corpus.annotation_count}")
    print(f"\nwrote {DATA_DIR / 'corpus.json'}")
    print(f"wrote {DATA_DIR / 'predictions.jsonl'}")
    print(f"wrote {DATA_DIR / 'embeddings.txt'}")
    print(
        "\nnext: demos/01_fit_location_models.py, or the CLI:\n"
        f"  layoutattack fit --corpus {DATA_DIR / 'corpus.json'} "
        f"--models {DATA_DIR / 'models.json'} --seed 7"
    )


if __name__ == "__main__":
    main()
