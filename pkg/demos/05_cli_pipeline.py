"""Drive the whole pipeline through the command-line interface.

Equivalent shell session (after demos/00_build_synthetic_world.py):

  layoutattack fit        --corpus corpus.json --models models.json --seed 7
  layoutattack rank-labels --corpus corpus.json --predictions predictions.jsonl \
                           --embeddings embeddings.txt --requests requests.jsonl --request r2
  layoutattack plan       --corpus corpus.json --predictions predictions.jsonl \
                           --models models.json --requests requests.jsonl \
                           --plans plans.jsonl --generator glow --percentile 50 --seed 7
  layoutattack simulate   --corpus corpus.json --predictions predictions.jsonl \
                           --plans plans.jsonl --dump dump.jsonl --percentile 50 --seed 7
  layoutattack evaluate   --corpus corpus.json --models models.json \
                           --requests requests.jsonl --plans plans.jsonl \
                           --dump dump.jsonl --report report.json --percentile 50

This script does the same in-process inside a temp directory, using a
flat config file instead of repeating the path flags.

Run: python3 demos/05_cli_pipeline.py
"""

import json
import tempfile
from pathlib import Path

from layoutattack.cli import main as layoutattack
from layoutattack.corpus import write_predictions
from layoutattack.synthetic import build_world, write_coco_file, write_embeddings


def main():
    with tempfile.TemporaryDirectory() as tmp:
        base = Path(tmp)
        world = build_world(seed=2024, corpus_size=120, victim_count=15)
        write_coco_file(world.corpus, base / "corpus.json")
        write_predictions(world.victim_scenes.values(), base / "predictions.jsonl")
        write_embeddings(base / "embeddings.txt")

        config = base / "run.conf"
        config.write_text(
            f"corpus = {base / 'corpus.json'}\n"
            f"predictions = {base / 'predictions.jsonl'}\n"
            f"embeddings = {base / 'embeddings.txt'}\n"
            f"models = {base / 'models.json'}\n"
            f"requests = {base / 'requests.jsonl'}\n"
            f"plans = {base / 'plans.jsonl'}\n"
            f"dump = {base / 'dump.jsonl'}\n"
            f"report = {base / 'report.json'}\n"
            "seed = 7\n"
        )
        flags = ["--config", str(config)]

        for argv in (
            ["fit"],
            ["rank-labels", "--request", "r2"],
            ["plan", "--generator", "glow", "--percentile", "50"],
            ["simulate", "--percentile", "50"],
            ["evaluate", "--percentile", "50"],
        ):
            print(f"\n$ layoutattack {' '.join(argv)}")
            code = layoutattack(argv + flags)
            assert code == 0, f"command failed: {argv}"

        report = json.loads((base / "report.json").read_text())
        print(
            f"\nreport written with {report['evaluated_count']} evaluated scenes "
            f"and columns {report['columns']}"
        )


if __name__ == "__main__":
    main()
