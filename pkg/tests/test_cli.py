import json

import pytest

from layoutattack.cli import main, parse_config_file
from layoutattack.corpus import write_predictions
from layoutattack.synthetic import build_world, write_coco_file, write_embeddings
from layoutattack.util import read_jsonl


@pytest.fixture(scope="module")
def world_files(tmp_path_factory):
    base = tmp_path_factory.mktemp("world")
    world = build_world(seed=5, corpus_size=60, victim_count=8)
    write_coco_file(world.corpus, base / "corpus.json")
    write_predictions(world.victim_scenes.values(), base / "predictions.jsonl")
    write_embeddings(base / "embeddings.txt")
    return base


def run(args):
    return main([str(a) for a in args])


class TestPipeline:
    def test_full_run(self, world_files, tmp_path, capsys):
        out = tmp_path
        assert (
            run(
                [
                    "fit",
                    "--corpus", world_files / "corpus.json",
                    "--models", out / "models.json",
                    "--seed", 3,
                ]
            )
            == 0
        )
        assert (
            run(
                [
                    "rank-labels",
                    "--corpus", world_files / "corpus.json",
                    "--predictions", world_files / "predictions.jsonl",
                    "--embeddings", world_files / "embeddings.txt",
                    "--requests", out / "requests.jsonl",
                    "--request", "r2",
                ]
            )
            == 0
        )
        requests = [r for _, r in read_jsonl(out / "requests.jsonl")]
        assert {r["percentile"] for r in requests} == {5, 50, 95}
        assert (
            run(
                [
                    "plan",
                    "--corpus", world_files / "corpus.json",
                    "--predictions", world_files / "predictions.jsonl",
                    "--models", out / "models.json",
                    "--requests", out / "requests.jsonl",
                    "--plans", out / "plans.jsonl",
                    "--generator", "glow",
                    "--percentile", 95,
                    "--seed", 3,
                ]
            )
            == 0
        )
        plans = [p for _, p in read_jsonl(out / "plans.jsonl")]
        assert all(p["percentile"] == 95 for p in plans)
        assert (
            run(
                [
                    "simulate",
                    "--corpus", world_files / "corpus.json",
                    "--predictions", world_files / "predictions.jsonl",
                    "--plans", out / "plans.jsonl",
                    "--dump", out / "dump.jsonl",
                    "--seed", 3,
                ]
            )
            == 0
        )
        first_record = next(iter(read_jsonl(out / "dump.jsonl")))[1]
        assert first_record["header"]["seed"] == 3
        assert (
            run(
                [
                    "evaluate",
                    "--corpus", world_files / "corpus.json",
                    "--models", out / "models.json",
                    "--requests", out / "requests.jsonl",
                    "--plans", out / "plans.jsonl",
                    "--dump", out / "dump.jsonl",
                    "--report", out / "report.json",
                    "--percentile", 95,
                ]
            )
            == 0
        )
        report = json.loads((out / "report.json").read_text())
        assert report["request_kind"] == "r2"
        assert set(report["columns"]) == {"T", "F+T", "E+R"}
        table = capsys.readouterr().out
        assert "E+R" in table

    def test_r1_pipeline_reports_fooling_columns(self, world_files, tmp_path):
        out = tmp_path
        run(
            [
                "rank-labels",
                "--corpus", world_files / "corpus.json",
                "--predictions", world_files / "predictions.jsonl",
                "--embeddings", world_files / "embeddings.txt",
                "--requests", out / "requests.jsonl",
                "--request", "r1",
                "--percentile", 95,
            ]
        )
        assert (
            run(
                [
                    "plan",
                    "--corpus", world_files / "corpus.json",
                    "--predictions", world_files / "predictions.jsonl",
                    "--requests", out / "requests.jsonl",
                    "--plans", out / "plans.jsonl",
                    "--generator", "glow",
                    "--seed", 4,
                ]
            )
            == 0
        )
        run(
            [
                "simulate",
                "--corpus", world_files / "corpus.json",
                "--predictions", world_files / "predictions.jsonl",
                "--plans", out / "plans.jsonl",
                "--dump", out / "dump.jsonl",
                "--seed", 4,
            ]
        )
        assert (
            run(
                [
                    "evaluate",
                    "--corpus", world_files / "corpus.json",
                    "--requests", out / "requests.jsonl",
                    "--plans", out / "plans.jsonl",
                    "--dump", out / "dump.jsonl",
                    "--report", out / "report.json",
                ]
            )
            == 0
        )
        report = json.loads((out / "report.json").read_text())
        assert report["columns"] == ["F", "F+R"]

    def test_generator_switch_and_sweep(self, world_files, tmp_path):
        out = tmp_path
        run(
            [
                "fit",
                "--corpus", world_files / "corpus.json",
                "--models", out / "models.json",
                "--seed", 3,
            ]
        )
        run(
            [
                "rank-labels",
                "--corpus", world_files / "corpus.json",
                "--predictions", world_files / "predictions.jsonl",
                "--embeddings", world_files / "embeddings.txt",
                "--requests", out / "requests.jsonl",
                "--request", "r2",
                "--percentile", 50,
            ]
        )
        for generator in ("same", "random", "identity"):
            assert (
                run(
                    [
                        "plan",
                        "--corpus", world_files / "corpus.json",
                        "--predictions", world_files / "predictions.jsonl",
                        "--requests", out / "requests.jsonl",
                        "--plans", out / f"plans_{generator}.jsonl",
                        "--generator", generator,
                        "--seed", 3,
                    ]
                )
                == 0
            )
            plans = [p for _, p in read_jsonl(out / f"plans_{generator}.jsonl")]
            assert plans and all(p["generator"] == generator for p in plans)
        assert (
            run(
                [
                    "plan",
                    "--corpus", world_files / "corpus.json",
                    "--predictions", world_files / "predictions.jsonl",
                    "--models", out / "models.json",
                    "--requests", out / "requests.jsonl",
                    "--plans", out / "sweep.jsonl",
                    "--generator", "glow",
                    "--lambda-sweep", "0.5,1.0",
                    "--seed", 3,
                ]
            )
            == 0
        )
        assert (out / "sweep_lambda0.5.jsonl").exists()
        assert (out / "sweep_lambda1.jsonl").exists()

    def test_empty_request_file(self, world_files, tmp_path):
        requests = tmp_path / "empty.jsonl"
        requests.write_text("")
        plans = tmp_path / "plans.jsonl"
        assert (
            run(
                [
                    "plan",
                    "--corpus", world_files / "corpus.json",
                    "--predictions", world_files / "predictions.jsonl",
                    "--requests", requests,
                    "--plans", plans,
                    "--generator", "identity",
                    "--seed", 1,
                ]
            )
            == 0
        )
        assert plans.read_text() == ""

    def test_missing_plan_file_fails(self, world_files, tmp_path):
        code = run(
            [
                "simulate",
                "--corpus", world_files / "corpus.json",
                "--predictions", world_files / "predictions.jsonl",
                "--plans", tmp_path / "nope.jsonl",
                "--dump", tmp_path / "dump.jsonl",
                "--seed", 1,
            ]
        )
        assert code != 0

    def test_missing_seed_fails(self, world_files, tmp_path):
        code = run(
            [
                "fit",
                "--corpus", world_files / "corpus.json",
                "--models", tmp_path / "models.json",
            ]
        )
        assert code != 0

    def test_duplicate_scene_plans_rejected_by_simulate(self, world_files, tmp_path):
        out = tmp_path
        run(
            [
                "fit",
                "--corpus", world_files / "corpus.json",
                "--models", out / "models.json",
                "--seed", 3,
            ]
        )
        run(
            [
                "rank-labels",
                "--corpus", world_files / "corpus.json",
                "--predictions", world_files / "predictions.jsonl",
                "--embeddings", world_files / "embeddings.txt",
                "--requests", out / "requests.jsonl",
                "--request", "r2",
            ]
        )
        run(
            [
                "plan",
                "--corpus", world_files / "corpus.json",
                "--predictions", world_files / "predictions.jsonl",
                "--models", out / "models.json",
                "--requests", out / "requests.jsonl",
                "--plans", out / "plans.jsonl",
                "--generator", "same",
                "--seed", 3,
            ]
        )
        code = run(
            [
                "simulate",
                "--corpus", world_files / "corpus.json",
                "--predictions", world_files / "predictions.jsonl",
                "--plans", out / "plans.jsonl",
                "--dump", out / "dump.jsonl",
                "--seed", 3,
            ]
        )
        assert code != 0


class TestConfigFile:
    def test_parse_and_override(self, tmp_path):
        config = tmp_path / "run.conf"
        config.write_text(
            "# pipeline settings\n"
            "seed = 11\n"
            "lambda_weight = 2.0\n"
            "generator = same\n"
        )
        values = parse_config_file(config)
        assert values == {"seed": "11", "lambda_weight": "2.0", "generator": "same"}

    def test_flags_override_file(self, world_files, tmp_path):
        config = tmp_path / "run.conf"
        config.write_text(
            f"corpus = {world_files / 'corpus.json'}\n"
            f"models = {tmp_path / 'from_config.json'}\n"
            "seed = 11\n"
        )
        assert run(["fit", "--config", config]) == 0
        assert (tmp_path / "from_config.json").exists()
        assert (
            run(["fit", "--config", config, "--models", tmp_path / "flag.json"]) == 0
        )
        assert (tmp_path / "flag.json").exists()

    def test_bad_config_line(self, tmp_path):
        config = tmp_path / "run.conf"
        config.write_text("this is not a setting\n")
        assert run(["fit", "--config", config]) != 0


class TestRankLabelsEdgeCases:
    def test_scene_with_every_category_is_skipped(self, tmp_path):
        import numpy as np

        from layoutattack.corpus import Corpus
        from layoutattack.scene import LabeledBox, SceneLayout
        from layoutattack.synthetic import CATEGORIES, label_space, sample_box

        rng = np.random.default_rng(0)
        # The prediction scene contains every category, so no target label
        # can be chosen for it.
        full = SceneLayout(
            "full",
            640,
            480,
            tuple(
                LabeledBox(sample_box(rng, c), c, confidence=0.9) for c in CATEGORIES
            ),
        )
        annotations = tuple(LabeledBox(o.box, o.category) for o in full.objects[:2])
        corpus = Corpus(label_space(), [SceneLayout("c0", 640, 480, annotations)])
        write_coco_file(corpus, tmp_path / "corpus.json")
        write_predictions([full], tmp_path / "predictions.jsonl")
        write_embeddings(tmp_path / "embeddings.txt")
        assert (
            run(
                [
                    "rank-labels",
                    "--corpus", tmp_path / "corpus.json",
                    "--predictions", tmp_path / "predictions.jsonl",
                    "--embeddings", tmp_path / "embeddings.txt",
                    "--requests", tmp_path / "requests.jsonl",
                    "--request", "r2",
                ]
            )
            == 0
        )
        assert (tmp_path / "requests.jsonl").read_text() == ""
