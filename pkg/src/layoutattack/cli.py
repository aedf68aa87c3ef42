"""Command-line pipeline: fit, rank-labels, plan, simulate, evaluate.

Every command reads a flat key=value config file plus flag overrides
(flags win), runs deterministically for a given seed, and keeps going
past per-scene failures so batch runs always finish.
"""

from __future__ import annotations

import argparse
import dataclasses
import logging
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import Any, Callable, Optional, Sequence

from . import __version__
from .corpus import Corpus, load_annotations, load_predictions, write_predictions
from .errors import FormatError, PlanningError, ValidationError
from .metrics import MetricConfig, evaluate
from .mixture import (
    DEFAULT_COMPONENTS,
    fit_all_categories,
    load_models,
    save_models,
)
from .oracle import OracleConfig, execute_plan
from .planning import (
    GENERATOR_NAMES,
    AttackPlan,
    PlanConfig,
    generate_plan,
    load_plans,
    plan_identity,
    plan_random,
    plan_same,
    write_plans,
)
from .util import derive_seed, write_json
from .victims import (
    AttackRequest,
    build_victim_set,
    load_requests,
    random_victim_set,
    write_requests,
)
from .words import VALID_PERCENTILES, load_word_vectors, rank_targets

log = logging.getLogger("layoutattack")


class RunConfig:
    """Flat run configuration: file values overridden by CLI flags."""

    def __init__(self, values: dict[str, Any]):
        self.values = values

    @classmethod
    def from_args(cls, args: argparse.Namespace) -> "RunConfig":
        values: dict[str, Any] = {}
        config_path = getattr(args, "config", None)
        if config_path:
            values.update(parse_config_file(config_path))
        for key, value in vars(args).items():
            if key in ("config", "func", "command") or value is None:
                continue
            values[key] = value
        return cls(values)

    def get(self, key: str, default: Any = None) -> Any:
        return self.values.get(key, default)

    def get_int(self, key: str, default: Optional[int] = None) -> Optional[int]:
        value = self.values.get(key, default)
        return None if value is None else int(value)

    def get_float(self, key: str, default: Optional[float] = None) -> Optional[float]:
        value = self.values.get(key, default)
        return None if value is None else float(value)

    def get_str(self, key: str, default: Optional[str] = None) -> Optional[str]:
        value = self.values.get(key, default)
        return None if value is None else str(value)

    def require(self, key: str) -> Any:
        if self.values.get(key) is None:
            raise ValidationError(
                f"missing required setting {key!r} (set it in the config file "
                f"or pass --{key.replace('_', '-')})"
            )
        return self.values[key]

    def input_path(self, key: str) -> Path:
        path = Path(str(self.require(key)))
        if not path.exists():
            raise ValidationError(f"{key}: path {path} does not exist")
        return path

    def output_path(self, key: str) -> Path:
        path = Path(str(self.require(key)))
        if path.parent and not path.parent.exists():
            path.parent.mkdir(parents=True, exist_ok=True)
        return path

    def seed(self) -> int:
        return int(self.require("seed"))

    def workers(self) -> int:
        return max(1, self.get_int("workers", 1))

    def plan_config(self) -> PlanConfig:
        return PlanConfig(
            lambda_weight=self.get_float("lambda_weight", 1.0),
            match_fraction_threshold=self.get_float("match_fraction_threshold", 0.95),
            matched_giou_floor=self.get_float("matched_giou_floor", 0.0),
            candidate_cap=self.get_int("candidate_cap", 20000),
        )

    def metric_config(self) -> MetricConfig:
        return MetricConfig(
            density_floor=self.get_float("density_floor", 0.02),
            recall_floor=self.get_float("recall_floor", 0.5),
            fool_iou_floor=self.get_float("fool_iou_floor", 0.3),
        )


def parse_config_file(path: str | Path) -> dict[str, Any]:
    """Parse `key = value` lines; blank lines and # comments are ignored."""
    values: dict[str, Any] = {}
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise FormatError(f"{path}:{lineno}: expected 'key = value'")
            key, _, value = line.partition("=")
            values[key.strip().replace("-", "_")] = value.strip()
    return values


def _run_tasks(tasks: Sequence[Callable[[], Any]], workers: int) -> list[Any]:
    if workers <= 1 or len(tasks) <= 1:
        return [task() for task in tasks]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        futures = [pool.submit(task) for task in tasks]
        return [f.result() for f in futures]


def _filter_requests(items: list, cfg: RunConfig) -> list:
    """Restrict requests or plans to a percentile tag and/or request kind."""
    percentile = cfg.get_int("percentile")
    kind = cfg.get_str("request_kind")
    if percentile is not None:
        items = [item for item in items if item.percentile == percentile]
    if kind is not None:
        items = [
            item
            for item in items
            if (getattr(item, "kind", None) or getattr(item, "request_kind", None))
            == kind
        ]
    return items


# ---------------------------------------------------------------- commands


def cmd_fit(cfg: RunConfig) -> int:
    corpus = load_annotations(cfg.input_path("corpus"))
    components = cfg.get_int("components", DEFAULT_COMPONENTS)
    models, summaries = fit_all_categories(
        corpus,
        n_components=components,
        seed=cfg.seed(),
        workers=cfg.workers(),
    )
    save_models(models, cfg.output_path("models"), requested_components=components)
    for s in summaries:
        if s.skipped:
            print(f"{s.category:>16}  samples={s.sample_count:<6} skipped (too few samples)")
        else:
            note = "" if s.fitted_components == s.requested_components else "  (reduced)"
            print(
                f"{s.category:>16}  samples={s.sample_count:<6} "
                f"components={s.fitted_components}  "
                f"loglik={s.final_log_likelihood:.3f}{note}"
            )
    print(f"fitted {len(models)} of {len(corpus.label_space)} categories")
    return 0


def cmd_rank_labels(cfg: RunConfig) -> int:
    corpus = load_annotations(cfg.input_path("corpus"))
    scenes = load_predictions(cfg.input_path("predictions"), corpus.label_space)
    table = load_word_vectors(cfg.input_path("embeddings"), corpus.label_space)
    kind = cfg.get_str("request_kind", "r2")
    count = cfg.get_int("count", 2 if kind == "r3" else 1)
    percentile = cfg.get_int("percentile")
    percentiles = (percentile,) if percentile else VALID_PERCENTILES

    requests: list[AttackRequest] = []
    failures = 0
    for scene_id in sorted(scenes):
        scene = scenes[scene_id]
        for p in percentiles:
            try:
                target = rank_targets(scene, table, p)
                requests.append(
                    AttackRequest(
                        scene_id=scene_id,
                        kind=kind,
                        target_category=target,
                        percentile=p,
                        count=count if kind == "r3" else 1,
                    )
                )
            except ValidationError as exc:
                failures += 1
                log.warning("scene %s: %s", scene_id, exc)
    write_requests(requests, cfg.output_path("requests"))
    print(f"wrote {len(requests)} requests ({failures} scene/percentile failures)")
    return 0


def _plan_one(
    request: AttackRequest,
    scenes,
    corpus: Corpus,
    models,
    generator: str,
    plan_config: PlanConfig,
    seed: int,
) -> Optional[AttackPlan]:
    scene = scenes.get(request.scene_id)
    if scene is None:
        log.warning("scene %s: no prediction record, skipping", request.scene_id)
        return None
    tag = f"{request.scene_id}:{request.kind}:{request.percentile}"
    try:
        if generator == "glow":
            victims = build_victim_set(request, scene, models)
            plan, _ = generate_plan(scene, victims, corpus, plan_config)
        else:
            victims = random_victim_set(request, scene, derive_seed(seed, f"victim:{tag}"))
            if generator == "same":
                plan = plan_same(scene, victims, request.target_category)
            elif generator == "random":
                plan = plan_random(
                    scene, victims, corpus.label_space, derive_seed(seed, f"plan:{tag}")
                )
            else:
                plan = plan_identity(scene, victims)
    except (PlanningError, ValidationError) as exc:
        log.warning("scene %s: %s", request.scene_id, exc)
        return None
    return dataclasses.replace(
        plan, request_kind=request.kind, percentile=request.percentile
    )


def cmd_plan(cfg: RunConfig) -> int:
    corpus = load_annotations(cfg.input_path("corpus"))
    scenes = load_predictions(cfg.input_path("predictions"), corpus.label_space)
    requests = _filter_requests(load_requests(cfg.input_path("requests")), cfg)
    generator = cfg.get_str("generator", "glow")
    if generator not in GENERATOR_NAMES:
        raise ValidationError(f"unknown generator {generator!r}; use one of {GENERATOR_NAMES}")
    seed = cfg.seed()
    models = {}
    if generator == "glow" and any(r.kind in ("r2", "r3") for r in requests):
        models = load_models(cfg.input_path("models"))

    sweep = cfg.get_str("lambda_sweep")
    lambdas = (
        [float(v) for v in str(sweep).split(",")]
        if sweep
        else [cfg.get_float("lambda_weight", 1.0)]
    )
    out_path = cfg.output_path("plans")
    requests = sorted(requests, key=lambda r: (r.scene_id, r.kind, r.percentile or 0))

    exit_code = 0
    for lam in lambdas:
        plan_config = dataclasses.replace(cfg.plan_config(), lambda_weight=lam)
        tasks = [
            (
                lambda r=request: _plan_one(
                    r, scenes, corpus, models, generator, plan_config, seed
                )
            )
            for request in requests
        ]
        results = _run_tasks(tasks, cfg.workers())
        plans = [p for p in results if p is not None]
        path = (
            out_path
            if len(lambdas) == 1
            else out_path.with_name(f"{out_path.stem}_lambda{lam:g}{out_path.suffix}")
        )
        write_plans(plans, path)
        scores = sorted(p.score for p in plans if p.score is not None)
        if scores:
            mid = scores[len(scores) // 2]
            print(
                f"lambda={lam:g}: {len(plans)}/{len(requests)} plans; score "
                f"min={scores[0]:.4f} median={mid:.4f} max={scores[-1]:.4f} -> {path}"
            )
        else:
            print(f"lambda={lam:g}: {len(plans)}/{len(requests)} plans -> {path}")
    return exit_code


def cmd_simulate(cfg: RunConfig) -> int:
    plans = _filter_requests(load_plans(cfg.input_path("plans")), cfg)
    seen: set[str] = set()
    for plan in plans:
        if plan.scene_id in seen:
            raise ValidationError(
                f"plan file has multiple plans for scene {plan.scene_id!r}; "
                f"restrict with --percentile before simulating"
            )
        seen.add(plan.scene_id)
    label_space = load_annotations(cfg.input_path("corpus")).label_space
    scenes = load_predictions(cfg.input_path("predictions"), label_space)
    seed = cfg.seed()
    p = cfg.get_float("flip_probability", 1.0)
    sigma = cfg.get_float("jitter_scale", 0.0)

    def simulate_one(plan: AttackPlan):
        scene = scenes.get(plan.scene_id)
        if scene is None:
            log.warning("plan %s: no original scene, skipping", plan.scene_id)
            return None
        config = OracleConfig(
            flip_probability=p,
            jitter_scale=sigma,
            seed=derive_seed(seed, f"simulate:{plan.scene_id}"),
        )
        return execute_plan(scene, plan, config)

    results = _run_tasks([lambda pl=plan: simulate_one(pl) for plan in plans], cfg.workers())
    attacked = [s for s in results if s is not None]
    write_predictions(
        attacked,
        cfg.output_path("dump"),
        header={"seed": seed, "flip_probability": p, "jitter_scale": sigma},
    )
    print(f"simulated {len(attacked)}/{len(plans)} plans -> {cfg.get_str('dump')}")
    return 0


def cmd_evaluate(cfg: RunConfig) -> int:
    corpus = load_annotations(cfg.input_path("corpus"))
    requests = _filter_requests(load_requests(cfg.input_path("requests")), cfg)
    scene_ids = [r.scene_id for r in requests]
    if len(set(scene_ids)) != len(scene_ids):
        raise ValidationError(
            "multiple requests per scene; evaluate one percentile at a time "
            "(pass --percentile)"
        )
    plans = _filter_requests(load_plans(cfg.input_path("plans")), cfg)
    predictions = load_predictions(cfg.input_path("dump"), corpus.label_space)
    models = {}
    models_path = cfg.get_str("models")
    if models_path:
        models = load_models(cfg.input_path("models"))
    report = evaluate(
        requests, plans, predictions, corpus, models, config=cfg.metric_config()
    )
    write_json(report.to_dict(), cfg.output_path("report"))
    print(report.render_table())
    return 0


# ---------------------------------------------------------------- parser


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="layoutattack",
        description="Layout-consistent attack planning and evaluation for "
        "object-detection scenes",
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p: argparse.ArgumentParser) -> None:
        p.add_argument("--config", help="flat key = value config file")
        p.add_argument("--seed", type=int, help="run seed (required when stochastic)")
        p.add_argument("--workers", type=int, help="parallel workers (default 1)")
        p.add_argument("--corpus", help="COCO-style annotation file")
        p.add_argument("--predictions", help="prediction scenes (JSONL)")

    fit = sub.add_parser("fit", help="fit per-category placement mixtures")
    common(fit)
    fit.add_argument("--models", help="output model file")
    fit.add_argument("--components", type=int, help="mixture components (default 5)")
    fit.set_defaults(func=cmd_fit)

    rank = sub.add_parser("rank-labels", help="emit target-label requests per scene")
    common(rank)
    rank.add_argument("--embeddings", help="word-vector text file")
    rank.add_argument("--requests", help="output request file (JSONL)")
    rank.add_argument("--request", dest="request_kind", choices=("r1", "r2", "r3"))
    rank.add_argument("--percentile", type=int, choices=VALID_PERCENTILES)
    rank.add_argument("--count", type=int, help="instance count for r3 (default 2)")
    rank.set_defaults(func=cmd_rank_labels)

    plan = sub.add_parser("plan", help="generate attack plans for requests")
    common(plan)
    plan.add_argument("--models", help="fitted model file (for r2/r3 localization)")
    plan.add_argument("--requests", help="request file (JSONL)")
    plan.add_argument("--plans", help="output plan file (JSONL)")
    plan.add_argument("--generator", choices=GENERATOR_NAMES)
    plan.add_argument(
        "--request", dest="request_kind", choices=("r1", "r2", "r3"),
        help="only plan requests of this kind",
    )
    plan.add_argument("--percentile", type=int, choices=VALID_PERCENTILES)
    plan.add_argument(
        "--lambda", dest="lambda_weight", type=float, help="match-loss weight (default 1.0)"
    )
    plan.add_argument(
        "--lambda-sweep", dest="lambda_sweep", help="comma-separated lambdas; one plan file each"
    )
    plan.add_argument("--match-threshold", dest="match_fraction_threshold", type=float)
    plan.add_argument("--giou-floor", dest="matched_giou_floor", type=float)
    plan.add_argument("--candidate-cap", dest="candidate_cap", type=int)
    plan.set_defaults(func=cmd_plan)

    sim = sub.add_parser("simulate", help="run the seeded oracle attacker on plans")
    common(sim)
    sim.add_argument("--plans", help="plan file (JSONL)")
    sim.add_argument("--dump", help="output prediction dump (JSONL)")
    sim.add_argument(
        "--request", dest="request_kind", choices=("r1", "r2", "r3"),
        help="only simulate plans of this kind",
    )
    sim.add_argument("--percentile", type=int, choices=VALID_PERCENTILES)
    sim.add_argument("--flip-probability", dest="flip_probability", type=float)
    sim.add_argument("--jitter", dest="jitter_scale", type=float)
    sim.set_defaults(func=cmd_simulate)

    ev = sub.add_parser("evaluate", help="score a prediction dump against requests")
    common(ev)
    ev.add_argument("--models", help="fitted model file (for the density metric)")
    ev.add_argument("--requests", help="request file (JSONL)")
    ev.add_argument("--plans", help="plan file (JSONL)")
    ev.add_argument("--dump", help="post-attack prediction dump (JSONL)")
    ev.add_argument("--report", help="output report (JSON)")
    ev.add_argument(
        "--request", dest="request_kind", choices=("r1", "r2", "r3"),
        help="only evaluate requests of this kind",
    )
    ev.add_argument("--percentile", type=int, choices=VALID_PERCENTILES)
    ev.add_argument("--density-floor", dest="density_floor", type=float)
    ev.add_argument("--recall-floor", dest="recall_floor", type=float)
    ev.set_defaults(func=cmd_evaluate)

    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    logging.basicConfig(
        level=logging.INFO, format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr
    )
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = RunConfig.from_args(args)
        return args.func(cfg)
    except (ValidationError, FormatError, PlanningError) as exc:
        log.error("%s", exc)
        return 1
    except OSError as exc:
        log.error("%s", exc)
        return 1


if __name__ == "__main__":
    sys.exit(main())
