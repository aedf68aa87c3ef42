"""Layout-consistent attack planning and evaluation for object-detection scenes.

The library turns an attack request against a victim scene into a
full-scene target-label plan: it localizes victim objects with
per-category placement mixtures, relabels the remaining objects after the
best-matching corpus layout, and scores outcomes with context-consistency
metrics. A seeded oracle attacker closes the loop without any detector.
"""

__version__ = "0.1.0"

from .boxes import BoundingBox, from_pixel_xywh, giou, iou, l1_box
from .corpus import (
    CooccurrenceMatrix,
    Corpus,
    build_cooccurrence,
    category_samples,
    load_annotations,
    load_predictions,
    write_predictions,
)
from .errors import (
    AllCandidatesRejectedError,
    FormatError,
    InfeasibleMatchError,
    NoFeasibleLayoutError,
    PlanningError,
    ValidationError,
    VersionError,
)
from .metrics import (
    EvaluationReport,
    MetricConfig,
    evaluate,
    metric_C,
    metric_E,
    metric_F,
    metric_R,
    metric_T,
)
from .mixture import (
    CategoryGMM,
    fit_all_categories,
    fit_gmm,
    load_models,
    save_models,
    weighted_density,
)
from .oracle import OracleConfig, execute_plan
from .planning import (
    AttackPlan,
    PlanConfig,
    candidate_pool,
    composite_score,
    generate_plan,
    load_plans,
    match_layout,
    plan_identity,
    plan_random,
    plan_same,
    victim_alignment,
    write_plans,
)
from .scene import LabeledBox, LabelSpace, SceneLayout
from .victims import (
    AttackRequest,
    VictimSet,
    build_victim_set,
    load_requests,
    localize_r2,
    localize_r3,
    random_victim_set,
    select_victim_r1,
    write_requests,
)
from .words import (
    WordVectorTable,
    avg_distance,
    cosine_distance,
    load_word_vectors,
    rank_targets,
)
