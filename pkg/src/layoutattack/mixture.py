"""Per-category Gaussian mixtures over normalized box geometry.

A fitted mixture scores how plausible a (cx, cy, w, h) placement is for its
category. The exposed density keeps an explicit 1/Q factor, so it is the
standard mixture density divided by the component count; every threshold in
this package is calibrated against that same scaling, and argmax users are
unaffected.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Optional

import numpy as np
from scipy.special import logsumexp

from .corpus import Corpus, category_samples
from .errors import FormatError, ValidationError, VersionError
from .util import derive_seed

log = logging.getLogger(__name__)

MODEL_FILE_VERSION = 1
DEFAULT_COMPONENTS = 5
COVARIANCE_FLOOR = 1e-6
_LOG_2PI = np.log(2.0 * np.pi)


@dataclass(frozen=True)
class CategoryGMM:
    """Fitted mixture for one category: weights, means, full covariances."""

    category: str
    weights: np.ndarray
    means: np.ndarray
    covariances: np.ndarray
    log_likelihood_trace: tuple[float, ...] = field(default=())

    def __post_init__(self):
        q = self.weights.shape[0]
        if q < 1:
            raise ValidationError("mixture needs at least one component")
        if self.means.shape != (q, 4) or self.covariances.shape != (q, 4, 4):
            raise ValidationError(
                f"inconsistent mixture shapes: weights {self.weights.shape}, "
                f"means {self.means.shape}, covariances {self.covariances.shape}"
            )
        if abs(float(self.weights.sum()) - 1.0) > 1e-9:
            raise ValidationError(f"weights sum to {self.weights.sum()}, not 1")
        for k in range(q):
            try:
                np.linalg.cholesky(self.covariances[k])
            except np.linalg.LinAlgError:
                raise ValidationError(
                    f"component {k} covariance not positive definite"
                ) from None

    @property
    def component_count(self) -> int:
        return self.weights.shape[0]

    @property
    def final_log_likelihood(self) -> Optional[float]:
        return self.log_likelihood_trace[-1] if self.log_likelihood_trace else None


def _component_log_pdfs(model: CategoryGMM, x: np.ndarray) -> np.ndarray:
    """(n, Q) log densities of each component at each probe point."""
    n = x.shape[0]
    q = model.component_count
    out = np.empty((n, q), dtype=float)
    for k in range(q):
        chol = np.linalg.cholesky(model.covariances[k])
        diff = x - model.means[k]
        solved = np.linalg.solve(chol, diff.T)
        maha = np.sum(solved * solved, axis=0)
        log_det = 2.0 * np.sum(np.log(np.diag(chol)))
        out[:, k] = -0.5 * (4.0 * _LOG_2PI + log_det + maha)
    return out


def weighted_density(model: CategoryGMM, x: np.ndarray) -> float | np.ndarray:
    """Mixture density divided by the component count.

    Accepts a single (4,) point or an (n, 4) batch; returns a float or an
    (n,) array accordingly. Always nonnegative.
    """
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    pts = x[None, :] if single else x
    if pts.shape[1] != 4:
        raise ValidationError(f"expected 4-d geometry points, got shape {x.shape}")
    log_pdfs = _component_log_pdfs(model, pts)
    with np.errstate(divide="ignore"):
        log_mix = logsumexp(log_pdfs + np.log(model.weights)[None, :], axis=1)
    values = np.exp(log_mix) / model.component_count
    return float(values[0]) if single else values


def _kmeans_plus_plus(samples: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    """Choose k initial centers among the samples, spread-out style."""
    n = samples.shape[0]
    centers = np.empty((k, samples.shape[1]), dtype=float)
    centers[0] = samples[rng.integers(n)]
    closest = np.sum((samples - centers[0]) ** 2, axis=1)
    for i in range(1, k):
        total = closest.sum()
        if total <= 0.0:
            # All remaining mass sits on already-chosen points.
            centers[i] = samples[rng.integers(n)]
        else:
            probs = closest / total
            centers[i] = samples[rng.choice(n, p=probs)]
        closest = np.minimum(closest, np.sum((samples - centers[i]) ** 2, axis=1))
    return centers


def fit_gmm(
    samples: np.ndarray,
    n_components: int = DEFAULT_COMPONENTS,
    seed: int = 0,
    max_iterations: int = 200,
    tol: float = 1e-6,
    category: str = "",
) -> CategoryGMM:
    """Fit a full-covariance mixture by EM with seeded k-means++ init.

    Deterministic for a given seed. Covariance diagonals get a 1e-6 floor
    every update, so near-constant sample pools stay well conditioned.
    Raises when there are fewer samples than components.
    """
    samples = np.asarray(samples, dtype=float)
    if samples.ndim != 2 or samples.shape[1] != 4:
        raise ValidationError(f"samples must be (n, 4), got {samples.shape}")
    n = samples.shape[0]
    if n < 2:
        raise ValidationError(f"need at least 2 samples to fit, got {n}")
    if n < n_components:
        raise ValidationError(
            f"{n} samples cannot support {n_components} components; "
            f"lower the component count to at most {n}"
        )
    if n_components < 1:
        raise ValidationError("component count must be >= 1")

    rng = np.random.default_rng(seed)
    centers = _kmeans_plus_plus(samples, n_components, rng)

    # Hard-assignment init from the chosen centers.
    dists = np.sum((samples[:, None, :] - centers[None, :, :]) ** 2, axis=2)
    resp = np.zeros((n, n_components), dtype=float)
    resp[np.arange(n), np.argmin(dists, axis=1)] = 1.0
    weights, means, covariances = _m_step(samples, resp)

    trace: list[float] = []
    for _ in range(max_iterations):
        model = CategoryGMM(category, weights, means, covariances)
        log_pdfs = _component_log_pdfs(model, samples)
        weighted = log_pdfs + np.log(weights)[None, :]
        log_norm = logsumexp(weighted, axis=1)
        ll = float(log_norm.sum())
        if trace and ll - trace[-1] < tol:
            trace.append(ll)
            break
        trace.append(ll)
        resp = np.exp(weighted - log_norm[:, None])
        weights, means, covariances = _m_step(samples, resp)

    return CategoryGMM(
        category=category,
        weights=weights,
        means=means,
        covariances=covariances,
        log_likelihood_trace=tuple(trace),
    )


def _m_step(samples: np.ndarray, resp: np.ndarray):
    n, q = resp.shape
    counts = resp.sum(axis=0)
    counts = np.maximum(counts, 1e-12)
    weights = counts / counts.sum()
    means = (resp.T @ samples) / counts[:, None]
    covariances = np.empty((q, 4, 4), dtype=float)
    for k in range(q):
        diff = samples - means[k]
        covariances[k] = (resp[:, k][:, None] * diff).T @ diff / counts[k]
        covariances[k] += COVARIANCE_FLOOR * np.eye(4)
    return weights, means, covariances


@dataclass(frozen=True)
class FitSummary:
    category: str
    sample_count: int
    requested_components: int
    fitted_components: int
    final_log_likelihood: Optional[float]
    skipped: bool = False


def fit_all_categories(
    corpus: Corpus,
    n_components: int = DEFAULT_COMPONENTS,
    seed: int = 0,
    max_iterations: int = 200,
    tol: float = 1e-6,
    workers: int = 1,
) -> tuple[dict[str, CategoryGMM], list[FitSummary]]:
    """Fit one mixture per label-space category.

    Categories with fewer samples than components fall back to one
    component per sample; categories with fewer than 2 samples are
    skipped. Each category gets its own derived seed, so results do not
    depend on fit order or worker count.
    """

    def fit_one(category: str) -> tuple[Optional[CategoryGMM], FitSummary]:
        samples = category_samples(corpus, category)
        n = samples.shape[0]
        if n < 2:
            log.warning("category %r has %d samples, skipping fit", category, n)
            return None, FitSummary(category, n, n_components, 0, None, skipped=True)
        q = min(n_components, n)
        if q < n_components:
            log.warning(
                "category %r has %d samples, reducing components %d -> %d",
                category, n, n_components, q,
            )
        model = fit_gmm(
            samples,
            n_components=q,
            seed=derive_seed(seed, f"fit:{category}"),
            max_iterations=max_iterations,
            tol=tol,
            category=category,
        )
        return model, FitSummary(category, n, n_components, q, model.final_log_likelihood)

    categories = list(corpus.label_space)
    if workers > 1 and len(categories) > 1:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(fit_one, categories))
    else:
        results = [fit_one(c) for c in categories]

    models: dict[str, CategoryGMM] = {}
    summaries: list[FitSummary] = []
    for model, summary in results:
        if model is not None:
            models[summary.category] = model
        summaries.append(summary)
    return models, summaries


def save_models(
    models: Mapping[str, CategoryGMM],
    path: str | Path,
    requested_components: Optional[int] = None,
) -> None:
    """Write mixtures to a versioned JSON file; exact float round-trip.

    `requested_components` records the configured component count, so
    categories that fell back to fewer components are visible in the file.
    """
    payload = {
        "format_version": MODEL_FILE_VERSION,
        "requested_components": requested_components,
        "models": {
            category: {
                "component_count": model.component_count,
                "weights": model.weights.tolist(),
                "means": model.means.tolist(),
                "covariances": model.covariances.tolist(),
            }
            for category, model in models.items()
        },
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, sort_keys=True, indent=1)
        fh.write("\n")


def load_models(path: str | Path) -> dict[str, CategoryGMM]:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            payload = json.load(fh)
    except json.JSONDecodeError as exc:
        raise FormatError(
            f"{path}: malformed model file at line {exc.lineno}: {exc.msg}"
        ) from exc
    version = payload.get("format_version")
    if version != MODEL_FILE_VERSION:
        raise VersionError(
            f"{path}: model file version {version!r}, expected {MODEL_FILE_VERSION}"
        )
    models: dict[str, CategoryGMM] = {}
    for category, entry in payload.get("models", {}).items():
        models[category] = CategoryGMM(
            category=category,
            weights=np.array(entry["weights"], dtype=float),
            means=np.array(entry["means"], dtype=float),
            covariances=np.array(entry["covariances"], dtype=float),
        )
    return models
