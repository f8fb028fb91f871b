"""Score-function ELBO gradient estimators and the shrinkage / clipping factors.

Four estimators share one set of Monte Carlo draws:

* ``NAIVE``   - arithmetic mean of the per-draw score-function terms.
* ``JS_PLUS`` - positive-part James-Stein shrinkage of that mean toward zero.
* ``RB``      - Rao-Blackwellized mean, each block weighted by its Markov blanket.
* ``RB_PLUS`` - positive-part James-Stein shrinkage applied to the RB mean.

Per-draw terms are kept as an ``(S, p)`` matrix; row ``s`` is one gradient sample.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .model import (
    Dataset,
    GmmSpec,
    LatentDraw,
    VariationalParams,
    log_joint,
    log_q,
    rb_summands,
    sample_q,
    score_q,
)


class Estimator(str, enum.Enum):
    NAIVE = "naive"
    JS_PLUS = "js"
    RB = "rb"
    RB_PLUS = "rbplus"

    @property
    def label(self) -> str:
        return {"naive": "Naive", "js": "JS+", "rb": "RB", "rbplus": "RB+"}[self.value]

    @property
    def shrinks(self) -> bool:
        return self in (Estimator.JS_PLUS, Estimator.RB_PLUS)

    @property
    def blanketed(self) -> bool:
        return self in (Estimator.RB, Estimator.RB_PLUS)


@dataclass
class GradientEstimate:
    g: np.ndarray
    estimator: Estimator
    shrink_factor: float = 1.0
    sigma2_hat: float = 0.0

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.g))


@dataclass
class GradientSamples:
    """Draws from ``q`` together with their score vectors and log-weights.

    ``log_weights[s]`` is ``log p(y, theta[s]) - log q(theta[s])`` and
    ``scores[s]`` is the score of ``q`` at ``theta[s]``.
    """

    draws: LatentDraw
    scores: np.ndarray
    log_weights: np.ndarray

    @property
    def z(self) -> np.ndarray:
        """The ``(S, p)`` matrix of gradient samples."""
        return self.scores * self.log_weights[:, None]

    def __len__(self) -> int:
        return len(self.log_weights)


def _as_matrix(samples) -> np.ndarray:
    if isinstance(samples, GradientSamples):
        samples = samples.z
    z = np.asarray(samples, dtype=float)
    if z.ndim == 1:
        z = z[None, :]
    if z.ndim != 2 or z.shape[0] == 0:
        raise ValueError("need at least one gradient sample")
    return z


def collect_samples(
    lam: VariationalParams, data: Dataset, spec: GmmSpec, S: int, rng: np.random.Generator
) -> GradientSamples:
    """Draw ``S`` latents from ``q`` and form the score-function terms."""
    if S < 2:
        raise ValueError("S must be >= 2 so the noise variance can be estimated")
    draws = sample_q(lam, rng, size=S)
    scores = score_q(lam, draws)
    log_weights = log_joint(spec, draws, data) - log_q(lam, draws)
    return GradientSamples(draws, scores, np.asarray(log_weights))


def naive_gradient(samples, estimator: Estimator = Estimator.NAIVE) -> GradientEstimate:
    return GradientEstimate(_as_matrix(samples).mean(axis=0), Estimator(estimator))


def estimate_sigma2(samples) -> float:
    """Pooled per-coordinate variance of the sample mean.

    ``(1/p) * sum_j var_s(z_sj) / S`` with the unbiased (``ddof=1``) variance.
    """
    z = _as_matrix(samples)
    S = z.shape[0]
    if S < 2:
        raise ValueError("estimate_sigma2 needs at least two samples")
    return float(np.mean(np.var(z, axis=0, ddof=1)) / S)


def js_shrink_factor(norm2: float, p: int, sigma2: float) -> float:
    """Positive-part James-Stein factor ``max(0, 1 - (p-3) sigma2 / norm2)``.

    For ``p <= 3`` the factor is 1 (no shrinkage); for ``norm2 == 0`` it is 0.
    """
    if p <= 3:
        return 1.0
    if norm2 <= 0.0:
        return 0.0
    c = (p - 3) * sigma2
    return max(0.0, 1.0 - c / norm2)


def _shrunk(z: np.ndarray, estimator: Estimator, p: int | None) -> GradientEstimate:
    zbar = z.mean(axis=0)
    p = zbar.size if p is None else p
    sigma2 = estimate_sigma2(z)
    factor = js_shrink_factor(float(zbar @ zbar), p, sigma2)
    return GradientEstimate(factor * zbar, estimator, factor, sigma2)


def js_plus_gradient(samples, p: int | None = None) -> GradientEstimate:
    """Shrink the naive mean; ``p`` defaults to the sample dimension."""
    return _shrunk(_as_matrix(samples), Estimator.JS_PLUS, p)


def rb_gradient(lam: VariationalParams, data: Dataset, spec: GmmSpec, draws: LatentDraw) -> GradientEstimate:
    return naive_gradient(rb_summands(lam, draws, data, spec), Estimator.RB)


def rb_plus_gradient(lam: VariationalParams, data: Dataset, spec: GmmSpec, draws: LatentDraw) -> GradientEstimate:
    return _shrunk(_as_matrix(rb_summands(lam, draws, data, spec)), Estimator.RB_PLUS, None)


def rb_plus_from_summands(summands) -> GradientEstimate:
    return _shrunk(_as_matrix(summands), Estimator.RB_PLUS, None)


def clip_factor(norm: float, c: float, squared: bool = False) -> float:
    """Gradient-clipping multiplier ``min(1, c/||f||)``, or ``min(1, c/||f||^2)`` if ``squared``."""
    if c <= 0:
        raise ValueError("clipping radius must be > 0")
    if norm < 0:
        raise ValueError("norm must be >= 0")
    if norm == 0:
        return 1.0
    denom = norm * norm if squared else norm
    return min(1.0, c / denom)


def estimate_gradient(
    method: Estimator, lam: VariationalParams, data: Dataset, spec: GmmSpec, S: int, rng: np.random.Generator
) -> tuple[GradientEstimate, GradientSamples]:
    """Draw once and apply ``method``; the samples are returned for diagnostics."""
    method = Estimator(method)
    samples = collect_samples(lam, data, spec, S, rng)
    if method is Estimator.NAIVE:
        est = naive_gradient(samples)
    elif method is Estimator.JS_PLUS:
        est = js_plus_gradient(samples)
    elif method is Estimator.RB:
        est = rb_gradient(lam, data, spec, samples.draws)
    else:
        est = rb_plus_gradient(lam, data, spec, samples.draws)
    return est, samples
