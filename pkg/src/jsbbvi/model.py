"""Finite Gaussian mixture model and its mean-field variational family.

Generative model (isotropic in ``d`` dimensions)::

    mu_k        ~ N(0, tau2 I)                 k = 1..K
    z_i         ~ Categorical(1/K, ..., 1/K)   i = 1..N
    y_i | z_i   ~ N(mu_{z_i}, sigma2 I)

Variational family::

    q(mu_k) = N(m_k, diag(exp(2 log_s_k)))
    q(z_i)  = Categorical(softmax(logits_i))

Every density and score below accepts draws with arbitrary leading batch
axes: ``mu`` has shape ``(..., K, d)`` and ``z`` has shape ``(..., N)``.
Component indices are 0-based.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .dists import (
    LOG_2PI,
    CategoricalParams,
    NormalParams,
    categorical_logpmf,
    categorical_score,
    normal_logpdf,
    normal_score,
    sample_categorical,
)

# component means of the simulated study, used first-K
BUILTIN_MEANS = (-5.0, -4.0, -3.0, -2.0, -1.0, 0.0, 1.0, 2.0, 3.0, 4.0)
DEFAULT_TAU2 = 10.0
INIT_NOISE_VAR = 0.01


class DimensionError(ValueError):
    """Raised when array shapes disagree with the model dimensions."""


@dataclass(frozen=True)
class GmmSpec:
    K: int
    d: int
    tau2: float = DEFAULT_TAU2
    sigma2: float = 1.0

    def __post_init__(self):
        # K = 1 is accepted as a degenerate single-Gaussian model
        if self.K < 1 or self.d < 1:
            raise ValueError("GmmSpec needs K >= 1 and d >= 1")
        if not (self.tau2 > 0 and self.sigma2 > 0):
            raise ValueError("tau2 and sigma2 must be > 0")


@dataclass(frozen=True)
class Dataset:
    y: np.ndarray
    provenance: str = ""

    def __post_init__(self):
        y = np.asarray(self.y, dtype=float)
        if y.ndim == 1:
            y = y[:, None]
        if y.ndim != 2 or y.shape[0] < 1 or y.shape[1] < 1:
            raise DimensionError("dataset must be an N x d matrix with N >= 1")
        if not np.all(np.isfinite(y)):
            raise ValueError("dataset contains non-finite entries")
        object.__setattr__(self, "y", y)

    @property
    def N(self) -> int:
        return self.y.shape[0]

    @property
    def d(self) -> int:
        return self.y.shape[1]

    def pooled_variance(self) -> float:
        """Mean over dimensions of the per-column sample variance."""
        if self.N < 2:
            return 1.0
        return float(np.mean(np.var(self.y, axis=0, ddof=1)))


@dataclass
class VariationalParams:
    """Variational parameters ``lambda``; flat order is ``m, log_s, logits`` (row-major)."""

    m: np.ndarray
    log_s: np.ndarray
    logits: np.ndarray

    def __post_init__(self):
        self.m = np.atleast_2d(np.asarray(self.m, dtype=float))
        self.log_s = np.atleast_2d(np.asarray(self.log_s, dtype=float))
        self.logits = np.asarray(self.logits, dtype=float)
        if self.logits.ndim == 1 and self.logits.size == 0:
            self.logits = self.logits.reshape(0, self.m.shape[0])
        if self.m.shape != self.log_s.shape:
            raise DimensionError("m and log_s must share shape (K, d)")
        if self.logits.ndim != 2 or self.logits.shape[1] != self.m.shape[0]:
            raise DimensionError("logits must have shape (N, K)")

    @property
    def K(self) -> int:
        return self.m.shape[0]

    @property
    def d(self) -> int:
        return self.m.shape[1]

    @property
    def N(self) -> int:
        return self.logits.shape[0]

    @property
    def p(self) -> int:
        return 2 * self.K * self.d + self.N * self.K

    @property
    def var(self) -> np.ndarray:
        return np.exp(2.0 * self.log_s)

    def flatten(self) -> np.ndarray:
        return np.concatenate([self.m.ravel(), self.log_s.ravel(), self.logits.ravel()])

    @classmethod
    def unflatten(cls, vec, K: int, d: int, N: int) -> "VariationalParams":
        vec = np.asarray(vec, dtype=float)
        kd = K * d
        if vec.shape != (2 * kd + N * K,):
            raise DimensionError(f"flat vector has shape {vec.shape}, expected ({2 * kd + N * K},)")
        return cls(
            vec[:kd].reshape(K, d).copy(),
            vec[kd : 2 * kd].reshape(K, d).copy(),
            vec[2 * kd :].reshape(N, K).copy(),
        )

    def with_flat(self, vec) -> "VariationalParams":
        return VariationalParams.unflatten(vec, self.K, self.d, self.N)

    def to_dict(self) -> dict:
        return {"m": self.m.tolist(), "log_s": self.log_s.tolist(), "logits": self.logits.tolist()}


@dataclass
class LatentDraw:
    """Sampled latents; ``mu`` is ``(..., K, d)`` and ``z`` is ``(..., N)``."""

    mu: np.ndarray
    z: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=int))

    def __post_init__(self):
        self.mu = np.asarray(self.mu, dtype=float)
        self.z = np.asarray(self.z)
        if self.z.size == 0:
            self.z = self.z.astype(int)
        if self.mu.ndim < 2:
            raise DimensionError("mu must have shape (..., K, d)")
        if not np.issubdtype(self.z.dtype, np.integer):
            raise DimensionError("z must be integer assignments")
        if self.z.size and (self.z.min() < 0 or self.z.max() >= self.mu.shape[-2]):
            raise DimensionError("assignment index out of range")

    @property
    def batch_shape(self) -> tuple:
        return self.mu.shape[:-2]

    def __getitem__(self, idx) -> "LatentDraw":
        return LatentDraw(self.mu[idx], self.z[idx])


def _check(spec: GmmSpec | None, lam: VariationalParams | None, draw: LatentDraw, data: Dataset | None):
    K, d = draw.mu.shape[-2:]
    if spec is not None and (spec.K, spec.d) != (K, d):
        raise DimensionError(f"draw has (K, d) = {(K, d)}, spec has {(spec.K, spec.d)}")
    if lam is not None and (lam.K, lam.d) != (K, d):
        raise DimensionError(f"draw has (K, d) = {(K, d)}, params have {(lam.K, lam.d)}")
    N = draw.z.shape[-1] if draw.z.ndim else 0
    if lam is not None and lam.N != N:
        raise DimensionError(f"draw has N = {N}, params have N = {lam.N}")
    if data is not None and (data.N, data.d) != (N, d):
        raise DimensionError(f"data has shape {(data.N, data.d)}, draw implies {(N, d)}")


# -- per-factor log-density terms ------------------------------------------------


def prior_terms(spec: GmmSpec, mu) -> np.ndarray:
    """``log N(mu_k; 0, tau2 I)`` for each component, shape ``(..., K)``."""
    return np.sum(normal_logpdf(mu, NormalParams(0.0, spec.tau2)), axis=-1)


def loglik_terms(spec: GmmSpec, draw: LatentDraw, data: Dataset) -> np.ndarray:
    """``log N(y_i; mu_{z_i}, sigma2 I)`` for each observation, shape ``(..., N)``."""
    z = draw.z
    idx = np.broadcast_to(z[..., None], z.shape + (draw.mu.shape[-1],))
    mu_sel = np.take_along_axis(draw.mu, idx, axis=-2)
    sq = np.sum((data.y - mu_sel) ** 2, axis=-1)
    return -0.5 * spec.d * (LOG_2PI + np.log(spec.sigma2)) - 0.5 * sq / spec.sigma2


def q_mu_terms(lam: VariationalParams, mu) -> np.ndarray:
    """``log q(mu_k)`` for each component, shape ``(..., K)``."""
    return np.sum(normal_logpdf(mu, NormalParams(lam.m, lam.var)), axis=-1)


def q_z_terms(lam: VariationalParams, z) -> np.ndarray:
    """``log q(z_i)`` for each observation, shape ``(..., N)``."""
    if lam.N == 0:
        return np.zeros(np.shape(z))
    return categorical_logpmf(z, CategoricalParams(lam.logits))


# -- joint and variational densities ---------------------------------------------


def log_joint(spec: GmmSpec, draw: LatentDraw, data: Dataset):
    """``log p(y, mu, z)`` under the mixture model."""
    _check(spec, None, draw, data)
    out = (
        prior_terms(spec, draw.mu).sum(axis=-1)
        - data.N * np.log(spec.K)
        + loglik_terms(spec, draw, data).sum(axis=-1)
    )
    return float(out) if np.ndim(out) == 0 else out


def log_q(lam: VariationalParams, draw: LatentDraw):
    """``log q(mu, z | lambda)``; a sum over mean-field factors."""
    _check(None, lam, draw, None)
    out = q_mu_terms(lam, draw.mu).sum(axis=-1) + q_z_terms(lam, draw.z).sum(axis=-1)
    return float(out) if np.ndim(out) == 0 else out


def sample_q(lam: VariationalParams, rng: np.random.Generator, size: int | None = None) -> LatentDraw:
    """Draw ``mu`` then ``z`` from ``q``; ``size`` adds a leading sample axis."""
    shape = lam.m.shape if size is None else (size,) + lam.m.shape
    mu = rng.normal(lam.m, np.exp(lam.log_s), size=shape)
    if lam.N:
        z = sample_categorical(CategoricalParams(lam.logits), rng, size=size)
    else:
        z = np.zeros(() if size is None else (size, 0), dtype=int)
    return LatentDraw(mu, np.asarray(z, dtype=int))


def _score_blocks(lam: VariationalParams, draw: LatentDraw):
    d_m, d_ls = normal_score(draw.mu, NormalParams(lam.m, lam.var))
    if lam.N:
        d_logits = categorical_score(draw.z, CategoricalParams(lam.logits))
    else:
        d_logits = np.zeros(draw.batch_shape + (0, lam.K))
    return np.asarray(d_m), np.asarray(d_ls), d_logits


def _flat(batch_shape, *blocks) -> np.ndarray:
    return np.concatenate([b.reshape(batch_shape + (-1,)) for b in blocks], axis=-1)


def score_q(lam: VariationalParams, draw: LatentDraw) -> np.ndarray:
    """``grad_lambda log q(draw | lambda)`` in flatten order, shape ``(..., p)``."""
    _check(None, lam, draw, None)
    return _flat(draw.batch_shape, *_score_blocks(lam, draw))


# -- Markov blankets ---------------------------------------------------------------


def blanket_terms(lam: VariationalParams, draw: LatentDraw, data: Dataset, spec: GmmSpec):
    """Blanket differences for every factor at once.

    Returns ``(mu_blankets, z_blankets)`` with shapes ``(..., K)`` and ``(..., N)``.
    A likelihood term for ``y_i`` appears in both the blanket of ``z_i`` and
    the blanket of ``mu_{z_i}``.
    """
    _check(spec, lam, draw, data)
    ll = loglik_terms(spec, draw, data)
    batch = draw.batch_shape
    n_batch = int(np.prod(batch, dtype=int))
    offsets = (np.arange(n_batch) * spec.K)[:, None]
    flat_idx = (draw.z.reshape(n_batch, -1) + offsets).ravel()
    assigned = np.bincount(flat_idx, weights=ll.reshape(n_batch, -1).ravel(), minlength=n_batch * spec.K)
    assigned = assigned.reshape(batch + (spec.K,))
    mu_blankets = prior_terms(spec, draw.mu) + assigned - q_mu_terms(lam, draw.mu)
    z_blankets = -np.log(spec.K) + ll - q_z_terms(lam, draw.z)
    return mu_blankets, z_blankets


def blanket_diff(lam: VariationalParams, draw: LatentDraw, data: Dataset, spec: GmmSpec, block: tuple):
    """Blanket of one factor: ``("mu", k)`` or ``("z", i)``."""
    try:
        kind, j = block
    except (TypeError, ValueError):
        raise ValueError(f"unknown block {block!r}") from None
    mu_b, z_b = blanket_terms(lam, draw, data, spec)
    if kind == "mu" and 0 <= j < spec.K:
        out = mu_b[..., j]
    elif kind == "z" and 0 <= j < data.N:
        out = z_b[..., j]
    else:
        raise ValueError(f"unknown block {block!r}")
    return float(out) if np.ndim(out) == 0 else out


def rb_summands(lam: VariationalParams, draw: LatentDraw, data: Dataset, spec: GmmSpec) -> np.ndarray:
    """Per-draw blanket-weighted scores in flatten order, shape ``(..., p)``."""
    d_m, d_ls, d_logits = _score_blocks(lam, draw)
    mu_b, z_b = blanket_terms(lam, draw, data, spec)
    return _flat(draw.batch_shape, d_m * mu_b[..., None], d_ls * mu_b[..., None], d_logits * z_b[..., None])


# -- data and initialization -------------------------------------------------------


def generate_gmm_data(K: int, N: int, means=BUILTIN_MEANS, sigma2: float = 3.0, seed: int = 0) -> Dataset:
    """Simulate ``N`` univariate points from an equal-weight mixture of the first ``K`` means."""
    means = np.asarray(means, dtype=float)
    if K < 1 or len(means) < K:
        raise ValueError(f"need at least K={K} means, got {len(means)}")
    if N < 1 or sigma2 < 0:
        raise ValueError("N must be >= 1 and sigma2 >= 0")
    rng = np.random.default_rng(seed)
    z = rng.integers(K, size=N)
    y = means[z] + np.sqrt(sigma2) * rng.standard_normal(N)
    return Dataset(y[:, None], provenance=f"generated:K={K},N={N},sigma2={sigma2},seed={seed}")


def init_params(spec: GmmSpec, data: Dataset, rng: np.random.Generator) -> VariationalParams:
    """Random starting point anchored to the data location and scale."""
    noise_sd = np.sqrt(INIT_NOISE_VAR)
    center = data.y.mean(axis=0)
    spread = np.sqrt(np.var(data.y, axis=0)) if data.N > 1 else np.ones(spec.d)
    spread = np.where(spread > 0, spread, 1.0)
    m = rng.normal(center, spread, size=(spec.K, spec.d)) + rng.normal(0.0, noise_sd, (spec.K, spec.d))
    log_s = rng.normal(0.0, noise_sd, (spec.K, spec.d))
    logits = rng.normal(0.0, noise_sd, (data.N, spec.K))
    return VariationalParams(m, log_s, logits)
