"""Normal and Categorical primitives: log-densities, samplers and analytic scores.

All functions broadcast over numpy arrays, so ``NormalParams`` may hold
scalars or arrays of matching shape.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

LOG_2PI = float(np.log(2.0 * np.pi))


class InvalidParameterError(ValueError):
    """Raised when a distribution parameter or argument is out of its domain."""


@dataclass(frozen=True)
class NormalParams:
    """Mean and variance of a (possibly batched) univariate normal."""

    mean: np.ndarray | float
    var: np.ndarray | float

    def __post_init__(self):
        mean = np.asarray(self.mean, dtype=float)
        var = np.asarray(self.var, dtype=float)
        if not (np.all(np.isfinite(mean)) and np.all(np.isfinite(var))):
            raise InvalidParameterError("normal parameters must be finite")
        if np.any(var <= 0):
            raise InvalidParameterError("normal variance must be > 0")

    @classmethod
    def from_log_scale(cls, mean, log_scale) -> "NormalParams":
        return cls(mean, np.exp(2.0 * np.asarray(log_scale, dtype=float)))


@dataclass(frozen=True)
class CategoricalParams:
    """Categorical distribution over ``K`` outcomes, parameterized by logits.

    The last axis of ``logits`` indexes the outcomes; leading axes batch.
    """

    logits: np.ndarray

    def __post_init__(self):
        logits = np.asarray(self.logits, dtype=float)
        if logits.ndim == 0 or logits.shape[-1] == 0:
            raise InvalidParameterError("categorical logits must be a non-empty vector")
        if not np.all(np.isfinite(logits)):
            raise InvalidParameterError("categorical logits must be finite")

    @property
    def K(self) -> int:
        return np.shape(self.logits)[-1]

    @property
    def probs(self) -> np.ndarray:
        return softmax(self.logits)

    @property
    def log_probs(self) -> np.ndarray:
        return log_softmax(self.logits)


def _as_nonempty(v) -> np.ndarray:
    v = np.asarray(v, dtype=float)
    if v.ndim == 0 or v.shape[-1] == 0:
        raise InvalidParameterError("expected a non-empty vector")
    return v


def log_sum_exp(v, axis: int = -1) -> np.ndarray | float:
    """Overflow-safe ``log(sum(exp(v)))`` along ``axis``."""
    v = _as_nonempty(v)
    vmax = np.max(v, axis=axis, keepdims=True)
    out = np.log(np.sum(np.exp(v - vmax), axis=axis)) + np.squeeze(vmax, axis=axis)
    return float(out) if np.ndim(out) == 0 else out


def log_softmax(v, axis: int = -1) -> np.ndarray:
    v = _as_nonempty(v)
    vmax = np.max(v, axis=axis, keepdims=True)
    shifted = v - vmax
    return shifted - np.log(np.sum(np.exp(shifted), axis=axis, keepdims=True))


def softmax(v, axis: int = -1) -> np.ndarray:
    v = _as_nonempty(v)
    e = np.exp(v - np.max(v, axis=axis, keepdims=True))
    return e / np.sum(e, axis=axis, keepdims=True)


def normal_logpdf(x, p: NormalParams):
    """Log density of ``N(mean, var)`` at ``x``."""
    x = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(x)):
        raise InvalidParameterError("normal_logpdf needs finite input")
    var = np.asarray(p.var, dtype=float)
    out = -0.5 * (LOG_2PI + np.log(var)) - 0.5 * (x - p.mean) ** 2 / var
    return float(out) if np.ndim(out) == 0 else out


def normal_score(theta, p: NormalParams):
    """Gradient of ``log N(theta; m, s^2)`` with respect to ``(m, log s)``.

    Returns
    -------
    d_mean, d_logscale : float or ndarray
        ``(theta - m) / s^2`` and ``(theta - m)^2 / s^2 - 1``.
    """
    diff = np.asarray(theta, dtype=float) - p.mean
    var = np.asarray(p.var, dtype=float)
    d_mean = diff / var
    d_logscale = diff * diff / var - 1.0
    if np.ndim(d_mean) == 0:
        return float(d_mean), float(d_logscale)
    return d_mean, d_logscale


def categorical_logpmf(k, p: CategoricalParams):
    k = np.asarray(k)
    _check_index(k, p.K)
    lp = p.log_probs
    shape = np.broadcast_shapes(k.shape, lp.shape[:-1])
    lp = np.broadcast_to(lp, shape + (p.K,))
    k = np.broadcast_to(k, shape)
    out = np.take_along_axis(lp, k[..., None], axis=-1)[..., 0]
    return float(out) if np.ndim(out) == 0 else out


def categorical_score(k, p: CategoricalParams) -> np.ndarray:
    """Gradient of ``log Categorical(k; softmax(logits))`` in the logits.

    ``k`` is a 0-based outcome index (or an integer array batching the
    leading axes of ``p.logits``). The result is ``onehot(k) - softmax(logits)``.
    """
    k = np.asarray(k)
    _check_index(k, p.K)
    onehot = np.eye(p.K)[k]
    return onehot - p.probs


def _check_index(k, K: int):
    if not np.issubdtype(np.asarray(k).dtype, np.integer):
        raise IndexError("categorical outcome must be an integer index")
    if np.any(k < 0) or np.any(k >= K):
        raise IndexError(f"categorical outcome out of range [0, {K})")


def sample_normal(p: NormalParams, rng: np.random.Generator, size=None):
    """Draw from ``N(mean, var)``; ``size`` defaults to the broadcast parameter shape."""
    out = rng.normal(p.mean, np.sqrt(p.var), size=size)
    return float(out) if np.ndim(out) == 0 else out


def sample_categorical(p: CategoricalParams, rng: np.random.Generator, size=None):
    """Draw 0-based outcome indices by inverse-CDF on uniform variates.

    With ``size=None`` one index is drawn per row of the batched logits;
    otherwise ``size`` is prepended to the batch shape.
    """
    probs = p.probs
    batch = probs.shape[:-1]
    shape = batch if size is None else tuple(np.atleast_1d(size)) + batch
    cdf = np.cumsum(probs, axis=-1)
    u = rng.random(shape)
    idx = np.sum(u[..., None] >= cdf, axis=-1)
    # guard against cdf[-1] rounding below 1
    idx = np.minimum(idx, p.K - 1)
    return int(idx) if idx.ndim == 0 else idx
