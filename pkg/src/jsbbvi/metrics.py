"""Fit-quality measures: Monte Carlo ELBO, plug-in log-likelihood and DIC."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .dists import LOG_2PI, log_sum_exp
from .model import Dataset, GmmSpec, VariationalParams, log_joint, log_q, sample_q


@dataclass
class FitReport:
    iterations: int
    wall_time_s: float | None
    elbo: float
    loglik: float
    dic: float
    converged: bool
    method: str
    config: dict = field(default_factory=dict)
    trace: list = field(default_factory=list)
    diverged: bool = False
    p_d: float = float("nan")
    lam: VariationalParams | None = None

    def to_dict(self, include_trace: bool = True) -> dict:
        out = {
            "method": self.method,
            "iterations": self.iterations,
            "wall_time_s": self.wall_time_s,
            "elbo": self.elbo,
            "loglik": self.loglik,
            "dic": self.dic,
            "p_d": self.p_d,
            "converged": self.converged,
            "diverged": self.diverged,
            "config": self.config,
        }
        if self.lam is not None:
            out["params"] = {"m": self.lam.m.tolist(), "log_s": self.lam.log_s.tolist()}
        if include_trace:
            out["trace"] = self.trace
        return out


def elbo_samples(lam: VariationalParams, data: Dataset, spec: GmmSpec, S: int, rng: np.random.Generator) -> np.ndarray:
    """Per-draw ``log p(y, theta) - log q(theta)`` for ``S`` draws from ``q``."""
    if S < 1:
        raise ValueError("S must be >= 1")
    draws = sample_q(lam, rng, size=S)
    return np.asarray(log_joint(spec, draws, data) - log_q(lam, draws))


def elbo_estimate(lam: VariationalParams, data: Dataset, spec: GmmSpec, S: int, rng: np.random.Generator) -> float:
    return float(np.mean(elbo_samples(lam, data, spec, S, rng)))


def mixture_loglik(mu, data: Dataset, spec: GmmSpec) -> np.ndarray | float:
    """``sum_i log[(1/K) sum_k N(y_i; mu_k, sigma2 I)]`` for component means ``mu`` of shape ``(..., K, d)``."""
    mu = np.asarray(mu, dtype=float)
    sq = np.sum((data.y[:, None, :] - mu[..., None, :, :]) ** 2, axis=-1)  # (..., N, K)
    comp = -0.5 * spec.d * (LOG_2PI + np.log(spec.sigma2)) - 0.5 * sq / spec.sigma2
    out = np.sum(log_sum_exp(comp, axis=-1), axis=-1) - data.N * np.log(spec.K)
    return float(out) if np.ndim(out) == 0 else out


def loglik(lam: VariationalParams, data: Dataset, spec: GmmSpec) -> float:
    """Plug-in log-likelihood at the variational means, assignments marginalized."""
    return float(mixture_loglik(lam.m, data, spec))


def dic(lam: VariationalParams, data: Dataset, spec: GmmSpec, S: int, rng: np.random.Generator,
        return_pd: bool = False):
    """Deviance information criterion with ``q`` standing in for the posterior.

    ``p_D = 2 * (L(m) - mean_s L(mu[s]))`` and ``DIC = -2 L(m) + 2 p_D``,
    with ``mu[s]`` drawn from the component-mean factors of ``q``.
    """
    if S < 2:
        raise ValueError("S must be >= 2")
    plug_in = loglik(lam, data, spec)
    mu = rng.normal(lam.m, np.exp(lam.log_s), size=(S,) + lam.m.shape)
    p_d = 2.0 * (plug_in - float(np.mean(mixture_loglik(mu, data, spec))))
    value = -2.0 * plug_in + 2.0 * p_d
    return (value, p_d) if return_pd else value
