"""Stochastic gradient ascent on the ELBO with RMSProp or AdaGrad step sizes.

Random streams: ``run`` spawns three child streams from ``config.seed`` via
``numpy.random.SeedSequence(seed).spawn(3)``; they drive, in order, the
initialization of ``lambda``, the per-iteration Monte Carlo draws, and the
final metric evaluation.
"""
from __future__ import annotations

import dataclasses
import enum
import time
from dataclasses import dataclass, field

import numpy as np

from .dists import InvalidParameterError
from .estimators import Estimator, GradientEstimate, estimate_gradient
from .metrics import FitReport, dic, elbo_estimate, loglik
from .model import Dataset, GmmSpec, VariationalParams, init_params

# per-method base rate used when eta is not given
DEFAULT_ETA = {
    Estimator.NAIVE: 0.1,
    Estimator.JS_PLUS: 0.1,
    Estimator.RB: 1.0,
    Estimator.RB_PLUS: 1.0,
}


class Schedule(str, enum.Enum):
    RMSPROP = "rmsprop"
    ADAGRAD = "adagrad"


class DivergedError(RuntimeError):
    """Raised when the parameters or gradient become non-finite."""

    def __init__(self, message: str, trace: list, iterations: int):
        super().__init__(message)
        self.trace = trace
        self.iterations = iterations


@dataclass
class OptimizerConfig:
    method: Estimator = Estimator.JS_PLUS
    S: int = 500
    epsilon: float = 0.01
    eta: float | None = None
    beta: float = 0.9
    xi: float = 1e-8
    schedule: Schedule = Schedule.RMSPROP
    min_iters: int = 100
    max_iters: int = 2000
    seed: int = 0
    eval_samples: int = 1000

    def __post_init__(self):
        self.method = Estimator(self.method)
        self.schedule = Schedule(self.schedule)
        if self.eta is None:
            self.eta = DEFAULT_ETA[self.method]
        if self.S < 2:
            raise ValueError("S must be >= 2")
        if not self.epsilon > 0:
            raise ValueError("epsilon must be > 0")
        if not self.eta > 0:
            raise ValueError("eta must be > 0")
        if not 0 <= self.beta < 1:
            raise ValueError("beta must lie in [0, 1)")
        if not self.xi > 0:
            raise ValueError("xi must be > 0")
        if not 0 <= self.min_iters <= self.max_iters:
            raise ValueError("need 0 <= min_iters <= max_iters")
        if self.eval_samples < 2:
            raise ValueError("eval_samples must be >= 2")

    def to_dict(self) -> dict:
        out = dataclasses.asdict(self)
        out["method"] = self.method.value
        out["schedule"] = self.schedule.value
        return out


@dataclass
class OptimizerState:
    lam: VariationalParams
    G: np.ndarray
    t: int = 0
    delta: float = float("inf")
    trace: list = field(default_factory=list)

    @classmethod
    def initial(cls, lam: VariationalParams) -> "OptimizerState":
        return cls(lam, np.zeros(lam.p))


def rmsprop_rates(G, g, eta: float, beta: float = 0.9, xi: float = 1e-8):
    """Decayed squared-gradient accumulator and per-coordinate step sizes."""
    G, g = np.asarray(G, dtype=float), np.asarray(g, dtype=float)
    if G.shape != g.shape:
        raise ValueError(f"accumulator shape {G.shape} != gradient shape {g.shape}")
    new_G = beta * G + (1.0 - beta) * g * g
    return new_G, eta / np.sqrt(new_G + xi)


def adagrad_rates(G, g, eta: float, xi: float = 1e-8):
    G, g = np.asarray(G, dtype=float), np.asarray(g, dtype=float)
    if G.shape != g.shape:
        raise ValueError(f"accumulator shape {G.shape} != gradient shape {g.shape}")
    new_G = G + g * g
    return new_G, eta / np.sqrt(new_G + xi)


def relative_change(new, old) -> float:
    """``||new - old|| / ||old||``, or the absolute change when ``old`` is zero."""
    step = float(np.linalg.norm(np.asarray(new) - np.asarray(old)))
    base = float(np.linalg.norm(old))
    return step / base if base > 0 else step


def step(state: OptimizerState, estimate: GradientEstimate, config: OptimizerConfig,
         elbo: float | None = None) -> OptimizerState:
    """One ascent update ``lambda + rates * g``; returns a new state."""
    g = estimate.g
    if config.schedule is Schedule.RMSPROP:
        G, rates = rmsprop_rates(state.G, g, config.eta, config.beta, config.xi)
    else:
        G, rates = adagrad_rates(state.G, g, config.eta, config.xi)
    old = state.lam.flatten()
    new = old + rates * g
    delta = relative_change(new, old)
    record = {
        "t": state.t + 1,
        "delta": delta,
        "shrink_factor": estimate.shrink_factor,
        "grad_norm": estimate.norm,
        "elbo": elbo,
    }
    return OptimizerState(state.lam.with_flat(new), G, state.t + 1, delta, state.trace + [record])


def run(data: Dataset, spec: GmmSpec, config: OptimizerConfig,
        lam0: VariationalParams | None = None) -> FitReport:
    """Iterate until ``delta <= epsilon`` after ``min_iters`` iterations, or ``max_iters``.

    Raises
    ------
    DivergedError
        If the parameters, gradient or objective become non-finite.
    """
    init_ss, iter_ss, eval_ss = np.random.SeedSequence(config.seed).spawn(3)
    if lam0 is None:
        lam0 = init_params(spec, data, np.random.default_rng(init_ss))
    rng = np.random.default_rng(iter_ss)
    state = OptimizerState.initial(lam0)
    converged = False

    start = time.perf_counter()
    while state.t < config.max_iters:
        try:
            est, samples = estimate_gradient(config.method, state.lam, data, spec, config.S, rng)
        except (InvalidParameterError, FloatingPointError) as exc:
            raise DivergedError(f"sampling failed at t={state.t}: {exc}", state.trace, state.t) from exc
        elbo_t = float(np.mean(samples.log_weights))
        if not (np.all(np.isfinite(est.g)) and np.isfinite(elbo_t)):
            raise DivergedError(f"non-finite gradient at t={state.t}", state.trace, state.t)
        state = step(state, est, config, elbo_t)
        if not np.all(np.isfinite(state.lam.flatten())):
            raise DivergedError(f"non-finite parameters at t={state.t}", state.trace, state.t)
        if state.t >= config.min_iters and state.delta <= config.epsilon:
            converged = True
            break
    wall = time.perf_counter() - start

    rng_eval = np.random.default_rng(eval_ss)
    elbo = elbo_estimate(state.lam, data, spec, config.eval_samples, rng_eval)
    dic_value, p_d = dic(state.lam, data, spec, config.eval_samples, rng_eval, return_pd=True)
    return FitReport(
        iterations=state.t,
        wall_time_s=wall,
        elbo=elbo,
        loglik=loglik(state.lam, data, spec),
        dic=dic_value,
        p_d=p_d,
        converged=converged,
        method=config.method.value,
        config={**config.to_dict(), "K": spec.K, "d": spec.d, "tau2": spec.tau2,
                "sigma2": spec.sigma2, "N": data.N, "data": data.provenance},
        trace=state.trace,
        lam=state.lam,
    )
