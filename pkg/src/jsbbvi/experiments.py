"""Reproducible experiment procedures.

* ``variance_study`` - bootstrap sampling variance of the four gradient
  estimators on simulated univariate mixtures, one cell per ``K``.
* ``benchmark`` - a full fit on one clustering data set, reported as a table row.

Random streams for the variance study: cell ``K`` uses
``SeedSequence(seed, spawn_key=(K,)).spawn(4)``, feeding data generation,
initialization, Monte Carlo draws (warm-up and measurement) and bootstrap
indices respectively. A cell's output therefore does not depend on which other
``K`` values are requested or on evaluation order.
"""
from __future__ import annotations

import csv
import dataclasses
import io
import json
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np

from .estimators import (
    Estimator,
    collect_samples,
    estimate_gradient,
    js_plus_gradient,
    naive_gradient,
    rb_plus_from_summands,
)
from .metrics import FitReport
from .model import BUILTIN_MEANS, Dataset, GmmSpec, generate_gmm_data, init_params, rb_summands
from .optimizer import DivergedError, OptimizerConfig, OptimizerState, run, step

STUDY_ESTIMATORS = (Estimator.NAIVE, Estimator.JS_PLUS, Estimator.RB, Estimator.RB_PLUS)


class CsvParseError(ValueError):
    def __init__(self, message: str, row: int, column: int | None = None):
        loc = f"row {row}" + (f", column {column}" if column is not None else "")
        super().__init__(f"{loc}: {message}")
        self.row = row
        self.column = column


# -- data sets ---------------------------------------------------------------------


def _parse_rows(lines, source: str) -> Dataset:
    rows = []
    width = None
    header_seen = False
    for lineno, raw in enumerate(csv.reader(lines), start=1):
        if not raw or all(not cell.strip() for cell in raw) or raw[0].lstrip().startswith("#"):
            continue
        try:
            values = [float(cell) for cell in raw]
        except ValueError:
            if not rows and not header_seen:
                header_seen = True
                continue
            bad = next(j for j, cell in enumerate(raw, start=1) if not _is_float(cell))
            raise CsvParseError(f"non-numeric value {raw[bad - 1]!r}", lineno, bad) from None
        if width is None:
            width = len(values)
        elif len(values) != width:
            raise CsvParseError(f"expected {width} columns, found {len(values)}", lineno)
        rows.append(values)
    if not rows:
        raise CsvParseError("no numeric rows", 0)
    y = np.array(rows)
    if not np.all(np.isfinite(y)):
        r, c = map(int, np.argwhere(~np.isfinite(y))[0])
        raise CsvParseError("non-finite value", r + 1 + int(header_seen), c + 1)
    return Dataset(y, provenance=source)


def _is_float(cell: str) -> bool:
    try:
        float(cell)
    except ValueError:
        return False
    return True


def load_csv(path) -> Dataset:
    """Read an ``N x d`` numeric CSV with an optional header row.

    Lines starting with ``#`` are treated as comments.
    """
    path = Path(path)
    with path.open(newline="", encoding="utf-8") as fh:
        return _parse_rows(fh, path.name)


def subsample(data: Dataset, n: int, seed) -> Dataset:
    """Uniform sample of ``n`` rows without replacement, original row order kept."""
    if not 1 <= n <= data.N:
        raise ValueError(f"cannot take {n} rows from a data set of {data.N}")
    idx = np.sort(np.random.default_rng(seed).choice(data.N, size=n, replace=False))
    return Dataset(data.y[idx], provenance=f"{data.provenance}[subsample n={n} seed={seed}]")


def save_csv(data: Dataset, path, comment: str | None = None):
    buf = io.StringIO()
    if comment:
        buf.write(f"# {comment}\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow([f"y{j + 1}" for j in range(data.d)])
    writer.writerows([[repr(float(v)) for v in row] for row in data.y])
    Path(path).write_text(buf.getvalue(), encoding="utf-8")


@dataclass(frozen=True)
class BenchmarkSpec:
    name: str
    filename: str
    K: int
    d: int
    epsilon: float
    subsample: int | None = None


BENCHMARKS = {
    "engytime": BenchmarkSpec("engytime", "engytime.csv", K=2, d=2, epsilon=0.01, subsample=400),
    "lsun3d": BenchmarkSpec("lsun3d", "lsun3d.csv", K=4, d=2, epsilon=0.1),
    "tetra": BenchmarkSpec("tetra", "tetra.csv", K=4, d=3, epsilon=0.1),
}


def load_benchmark(name: str, data_dir=None, seed: int = 0) -> Dataset:
    """Load a bundled (or ``data_dir``) benchmark set, subsampling where configured."""
    bench = BENCHMARKS[name]
    if data_dir is None:
        with resources.as_file(resources.files("jsbbvi") / "data" / bench.filename) as path:
            data = load_csv(path)
    else:
        data = load_csv(Path(data_dir) / bench.filename)
    if data.d != bench.d:
        raise ValueError(f"{name}: expected {bench.d} columns, found {data.d}")
    if bench.subsample is not None and data.N > bench.subsample:
        data = subsample(data, bench.subsample, seed)
    return data


# -- variance study ------------------------------------------------------------------


@dataclass
class VarianceStudyRow:
    K: int
    p: int
    estimator: str
    mean_coord_variance: float
    rel_efficiency_vs_naive: float


@dataclass
class VarianceStudyResult:
    rows: list
    long_rows: list = field(default_factory=list)
    config: dict = field(default_factory=dict)

    def table(self) -> dict:
        """``{K: {estimator_label: mean_coord_variance}}``."""
        out = {}
        for r in self.rows:
            out.setdefault(r.K, {})[r.estimator] = r.mean_coord_variance
        return out


def snapshot_params(data: Dataset, spec: GmmSpec, S: int, warmup_iters: int, warmup_eta: float,
                    init_rng: np.random.Generator, rng: np.random.Generator):
    """Standard initialization followed by ``warmup_iters`` naive RMSProp steps."""
    lam = init_params(spec, data, init_rng)
    cfg = OptimizerConfig(method=Estimator.NAIVE, S=S, eta=warmup_eta,
                          min_iters=0, max_iters=max(warmup_iters, 0))
    state = OptimizerState.initial(lam)
    for _ in range(warmup_iters):
        est, _ = estimate_gradient(Estimator.NAIVE, state.lam, data, spec, S, rng)
        state = step(state, est, cfg)
    return state.lam


def bootstrap_variances(z: np.ndarray, r: np.ndarray, B: int, rng: np.random.Generator) -> dict:
    """Per-coordinate variance over ``B`` paired bootstrap replicates of each estimator.

    ``z`` holds naive gradient samples and ``r`` the blanket-weighted samples
    from the same draws; every estimator sees the same resample indices.
    """
    S = z.shape[0]
    reps = {e: np.empty((B, z.shape[1])) for e in STUDY_ESTIMATORS}
    for b in range(B):
        idx = rng.integers(S, size=S)
        zb, rb = z[idx], r[idx]
        reps[Estimator.NAIVE][b] = naive_gradient(zb).g
        reps[Estimator.JS_PLUS][b] = js_plus_gradient(zb).g
        reps[Estimator.RB][b] = rb.mean(axis=0)
        reps[Estimator.RB_PLUS][b] = rb_plus_from_summands(rb).g
    return {e: np.var(v, axis=0, ddof=1) for e, v in reps.items()}


def variance_study(Ks=range(2, 11), N: int = 200, S: int = 500, B: int = 100, seed: int = 0,
                   sigma2: float = 3.0, tau2: float = 10.0, warmup_iters: int = 10,
                   warmup_eta: float = 0.1) -> VarianceStudyResult:
    if B < 2 or S < 2:
        raise ValueError("variance study needs B >= 2 and S >= 2")
    Ks = [int(k) for k in Ks]
    if any(k < 1 or k > len(BUILTIN_MEANS) for k in Ks):
        raise ValueError(f"K must lie in 1..{len(BUILTIN_MEANS)}")
    rows, long_rows = [], []
    for K in Ks:
        data_ss, init_ss, draw_ss, boot_ss = np.random.SeedSequence(seed, spawn_key=(K,)).spawn(4)
        data = generate_gmm_data(K, N, BUILTIN_MEANS, sigma2, seed=int(data_ss.generate_state(1)[0]))
        spec = GmmSpec(K, 1, tau2=tau2, sigma2=sigma2)
        draw_rng = np.random.default_rng(draw_ss)
        lam = snapshot_params(data, spec, S, warmup_iters, warmup_eta,
                              np.random.default_rng(init_ss), draw_rng)
        samples = collect_samples(lam, data, spec, S, draw_rng)
        variances = bootstrap_variances(samples.z, rb_summands(lam, samples.draws, data, spec), B,
                                        np.random.default_rng(boot_ss))
        naive = float(variances[Estimator.NAIVE].mean())
        kd = K * spec.d
        blocks = {"m": slice(0, kd), "log_s": slice(kd, 2 * kd), "logits": slice(2 * kd, None), "all": slice(None)}
        for est in STUDY_ESTIMATORS:
            v = float(variances[est].mean())
            rows.append(VarianceStudyRow(K, lam.p, est.label, v, v / naive if naive > 0 else float("nan")))
            for block, sl in blocks.items():
                long_rows.append({"K": K, "p": lam.p, "estimator": est.label, "block": block,
                                  "mean_coord_variance": float(variances[est][sl].mean())})
    config = {"Ks": Ks, "N": N, "S": S, "B": B, "seed": seed, "sigma2": sigma2, "tau2": tau2,
              "warmup_iters": warmup_iters, "warmup_eta": warmup_eta}
    return VarianceStudyResult(rows, long_rows, config)


def linear_fit_r2(x, y) -> float:
    """Coefficient of determination of the least-squares line ``y ~ a + b x``."""
    x, y = np.asarray(x, dtype=float), np.asarray(y, dtype=float)
    A = np.column_stack([np.ones_like(x), x])
    coef, *_ = np.linalg.lstsq(A, y, rcond=None)
    resid = y - A @ coef
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    return 1.0 - float(resid @ resid) / ss_tot if ss_tot > 0 else 1.0


# -- benchmarks ------------------------------------------------------------------------


@dataclass
class BenchmarkRow:
    dataset: str
    method: str
    eta: float
    beta: float
    K: int
    d: int
    N: int
    p: int
    epsilon: float
    iterations: int
    wall_time_s: float | None
    elbo: float
    loglik: float
    dic: float
    converged: bool
    diverged: bool = False
    report: FitReport | None = field(default=None, repr=False, compare=False)
    trace: list | None = field(default=None, repr=False, compare=False)

    @property
    def time_per_iter(self) -> float:
        if not self.iterations or self.wall_time_s is None:
            return float("nan")
        return self.wall_time_s / self.iterations

    def to_dict(self) -> dict:
        out = dataclasses.asdict(self)
        out.pop("report")
        out.pop("trace")
        return out


def benchmark_spec(data: Dataset, K: int, tau2: float = 10.0, sigma2: float | None = None) -> GmmSpec:
    """Mixture spec for a benchmark; ``sigma2`` defaults to the pooled data variance."""
    return GmmSpec(K, data.d, tau2=tau2, sigma2=data.pooled_variance() if sigma2 is None else sigma2)


def benchmark(data: Dataset, name: str, spec: GmmSpec, config: OptimizerConfig) -> BenchmarkRow:
    """Fit one method on one data set and summarize the fit as a table row."""
    common = dict(dataset=name, method=config.method.label, eta=config.eta, beta=config.beta,
                  K=spec.K, d=spec.d, N=data.N, p=2 * spec.K * spec.d + data.N * spec.K,
                  epsilon=config.epsilon)
    try:
        report = run(data, spec, config)
    except DivergedError as exc:
        nan = float("nan")
        return BenchmarkRow(**common, iterations=exc.iterations, wall_time_s=None, elbo=nan, loglik=nan,
                            dic=nan, converged=False, diverged=True, trace=exc.trace)
    return BenchmarkRow(**common, iterations=report.iterations, wall_time_s=report.wall_time_s,
                        elbo=report.elbo, loglik=report.loglik, dic=report.dic,
                        converged=report.converged, report=report, trace=report.trace)


def benchmark_sweep(names=tuple(BENCHMARKS), methods=(Estimator.JS_PLUS, Estimator.RB), seed: int = 0,
                    S: int = 500, beta: float = 0.9, min_iters: int = 100, max_iters: int = 2000,
                    eta: dict | None = None, data_dir=None, tau2: float = 10.0,
                    sigma2: float | None = None) -> list:
    """Every ``(data set, method)`` pair with the per-data-set epsilon shared by all methods."""
    rows = []
    for name in names:
        bench = BENCHMARKS[name]
        data = load_benchmark(name, data_dir, seed)
        spec = benchmark_spec(data, bench.K, tau2, sigma2)
        for method in methods:
            method = Estimator(method)
            cfg = OptimizerConfig(method=method, S=S, epsilon=bench.epsilon,
                                  eta=None if eta is None else eta.get(method),
                                  beta=beta, min_iters=min_iters, max_iters=max_iters, seed=seed)
            rows.append(benchmark(data, name, spec, cfg))
    return rows


# -- output ------------------------------------------------------------------------------


def _jsonable(v):
    if isinstance(v, float) and not np.isfinite(v):
        return None
    return v


def rows_to_json(rows, config: dict) -> str:
    """JSON array of row objects; each embeds the effective configuration."""
    out = []
    for r in rows:
        d = r.to_dict() if hasattr(r, "to_dict") else (dataclasses.asdict(r) if dataclasses.is_dataclass(r) else dict(r))
        d = {k: _jsonable(v) for k, v in d.items()}
        d["config"] = config
        out.append(d)
    return json.dumps(out, indent=2, sort_keys=False) + "\n"


def rows_to_csv(rows, config: dict) -> str:
    """CSV with a leading ``#`` comment line holding the configuration as JSON."""
    dicts = [r.to_dict() if hasattr(r, "to_dict") else (dataclasses.asdict(r) if dataclasses.is_dataclass(r) else dict(r))
             for r in rows]
    buf = io.StringIO()
    buf.write("# config: " + json.dumps(config, sort_keys=True) + "\n")
    if dicts:
        writer = csv.DictWriter(buf, fieldnames=list(dicts[0]), lineterminator="\n")
        writer.writeheader()
        for d in dicts:
            writer.writerow({k: ("" if v is None else repr(v) if isinstance(v, float) else v) for k, v in d.items()})
    return buf.getvalue()
