"""Command-line front end.

Commands: ``gen-data``, ``fit``, ``variance-study``, ``benchmark``.

Exit codes: 0 success / converged, 2 not converged by ``--max-iters``,
3 diverged, 64 usage error, 65 malformed input data, 74 I/O error.
All randomness derives from ``--seed`` (see ``optimizer`` and ``experiments``
for how child streams are split off it).
"""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import __version__
from .estimators import Estimator
from .experiments import (
    BENCHMARKS,
    CsvParseError,
    benchmark_sweep,
    load_csv,
    rows_to_csv,
    rows_to_json,
    save_csv,
    variance_study,
)
from .model import DEFAULT_TAU2, BUILTIN_MEANS, GmmSpec, generate_gmm_data
from .optimizer import DivergedError, OptimizerConfig, Schedule, run

EXIT_OK, EXIT_NOT_CONVERGED, EXIT_DIVERGED = 0, 2, 3
EXIT_USAGE, EXIT_DATAERR, EXIT_IOERR = 64, 65, 74


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _positive_int(text):
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError("must be >= 1")
    return v


def _k_list(text):
    """``2..10`` or ``2,3,5``."""
    if ".." in text:
        lo, hi = text.split("..")
        return list(range(int(lo), int(hi) + 1))
    return [int(t) for t in text.split(",")]


def _write(text: str, out):
    if out is None or str(out) == "-":
        sys.stdout.write(text)
    else:
        Path(out).write_text(text, encoding="utf-8")


def _dump(obj) -> str:
    return json.dumps(obj, indent=2, allow_nan=False) + "\n"


def _finite(obj):
    """Replace non-finite floats by ``None`` so the output stays strict JSON."""
    if isinstance(obj, float):
        return obj if obj == obj and abs(obj) != float("inf") else None
    if isinstance(obj, dict):
        return {k: _finite(v) for k, v in obj.items()}
    if isinstance(obj, list):
        return [_finite(v) for v in obj]
    return obj


def cmd_gen_data(args) -> int:
    if args.k > len(BUILTIN_MEANS):
        raise _UsageError(f"--k must be <= {len(BUILTIN_MEANS)} (one per built-in mean)")
    data = generate_gmm_data(args.k, args.n, BUILTIN_MEANS, args.sigma2, args.seed)
    config = {"command": "gen-data", "K": args.k, "N": args.n, "sigma2": args.sigma2, "seed": args.seed,
              "means": list(BUILTIN_MEANS[: args.k])}
    out = Path(args.out)
    save_csv(data, out, comment="config: " + json.dumps(config, sort_keys=True))
    sidecar = out.with_name(out.name + ".json")
    sidecar.write_text(_dump(config), encoding="utf-8")
    return EXIT_OK


def cmd_fit(args) -> int:
    data = load_csv(args.data)
    spec = GmmSpec(args.k, data.d, tau2=args.tau2,
                   sigma2=args.sigma2 if args.sigma2 is not None else data.pooled_variance())
    config = OptimizerConfig(method=Estimator(args.method), S=args.s, epsilon=args.epsilon, eta=args.eta,
                             beta=args.beta, xi=args.xi, schedule=Schedule(args.schedule),
                             min_iters=args.min_iters, max_iters=args.max_iters, seed=args.seed,
                             eval_samples=args.eval_samples)
    try:
        report = run(data, spec, config)
    except DivergedError as exc:
        payload = {"method": config.method.value, "diverged": True, "converged": False,
                   "iterations": exc.iterations, "error": str(exc),
                   "config": {**config.to_dict(), "K": spec.K, "d": spec.d, "tau2": spec.tau2,
                              "sigma2": spec.sigma2, "N": data.N, "data": data.provenance},
                   "trace": exc.trace}
        _write(_dump(_finite(payload)), args.out)
        print(f"diverged: {exc}", file=sys.stderr)
        return EXIT_DIVERGED
    if args.no_timing:
        report.wall_time_s = None
    _write(_dump(_finite(report.to_dict(include_trace=not args.no_trace))), args.out)
    if not report.converged:
        print(f"not converged after {report.iterations} iterations", file=sys.stderr)
        return EXIT_NOT_CONVERGED
    return EXIT_OK


def cmd_variance_study(args) -> int:
    result = variance_study(args.ks, N=args.n, S=args.s, B=args.b, seed=args.seed,
                            sigma2=args.sigma2, tau2=args.tau2, warmup_iters=args.warmup_iters,
                            warmup_eta=args.warmup_eta)
    config = {"command": "variance-study", **result.config}
    text = rows_to_json(result.rows, config) if args.format == "json" else rows_to_csv(result.rows, config)
    _write(text, args.out)
    if args.long_out:
        Path(args.long_out).write_text(rows_to_csv(result.long_rows, config), encoding="utf-8")
    return EXIT_OK


def cmd_benchmark(args) -> int:
    names = list(BENCHMARKS) if args.dataset == "all" else [args.dataset]
    methods = [Estimator.JS_PLUS, Estimator.RB] if args.method == "both" else [Estimator(args.method)]
    eta = None
    if args.eta is not None:
        eta = {m: args.eta for m in methods}
    rows = benchmark_sweep(names, methods, seed=args.seed, S=args.s, beta=args.beta,
                           min_iters=args.min_iters, max_iters=args.max_iters, eta=eta,
                           data_dir=args.data_dir, tau2=args.tau2, sigma2=args.sigma2)
    if args.no_timing:
        for r in rows:
            r.wall_time_s = None
    config = {"command": "benchmark", "datasets": names, "methods": [m.value for m in methods],
              "seed": args.seed, "S": args.s, "beta": args.beta, "eta": args.eta,
              "min_iters": args.min_iters, "max_iters": args.max_iters, "tau2": args.tau2,
              "sigma2": args.sigma2, "epsilon": {n: BENCHMARKS[n].epsilon for n in names}}
    text = rows_to_json(rows, config) if args.format == "json" else rows_to_csv(rows, config)
    _write(text, args.out)
    if any(r.diverged for r in rows):
        return EXIT_DIVERGED
    if not all(r.converged for r in rows):
        return EXIT_NOT_CONVERGED
    return EXIT_OK


class _UsageError(Exception):
    pass


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="jsbbvi", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    g = sub.add_parser("gen-data", help="simulate a univariate Gaussian mixture")
    g.add_argument("--k", type=_positive_int, required=True)
    g.add_argument("--n", type=_positive_int, default=200)
    g.add_argument("--sigma2", type=float, default=3.0)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--out", required=True)
    g.set_defaults(func=cmd_gen_data)

    f = sub.add_parser("fit", help="fit the mixture to a CSV data set")
    f.add_argument("--data", required=True)
    f.add_argument("--method", choices=[e.value for e in Estimator], default="js")
    f.add_argument("--k", type=_positive_int, default=2)
    f.add_argument("--s", type=int, default=500)
    f.add_argument("--epsilon", type=float, default=0.01)
    f.add_argument("--eta", type=float, default=None, help="default: 1.0 for rb/rbplus, 0.1 otherwise")
    f.add_argument("--beta", type=float, default=0.9)
    f.add_argument("--xi", type=float, default=1e-8)
    f.add_argument("--schedule", choices=[s.value for s in Schedule], default="rmsprop")
    f.add_argument("--min-iters", type=int, default=100)
    f.add_argument("--max-iters", type=int, default=2000)
    f.add_argument("--tau2", type=float, default=DEFAULT_TAU2)
    f.add_argument("--sigma2", type=float, default=None, help="default: pooled data variance")
    f.add_argument("--eval-samples", type=int, default=1000)
    f.add_argument("--seed", type=int, default=0)
    f.add_argument("--no-timing", action="store_true", help="write wall_time_s as null")
    f.add_argument("--no-trace", action="store_true")
    f.add_argument("--out", default=None)
    f.set_defaults(func=cmd_fit)

    v = sub.add_parser("variance-study", help="bootstrap variance of the four estimators")
    v.add_argument("--ks", type=_k_list, default=list(range(2, 11)))
    v.add_argument("--n", type=_positive_int, default=200)
    v.add_argument("--s", type=int, default=500)
    v.add_argument("--b", type=int, default=100)
    v.add_argument("--sigma2", type=float, default=3.0)
    v.add_argument("--tau2", type=float, default=DEFAULT_TAU2)
    v.add_argument("--warmup-iters", type=int, default=10)
    v.add_argument("--warmup-eta", type=float, default=0.1)
    v.add_argument("--seed", type=int, default=0)
    v.add_argument("--format", choices=["csv", "json"], default="csv")
    v.add_argument("--out", default=None)
    v.add_argument("--long-out", default=None, help="also write per-block long-format CSV here")
    v.set_defaults(func=cmd_variance_study)

    b = sub.add_parser("benchmark", help="fit JS+ and RB on the clustering benchmarks")
    b.add_argument("--dataset", choices=[*BENCHMARKS, "all"], default="all")
    b.add_argument("--method", choices=["js", "rb", "both"], default="both")
    b.add_argument("--s", type=int, default=500)
    b.add_argument("--eta", type=float, default=None, help="override the per-method default")
    b.add_argument("--beta", type=float, default=0.9)
    b.add_argument("--min-iters", type=int, default=100)
    b.add_argument("--max-iters", type=int, default=2000)
    b.add_argument("--tau2", type=float, default=DEFAULT_TAU2)
    b.add_argument("--sigma2", type=float, default=None, help="default: pooled data variance")
    b.add_argument("--data-dir", default=None, help="directory holding <dataset>.csv (default: bundled)")
    b.add_argument("--seed", type=int, default=0)
    b.add_argument("--format", choices=["csv", "json"], default="json")
    b.add_argument("--no-timing", action="store_true", help="write wall_time_s as null")
    b.add_argument("--out", default=None)
    b.set_defaults(func=cmd_benchmark)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except _UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"jsbbvi {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except CsvParseError as exc:
        print(f"jsbbvi {args.command}: malformed data: {exc}", file=sys.stderr)
        return EXIT_DATAERR
    except OSError as exc:
        print(f"jsbbvi {args.command}: I/O error: {exc}", file=sys.stderr)
        return EXIT_IOERR
    except ValueError as exc:
        print(f"jsbbvi {args.command}: invalid argument: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
