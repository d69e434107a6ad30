"""Command-line interface: ``ebthresh {threshold,bench,demo,sweep}``.

Exit codes: 0 success, 1 usage or configuration error, 2 data error,
3 numerical failure.
"""

from __future__ import annotations

import argparse
import configparser
import datetime as _dt
import json
import sys
from pathlib import Path

from . import benchmark as bm
from ._solvers import NumericalError
from .mml import EstimatorConfig, Rule, ScalePolicy, ebayes_fit
from .priors import PriorSpec
from .signals import DataFileError, default_sweep_grid, read_vector, write_vector

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERICAL = 0, 1, 2, 3
DEFAULT_LEVELS = (5, 20, 100, 500, 2000, 10_000)


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _timestamp(args) -> str | None:
    if args.no_timestamp:
        return None
    return _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds")


def _ensure_parent(path: Path) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)


# -- threshold -----------------------------------------------------------------

def _estimator_config(args) -> EstimatorConfig:
    if args.prior == "cauchy":
        if args.scale is not None:
            raise UsageError("--scale applies only to the Laplace prior")
        prior, policy = PriorSpec.quasi_cauchy(), ScalePolicy.FIXED
    elif args.scale in (None, "mml"):
        prior, policy = PriorSpec.laplace(0.5), ScalePolicy.MML
    else:
        try:
            a = float(args.scale)
        except ValueError:
            raise UsageError(f"--scale must be a positive number or 'mml', got {args.scale!r}") from None
        prior, policy = PriorSpec.laplace(a), ScalePolicy.FIXED
    if args.cutover_fraction is not None and args.modified_A is None:
        raise UsageError("--cutover-fraction needs --modified-A")
    return EstimatorConfig(prior=prior, scale_policy=policy, rule=Rule(args.rule),
                           modified_A=args.modified_A, cutover_fraction=args.cutover_fraction,
                           noise_sd=args.sd)


def fit_header(result, config: EstimatorConfig, n: int) -> dict:
    f = result.fit
    return {
        "n": n,
        "prior": str(config.prior) if config.scale_policy is ScalePolicy.FIXED else "laplace(a=mml)",
        "rule": config.rule.value,
        "noise_sd": config.noise_sd,
        "w_hat": f.w_hat,
        "a_hat": f.a_hat,
        "t_hat": f.t_hat,
        "zeta_hat": f.zeta_hat,
        "loglik": f.loglik,
        "at_lower_boundary": f.at_lower_boundary,
        "at_upper_boundary": f.at_upper_boundary,
        "threshold_used": result.threshold,
        "modified": result.modified,
    }


def cmd_threshold(args) -> int:
    config = _estimator_config(args)
    try:
        x = read_vector(args.input)
    except OSError as exc:
        raise DataFileError(f"cannot read {args.input}: {exc.strerror or exc}") from None
    if x.size < 2:
        raise DataFileError(f"{args.input}: need at least two values, found {x.size}")
    result = ebayes_fit(x, config)
    header = fit_header(result, config, x.size)
    stamp = _timestamp(args)
    out = Path(args.out) if args.out else None
    if args.format == "json":
        doc = {"fit": header, "estimate": result.estimate.tolist()}
        if stamp:
            doc["created"] = stamp
        text = json.dumps(doc, indent=1) + "\n"
        if out:
            _ensure_parent(out)
            out.write_text(text)
        else:
            sys.stdout.write(text)
        return EXIT_OK
    lines = ([f"created: {stamp}"] if stamp else []) + [f"{k}: {_fmt(v)}" for k, v in header.items()]
    if out:
        _ensure_parent(out)
        write_vector(out, result.estimate, lines)
    else:
        sys.stdout.write("".join(f"# {h}\n" for h in lines))
        sys.stdout.write("".join(f"{float(v)!r}\n" for v in result.estimate))
    return EXIT_OK


def _fmt(v) -> str:
    if v is None:
        return "none"
    if isinstance(v, bool):
        return str(v).lower()
    if isinstance(v, float):
        return repr(v)
    return str(v)


def parse_header(path) -> dict:
    """Read back the '# key: value' header written by ``threshold``."""
    out = {}
    for line in Path(path).read_text().splitlines():
        if not line.startswith("# "):
            break
        key, _, val = line[2:].partition(": ")
        out[key] = val
    return out


# -- bench ---------------------------------------------------------------------

_BENCH_KEYS = {"n", "k_values", "mu0_values", "methods", "replications", "master_seed", "workers"}


def load_bench_config(path) -> dict:
    """Flat key=value file; list values are comma separated, '#' starts a comment."""
    parser = configparser.ConfigParser(inline_comment_prefixes=("#",), comment_prefixes=("#",))
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise UsageError(f"cannot read config {path}: {exc.strerror or exc}") from None
    try:
        parser.read_string("[bench]\n" + text)
    except configparser.Error as exc:
        raise UsageError(f"{path}: {exc.message.splitlines()[0]}") from None
    raw = dict(parser["bench"])
    unknown = set(raw) - _BENCH_KEYS
    if unknown:
        raise UsageError(f"{path}: unknown keys: {', '.join(sorted(unknown))}")
    try:
        cfg: dict = {}
        if "n" in raw:
            cfg["n"] = int(raw["n"])
        if "k_values" in raw:
            cfg["K_values"] = tuple(int(v) for v in _split(raw["k_values"]))
        if "mu0_values" in raw:
            cfg["mu0_values"] = tuple(float(v) for v in _split(raw["mu0_values"]))
        if "methods" in raw:
            cfg["methods"] = tuple(_split(raw["methods"]))
        if "replications" in raw:
            cfg["replications"] = int(raw["replications"])
        if "master_seed" in raw:
            cfg["master_seed"] = int(raw["master_seed"])
        if "workers" in raw:
            cfg["workers"] = int(raw["workers"])
    except ValueError as exc:
        raise UsageError(f"{path}: {exc}") from None
    return cfg


def _split(text: str) -> list[str]:
    return [p.strip() for p in text.split(",") if p.strip()]


def cmd_bench(args) -> int:
    cfg = load_bench_config(args.config) if args.config else {}
    workers = cfg.pop("workers", 1)
    if args.reps is not None:
        cfg["replications"] = args.reps
    if args.seed is not None:
        cfg["master_seed"] = args.seed
    if args.methods:
        cfg["methods"] = tuple(_split(args.methods))
    if args.workers is not None:
        workers = args.workers
    try:
        grid = bm.BenchGrid(**cfg)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    result = bm.run_benchmark(grid, workers=max(1, workers))
    out = Path(args.out or "bench")
    out.mkdir(parents=True, exist_ok=True)
    if args.format == "json":
        doc = result.to_json_dict()
        stamp = _timestamp(args)
        if stamp:
            doc["created"] = stamp
        (out / "result.json").write_text(json.dumps(doc, indent=1, allow_nan=False) + "\n")
    else:
        bm.write_summary_csv(result, out / "summary.csv")
        bm.write_table1_csv(result, out / "table1.csv")
    if len(result.methods) >= 2:
        bm.write_table2_csv(bm.inefficiency_table(result), out / "table2.csv")
    for ci, m, r, msg in result.failures:
        print(f"warning: {m} failed on cell {result.cells[ci]} rep {r}: {msg}", file=sys.stderr)
    print(f"wrote {out}/ ({len(result.cells)} cells x {len(result.methods)} methods, "
          f"{grid.replications} reps)")
    return EXIT_OK


# -- demo and sweep -----------------------------------------------------------------

def _levels(text: str | None, n: int) -> tuple[int, ...]:
    if text is None:
        levels = tuple(v for v in DEFAULT_LEVELS if v <= n)
    else:
        try:
            levels = tuple(int(v) for v in _split(text))
        except ValueError:
            raise UsageError(f"--levels must be comma-separated integers, got {text!r}") from None
    if not levels or any(not 0 <= v <= n for v in levels):
        raise UsageError(f"sparsity levels must lie in [0, {n}]")
    return levels


def _tracking(args):
    if args.n < 2:
        raise UsageError("--n must be at least 2")
    seed = bm.DEFAULT_SEED if args.seed is None else args.seed
    return bm.threshold_tracking_sweep(args.n, _levels(args.levels, args.n), seed=seed), seed


def cmd_demo(args) -> int:
    points, seed = _tracking(args)
    out = Path(args.out or "demo")
    out.mkdir(parents=True, exist_ok=True)
    stamp = _timestamp(args)
    for p in points:
        path = out / f"curve_{p.level}.csv"
        with open(path, "w") as fh:
            if stamp:
                fh.write(f"# created: {stamp}\n")
            fh.write(f"# n: {args.n}\n# sparsity: {p.level}\n# seed: {seed}\n"
                     f"# eb_threshold: {p.eb_threshold!r}\n# oracle_threshold: {p.oracle_threshold!r}\n")
            fh.write("threshold,avg_sq_error\n")
            for t, e in zip(p.grid, p.curve):
                fh.write(f"{float(t)!r},{float(e)!r}\n")
    print(f"wrote {len(points)} curve files to {out}/ (grid max {default_sweep_grid(args.n)[-1]:.3f})")
    return EXIT_OK


def cmd_sweep(args) -> int:
    points, _ = _tracking(args)
    out = Path(args.out or "tracking.csv")
    _ensure_parent(out)
    if args.format == "json":
        doc = [{"sparsity": p.level, "eb_t": p.eb_threshold, "oracle_t": p.oracle_threshold,
                "eb_err": p.eb_error, "oracle_err": p.oracle_error} for p in points]
        out.write_text(json.dumps(doc, indent=1) + "\n")
    else:
        bm.write_tracking_csv(points, out)
    print(f"wrote {out}")
    return EXIT_OK


# -- entry point ----------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="ebthresh", description="Empirical Bayes thresholding for sparse sequences.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(sp, fmt=True):
        sp.add_argument("--out", help="output path (file or directory, per subcommand)")
        if fmt:
            sp.add_argument("--format", choices=("csv", "json"), default="csv")
        sp.add_argument("--no-timestamp", action="store_true", help="omit the creation timestamp")

    t = sub.add_parser("threshold", help="denoise a file of observations")
    t.add_argument("input", help="one number per line; '#' comments allowed")
    t.add_argument("--prior", choices=("laplace", "cauchy"), default="laplace")
    t.add_argument("--scale", help="Laplace scale a, or 'mml' to estimate it (default)")
    t.add_argument("--rule", choices=[r.value for r in Rule], default="median")
    t.add_argument("--modified-A", type=float, dest="modified_A")
    t.add_argument("--cutover-fraction", type=float, dest="cutover_fraction",
                   help="switch when t_hat >= f * sqrt(2 log n) (default: the t_n rule)")
    t.add_argument("--sd", type=float, default=1.0, help="noise standard deviation")
    common(t)
    t.set_defaults(func=cmd_threshold)

    b = sub.add_parser("bench", help="run the simulation grid")
    b.add_argument("--config", help="key=value grid file")
    b.add_argument("--reps", type=int)
    b.add_argument("--seed", type=int)
    b.add_argument("--methods", help="comma-separated method names: " + ", ".join(bm.METHODS))
    b.add_argument("--workers", type=int)
    common(b)
    b.set_defaults(func=cmd_bench)

    for name, func, helptext in (("demo", cmd_demo, "per-level oracle error curves"),
                                 ("sweep", cmd_sweep, "EB vs oracle threshold by sparsity")):
        d = sub.add_parser(name, help=helptext)
        d.add_argument("--n", type=int, default=10_000)
        d.add_argument("--levels", help="comma-separated sparsity levels")
        d.add_argument("--seed", type=int)
        common(d, fmt=(name == "sweep"))
        d.set_defaults(func=func)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"ebthresh: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except DataFileError as exc:
        print(f"ebthresh: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except NumericalError as exc:
        print(f"ebthresh: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except ValueError as exc:
        print(f"ebthresh: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
