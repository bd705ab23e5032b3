"""
Command line interface.

    distcov dcov   --input data.csv --x-cols x1,x2 --y-cols y
    distcov test   --input data.csv --x-cols x --y-cols y --replicates 999 --seed 7
    distcov nonlin --input data.csv --x-cols x --y-cols y
    distcov serial --input series.csv --x-cols z --max-lag 5
    distcov sim    vn2 --n 4 --reps 100000 --seed 1

Results are JSON on standard output (``sim`` writes JSON lines, or CSV with
``--format csv``). Errors are a JSON object on standard error; exit code 1
means a usage error, 2 a data error.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import math
import secrets
import sys
import time
from dataclasses import dataclass, field

from . import __version__
from .applications import fit_least_squares, nonlinearity_test, serial_dcor
from .core import corrected_dcor, dcov_estimates
from .exceptions import DataError, DistcovError
from .inference import PermutationPlan, highdim_test, permutation_test
from .ingest import UsageError, ingest_columns, ingest_csv
from .metrics import distances_for, euclidean_distances, read_distance_csv
from . import simlab

EXIT_OK, EXIT_USAGE, EXIT_DATA = 0, 1, 2

# Regime in which the Normal(0, 2) rule is meant to apply.
HIGHDIM_MIN_N = 20
HIGHDIM_MIN_DIM_RATIO = 5.0


@dataclass
class RunConfig:
    subcommand: str
    input: str | None = None
    x_dist: str | None = None
    y_dist: str | None = None
    x_cols: str | None = None
    y_cols: str | None = None
    metric: str = "euclidean"
    replicates: int = 999
    seed: int = 0
    alpha: float = 0.05
    method: str = "permutation"
    statistic: str = "nV2_over_T2"
    tail: str = "upper"
    max_lag: int = 1
    threads: int | None = None
    output: str | None = None
    sim: dict = field(default_factory=dict)


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="distcov", description="Distance covariance statistics and tests.")
    parser.add_argument("--version", action="version", version=f"distcov {__version__}")
    sub = parser.add_subparsers(dest="subcommand", required=True, parser_class=_Parser)

    def common(p, data=True):
        if data:
            p.add_argument("--input", help="CSV file with a header row")
            p.add_argument("--x-cols", help="comma separated X column names")
            p.add_argument("--y-cols", help="comma separated Y column names")
        p.add_argument("--threads", type=int, default=None,
                       help="worker thread cap (default: $DISTCOV_THREADS or 1)")
        p.add_argument("-o", "--output", help="write to this path instead of stdout")

    def testing(p):
        p.add_argument("--replicates", type=int, default=999)
        p.add_argument("--seed", type=int, default=0, help="0 draws a seed from entropy (echoed)")
        p.add_argument("--alpha", type=float, default=0.05)
        p.add_argument("--statistic", choices=["nV2_over_T2", "nCn", "Cn", "Vn2"], default="nV2_over_T2")

    for name in ("dcov", "test"):
        p = sub.add_parser(name)
        common(p)
        p.add_argument("--metric", choices=["euclidean", "discrete", "precomputed"], default="euclidean")
        p.add_argument("--x-dist", help="square CSV distance matrix for X (precomputed metric)")
        p.add_argument("--y-dist", help="square CSV distance matrix for Y (precomputed metric)")
        if name == "test":
            testing(p)
            p.add_argument("--method", choices=["permutation", "highdim"], default="permutation")
            p.add_argument("--tail", choices=["upper", "two_sided"], default="upper")

    p = sub.add_parser("nonlin")
    common(p)
    testing(p)

    p = sub.add_parser("serial")
    common(p)
    testing(p)
    p.add_argument("--max-lag", type=int, default=1)

    p = sub.add_parser("sim")
    common(p, data=False)
    p.add_argument("experiment", choices=["vn2", "un", "trig", "cauchy", "highdim"])
    p.add_argument("--generator", choices=["bernoulli_half_pair", "std_normal_pair"], default="bernoulli_half_pair")
    p.add_argument("--n", type=int, default=None)
    p.add_argument("--reps", type=int, default=None)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--k", type=int, default=1)
    p.add_argument("--m-values", default="2,3,4,5,6")
    p.add_argument("--p", type=int, default=30)
    p.add_argument("--q", type=int, default=30)
    p.add_argument("--format", choices=["jsonl", "csv"], default="jsonl")
    return parser


def config_from_args(ns: argparse.Namespace) -> RunConfig:
    cfg = RunConfig(subcommand=ns.subcommand)
    for key in ("input", "x_dist", "y_dist", "x_cols", "y_cols", "metric", "replicates", "seed",
                "alpha", "statistic", "tail", "max_lag", "threads", "output"):
        if hasattr(ns, key):
            setattr(cfg, key, getattr(ns, key))
    if getattr(ns, "method", None) is not None:
        cfg.method = ns.method
    if ns.subcommand == "sim":
        cfg.sim = {k: getattr(ns, k) for k in ("experiment", "generator", "n", "reps", "k", "m_values", "p", "q", "format")}
    return cfg


def _resolve_seed(seed: int) -> int:
    if seed < 0 or seed >= 1 << 64:
        raise UsageError(f"seed must be a 64-bit unsigned integer, got {seed}")
    while seed == 0:
        seed = secrets.randbits(64)
    return seed


def _finite(x):
    if isinstance(x, float) and not math.isfinite(x):
        return None
    return x


def _load_pair(cfg: RunConfig):
    """Distance matrices plus (n, p, q) for dcov/test."""
    if cfg.metric == "precomputed":
        if not cfg.x_dist or not cfg.y_dist:
            raise UsageError("--metric precomputed needs --x-dist and --y-dist")
        dx, dy = read_distance_csv(cfg.x_dist), read_distance_csv(cfg.y_dist)
        if dx.n != dy.n:
            raise DataError(f"distance matrices have different orders: {dx.n} != {dy.n}")
        return dx, dy, dx.n, None, None
    if not cfg.input:
        raise UsageError("--input is required")
    x, y = ingest_csv(cfg.input, cfg.x_cols, cfg.y_cols, metric=cfg.metric)
    return distances_for(x, cfg.threads), distances_for(y, cfg.threads), x.n, x.p, y.p


def _statistics(dx, dy) -> dict:
    est = dcov_estimates(dx, dy)
    ub = corrected_dcor(dx, dy)
    return {
        "vn2": est.vn2,
        "dvar_x": est.dvar_x,
        "dvar_y": est.dvar_y,
        "rn2": est.rn2,
        "t2": est.t2,
        "un": _finite(ub.un_xy),
        "cn": ub.cn,
    }


def _test_block(result, alpha: float) -> dict:
    block = result.to_dict()
    block["alpha"] = alpha
    block["reject"] = bool(result.p_value <= alpha)
    return block


def _check_replicates(cfg: RunConfig) -> None:
    if cfg.method == "permutation" and cfg.replicates < 1:
        raise UsageError("--replicates must be >= 1")
    if not 0 < cfg.alpha < 1:
        raise UsageError("--alpha must be in (0, 1)")


def _plan(cfg: RunConfig) -> PermutationPlan:
    return PermutationPlan(replicates=cfg.replicates, seed=cfg.seed, statistic=cfg.statistic)


def _run_dcov_or_test(cfg: RunConfig, doc: dict) -> None:
    dx, dy, n, p, q = _load_pair(cfg)
    doc.update(n=n, p=p, q=q)
    doc["statistics"] = _statistics(dx, dy)
    if cfg.subcommand == "dcov":
        return
    _check_replicates(cfg)
    if cfg.method == "highdim":
        if n < HIGHDIM_MIN_N:
            doc["warnings"].append(f"n = {n} < {HIGHDIM_MIN_N}: the normal approximation assumes moderately large n")
        if p is not None and q is not None and (p + q) / n < HIGHDIM_MIN_DIM_RATIO:
            doc["warnings"].append(
                f"(p + q) / n = {(p + q) / n:.3g} < {HIGHDIM_MIN_DIM_RATIO:g}: the normal approximation assumes high dimension"
            )
        result = highdim_test(doc["statistics"]["cn"], n, tail=cfg.tail)
    else:
        cfg.seed = _resolve_seed(cfg.seed)
        result = permutation_test(dx, dy, _plan(cfg), threads=cfg.threads)
    doc["test"] = _test_block(result, cfg.alpha)


def _run_nonlin(cfg: RunConfig, doc: dict) -> None:
    if not cfg.input:
        raise UsageError("--input is required")
    _check_replicates(cfg)
    x, y = ingest_csv(cfg.input, cfg.x_cols, cfg.y_cols)
    fit = fit_least_squares(x.observations, y.observations)
    doc.update(n=x.n, p=x.p, q=y.p)
    doc["statistics"] = _statistics(euclidean_distances(x, cfg.threads), euclidean_distances(fit.residuals, cfg.threads))
    cfg.seed = _resolve_seed(cfg.seed)
    result = nonlinearity_test(x.observations, y.observations, _plan(cfg), threads=cfg.threads)
    doc["test"] = _test_block(result, cfg.alpha)
    doc["warnings"].append("p-value is approximate: residuals are estimated, not observed errors")


def _run_serial(cfg: RunConfig, doc: dict) -> None:
    if not cfg.input:
        raise UsageError("--input is required")
    _check_replicates(cfg)
    z = ingest_columns(cfg.input, cfg.x_cols)
    cfg.seed = _resolve_seed(cfg.seed)
    doc.update(n=int(z.shape[0]), p=int(z.shape[1]), q=int(z.shape[1]))
    results = serial_dcor(z, cfg.max_lag, _plan(cfg), threads=cfg.threads)
    doc["serial"] = [dict(r.to_dict(), seed=cfg.seed) for r in results]
    doc["warnings"].append("serial p-values are approximate: overlapping lag pairs are not independent")


_SIM_DEFAULTS = {
    "vn2": {"n": 4, "reps": 100_000},
    "un": {"n": 10, "reps": 100_000},
    "trig": {"n": 500, "reps": 200},
    "cauchy": {"n": 200, "reps": 100_000},
    "highdim": {"n": 30, "reps": 1000},
}


def run_sim(cfg: RunConfig) -> list[simlab.SimReport]:
    s = cfg.sim
    exp = s["experiment"]
    n = s["n"] if s.get("n") is not None else _SIM_DEFAULTS[exp]["n"]
    reps = s["reps"] if s.get("reps") is not None else _SIM_DEFAULTS[exp]["reps"]
    seed = _resolve_seed(cfg.seed)
    cfg.seed = seed
    if exp in ("vn2", "un"):
        spec = getattr(simlab.OracleSpec, s["generator"])()
        fn = simlab.mc_vn2_expectation if exp == "vn2" else simlab.mc_un_expectation
        return [fn(spec, n, reps, seed, threads=cfg.threads)]
    if exp == "trig":
        try:
            ms = [int(v) for v in str(s["m_values"]).split(",") if v.strip()]
        except ValueError:
            raise UsageError(f"--m-values must be comma separated integers, got {s['m_values']!r}") from None
        return simlab.trig_dcor_sweep(s["k"], ms, n, reps, seed, threads=cfg.threads)
    if exp == "cauchy":
        ks = simlab.sn_cauchy_check(n, reps, seed, threads=cfg.threads)
        return [simlab.SimReport(ks, 0.0, reps, None, "sn_cauchy_ks", {"n": n, "seed": seed})]
    ks = simlab.highdim_null_distribution(s["p"], s["q"], n, reps, seed, threads=cfg.threads)
    return [simlab.SimReport(ks, 0.0, reps, None, "highdim_null_ks", {"p": s["p"], "q": s["q"], "n": n, "seed": seed})]


def _sim_csv(reports) -> str:
    buf = io.StringIO()
    keys = sorted({k for r in reports for k in r.params})
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["name", "estimate", "std_error", "replicates", "target", "z_score"] + keys)
    for r in reports:
        d = r.to_dict()
        w.writerow([d["name"], d["estimate"], d["std_error"], d["replicates"],
                    "" if d["target"] is None else d["target"],
                    "" if d["z_score"] is None else d["z_score"]]
                   + [r.params.get(k, "") for k in keys])
    return buf.getvalue()


def run(cfg: RunConfig) -> tuple[int, str]:
    """Execute a configuration; returns ``(exit_code, stdout_text)``.

    Errors are raised, not returned; :func:`main` maps them to exit codes.
    """
    start = time.perf_counter()
    if cfg.threads is not None and cfg.threads < 1:
        raise UsageError("--threads must be >= 1")
    if cfg.subcommand == "sim":
        reports = run_sim(cfg)
        if cfg.sim.get("format") == "csv":
            return EXIT_OK, _sim_csv(reports)
        buf = io.StringIO()
        simlab.write_jsonl(reports, buf)
        return EXIT_OK, buf.getvalue()

    doc = {
        "version": __version__,
        "subcommand": cfg.subcommand,
        "n": None,
        "p": None,
        "q": None,
        "statistics": None,
        "test": None,
        "warnings": [],
    }
    handlers = {"dcov": _run_dcov_or_test, "test": _run_dcov_or_test, "nonlin": _run_nonlin, "serial": _run_serial}
    if cfg.subcommand not in handlers:
        raise UsageError(f"unknown subcommand {cfg.subcommand!r}")
    handlers[cfg.subcommand](cfg, doc)
    doc["timing_ms"] = round((time.perf_counter() - start) * 1000.0, 3)
    return EXIT_OK, json.dumps(doc, indent=2, allow_nan=False) + "\n"


def _error(kind: str, exc: BaseException) -> str:
    return json.dumps({"error": {"kind": kind, "type": type(exc).__name__, "message": str(exc)}}) + "\n"


def main(argv: list[str] | None = None) -> int:
    try:
        ns = build_parser().parse_args(argv)
        cfg = config_from_args(ns)
        code, text = run(cfg)
    except UsageError as exc:
        sys.stderr.write(_error("usage", exc))
        return EXIT_USAGE
    except (DataError, DistcovError) as exc:
        sys.stderr.write(_error("data", exc))
        return EXIT_DATA
    if cfg.output:
        with open(cfg.output, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return code


if __name__ == "__main__":
    sys.exit(main())
