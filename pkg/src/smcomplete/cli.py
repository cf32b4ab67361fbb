"""Command-line front end.

Subcommands::

    impute    recover A22 from three block CSV files
    nnm       penalized nuclear-norm baseline on the same inputs
    simulate  run a simulation config, write a results CSV
    spectrum  print the singular values of a CSV matrix

Exit codes: 0 success, 1 numerical failure, 2 input or validation error.
"""
from __future__ import annotations

import argparse
import configparser
import csv
import logging
import sys
from typing import Dict, List, Optional, Sequence

import numpy as np

from . import expt, matlin, nnm, smc, synth

EXIT_OK = 0
EXIT_NUMERIC = 1
EXIT_INPUT = 2

log = logging.getLogger("smcomplete")


class InputError(Exception):
    pass


# --- CSV matrices ------------------------------------------------------------

def write_matrix(path, M, header: bool = False) -> None:
    """Write ``M`` as comma-separated values with 17 significant digits."""
    M = np.atleast_2d(np.asarray(M, dtype=np.float64))
    with open(path, "w", newline="") as fh:
        if header:
            fh.write(",".join(f"c{j + 1}" for j in range(M.shape[1])) + "\n")
        for row in M:
            fh.write(",".join(format(float(v), ".17g") for v in row) + "\n")


def read_matrix(path, header: bool = False, name: Optional[str] = None) -> np.ndarray:
    name = name or str(path)
    try:
        with open(path, newline="") as fh:
            rows = list(csv.reader(fh))
    except OSError as exc:
        raise InputError(f"{name}: cannot read {path}: {exc.strerror}") from None
    if header and rows:
        rows = rows[1:]
    rows = [r for r in rows if r and any(c.strip() for c in r)]
    if not rows:
        raise InputError(f"{name}: no data in {path}")
    width = len(rows[0])
    for i, r in enumerate(rows, start=2 if header else 1):
        if len(r) != width:
            raise InputError(f"{name}: line {i} has {len(r)} fields, expected {width}")
    try:
        M = np.array([[float(c) for c in r] for r in rows], dtype=np.float64)
    except ValueError as exc:
        raise InputError(f"{name}: {exc}") from None
    if not np.all(np.isfinite(M)):
        raise InputError(f"{name}: contains NaN or Inf")
    return M


def _load_blocks(args) -> smc.BlockPartition:
    a11 = read_matrix(args.a11, args.header, "a11")
    a12 = read_matrix(args.a12, args.header, "a12")
    a21 = read_matrix(args.a21, args.header, "a21")
    try:
        return smc.BlockPartition(a11, a12, a21)
    except smc.BlockShapeError as exc:
        raise InputError(str(exc)) from None


# --- simulation configs ------------------------------------------------------

EXPERIMENT_KEYS = {
    "p1": "rows of A",
    "p2": "columns of A",
    "m1": "observed rows",
    "m2": "observed columns",
    "spectrum": "gap | power",
    "r": "gap spectrum: number of unit singular values",
    "g": "gap spectrum: gap ratio",
    "alpha": "power spectrum: decay exponent",
    "scheme": "first | without | with (row/column sampling)",
    "solvers": "comma list of smc-row, smc-col, smc-rank:<r>, nnm",
    "threshold_const": "c in threshold = c*sqrt(p/m) (default 2)",
    "reps": "replications per sweep point",
    "seed": "base seed (required)",
    "nnm_folds": "NNM cross-validation K (default 5)",
    "nnm_grid": "NNM grid size N (default 10)",
    "nnm_splits": "NNM random splits H (default 5)",
    "nnm_tol": "soft-impute relative tolerance (default 1e-5)",
    "nnm_max_iter": "soft-impute iteration cap (default 500)",
}

CONFIG_HELP = """\
Config files are INI-style. Section [experiment] holds scalar keys:
{keys}
Optional section [sweep] maps any of {sweep} to comma-separated
lists; every combination is run. Unknown sections or keys are errors.
""".format(
    keys="\n".join(f"  {k:16s} {v}" for k, v in EXPERIMENT_KEYS.items()),
    sweep=", ".join(expt.SWEEP_KEYS),
)


def _num(section: str, key: str, raw: str, kind=float):
    try:
        return kind(raw)
    except ValueError:
        raise InputError(f"[{section}] {key}: cannot parse {raw!r} as {kind.__name__}") from None


def load_config(path):
    """Parse a simulation config into ``(base ExperimentConfig, sweep dict)``."""
    parser = configparser.ConfigParser(interpolation=None)
    try:
        with open(path) as fh:
            parser.read_file(fh)
    except OSError as exc:
        raise InputError(f"cannot read config {path}: {exc.strerror}") from None
    except configparser.Error as exc:
        raise InputError(f"config {path}: {exc}") from None
    extra = set(parser.sections()) - {"experiment", "sweep"}
    if extra:
        raise InputError(f"config {path}: unknown section(s) {sorted(extra)}")
    if not parser.has_section("experiment"):
        raise InputError(f"config {path}: missing [experiment] section")
    exp = dict(parser.items("experiment"))
    for key in exp:
        if key not in EXPERIMENT_KEYS:
            raise InputError(f"[experiment] {key}: unknown key")
    if "seed" not in exp:
        raise InputError("[experiment] seed: required key missing")
    sweep: Dict[str, List[float]] = {}
    if parser.has_section("sweep"):
        for key, raw in parser.items("sweep"):
            if key not in expt.SWEEP_KEYS:
                raise InputError(f"[sweep] {key}: unknown key")
            sweep[key] = [_num("sweep", key, v.strip()) for v in raw.split(",") if v.strip()]
            if not sweep[key]:
                raise InputError(f"[sweep] {key}: empty list")

    def need(key, kind=int, default=None):
        if key in exp:
            return _num("experiment", key, exp[key], kind)
        if default is None:
            if key in sweep:
                return kind(sweep[key][0])
            raise InputError(f"[experiment] {key}: required key missing")
        return default

    kind = exp.get("spectrum", "power").strip()
    if kind == "power":
        spectrum = synth.Power(need("alpha", float, 1.0))
    elif kind == "gap":
        spectrum = synth.Gap(need("r", int), need("g", float, 1.0))
    else:
        raise InputError(f"[experiment] spectrum: unknown profile {kind!r}")
    solvers = tuple(s.strip() for s in exp.get("solvers", "smc-row").split(",") if s.strip())
    try:
        cfg = expt.ExperimentConfig(
            p1=need("p1"), p2=need("p2"), m1=need("m1"), m2=need("m2"),
            spectrum=spectrum,
            scheme=synth.SamplingScheme(exp.get("scheme", "first").strip()),
            solvers=solvers,
            threshold_const=need("threshold_const", float, 2.0),
            reps=need("reps", int, 200),
            base_seed=need("seed"),
            nnm_folds=need("nnm_folds", int, 5),
            nnm_grid=need("nnm_grid", int, 10),
            nnm_splits=need("nnm_splits", int, 5),
            nnm_tol=need("nnm_tol", float, 1e-5),
            nnm_max_iter=need("nnm_max_iter", int, 500),
        )
    except ValueError as exc:
        raise InputError(f"config {path}: {exc}") from None
    return cfg, sweep


RESULT_STATS = ("rel_spectral", "rel_frobenius")


def result_rows(point: Dict[str, object], result: expt.ExperimentResult):
    cfg = result.config
    for summary in result.summaries:
        row = {k: point[k] for k in point}
        row["solver"] = summary.solver
        for key in RESULT_STATS:
            st = summary.stats[key]
            row[f"{key}_mean"] = st.mean
            row[f"{key}_sd"] = st.sd
            row[f"{key}_se"] = st.se
        row["mean_r_hat"] = summary.mean_r_hat
        row["failures"] = summary.failures
        row["reps"] = cfg.reps
        row["base_seed"] = cfg.base_seed
        yield row


def _fmt(v):
    if isinstance(v, float):
        return format(v, ".17g")
    return str(v)


# --- subcommands -------------------------------------------------------------

def cmd_impute(args) -> int:
    blocks = _load_blocks(args)
    if args.rank is not None:
        if args.threshold is not None:
            raise InputError("--rank and --threshold are mutually exclusive")
        a22_hat = smc.recover_known_rank(blocks, args.rank, args.rcond)
        print(f"rank={args.rank}")
    else:
        mode = smc.Mode(args.mode)
        if args.threshold is None:
            policy = smc.ThresholdPolicy.default(blocks, mode, rcond=args.rcond)
        else:
            policy = smc.ThresholdPolicy(mode, args.threshold, args.rcond)
        res = smc.recover_unknown_rank(blocks, policy)
        a22_hat = res.a22_hat
        print(f"mode={policy.mode.value}")
        print(f"threshold={policy.threshold:.17g}")
        print(f"r_hat={res.r_hat}")
        for s, norm in res.d_norm_trace:
            print(f"s={s} d_norm={'singular' if norm is None else format(norm, '.17g')}")
        if res.r_hat == 0:
            print("warning: no rank passed the threshold; writing a zero matrix")
    write_matrix(args.out, a22_hat, args.header)
    return EXIT_OK


def cmd_nnm(args) -> int:
    blocks = _load_blocks(args)
    cfg = nnm.NnmConfig(0.0, args.tol, args.max_iter)
    if args.t is None:
        cv = nnm.cv_select_t(blocks, args.K, args.N, args.H, args.seed, cfg)
        for tg, risk in zip(cv.grid, cv.risk):
            print(f"t={tg:.17g} risk={risk:.17g}")
        t, grid = cv.t_star, cv.grid
    else:
        if args.t < 0:
            raise InputError("--t must be nonnegative")
        t, grid = args.t, None
    fit = nnm.fit_full(blocks, t, grid, cfg, args.N)
    print(f"t_star={t:.17g}")
    print(f"converged={fit.converged}")
    write_matrix(args.out, fit.Z[blocks.m1:, blocks.m2:], args.header)
    return EXIT_OK


def cmd_simulate(args) -> int:
    base, sweep = load_config(args.config)
    rows = []
    for point in expt.sweep_points(sweep):
        try:
            cfg = expt.with_params(base, **point)
        except ValueError as exc:
            raise InputError(f"sweep point {point}: {exc}") from None
        log.info("running %s", point or "base config")
        result = expt.run_experiment(cfg, args.workers)
        rows.extend(result_rows(point, result))
    columns = list(rows[0].keys())
    with open(args.out, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(columns)
        for row in rows:
            writer.writerow([_fmt(row[c]) for c in columns])
    return EXIT_OK


def cmd_spectrum(args) -> int:
    M = read_matrix(args.matrix, args.header, "matrix")
    for s in matlin.singular_values(M):
        print(format(float(s), ".17g"))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="smcomplete", description="Structured matrix completion."
    )
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def blocks_args(p):
        p.add_argument("--a11", required=True, help="observed top-left block (m1 x m2)")
        p.add_argument("--a12", required=True, help="observed top-right block (m1 x (p2-m2))")
        p.add_argument("--a21", required=True, help="observed bottom-left block ((p1-m1) x m2)")
        p.add_argument("--out", required=True, help="output CSV for the estimated A22")
        p.add_argument("--header", action="store_true", help="CSV files carry a header row")

    p = sub.add_parser("impute", help="recover A22 by structured matrix completion")
    blocks_args(p)
    p.add_argument("--mode", choices=["row", "col"], default="row")
    p.add_argument("--threshold", type=float, help="break threshold (default 2*sqrt(p/m))")
    p.add_argument("--rank", type=int, help="use the known-rank estimator with this rank")
    p.add_argument("--rcond", type=float, default=matlin.DEFAULT_RCOND)
    p.set_defaults(func=cmd_impute)

    p = sub.add_parser("nnm", help="penalized nuclear-norm baseline")
    blocks_args(p)
    p.add_argument("--t", type=float, help="penalty; cross-validated when omitted")
    p.add_argument("--K", type=int, default=5)
    p.add_argument("--N", type=int, default=10)
    p.add_argument("--H", type=int, default=5)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--tol", type=float, default=1e-5)
    p.add_argument("--max-iter", type=int, default=500)
    p.set_defaults(func=cmd_nnm)

    p = sub.add_parser(
        "simulate", help="run a simulation config",
        description=CONFIG_HELP, formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    p.add_argument("config")
    p.add_argument("--out", required=True)
    p.add_argument("--workers", type=int, default=None,
                   help=f"worker processes (default ${expt.WORKERS_ENV} or 1)")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("spectrum", help="print singular values of a CSV matrix")
    p.add_argument("matrix")
    p.add_argument("--header", action="store_true")
    p.set_defaults(func=cmd_spectrum)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        return args.func(args)
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except np.linalg.LinAlgError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
