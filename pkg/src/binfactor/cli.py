"""Command-line interface: fit, score, simulate, selfcheck.

Exit codes: 0 on success, 1 on a runtime failure, 2 on invalid input or
flags.  Every command is deterministic given its flags and seed; simulate
output is byte-identical across runs and across ``--threads`` settings.
"""

from __future__ import annotations

import argparse
import os
import sys

from . import model_io
from .moments import BinaryMatrix
from .scores import ScoreConfig, estimate_scores
from .selfcheck import format_report, run_selfcheck
from .simulate import SimScenario, run_replications
from .spectral import fit_model

EXIT_OK = 0
EXIT_RUNTIME = 1
EXIT_USAGE = 2


class _UsageError(Exception):
    pass


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # argparse exits 2 on bad flags and 0 on --help; pass that through.
        return int(exc.code or 0)
    try:
        return args.func(args)
    except _UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (model_io.DataFormatError, model_io.ModelFormatError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except Exception as exc:  # noqa: BLE001 - CLI boundary
        print(f"runtime failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="binfactor",
        description="Latent factor models for high-dimensional binary data.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    fit = sub.add_parser("fit", help="fit a factor model to a binary CSV")
    fit.add_argument("--data", required=True, help="input CSV of 0/1 entries")
    fit.add_argument("--d", required=True, type=int, help="number of latent factors")
    fit.add_argument("--out", required=True, help="output model file")
    fit.add_argument("--tau-floor", type=float, default=1e-10,
                     help="lower floor for noise variances (default 1e-10)")
    fit.set_defaults(func=_cmd_fit)

    score = sub.add_parser("score", help="estimate latent factors for each sample")
    score.add_argument("--data", required=True, help="input CSV of 0/1 entries")
    score.add_argument("--model", required=True, help="fitted model file")
    score.add_argument("--out", required=True, help="output scores CSV")
    score.add_argument("--m", type=float, default=90.0,
                       help="percent of components included in the likelihood (default 90)")
    score.add_argument("--grad-tol", type=float, default=1e-8,
                       help="gradient-norm stopping tolerance (default 1e-8)")
    score.add_argument("--max-iter", type=int, default=100,
                       help="iteration cap per sample (default 100)")
    score.set_defaults(func=_cmd_score)

    sim = sub.add_parser("simulate", help="run the Monte Carlo study")
    sim.add_argument("--p", type=_int_list, default=None,
                     help="feature dimensions, comma separated (default 20,50)")
    sim.add_argument("--n", type=_int_list, default=None,
                     help="sample sizes, comma separated (default 1000,2000,4000)")
    sim.add_argument("--d", type=int, default=2, help="factor dimension (default 2)")
    sim.add_argument("--reps", type=int, default=50, help="replications per scenario")
    sim.add_argument("--seed", type=int, default=0, help="base RNG seed")
    sim.add_argument("--out", required=True, help="output metrics CSV")
    sim.add_argument("--grid", choices=["desk", "full"], default=None,
                     help="preset (p, n) grid; overrides --p/--n")
    sim.add_argument("--m", type=float, default=90.0,
                     help="scoring inclusion percentage (default 90)")
    sim.add_argument("--grad-tol", type=float, default=1e-8)
    sim.add_argument("--threads", type=int, default=os.cpu_count() or 1,
                     help="replication-level parallelism (results are identical)")
    sim.add_argument("--no-row-normalize", action="store_true",
                     help="use the raw generator recipe without unit-variance rescaling")
    sim.add_argument("--timings", action="store_true",
                     help="include wall-clock stage times in the CSV (not byte-reproducible)")
    sim.set_defaults(func=_cmd_simulate)

    check = sub.add_parser("selfcheck", help="run the numerical verification battery")
    check.add_argument("--tolerance-scale", type=float, default=1.0,
                       help="rescale check tolerances (diagnostic hook)")
    check.set_defaults(func=_cmd_selfcheck)
    return parser


def _int_list(text: str) -> list[int]:
    try:
        return [int(tok) for tok in text.split(",") if tok]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers: {text!r}") from exc


def _cmd_fit(args) -> int:
    y = _read_data(args.data)
    if not 1 <= args.d <= y.p:
        raise _UsageError(f"--d must be between 1 and p={y.p}, got {args.d}")
    model = fit_model(y, args.d, tau2_floor=args.tau_floor)
    model_io.write_model(model, args.out)
    eig = ", ".join(f"{v:.6g}" for v in model.eigvals)
    print(f"fitted model: p={model.p} n={y.n} d={model.d}")
    print(f"leading eigenvalues: {eig}")
    print(
        f"clamped marginals: {model.meta['marginal_clamps']}, "
        f"clamped pairs: {model.meta['pair_clamps']}, "
        f"floored noise variances: {model.meta['tau2_floored']}"
    )
    print(f"model written to {args.out}")
    return EXIT_OK


def _cmd_score(args) -> int:
    y = _read_data(args.data)
    model = model_io.read_model(args.model)
    if model.p != y.p:
        raise _UsageError(f"model expects p={model.p} features, data has p={y.p}")
    try:
        cfg = ScoreConfig(m_percent=args.m, grad_tol=args.grad_tol, max_iter=args.max_iter)
    except ValueError as exc:
        raise _UsageError(str(exc)) from exc
    scores = estimate_scores(y, model, cfg)
    model_io.write_scores(scores, args.out)
    n_conv = int(scores.converged.sum())
    print(f"scored {scores.n} samples (d={model.d}); converged: {n_conv}/{scores.n}")
    print(f"scores written to {args.out}")
    return EXIT_OK


def _cmd_simulate(args) -> int:
    if args.reps < 1:
        raise _UsageError(f"--reps must be at least 1, got {args.reps}")
    if args.threads < 1:
        raise _UsageError(f"--threads must be at least 1, got {args.threads}")
    if args.grid == "full":
        ps = [50, 80, 100]
        ns = [4000 + 2000 * r for r in range(6)]
    elif args.grid == "desk":
        ps, ns = [20, 50], [1000, 2000, 4000]
    else:
        ps = args.p if args.p is not None else [20, 50]
        ns = args.n if args.n is not None else [1000, 2000, 4000]
    if not ps or not ns:
        raise _UsageError("--p and --n must be non-empty")
    try:
        scenarios = [
            SimScenario(
                d=args.d, p=p, n=n, reps=args.reps, seed=args.seed,
                normalize_rows=not args.no_row_normalize,
            )
            for p in ps
            for n in ns
        ]
        cfg = ScoreConfig(m_percent=args.m, grad_tol=args.grad_tol)
    except ValueError as exc:
        raise _UsageError(str(exc)) from exc

    records = []
    try:
        for scn in scenarios:
            print(f"running {scn.label} ({scn.reps} replications)", file=sys.stderr)
            run_replications(
                scn,
                score_config=cfg,
                threads=args.threads,
                on_record=records.append,
            )
            model_io.write_metrics(records, args.out, include_timings=args.timings)
    except Exception:
        # Keep whatever completed before the failure.
        if records:
            model_io.write_metrics(records, args.out, include_timings=args.timings)
        raise
    failures = sum(1 for r in records if r.error)
    print(f"wrote {len(records)} metric rows to {args.out} ({failures} failed replications)")
    return EXIT_OK


def _cmd_selfcheck(args) -> int:
    results = run_selfcheck(tolerance_scale=args.tolerance_scale)
    print(format_report(results))
    return EXIT_OK if all(r.passed for r in results) else EXIT_RUNTIME


def _read_data(path) -> BinaryMatrix:
    if not os.path.exists(path):
        raise _UsageError(f"data file not found: {path}")
    return model_io.read_binary_matrix(path)


if __name__ == "__main__":
    sys.exit(main())
