"""Command-line workflows: train, predict, pd, varimp, cv, bench, simulate.

Every run is reproducible: all configuration is explicit flags (environment
variables are never consulted), outputs are tab-separated with headers, and
commands that write files also write a ``<output>.manifest.json`` recording
the library version and the exact argument vector, so re-invoking the CLI
with the manifest's ``argv`` reproduces the outputs byte for byte.
"""

from __future__ import annotations

import argparse
import json
import sys
import time

import numpy as np

from . import __version__
from .data import generate_friedman, load_csv, load_prediction_matrix, make_dataset
from .errors import (
    BartError,
    DataError,
    DegenerateLabelsError,
    DegenerateResponseError,
    InvalidTreeError,
    ModelParseError,
    ModelVersionError,
    SchemaError,
    StructuralEditError,
)
from .mcmc import ChainConfig, run_chain
from .posterior import default_pd_grid, partial_dependence, predict, variable_inclusion
from .priors import calibrate_prior
from .probit import run_probit_chain
from .serialize import load_model, save_model

_ERROR_CODES = (
    (SchemaError, "schema"),
    (ModelVersionError, "model-version"),
    (ModelParseError, "model-parse"),
    (DegenerateResponseError, "degenerate-response"),
    (DegenerateLabelsError, "degenerate-labels"),
    (DataError, "data"),
    (InvalidTreeError, "invalid-tree"),
    (StructuralEditError, "tree-edit"),
    (BartError, "error"),
)


def _fmt(x) -> str:
    if isinstance(x, (float, np.floating)):
        return format(float(x), ".17g")
    return str(x)


def _write_table(path, header, rows):
    fh = open(path, "w", encoding="utf-8", newline="\n") if path else sys.stdout
    try:
        fh.write("\t".join(header) + "\n")
        for row in rows:
            fh.write("\t".join(_fmt(cell) for cell in row) + "\n")
    finally:
        if path:
            fh.close()


def _write_manifest(output_path, command, argv, **extra):
    payload = {
        "library_version": __version__,
        "command": command,
        "argv": list(argv),
    }
    payload.update(extra)
    path = str(output_path) + ".manifest.json"
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return path


def _open_progress(arg):
    if arg is None:
        return None, None
    stream = sys.stderr if arg == "-" else open(arg, "w", encoding="utf-8", newline="\n")

    def write(record):
        stream.write(json.dumps(record) + "\n")

    return write, (None if stream is sys.stderr else stream)


def _chain_config(args) -> ChainConfig:
    return ChainConfig(
        burn_in=args.burn_in,
        keep=args.keep,
        thin=args.thin,
        seed=args.seed,
        chain_index=getattr(args, "chain_index", 0),
    )


def _add_chain_flags(p, burn_in=200, keep=1000):
    p.add_argument("--burn-in", type=int, default=burn_in, help="sweeps discarded before keeping draws")
    p.add_argument("--keep", type=int, default=keep, help="number of kept posterior draws")
    p.add_argument("--thin", type=int, default=1, help="keep every thin-th post-burn-in sweep")
    p.add_argument("--seed", type=int, default=0, help="chain seed (runs are deterministic given it)")


def _add_prior_flags(p):
    p.add_argument("--m", type=int, default=200, help="number of trees")
    p.add_argument("--k", type=float, default=2.0, help="leaf shrinkage: prior sd is 0.5/(k sqrt(m))")
    p.add_argument("--nu", type=float, default=3.0, help="noise prior degrees of freedom")
    p.add_argument("--q", type=float, default=0.90, help="prior quantile placed at the sigma estimate")
    p.add_argument("--alpha", type=float, default=0.95, help="depth prior base split probability")
    p.add_argument("--beta", type=float, default=2.0, help="depth prior decay exponent")
    p.add_argument(
        "--sigma-est",
        choices=("linear", "naive"),
        default="linear",
        help="sigma overestimate: least-squares residual sd, or sample sd of the response",
    )
    p.add_argument("--min-leaf", type=int, default=1, help="minimum training rows per leaf")
    p.add_argument("--max-cutpoints", type=int, default=100, help="cutpoint grid cap per variable")


def _add_data_flags(p):
    p.add_argument("--data", required=True, help="CSV file with a header row")
    p.add_argument("--response", required=True, help="name of the response column")
    p.add_argument(
        "--transform-response",
        choices=("log", "sqrt"),
        default=None,
        help="transform the raw response before fitting (regression only)",
    )


def cmd_train(args, argv):
    mode = "probit" if args.probit else "regression"
    data = load_csv(
        args.data,
        args.response,
        mode,
        max_cutpoints=args.max_cutpoints,
        response_transform=args.transform_response,
    )
    spec = calibrate_prior(
        data,
        alpha=args.alpha,
        beta=args.beta,
        k=args.k,
        num_trees=args.m,
        nu=args.nu,
        q=args.q,
        sigma_hat_mode=args.sigma_est,
        min_leaf=args.min_leaf,
    )
    config = _chain_config(args)
    progress, closer = _open_progress(args.progress)
    try:
        if args.probit:
            offset_rate = float(np.mean(data.y)) if args.offset_base_rate else args.offset_rate
            draws = run_probit_chain(data, spec, config, offset_rate=offset_rate, progress=progress)
        else:
            draws = run_chain(data, spec, config, progress=progress)
    finally:
        if closer is not None:
            closer.close()
    save_model(draws, args.model)
    _write_manifest(
        args.model,
        "train",
        argv,
        mode=mode,
        data=args.data,
        response=args.response,
        model=args.model,
        prior={
            "alpha": spec.alpha,
            "beta": spec.beta,
            "k": spec.k,
            "num_trees": spec.num_trees,
            "nu": spec.nu,
            "q": spec.q,
            "sigma_mu": spec.sigma_mu,
            "lam": spec.lam,
            "sigma_hat": spec.sigma_hat,
            "sigma_hat_mode": spec.sigma_hat_mode,
            "min_leaf": spec.min_leaf,
        },
        chain={"burn_in": config.burn_in, "keep": config.keep, "thin": config.thin, "seed": config.seed},
    )
    print(f"wrote {args.model}", file=sys.stderr)
    return 0


def cmd_predict(args, argv):
    draws = load_model(args.model)
    x = load_prediction_matrix(args.data, draws.columns, draws.response_name)
    if args.interval is not None:
        mean, lo, hi = predict(draws, x, interval_alpha=args.interval)
        header = ("row", "estimate", "lower", "upper")
        rows = ((i, mean[i], lo[i], hi[i]) for i in range(len(mean)))
    else:
        mean = predict(draws, x)
        header = ("row", "estimate")
        rows = ((i, mean[i]) for i in range(len(mean)))
    _write_table(args.out, header, rows)
    if args.out:
        _write_manifest(args.out, "predict", argv, model=args.model, data=args.data)
    return 0


def cmd_pd(args, argv):
    draws = load_model(args.model)
    names = [c.name for c in draws.columns]
    wanted = [v.strip() for v in args.vars.split(",") if v.strip()]
    unknown = [v for v in wanted if v not in names]
    if unknown:
        raise SchemaError(f"unknown variable name(s): {', '.join(unknown)}")
    x = load_prediction_matrix(args.data, draws.columns, draws.response_name)
    out_rows = []
    for name in wanted:
        idx = names.index(name)
        grid = default_pd_grid(x, idx, args.grid)
        grid, mean, lo, hi = partial_dependence(draws, x, [idx], grid, alpha=args.interval)
        for g, m_, l_, h_ in zip(grid, mean, lo, hi):
            out_rows.append((name, g, m_, l_, h_))
    _write_table(args.out, ("variable", "value", "mean", "lower", "upper"), out_rows)
    if args.out:
        _write_manifest(args.out, "pd", argv, model=args.model, data=args.data, vars=wanted)
    return 0


def cmd_varimp(args, argv):
    draws = load_model(args.model)
    inclusion = variable_inclusion(draws)
    order = np.lexsort((np.arange(len(inclusion)), -inclusion))
    rows = [(draws.columns[i].name, inclusion[i]) for i in order]
    _write_table(args.out, ("variable", "inclusion"), rows)
    if args.out:
        _write_manifest(args.out, "varimp", argv, model=args.model)
    return 0


def _parse_sigma_grid(text):
    out = []
    for part in text.split(","):
        nu, _, q = part.partition(":")
        out.append((float(nu), float(q)))
    return out


def cmd_cv(args, argv):
    data = load_csv(
        args.data, args.response, "regression", max_cutpoints=args.max_cutpoints
    )
    n = data.n
    if n < args.folds:
        raise BartError(f"{args.folds}-fold split needs at least {args.folds} rows, got {n}")
    sigma_grid = _parse_sigma_grid(args.sigma_grid)
    k_grid = [float(v) for v in args.k_grid.split(",")]
    m_grid = [int(v) for v in args.m_grid.split(",")]
    settings = [
        (si, nu, q, k, m)
        for si, (nu, q) in enumerate(sigma_grid)
        for k in k_grid
        for m in m_grid
    ]

    fold_rng = np.random.default_rng(np.random.SeedSequence(entropy=args.seed, spawn_key=(0xCF,)))
    perm = fold_rng.permutation(n)
    fold_sets = np.array_split(perm, args.folds)

    results = []
    trainings = 0
    for run_idx, (si, nu, q, k, m) in enumerate(settings):
        fold_errors = []
        for fi, test_rows in enumerate(fold_sets):
            train_rows = np.concatenate([f for g, f in enumerate(fold_sets) if g != fi])
            try:
                dtrain = make_dataset(
                    data.x[train_rows],
                    data.y_raw[train_rows],
                    max_cutpoints=args.max_cutpoints,
                    columns=data.columns,
                    response_name=data.response_name,
                )
            except DegenerateResponseError:
                print(f"bart: cv: fold {fi} skipped (constant response)", file=sys.stderr)
                continue
            spec = calibrate_prior(
                dtrain,
                alpha=args.alpha,
                beta=args.beta,
                k=k,
                num_trees=m,
                nu=nu,
                q=q,
                sigma_hat_mode=args.sigma_est,
                min_leaf=args.min_leaf,
            )
            config = ChainConfig(
                burn_in=args.burn_in,
                keep=args.keep,
                thin=args.thin,
                seed=args.seed,
                chain_index=1 + run_idx * args.folds + fi,
            )
            draws = run_chain(dtrain, spec, config)
            trainings += 1
            pred = predict(draws, data.x[test_rows])
            err = pred - data.y_raw[test_rows]
            fold_errors.append(float(np.sqrt(np.mean(err * err))))
        if fold_errors:
            results.append(((si, nu, q, k, m), float(np.mean(fold_errors)), len(fold_errors)))

    if not results:
        raise BartError("no cross-validation setting could be evaluated")
    # ties broken by smaller m, then smaller k, then earlier (nu, q) in the grid
    best_setting, best_rmse, _ = min(results, key=lambda r: (r[1], r[0][4], r[0][3], r[0][0]))
    _, best_nu, best_q, best_k, best_m = best_setting

    final_spec = calibrate_prior(
        data,
        alpha=args.alpha,
        beta=args.beta,
        k=best_k,
        num_trees=best_m,
        nu=best_nu,
        q=best_q,
        sigma_hat_mode=args.sigma_est,
        min_leaf=args.min_leaf,
    )
    final_config = ChainConfig(
        burn_in=args.burn_in, keep=args.keep, thin=args.thin, seed=args.seed, chain_index=0
    )
    final_draws = run_chain(data, final_spec, final_config)
    trainings += 1
    save_model(final_draws, args.model)

    table_rows = [
        (nu, q, k, m, rmse, folds_used, int((si, nu, q, k, m) == best_setting))
        for (si, nu, q, k, m), rmse, folds_used in results
    ]
    _write_table(args.out, ("nu", "q", "k", "m", "rmse", "folds", "selected"), table_rows)
    _write_manifest(
        args.model,
        "cv",
        argv,
        data=args.data,
        response=args.response,
        model=args.model,
        trainings=trainings,
        settings_evaluated=len(results),
        best={"nu": best_nu, "q": best_q, "k": best_k, "m": best_m, "rmse": best_rmse},
    )
    print(
        f"best setting: nu={best_nu} q={best_q} k={best_k} m={best_m} (rmse {best_rmse:.6g}); "
        f"{trainings} trainings",
        file=sys.stderr,
    )
    return 0


def bench_scaling(sizes, p=50, num_trees=200, sweeps=2, seed=0):
    """Time short chains over increasing n; returns ((n, seconds) list, linear-fit R^2)."""
    results = []
    for n in sizes:
        data, _ = generate_friedman(np.random.default_rng(seed), int(n), p, 1.0)
        spec = calibrate_prior(data, num_trees=num_trees, sigma_hat_mode="linear")
        config = ChainConfig(burn_in=0, keep=sweeps, thin=1, seed=seed)
        start = time.perf_counter()
        run_chain(data, spec, config)
        results.append((int(n), time.perf_counter() - start))
    return results, _linear_fit_r2(results)


def _linear_fit_r2(pairs):
    ns = np.array([n for n, _ in pairs], dtype=float)
    ts = np.array([t for _, t in pairs], dtype=float)
    if len(ns) < 3 or np.ptp(ts) == 0.0:
        return float("nan")
    coef = np.polyfit(ns, ts, 1)
    resid = ts - np.polyval(coef, ns)
    ss_tot = float(np.sum((ts - ts.mean()) ** 2))
    return 1.0 - float(np.sum(resid**2)) / ss_tot


def cmd_bench(args, argv):
    sizes = [int(v) for v in args.sizes.split(",")]
    results, r2 = bench_scaling(sizes, p=args.p, num_trees=args.m, sweeps=args.sweeps, seed=args.seed)
    _write_table(args.out, ("n", "seconds"), results)
    print(f"execution time vs n: linear fit R^2 = {r2:.4f}", file=sys.stderr)
    if args.out:
        _write_manifest(args.out, "bench", argv, results=results, r_squared=r2)
    return 0


def cmd_simulate(args, argv):
    data, truth = generate_friedman(np.random.default_rng(args.seed), args.n, args.p, args.sigma)
    header = [c.name for c in data.columns] + [data.response_name]
    with open(args.out, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(",".join(header) + "\n")
        for i in range(data.n):
            cells = [_fmt(v) for v in data.x[i]] + [_fmt(data.y_raw[i])]
            fh.write(",".join(cells) + "\n")
    if args.truth:
        with open(args.truth, "w", encoding="utf-8", newline="\n") as fh:
            fh.write("f\n")
            for v in truth:
                fh.write(_fmt(v) + "\n")
    _write_manifest(args.out, "simulate", argv, n=args.n, p=args.p, sigma=args.sigma, seed=args.seed)
    print(f"wrote {args.out}", file=sys.stderr)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="bart",
        description="Regularized sum-of-trees regression and classification by backfitting MCMC.",
    )
    parser.add_argument("--version", action="version", version=f"bart {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="fit a model to a CSV and write a model file")
    _add_data_flags(p)
    p.add_argument("--model", required=True, help="output model file")
    p.add_argument("--probit", action="store_true", help="binary classification via the probit link")
    p.add_argument(
        "--offset-rate",
        type=float,
        default=0.5,
        help="probit: probability the prior shrinks predictions toward",
    )
    p.add_argument(
        "--offset-base-rate",
        action="store_true",
        help="probit: shrink toward the sample base rate instead",
    )
    _add_prior_flags(p)
    _add_chain_flags(p)
    p.add_argument("--chain-index", type=int, default=0, help="substream index for multi-chain runs")
    p.add_argument("--progress", default=None, help="write JSON progress records here ('-' = stderr)")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("predict", help="posterior mean (and interval) predictions for a CSV")
    p.add_argument("--model", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--out", default=None, help="output TSV (default: stdout)")
    p.add_argument("--interval", type=float, default=None, metavar="ALPHA",
                   help="also emit the alpha/2 and 1-alpha/2 quantile columns")
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("pd", help="partial dependence curves for chosen variables")
    p.add_argument("--model", required=True)
    p.add_argument("--data", required=True, help="training CSV supplying the complement rows")
    p.add_argument("--vars", required=True, help="comma-separated variable names")
    p.add_argument("--grid", type=int, default=20, help="grid points per variable")
    p.add_argument("--interval", type=float, default=0.10)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_pd)

    p = sub.add_parser("varimp", help="variable inclusion frequencies, sorted descending")
    p.add_argument("--model", required=True)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_varimp)

    p = sub.add_parser("cv", help="choose hyperparameters by k-fold cross-validation")
    _add_data_flags(p)
    p.add_argument("--model", required=True, help="output model file for the selected setting")
    p.add_argument("--out", default=None, help="per-setting RMSE table (default: stdout)")
    p.add_argument("--folds", type=int, default=5)
    p.add_argument("--sigma-grid", default="3:0.90,3:0.99,10:0.75",
                   help="comma-separated nu:q pairs for the sigma prior")
    p.add_argument("--k-grid", default="1,2,3,5")
    p.add_argument("--m-grid", default="50,200")
    p.add_argument("--alpha", type=float, default=0.95)
    p.add_argument("--beta", type=float, default=2.0)
    p.add_argument("--sigma-est", choices=("linear", "naive"), default="linear")
    p.add_argument("--min-leaf", type=int, default=1)
    p.add_argument("--max-cutpoints", type=int, default=100)
    _add_chain_flags(p)
    p.set_defaults(func=cmd_cv)

    p = sub.add_parser("bench", help="time short chains over increasing n (scaling self-test)")
    p.add_argument("--sizes", default="100,500,1000,2500,5000")
    p.add_argument("--p", type=int, default=50)
    p.add_argument("--m", type=int, default=200)
    p.add_argument("--sweeps", type=int, default=2)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("simulate", help="emit a simulated benchmark dataset as CSV")
    p.add_argument("--n", type=int, default=100)
    p.add_argument("--p", type=int, default=10)
    p.add_argument("--sigma", type=float, default=1.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.add_argument("--truth", default=None, help="also write the noiseless surface values here")
    p.set_defaults(func=cmd_simulate)

    return parser


def main(argv=None) -> int:
    if argv is None:
        argv = sys.argv[1:]
    argv = list(argv)
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args, argv)
    except BartError as exc:
        for cls, code in _ERROR_CODES:
            if isinstance(exc, cls):
                print(f"bart: {code}: {exc}", file=sys.stderr)
                break
        return 1
    except OSError as exc:
        print(f"bart: io: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
