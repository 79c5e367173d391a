"""Command-line entry point: ``featgrad {select,baseline,evaluate,synth,replay}``.

Exit codes: 0 success, 2 usage or configuration error, 3 data error,
4 numerical failure.
"""
import argparse
import hashlib
import json
import logging
import os
import sys


from featgrad import baselines, dataio, evaluation, optimizer, selection
from featgrad.estimator import BatchTooSmallError, EstimatorConfig
from featgrad.preprocess import DegenerateDataError, fit_stats

EXIT_USAGE = 2
EXIT_DATA = 3
EXIT_NUMERIC = 4

log = logging.getLogger("featgrad")


class UsageError(Exception):
    pass


def _floats(text):
    try:
        return [float(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _ints(text):
    try:
        return [int(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def load_dataset(path, label_column="0", d_hint=None):
    if not os.path.exists(path):
        raise FileNotFoundError(path)
    if path.endswith(".csv"):
        col = int(label_column) if label_column.lstrip("-").isdigit() else label_column
        return dataio.load_csv(path, col)
    return dataio.load_svmlight(path, d_hint)


def _write_config(out_dir, command, args, argv):
    resolved = {k: v for k, v in sorted(vars(args).items()) if k != "func"}
    blob = json.dumps(resolved, sort_keys=True)
    payload = {
        "command": command,
        "argv": list(argv),
        "resolved": resolved,
        "digest": hashlib.sha256(blob.encode()).hexdigest(),
    }
    with open(os.path.join(out_dir, "config.json"), "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


_OPTIMIZER_FLAGS = {
    "learning_rate": "--lr",
    "rel_tolerance": "--tol",
    "max_iterations": "--max-iters",
    "epochs": "--epochs",
    "mini_batch_size": "--batch-size",
    "accumulation_target": "--accumulate",
}


def _flag_message(message):
    for field_name, flag in _OPTIMIZER_FLAGS.items():
        if message.startswith(field_name):
            return flag + message[len(field_name):]
    return message


def cmd_select(args, argv):
    coeffs = args.coeffs
    if coeffs is not None and len(coeffs) != args.order:
        raise UsageError(f"--coeffs has {len(coeffs)} values but --order is {args.order}")
    try:
        est_cfg = EstimatorConfig(args.order, coeffs, args.denominator_policy)
    except ValueError as exc:
        raise UsageError(f"--order/--coeffs: {exc}") from None
    try:
        opt_cfg = optimizer.OptimizerConfig(
            learning_rate=args.lr,
            max_iterations=args.max_iters,
            rel_tolerance=args.tol,
            epochs=args.epochs,
            mini_batch_size=args.batch_size,
            accumulation_target=args.accumulate,
            seed=args.seed,
        )
    except ValueError as exc:
        raise UsageError(_flag_message(str(exc))) from None
    if args.batch_size is not None and args.batch_size < args.order + 1:
        raise UsageError(f"--batch-size {args.batch_size} must be at least --order + 1 = {args.order + 1}")
    if args.lambda_ is not None and args.lambda_grid is not None:
        raise UsageError("--lambda and --lambda-grid are mutually exclusive")
    if args.lambda_ is not None and args.lambda_ < 0:
        raise UsageError(f"--lambda must be nonnegative, got {args.lambda_}")
    if args.lambda_grid is not None and (not args.lambda_grid or min(args.lambda_grid) < 0):
        raise UsageError("--lambda-grid needs nonnegative values")

    data = load_dataset(args.data, args.label_column, args.d_hint)
    os.makedirs(args.out_dir, exist_ok=True)
    sizes = args.sizes or []

    history = []
    if args.lambda_grid is not None:
        if args.validation is not None:
            train = data
            valid = load_dataset(args.validation, args.label_column, data.n_features)
        else:
            train, valid = _holdout(data, args.validation_fraction, args.seed)
        stats = fit_stats(train, args.subsample_stats, args.seed)
        lam, searched = selection.grid_search_lambda(
            train, valid, args.lambda_grid, sizes or [10], est_cfg, opt_cfg, stats
        )
        history = searched.history
        log.info("selected lambda=%g", lam)
    else:
        train = data
        lam = 0.0 if args.lambda_ is None else args.lambda_
        stats = fit_stats(train, args.subsample_stats, args.seed)

    state = optimizer.fit(train, stats, est_cfg, opt_cfg, lam)
    result = selection.rank_features(state, sizes)
    result.history = history
    stats.save(os.path.join(args.out_dir, "stats.json"))
    state.write_trace(os.path.join(args.out_dir, "trace.csv"))
    state.save_checkpoint(os.path.join(args.out_dir, "checkpoint.npz"))
    result.save(os.path.join(args.out_dir, "selection.json"))
    result.write_subsets(os.path.join(args.out_dir, "subsets.txt"))
    _write_config(args.out_dir, "select", args, argv)
    print(
        f"selected with lambda={lam:g}: {state.step} steps ({state.stop_reason}); "
        f"top features {result.ranking[:10].tolist()}"
    )
    return 0


def _holdout(data, fraction, seed):
    if not 0 < fraction < 1:
        raise UsageError(f"--validation-fraction must be in (0, 1), got {fraction}")
    train, _, valid = dataio.split(data, dataio.SplitSpec(1.0 - fraction, 0.0, seed))
    return train, valid


def cmd_baseline(args, argv):
    data = load_dataset(args.data, args.label_column, args.d_hint)
    if args.method == "anova":
        scores = baselines.anova_f_scores(data)
    else:
        scores = baselines.mutual_info_scores(data, args.bins)
    result = selection.result_from_scores(scores, args.method, args.sizes or [])
    os.makedirs(args.out_dir, exist_ok=True)
    result.save(os.path.join(args.out_dir, "selection.json"))
    result.write_subsets(os.path.join(args.out_dir, "subsets.txt"))
    _write_config(args.out_dir, "baseline", args, argv)
    print(f"{args.method}: top features {result.ranking[:10].tolist()}")
    return 0


def cmd_evaluate(args, argv):
    ranked = selection.SelectionResult.load(args.ranking)
    train = load_dataset(args.train, args.label_column, ranked.n_features)
    test = load_dataset(args.test, args.label_column, train.n_features)
    if test.n_features != train.n_features:
        raise UsageError(f"train has {train.n_features} features but test has {test.n_features}")
    for m in args.sizes:
        if m > train.n_features or m < 1:
            raise UsageError(f"--sizes entry {m} outside [1, {train.n_features}]")
    cfg = evaluation.LogRegConfig(
        mode=args.mode, epochs=args.epochs, lr=args.logreg_lr, l2=args.l2, seed=args.seed
    )
    report = evaluation.evaluate_selector(ranked.ranking, args.sizes, train, test, cfg, ranked.selector)
    report.write_csv(args.out)
    for sel, m, a, _ in report.rows():
        print(f"{sel}\t{m}\t{a:.6f}")
    if args.compare:
        other = selection.SelectionResult.load(args.compare)
        rep_b = evaluation.evaluate_selector(other.ranking, args.sizes, train, test, cfg, other.selector)
        if args.compare_out:
            rep_b.write_csv(args.compare_out)
        res = evaluation.paired_ttest(report.aucs, rep_b.aucs)
        flag = " (degenerate)" if res.degenerate else ""
        print(
            f"paired t-test {report.selector} vs {rep_b.selector}: "
            f"t={res.statistic:.6g} p={res.pvalue:.6g}{flag}"
        )
    return 0


def cmd_synth(args, argv):
    try:
        spec = dataio.SynthSpec(args.n, args.d, args.support, args.noise, args.corr, args.seed)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    ds, support = dataio.generate_synthetic(spec)
    os.makedirs(args.out_dir, exist_ok=True)
    if args.format == "csv":
        dataio.write_csv(ds, os.path.join(args.out_dir, "data.csv"))
    else:
        dataio.write_svmlight(ds, os.path.join(args.out_dir, "data.svm"))
    with open(os.path.join(args.out_dir, "support.txt"), "w") as fh:
        fh.write("\n".join(str(i) for i in support.tolist()) + ("\n" if support.size else ""))
    _write_config(args.out_dir, "synth", args, argv)
    print(f"wrote {ds.n_rows} x {ds.n_features} dataset with support {support.tolist()}")
    return 0


def cmd_split(args, argv):
    data = load_dataset(args.data, args.label_column, args.d_hint)
    try:
        spec = dataio.SplitSpec(args.train_fraction, args.validation_fraction, args.seed)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    parts = dataio.split(data, spec)
    os.makedirs(args.out_dir, exist_ok=True)
    for label, part in zip(("train", "validation", "test"), parts):
        if part.n_rows:
            dataio.write_svmlight(part, os.path.join(args.out_dir, f"{label}.svm"))
    _write_config(args.out_dir, "split", args, argv)
    print("split " + ", ".join(f"{p.n_rows} {label}" for label, p in zip(("train", "validation", "test"), parts)))
    return 0


def cmd_replay(args, argv):
    with open(args.config) as fh:
        payload = json.load(fh)
    return main(payload["argv"])


def build_parser():
    p = argparse.ArgumentParser(prog="featgrad", description="Feature Gradients feature selection")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def data_args(sp):
        sp.add_argument("data", help="svmlight file, or .csv with a header row")
        sp.add_argument("--label-column", default="0", help="CSV label column (position or name)")
        sp.add_argument("--d-hint", type=int, default=None, help="minimum feature count for svmlight")

    s = sub.add_parser("select", help="run Feature Gradients and write a ranking")
    data_args(s)
    s.add_argument("--order", type=int, default=6)
    s.add_argument("--coeffs", type=_floats, default=None, help="comma-separated a_0..a_{k-1}")
    s.add_argument("--denominator-policy", default="exact-binomial-log",
                   choices=["exact-binomial-log", "capped"])
    s.add_argument("--lambda", dest="lambda_", type=float, default=None)
    s.add_argument("--lambda-grid", type=_floats, default=None)
    s.add_argument("--validation", default=None, help="validation file for --lambda-grid")
    s.add_argument("--validation-fraction", type=float, default=0.2)
    s.add_argument("--sizes", type=_ints, default=None, help="subset sizes to report")
    s.add_argument("--batch-size", type=int, default=None)
    s.add_argument("--accumulate", type=int, default=1000)
    s.add_argument("--epochs", type=int, default=None)
    s.add_argument("--max-iters", type=int, default=1000)
    s.add_argument("--tol", type=float, default=1e-5)
    s.add_argument("--lr", type=float, default=0.1)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--subsample-stats", type=int, default=None)
    s.add_argument("--out-dir", required=True)
    s.set_defaults(func=cmd_select)

    b = sub.add_parser("baseline", help="rank features with a filter criterion")
    data_args(b)
    b.add_argument("--method", choices=["anova", "mi"], required=True)
    b.add_argument("--bins", type=int, default=16)
    b.add_argument("--sizes", type=_ints, default=None)
    b.add_argument("--out-dir", required=True)
    b.set_defaults(func=cmd_baseline)

    e = sub.add_parser("evaluate", help="test AUC of logistic models on ranked subsets")
    e.add_argument("--ranking", required=True)
    e.add_argument("--train", required=True)
    e.add_argument("--test", required=True)
    e.add_argument("--sizes", type=_ints, required=True)
    e.add_argument("--label-column", default="0")
    e.add_argument("--compare", default=None, help="second ranking for a paired t-test")
    e.add_argument("--compare-out", default=None)
    e.add_argument("--mode", choices=["batch", "sgd"], default="batch")
    e.add_argument("--epochs", type=int, default=5)
    e.add_argument("--logreg-lr", type=float, default=None)
    e.add_argument("--l2", type=float, default=1e-6)
    e.add_argument("--seed", type=int, default=0)
    e.add_argument("--out", required=True)
    e.set_defaults(func=cmd_evaluate)

    y = sub.add_parser("synth", help="generate a synthetic dataset with known support")
    y.add_argument("--n", type=int, required=True)
    y.add_argument("--d", type=int, required=True)
    y.add_argument("--support", type=int, required=True)
    y.add_argument("--noise", type=float, default=1.0)
    y.add_argument("--corr", type=float, default=0.0)
    y.add_argument("--seed", type=int, default=0)
    y.add_argument("--format", choices=["svmlight", "csv"], default="svmlight")
    y.add_argument("--out-dir", required=True)
    y.set_defaults(func=cmd_synth)

    t = sub.add_parser("split", help="stratified train/validation/test split into svmlight files")
    data_args(t)
    t.add_argument("--train-fraction", type=float, default=0.8)
    t.add_argument("--validation-fraction", type=float, default=0.0)
    t.add_argument("--seed", type=int, default=0)
    t.add_argument("--out-dir", required=True)
    t.set_defaults(func=cmd_split)

    r = sub.add_parser("replay", help="re-run a command from its config.json")
    r.add_argument("config")
    r.set_defaults(func=cmd_replay)
    return p


def main(argv=None):
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else 0
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args, argv)
    except UsageError as exc:
        print(f"featgrad: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except BatchTooSmallError as exc:
        print(f"featgrad: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (FileNotFoundError, dataio.DataFormatError, DegenerateDataError) as exc:
        print(f"featgrad: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (ArithmeticError, selection.SelectionError) as exc:
        print(f"featgrad: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except ValueError as exc:
        print(f"featgrad: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
