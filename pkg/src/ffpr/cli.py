"""
Batch pipeline front-end::

    ffpr gen        simulate crystals and their measurements
    ffpr break      canonicalize a dataset (symmetry breaking)
    ffpr solve      HIO+ER+Shrinkwrap reconstructions
    ffpr eval       MSE / PA-MSE / SA-MSE table
    ffpr report     summary CSV plus figures
    ffpr sqrt-demo  square-root learning experiment
    ffpr export     one channel of one record as a 16-bit PGM
    ffpr export-npz whole container as a numpy .npz archive

Every subcommand accepts ``--config FILE`` (``key = value`` lines, keys in
kebab-case as the flags); explicit flags override the file. Logs go to
stderr, data to files, and each run writes a ``.manifest`` file next to
its primary output. Exit codes: 0 success, 1 runtime failure, 2 usage.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from fractions import Fraction
from pathlib import Path

import numpy as np

from . import __version__, canonicalize, core, datastore, metrics, simulator, solvers, sqrt_demo

logger = logging.getLogger("ffpr")


class UsageError(Exception):
    pass


def _positive_int(text):
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text}")
    return v


def _nonneg_int(text):
    v = int(text)
    if v < 0:
        raise argparse.ArgumentTypeError(f"expected a nonnegative integer, got {text}")
    return v


def _oversample(text):
    try:
        v = Fraction(text)
    except (ValueError, ZeroDivisionError) as exc:
        raise argparse.ArgumentTypeError(str(exc))
    if v <= 1:
        raise argparse.ArgumentTypeError("oversample must exceed 1")
    return v


def _schedule(text):
    out = []
    for part in text.split(","):
        phase, _, n = part.strip().partition(":")
        phase = phase.strip().upper()
        if phase not in ("ER", "HIO") or not n.strip().isdigit() or int(n) < 1:
            raise argparse.ArgumentTypeError(f"bad schedule entry {part!r} (want e.g. HIO:90)")
        out.append((phase, int(n)))
    if not out:
        raise argparse.ArgumentTypeError("empty schedule")
    return out


def _format_schedule(schedule):
    return ",".join(f"{p}:{n}" for p, n in schedule)


def _bool(text):
    t = str(text).strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise argparse.ArgumentTypeError(f"expected a boolean, got {text!r}")


def _threads_default():
    return os.cpu_count() or 1


def _map(fn, items, threads):
    """Order-preserving map, threaded when ``threads > 1``."""
    if threads > 1 and len(items) > 1:
        with ThreadPoolExecutor(threads) as pool:
            return list(pool.map(fn, items))
    return [fn(i) for i in items]


def _manifest(path, args, started, **extra):
    items = {"subcommand": args.command, "version": __version__}
    for k, v in sorted(vars(args).items()):
        if k in ("command", "func", "config"):
            continue
        if k == "schedule" and v is not None:
            v = _format_schedule(v)
        items[k.replace("_", "-")] = v
    if getattr(args, "config", None):
        items["config-file"] = args.config
    items.update(extra)
    items["wall-clock-seconds"] = f"{time.perf_counter() - started:.3f}"
    datastore.write_manifest(path, items)


def _oversample_of(header, fallback=2):
    if header.has_measurements and header.n1:
        return Fraction(header.m1, header.n1)
    return Fraction(fallback)


# -- subcommands ---------------------------------------------------------------


def cmd_gen(args):
    spec = simulator.DatasetSpec(
        count=args.count,
        frame_size=args.size,
        oversample=args.oversample,
        seed=args.seed,
        defect_count_range=(args.defects_min, args.defects_max),
    )
    records = simulator.generate_dataset(spec)
    datastore.write_container(args.out, records)
    logger.info("wrote %d records to %s", len(records), args.out)
    return 0


def cmd_break(args):
    header, records = datastore.read_container(args.input)
    oversample = args.oversample if args.oversample is not None else _oversample_of(header)
    images = [x for x, _ in records]

    def one(j):
        try:
            xb = canonicalize.break_symmetry(
                images[j], oversample, center=args.center, center_method=args.center_method, index=j
            )
        except ValueError as exc:
            return j, None, exc
        return j, (xb, core.forward_measure(xb, oversample)), None

    results = _map(one, list(range(len(images))), args.threads)
    failed = [j for j, _, err in results if err is not None]
    for j, _, err in results:
        if err is not None:
            logger.error("record %d: %s", j, err)
    kept = [pair for _, pair, err in results if err is None]
    datastore.write_container(args.output, kept, flags=header.flags | datastore.FLAG_BROKEN, shape=(header.n1, header.n2))
    logger.info("canonicalized %d of %d records", len(kept), len(images))
    args._extra = {"failed-indices": ",".join(map(str, failed)) or "none", "oversample-used": oversample}
    return 1 if failed else 0


def _solver_config(args):
    return solvers.SolverConfig(
        beta=args.beta,
        schedule=args.schedule,
        shrinkwrap_every=args.shrinkwrap_every,
        shrinkwrap_sigma0=args.shrinkwrap_sigma0,
        shrinkwrap_sigma_decay=args.shrinkwrap_sigma_decay,
        shrinkwrap_threshold=args.shrinkwrap_threshold,
        restarts=args.restarts,
        seed=args.seed,
    )


def cmd_solve(args):
    header, records = datastore.read_container(args.input)
    if not header.has_measurements:
        raise UsageError(f"{args.input} holds no measurements")
    try:
        config = _solver_config(args)
    except ValueError as exc:
        raise UsageError(str(exc))
    idx = list(range(len(records)))
    if args.limit:
        idx = idx[: args.limit]

    def one(j):
        return solvers.solve(records[j][1], header.n1, header.n2, config, key=j)

    results = _map(one, idx, args.threads)
    out = [(r.reconstruction, records[j][1]) for j, r in zip(idx, results)]
    datastore.write_container(args.output, out, shape=(header.n1, header.n2))
    residuals = args.residuals or f"{args.output}.residuals.csv"
    rows = [(j, it, float(v)) for j, r in zip(idx, results) for it, v in enumerate(r.residual_history)]
    datastore.write_csv(residuals, ["record", "iteration", "residual"], rows)
    args._extra = {"residuals-csv": residuals, "records-solved": len(idx)}
    logger.info("solved %d records -> %s", len(idx), args.output)
    return 0


METRIC_FUNCS = {"mse": metrics.mse, "pa-mse": metrics.pa_mse, "sa-mse": metrics.sa_mse_fast}


def metric_columns(names):
    cols = ["record"]
    for name in names:
        p = name.replace("-", "_")
        cols += [f"{p}_raw", f"{p}_per_pixel", f"{p}_relative"]
        if name != "mse":
            cols += [f"{p}_eta", f"{p}_theta", f"{p}_degenerate"]
        if name == "sa-mse":
            cols += [f"{p}_t1", f"{p}_t2", f"{p}_flip"]
    return cols


def metric_row(j, a, b, names, scale=True):
    row = [j]
    for name in names:
        fn = METRIC_FUNCS[name]
        v = fn(a, b) if name == "mse" else fn(a, b, scale=scale)
        row += [v.raw, v.per_pixel, v.relative]
        if name != "mse":
            row += [v.eta, v.theta, int(v.degenerate)]
        if name == "sa-mse":
            g = v.transform
            row += [g.t1, g.t2, int(g.flip)]
    return row


def _load_pairs(truth_path, recon_path):
    th, truth = datastore.read_container(truth_path)
    rh, recon = datastore.read_container(recon_path)
    if (th.n1, th.n2) != (rh.n1, rh.n2):
        raise UsageError(f"frame mismatch: truth {th.n1}x{th.n2}, recon {rh.n1}x{rh.n2}")
    n = min(len(truth), len(recon))
    if len(truth) != len(recon):
        logger.warning("record counts differ (%d vs %d); evaluating first %d", len(truth), len(recon), n)
    return truth[:n], recon[:n]


def cmd_eval(args):
    truth, recon = _load_pairs(args.truth, args.recon)
    names = list(METRIC_FUNCS) if args.metric == "all" else [args.metric]
    rows = _map(lambda j: metric_row(j, truth[j][0], recon[j][0], names, not args.no_scale), list(range(len(truth))), args.threads)
    datastore.write_csv(args.out, metric_columns(names), rows)
    logger.info("wrote metrics for %d records to %s", len(rows), args.out)
    return 0


def cmd_report(args):
    from . import plotting

    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    truth, recon = _load_pairs(args.truth, args.recon)
    names = list(METRIC_FUNCS)
    rows = _map(lambda j: metric_row(j, truth[j][0], recon[j][0], names), list(range(len(truth))), args.threads)
    cols = metric_columns(names)
    datastore.write_csv(out / "metrics.csv", cols, rows)
    rel = np.array([r[cols.index("sa_mse_relative")] for r in rows], float)
    summary = [
        ("records", len(rel)),
        ("sa_mse_relative_median", float(np.median(rel)) if len(rel) else float("nan")),
        ("sa_mse_relative_mean", float(np.mean(rel)) if len(rel) else float("nan")),
        ("fraction_le_0.05", float(np.mean(rel <= 0.05)) if len(rel) else float("nan")),
        ("fraction_le_0.10", float(np.mean(rel <= 0.10)) if len(rel) else float("nan")),
        ("reference_train_sa_mse_approx", plotting.REFERENCE_SA_MSE_TRAIN),
        ("reference_test_sa_mse_approx", plotting.REFERENCE_SA_MSE_TEST),
    ]
    datastore.write_csv(out / "summary.csv", ["quantity", "value"], summary)
    if len(rel):
        plotting.metric_histogram(rel, out / "sa_mse_hist.png")
        aligned = []
        for (a, _), (b, _) in zip(truth[: args.gallery], recon[: args.gallery]):
            v = metrics.sa_mse_fast(a, b)
            try:
                bb = core.apply_symmetry(b, v.transform) * v.eta * np.exp(1j * v.theta) if v.transform else b
            except ValueError:
                bb = b
            aligned.append(bb)
        plotting.reconstruction_gallery(
            [a for a, _ in truth[: args.gallery]], aligned, [y for _, y in truth[: args.gallery]], out / "gallery.png", args.gallery
        )
    if args.residuals:
        table = datastore.read_csv(args.residuals)
        hist = {}
        for r in table:
            hist.setdefault(int(r["record"]), []).append(float(r["residual"]))
        plotting.residual_curves([np.array(h) for h in hist.values()], out / "residuals.png")
    args._manifest_path = out / "manifest.txt"
    logger.info("report in %s (median relative SA-MSE %.4g)", out, summary[1][1])
    return 0


def cmd_sqrt_demo(args):
    from . import plotting

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    data = sqrt_demo.build_sqrt_dataset(args.n, args.break_symmetry, seed=args.seed)
    config = sqrt_demo.MlpConfig(
        layers=args.layers,
        hidden_width=args.hidden_width,
        activation=args.activation,
        epochs=args.epochs,
        batch_size=args.batch_size,
        learning_rate=args.learning_rate,
        seed=args.seed,
    )
    model, curve = sqrt_demo.train_mlp(data, config)
    datastore.write_csv(out / "loss.csv", ["epoch", "train_mse"], [(i + 1, float(v)) for i, v in enumerate(curve)])
    grid = sqrt_demo.evaluate_sqrt(model, np.linspace(0.0, 9.0, args.grid_points))
    datastore.write_csv(out / "grid.csv", ["y", "prediction", "reference"], grid)
    tag = "symmetry-broken" if args.break_symmetry else "raw"
    plotting.sqrt_curve(grid, out / "sqrt_fit.png", train=(data.inputs, data.targets), title=f"{tag}, n={args.n}")
    plotting.loss_curve(curve, out / "loss.png")
    args._manifest_path = out / "manifest.txt"
    args._extra = {"final-train-mse": f"{curve[-1]:.17g}"}
    logger.info("final training MSE %.4g", curve[-1])
    return 0


def cmd_export(args):
    header, records = datastore.read_container(args.input)
    if not 0 <= args.index < len(records):
        raise UsageError(f"index {args.index} out of range (0..{len(records) - 1})")
    x, y = records[args.index]
    if args.measurement:
        if y is None:
            raise UsageError("container holds no measurements")
        src = np.fft.fftshift(y)
    else:
        src = x
    datastore.export_image(src, args.out, args.channel, args.transform)
    return 0


def cmd_export_npz(args):
    header, records = datastore.read_container(args.input)
    arrays = {"objects": np.stack([x for x, _ in records]) if records else np.zeros((0, header.n1, header.n2), complex)}
    if header.has_measurements:
        arrays["measurements"] = np.stack([y for _, y in records])
    np.savez(args.out, flags=np.uint32(header.flags), **arrays)
    return 0


# -- parser --------------------------------------------------------------------


def _add_common(p):
    p.add_argument("--config", help="key = value file overriding defaults")
    p.add_argument("--threads", type=_positive_int, default=_threads_default(), help="worker threads (default: CPU count)")
    p.add_argument("-v", "--verbose", action="store_true")


def build_parser():
    parser = argparse.ArgumentParser(prog="ffpr", description=__doc__.split("\n\n")[0])
    parser.add_argument("--version", action="version", version=f"ffpr {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen", help="simulate a crystal dataset")
    p.add_argument("--count", type=_positive_int, default=500)
    p.add_argument("--size", type=_positive_int, default=32)
    p.add_argument("--oversample", type=_oversample, default=Fraction(2))
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--defects-min", type=_nonneg_int, default=0)
    p.add_argument("--defects-max", type=_nonneg_int, default=4)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("break", help="symmetry-break a dataset")
    p.add_argument("--input", required=True)
    p.add_argument("--output", required=True)
    p.add_argument("--oversample", type=_oversample, default=None, help="default: inferred from the container")
    p.add_argument("--center", type=_bool, default=True, help="centre the support first (default true)")
    p.add_argument("--center-method", choices=("bbox", "centroid"), default="bbox")
    p.set_defaults(func=cmd_break)

    d = solvers.SolverConfig()
    p = sub.add_parser("solve", help="HIO+ER+Shrinkwrap reconstruction")
    p.add_argument("--input", required=True)
    p.add_argument("--output", required=True)
    p.add_argument("--residuals", help="residual CSV (default: OUTPUT.residuals.csv)")
    p.add_argument("--beta", type=float, default=d.beta)
    p.add_argument("--schedule", type=_schedule, default=d.schedule, help="e.g. HIO:90,ER:10,ER:20")
    p.add_argument("--shrinkwrap-every", type=_nonneg_int, default=d.shrinkwrap_every)
    p.add_argument("--shrinkwrap-sigma0", type=float, default=d.shrinkwrap_sigma0)
    p.add_argument("--shrinkwrap-sigma-decay", type=float, default=d.shrinkwrap_sigma_decay)
    p.add_argument("--shrinkwrap-threshold", type=float, default=d.shrinkwrap_threshold)
    p.add_argument("--restarts", type=_positive_int, default=d.restarts)
    p.add_argument("--seed", type=int, default=d.seed)
    p.add_argument("--limit", type=_nonneg_int, default=0, help="solve only the first N records")
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("eval", help="reconstruction metrics")
    p.add_argument("--truth", required=True)
    p.add_argument("--recon", required=True)
    p.add_argument("--metric", choices=("mse", "pa-mse", "sa-mse", "all"), default="all")
    p.add_argument("--no-scale", action="store_true", help="pin the PA/SA-MSE scale to 1")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("report", help="metrics summary and figures")
    p.add_argument("--truth", required=True)
    p.add_argument("--recon", required=True)
    p.add_argument("--residuals")
    p.add_argument("--gallery", type=_positive_int, default=6)
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=cmd_report)

    m = sqrt_demo.MlpConfig()
    p = sub.add_parser("sqrt-demo", help="square-root learning experiment")
    p.add_argument("--n", type=_positive_int, default=sqrt_demo.DENSE)
    p.add_argument("--break", dest="break_symmetry", action="store_true")
    p.add_argument("--epochs", type=_positive_int, default=m.epochs)
    p.add_argument("--batch-size", type=_positive_int, default=None)
    p.add_argument("--layers", type=int, default=m.layers)
    p.add_argument("--hidden-width", type=_positive_int, default=m.hidden_width)
    p.add_argument("--activation", choices=("relu", "tanh"), default=m.activation)
    p.add_argument("--learning-rate", type=float, default=m.learning_rate)
    p.add_argument("--grid-points", type=_positive_int, default=181)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_sqrt_demo)

    p = sub.add_parser("export", help="write one record as a 16-bit PGM")
    p.add_argument("--input", required=True)
    p.add_argument("--index", type=int, default=0)
    p.add_argument("--channel", choices=("magnitude", "phase", "intensity"), default="magnitude")
    p.add_argument("--transform", choices=("identity", "fourth-root"), default="identity")
    p.add_argument("--measurement", action="store_true", help="export the (fftshifted) measurement")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_export)

    p = sub.add_parser("export-npz", help="convert a container to .npz")
    p.add_argument("--input", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_export_npz)

    for sp in sub.choices.values():
        _add_common(sp)
    return parser


def _apply_config_file(parser, args, argv):
    """Re-parse with defaults taken from ``args.config``."""
    sp = parser._subparsers._group_actions[0].choices[args.command]
    values = datastore.read_keyvalue(args.config)
    by_key = {a.option_strings[0].lstrip("-"): a for a in sp._actions if a.option_strings and a.option_strings[0].startswith("--")}
    defaults = {}
    for key, text in values.items():
        action = by_key.get(key)
        if action is None or key == "config":
            parser.error(f"{args.config}: unknown key {key!r} for {args.command}")
        if action.nargs == 0:
            defaults[action.dest] = _bool(text)
        elif action.type is not None:
            try:
                defaults[action.dest] = action.type(text)
            except (argparse.ArgumentTypeError, ValueError) as exc:
                parser.error(f"{args.config}: {key}: {exc}")
        else:
            defaults[action.dest] = text
        if action.required:
            action.required = False
    sp.set_defaults(**defaults)
    return parser.parse_args(argv)


def main(argv=None):
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.config:
        try:
            args = _apply_config_file(parser, args, argv)
        except OSError as exc:
            parser.error(str(exc))
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
        force=True,
    )
    if args.command == "gen" and args.defects_min > args.defects_max:
        parser.error("--defects-min exceeds --defects-max")

    started = time.perf_counter()
    try:
        code = args.func(args)
    except UsageError as exc:
        logger.error("%s", exc)
        return 2
    except (OSError, ValueError, RuntimeError) as exc:
        logger.error("%s", exc)
        return 1
    primary = getattr(args, "_manifest_path", None) or f"{getattr(args, 'out', None) or args.output}.manifest"
    extra = getattr(args, "_extra", {})
    for k in ("_extra", "_manifest_path"):
        if hasattr(args, k):
            delattr(args, k)
    _manifest(primary, args, started, **extra)
    return code


if __name__ == "__main__":
    sys.exit(main())
