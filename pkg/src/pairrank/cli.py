"""Command-line front door for batch workflows.

Subcommands: simulate, score, evaluate, grid, label, serve, dump.
Exit codes: 0 success, 1 usage error, 2 data error. All randomness is
seeded through flags; reports can be rendered as figures with --plot.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

from . import batch, evaluation, io, labeling, online, simulate
from .data import DataError
from .evaluation import EvaluationReport
from .simplex import format_lp

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_USAGE)


def _parse_seeds(raw: str) -> list[int]:
    try:
        return [int(s) for s in raw.split(",") if s.strip()]
    except ValueError:
        raise DataError(f"bad seed list {raw!r}") from None


def _parse_grid(raw: str) -> dict[str, list[float]]:
    grid: dict[str, list[float]] = {}
    for clause in raw.split(";"):
        clause = clause.strip()
        if not clause:
            continue
        if "=" not in clause:
            raise DataError(f"bad grid clause {clause!r}, expected name=v1,v2")
        name, values = clause.split("=", 1)
        try:
            grid[name.strip()] = [float(v) for v in values.split(",") if v.strip()]
        except ValueError:
            raise DataError(f"bad grid values in {clause!r}") from None
    if not grid:
        raise DataError(f"empty grid {raw!r}")
    return grid


_PARAM_FLAGS = {
    # flag dest -> (methods, params key)
    "k": (("elo",), "k"),
    "delta": (("elo",), "delta"),
    "s0": (("elo",), "s0"),
    "mu0": (("trueskill",), "mu0"),
    "sigma0": (("trueskill",), "sigma0"),
    "beta": (("trueskill",), "beta"),
    "draw_margin": (("trueskill",), "epsilon"),
    "margin": (("co",), "epsilon"),
    "lambda_ties": (("co",), "lambda_ties"),
    "alpha_reg": (("lsr",), "alpha_reg"),
    "prior_var": (("gp",), "prior_var"),
    "quad_order": (("gp",), "quad_order"),
    "damping": (("gp",), "damping"),
    "max_sweeps": (("gp",), "max_sweeps"),
}


def _add_method_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--method", required=True, choices=evaluation.METHODS)
    g = p.add_argument_group("method parameters")
    g.add_argument("--k", type=float, help="elo update gain")
    g.add_argument("--delta", type=float, help="elo score-difference scale")
    g.add_argument("--s0", type=float, help="elo initial score")
    g.add_argument("--mu0", type=float, help="trueskill initial mean")
    g.add_argument("--sigma0", type=float, help="trueskill initial deviation")
    g.add_argument("--beta", type=float, help="trueskill per-game deviation")
    g.add_argument("--draw-margin", type=float, help="trueskill draw margin")
    g.add_argument("--margin", type=float, help="co error margin")
    g.add_argument("--lambda-ties", type=float, help="co tie penalty weight")
    g.add_argument("--alpha-reg", type=float, help="lsr pair pseudo-count")
    g.add_argument("--prior-var", type=float, help="gp prior variance")
    g.add_argument("--quad-order", type=int, help="gp quadrature order")
    g.add_argument("--damping", type=float, help="gp ep damping")
    g.add_argument("--max-sweeps", type=int, help="gp ep sweep budget")


def _collect_params(args) -> dict:
    overrides = {}
    for dest, (methods, key) in _PARAM_FLAGS.items():
        value = getattr(args, dest, None)
        if value is not None and args.method in methods:
            overrides[key] = value
    return overrides


def _out_stream(path: str | None):
    return sys.stdout if path in (None, "-") else path


def build_parser() -> _Parser:
    parser = _Parser(prog="pairrank", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", metavar="command", parser_class=_Parser)

    p = sub.add_parser("simulate", help="generate a synthetic comparison world")
    p.add_argument("--items", "-m", type=int, required=True)
    p.add_argument("--n", type=int, required=True, help="number of comparisons")
    p.add_argument("--scale", type=float, default=1.0, help="true score deviation")
    p.add_argument("--tie-rate", type=float, default=0.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--format", choices=("csv", "jsonl"), default="csv")
    p.add_argument("-o", "--output", help="comparison file (default stdout)")
    p.add_argument("--truth", help="also write the true scores CSV here")

    p = sub.add_parser("score", help="fit one method and emit its score table")
    _add_method_flags(p)
    p.add_argument("-i", "--input", required=True, help="comparison CSV/JSONL")
    p.add_argument("--format", choices=("csv", "jsonl"), default="csv")
    p.add_argument("--catalog", help="explicit catalog manifest JSON")
    p.add_argument("-o", "--output", help="score CSV (default stdout)")
    p.add_argument("--normalize", action="store_true", help="min-max map scores to [0,1]")
    p.add_argument("--conservative", action="store_true", help="trueskill: score mu - 3 sigma")
    p.add_argument("--dump-lp", help="co: write the assembled LP listing here")
    p.add_argument("--plot", help="render the score figure to this file")

    p = sub.add_parser("evaluate", help="log loss / accuracy protocol")
    _add_method_flags(p)
    p.add_argument("-i", "--input", required=True)
    p.add_argument("--format", choices=("csv", "jsonl"), default="csv")
    p.add_argument("--test-fraction", type=float, default=0.15)
    p.add_argument("--seeds", default="1,2,3,4,5", help="comma-separated seed list")
    p.add_argument("--mode", choices=("binary", "ternary"), default="binary")
    p.add_argument("--json", action="store_true", help="machine-readable output")
    p.add_argument("-o", "--output", help="report destination (default stdout)")
    p.add_argument("--plot", help="render the report figure to this file")

    p = sub.add_parser("grid", help="hyperparameter grid search")
    _add_method_flags(p)
    p.add_argument("-i", "--input", required=True)
    p.add_argument("--format", choices=("csv", "jsonl"), default="csv")
    p.add_argument("--grid", help="e.g. 'k=8,16;delta=200,400' (default: built-in grid)")
    p.add_argument("--test-fraction", type=float, default=0.15)
    p.add_argument("--seeds", default="1,2,3,4,5")
    p.add_argument("--mode", choices=("binary", "ternary"), default="binary")
    p.add_argument("--json", action="store_true")
    p.add_argument("-o", "--output")
    p.add_argument("--plot")

    p = sub.add_parser("label", help="threshold scores into safe/unsafe labels")
    p.add_argument("-i", "--input", required=True, help="score CSV (item,score[,mu,sigma])")
    p.add_argument("--alpha", type=float, default=1.0)
    p.add_argument("--std-mode", choices=("population", "sample"), default="population")
    p.add_argument("--sigma0", type=float, help="initial sigma for the certainty filter")
    p.add_argument("--filter-ratio", type=float, default=5.0 / 6.0,
                   help="keep items with sigma <= ratio * sigma0")
    p.add_argument("--drop-neutral", action="store_true")
    p.add_argument("-o", "--output", help="label CSV (default stdout)")
    p.add_argument("--plot", help="render the label histogram to this file")

    p = sub.add_parser("serve", help="run the live survey service")
    p.add_argument("--addr", default=os.environ.get("PAIRRANK_ADDR", "127.0.0.1:8000"))
    p.add_argument("--data-dir", default=os.environ.get("PAIRRANK_DATA_DIR", "./pairrank-data"))
    p.add_argument("--catalog", default=os.environ.get("PAIRRANK_CATALOG"))
    p.add_argument("--strategy", choices=("uniform", "uncertainty"),
                   default=os.environ.get("PAIRRANK_STRATEGY", "uniform"))
    p.add_argument("--static-dir", default=os.environ.get("PAIRRANK_STATIC_DIR"),
                   help="frontend assets served at /")
    p.add_argument("--images-dir", help="image files served at /images/")
    p.add_argument("--seed", type=int, help="presentation-order RNG seed")

    p = sub.add_parser("dump", help="pretty-print a score table")
    p.add_argument("-i", "--input", required=True, help="score CSV")

    return parser


# ---------------------------------------------------------------------------
# subcommand bodies


def _load_dataset(args):
    catalog = io.load_catalog(args.catalog) if getattr(args, "catalog", None) else None
    return io.parse_comparisons(args.input, format=args.format, catalog=catalog)


def _cmd_simulate(args) -> int:
    truth, data = simulate.simulate_bt(
        m=args.items, n=args.n, score_scale=args.scale, tie_rate=args.tie_rate, seed=args.seed
    )
    io.write_comparisons(data, _out_stream(args.output), format=args.format)
    if args.truth:
        io.write_score_table(truth, args.truth)
    return EXIT_OK


def _fit_table(args, dataset):
    params = evaluation.make_params(args.method, _collect_params(args))
    if args.method == "trueskill":
        return online.rate_trueskill(dataset, params, conservative=args.conservative)
    if args.method == "co" and args.dump_lp:
        lp, _ = batch.build_margin_lp(dataset, params)
        Path(args.dump_lp).write_text(format_lp(lp))
    fitted = evaluation.fit_method(args.method, dataset, params)
    return fitted.table


def _cmd_score(args) -> int:
    dataset = _load_dataset(args)
    table = _fit_table(args, dataset)
    if args.normalize:
        table = evaluation.normalize_scores(table)
    io.write_score_table(table, _out_stream(args.output))
    if args.plot:
        from .figures import plot_score_tables

        plot_score_tables([table], args.plot)
    return EXIT_OK


def _report_csv_lines(reports: list[EvaluationReport]) -> list[str]:
    import csv as _csv
    from io import StringIO

    buf = StringIO()
    writer = _csv.writer(buf)
    writer.writerow(["method", "mode", "params", "seed", "log_loss", "accuracy", "n_test"])
    for report in reports:
        params = json.dumps(report.params, sort_keys=True, default=str)
        for s in report.per_seed:
            writer.writerow(
                [report.method, report.mode, params, s.seed, repr(s.log_loss), repr(s.accuracy), s.n_test]
            )
        writer.writerow(
            [
                report.method,
                report.mode,
                params,
                "mean",
                repr(report.log_loss),
                repr(report.accuracy),
                sum(s.n_test for s in report.per_seed),
            ]
        )
    return buf.getvalue().rstrip("\n").splitlines()


def _wants_csv(path) -> bool:
    return isinstance(path, str) and path.lower().endswith(".csv")


def _report_lines(report: EvaluationReport) -> list[str]:
    lines = [
        f"method     {report.method}",
        f"mode       {report.mode}",
        f"params     {json.dumps(report.params, sort_keys=True, default=str)}",
        f"log_loss   {report.log_loss:.6f}   (mean over seeds {report.seeds})",
        f"accuracy   {report.accuracy:.6f}",
        "seed  log_loss  accuracy  n_test",
    ]
    for s in report.per_seed:
        lines.append(f"{s.seed:>4}  {s.log_loss:8.6f}  {s.accuracy:8.6f}  {s.n_test:>6}")
    return lines


def _emit(text: str, out) -> None:
    with io.open_write(out) as fh:
        fh.write(text if text.endswith("\n") else text + "\n")


def _cmd_evaluate(args) -> int:
    dataset = _load_dataset(args)
    report = evaluation.evaluate(
        dataset,
        args.method,
        _collect_params(args),
        test_fraction=args.test_fraction,
        seeds=_parse_seeds(args.seeds),
        mode=args.mode,
    )
    out = _out_stream(args.output)
    if args.json:
        _emit(json.dumps(report.as_dict(), sort_keys=True, default=str), out)
    elif _wants_csv(args.output):
        _emit("\n".join(_report_csv_lines([report])), out)
    else:
        _emit("\n".join(_report_lines(report)), out)
    if args.plot:
        from .figures import plot_reports

        plot_reports([report], args.plot)
    return EXIT_OK


def _cmd_grid(args) -> int:
    dataset = _load_dataset(args)
    grid = _parse_grid(args.grid) if args.grid else None
    best, reports = evaluation.grid_search(
        dataset,
        args.method,
        grid,
        test_fraction=args.test_fraction,
        seeds=_parse_seeds(args.seeds),
        mode=args.mode,
    )
    out = _out_stream(args.output)
    if args.json:
        payload = {"best": best, "reports": [r.as_dict() for r in reports]}
        _emit(json.dumps(payload, sort_keys=True, default=str), out)
    elif _wants_csv(args.output):
        _emit("\n".join(_report_csv_lines(reports)), out)
    else:
        lines = [f"best: {json.dumps(best, sort_keys=True)}", "log_loss  accuracy  cell"]
        for r in sorted(reports, key=lambda r: r.log_loss):
            cell = json.dumps(
                {k: r.params[k] for k in sorted(r.params)}, sort_keys=True, default=str
            )
            lines.append(f"{r.log_loss:8.6f}  {r.accuracy:8.6f}  {cell}")
        _emit("\n".join(lines), out)
    if args.plot:
        from .figures import plot_reports

        plot_reports(reports, args.plot)
    return EXIT_OK


def _cmd_label(args) -> int:
    table = io.read_score_table(args.input)
    params = labeling.LabelParams(
        alpha=args.alpha, sigma_filter_ratio=args.filter_ratio, std_mode=args.std_mode
    )
    ratings = table.ratings if args.sigma0 is not None else None
    if args.sigma0 is not None and table.ratings is None:
        raise DataError("score file has no mu/sigma columns; cannot apply the filter")
    labels = labeling.label_items(table, ratings=ratings, params=params, sigma0=args.sigma0)
    labeling.export_labels(labels, _out_stream(args.output), drop_neutral=args.drop_neutral)
    if args.plot:
        from .figures import plot_labels

        band = None
        if len(labels) >= 2:
            band = labeling.thresholds(
                [l.score for l in labels], args.alpha, std_mode=args.std_mode
            )
        plot_labels(labels, band, args.plot)
    return EXIT_OK


def _cmd_serve(args) -> int:
    from .io import load_catalog
    from .service import SurveyService, make_server

    host, _, port_s = args.addr.partition(":")
    try:
        port = int(port_s) if port_s else 8000
    except ValueError:
        raise DataError(f"bad address {args.addr!r}") from None
    catalog = load_catalog(args.catalog) if args.catalog else None
    service = SurveyService(
        data_dir=args.data_dir,
        catalog=catalog,
        default_strategy=args.strategy,
        rng_seed=args.seed,
    )
    server = make_server(
        service,
        host=host or "127.0.0.1",
        port=port,
        images_dir=Path(args.images_dir) if args.images_dir else None,
        static_dir=Path(args.static_dir) if args.static_dir else None,
    )
    actual = server.server_address
    print(f"pairrank: serving on http://{actual[0]}:{actual[1]}", flush=True)
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        pass
    finally:
        server.server_close()
        service.close()
    return EXIT_OK


def _cmd_dump(args) -> int:
    table = io.read_score_table(args.input)
    normalized = evaluation.normalize_scores(table) if len(table) >= 2 else None
    print(f"{'item':<24} {'score':>12} {'normalized':>12}")
    for item, score in table.ranked_items():
        norm = f"{normalized.scores[item]:>12.4f}" if normalized else " " * 12
        print(f"{item:<24} {score:>12.4f} {norm}")
    return EXIT_OK


_COMMANDS = {
    "simulate": _cmd_simulate,
    "score": _cmd_score,
    "evaluate": _cmd_evaluate,
    "grid": _cmd_grid,
    "label": _cmd_label,
    "serve": _cmd_serve,
    "dump": _cmd_dump,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command is None:
        parser.print_usage(sys.stderr)
        return EXIT_USAGE
    try:
        return _COMMANDS[args.command](args)
    except (DataError, OSError) as exc:
        print(f"pairrank: {exc}", file=sys.stderr)
        return EXIT_DATA
    except ValueError as exc:
        print(f"pairrank: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
