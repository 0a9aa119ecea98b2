"""Command-line surface.

Subcommands: ``explain`` (per-query explanation JSON), ``eval`` (benchmark
report, per-sample records, and plot CSVs), ``bench`` (per-method latency
table), ``threshold`` (decision-threshold selection). Configuration can come
from a JSON file (--config); flags win over config values. Exit codes:
0 ok, 1 input error, 2 domain error. Errors are emitted as one JSON object
on stderr: {"code", "message", "location"}.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

import numpy as np

from .backgrounds import KINDS, BackgroundSpec
from .dataset import fit_quantile_transform, load_csv
from .errors import CfshapError, InputError
from .explain import Explainer
from .model import (
    margin_to_prob,
    parse_model_json,
    select_threshold_roc,
)
from .recourse import BenchmarkReport, EvalGrid, MethodSpec, run_benchmark, time_per_explanation

DEFAULT_EVAL_METHODS = ["knn:K=100", "train:n=100", "dlab:n=100", "dpred:n=100"]

_METHOD_PARAMS = {"K": "K", "n": "sample_n", "seed": "seed", "pool": "pool_cap"}


def parse_method(text, default_seed=0):
    """Parse a method string like ``knn:K=100,seed=1`` into a MethodSpec."""
    text = text.strip()
    if not text:
        raise InputError("empty method specification")
    kind, _, param_text = text.partition(":")
    if kind not in KINDS:
        raise InputError(
            "unknown method kind %r (expected one of %s)" % (kind, sorted(KINDS))
        )
    kwargs = {"kind": kind, "seed": default_seed}
    if param_text:
        for item in param_text.split(","):
            key, eq, value = item.partition("=")
            if not eq or key not in _METHOD_PARAMS:
                raise InputError("bad method parameter %r in %r" % (item, text))
            try:
                kwargs[_METHOD_PARAMS[key]] = int(value)
            except ValueError:
                raise InputError("method parameter %r must be an integer" % item) from None
    try:
        spec = BackgroundSpec(**kwargs)
    except ValueError as exc:
        raise InputError(str(exc)) from None
    return MethodSpec(name=text, background=spec)


def _read_text(path):
    try:
        return Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise InputError(str(exc), location=str(path)) from None


def _load_model(path):
    return parse_model_json(_read_text(path))


def _load_csv_checked(path, label):
    try:
        return load_csv(path, has_labels=label is not None, label_column=label)
    except OSError as exc:
        raise InputError(str(exc), location=str(path)) from None


def _threads(value):
    if value is not None:
        return value
    env = os.environ.get("CFSHAP_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            raise InputError("CFSHAP_THREADS must be an integer") from None
    return os.cpu_count() or 1


def _int_list(text):
    try:
        return [int(v) for v in str(text).split(",") if v != ""]
    except ValueError:
        raise InputError("expected a comma-separated list of integers, got %r" % text) from None


def _str_list(text, allowed, what):
    values = [v for v in str(text).split(",") if v != ""]
    for v in values:
        if v not in allowed:
            raise InputError("unknown %s %r (expected one of %s)" % (what, v, allowed))
    if not values:
        raise InputError("empty %s list" % what)
    return values


class _Settings:
    """Merged view of config-file values and flag overrides (flags win)."""

    def __init__(self, args):
        self.config = {}
        if getattr(args, "config", None):
            try:
                self.config = json.loads(_read_text(args.config))
            except json.JSONDecodeError as exc:
                raise InputError("config is not valid JSON: %s" % exc, location=args.config) from None
            if not isinstance(self.config, dict):
                raise InputError("config must be a JSON object", location=args.config)
        self.args = args

    def get(self, name, default=None):
        value = getattr(self.args, name, None)
        if value is not None:
            return value
        return self.config.get(name, default)

    def require(self, name, flag):
        value = self.get(name)
        if value is None:
            raise InputError("missing required %s (flag %s or config key %r)" % (name, flag, name))
        return value


def _resolve_methods(settings, default=None, required=False):
    raw = settings.get("method", default)
    if raw is None or raw == []:
        if required:
            raise InputError("at least one --method is required")
        raw = list(DEFAULT_EVAL_METHODS)
    if isinstance(raw, str):
        raw = [raw]
    seed = int(settings.get("seed", 0))
    methods = [parse_method(m, default_seed=seed) for m in raw]
    names = [m.name for m in methods]
    if len(set(names)) != len(names):
        raise InputError("duplicate method names: %s" % names)
    return methods


def cmd_explain(args):
    settings = _Settings(args)
    ensemble = _load_model(settings.require("model", "--model"))
    label = settings.get("label")
    d_train = _load_csv_checked(settings.require("train", "--train"), label)
    qt = fit_quantile_transform(d_train)
    methods = _resolve_methods(settings, default=["knn:K=100"])
    method = methods[0]

    if args.csv is not None and args.row:
        raise InputError("use either --row or --csv, not both")
    if args.csv is not None:
        queries = _load_csv_checked(args.csv, None).features
        if queries.shape[1] != d_train.n_features:
            raise InputError(
                "query file has %d feature columns, expected %d"
                % (queries.shape[1], d_train.n_features)
            )
    elif args.row:
        test_path = settings.get("test")
        source = _load_csv_checked(test_path, label) if test_path else d_train
        for r in args.row:
            if not 0 <= r < source.n_rows:
                raise InputError("row %d out of range (%d rows)" % (r, source.n_rows))
        queries = source.features[np.array(args.row)]
    else:
        raise InputError("supply queries via --row or --csv")

    explainer = Explainer(ensemble, d_train, qt, method.background)
    threads = _threads(settings.get("threads"))
    rows = list(queries)

    def explain_one(item):
        i, x = item
        try:
            return explainer.explain(x)
        except CfshapError as exc:
            if exc.location is None:
                exc.location = "query %d" % i
            raise

    if threads > 1 and len(rows) > 1:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(max_workers=threads) as ex:
            explanations = list(ex.map(explain_one, enumerate(rows)))
    else:
        explanations = [explain_one(item) for item in enumerate(rows)]

    lines = [json.dumps(e.to_json(), sort_keys=True) for e in explanations]
    out = settings.get("out")
    if out:
        Path(out).write_text("\n".join(lines) + "\n", encoding="utf-8")
    else:
        for line in lines:
            print(line)
    return 0


def _dump_json(obj):
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


def write_report(report: BenchmarkReport, out_dir):
    """Write report.json, records.jsonl, plot CSVs, and (if measured)
    timing.json. Timing stays out of report.json so reruns with one seed
    are byte-identical."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "report.json").write_text(_dump_json(report.aggregate_json()) + "\n", encoding="utf-8")
    with open(out / "records.jsonl", "w", encoding="utf-8") as fh:
        for rec in report.records:
            fh.write(_dump_json(rec.to_json()) + "\n")
    pairs = sorted(report.improvement)
    for action in report.meta["action_kinds"]:
        for norm in report.meta["cost_norms"]:
            for stem, table in (
                ("improvement", report.improvement),
                ("plausibility", report.plausibility_improvement),
            ):
                lines = ["k," + ",".join('"%s"' % p for p in pairs)]
                for k in report.meta["k_values"]:
                    cells = [repr(table[p][action][norm][str(k)]) for p in pairs]
                    lines.append("%d,%s" % (k, ",".join(cells)))
                name = "%s_%s_%s.csv" % (stem, action, norm)
                (out / name).write_text("\n".join(lines) + "\n", encoding="utf-8")
    if report.timing_us is not None:
        (out / "timing.json").write_text(_dump_json({"timing_us": report.timing_us}) + "\n", encoding="utf-8")


def cmd_eval(args):
    settings = _Settings(args)
    ensemble = _load_model(settings.require("model", "--model"))
    label = settings.get("label")
    d_train = _load_csv_checked(settings.require("train", "--train"), label)
    d_test = _load_csv_checked(settings.require("test", "--test"), label)
    qt = fit_quantile_transform(d_train)
    methods = _resolve_methods(settings)
    raw_k = settings.get("k")
    if raw_k is None:
        k_values = list(range(1, min(5, d_train.n_features) + 1))
    else:
        k_values = _int_list(raw_k)
        if not k_values or any(k < 1 or k > d_train.n_features for k in k_values):
            raise InputError(
                "k values must lie in 1..%d, got %s" % (d_train.n_features, k_values)
            )
    n_samples = int(settings.get("samples", 4000))
    if n_samples < 1:
        raise InputError("samples must be >= 1")
    grid = EvalGrid(
        k_values=tuple(k_values),
        action_kinds=tuple(
            _str_list(settings.get("action", "random"), ("proportional", "random"), "action")
        ),
        cost_norms=tuple(_str_list(settings.get("cost", "l1"), ("l1", "l2"), "cost norm")),
    )
    report = run_benchmark(
        methods,
        d_train,
        d_test,
        ensemble,
        qt,
        grid=grid,
        n_samples=n_samples,
        seed=int(settings.get("seed", 0)),
        measure_timing=bool(args.timing),
        threads=_threads(settings.get("threads")),
    )
    write_report(report, settings.get("out", "."))
    return 0


def cmd_bench(args):
    settings = _Settings(args)
    ensemble = _load_model(settings.require("model", "--model"))
    label = settings.get("label")
    d_train = _load_csv_checked(settings.require("train", "--train"), label)
    test_path = settings.get("test")
    d_test = _load_csv_checked(test_path, label) if test_path else d_train
    qt = fit_quantile_transform(d_train)
    methods = _resolve_methods(settings, required=True)
    queries = list(d_test.features)
    timing = {}
    for ms in methods:
        explainer = Explainer(ensemble, d_train, qt, ms.background)
        timing[ms.name] = time_per_explanation(explainer.explain, queries) * 1e6
    width = max(len(n) for n in timing)
    print("%-*s  per-explanation" % (width, "method"))
    for name in timing:
        print("%-*s  %10.1f us" % (width, name, timing[name]))
    payload = _dump_json({"timing_us": timing}) + "\n"
    out = settings.get("out")
    if out:
        Path(out).write_text(payload, encoding="utf-8")
    else:
        print(payload, end="")
    return 0


def cmd_threshold(args):
    settings = _Settings(args)
    ensemble = _load_model(settings.require("model", "--model"))
    label = settings.require("label", "--label")
    d_train = _load_csv_checked(settings.require("train", "--train"), label)
    t = select_threshold_roc(ensemble, d_train, mode=args.mode)
    print("margin_threshold %r" % t)
    print("probability_threshold %.4f" % margin_to_prob(t))
    return 0


def build_parser():
    parser = argparse.ArgumentParser(
        prog="cfshap",
        description="Counterfactual SHAP explanations and recourse evaluation "
        "for tree ensembles.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, test=True):
        p.add_argument("--model", help="model JSON (native schema or XGBoost dump)")
        p.add_argument("--train", help="training CSV")
        if test:
            p.add_argument("--test", help="test CSV")
        p.add_argument("--label", help="label column name")
        p.add_argument("--config", help="JSON config file; flags win over config")
        p.add_argument("--seed", type=int, help="random seed (default 0)")
        p.add_argument("--out", help="output file or directory")

    p = sub.add_parser("explain", help="explain one or more queries")
    common(p)
    p.add_argument(
        "--method", action="append",
        help='background method, e.g. "knn:K=100" (first one is used; default knn:K=100)',
    )
    p.add_argument(
        "--row", type=int, action="append",
        help="query row index into --test when given, else --train (repeatable)",
    )
    p.add_argument("--csv", help="CSV file of query rows")
    p.add_argument("--threads", type=int, help="worker threads (default: CFSHAP_THREADS or CPU count)")
    p.set_defaults(func=cmd_explain)

    p = sub.add_parser("eval", help="run the counterfactual-ability benchmark")
    common(p)
    p.add_argument("--method", action="append", help="repeatable; default: knn + the three baselines")
    p.add_argument("--k", help="comma-separated top-k grid (default 1,2,3,4,5)")
    p.add_argument("--action", help="action kinds, comma-separated (proportional,random)")
    p.add_argument("--cost", help="cost norms, comma-separated (l1,l2)")
    p.add_argument("--samples", type=int, help="rejected samples to evaluate (default 4000)")
    p.add_argument("--timing", action="store_true", help="also measure per-method latency")
    p.add_argument("--threads", type=int, help="worker threads (default: CFSHAP_THREADS or CPU count)")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("bench", help="measure per-explanation latency")
    common(p)
    p.add_argument("--method", action="append", help="repeatable; required")
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("threshold", help="select the decision threshold from labelled data")
    common(p, test=False)
    p.add_argument("--mode", choices=("youden", "literal"), default="youden")
    p.set_defaults(func=cmd_threshold)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except CfshapError as exc:
        sys.stderr.write(json.dumps(exc.to_json()) + "\n")
        return exc.exit_code


def entrypoint():
    sys.exit(main())


if __name__ == "__main__":
    entrypoint()
