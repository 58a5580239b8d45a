"""Command-line workflows: train, encode, query, eval, bench.

Settings come from flags, optionally layered over a JSON file given with
``--config`` (flags win). All randomness derives from ``--seed`` (training)
and ``--split-seed`` (train/test split).
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import os
import sys
import tempfile
import time
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import data_io, evaluation, model_store
from .embedding import LshModel
from .hamming import CodeDatabase, binc_bytes, read_binc
from .sdh import TrainConfig, train_sdh
from .sdhr import train_sdhr

log = logging.getLogger("sdhash")

METHODS = ("sdhr", "sdh", "lsh")

DEFAULTS = {
    "method": "sdhr",
    "bits": "64",
    "lam": 1.0,
    "v": 1e-5,
    "iters": 5,
    "anchors": 1000,
    "seed": 0,
    "sigma": None,
    "tol": 1e-5,
    "sweeps": 10,
    "radius": evaluation.DEFAULT_RADIUS,
    "top_n": None,
    "data": "mnist",
    "data_dir": None,
    "data_features": None,
    "data_labels": None,
    "data_test_features": None,
    "data_test_labels": None,
    "test_count": 1000,
    "split_seed": 0,
    "classifier": "head",
}


class UsageError(Exception):
    pass


def write_atomic(path, data) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    mode = "wb" if isinstance(data, bytes) else "w"
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name, suffix=".tmp")
    try:
        with os.fdopen(fd, mode) as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _list_arg(values) -> list[str]:
    out = []
    for v in values if isinstance(values, (list, tuple)) else [values]:
        out.extend(part for part in str(v).split(",") if part.strip())
    return [v.strip() for v in out]


def parse_bits(values) -> list[int]:
    bits = _list_arg(values)
    if not bits:
        raise UsageError("--bits needs at least one code length")
    try:
        parsed = [int(b) for b in bits]
    except ValueError:
        raise UsageError(f"--bits must be integers, got {values!r}") from None
    if any(b < 1 for b in parsed):
        raise UsageError("--bits values must be >= 1")
    return parsed


def parse_methods(values) -> list[str]:
    methods = _list_arg(values)
    if not methods:
        raise UsageError("--method needs at least one method")
    for m in methods:
        if m not in METHODS:
            raise UsageError(f"unknown method {m!r} (choose from {', '.join(METHODS)})")
    return methods


def resolve(args) -> argparse.Namespace:
    """Fill unset flags from --config, then from built-in defaults."""
    file_cfg = {}
    if getattr(args, "config", None):
        file_cfg = json.loads(Path(args.config).read_text())
        if "lambda" in file_cfg:
            file_cfg["lam"] = file_cfg.pop("lambda")
        file_cfg = {k.replace("-", "_"): v for k, v in file_cfg.items()}
    for key, default in DEFAULTS.items():
        if getattr(args, key, None) is None:
            setattr(args, key, file_cfg.get(key, default))
    return args


def train_config(args, bits: int) -> TrainConfig:
    return TrainConfig(
        n_bits=bits,
        lam=float(args.lam),
        v=float(args.v),
        max_iters=int(args.iters),
        n_anchors=int(args.anchors),
        seed=int(args.seed),
        tol=float(args.tol),
        max_sweeps=int(args.sweeps),
        sigma=None if args.sigma is None else float(args.sigma),
    )


def load_dataset(args):
    """Returns ``(train_pair, test_pair, scaled_inputs)``."""
    if args.data == "mnist":
        directory = args.data_dir or data_io.default_mnist_dir()
        X, y = data_io.load_mnist(directory)
        scaled = True
    elif args.data == "csv":
        if not (args.data_features and args.data_labels):
            raise UsageError("--data csv needs --data-features and --data-labels")
        X, y = data_io.load_csv(args.data_features, args.data_labels)
        scaled = False
        if args.data_test_features or args.data_test_labels:
            Xt, yt = data_io.load_csv(args.data_test_features, args.data_test_labels)
            return (X, y), (Xt, yt), scaled
    else:
        raise UsageError(f"unknown dataset kind {args.data!r} (mnist or csv)")
    train, test = data_io.split(X, y, int(args.test_count), int(args.split_seed))
    return train, test, scaled


def fit(method: str, X, y, config: TrainConfig, scaled: bool):
    if method == "lsh":
        return LshModel.create(config.n_bits, X.shape[1], config.seed, scaled)
    trainer = train_sdhr if method == "sdhr" else train_sdh
    return replace(trainer(X, y, config), scaled_inputs=scaled)


def check_compatible(model, X, scaled: bool) -> None:
    d = model.hyperplanes.shape[1] if model.kind == "lsh" else model.embedding.d
    if X.shape[1] != d:
        raise ValueError(f"model expects {d} features, dataset has {X.shape[1]}")
    if model.scaled_inputs != scaled:
        raise ValueError("model and dataset disagree on input scaling to [0, 1]")


def run_eval(model, train, test, *, radius: int, top_n: int, classifier: str):
    """Encode the training set as the database, the test set as queries, and score."""
    (Xtr, ytr), (Xte, yte) = train, test
    t0 = time.perf_counter()
    db_codes = model.encode(Xtr)
    t1 = time.perf_counter()
    queries = model.encode(Xte)
    t2 = time.perf_counter()
    db = CodeDatabase(db_codes, ytr)
    if classifier == "knn" or model.kind == "lsh":
        predicted = evaluation.knn_vote(db, queries, k=1)
    else:
        predicted = model.predict(queries)
    report = evaluation.evaluate(db, queries, yte, predicted, method=model.kind,
                                 radius=radius, top_n=top_n)
    report.timing = {
        "database_encode_seconds": t1 - t0,
        "test_seconds_per_query": (t2 - t1) / len(Xte),
        "evaluate_seconds": time.perf_counter() - t2,
    }
    return report, db, queries, yte


# -- verbs -------------------------------------------------------------------


def cmd_train(args) -> None:
    method = parse_methods(args.method)
    bits = parse_bits(args.bits)
    if len(method) != 1 or len(bits) != 1:
        raise UsageError("train takes exactly one --method and one --bits value")
    train, _, scaled = load_dataset(args)
    config = train_config(args, bits[0])
    t0 = time.perf_counter()
    model = fit(method[0], *train, config, scaled)
    seconds = time.perf_counter() - t0
    write_atomic(args.model, model_store.model_to_bytes(model))
    record = {
        "method": method[0],
        "bits": bits[0],
        "config": config.to_dict(),
        "n_train": len(train[0]),
        "objective": list(getattr(model, "history", ())),
        "train_seconds": seconds,
    }
    write_atomic(args.log or f"{args.model}.log.json", json.dumps(record, indent=2) + "\n")
    if args.codes_out and method[0] != "lsh":
        write_binc_atomic(args.codes_out, model.train_codes)
    log.info("trained %s/%d bits in %.1fs -> %s", method[0], bits[0], seconds, args.model)


def write_binc_atomic(path, codes) -> None:
    write_atomic(path, binc_bytes(codes))


def _subset(args, train, test):
    if args.subset == "train":
        return train
    if args.subset == "test":
        return test
    return np.concatenate([train[0], test[0]]), np.concatenate([train[1], test[1]])


def cmd_encode(args) -> None:
    model = model_store.load_model(args.model)
    train, test, scaled = load_dataset(args)
    X, _ = _subset(args, train, test)
    check_compatible(model, X, scaled)
    write_binc_atomic(args.out, model.encode(X))


def cmd_query(args) -> None:
    model = model_store.load_model(args.model)
    train, test, scaled = load_dataset(args)
    Xq, _ = _subset(args, train, test)
    check_compatible(model, Xq, scaled)
    db_codes = read_binc(args.db) if args.db else model.encode(train[0])
    if db_codes.n_bits != model.n_bits:
        raise ValueError(f"database codes have {db_codes.n_bits} bits, model has {model.n_bits}")
    db = CodeDatabase(db_codes)
    queries = model.encode(Xq)
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["query", "rank", "id", "distance"])
    for qi in range(len(queries)):
        if args.radius_lookup:
            hits = db.lookup_radius(queries.packed[qi], int(args.radius))
        else:
            hits = db.rank_topn(queries.packed[qi], int(args.top_n or 10))
        for rank, (ident, dist) in enumerate(hits):
            writer.writerow([qi, rank, ident, dist])
    write_atomic(args.out, buf.getvalue())


def _stem(out) -> str:
    out = str(out)
    for ext in (".json", ".csv"):
        if out.endswith(ext):
            return out[: -len(ext)]
    return out


def cmd_eval(args) -> None:
    train, test, scaled = load_dataset(args)
    top_n = int(args.top_n or evaluation.DEFAULT_TOP_N)
    reports = []
    curves = []
    for path in args.model:
        model = model_store.load_model(path)
        check_compatible(model, test[0], scaled)
        report, db, queries, yte = run_eval(model, train, test, radius=int(args.radius),
                                            top_n=top_n, classifier=args.classifier)
        reports.append(report)
        for row in evaluation.radius_curve(db, queries, yte):
            curves.append([report.method, report.bits, *row])
    stem = _stem(args.out)
    payload = [json.loads(r.to_json()) for r in reports]
    write_atomic(f"{stem}.json", json.dumps(payload[0] if len(payload) == 1 else payload,
                                            indent=2, sort_keys=True) + "\n")
    write_atomic(f"{stem}.csv", evaluation.reports_to_csv(reports))
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["method", "bits", "radius", "precision", "recall", "f_measure"])
    for row in curves:
        writer.writerow([repr(v) if isinstance(v, float) else v for v in row])
    write_atomic(f"{stem}_radius_curve.csv", buf.getvalue())
    for r in reports:
        print(r.to_csv().splitlines()[1])


def cmd_bench(args) -> None:
    methods = parse_methods(args.method)
    bits_list = parse_bits(args.bits)
    train, test, scaled = load_dataset(args)
    top_n = int(args.top_n or evaluation.DEFAULT_TOP_N)
    reports, timings = [], []
    for method in methods:
        for bits in bits_list:
            config = train_config(args, bits)
            t0 = time.perf_counter()
            model = fit(method, *train, config, scaled)
            train_seconds = time.perf_counter() - t0
            report, *_ = run_eval(model, train, test, radius=int(args.radius), top_n=top_n,
                                  classifier=args.classifier)
            reports.append(report)
            timings.append([method, bits, train_seconds, report.timing["test_seconds_per_query"]])
            log.info("%s/%d: map %.4f acc %.4f", method, bits, report.map, report.accuracy)
    stem = _stem(args.out)
    write_atomic(f"{stem}.csv", evaluation.reports_to_csv(reports))
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["method", "bits", "train_seconds", "test_seconds_per_query"])
    writer.writerows(timings)
    write_atomic(f"{stem}_timings.csv", buf.getvalue())
    print(evaluation.reports_to_csv(reports), end="")


# -- parser --------------------------------------------------------------------


def _add_data_flags(p):
    g = p.add_argument_group("data")
    g.add_argument("--data", choices=("mnist", "csv"), help="dataset kind (default mnist)")
    g.add_argument("--data-dir", help="directory holding the four MNIST IDX files")
    g.add_argument("--data-features", help="CSV of feature rows")
    g.add_argument("--data-labels", help="one integer label per line")
    g.add_argument("--data-test-features", help="separate test CSV (skips the random split)")
    g.add_argument("--data-test-labels")
    g.add_argument("--test-count", type=int, help="held-out queries (default 1000)")
    g.add_argument("--split-seed", type=int, help="seed of the train/test split (default 0)")
    p.add_argument("--config", help="JSON file of settings; explicit flags take precedence")


def _add_train_flags(p, multi: bool):
    p.add_argument("--method", nargs="+" if multi else None,
                   help="sdhr, sdh or lsh" + (" (several allowed)" if multi else ""))
    p.add_argument("--bits", nargs="+" if multi else None, help="code length(s) in bits")
    p.add_argument("--lambda", dest="lam", type=float, help="ridge weight (default 1)")
    p.add_argument("--v", type=float, help="code-fit weight (default 1e-5)")
    p.add_argument("--iters", type=int, help="outer iterations (default 5)")
    p.add_argument("--anchors", type=int, help="RBF anchors (default 1000)")
    p.add_argument("--seed", type=int, help="training seed (default 0)")
    p.add_argument("--sigma", type=float, help="override the kernel width heuristic")
    p.add_argument("--tol", type=float, help="relative objective change to stop (default 1e-5)")
    p.add_argument("--sweeps", type=int, help="B-step sweeps per iteration (default 10)")


def _add_eval_flags(p):
    p.add_argument("--radius", type=int, help="Hamming lookup radius (default 2)")
    p.add_argument("--top-n", type=int, help="N of precision@N (default 500)")
    p.add_argument("--classifier", choices=("head", "knn"),
                   help="accuracy from the linear head (default) or 1-NN Hamming vote")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="sdhash", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="verb", required=True)

    p = sub.add_parser("train", help="train a model and write an SDHM file")
    _add_train_flags(p, multi=False)
    _add_data_flags(p)
    p.add_argument("--model", required=True, help="output model path")
    p.add_argument("--log", help="training log (default <model>.log.json)")
    p.add_argument("--codes-out", help="also write the learned training codes (BINC)")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("encode", help="encode a dataset subset into a BINC code file")
    _add_data_flags(p)
    p.add_argument("--model", required=True)
    p.add_argument("--subset", choices=("train", "test", "all"), default="train")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_encode)

    p = sub.add_parser("query", help="search a code database with encoded queries")
    _add_data_flags(p)
    p.add_argument("--model", required=True)
    p.add_argument("--db", help="BINC database (default: encode the training split)")
    p.add_argument("--subset", choices=("train", "test", "all"), default="test")
    p.add_argument("--radius", type=int, help="radius for --radius-lookup (default 2)")
    p.add_argument("--radius-lookup", action="store_true",
                   help="return everything within --radius instead of the top N")
    p.add_argument("--top-n", type=int, help="neighbours per query (default 10)")
    p.add_argument("--out", required=True, help="result CSV")
    p.set_defaults(func=cmd_query)

    p = sub.add_parser("eval", help="retrieval/classification metrics for trained models")
    _add_data_flags(p)
    _add_eval_flags(p)
    p.add_argument("--model", nargs="+", required=True, help="one or more SDHM files")
    p.add_argument("--out", required=True, help="report stem: writes .json, .csv, _radius_curve.csv")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("bench", help="train + evaluate over a method x bits grid")
    _add_train_flags(p, multi=True)
    _add_data_flags(p)
    _add_eval_flags(p)
    p.add_argument("--out", required=True, help="CSV path; timings go to <stem>_timings.csv")
    p.set_defaults(func=cmd_bench)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        resolve(args)
        args.func(args)
    except UsageError as exc:
        parser.error(str(exc))  # exits with status 2
    except (OSError, ValueError, KeyError) as exc:
        print(f"sdhash: error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
