"""Retrieval and classification metrics for binary codes.

Relevance is label equality between a query and a database item. All
rankings use the (distance, database index) order of :mod:`sdhash.hamming`.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import asdict, dataclass, field

import numpy as np

from .codes import CodeMatrix
from .hamming import CodeDatabase

DEFAULT_RADIUS = 2
DEFAULT_TOP_N = 500

# column order of the metrics CSV; timings are kept out so the file is reproducible
METRIC_COLUMNS = (
    "method",
    "bits",
    "map",
    "precision_r",
    "recall_r",
    "f_measure_r",
    "precision_at_n",
    "accuracy",
    "radius",
    "n_at",
)


def average_precision(ranked_relevance, total_relevant: int) -> float:
    """Mean of precision@p over the positions p holding relevant items, over ``total_relevant``."""
    rel = np.asarray(ranked_relevance, dtype=bool)
    if total_relevant <= 0:
        raise ValueError("average precision is undefined with no relevant items")
    hits = np.flatnonzero(rel)
    if len(hits) > total_relevant:
        raise ValueError("more relevant items in the list than total_relevant")
    if len(hits) == 0:
        return 0.0
    precisions = np.arange(1, len(hits) + 1) / (hits + 1)
    return float(precisions.sum() / total_relevant)


def f_measure(precision: float, recall: float) -> float:
    if precision + recall == 0:
        return 0.0
    return 2.0 * precision * recall / (precision + recall)


def _check(db: CodeDatabase, queries: CodeMatrix, query_labels):
    if db.labels is None:
        raise ValueError("database has no labels")
    if len(db) == 0:
        raise ValueError("empty database")
    if len(queries) == 0:
        raise ValueError("empty query set")
    if len(queries) != len(query_labels):
        raise ValueError(f"{len(queries)} queries but {len(query_labels)} labels")
    if queries.n_bits != db.n_bits:
        raise ValueError(f"query codes have {queries.n_bits} bits, database has {db.n_bits}")
    return np.asarray(query_labels)


def map_over_queries(db: CodeDatabase, queries: CodeMatrix, query_labels) -> float:
    """MAP with every query ranked against the full database.

    A query with no relevant database item scores 0.
    """
    query_labels = _check(db, queries, query_labels)
    aps = np.empty(len(queries))
    for i in range(len(queries)):
        order, _ = db.ranking(queries.packed[i])
        rel = db.labels[order] == query_labels[i]
        total = int(rel.sum())
        aps[i] = average_precision(rel, total) if total else 0.0
    return float(aps.mean())


def radius_metrics(db: CodeDatabase, queries: CodeMatrix, query_labels, r: int = DEFAULT_RADIUS):
    """Hash-lookup precision, recall and F-measure within Hamming radius ``r``.

    Per query: precision = relevant retrieved / retrieved (0 when nothing is
    retrieved), recall = relevant retrieved / relevant in the database
    (0 when nothing is retrieved or nothing is relevant). Both are averaged
    over queries; F is computed from the two means.
    """
    query_labels = _check(db, queries, query_labels)
    if r < 0:
        raise ValueError("radius must be non-negative")
    precision = np.zeros(len(queries))
    recall = np.zeros(len(queries))
    for i in range(len(queries)):
        dist = db.distances(queries.packed[i])
        same = db.labels == query_labels[i]
        within = dist <= r
        retrieved = int(within.sum())
        good = int(np.count_nonzero(within & same))
        if retrieved:
            precision[i] = good / retrieved
        relevant = int(same.sum())
        if relevant:
            recall[i] = good / relevant
    p, rc = float(precision.mean()), float(recall.mean())
    return p, rc, f_measure(p, rc)


def radius_curve(db: CodeDatabase, queries: CodeMatrix, query_labels, max_radius: int | None = None):
    """(radius, precision, recall, f_measure) rows for r = 0 .. max_radius."""
    query_labels = _check(db, queries, query_labels)
    max_radius = db.n_bits if max_radius is None else max_radius
    l = db.n_bits
    # per-query histogram of retrieved / relevant-retrieved counts by distance
    retrieved = np.zeros((len(queries), l + 1))
    good = np.zeros((len(queries), l + 1))
    relevant = np.zeros(len(queries))
    for i in range(len(queries)):
        dist = db.distances(queries.packed[i])
        same = db.labels == query_labels[i]
        retrieved[i] = np.bincount(dist, minlength=l + 1)
        good[i] = np.bincount(dist[same], minlength=l + 1)
        relevant[i] = same.sum()
    retrieved = np.cumsum(retrieved, axis=1)
    good = np.cumsum(good, axis=1)
    rows = []
    for r in range(max_radius + 1):
        with np.errstate(invalid="ignore", divide="ignore"):
            prec = np.where(retrieved[:, r] > 0, good[:, r] / retrieved[:, r], 0.0)
            rec = np.where(relevant > 0, good[:, r] / relevant, 0.0)
        p, rc = float(prec.mean()), float(rec.mean())
        rows.append((r, p, rc, f_measure(p, rc)))
    return rows


def precision_at_n(db: CodeDatabase, queries: CodeMatrix, query_labels, n: int = DEFAULT_TOP_N) -> float:
    """Mean fraction of same-label items among each query's top ``n``."""
    query_labels = _check(db, queries, query_labels)
    if not 1 <= n <= len(db):
        raise ValueError(f"n must be in [1, {len(db)}], got {n}")
    prec = np.empty(len(queries))
    for i in range(len(queries)):
        order, _ = db.ranking(queries.packed[i])
        prec[i] = np.count_nonzero(db.labels[order[:n]] == query_labels[i]) / n
    return float(prec.mean())


def classification_accuracy(predicted, truth) -> float:
    predicted, truth = np.asarray(predicted), np.asarray(truth)
    if predicted.shape != truth.shape:
        raise ValueError(f"length mismatch: {predicted.shape} vs {truth.shape}")
    if predicted.size == 0:
        raise ValueError("no predictions")
    return float(np.mean(predicted == truth))


def knn_vote(db: CodeDatabase, queries: CodeMatrix, k: int = 1) -> np.ndarray:
    """Majority label among each query's ``k`` nearest codes (ties to the lowest label)."""
    if db.labels is None:
        raise ValueError("database has no labels")
    n_labels = int(db.labels.max()) + 1
    out = np.empty(len(queries), dtype=np.int64)
    for i in range(len(queries)):
        order, _ = db.ranking(queries.packed[i])
        out[i] = np.argmax(np.bincount(db.labels[order[:k]], minlength=n_labels))
    return out


@dataclass
class MetricsReport:
    method: str
    bits: int
    map: float
    precision_r: float
    recall_r: float
    f_measure_r: float
    precision_at_n: float
    accuracy: float
    radius: int = DEFAULT_RADIUS
    n_at: int = DEFAULT_TOP_N
    timing: dict = field(default_factory=dict)

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2, sort_keys=True)

    def csv_row(self) -> list:
        return [getattr(self, col) for col in METRIC_COLUMNS]

    def to_csv(self) -> str:
        return reports_to_csv([self])


def reports_to_csv(reports) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(METRIC_COLUMNS)
    for rep in reports:
        writer.writerow([repr(v) if isinstance(v, float) else v for v in rep.csv_row()])
    return buf.getvalue()


def evaluate(db: CodeDatabase, queries: CodeMatrix, query_labels, predicted, *, method: str,
             radius: int = DEFAULT_RADIUS, top_n: int = DEFAULT_TOP_N) -> MetricsReport:
    """Full metric set for one encoded database / query set."""
    p, r, f = radius_metrics(db, queries, query_labels, radius)
    return MetricsReport(
        method=method,
        bits=db.n_bits,
        map=map_over_queries(db, queries, query_labels),
        precision_r=p,
        recall_r=r,
        f_measure_r=f,
        precision_at_n=precision_at_n(db, queries, query_labels, min(top_n, len(db))),
        accuracy=classification_accuracy(predicted, query_labels),
        radius=radius,
        n_at=min(top_n, len(db)),
    )
