"""Evaluation: association accuracy, co-association accumulation,
classification metrics, parameter recovery error, and held-out likelihood."""

from __future__ import annotations

import itertools
import logging
from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp

from .errors import ContractError
from .models import LocalModelSpec, data_log_likelihood
from .reports import RoundReport

logger = logging.getLogger(__name__)

EXHAUSTIVE_MATCH_LIMIT = 6


def _match_pairs(table: np.ndarray, maximize: bool) -> list[tuple[int, int]]:
    """Injective row/column pairing optimizing the summed table entries.

    Exhaustive over permutations up to EXHAUSTIVE_MATCH_LIMIT rows/columns,
    greedy beyond that (the crossover is logged).
    """
    rows, cols = table.shape
    sign = 1.0 if maximize else -1.0
    if max(rows, cols) <= EXHAUSTIVE_MATCH_LIMIT:
        best_val, best_pairs = -np.inf, []
        if rows <= cols:
            for perm in itertools.permutations(range(cols), rows):
                val = sign * sum(table[i, perm[i]] for i in range(rows))
                if val > best_val:
                    best_val = val
                    best_pairs = [(i, perm[i]) for i in range(rows)]
        else:
            for perm in itertools.permutations(range(rows), cols):
                val = sign * sum(table[perm[j], j] for j in range(cols))
                if val > best_val:
                    best_val = val
                    best_pairs = [(perm[j], j) for j in range(cols)]
        return best_pairs
    logger.info("matching %dx%d table greedily (exhaustive limit is %d)",
                rows, cols, EXHAUSTIVE_MATCH_LIMIT)
    work = sign * table.astype(float)
    pairs: list[tuple[int, int]] = []
    for _ in range(min(rows, cols)):
        i, j = np.unravel_index(int(np.argmax(work)), work.shape)
        if not np.isfinite(work[i, j]):
            break
        pairs.append((int(i), int(j)))
        work[i, :] = -np.inf
        work[:, j] = -np.inf
    return pairs


def association_accuracy(report: RoundReport, truth) -> float:
    """Weight-averaged, cluster-relabeling-invariant share of correctly
    grouped clients."""
    truth = [int(t) for t in truth]
    g = max(truth) + 1
    total = 0.0
    for labels, weight in zip(report.assignments, report.weights):
        if len(labels) != len(truth):
            raise ContractError("assignment length must match the client count")
        k = max(max(labels) + 1, 1)
        table = np.zeros((k, g))
        for lab, t in zip(labels, truth):
            table[lab, t] += 1
        pairs = _match_pairs(table, maximize=True)
        matched = sum(table[i, j] for i, j in pairs)
        total += weight * matched / len(truth)
    return float(total)


@dataclass(frozen=True)
class CoAssociationMatrix:
    """Accumulated probability that two clients share a cluster."""

    entries: np.ndarray
    rounds_accumulated: int = 0

    def __post_init__(self):
        entries = np.array(self.entries, dtype=float)
        if entries.ndim != 2 or entries.shape[0] != entries.shape[1]:
            raise ContractError("co-association matrix must be square")
        if float(np.max(np.abs(entries - entries.T))) > 1e-12:
            raise ContractError("co-association matrix must be symmetric")
        entries.flags.writeable = False
        object.__setattr__(self, "entries", entries)

    @classmethod
    def empty(cls, client_count: int) -> "CoAssociationMatrix":
        return cls(np.zeros((client_count, client_count)), 0)


def accumulate_coassociation(matrix: CoAssociationMatrix,
                             report: RoundReport) -> CoAssociationMatrix:
    """Add one round: each hypothesis contributes its weight to every client
    pair (including self-pairs) that shares a cluster label."""
    c = matrix.entries.shape[0]
    out = matrix.entries.copy()
    for labels, weight in zip(report.assignments, report.weights):
        if len(labels) != c:
            raise ContractError("report client count does not match the matrix")
        lab = np.asarray(labels)
        same = lab[:, None] == lab[None, :]
        out += weight * same
    return CoAssociationMatrix(out, matrix.rounds_accumulated + 1)


def classification_metrics(predictions, labels,
                           label_count: int | None = None) -> tuple[float, float]:
    """(micro accuracy, macro F1). Classes without support contribute F1=0."""
    preds = np.asarray(predictions, dtype=int)
    labs = np.asarray(labels, dtype=int)
    if preds.shape != labs.shape or preds.size == 0:
        raise ContractError("predictions and labels must be nonempty and equal length")
    n_classes = label_count if label_count is not None \
        else int(max(preds.max(), labs.max())) + 1
    micro = float(np.mean(preds == labs))
    f1s = []
    for c in range(n_classes):
        tp = int(np.sum((preds == c) & (labs == c)))
        fp = int(np.sum((preds == c) & (labs != c)))
        fn = int(np.sum((preds != c) & (labs == c)))
        f1s.append(0.0 if 2 * tp + fp + fn == 0 else 2 * tp / (2 * tp + fp + fn))
    return micro, float(np.mean(f1s))


def parameter_rmse(report: RoundReport, true_params) -> float:
    """Weight-averaged RMSE between matched cluster means and true group
    parameters (best injective matching per hypothesis)."""
    truth = np.atleast_2d(np.asarray(true_params, dtype=float))
    dim = truth.shape[1]
    total = 0.0
    for means, weight in zip(report.cluster_means, report.weights):
        m = np.asarray(means, dtype=float)
        if m.shape[1] != dim:
            raise ContractError("cluster mean dimension does not match true parameters")
        sq = ((m[:, None, :] - truth[None, :, :]) ** 2).sum(axis=2)
        pairs = _match_pairs(sq, maximize=False)
        if not pairs:
            continue
        mse = float(np.mean([sq[i, j] for i, j in pairs])) / dim
        total += weight * float(np.sqrt(mse))
    return float(total)


def heldout_log_likelihood(report: RoundReport, test_sets,
                           spec: LocalModelSpec) -> float:
    """Client-mean of log sum_h w_h p(D_test | assigned cluster mean of h)."""
    log_w = np.log(np.maximum(np.asarray(report.weights, dtype=float), 1e-300))
    per_client = []
    for j, data in enumerate(test_sets):
        terms = []
        for h, labels in enumerate(report.assignments):
            mean = np.asarray(report.cluster_means[h][labels[j]], dtype=float)
            terms.append(log_w[h] + data_log_likelihood(mean, data, spec))
        per_client.append(logsumexp(np.asarray(terms)))
    return float(np.mean(per_client))


def coassociation_to_csv(matrix: CoAssociationMatrix, path) -> None:
    with open(path, "w") as fh:
        for row in matrix.entries:
            fh.write(",".join(repr(float(v)) for v in row) + "\n")


def coassociation_from_report_log(reports: list[RoundReport]) -> CoAssociationMatrix:
    if not reports:
        raise ContractError("no reports to accumulate")
    c = len(reports[0].assignments[0])
    matrix = CoAssociationMatrix.empty(c)
    for rep in reports:
        matrix = accumulate_coassociation(matrix, rep)
    return matrix
