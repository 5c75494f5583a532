"""Client-to-cluster assignment under the one-cluster-per-client constraint.

Because each client independently picks exactly one cluster, the total cost of
an assignment separates across clients, so the optimum is the per-client
argmin and the M best assignments come from a best-first search over
per-client deviations (no general rectangular solver needed). A linear-time
single-substitution heuristic is provided alongside the exact ranking.
"""

from __future__ import annotations

import heapq
import itertools
from dataclasses import dataclass

import numpy as np

from .errors import ContractError


@dataclass(frozen=True)
class CostMatrix:
    """C x K matrix of negative log association weights."""

    entries: np.ndarray

    def __post_init__(self):
        entries = np.array(self.entries, dtype=float)
        if entries.ndim != 2 or entries.size == 0:
            raise ContractError("cost matrix must be a nonempty 2-D array")
        if not np.all(np.isfinite(entries)):
            raise ContractError("cost matrix entries must be finite")
        entries.flags.writeable = False
        object.__setattr__(self, "entries", entries)

    @property
    def client_count(self) -> int:
        return self.entries.shape[0]

    @property
    def cluster_count(self) -> int:
        return self.entries.shape[1]


@dataclass(frozen=True)
class Assignment:
    """One cluster label per client (the vector form of a binary assignment matrix)."""

    labels: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "labels", tuple(int(v) for v in self.labels))
        if any(v < 0 for v in self.labels):
            raise ContractError("labels must be nonnegative")

    def __len__(self) -> int:
        return len(self.labels)

    def as_matrix(self, cluster_count: int) -> np.ndarray:
        a = np.zeros((len(self.labels), cluster_count), dtype=int)
        for j, i in enumerate(self.labels):
            a[j, i] = 1
        return a


@dataclass(frozen=True)
class RankedAssignments:
    """Assignments with their total costs, nondecreasing in cost."""

    items: tuple[tuple[Assignment, float], ...]

    def __post_init__(self):
        object.__setattr__(self, "items", tuple(self.items))
        costs = [c for _, c in self.items]
        if any(b < a for a, b in zip(costs, costs[1:])):
            raise ContractError("costs must be nondecreasing")
        if len({a.labels for a, _ in self.items}) != len(self.items):
            raise ContractError("duplicate assignments in ranking")

    def __len__(self) -> int:
        return len(self.items)

    def __iter__(self):
        return iter(self.items)

    def __getitem__(self, idx):
        return self.items[idx]


def build_cost_matrix(local_log_weights: np.ndarray) -> CostMatrix:
    """Negate per-client log weights. The hypothesis-level log-prior term is
    added later at hypothesis ranking, not folded into the matrix."""
    w = np.asarray(local_log_weights, dtype=float)
    if not np.all(np.isfinite(w)):
        raise ContractError("log weights must be finite")
    return CostMatrix(-w)


def _total_cost(entries: np.ndarray, labels: tuple[int, ...]) -> float:
    return float(entries[np.arange(len(labels)), list(labels)].sum())


def best_assignment(L: CostMatrix) -> tuple[Assignment, float]:
    """Per-client argmin; ties go to the lowest cluster index."""
    labels = tuple(int(i) for i in np.argmin(L.entries, axis=1))
    return Assignment(labels), _total_cost(L.entries, labels)


def m_best_exact(L: CostMatrix, M: int) -> RankedAssignments:
    """The min(M, K^C) cheapest assignments in exact nondecreasing cost order.

    Best-first search over per-client rank vectors: each client's costs are
    sorted once, the search starts from everyone at rank 0 (the optimum) and
    expands one rank increment at a time. Exact because the cost separates
    across clients. Ties order lexicographically by labels.
    """
    if M < 1:
        raise ContractError("M must be >= 1")
    entries = L.entries
    C, K = entries.shape
    # per client: cluster indices sorted by (cost, cluster index)
    order = [sorted(range(K), key=lambda i: (entries[j, i], i)) for j in range(C)]

    def labels_of(ranks: tuple[int, ...]) -> tuple[int, ...]:
        return tuple(order[j][r] for j, r in enumerate(ranks))

    start = (0,) * C
    start_labels = labels_of(start)
    heap = [(_total_cost(entries, start_labels), start_labels, start)]
    seen = {start}
    collected: list[tuple[tuple[int, ...], float]] = []
    budget = min(M, K**C)
    while heap and len(collected) < budget:
        cost, labels, ranks = heapq.heappop(heap)
        collected.append((labels, cost))
        for j in range(C):
            if ranks[j] + 1 < K:
                nxt = ranks[:j] + (ranks[j] + 1,) + ranks[j + 1:]
                if nxt not in seen:
                    seen.add(nxt)
                    nxt_labels = labels_of(nxt)
                    heapq.heappush(heap, (_total_cost(entries, nxt_labels), nxt_labels, nxt))
    collected.sort(key=lambda item: (item[1], item[0]))
    return RankedAssignments(tuple((Assignment(lbl), cost) for lbl, cost in collected))


def m_best_heuristic(L: CostMatrix, M: int) -> RankedAssignments:
    """Linear-time approximate ranking: the optimum plus single-client label
    substitutions, ordered by cost. O(M*C*K); never beats m_best_exact at any
    rank. Returns min(M, 1 + C*(K-1)) items."""
    if M < 1:
        raise ContractError("M must be >= 1")
    entries = L.entries
    C, K = entries.shape
    best, base_cost = best_assignment(L)
    pool = [(base_cost, best.labels)]
    for j in range(C):
        for i in range(K):
            if i == best.labels[j]:
                continue
            labels = best.labels[:j] + (i,) + best.labels[j + 1:]
            pool.append((_total_cost(entries, labels), labels))
    pool.sort(key=lambda item: (item[0], item[1]))
    kept = pool[:min(M, len(pool))]
    return RankedAssignments(tuple((Assignment(lbl), cost) for cost, lbl in kept))


def count_hypotheses_unconstrained(K: int, C: int) -> int:
    """Association count when every cluster independently picks any client
    subset: each of the K clusters has 2^C subsets, i.e. 2^(C*K)."""
    if K < 1 or C < 1:
        raise ContractError("K and C must be >= 1")
    return 1 << (C * K)


def count_hypotheses_constrained(K: int, C: int) -> int:
    """Association count under exactly-one-cluster-per-client: K^C."""
    if K < 1 or C < 1:
        raise ContractError("K and C must be >= 1")
    return K**C


def enumerate_assignments(K: int, C: int):
    """All K^C assignments in lexicographic label order (oracle helper)."""
    if K < 1 or C < 1:
        raise ContractError("K and C must be >= 1")
    if K**C > 10**6:
        raise ContractError("refusing to enumerate more than 1e6 assignments")
    for labels in itertools.product(range(K), repeat=C):
        yield Assignment(labels)
