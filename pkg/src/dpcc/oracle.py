"""Exact optimum by enumeration, the random-pivot baseline and utility records."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .graph import COMPLETE, Clustering, GraphError, disagreement

BRUTE_FORCE_LIMIT = 11
_CHUNK = 1 << 16


@dataclass(frozen=True)
class OracleResult:
    clustering: Clustering
    value: float
    enumerated: int


def restricted_growth_strings(n):
    """All set partitions of ``n`` items as restricted-growth strings.

    Rows come out in lexicographic order; row ``i`` labels item ``j`` with
    ``rgs[i, j]``.
    """
    if n == 0:
        return np.zeros((1, 0), dtype=np.int8)
    rgs = np.zeros((1, 1), dtype=np.int8)
    top = np.zeros(1, dtype=np.int8)
    for _ in range(1, n):
        counts = top.astype(np.int64) + 2
        parent = np.repeat(np.arange(len(rgs)), counts)
        offsets = np.cumsum(counts) - counts
        value = (np.arange(len(parent)) - np.repeat(offsets, counts)).astype(np.int8)
        rgs = np.concatenate([rgs[parent], value[:, None]], axis=1)
        top = np.maximum(top[parent], value)
    return rgs


def brute_force_opt(g, limit=BRUTE_FORCE_LIMIT):
    """Minimum-disagreement clustering over every set partition.

    Ties go to the first partition in restricted-growth order.
    """
    if g.n > limit:
        raise GraphError(f"brute force limited to n <= {limit}, got n={g.n}")
    rgs = restricted_growth_strings(g.n)
    iu, iv = np.triu_indices(g.n, 1)
    s = g.signed[iu, iv]
    pos, neg = np.maximum(s, 0.0), np.maximum(-s, 0.0)
    best_val, best_idx = math.inf, 0
    for start in range(0, len(rgs), _CHUNK):
        block = rgs[start:start + _CHUNK]
        same = block[:, iu] == block[:, iv]
        vals = np.where(same, neg, pos).sum(axis=1)
        i = int(np.argmin(vals))
        if vals[i] < best_val - 1e-12:
            best_val, best_idx = float(vals[i]), start + i
    best = Clustering(rgs[best_idx].astype(np.int64))
    return OracleResult(best, disagreement(best, g), len(rgs))


def pivot_baseline(g, rng):
    """Classical random-pivot clustering on the positive edges."""
    if g.mode != COMPLETE:
        raise GraphError("pivot_baseline expects a complete unweighted graph")
    return Clustering(random_pivot_labels(g.positive, rng))


def random_pivot_labels(positive, rng):
    """Labels from repeatedly clustering a random live node with its live positive neighbours."""
    n = positive.shape[0]
    live = np.ones(n, dtype=bool)
    labels = np.empty(n, dtype=np.int64)
    k = 0
    while live.any():
        candidates = np.flatnonzero(live)
        v = candidates[rng.integers(len(candidates))]
        members = live & positive[v]
        members[v] = True
        labels[members] = k
        live &= ~members
        k += 1
    return labels


def cluster_cost(nodes, c, g):
    """Weight of violated edges with at least one endpoint in ``nodes``."""
    mask = np.zeros(g.n, dtype=bool)
    mask[list(nodes)] = True
    same = c.same_cluster()
    violated = np.where(same, -g.signed, g.signed) > 0
    touch = mask[:, None] | mask[None, :]
    sel = np.triu(violated & touch, 1)
    return math.fsum(g.weight[sel])


@dataclass(frozen=True)
class UtilityGap:
    dis_alg: float
    dis_reference: float
    excess: float
    additive_budget: float | None

    def to_dict(self):
        return {"dis_alg": self.dis_alg, "dis_reference": self.dis_reference,
                "excess": self.excess, "additive_budget": self.additive_budget}


def additive_budget(n, c_l, epsilon, delta):
    """``n * sqrt(c_l) * log^4(n / delta) / epsilon``."""
    return n * math.sqrt(c_l) * math.log(n / delta) ** 4 / epsilon


def utility_gap(alg, g, reference, *, c_l=None, epsilon=None, delta=None):
    """Compare an algorithm's clustering against a reference.

    ``reference`` may be a :class:`Clustering` (e.g. planted truth) or an
    :class:`OracleResult`.
    """
    if isinstance(reference, OracleResult):
        ref_value = reference.value
    else:
        if reference.n != g.n:
            raise GraphError("reference clustering and graph disagree on n")
        ref_value = disagreement(reference, g)
    d = disagreement(alg, g)
    budget = None
    if c_l is not None and epsilon and delta:
        budget = additive_budget(g.n, c_l, epsilon, delta)
    return UtilityGap(d, ref_value, d - ref_value, budget)
