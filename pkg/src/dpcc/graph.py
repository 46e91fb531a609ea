"""Signed weighted graphs, clusterings, disagreement and cut distance.

Nodes are dense indices ``0..n-1``. A graph stores three ``n x n`` arrays:
a presence mask, a sign matrix (+1/-1) and a non-negative weight matrix.
Absent pairs carry sign +1 and weight 0 so they never contribute to a sum.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

COMPLETE = "complete"
GENERAL = "general"

EXACT_CUT_LIMIT = 12


class GraphError(ValueError):
    """Raised for malformed graphs, clusterings or edge-list text."""


def _frozen(a):
    a = np.ascontiguousarray(a)
    a.setflags(write=False)
    return a


class SignedGraph:
    """Immutable signed graph with non-negative edge weights."""

    __slots__ = ("n", "mode", "present", "sign", "weight", "_signed")

    def __init__(self, n, present, sign, weight, mode=GENERAL):
        if mode not in (COMPLETE, GENERAL):
            raise GraphError(f"unknown mode {mode!r}")
        present = np.asarray(present, dtype=bool)
        sign = np.asarray(sign, dtype=np.int8)
        weight = np.asarray(weight, dtype=np.float64)
        for name, a in (("present", present), ("sign", sign), ("weight", weight)):
            if a.shape != (n, n):
                raise GraphError(f"{name} has shape {a.shape}, expected {(n, n)}")
        if present.diagonal().any():
            raise GraphError("self-loops are not allowed")
        if not (np.array_equal(present, present.T) and np.array_equal(sign, sign.T)
                and np.array_equal(weight, weight.T)):
            raise GraphError("edge arrays must be symmetric")
        if (weight < 0).any() or not np.isfinite(weight).all():
            raise GraphError("edge weights must be finite and non-negative")
        if not np.isin(sign, (-1, 1)).all():
            raise GraphError("signs must be +1 or -1")
        sign = np.where(present, sign, 1).astype(np.int8)
        weight = np.where(present, weight, 0.0)
        if mode == COMPLETE:
            off = ~np.eye(n, dtype=bool)
            if not present[off].all() or not (weight[off] == 1.0).all():
                raise GraphError("complete mode needs every pair present with weight 1")
        self.n = int(n)
        self.mode = mode
        self.present = _frozen(present)
        self.sign = _frozen(sign)
        self.weight = _frozen(weight)
        self._signed = _frozen(sign * weight)

    # constructors

    @classmethod
    def complete(cls, positive):
        """Complete unweighted graph from a boolean matrix of positive pairs."""
        positive = np.asarray(positive, dtype=bool)
        n = positive.shape[0]
        present = ~np.eye(n, dtype=bool)
        sign = np.where(positive & present, 1, -1)
        np.fill_diagonal(sign, 1)
        return cls(n, present, sign, present.astype(np.float64), mode=COMPLETE)

    @classmethod
    def from_signed_weights(cls, signed, present=None):
        """General graph from a symmetric matrix of signed weights ``sign * weight``."""
        signed = np.asarray(signed, dtype=np.float64)
        n = signed.shape[0]
        if present is None:
            present = signed != 0
        present = np.asarray(present, dtype=bool).copy()
        np.fill_diagonal(present, False)
        sign = np.where(signed < 0, -1, 1)
        return cls(n, present, sign, np.abs(signed) * present, mode=GENERAL)

    @classmethod
    def from_edges(cls, n, edges, mode=GENERAL):
        """Build from ``(u, v, sign, weight)`` tuples.

        In complete mode unlisted pairs are positive with weight 1.
        """
        if mode == COMPLETE:
            present = ~np.eye(n, dtype=bool)
            sign = np.ones((n, n), dtype=np.int8)
            weight = present.astype(np.float64)
        else:
            present = np.zeros((n, n), dtype=bool)
            sign = np.ones((n, n), dtype=np.int8)
            weight = np.zeros((n, n))
        seen = set()
        for u, v, s, w in edges:
            if u == v:
                raise GraphError(f"self-loop at node {u}")
            if not (0 <= u < n and 0 <= v < n):
                raise GraphError(f"node index out of range in edge ({u}, {v})")
            if w < 0:
                raise GraphError(f"negative weight on edge ({u}, {v})")
            key = (min(u, v), max(u, v))
            if key in seen:
                raise GraphError(f"duplicate edge ({u}, {v})")
            seen.add(key)
            present[u, v] = present[v, u] = True
            sign[u, v] = sign[v, u] = s
            weight[u, v] = weight[v, u] = w
        return cls(n, present, sign, weight, mode=mode)

    # accessors

    @property
    def signed(self):
        """Matrix of ``sigma_e * w(e)``; zero on the diagonal and absent pairs."""
        return self._signed

    @property
    def positive(self):
        """Boolean matrix of positive edges with non-zero weight."""
        return self._signed > 0

    @property
    def negative(self):
        return self._signed < 0

    @property
    def total_weight(self):
        return math.fsum(self.weight[np.triu_indices(self.n, 1)])

    def edges(self):
        """Present edges as ``(u, v, sign, weight)`` with ``u < v``."""
        iu, iv = np.nonzero(np.triu(self.present, 1))
        return [(int(u), int(v), int(self.sign[u, v]), float(self.weight[u, v]))
                for u, v in zip(iu, iv)]

    def positive_degrees(self):
        return self.positive.sum(axis=1)

    def __eq__(self, other):
        if not isinstance(other, SignedGraph):
            return NotImplemented
        return (self.n == other.n and self.mode == other.mode
                and np.array_equal(self.present, other.present)
                and np.array_equal(self.sign, other.sign)
                and np.array_equal(self.weight, other.weight))

    def __hash__(self):
        return hash((self.n, self.mode, self.present.tobytes(), self.sign.tobytes(),
                     self.weight.tobytes()))

    def __repr__(self):
        m = int(np.triu(self.present, 1).sum())
        return f"SignedGraph(n={self.n}, mode={self.mode}, edges={m})"


def canonical_labels(labels):
    """Renumber cluster ids by first occurrence: ``[7, 7, 2] -> [0, 0, 1]``."""
    labels = np.asarray(labels)
    _, first, inverse = np.unique(labels, return_index=True, return_inverse=True)
    rank = np.empty(len(first), dtype=np.int64)
    rank[np.argsort(first, kind="stable")] = np.arange(len(first))
    return rank[inverse.reshape(-1)]


@dataclass(frozen=True, eq=False)
class Clustering:
    """A partition of ``0..n-1`` stored as canonical cluster labels."""

    labels: np.ndarray

    def __post_init__(self):
        labels = np.asarray(self.labels)
        if labels.ndim != 1:
            raise GraphError("cluster labels must be one-dimensional")
        object.__setattr__(self, "labels", _frozen(canonical_labels(labels)))

    @classmethod
    def from_clusters(cls, clusters, n=None):
        clusters = [list(c) for c in clusters]
        members = [u for c in clusters for u in c]
        if n is None:
            n = len(members)
        if sorted(members) != list(range(n)):
            raise GraphError("clusters must cover every node exactly once")
        labels = np.empty(n, dtype=np.int64)
        for k, c in enumerate(clusters):
            labels[c] = k
        return cls(labels)

    @classmethod
    def singletons(cls, n):
        return cls(np.arange(n))

    @classmethod
    def single(cls, n):
        return cls(np.zeros(n, dtype=np.int64))

    @property
    def n(self):
        return len(self.labels)

    @property
    def k(self):
        return int(self.labels.max()) + 1 if self.n else 0

    @property
    def clusters(self):
        """Clusters as sorted node lists, ordered by smallest member."""
        out = [[] for _ in range(self.k)]
        for u, c in enumerate(self.labels):
            out[c].append(u)
        return out

    @property
    def singleton_set(self):
        sizes = np.bincount(self.labels, minlength=self.k)
        return {u for u, c in enumerate(self.labels) if sizes[c] == 1}

    def same_cluster(self):
        return self.labels[:, None] == self.labels[None, :]

    def __eq__(self, other):
        if not isinstance(other, Clustering):
            return NotImplemented
        return np.array_equal(self.labels, other.labels)

    def __hash__(self):
        return hash(self.labels.tobytes())

    def __repr__(self):
        return f"Clustering({self.clusters})"


def _check_nodes(c, g):
    if c.n != g.n:
        raise GraphError(f"clustering has {c.n} nodes but graph has {g.n}")


def disagreement(c, g):
    """Total weight of positive edges cut plus negative edges kept together."""
    _check_nodes(c, g)
    same = c.same_cluster()
    s = g.signed
    violated = np.where(same, -s, s)
    iu = np.triu_indices(g.n, 1)
    v = violated[iu]
    return math.fsum(v[v > 0])


def agreement(c, g):
    return g.total_weight - disagreement(c, g)


def disagreement_many(labels, g):
    """Disagreement for each row of a ``(m, n)`` label array (float64 sums)."""
    labels = np.asarray(labels)
    iu, iv = np.triu_indices(g.n, 1)
    s = g.signed[iu, iv]
    pos = np.maximum(s, 0.0)
    neg = np.maximum(-s, 0.0)
    same = labels[:, iu] == labels[:, iv]
    return np.where(same, neg, pos).sum(axis=1)


def neighbor_distance(g, h):
    """L1 distance between the signed-weight vectors of two graphs."""
    if g.n != h.n:
        raise GraphError(f"node counts differ: {g.n} vs {h.n}")
    iu = np.triu_indices(g.n, 1)
    return math.fsum(np.abs(g.signed[iu] - h.signed[iu]))


def _as_mask(nodes, n):
    mask = np.zeros(n, dtype=bool)
    for u in nodes:
        if not 0 <= u < n:
            raise GraphError(f"node index {u} out of range for n={n}")
        mask[u] = True
    return mask


def cut_weight(g, s, t):
    """``sum_{u in s, v in t, u != v} w(u, v)`` over ordered pairs.

    An edge with both endpoints in ``s & t`` is counted twice.
    """
    ms, mt = _as_mask(s, g.n), _as_mask(t, g.n)
    return float(ms.astype(float) @ g.weight @ mt.astype(float))


def _cut_diff_matrix(g, h, signed=False):
    if g.n != h.n:
        raise GraphError(f"node counts differ: {g.n} vs {h.n}")
    if signed:
        return g.signed - h.signed
    return g.weight - h.weight


def _subset_matrix(n):
    # rows enumerate all 2^n subsets as 0/1 indicator vectors
    idx = np.arange(2 ** n, dtype=np.int64)[:, None]
    return ((idx >> np.arange(n)) & 1).astype(np.float64)


def cut_distance_exact(g, h, limit=EXACT_CUT_LIMIT, signed=False):
    """Exact ``max_{S,T} |w_g(S,T) - w_h(S,T)|``.

    For a fixed S the best T takes either all nodes with a positive column
    sum or all with a negative one, so only the 2^n choices of S are scanned.
    ``signed=True`` measures ``sign * weight`` instead of the weight.
    """
    d = _cut_diff_matrix(g, h, signed)
    n = g.n
    if n > limit:
        raise GraphError(f"exact cut distance limited to n <= {limit}, got n={n}")
    if n == 0:
        return 0.0
    cols = _subset_matrix(n) @ d
    best_pos = np.where(cols > 0, cols, 0.0).sum(axis=1).max()
    best_neg = -np.where(cols < 0, cols, 0.0).sum(axis=1).min()
    return float(max(best_pos, best_neg))


def cut_distance_lower_bound(g, h, restarts=20, rng_seed=0, signed=False):
    """Lower bound on the cut distance by alternating best responses.

    Each restart draws a random S, then alternately picks the optimal T for
    S and the optimal S for T (for both signs of the difference) until the
    value stops improving. Every value reported is attained by a concrete
    pair, so the result never exceeds the exact cut distance.
    """
    d = _cut_diff_matrix(g, h, signed)
    n = g.n
    if n == 0 or not d.any():
        return 0.0
    rng = np.random.default_rng(rng_seed)
    best = 0.0
    for _ in range(restarts):
        s0 = (rng.random(n) < 0.5).astype(float)
        for direction in (1.0, -1.0):
            dd = direction * d
            s = s0.copy()
            value = -np.inf
            while True:
                col = s @ dd
                t = (col > 0).astype(float)
                row = dd @ t
                s = (row > 0).astype(float)
                new = float(s @ dd @ t)
                if new <= value + 1e-12:
                    break
                value = new
            best = max(best, value)
    return float(best)


def split_signed(g):
    """Split into (positive part, negative part) general graphs."""
    pos = g.present & (g.sign > 0)
    neg = g.present & (g.sign < 0)
    ones = np.ones((g.n, g.n), dtype=np.int8)
    gp = SignedGraph(g.n, pos, ones, np.where(pos, g.weight, 0.0), mode=GENERAL)
    gn = SignedGraph(g.n, neg, -ones, np.where(neg, g.weight, 0.0), mode=GENERAL)
    return gp, gn


def combine_signed(gp, gn, mode=GENERAL):
    """Inverse of :func:`split_signed`."""
    present = gp.present | gn.present
    if (gp.present & gn.present).any():
        raise GraphError("positive and negative parts overlap")
    sign = np.where(gn.present, -1, 1)
    weight = gp.weight + gn.weight
    return SignedGraph(gp.n, present, sign, weight, mode=mode)


def generate_planted(n, cluster_sizes, flip_prob, rng_seed):
    """Complete graph agreeing with a planted partition, each sign flipped w.p. ``flip_prob``."""
    cluster_sizes = [int(s) for s in cluster_sizes]
    if sum(cluster_sizes) != n or any(s <= 0 for s in cluster_sizes):
        raise GraphError(f"cluster sizes {cluster_sizes} do not sum to n={n}")
    if not 0.0 <= flip_prob <= 1.0:
        raise GraphError(f"flip probability {flip_prob} outside [0, 1]")
    rng = np.random.default_rng(rng_seed)
    labels = np.repeat(np.arange(len(cluster_sizes)), cluster_sizes)
    positive = labels[:, None] == labels[None, :]
    flips = np.triu(rng.random((n, n)) < flip_prob, 1)
    flips = flips | flips.T
    return SignedGraph.complete(positive ^ flips), Clustering(labels)


def random_signed_graph(n, rng, density=1.0, p_positive=0.5, weighted=True):
    """Random general graph for tests and audits."""
    present = np.triu(rng.random((n, n)) < density, 1)
    signs = np.where(rng.random((n, n)) < p_positive, 1, -1)
    weights = rng.random((n, n)) * 2.0 if weighted else np.ones((n, n))
    signed = np.triu(np.where(present, signs * weights, 0.0), 1)
    present = present | present.T
    return SignedGraph.from_signed_weights(signed + signed.T, present=present)


# edge-list text format


def serialize_edge_list(g):
    """Text form: header ``n=<n> mode=<mode>`` then ``u v +|- weight`` lines.

    Complete graphs list only their negative edges.
    """
    lines = [f"n={g.n} mode={g.mode}"]
    for u, v, s, w in g.edges():
        if g.mode == COMPLETE and s > 0:
            continue
        lines.append(f"{u} {v} {'+' if s > 0 else '-'} {w!r}")
    return "\n".join(lines) + "\n"


def parse_edge_list(text):
    """Parse the edge-list format; errors name the offending line number."""
    header = None
    edges = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if header is None:
            fields = dict(tok.split("=", 1) for tok in line.split() if "=" in tok)
            try:
                n = int(fields["n"])
                mode = fields.get("mode", GENERAL)
            except (KeyError, ValueError):
                raise GraphError(f"line {lineno}: bad header {raw!r}") from None
            if mode not in (COMPLETE, GENERAL) or n < 0:
                raise GraphError(f"line {lineno}: bad header {raw!r}")
            header = (n, mode)
            continue
        parts = line.split()
        if len(parts) != 4 or parts[2] not in ("+", "-"):
            raise GraphError(f"line {lineno}: expected '<u> <v> <+|-> <weight>', got {raw!r}")
        try:
            u, v, w = int(parts[0]), int(parts[1]), float(parts[3])
        except ValueError:
            raise GraphError(f"line {lineno}: malformed numbers in {raw!r}") from None
        s = 1 if parts[2] == "+" else -1
        n, mode = header
        if u == v:
            raise GraphError(f"line {lineno}: self-loop at node {u}")
        if not (0 <= u < n and 0 <= v < n):
            raise GraphError(f"line {lineno}: node index out of range")
        if w < 0 or not math.isfinite(w):
            raise GraphError(f"line {lineno}: weight must be finite and non-negative")
        if mode == COMPLETE and (s > 0 or w != 1.0):
            raise GraphError(f"line {lineno}: complete mode lists only '- 1' edges")
        edges.append((lineno, u, v, s, w))
    if header is None:
        raise GraphError("line 1: missing 'n=<int> mode=<complete|general>' header")
    n, mode = header
    seen = {}
    for lineno, u, v, _, _ in edges:
        key = (min(u, v), max(u, v))
        if key in seen:
            raise GraphError(f"line {lineno}: duplicate edge ({u}, {v}), first on line {seen[key]}")
        seen[key] = lineno
    return SignedGraph.from_edges(n, [e[1:] for e in edges], mode=mode)


def serialize_clustering(c):
    return "".join(" ".join(map(str, cl)) + "\n" for cl in c.clusters)


def parse_clustering(text, n=None):
    clusters = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        try:
            clusters.append([int(tok) for tok in line.split()])
        except ValueError:
            raise GraphError(f"line {lineno}: non-integer node in {raw!r}") from None
    return Clustering.from_clusters(clusters, n)

