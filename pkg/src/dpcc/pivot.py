"""Private pivot clustering for complete unweighted graphs.

Neighbourhoods in the goodness tests are closed: a node counts itself as
its own positive neighbour when it belongs to the reference set, so a
two-node positive pair can be recovered as a cluster.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .dp import (
    LaplaceNoise,
    PrivacyError,
    PrivacyLedger,
    PrivacyParams,
    compose_advanced,
    compose_basic,
    make_rng,
)
from .graph import COMPLETE, Clustering, GraphError

DEFAULT_LAMBDA = 0.1
NODE_BUDGET_CONSTANT = 8.0

TAG_NOISY_MAX = "noisy-max"
TAG_DEGREE = "degree-estimate"
TAG_BSIZE = "bsize-estimate"
TAG_HESITANT = "pjudge-hesitant"
TAG_CALM = "pjudge-nonhesitant"


@dataclass(frozen=True)
class PivotParams:
    """Thresholds derived from ``(n, epsilon, delta)`` and the max-degree estimate.

    With ``noise=False`` every additive term that scales with ``1/epsilon``
    is dropped (the large-epsilon limit): the degree estimate is exact, the
    singleton threshold and hesitance slack are zero.
    """

    n: int
    epsilon: float
    delta: float
    lam: float
    delta0: float
    noise: bool = True

    @property
    def log_term(self):
        return math.log(self.n / self.delta)

    @property
    def max_degree_bound(self):
        if not self.noise:
            return self.delta0
        return self.delta0 + 10 * self.log_term / self.epsilon

    @property
    def c_l(self):
        return max(1, math.ceil(self.max_degree_bound))

    @property
    def b_good(self):
        return math.sqrt(self.c_l) * self.log_term ** 2

    @property
    def singleton_threshold(self):
        if not self.noise:
            return 0.0
        return 100 * math.sqrt(self.c_l) * self.log_term ** 4 / self.epsilon

    @property
    def large_degree_threshold(self):
        """Pivot degree above which the per-pivot hesitant budget is a hard bound."""
        if not self.noise:
            return 0.0
        return 90 * math.sqrt(self.c_l) * self.log_term ** 4 / self.epsilon

    @property
    def hesitant_slack(self):
        if not self.noise:
            return 0.0
        return 10 * self.b_good * self.log_term / self.epsilon

    @property
    def judge_scale(self):
        return 2 * self.b_good / self.epsilon

    @property
    def estimate_scale(self):
        return 10 / self.epsilon

    @property
    def judge_eps(self):
        return self.epsilon / self.b_good

    @property
    def judge_delta(self):
        return self.delta / self.n ** 4

    def to_dict(self):
        return {
            "n": self.n, "epsilon": self.epsilon, "delta": self.delta, "lambda": self.lam,
            "noise": self.noise, "delta0": self.delta0,
            "max_degree_bound": self.max_degree_bound, "c_l": self.c_l,
            "b_good": self.b_good, "singleton_threshold": self.singleton_threshold,
            "hesitant_slack": self.hesitant_slack,
        }


class ResidualGraph:
    """Positive adjacency of a complete graph plus a mask of live nodes."""

    def __init__(self, g):
        if g.mode != COMPLETE:
            raise GraphError("private pivot needs a complete unweighted graph")
        self.n = g.n
        self.positive = np.array(g.positive)
        self.live = np.ones(g.n, dtype=bool)

    def degree(self, u):
        return int((self.positive[u] & self.live).sum())

    def neighbors(self, u):
        """Live positive neighbours of ``u`` as a boolean mask."""
        return self.positive[u] & self.live

    def delete(self, nodes):
        self.live[np.asarray(list(nodes), dtype=np.int64)] = False

    def live_degrees(self):
        return (self.positive & self.live).sum(axis=1) * self.live

    def neighborhood_edge_counts(self):
        """``R[x]``: live positive edges with an endpoint in ``N+(x)``, for live ``x``."""
        a = (self.positive & self.live & self.live[:, None]).astype(np.float64)
        deg = a.sum(axis=1)
        inside = ((a @ a) * a).sum(axis=1) / 2
        return np.rint(a @ deg - inside).astype(np.int64)


def _as_mask(nodes, n):
    if isinstance(nodes, np.ndarray) and nodes.dtype == bool:
        return nodes
    mask = np.zeros(n, dtype=bool)
    mask[list(nodes)] = True
    return mask


def judge_counts(positive, live, ref, candidates):
    """For each candidate: (closed overlap with ``ref``, live positive neighbours outside ``ref``)."""
    rows = positive[candidates]
    inside = (rows & ref).sum(axis=1) + ref[candidates]
    outside = (rows & live & ~ref).sum(axis=1)
    return inside, outside


def hesitant_mask(inside, outside, size, lam, slack):
    return (inside > (1 - lam) * size - slack) & (outside - lam * size < slack)


def pjudge_good(residual, c, u, b_good, lam, epsilon, rng, *, noise=True, ledger=None,
                slack=None, n=None, delta=None):
    """Noisy test whether ``u`` is ``lam``-good with respect to ``c``.

    Both comparisons get fresh ``Lap(2 b_good / epsilon)`` noise. When a
    ledger is given the call is charged as hesitant (``epsilon / b_good``)
    or not (``delta / n^4``); that needs ``delta`` as well.
    """
    ref = _as_mask(c, residual.n)
    if not ref.any():
        raise GraphError("pjudge_good needs a non-empty reference set")
    if not residual.live[u]:
        raise GraphError(f"node {u} is no longer live")
    draw = LaplaceNoise(rng, enabled=noise)
    size = int(ref.sum())
    inside, outside = judge_counts(residual.positive, residual.live, ref, np.array([u]))
    scale = 2 * b_good / epsilon
    x, y = draw(scale), draw(scale)
    result = bool(inside[0] + x >= (1 - lam) * size and outside[0] <= lam * size + y)
    if ledger is not None:
        n = residual.n if n is None else n
        if delta is None:
            raise PrivacyError("charging a pjudge_good call needs delta")
        if slack is None:
            slack = 10 * b_good * math.log(n / delta) / epsilon
        if hesitant_mask(inside, outside, size, lam, slack)[0]:
            ledger.charge(TAG_HESITANT, epsilon / b_good)
        else:
            ledger.charge(TAG_CALM, 0.0, delta / n ** 4)
    return result


def is_hesitant(residual, s, u, lam, b_good, epsilon, delta, n=None):
    """Noise-free check whether a judge call on ``(s, u)`` is near its decision boundary."""
    ref = _as_mask(s, residual.n)
    if not ref.any():
        raise GraphError("is_hesitant needs a non-empty set")
    n = residual.n if n is None else n
    slack = 10 * b_good * math.log(n / delta) / epsilon
    inside, outside = judge_counts(residual.positive, residual.live, ref, np.array([u]))
    return bool(hesitant_mask(inside, outside, int(ref.sum()), lam, slack)[0])


def _positive_and_live(graph_or_residual):
    if isinstance(graph_or_residual, ResidualGraph):
        return graph_or_residual.positive, graph_or_residual.live
    return graph_or_residual.positive, np.ones(graph_or_residual.n, dtype=bool)


def is_good(graph_or_residual, c, u, lam):
    """Exact ``lam``-goodness of ``u`` with respect to ``c``."""
    positive, live = _positive_and_live(graph_or_residual)
    ref = _as_mask(c, len(live))
    if not ref.any():
        raise GraphError("is_good needs a non-empty set")
    inside, outside = judge_counts(positive, live, ref, np.array([u]))
    size = int(ref.sum())
    return bool(inside[0] >= (1 - lam) * size and outside[0] <= lam * size)


def is_clean(graph_or_residual, c, eta):
    """True when every member of ``c`` is ``eta``-good with respect to ``c``."""
    positive, live = _positive_and_live(graph_or_residual)
    ref = _as_mask(c, len(live))
    if not ref.any():
        raise GraphError("is_clean needs a non-empty set")
    members = np.flatnonzero(ref)
    inside, outside = judge_counts(positive, live, ref, members)
    size = len(members)
    return bool(((inside >= (1 - eta) * size) & (outside <= eta * size)).all())


def cleanup(c, g, threshold):
    """Dissolve every non-singleton cluster of size ``<= threshold`` into singletons."""
    if c.n != g.n:
        raise GraphError("clustering and graph disagree on n")
    sizes = np.bincount(c.labels)
    dissolve = (sizes[c.labels] > 1) & (sizes[c.labels] <= threshold)
    labels = np.where(dissolve, c.k + np.arange(c.n), c.labels)
    return Clustering(labels)


@dataclass
class PivotRecord:
    pivot: int
    degree: int
    d_tilde: int
    b_size: int | None = None
    b_tilde: int | None = None
    d_size: int | None = None
    decision: str = "singleton-degree"
    calls_part_one: int = 0
    calls_part_two: int = 0
    hesitant_part_one: int = 0
    hesitant_part_two: int = 0

    def to_dict(self):
        return dict(self.__dict__)


@dataclass
class PivotDiagnostics:
    params: PivotParams
    true_max_degree: int
    pivots: list = field(default_factory=list)
    node_hesitant_part_one: np.ndarray = None
    node_hesitant_part_two: np.ndarray = None
    r_traces: list = None
    ledger: PrivacyLedger = field(default_factory=PrivacyLedger)
    complete: bool = False

    @property
    def node_hesitant_total(self):
        return self.node_hesitant_part_one + self.node_hesitant_part_two

    @property
    def judge_calls(self):
        return sum(p.calls_part_one + p.calls_part_two for p in self.pivots)

    def node_budget(self):
        return NODE_BUDGET_CONSTANT * self.params.c_l * math.log(self.params.n)

    def budget_violations(self):
        """Pivots over the per-pivot hesitant budget and nodes over the per-node budget."""
        c_l = self.params.c_l
        hard = [p.pivot for p in self.pivots
                if p.hesitant_part_one > 2 * c_l
                and p.degree >= self.params.large_degree_threshold]
        soft_pivots = [p.pivot for p in self.pivots if p.hesitant_part_one > 2 * c_l]
        nodes = np.flatnonzero(self.node_hesitant_total > self.node_budget()).tolist()
        return {"pivot_hard": hard, "pivot": soft_pivots, "node": nodes}

    def r_trace_monotone(self):
        return all(all(b <= a for a, b in zip(tr, tr[1:])) for tr in self.r_traces)

    def to_dict(self):
        return {
            "params": self.params.to_dict(),
            "true_max_degree": self.true_max_degree,
            "pivots": [p.to_dict() for p in self.pivots],
            "hesitant": {
                "part_one_per_node": self.node_hesitant_part_one.tolist(),
                "part_two_per_node": self.node_hesitant_part_two.tolist(),
                "part_one_per_pivot": {str(p.pivot): p.hesitant_part_one for p in self.pivots},
                "node_budget": self.node_budget(),
                "violations": self.budget_violations(),
            },
            "r_traces": self.r_traces,
            "ledger": self.ledger.to_list(),
            "complete": self.complete,
        }

    @classmethod
    def from_dict(cls, data):
        try:
            p = data["params"]
            params = PivotParams(p["n"], p["epsilon"], p["delta"], p["lambda"], p["delta0"],
                                 p["noise"])
            diag = cls(params, data["true_max_degree"])
            diag.pivots = [PivotRecord(**rec) for rec in data["pivots"]]
            hes = data["hesitant"]
            diag.node_hesitant_part_one = np.asarray(hes["part_one_per_node"], dtype=np.int64)
            diag.node_hesitant_part_two = np.asarray(hes["part_two_per_node"], dtype=np.int64)
            diag.r_traces = [list(t) for t in data["r_traces"]]
            diag.ledger = PrivacyLedger.from_list(data["ledger"])
            diag.complete = bool(data["complete"])
        except (KeyError, TypeError) as exc:
            raise GraphError(f"diagnostics missing or malformed field: {exc}") from None
        return diag


def _judge_round(residual, ref, candidates, lam, params, draw, ledger):
    """Evaluate every judge call of one admission loop, in candidate order."""
    size = int(ref.sum())
    inside, outside = judge_counts(residual.positive, residual.live, ref, candidates)
    x = draw(params.judge_scale, size=len(candidates))
    y = draw(params.judge_scale, size=len(candidates))
    verdict = (inside + x >= (1 - lam) * size) & (outside <= lam * size + y)
    hesitant = hesitant_mask(inside, outside, size, lam, params.hesitant_slack)
    for h in hesitant:
        if h:
            ledger.charge(TAG_HESITANT, params.judge_eps)
        else:
            ledger.charge(TAG_CALM, 0.0, params.judge_delta)
    return verdict, hesitant


def _admit(candidates, verdict, budget):
    # literal budget rule: admit while t >= 0, then decrement
    admitted = []
    t = budget
    for u, ok in zip(candidates, verdict):
        if ok and t >= 0:
            admitted.append(int(u))
            t -= 1
    return admitted


def run_private_pivot(g, epsilon, delta, rng_seed, *, lam=DEFAULT_LAMBDA, noise=True,
                      track_r=True):
    """Differentially private pivot clustering of a complete unweighted graph.

    Returns the clustering and a :class:`PivotDiagnostics` audit record.
    Pivots are taken in increasing index order. ``noise=False`` runs the
    same control flow without randomness; its output is not private.
    """
    if g.mode != COMPLETE:
        raise GraphError("run_private_pivot needs a complete unweighted graph")
    PrivacyParams(epsilon, delta).check_algorithm_range()
    n = g.n
    rng = make_rng(rng_seed)
    draw = LaplaceNoise(rng, enabled=noise)
    residual = ResidualGraph(g)
    ledger = PrivacyLedger()

    degrees = residual.live_degrees()
    true_max = int(degrees.max()) if n else 0
    if noise and n:
        delta0 = float((degrees + draw(10 / epsilon, size=n)).max())
    else:
        delta0 = float(true_max)
    params = PivotParams(n, epsilon, delta, lam, delta0, noise)
    ledger.charge(TAG_NOISY_MAX, epsilon / 10)

    diag = PivotDiagnostics(params, true_max, ledger=ledger)
    diag.node_hesitant_part_one = np.zeros(n, dtype=np.int64)
    diag.node_hesitant_part_two = np.zeros(n, dtype=np.int64)
    diag.r_traces = [[] for _ in range(n)]

    labels = np.full(n, -1, dtype=np.int64)
    k = 0
    while residual.live.any():
        if track_r:
            r = residual.neighborhood_edge_counts()
            for x in np.flatnonzero(residual.live):
                diag.r_traces[x].append(int(r[x]))
        v = int(np.argmax(residual.live))
        nbrs = residual.neighbors(v)
        d_v = int(nbrs.sum())
        residual.delete([v])
        d_tilde = max(0, math.ceil(d_v + draw(params.estimate_scale)))
        ledger.charge(TAG_DEGREE, epsilon / 10)
        rec = PivotRecord(pivot=v, degree=d_v, d_tilde=d_tilde)
        diag.pivots.append(rec)
        members = [v]

        if d_tilde > params.singleton_threshold:
            ref = nbrs.copy()
            ref[v] = True
            cands = np.flatnonzero(residual.live)
            verdict, hes = _judge_round(residual, ref, cands, lam, params, draw, ledger)
            rec.calls_part_one = len(cands)
            rec.hesitant_part_one = int(hes.sum())
            diag.node_hesitant_part_one[cands[hes]] += 1
            b = _admit(cands, verdict, 2 * d_tilde)
            rec.b_size = len(b)
            rec.b_tilde = max(0, math.ceil(len(b) + draw(params.estimate_scale)))
            ledger.charge(TAG_BSIZE, epsilon / 10)
            if rec.b_tilde <= 9 * d_tilde / 10:
                rec.decision = "singleton-bsize"
            else:
                b_mask = np.zeros(n, dtype=bool)
                b_mask[b] = True
                cands2 = np.flatnonzero(residual.live & ~b_mask)
                verdict2, hes2 = _judge_round(residual, b_mask, cands2, 4 * lam, params, draw,
                                              ledger)
                rec.calls_part_two = len(cands2)
                rec.hesitant_part_two = int(hes2.sum())
                diag.node_hesitant_part_two[cands2[hes2]] += 1
                d = _admit(cands2, verdict2, 2 * rec.b_tilde)
                rec.d_size = len(d)
                rec.decision = "cluster"
                members = [v] + b + d
                residual.delete(members)

        labels[members] = k
        k += 1

    diag.complete = True
    return Clustering(labels), diag


@dataclass(frozen=True)
class PrivacyReport:
    epsilon_total: float
    delta_total: float
    breakdown: dict
    budget_ok: bool
    flags: list

    def params(self):
        return PrivacyParams(self.epsilon_total, self.delta_total)

    def to_dict(self):
        return {"epsilon_total": self.epsilon_total, "delta_total": self.delta_total,
                "breakdown": self.breakdown, "budget_ok": self.budget_ok, "flags": self.flags}


def _top_two(values):
    return math.fsum(sorted(values, reverse=True)[:2])


def privacy_report(diag, *, delta_tilde_fraction=0.5):
    """Account a completed run against a single changed edge ``(x, y)``.

    * noisy max: its one charge;
    * degree and B-size estimates: an edge changes the counts of at most two
      pivots, so the two largest charges of each kind;
    * hesitant judge calls: the calls touching ``x`` or ``y`` are those of
      their pivots' part-one rounds plus those where they are the judged
      node, bounded by the two largest per-pivot and two largest per-node
      hesitant counts, composed with advanced composition at
      ``delta_tilde = delta_tilde_fraction * delta``;
    * every non-hesitant call contributes ``delta / n^4``, plus one
      ``delta / n^4`` for the event that the hesitant budgets fail.
    """
    if not diag.complete:
        raise PrivacyError("diagnostics describe an incomplete run")
    p = diag.params
    if not p.noise:
        raise PrivacyError("noise-free runs are not private; no report is produced")
    ledger = diag.ledger
    eps_noisy_max = math.fsum(c.eps for c in ledger.by_tag(TAG_NOISY_MAX))
    eps_degree = _top_two(c.eps for c in ledger.by_tag(TAG_DEGREE))
    eps_bsize = _top_two(c.eps for c in ledger.by_tag(TAG_BSIZE))
    scalar = PrivacyLedger()
    for tag, e in (("noisy-max", eps_noisy_max), ("degree", eps_degree), ("bsize", eps_bsize)):
        if e > 0:
            scalar.charge(tag, e)
    eps_scalar = compose_basic(scalar).epsilon

    hesitant_charges = ledger.by_tag(TAG_HESITANT)
    per_call = max((c.eps for c in hesitant_charges), default=p.judge_eps)
    k_pivot = int(_top_two(rec.hesitant_part_one for rec in diag.pivots))
    k_node = int(_top_two(diag.node_hesitant_total.tolist()))
    k = k_pivot + k_node
    delta_tilde = delta_tilde_fraction * p.delta
    hes = PrivacyLedger()
    for _ in range(k):
        hes.charge(TAG_HESITANT, per_call)
    calm = PrivacyLedger()
    for c in ledger.by_tag(TAG_CALM):
        calm.charges.append(c)
    calm.charge("budget-failure", 0.0, p.delta / p.n ** 4)
    adv = compose_advanced(list(hes) + list(calm), delta_tilde)

    violations = diag.budget_violations()
    flags = []
    if violations["pivot"]:
        flags.append(f"per-pivot hesitant budget 2*c_l={2 * p.c_l} exceeded at pivots "
                     f"{violations['pivot']}")
    if violations["node"]:
        flags.append(f"per-node hesitant budget {diag.node_budget():.1f} exceeded at nodes "
                     f"{violations['node']}")
    eps_total = eps_scalar + adv.epsilon
    breakdown = {
        "noisy_max": eps_noisy_max,
        "degree_estimates": eps_degree,
        "bsize_estimates": eps_bsize,
        "hesitant_epsilon": adv.epsilon,
        "hesitant_terms": list(adv.terms),
        "hesitant_calls_charged": k,
        "hesitant_calls_total": len(hesitant_charges),
        "nonhesitant_calls": len(ledger.by_tag(TAG_CALM)),
        "delta_tilde": delta_tilde,
        "charges": len(ledger),
    }
    return PrivacyReport(eps_total, adv.delta, breakdown, not flags, flags)
