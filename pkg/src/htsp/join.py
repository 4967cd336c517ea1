"""Fractional odd-join construction with flow-routed charging.

Start from a quarter on every edge (half of each edge's fractional value).
An edge settled at a piece where the sampled tree left both its endpoints
even (or both canonical cuts evenly crossed) can afford a reduction; a
per-edge coin flattens the reduction probability down to the guaranteed
even-at-last lower bound for its class.  Reductions can push min-cuts at
lower hierarchy levels below one when those cuts are crossed oddly, so
each deficient cut is repaid by charging the cut's internal edges: degree
cuts split the repayment by a max-flow assignment, canonical cuts split it
evenly between the two partner edges.  Partner edges share one coin, so a
single repayment covers both of their canonical cuts at once.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Optional, Sequence

import numpy as np

from .errors import (
    EstimateBelowBound,
    FeasibilityViolation,
    FlowInfeasible,
    OddSetTooLarge,
)
from .graph import HalfIntegralInstance
from .hierarchy import CutHierarchy, CutView, min_cuts_via_hierarchy
from .pipeline import PieceSampler

QUARTER = Fraction(1, 4)
FLOOR = Fraction(1, 6)

#: guaranteed even-at-last lower bounds per sampler route
EAL_BOUND_MI = {
    "special": Fraction(1, 36),
    "half-special": Fraction(1, 21),
    "other": Fraction(1, 18),
}
EAL_BOUND_MAXENT = {
    "special": Fraction(128, 6561),
    "half-special": Fraction(4, 27),
    "other": Fraction(1, 12),
}


@dataclass(frozen=True)
class ReductionParams:
    """Reduction amounts, the sampler mix, and the flattened coin rates."""

    tau: Fraction
    gamma: Fraction
    beta: Fraction
    mix_lambda: Fraction

    def __post_init__(self):
        if not (0 <= self.tau <= self.gamma <= self.beta <= Fraction(1, 12)):
            raise ValueError("need 0 <= tau <= gamma <= beta <= 1/12")
        if self.beta < 2 * self.tau or self.beta < 2 * self.gamma:
            raise ValueError("need beta >= 2*tau and beta >= 2*gamma")
        if not 0 <= self.mix_lambda <= 1:
            raise ValueError("mix_lambda must be in [0, 1]")

    @classmethod
    def default(cls, mix_lambda: Fraction = Fraction(4715, 10000)) -> "ReductionParams":
        return cls(
            tau=Fraction(23, 648),
            gamma=Fraction(13, 324),
            beta=Fraction(1, 12),
            mix_lambda=Fraction(mix_lambda),
        )

    @property
    def p_special(self) -> Fraction:
        lam = self.mix_lambda
        return lam * EAL_BOUND_MAXENT["special"] + (1 - lam) * EAL_BOUND_MI["special"]

    @property
    def p_half_special(self) -> Fraction:
        # the max-entropy route does not need a separate half-special bound
        lam = self.mix_lambda
        return lam * EAL_BOUND_MAXENT["other"] + (1 - lam) * EAL_BOUND_MI["half-special"]

    @property
    def p_other(self) -> Fraction:
        lam = self.mix_lambda
        return lam * EAL_BOUND_MAXENT["other"] + (1 - lam) * EAL_BOUND_MI["other"]

    def coin_bound(self, kind: str) -> Fraction:
        if kind == "special":
            return self.p_special
        if kind == "half-special":
            return self.p_half_special
        return self.p_other  # other-degree, k5-degree, cycle

    def amount(self, kind: str) -> Fraction:
        if kind == "cycle":
            return self.beta
        if kind == "k5-degree":
            return self.gamma
        return self.tau


# ---------------------------------------------------------------------------
# classification
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class EdgeClass:
    eid: int
    settled: int  # node id
    kind: str  # 'special' | 'half-special' | 'other-degree' | 'k5-degree' | 'cycle'
    canonical_cuts: Optional[tuple[frozenset[int], frozenset[int]]]
    coin_group: tuple

    @property
    def coin_kind(self) -> str:
        if self.kind in ("special", "half-special"):
            return self.kind
        return "other"


def classify(h: CutHierarchy) -> dict[int, EdgeClass]:
    """Settled node, reduction class, canonical cuts, and coin group per edge.

    The topmost piece samples its own root pairs, so those four edges are
    settled at the root and behave like cycle edges whose canonical cuts
    are never crossed oddly.
    """
    out: dict[int, EdgeClass] = {}
    for nd in h.non_leaves():
        piece = nd.piece
        if nd.kind == "cycle":
            chain = piece.chain
            labels = [piece.graph.vertex_sets[v] for v in chain]
            prefix: list[frozenset[int]] = []
            agg: set[int] = set()
            for lab in labels:
                agg |= lab
                prefix.append(frozenset(agg))
            whole = prefix[-1]
            pairs = piece.internal_pairs()
            for j, pair in enumerate(pairs):
                c = prefix[j]
                c_prime = frozenset(whole - prefix[j])
                for eid in pair:
                    out[eid] = EdgeClass(eid, nd.node_id, "cycle",
                                         (c, c_prime), (nd.node_id, "pair", j))
            if nd.is_root:
                ext_pairs = piece.external_pairs()
                ends = _root_pair_ends(piece)
                for j, pair in enumerate(ext_pairs):
                    near = ends[j]
                    for eid in pair:
                        out[eid] = EdgeClass(eid, nd.node_id, "cycle",
                                             (whole, near), (nd.node_id, "ext", j))
        else:
            k5 = piece.graph.n == 5
            boundary = set(piece.boundary_vertices)
            ext_ids = set(piece.external_edge_ids)
            for eid in piece.internal_edge_ids:
                pos = piece.graph.edge_index(eid)
                u, v = piece.graph.endpoints[pos]
                nb = (u not in boundary) + (v not in boundary)
                if k5:
                    kind = "k5-degree"
                elif nb == 2:
                    kind = "special"
                elif nb == 1:
                    kind = "half-special"
                else:
                    kind = "other-degree"
                out[eid] = EdgeClass(eid, nd.node_id, kind, None, (eid,))
    m = h.instance.graph.m
    assert len(out) == m and set(out) == set(range(m))
    return out


def _root_pair_ends(piece) -> list[frozenset[int]]:
    """Label of the chain end each root pair attaches to."""
    ends = []
    for pair in piece.external_pairs():
        pos = piece.graph.edge_index(pair[0])
        u, v = piece.graph.endpoints[pos]
        inner = u if u != piece.external_vertex else v
        ends.append(piece.graph.vertex_sets[inner])
    return ends


# ---------------------------------------------------------------------------
# even-at-last detection
# ---------------------------------------------------------------------------

def detect_eal(h: CutHierarchy, classes: dict[int, EdgeClass],
               tree_edges: frozenset[int]) -> dict[int, bool]:
    """Per-edge flag: both endpoints even (degree) or piece pairs split (cycle)."""
    out: dict[int, bool] = {}
    for nd in h.non_leaves():
        piece = nd.piece
        g = piece.graph
        if nd.kind == "cycle":
            flag = True
            for pair in piece.external_pairs():
                if sum(1 for e in pair if e in tree_edges) != 1:
                    flag = False
                    break
            for eid in g.edge_ids:
                if classes[eid].settled == nd.node_id:
                    out[eid] = flag
        else:
            parity = [
                sum(1 for eid in g.incident_ids(v) if eid in tree_edges) % 2
                for v in range(g.n)
            ]
            for eid in piece.internal_edge_ids:
                u, v = g.endpoints[g.edge_index(eid)]
                out[eid] = parity[u] == 0 and parity[v] == 0
    return out


# ---------------------------------------------------------------------------
# exact even-at-last probabilities
# ---------------------------------------------------------------------------

def joint_indicator(samplers: dict[int, PieceSampler],
                    classes: dict[int, EdgeClass],
                    eids: Sequence[int]) -> list[tuple[int, object]]:
    """Joint inclusion distribution of edges, grouped by settled piece.

    Pieces sample independently, so the joint law is the product over the
    per-piece projections.  Exact rationals survive when every projection
    is exact.
    """
    eids = list(eids)
    groups: dict[int, list[int]] = {}
    for j, e in enumerate(eids):
        groups.setdefault(classes[e].settled, []).append(j)
    patterns: list[tuple[int, object]] = [(0, Fraction(1))]
    for nid in sorted(groups):
        idxs = groups[nid]
        sub = samplers[nid].indicator_distribution([eids[j] for j in idxs])
        new: dict[int, object] = {}
        for pat, pr in patterns:
            for spat, spr in sub:
                full = pat
                for bitpos, j in enumerate(idxs):
                    if (spat >> bitpos) & 1:
                        full |= 1 << j
                key = full
                add = pr * spr
                new[key] = new.get(key, 0 * add) + add
        patterns = sorted(new.items())
    return patterns


def exact_eal_probabilities(h: CutHierarchy, classes: dict[int, EdgeClass],
                            samplers: dict[int, PieceSampler]) -> dict[int, object]:
    """Even-at-last probability per edge, exact where the samplers are exact."""
    out: dict[int, object] = {}
    for nd in h.non_leaves():
        piece = nd.piece
        g = piece.graph
        if nd.kind == "cycle":
            ext = [e for pair in piece.external_pairs() for e in pair]
            joint = joint_indicator(samplers, classes, ext)
            p = 0
            for pat, pr in joint:
                c1 = (pat & 0b0011).bit_count()
                c2 = ((pat >> 2) & 0b0011).bit_count()
                if c1 == 1 and c2 == 1:
                    p = p + pr
            for eid in g.edge_ids:
                if classes[eid].settled == nd.node_id:
                    out[eid] = p
        else:
            sampler = samplers[nd.node_id]
            ext_ids = set(piece.external_edge_ids)
            ext_at = {
                v: [e for e in g.incident_ids(v) if e in ext_ids]
                for v in range(g.n)
            }
            for eid in piece.internal_edge_ids:
                u, v = g.endpoints[g.edge_index(eid)]
                int_u = [e for e in g.incident_ids(u) if e not in ext_ids]
                int_v = [e for e in g.incident_ids(v) if e not in ext_ids]
                parity_pr: dict[tuple[int, int], object] = {}
                probs = (
                    sampler.exact_probs
                    if sampler.exact_probs is not None
                    else sampler.probs
                )
                for t, pr in zip(sampler.trees, probs):
                    a = sum(1 for e in int_u if e in t) % 2
                    b = sum(1 for e in int_v if e in t) % 2
                    parity_pr[(a, b)] = parity_pr.get((a, b), 0) + pr
                ext_edges = ext_at[u] + ext_at[v]
                joint = joint_indicator(samplers, classes, ext_edges)
                nu = len(ext_at[u])
                p = 0
                for (a, b), qpr in parity_pr.items():
                    for pat, jpr in joint:
                        eu = (pat & ((1 << nu) - 1)).bit_count() % 2
                        ev = (pat >> nu).bit_count() % 2
                        if (a + eu) % 2 == 0 and (b + ev) % 2 == 0:
                            p = p + qpr * jpr
                out[eid] = p
    return out


# ---------------------------------------------------------------------------
# charge routing
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class FlowAssignment:
    """Charge split fractions x(source, target) with unit row sums."""

    fractions: dict[tuple[int, int], Fraction]
    load: dict[int, Fraction]
    cap: Fraction

    def row(self, source: int) -> list[tuple[int, Fraction]]:
        return [
            (f, x) for (s, f), x in sorted(self.fractions.items()) if s == source
        ]


def bipartization_flow(piece, demands: dict[int, Fraction],
                       k5: Optional[bool] = None) -> FlowAssignment:
    """Route each external edge's demand to the internal edges at its
    boundary vertex, keeping every internal edge's load under the cap.

    The cap is half the largest demand, except on a K5 piece where thirds
    are unavoidable and a uniform split meets two thirds of the maximum.
    """
    g = piece.graph
    ext_ids = set(piece.external_edge_ids)
    if k5 is None:
        k5 = g.n == 5
    rows: dict[int, list[int]] = {}
    for s in demands:
        pos = g.edge_index(s)
        u, v = g.endpoints[pos]
        bv = u if v == piece.external_vertex else v
        rows[s] = sorted(
            e for e in g.incident_ids(bv) if e not in ext_ids
        )
    maxd = max(demands.values())
    if k5:
        fractions = {}
        load: dict[int, Fraction] = {}
        for s, targets in rows.items():
            assert len(targets) == 3
            for f in targets:
                fractions[(s, f)] = Fraction(1, 3)
                load[f] = load.get(f, Fraction(0)) + demands[s] / 3
        cap = 2 * maxd / 3
        if any(l > cap for l in load.values()):
            raise FlowInfeasible("uniform thirds exceed the K5 cap")
        return FlowAssignment(fractions, load, cap)
    cap = maxd / 2
    flow = _max_flow(rows, demands, cap)
    if flow is None:
        raise FlowInfeasible(f"no assignment at cap {cap}")
    fractions = {}
    load = {}
    for (s, f), val in flow.items():
        if val:
            fractions[(s, f)] = val / demands[s]
            load[f] = load.get(f, Fraction(0)) + val
    for s in demands:
        total = sum((x for (ss, _), x in fractions.items() if ss == s), Fraction(0))
        assert total == 1
    return FlowAssignment(fractions, load, cap)


def _max_flow(rows: dict[int, list[int]], demands: dict[int, Fraction],
              cap: Fraction) -> Optional[dict[tuple[int, int], Fraction]]:
    """Edmonds-Karp on source -> externals -> internals -> sink."""
    sources = sorted(rows)
    targets = sorted({f for ts in rows.values() for f in ts})
    S, T = "S", "T"
    capacity: dict[tuple, Fraction] = {}
    adj: dict = {S: [], T: []}
    for s in sources:
        capacity[(S, s)] = demands[s]
        adj[S].append(s)
        adj.setdefault(s, []).append(S)
    for f in targets:
        capacity[(f, T)] = cap
        adj.setdefault(f, []).append(T)
        adj[T].append(f)
    for s in sources:
        for f in rows[s]:
            capacity[(s, f)] = demands[s]
            adj[s].append(f)
            adj[f].append(s)
    flow: dict[tuple, Fraction] = {}

    def residual(a, b) -> Fraction:
        return capacity.get((a, b), Fraction(0)) - flow.get((a, b), Fraction(0)) + flow.get((b, a), Fraction(0))

    total = Fraction(0)
    while True:
        prev = {S: None}
        queue = [S]
        while queue and T not in prev:
            x = queue.pop(0)
            for y in adj[x]:
                if y not in prev and residual(x, y) > 0:
                    prev[y] = x
                    queue.append(y)
        if T not in prev:
            break
        path = []
        node = T
        while node != S:
            path.append((prev[node], node))
            node = prev[node]
        aug = min(residual(a, b) for a, b in path)
        for a, b in path:
            back = flow.get((b, a), Fraction(0))
            if back >= aug:
                flow[(b, a)] = back - aug
            else:
                flow[(a, b)] = flow.get((a, b), Fraction(0)) + aug - back
                if back:
                    flow[(b, a)] = Fraction(0)
        total += aug
    if total != sum(demands.values()):
        return None
    return {
        (s, f): flow.get((s, f), Fraction(0))
        for s in sources
        for f in rows[s]
    }


@dataclass(frozen=True)
class DegreeChargeSite:
    source: int
    amount: Fraction
    cut_ids: tuple[int, ...]
    targets: tuple[tuple[int, Fraction], ...]


@dataclass(frozen=True)
class PairChargeGroup:
    """Sources sharing one coin; one repayment serves all their cuts."""

    amount: Fraction
    members: tuple[tuple[int, tuple[int, ...]], ...]  # (source, cut edge ids)


@dataclass(frozen=True)
class PairChargeSite:
    targets: tuple[int, int]
    groups: tuple[PairChargeGroup, ...]


def build_charge_sites(h: CutHierarchy, classes: dict[int, EdgeClass],
                       params: ReductionParams
                       ) -> tuple[list[DegreeChargeSite], list[PairChargeSite]]:
    """Static charge-routing tables for one instance and parameter set."""
    degree_sites: list[DegreeChargeSite] = []
    pair_sites: list[PairChargeSite] = []
    for nd in h.non_leaves():
        piece = nd.piece
        g = piece.graph
        if nd.kind != "cycle":
            ext_ids = sorted(piece.external_edge_ids)
            demands = {}
            for s in ext_ids:
                kind = classes[s].kind
                amt = params.amount(kind)
                demands[s] = amt / 2 if kind == "cycle" else amt
            assign = bipartization_flow(piece, demands)
            for s in ext_ids:
                pos = g.edge_index(s)
                u, v = g.endpoints[pos]
                bv = u if v == piece.external_vertex else v
                cut = tuple(sorted(g.incident_ids(bv)))
                degree_sites.append(
                    DegreeChargeSite(
                        s, params.amount(classes[s].kind), cut, tuple(assign.row(s))
                    )
                )
        else:
            pairs = piece.internal_pairs()
            ext_pairs = piece.external_pairs()
            if not pairs or len(ext_pairs) != 2:
                continue
            left, right = _orient_end_pairs(piece, ext_pairs)
            for pair in pairs:
                entries: dict[tuple, list[tuple[int, tuple[int, ...]]]] = {}
                cut_l = tuple(sorted(left + pair))
                cut_r = tuple(sorted(right + pair))
                for s in left:
                    entries.setdefault(classes[s].coin_group, []).append((s, cut_l))
                for s in right:
                    entries.setdefault(classes[s].coin_group, []).append((s, cut_r))
                groups = []
                for _, members in sorted(entries.items()):
                    amounts = {params.amount(classes[s].kind) for s, _ in members}
                    assert len(amounts) == 1
                    groups.append(PairChargeGroup(amounts.pop(), tuple(members)))
                pair_sites.append(PairChargeSite(tuple(pair), tuple(groups)))
    return degree_sites, pair_sites


def _orient_end_pairs(piece, ext_pairs) -> tuple[tuple[int, ...], tuple[int, ...]]:
    """Order the two external pairs as (chain-start side, chain-end side)."""
    chain = piece.chain
    first = chain[0]
    out: list = [None, None]
    for pair in ext_pairs:
        pos = piece.graph.edge_index(pair[0])
        u, v = piece.graph.endpoints[pos]
        inner = u if u != piece.external_vertex else v
        if inner == first and out[0] is None:
            out[0] = tuple(pair)
        else:
            out[1] = tuple(pair)
    return out[0], out[1]


# ---------------------------------------------------------------------------
# coins and the join vector
# ---------------------------------------------------------------------------

def coin_groups(classes: dict[int, EdgeClass]) -> dict[tuple, tuple[int, ...]]:
    groups: dict[tuple, list[int]] = {}
    for eid, cl in sorted(classes.items()):
        groups.setdefault(cl.coin_group, []).append(eid)
    return {k: tuple(v) for k, v in groups.items()}


def coin_rates(classes: dict[int, EdgeClass], params: ReductionParams,
               eal_probability: dict[int, object]) -> dict[tuple, float]:
    """Bernoulli rate per coin group: class bound over even-at-last rate."""
    rates: dict[tuple, float] = {}
    for grp, members in coin_groups(classes).items():
        ests = {eal_probability[e] for e in members}
        est = ests.pop()
        assert not ests, "coin group members must share one estimate"
        bound = params.coin_bound(classes[members[0]].coin_kind)
        if est <= 0 or float(bound) > float(est) * (1 + 1e-9):
            raise EstimateBelowBound(
                f"even-at-last estimate {float(est):.6g} below bound "
                f"{float(bound):.6g} for edges {members}"
            )
        rates[grp] = min(1.0, float(bound) / float(est))
    return rates


@dataclass(frozen=True)
class JoinSolution:
    """Join vector with the full per-edge accounting ledger."""

    z: dict[int, Fraction]
    eal: dict[int, bool]
    coins: dict[tuple, bool]
    reductions: dict[int, Fraction]
    charges: dict[int, tuple[tuple[tuple[int, ...], Fraction], ...]]

    def net_decrease(self, eid: int) -> Fraction:
        return QUARTER - self.z[eid]


def build_join(
    h: CutHierarchy,
    classes: dict[int, EdgeClass],
    params: ReductionParams,
    tree_edges: frozenset[int],
    rates: dict[tuple, float],
    rng: np.random.Generator,
    sites: Optional[tuple[list[DegreeChargeSite], list[PairChargeSite]]] = None,
) -> JoinSolution:
    """One trial of the reduction-and-charge scheme for a sampled tree."""
    if sites is None:
        sites = build_charge_sites(h, classes, params)
    degree_sites, pair_sites = sites
    eal = detect_eal(h, classes, tree_edges)
    groups = coin_groups(classes)
    coins = {grp: bool(rng.random() < rates[grp]) for grp in sorted(groups)}
    coin_of: dict[int, bool] = {}
    for grp, members in groups.items():
        for e in members:
            coin_of[e] = coins[grp]
    m = h.instance.graph.m
    z = {e: QUARTER for e in range(m)}
    reductions: dict[int, Fraction] = {}
    for e in range(m):
        if eal[e] and coin_of[e]:
            amt = params.amount(classes[e].kind)
            z[e] -= amt
            reductions[e] = amt
    charges: dict[int, list[tuple[tuple[int, ...], Fraction]]] = {}

    def odd(cut_ids: Iterable[int]) -> bool:
        return sum(1 for c in cut_ids if c in tree_edges) % 2 == 1

    for site in degree_sites:
        if site.source in reductions and odd(site.cut_ids):
            for f, frac in site.targets:
                amt = site.amount * frac
                z[f] += amt
                charges.setdefault(f, []).append(((site.source,), amt))
    for site in pair_sites:
        for grp in site.groups:
            active = [
                s for s, cut in grp.members if s in reductions and odd(cut)
            ]
            if active:
                half = grp.amount / 2
                for t in site.targets:
                    z[t] += half
                    charges.setdefault(t, []).append((tuple(active), half))
    return JoinSolution(
        z=z,
        eal=eal,
        coins=coins,
        reductions=reductions,
        charges={e: tuple(v) for e, v in charges.items()},
    )


# ---------------------------------------------------------------------------
# verification
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class JoinReport:
    ok: bool
    floor_violations: tuple[int, ...]
    cut_violations: tuple[tuple[frozenset[int], Fraction], ...]
    checked_cuts: int


def verify_join(z: dict[int, Fraction], tree_edges: frozenset[int],
                h: CutHierarchy,
                min_cuts: Optional[list[CutView]] = None,
                raise_on_violation: bool = True) -> JoinReport:
    """Floor of one sixth everywhere; odd min-cuts covered to one.

    Cuts with more than four edges are certified by the floor alone, so
    only the hierarchy's min-cut list is enumerated.
    """
    if min_cuts is None:
        min_cuts = min_cuts_via_hierarchy(h)
    floor_bad = tuple(e for e, v in sorted(z.items()) if v < FLOOR)
    cut_bad = []
    for cut in min_cuts:
        crossings = sum(1 for e in cut.edge_ids if e in tree_edges)
        if crossings % 2 == 1:
            total = sum((z[e] for e in cut.edge_ids), Fraction(0))
            if total < 1:
                cut_bad.append((cut.shore, total))
    report = JoinReport(
        ok=not floor_bad and not cut_bad,
        floor_violations=floor_bad,
        cut_violations=tuple(cut_bad),
        checked_cuts=len(min_cuts),
    )
    if raise_on_violation and not report.ok:
        raise FeasibilityViolation(
            f"floor violations {report.floor_violations}, "
            f"cut violations {[(sorted(s), str(v)) for s, v in report.cut_violations]}"
        )
    return report


# ---------------------------------------------------------------------------
# integral join and tour extraction
# ---------------------------------------------------------------------------

ODD_SET_LIMIT = 16


def shortest_path_metric(inst: HalfIntegralInstance) -> tuple[list[list[Fraction]], dict]:
    """All-pairs shortest paths over the support graph, with successors."""
    g = inst.graph
    n = g.n
    INF = Fraction(10 ** 12)
    d = [[INF] * n for _ in range(n)]
    nxt: dict[tuple[int, int], int] = {}
    for v in range(n):
        d[v][v] = Fraction(0)
    for eid, (u, v) in zip(g.edge_ids, g.endpoints):
        c = inst.costs[eid]
        if c < d[u][v]:
            d[u][v] = d[v][u] = c
            nxt[(u, v)] = v
            nxt[(v, u)] = u
    for k in range(n):
        for i in range(n):
            dik = d[i][k]
            if dik == INF:
                continue
            row_k = d[k]
            for j in range(n):
                alt = dik + row_k[j]
                if alt < d[i][j]:
                    d[i][j] = d[j][i] = alt
                    nxt[(i, j)] = nxt[(i, k)]
                    nxt[(j, i)] = nxt[(j, k)]
    return d, nxt


def min_cost_perfect_matching(odd: list[int], dist,
                              memo: Optional[dict] = None
                              ) -> tuple[Fraction, list[tuple[int, int]]]:
    """Exact pairing by dynamic programming over vertex-id bitmasks.

    The memo is keyed by subsets of the full vertex set, so one dictionary
    can be shared across calls with different odd sets of one instance.
    """
    k = len(odd)
    assert k % 2 == 0
    if k == 0:
        return Fraction(0), []
    if k > ODD_SET_LIMIT + 2:
        raise OddSetTooLarge(f"{k} odd vertices exceeds the exact limit")
    if memo is None:
        memo = {}
    if 0 not in memo:
        memo[0] = (Fraction(0), None)

    def solve(mask: int):
        hit = memo.get(mask)
        if hit is not None:
            return hit[0]
        lowbit = mask & -mask
        i = lowbit.bit_length() - 1
        rest = mask ^ lowbit
        best = None
        best_j = None
        r = rest
        while r:
            jbit = r & -r
            j = jbit.bit_length() - 1
            r ^= jbit
            cand = dist[i][j] + solve(rest ^ jbit)
            if best is None or cand < best:
                best = cand
                best_j = j
        memo[mask] = (best, best_j)
        return best

    full = 0
    for v in odd:
        full |= 1 << v
    cost = solve(full)
    pairs = []
    mask = full
    while mask:
        _, j = memo[mask]
        i = (mask & -mask).bit_length() - 1
        pairs.append((i, j))
        mask ^= (1 << i) | (1 << j)
    return cost, pairs


def odd_vertices(inst: HalfIntegralInstance, tree_edges: frozenset[int]) -> list[int]:
    g = inst.graph
    deg = [0] * g.n
    for eid in tree_edges:
        u, v = g.endpoints[eid]
        deg[u] += 1
        deg[v] += 1
    return [v for v in range(g.n) if deg[v] % 2 == 1]


@dataclass(frozen=True)
class TourResult:
    join_cost: Fraction
    join_legs: tuple[tuple[int, int], ...]
    tour: tuple[int, ...]
    tour_cost: Fraction
    tree_cost: Fraction


def integral_join_and_tour(inst: HalfIntegralInstance, tree_edges: frozenset[int],
                           metric=None, shortcut: bool = True,
                           limit: int = ODD_SET_LIMIT) -> TourResult:
    """Cheapest parity fix for the tree, then a closed tour.

    The join pairs odd-degree vertices along shortest paths; the tour is
    the Euler circuit of the combined multigraph, shortcut to first visits
    and priced in the shortest-path metric (always a metric, so the
    shortcut never costs more than the walk).
    """
    g = inst.graph
    if metric is None:
        metric = shortest_path_metric(inst)
    d, nxt = metric
    odd = odd_vertices(inst, tree_edges)
    if len(odd) > limit:
        raise OddSetTooLarge(f"{len(odd)} odd vertices exceeds limit {limit}")
    join_cost, pairs = min_cost_perfect_matching(odd, d)
    legs: list[tuple[int, int]] = [g.endpoints[eid] for eid in tree_edges]
    for a, b in pairs:
        node = a
        while node != b:
            step = nxt[(node, b)]
            legs.append((node, step))
            node = step
    tree_cost = sum((inst.costs[eid] for eid in tree_edges), Fraction(0))

    # Euler circuit over the leg multiset
    adj: dict[int, list[int]] = {v: [] for v in range(g.n)}
    for i, (u, v) in enumerate(legs):
        adj[u].append(i)
        adj[v].append(i)
    used = [False] * len(legs)
    start = inst.root
    stack = [start]
    circuit: list[int] = []
    ptr = {v: 0 for v in adj}
    while stack:
        v = stack[-1]
        advanced = False
        while ptr[v] < len(adj[v]):
            i = adj[v][ptr[v]]
            if used[i]:
                ptr[v] += 1
                continue
            used[i] = True
            a, b = legs[i]
            w = b if a == v else a
            stack.append(w)
            advanced = True
            break
        if not advanced:
            circuit.append(stack.pop())
    assert all(used), "leg multiset is not connected"
    circuit.reverse()

    if shortcut:
        seen: set[int] = set()
        tour = []
        for v in circuit:
            if v not in seen:
                seen.add(v)
                tour.append(v)
        tour_cost = sum(
            (d[a][b] for a, b in zip(tour, tour[1:] + tour[:1])), Fraction(0)
        )
    else:
        tour = circuit[:-1]
        tour_cost = sum(
            (d[a][b] for a, b in zip(circuit, circuit[1:])), Fraction(0)
        )
    return TourResult(
        join_cost=join_cost,
        join_legs=tuple(pairs),
        tour=tuple(tour),
        tour_cost=tour_cost,
        tree_cost=tree_cost,
    )
