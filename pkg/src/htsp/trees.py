"""Spanning-tree samplers over piece interiors.

Two routes are faithful to shifted marginals: an exact convex decomposition
into constrained spanning trees (at most one edge per partition part), and
a weighted-uniform distribution whose edge weights are fitted so marginals
match the targets.  Cycle pieces and K5 pieces have their own elementary
samplers (one edge per partner pair; a uniform Hamiltonian path).

Fitting works on the minor obtained by contracting value-one edges and
deleting value-zero edges.  Shifted vectors can sit on a face of the
spanning-tree polytope (a vertex subset whose interior mass is already
full), in which case the distribution factorizes: the fit recurses into
the tight subset and its contraction, and sampling draws the components
independently.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from fractions import Fraction
from typing import Optional, Sequence

import numpy as np

from .decomp import exact_convex_decomposition
from .errors import (
    BoundaryTarget,
    InfeasibleShift,
    NonConvergence,
    NumericalBreakdown,
)
from .graph import MultiGraph
from .hierarchy import LocalMultigraph
from .matching import ShiftedSolution

FIT_TOLERANCE = 1e-6
FIT_MAX_ROUNDS = 10_000
MARGINAL_GUARD = 1e-9


# ---------------------------------------------------------------------------
# small-graph utilities
# ---------------------------------------------------------------------------

def enumerate_spanning_trees(g: MultiGraph) -> list[int]:
    """All spanning trees as bitmasks over edge positions."""
    n, m = g.n, g.m
    if n == 1:
        return [0]
    out = []
    for combo in itertools.combinations(range(m), n - 1):
        parent = list(range(n))

        def find(x: int) -> int:
            while parent[x] != x:
                parent[x] = parent[parent[x]]
                x = parent[x]
            return x

        ok = True
        for i in combo:
            u, v = g.endpoints[i]
            ru, rv = find(u), find(v)
            if ru == rv:
                ok = False
                break
            parent[ru] = rv
        if ok:
            mask = 0
            for i in combo:
                mask |= 1 << i
            out.append(mask)
    return out


def spanning_tree_count(g: MultiGraph) -> int:
    """Kirchhoff count, for cross-checks."""
    if g.n == 1:
        return 1
    lap = np.zeros((g.n, g.n))
    for u, v in g.endpoints:
        lap[u, u] += 1
        lap[v, v] += 1
        lap[u, v] -= 1
        lap[v, u] -= 1
    minor = lap[:-1, :-1]
    return round(float(np.linalg.det(minor))) if minor.size else 1


def in_spanning_tree_polytope(g: MultiGraph, values: dict[int, Fraction]) -> bool:
    """Exact membership check by enumerating all vertex-subset constraints."""
    total = sum((values[eid] for eid in g.edge_ids), Fraction(0))
    if total != g.n - 1:
        return False
    if any(values[eid] < 0 for eid in g.edge_ids):
        return False
    for size in range(2, g.n):
        for sub in itertools.combinations(range(g.n), size):
            s = set(sub)
            inside = sum(
                (values[eid] for eid, (u, v) in zip(g.edge_ids, g.endpoints)
                 if u in s and v in s),
                Fraction(0),
            )
            if inside > size - 1:
                return False
    return True


@dataclass(frozen=True)
class _Minor:
    """Value-one edges contracted, value-zero edges deleted."""

    graph: MultiGraph
    forced: tuple[int, ...]
    zeros: tuple[int, ...]

    @property
    def edge_ids(self) -> tuple[int, ...]:
        return self.graph.edge_ids


def contract_forced(g: MultiGraph, values: dict[int, Fraction]) -> _Minor:
    forced = sorted(eid for eid in g.edge_ids if values[eid] == 1)
    zeros = sorted(eid for eid in g.edge_ids if values[eid] == 0)
    parent = list(range(g.n))

    def find(x: int) -> int:
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    fset = set(forced)
    for eid, (u, v) in zip(g.edge_ids, g.endpoints):
        if eid in fset:
            ru, rv = find(u), find(v)
            if ru == rv:
                raise InfeasibleShift("forced edges contain a cycle")
            parent[ru] = rv
    roots = sorted({find(v) for v in range(g.n)})
    renum = {r: i for i, r in enumerate(roots)}
    zset = set(zeros)
    edges = []
    for eid, (u, v) in zip(g.edge_ids, g.endpoints):
        if eid in fset or eid in zset:
            continue
        a, b = renum[find(u)], renum[find(v)]
        if a == b:
            raise InfeasibleShift("positive edge inside a forced component")
        edges.append((eid, a, b))
    return _Minor(MultiGraph(len(roots), edges), tuple(forced), tuple(zeros))


# ---------------------------------------------------------------------------
# exact constrained-tree distribution
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ConstrainedTreeDistribution:
    """Exact distribution over interior spanning trees honoring the parts."""

    trees: tuple[frozenset[int], ...]
    weights: tuple[Fraction, ...]

    def __post_init__(self):
        assert sum(self.weights, Fraction(0)) == 1

    def marginals(self) -> dict[int, Fraction]:
        out: dict[int, Fraction] = {}
        for t, w in zip(self.trees, self.weights):
            for eid in t:
                out[eid] = out.get(eid, Fraction(0)) + w
        return out

    def cdf(self) -> np.ndarray:
        cached = getattr(self, "_cdf", None)
        if cached is None:
            cached = np.cumsum(np.array([float(w) for w in self.weights]))
            object.__setattr__(self, "_cdf", cached)
        return cached

    def sample(self, rng: np.random.Generator) -> frozenset[int]:
        i = int(np.searchsorted(self.cdf(), rng.random(), side="right"))
        return self.trees[min(i, len(self.trees) - 1)]


def constrained_tree_distribution(shifted: ShiftedSolution) -> ConstrainedTreeDistribution:
    """Decompose the shifted interior vector over part-respecting trees."""
    g = shifted.interior_graph
    values = shifted.interior_values()
    minor = contract_forced(g, values)
    mg = minor.graph
    pos_of = {eid: i for i, eid in enumerate(mg.edge_ids)}
    part_masks = []
    for part in shifted.parts:
        mask = 0
        for eid in part:
            if eid in pos_of:
                mask |= 1 << pos_of[eid]
        if mask:
            part_masks.append(mask)

    candidates = []
    for t in enumerate_spanning_trees(mg):
        if all((t & pm).bit_count() <= 1 for pm in part_masks):
            candidates.append(t)
    if not candidates:
        raise InfeasibleShift("no constrained spanning tree in the support")

    upper: list[tuple[int, int]] = [(pm, 1) for pm in part_masks]
    for size in range(2, mg.n + 1):
        for sub in itertools.combinations(range(mg.n), size):
            s = set(sub)
            mask = 0
            for i, (u, v) in enumerate(mg.endpoints):
                if u in s and v in s:
                    mask |= 1 << i
            if mask:
                upper.append((mask, size - 1))

    target = [values[eid] for eid in mg.edge_ids]
    try:
        w = exact_convex_decomposition(candidates, target, upper=upper)
    except ValueError as exc:
        raise InfeasibleShift(str(exc)) from exc
    forced = frozenset(minor.forced)
    trees = []
    weights = []
    for mask in sorted(w):
        ids = frozenset(mg.edge_ids[i] for i in _bits(mask)) | forced
        trees.append(ids)
        weights.append(w[mask])
    dist = ConstrainedTreeDistribution(tuple(trees), tuple(weights))
    assert dist.marginals() | {e: Fraction(0) for e in minor.zeros} == {
        eid: v for eid, v in values.items() if v > 0 or eid in minor.zeros
    }
    return dist


def mi_sample(shifted: ShiftedSolution, rng: np.random.Generator) -> frozenset[int]:
    """One tree from the exact constrained decomposition."""
    return constrained_tree_distribution(shifted).sample(rng)


# ---------------------------------------------------------------------------
# max-entropy route
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class MaxEntComponent:
    graph: MultiGraph
    weights: dict[int, float]
    fit_error: float


@dataclass(frozen=True)
class MaxEntWeights:
    """Fitted weighted-uniform tree distribution, factored over tight sets.

    Components partition the fractional interior edges; a sample is the
    union of independent component trees plus every contracted forced edge.
    """

    components: tuple[MaxEntComponent, ...]
    forced: tuple[int, ...]
    zeros: tuple[int, ...]

    @property
    def fit_error(self) -> float:
        return max((c.fit_error for c in self.components), default=0.0)

    def edge_weights(self) -> dict[int, float]:
        out: dict[int, float] = {}
        for c in self.components:
            out.update(c.weights)
        return out


def _laplacian_minor_inverse(g: MultiGraph, w: Sequence[float]) -> np.ndarray:
    lap = np.zeros((g.n, g.n))
    for i, (u, v) in enumerate(g.endpoints):
        lap[u, u] += w[i]
        lap[v, v] += w[i]
        lap[u, v] -= w[i]
        lap[v, u] -= w[i]
    minor = lap[:-1, :-1]
    try:
        return np.linalg.inv(minor)
    except np.linalg.LinAlgError as exc:
        raise NumericalBreakdown("singular weighted Laplacian minor") from exc


def _matrix_tree_marginals(g: MultiGraph, w: Sequence[float]) -> np.ndarray:
    """Inclusion probability of each edge under the weighted-uniform law."""
    inv = _laplacian_minor_inverse(g, w)
    ground = g.n - 1
    out = np.empty(g.m)
    for i, (u, v) in enumerate(g.endpoints):
        if v == ground:
            u, v = v, u
        if u == ground:
            reff = inv[v, v]
        else:
            reff = inv[u, u] + inv[v, v] - 2 * inv[u, v]
        out[i] = w[i] * reff
    return out


def _fit_component(g: MultiGraph, targets: Sequence[float], tol: float,
                   max_rounds: int) -> MaxEntComponent:
    t = np.asarray(targets, dtype=float)
    w = np.ones(g.m)
    err = np.inf
    for _ in range(max_rounds):
        marg = _matrix_tree_marginals(g, w)
        if np.any(marg <= 0):
            raise NumericalBreakdown("nonpositive marginal during fitting")
        err = float(np.max(np.abs(marg / t - 1.0)))
        if err <= tol:
            break
        w = w * (t / marg)
        w = w / np.max(w)
    else:
        raise NonConvergence(f"fit error {err:.3e} after {max_rounds} rounds")
    return MaxEntComponent(g, {eid: float(x) for eid, x in zip(g.edge_ids, w)}, err)


def _find_tight_subset(g: MultiGraph, values: dict[int, Fraction]) -> Optional[tuple[int, ...]]:
    for size in range(2, g.n):
        for sub in itertools.combinations(range(g.n), size):
            s = set(sub)
            inside = sum(
                (values[eid] for eid, (u, v) in zip(g.edge_ids, g.endpoints)
                 if u in s and v in s),
                Fraction(0),
            )
            if inside == size - 1:
                return sub
            if inside > size - 1:
                raise BoundaryTarget("targets outside the spanning-tree polytope")
    return None


def maxent_fit(interior_graph: MultiGraph, targets: dict[int, Fraction],
               tolerance: float = FIT_TOLERANCE,
               max_rounds: int = FIT_MAX_ROUNDS) -> MaxEntWeights:
    """Fit weighted-uniform tree weights matching the target marginals.

    Contracts value-one edges and deletes value-zero edges first, then
    factors across tight vertex subsets and fits each factor by
    multiplicative updates with matrix-tree marginals.
    """
    for eid in interior_graph.edge_ids:
        v = targets[eid]
        if v < 0 or v > 1:
            raise BoundaryTarget(f"target {v} for edge {eid} outside [0,1]")
    total = sum((targets[eid] for eid in interior_graph.edge_ids), Fraction(0))
    if total != interior_graph.n - 1:
        raise BoundaryTarget(
            f"targets sum to {total}, need {interior_graph.n - 1}"
        )
    minor = contract_forced(interior_graph, targets)
    components: list[MaxEntComponent] = []

    def rec(g: MultiGraph, vals: dict[int, Fraction]) -> None:
        if g.n == 1 or g.m == 0:
            return
        sub = _find_tight_subset(g, vals)
        if sub is None:
            components.append(
                _fit_component(g, [float(vals[eid]) for eid in g.edge_ids],
                               tolerance, max_rounds)
            )
            return
        s = set(sub)
        inner_edges = [
            (eid, u, v) for eid, (u, v) in zip(g.edge_ids, g.endpoints)
            if u in s and v in s
        ]
        renum = {old: i for i, old in enumerate(sorted(s))}
        inner = MultiGraph(len(s), [(e, renum[u], renum[v]) for e, u, v in inner_edges])
        rec(inner, {e: vals[e] for e, _, _ in inner_edges})
        contracted, _ = g.contract(s)
        rec(contracted, {eid: vals[eid] for eid in contracted.edge_ids})

    rec(minor.graph, {eid: targets[eid] for eid in minor.graph.edge_ids})
    return MaxEntWeights(tuple(components), minor.forced, minor.zeros)


def maxent_marginals(fit: MaxEntWeights) -> dict[int, float]:
    out = {eid: 1.0 for eid in fit.forced}
    out.update({eid: 0.0 for eid in fit.zeros})
    for c in fit.components:
        w = [c.weights[eid] for eid in c.graph.edge_ids]
        for eid, p in zip(c.graph.edge_ids, _matrix_tree_marginals(c.graph, w)):
            out[eid] = float(p)
    return out


def _sample_component(c: MaxEntComponent, rng: np.random.Generator) -> set[int]:
    """Sequential conditioning: decide each edge from its conditional marginal."""
    g = c.graph
    chosen: set[int] = set()
    cur = g
    for eid in sorted(c.weights):
        if eid not in cur.edge_ids:
            continue
        if cur.n == 1:
            break
        w = [c.weights[e] for e in cur.edge_ids]
        pos = cur.edge_index(eid)
        p = float(_matrix_tree_marginals(cur, w)[pos])
        if p < -MARGINAL_GUARD or p > 1 + MARGINAL_GUARD:
            raise NumericalBreakdown(f"conditional marginal {p} for edge {eid}")
        take = True if p >= 1 - 1e-12 else (False if p <= 1e-12 else rng.random() < p)
        u, v = cur.endpoints[pos]
        if take:
            chosen.add(eid)
            merged, _ = cur.contract({u, v})
            # the contracted edge disappears; parallels to it survive
            cur = merged
        else:
            cur = MultiGraph(
                cur.n,
                [
                    (e, a, b)
                    for e, (a, b) in zip(cur.edge_ids, cur.endpoints)
                    if e != eid
                ],
                cur.vertex_sets,
            )
    return chosen


def maxent_sample(fit: MaxEntWeights, rng: np.random.Generator) -> frozenset[int]:
    """One tree: forced edges plus independent component samples."""
    out: set[int] = set(fit.forced)
    for c in fit.components:
        out |= _sample_component(c, rng)
    return frozenset(out)


def maxent_tree_distribution(fit: MaxEntWeights) -> tuple[tuple[frozenset[int], ...], np.ndarray]:
    """Enumerated support and probabilities of the fitted distribution.

    The product across components is exact up to float rounding; used by
    the batch harness and by cross-validation against sequential sampling.
    """
    trees: list[frozenset[int]] = [frozenset(fit.forced)]
    probs = np.array([1.0])
    for c in fit.components:
        masks = enumerate_spanning_trees(c.graph)
        wvec = [c.weights[eid] for eid in c.graph.edge_ids]
        cw = []
        for mask in masks:
            p = 1.0
            for i in _bits(mask):
                p *= wvec[i]
            cw.append(p)
        cw = np.array(cw)
        cw = cw / cw.sum()
        new_trees = []
        new_probs = np.empty(len(trees) * len(masks))
        k = 0
        for t, tp in zip(trees, probs):
            for mask, mp in zip(masks, cw):
                ids = frozenset(c.graph.edge_ids[i] for i in _bits(mask))
                new_trees.append(t | ids)
                new_probs[k] = tp * mp
                k += 1
        trees = new_trees
        probs = new_probs
    return tuple(trees), probs


# ---------------------------------------------------------------------------
# elementary piece samplers
# ---------------------------------------------------------------------------

def sample_double_cycle(piece: LocalMultigraph, rng: np.random.Generator) -> frozenset[int]:
    """One edge from each partner pair of the chain, independently."""
    pairs = piece.internal_pairs()
    picks = rng.integers(0, 2, size=len(pairs))
    return frozenset(pair[int(k)] for pair, k in zip(pairs, picks))


def k5_paths(piece: LocalMultigraph) -> list[frozenset[int]]:
    """The twelve Hamiltonian paths of the K4 interior, as edge-id sets."""
    interior, mapping = piece.internal_graph()
    assert interior.n == 4 and interior.m == 6
    edge_of = {}
    for eid, (u, v) in zip(interior.edge_ids, interior.endpoints):
        edge_of[(u, v)] = eid
        edge_of[(v, u)] = eid
    out = []
    for perm in itertools.permutations(range(4)):
        if perm[0] > perm[-1]:
            continue
        out.append(frozenset(edge_of[(a, b)] for a, b in zip(perm, perm[1:])))
    return sorted(out, key=sorted)


def sample_k5_path(piece: LocalMultigraph, rng: np.random.Generator) -> frozenset[int]:
    """Uniformly random Hamiltonian path on the four interior vertices."""
    paths = k5_paths(piece)
    return paths[int(rng.integers(0, len(paths)))]


def _bits(mask: int):
    while mask:
        low = mask & -mask
        yield low.bit_length() - 1
        mask ^= low
