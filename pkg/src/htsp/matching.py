"""Perfect-matching layer of the piece samplers.

For an even piece: draw a perfect matching with exact quarter marginals,
pick an induced sub-matching by 7-coloring the matching-contracted graph,
and shift the half marginals to one on matched edges and one third
elsewhere.  Odd pieces first split the external vertex into two, then
repair the shifted interior vector by a local one-third increase or
decrease so it lands back in the spanning-tree polytope.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Optional, Sequence, Union

import numpy as np

from .decomp import exact_convex_decomposition
from .errors import ColoringOverflow, NoPerfectMatching
from .graph import MultiGraph
from .hierarchy import LocalMultigraph

THIRD = Fraction(1, 3)
QUARTER = Fraction(1, 4)

SPLIT_EDGE_A, SPLIT_EDGE_B = -1, -2  # synthetic ids for the added parallel pair


def _graph_of(piece) -> MultiGraph:
    return piece if isinstance(piece, MultiGraph) else piece.graph


# ---------------------------------------------------------------------------
# enumeration and exact decomposition
# ---------------------------------------------------------------------------

def enumerate_perfect_matchings(g: MultiGraph) -> list[int]:
    """All perfect matchings as bitmasks over edge positions."""
    if g.n % 2:
        return []
    out: list[int] = []

    def rec(covered: int, mask: int, v: int) -> None:
        while v < g.n and (covered >> v) & 1:
            v += 1
        if v == g.n:
            out.append(mask)
            return
        for i in g.incident(v):
            w = g.other_end(i, v)
            if not (covered >> w) & 1:
                rec(covered | (1 << v) | (1 << w), mask | (1 << i), v + 1)

    rec(0, 0, 0)
    return sorted(out)


def _odd_set_lower_constraints(g: MultiGraph) -> list[tuple[int, int]]:
    """Boundary masks of odd vertex sets, one per complement pair."""
    n = g.n
    out = []
    seen: set[int] = set()
    full = (1 << n) - 1
    for s in range(1, 1 << (n - 1)):  # canonical side: vertex n-1 outside
        if bin(s).count("1") % 2 == 0:
            continue
        if s in seen:
            continue
        seen.add(s)
        mask = 0
        for i, (u, v) in enumerate(g.endpoints):
            if ((s >> u) & 1) != ((s >> v) & 1):
                mask |= 1 << i
        out.append((mask, 1))
    return out


@dataclass(frozen=True)
class MatchingDistribution:
    """Exact convex combination of perfect matchings with quarter marginals."""

    graph: MultiGraph
    masks: tuple[int, ...]
    weights: tuple[Fraction, ...]

    def __post_init__(self):
        assert all(w > 0 for w in self.weights)
        assert sum(self.weights, Fraction(0)) == 1
        if all(d == 4 for d in self.graph.degrees()):
            for pos in range(self.graph.m):
                mass = sum(
                    w for mk, w in zip(self.masks, self.weights) if (mk >> pos) & 1
                )
                assert mass == QUARTER, f"edge position {pos} has mass {mass}"

    def edge_ids_of(self, mask: int) -> frozenset[int]:
        return frozenset(
            self.graph.edge_ids[i] for i in range(self.graph.m) if (mask >> i) & 1
        )

    def cdf(self) -> np.ndarray:
        cached = getattr(self, "_cdf", None)
        if cached is None:
            cached = np.cumsum(np.array([float(w) for w in self.weights]))
            object.__setattr__(self, "_cdf", cached)
        return cached

    def sample(self, rng: np.random.Generator) -> int:
        i = int(np.searchsorted(self.cdf(), rng.random(), side="right"))
        return self.masks[min(i, len(self.masks) - 1)]


def decompose_matchings(piece: Union[LocalMultigraph, MultiGraph]) -> MatchingDistribution:
    """Exact quarter-mass decomposition over all perfect matchings."""
    g = _graph_of(piece)
    if g.n % 2:
        raise NoPerfectMatching("odd vertex count")
    matchings = enumerate_perfect_matchings(g)
    if not matchings:
        raise NoPerfectMatching("piece has no perfect matching")
    target = [QUARTER] * g.m
    lower = _odd_set_lower_constraints(g)
    try:
        w = exact_convex_decomposition(matchings, target, upper=(), lower=lower)
    except ValueError as exc:
        raise NoPerfectMatching(f"quarter-mass decomposition failed: {exc}") from exc
    masks = tuple(sorted(w))
    return MatchingDistribution(g, masks, tuple(w[mk] for mk in masks))


def sample_matching(dist: MatchingDistribution, rng: np.random.Generator) -> int:
    """Draw a matching bitmask with the distribution's listed weights."""
    return dist.sample(rng)


# ---------------------------------------------------------------------------
# induced sub-matching via 7-coloring
# ---------------------------------------------------------------------------

def seven_coloring(g: MultiGraph, matching_mask: int) -> list[list[int]]:
    """Color matched edges so no other edge touches two of one color.

    Contracting the matching leaves a 6-regular multigraph, so greedy
    coloring in edge order needs at most 7 colors.  Always returns exactly
    7 classes (some may be empty) of edge positions.
    """
    matched = [i for i in range(g.m) if (matching_mask >> i) & 1]
    owner: dict[int, int] = {}
    for i in matched:
        u, v = g.endpoints[i]
        owner[u] = i
        owner[v] = i
    adjacency: dict[int, set[int]] = {i: set() for i in matched}
    for j in range(g.m):
        if (matching_mask >> j) & 1:
            continue
        u, v = g.endpoints[j]
        a, b = owner[u], owner[v]
        if a != b:
            adjacency[a].add(b)
            adjacency[b].add(a)
    color: dict[int, int] = {}
    for i in matched:
        used = {color[j] for j in adjacency[i] if j in color}
        c = next(c for c in range(8) if c not in used)
        if c > 6:
            raise ColoringOverflow("greedy coloring needed more than 7 colors")
        color[i] = c
    classes: list[list[int]] = [[] for _ in range(7)]
    for i in matched:
        classes[color[i]].append(i)
    return classes


def select_submatching(piece: Union[LocalMultigraph, MultiGraph], matching_mask: int,
                       rng: np.random.Generator) -> int:
    """Uniformly chosen color class of the matching, as a bitmask."""
    g = _graph_of(piece)
    classes = seven_coloring(g, matching_mask)
    chosen = classes[int(rng.integers(0, 7))]
    mask = 0
    for i in chosen:
        mask |= 1 << i
    return mask


# ---------------------------------------------------------------------------
# shifted solutions
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ShiftedSolution:
    """Piece marginals after the matching shift (and odd surgery, if any).

    ``values`` covers every edge of the sampling graph by id; interior
    sampling uses ``interior_values`` on ``interior_graph``.  ``parts`` are
    the partition-matroid classes restricted to internal edges; each
    carries capacity one.
    """

    values: dict[int, Fraction]
    interior_graph: MultiGraph
    interior_edge_ids: tuple[int, ...]
    parts: tuple[tuple[int, ...], ...]
    forced: frozenset[int]
    provenance: dict

    def interior_values(self) -> dict[int, Fraction]:
        return {eid: self.values[eid] for eid in self.interior_edge_ids}

    def part_sums(self) -> list[Fraction]:
        return [sum((self.values[e] for e in p), Fraction(0)) for p in self.parts]


def _parts_from_submatching(g: MultiGraph, internal_ids: set[int],
                            submatching_mask: int) -> tuple[tuple[int, ...], ...]:
    parts = []
    for i in range(g.m):
        if not (submatching_mask >> i) & 1:
            continue
        for w in g.endpoints[i]:
            part = tuple(
                sorted(
                    g.edge_ids[j]
                    for j in g.incident(w)
                    if j != i and g.edge_ids[j] in internal_ids
                )
            )
            if part:
                parts.append(part)
    return tuple(sorted(parts))


def shift(piece: LocalMultigraph, matching_mask: int,
          submatching_mask: int = 0) -> ShiftedSolution:
    """One on matched edges, one third elsewhere; parts from the sub-matching."""
    g = piece.graph
    internal = set(piece.internal_edge_ids)
    values = {
        g.edge_ids[i]: (Fraction(1) if (matching_mask >> i) & 1 else THIRD)
        for i in range(g.m)
    }
    parts = _parts_from_submatching(g, internal, submatching_mask)
    forced = frozenset(eid for eid in internal if values[eid] == 1)
    return ShiftedSolution(
        values=values,
        interior_graph=piece.internal_graph()[0],
        interior_edge_ids=tuple(sorted(internal)),
        parts=parts,
        forced=forced,
        provenance={
            "matching": tuple(sorted(g.edge_ids[i] for i in _bits(matching_mask))),
            "submatching": tuple(sorted(g.edge_ids[i] for i in _bits(submatching_mask))),
            "surgery": None,
        },
    )


# ---------------------------------------------------------------------------
# odd pieces: split and surgery
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SplitPiece:
    """Even companion of an odd piece: external vertex split into two.

    The graph keeps interior vertices first, then the two new external
    vertices; the added parallel pair carries synthetic negative ids.
    ``interior_cut_ids`` are the four original external edge ids.
    """

    base: LocalMultigraph
    graph: MultiGraph
    pairing: tuple[tuple[int, int], tuple[int, int]]
    interior_cut_ids: tuple[int, ...]

    @property
    def interior_vertex_count(self) -> int:
        return self.graph.n - 2

    def internal_edge_ids(self) -> list[int]:
        ext = set(self.interior_cut_ids) | {SPLIT_EDGE_A, SPLIT_EDGE_B}
        return sorted(e for e in self.graph.edge_ids if e not in ext)

    def interior_graph(self) -> MultiGraph:
        k = self.interior_vertex_count
        internal = set(self.internal_edge_ids())
        edges = [
            (eid, u, v)
            for eid, (u, v) in zip(self.graph.edge_ids, self.graph.endpoints)
            if eid in internal
        ]
        return MultiGraph(k, edges, self.graph.vertex_sets[:k])

    def boundary_vertex_of(self, eid: int) -> int:
        pos = self.graph.edge_index(eid)
        u, v = self.graph.endpoints[pos]
        return u if u < self.interior_vertex_count else v


def pairings_of(ids: Sequence[int]) -> list[tuple[tuple[int, int], tuple[int, int]]]:
    a, b, c, d = sorted(ids)
    return [((a, b), (c, d)), ((a, c), (b, d)), ((a, d), (b, c))]


def split_external(piece: LocalMultigraph,
                   pairing: tuple[tuple[int, int], tuple[int, int]]) -> SplitPiece:
    """Replace the external vertex by two, each taking one pair of its edges."""
    interior, mapping = piece.internal_graph()
    k = interior.n
    r1, r2 = k, k + 1
    edges = [(eid, u, v) for eid, (u, v) in zip(interior.edge_ids, interior.endpoints)]
    ext_ids = piece.external_edge_ids
    side = {eid: r1 for eid in pairing[0]}
    side.update({eid: r2 for eid in pairing[1]})
    g = piece.graph
    for eid in ext_ids:
        pos = g.edge_index(eid)
        u, v = g.endpoints[pos]
        inner = u if u != piece.external_vertex else v
        edges.append((eid, mapping[inner], side[eid]))
    edges.append((SPLIT_EDGE_A, r1, r2))
    edges.append((SPLIT_EDGE_B, r1, r2))
    sets = list(interior.vertex_sets) + [frozenset(), frozenset()]
    return SplitPiece(
        base=piece,
        graph=MultiGraph(k + 2, edges, sets),
        pairing=pairing,
        interior_cut_ids=tuple(sorted(ext_ids)),
    )


def odd_split(piece: LocalMultigraph, rng: np.random.Generator) -> SplitPiece:
    """Split with one of the three pairings of the external edges, uniformly."""
    options = pairings_of(piece.external_edge_ids)
    return split_external(piece, options[int(rng.integers(0, 3))])


def surgery_options(split: SplitPiece, matching_mask: int) -> list[tuple]:
    """All (kind, trigger edge, adjusted edge) branches with their weights.

    Decrease branches pick any of the four interior-cut edges and any of
    the three internal edges at its boundary endpoint.  Increase branches
    pick one of the two matched interior-cut edges instead.  Weights are
    exact probabilities conditioned on the matching.
    """
    g = split.graph
    matched_ids = {g.edge_ids[i] for i in _bits(matching_mask)}
    cut_in_m = sorted(set(split.interior_cut_ids) & matched_ids)
    branches = []
    if not cut_in_m:
        pool = sorted(split.interior_cut_ids)
        p_e = Fraction(1, 4)
        kind = "decrease"
    else:
        assert len(cut_in_m) == 2
        pool = cut_in_m
        p_e = Fraction(1, 2)
        kind = "increase"
    internal = set(split.internal_edge_ids())
    for eid in pool:
        u = split.boundary_vertex_of(eid)
        adj = sorted(
            g.edge_ids[j] for j in g.incident(u) if g.edge_ids[j] in internal
        )
        assert len(adj) == 3
        for f in adj:
            branches.append((kind, eid, f, p_e * THIRD))
    return branches


def apply_surgery(split: SplitPiece, matching_mask: int, submatching_mask: int,
                  kind: str, trigger: int, adjusted: int,
                  dropped: Optional[int] = None) -> ShiftedSolution:
    """Shift on the split graph, then move one third of value on ``adjusted``.

    For an increase hitting a three-edge part, ``dropped`` names the part
    member removed so the surviving pair is tight at one.
    """
    g = split.graph
    internal = set(split.internal_edge_ids())
    values = {
        g.edge_ids[i]: (Fraction(1) if (matching_mask >> i) & 1 else THIRD)
        for i in range(g.m)
    }
    parts = list(_parts_from_submatching(g, internal, submatching_mask))
    if kind == "decrease":
        values[adjusted] -= THIRD
    elif kind == "increase":
        values[adjusted] += THIRD
        home = [p for p in parts if adjusted in p]
        if home:
            (p,) = home
            if len(p) == 3:
                assert dropped in p and dropped != adjusted
                parts[parts.index(p)] = tuple(e for e in p if e != dropped)
            else:
                assert dropped is None
    else:
        raise ValueError(kind)
    forced = frozenset(eid for eid in internal if values[eid] == 1)
    return ShiftedSolution(
        values=values,
        interior_graph=split.interior_graph(),
        interior_edge_ids=tuple(sorted(internal)),
        parts=tuple(sorted(parts)),
        forced=forced,
        provenance={
            "matching": tuple(sorted(g.edge_ids[i] for i in _bits(matching_mask))),
            "submatching": tuple(sorted(g.edge_ids[i] for i in _bits(submatching_mask))),
            "surgery": (kind, trigger, adjusted, dropped),
            "pairing": split.pairing,
        },
    )


def odd_surgery(split: SplitPiece, matching_mask: int, submatching_mask: int,
                rng: np.random.Generator) -> ShiftedSolution:
    """Random surgery branch followed by the part adjustment."""
    branches = surgery_options(split, matching_mask)
    kinds = {b[0] for b in branches}
    assert len(kinds) == 1
    kind = kinds.pop()
    if kind == "decrease":
        trigger = sorted(split.interior_cut_ids)[int(rng.integers(0, 4))]
    else:
        g = split.graph
        matched_ids = {g.edge_ids[i] for i in _bits(matching_mask)}
        pool = sorted(set(split.interior_cut_ids) & matched_ids)
        trigger = pool[int(rng.integers(0, 2))]
    g = split.graph
    internal = set(split.internal_edge_ids())
    u = split.boundary_vertex_of(trigger)
    adj = sorted(g.edge_ids[j] for j in g.incident(u) if g.edge_ids[j] in internal)
    adjusted = adj[int(rng.integers(0, 3))]
    dropped = None
    if kind == "increase":
        parts = _parts_from_submatching(g, internal, submatching_mask)
        home = [p for p in parts if adjusted in p]
        if home and len(home[0]) == 3:
            others = [e for e in home[0] if e != adjusted]
            dropped = others[int(rng.integers(0, 2))]
    return apply_surgery(split, matching_mask, submatching_mask, kind,
                         trigger, adjusted, dropped)


def _bits(mask: int):
    while mask:
        low = mask & -mask
        yield low.bit_length() - 1
        mask ^= low
