"""Multigraph primitives and validated half-integral TSP instances.

The support graph of a half-integral subtour-elimination solution (after
doubling integral edges) is a 4-regular, 4-edge-connected multigraph with
one half unit on every edge.  Everything downstream works on contractions
of that graph, so edge identities must survive contraction: every edge
carries a stable integer id assigned in file order and never renumbered.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Sequence

from .errors import (
    ConnectivityError,
    DegreeError,
    EmptyShore,
    FullShore,
    ParseError,
    SpecialTripleError,
)


@dataclass(frozen=True)
class CutView:
    """Edges of a cut, its shore, and its size (x-value is half the size)."""

    shore: frozenset[int]
    edge_ids: tuple[int, ...]
    value: int

    @property
    def x_value(self) -> Fraction:
        return Fraction(self.value, 2)


class MultiGraph:
    """Immutable multigraph with stable edge ids and contraction bookkeeping.

    Vertices are 0..n-1.  ``vertex_sets[v]`` is the set of original vertex
    ids merged into v; for an uncontracted graph these are singletons.
    Parallel edges are distinct entries; self-loops are never stored.
    """

    __slots__ = ("n", "edge_ids", "endpoints", "vertex_sets", "_adj")

    def __init__(
        self,
        n: int,
        edges: Iterable[tuple[int, int, int]],
        vertex_sets: Sequence[frozenset[int]] | None = None,
    ):
        self.n = n
        edges = tuple(edges)
        self.edge_ids = tuple(e[0] for e in edges)
        self.endpoints = tuple((e[1], e[2]) for e in edges)
        for eid, (u, v) in zip(self.edge_ids, self.endpoints):
            if u == v:
                raise ValueError(f"self-loop on vertex {u} (edge {eid})")
            if not (0 <= u < n and 0 <= v < n):
                raise ValueError(f"edge {eid} endpoint out of range")
        if vertex_sets is None:
            vertex_sets = tuple(frozenset([v]) for v in range(n))
        self.vertex_sets = tuple(vertex_sets)
        adj: list[list[int]] = [[] for _ in range(n)]
        for i, (u, v) in enumerate(self.endpoints):
            adj[u].append(i)
            adj[v].append(i)
        self._adj = tuple(tuple(a) for a in adj)

    # -- basic queries ---------------------------------------------------

    @property
    def m(self) -> int:
        return len(self.edge_ids)

    def degree(self, v: int) -> int:
        return len(self._adj[v])

    def degrees(self) -> list[int]:
        return [len(a) for a in self._adj]

    def incident(self, v: int) -> tuple[int, ...]:
        """Positions (not ids) of edges incident to v."""
        return self._adj[v]

    def incident_ids(self, v: int) -> list[int]:
        return [self.edge_ids[i] for i in self._adj[v]]

    def edge_index(self, eid: int) -> int:
        return self.edge_ids.index(eid)

    def other_end(self, pos: int, v: int) -> int:
        u, w = self.endpoints[pos]
        return w if u == v else u

    def neighbors(self, v: int) -> set[int]:
        return {self.other_end(i, v) for i in self._adj[v]}

    def label(self, v: int) -> frozenset[int]:
        return self.vertex_sets[v]

    def cut(self, shore: Iterable[int]) -> CutView:
        """All edges with exactly one endpoint in the shore."""
        s = frozenset(shore)
        if not s:
            raise EmptyShore("cut shore is empty")
        if len(s) >= self.n:
            raise FullShore("cut shore covers every vertex")
        ids = tuple(
            eid
            for eid, (u, v) in zip(self.edge_ids, self.endpoints)
            if (u in s) != (v in s)
        )
        return CutView(shore=s, edge_ids=ids, value=len(ids))

    def is_connected(self) -> bool:
        if self.n == 0:
            return True
        seen = {0}
        stack = [0]
        while stack:
            v = stack.pop()
            for i in self._adj[v]:
                w = self.other_end(i, v)
                if w not in seen:
                    seen.add(w)
                    stack.append(w)
        return len(seen) == self.n

    # -- contraction -----------------------------------------------------

    def contract(self, shore: Iterable[int]) -> tuple["MultiGraph", dict[int, int]]:
        """Merge the shore into one vertex, drop self-loops, keep edge ids.

        Returns the contracted graph and the old-vertex -> new-vertex map.
        """
        s = frozenset(shore)
        if not s:
            raise EmptyShore("contraction shore is empty")
        keep = [v for v in range(self.n) if v not in s]
        mapping: dict[int, int] = {}
        for new, old in enumerate(keep):
            mapping[old] = new
        merged = len(keep)
        for v in s:
            mapping[v] = merged
        new_sets = [self.vertex_sets[old] for old in keep]
        new_sets.append(frozenset().union(*(self.vertex_sets[v] for v in sorted(s))))
        new_edges = []
        for eid, (u, v) in zip(self.edge_ids, self.endpoints):
            nu, nv = mapping[u], mapping[v]
            if nu != nv:
                new_edges.append((eid, nu, nv))
        return MultiGraph(merged + 1, new_edges, new_sets), mapping

    # -- recognizers -----------------------------------------------------

    def parallel_classes(self) -> dict[tuple[int, int], list[int]]:
        """Edge positions grouped by unordered endpoint pair."""
        classes: dict[tuple[int, int], list[int]] = {}
        for i, (u, v) in enumerate(self.endpoints):
            key = (u, v) if u < v else (v, u)
            classes.setdefault(key, []).append(i)
        return classes

    def double_cycle_order(self) -> list[int] | None:
        """Vertex order of the cycle if this is a double cycle, else None.

        A double cycle is a cycle with every edge doubled.  The degenerate
        two-vertex form (four parallel edges) is accepted; its pair split
        is up to the caller.
        """
        if self.n < 2 or any(d != 4 for d in self.degrees()):
            return None
        classes = self.parallel_classes()
        if self.n == 2:
            return [0, 1] if self.m == 4 else None
        if any(len(pos) != 2 for pos in classes.values()):
            return None
        if len(classes) != self.n:
            return None
        nbrs: dict[int, set[int]] = {v: set() for v in range(self.n)}
        for a, b in classes:
            nbrs[a].add(b)
            nbrs[b].add(a)
        if any(len(s) != 2 for s in nbrs.values()):
            return None
        # walk the cycle of parallel pairs
        order = [0]
        prev = None
        while True:
            cur = order[-1]
            nxt = [w for w in sorted(nbrs[cur]) if w != prev]
            if not nxt:
                return None
            if nxt[0] == 0 and len(order) > 2:
                break
            prev = cur
            order.append(nxt[0])
            if len(order) > self.n:
                return None
        return order if len(order) == self.n else None

    # -- connectivity ----------------------------------------------------

    def edge_connectivity(self) -> int:
        """Global edge connectivity (Stoer-Wagner on edge multiplicities)."""
        if self.n < 2:
            return 0
        if not self.is_connected():
            return 0
        w = [[0] * self.n for _ in range(self.n)]
        for u, v in self.endpoints:
            w[u][v] += 1
            w[v][u] += 1
        active = list(range(self.n))
        best = None
        while len(active) > 1:
            # maximum adjacency order
            a = [active[0]]
            rest = active[1:]
            weights = {v: w[active[0]][v] for v in rest}
            while rest:
                nxt = max(rest, key=lambda v: (weights[v], -v))
                a.append(nxt)
                rest.remove(nxt)
                for v in rest:
                    weights[v] += w[nxt][v]
            s, t = a[-2], a[-1]
            cut_of_phase = sum(w[t][v] for v in active if v != t)
            if best is None or cut_of_phase < best:
                best = cut_of_phase
            # merge t into s
            for v in active:
                if v not in (s, t):
                    w[s][v] += w[t][v]
                    w[v][s] = w[s][v]
            active.remove(t)
        return best if best is not None else 0


# ---------------------------------------------------------------------------
# Half-integral instances
# ---------------------------------------------------------------------------

SPECIAL_ROOT, SPECIAL_U, SPECIAL_V = 0, 1, 2


@dataclass(frozen=True)
class HalfIntegralInstance:
    """Support multigraph with costs; every edge carries x = 1/2.

    In strict form vertices 0, 1, 2 are the root triple: two parallel
    edges join 0-1 and two join 0-2.
    """

    graph: MultiGraph
    costs: tuple[Fraction, ...]
    strict: bool = True

    @property
    def special_triple(self) -> tuple[int, int, int] | None:
        return (SPECIAL_ROOT, SPECIAL_U, SPECIAL_V) if self.strict else None

    @property
    def root(self) -> int:
        return SPECIAL_ROOT

    def cost_of(self, eid: int) -> Fraction:
        return self.costs[eid]

    def lp_cost(self) -> Fraction:
        """Cost of the fractional solution: half the total edge cost."""
        return sum(self.costs, Fraction(0)) / 2

    def validate(self) -> None:
        g = self.graph
        for v, d in enumerate(g.degrees()):
            if d != 4:
                raise DegreeError(f"vertex {v} has degree {d}, expected 4")
        conn = g.edge_connectivity()
        if conn != 4:
            raise ConnectivityError(f"edge connectivity is {conn}, expected 4")
        if any(c < 0 for c in self.costs):
            raise ParseError("negative edge cost")
        if self.strict:
            if g.n < 3:
                raise SpecialTripleError("strict instances need at least 3 vertices")
            classes = g.parallel_classes()
            for pair in ((0, 1), (0, 2)):
                if len(classes.get(pair, [])) != 2:
                    raise SpecialTripleError(
                        f"vertices {pair} must be joined by exactly two parallel edges"
                    )


# -- instance file format ----------------------------------------------------
#
#   htsp <n> <m>
#   <u> <v> <cost>      (m lines, 0-based ids; duplicates = parallel edges)
#
# Comments start with '#'.  Costs are nonnegative decimals or a/b fractions.

_COST_RE = re.compile(r"^\d+(\.\d+)?$|^\d+/\d+$")


def _parse_cost(tok: str) -> Fraction:
    if not _COST_RE.match(tok):
        raise ParseError(f"bad cost literal {tok!r}")
    return Fraction(tok)


def parse_instance(text: str, strict: bool = True) -> HalfIntegralInstance:
    """Parse and fully validate an instance file."""
    lines = [
        ln.strip()
        for ln in text.splitlines()
        if ln.strip() and not ln.strip().startswith("#")
    ]
    if not lines:
        raise ParseError("empty instance")
    head = lines[0].split()
    if len(head) != 3 or head[0] != "htsp":
        raise ParseError(f"bad header line {lines[0]!r}")
    try:
        n, m = int(head[1]), int(head[2])
    except ValueError as exc:
        raise ParseError(f"bad header counts in {lines[0]!r}") from exc
    if len(lines) - 1 != m:
        raise ParseError(f"expected {m} edge lines, found {len(lines) - 1}")
    edges = []
    costs = []
    for eid, ln in enumerate(lines[1:]):
        parts = ln.split()
        if len(parts) != 3:
            raise ParseError(f"bad edge line {ln!r}")
        try:
            u, v = int(parts[0]), int(parts[1])
        except ValueError as exc:
            raise ParseError(f"bad endpoints in {ln!r}") from exc
        if not (0 <= u < n and 0 <= v < n):
            raise ParseError(f"endpoint out of range in {ln!r}")
        if u == v:
            raise ParseError(f"self-loop in {ln!r}")
        edges.append((eid, u, v))
        costs.append(_parse_cost(parts[2]))
    inst = HalfIntegralInstance(MultiGraph(n, edges), tuple(costs), strict=strict)
    inst.validate()
    return inst


def serialize_instance(inst: HalfIntegralInstance) -> str:
    g = inst.graph
    out = [f"htsp {g.n} {g.m}"]
    for eid in range(g.m):
        u, v = g.endpoints[eid]
        c = inst.costs[eid]
        cost = str(c) if c.denominator > 1 else str(c.numerator)
        out.append(f"{u} {v} {cost}")
    return "\n".join(out) + "\n"


def normalize_to_special_triple(inst: HalfIntegralInstance) -> HalfIntegralInstance:
    """Relabel so some vertex with two parallel-pair neighbours becomes 0.

    Fails when no vertex of the graph has two distinct neighbours that are
    each joined to it by parallel edge pairs; such instances need a
    construction this package does not attempt.
    """
    g = inst.graph
    classes = g.parallel_classes()
    for r in range(g.n):
        mates = sorted(
            u_or_v
            for (a, b), pos in classes.items()
            if len(pos) >= 2 and r in (a, b)
            for u_or_v in (a, b)
            if u_or_v != r
        )
        if len(mates) >= 2:
            u, v = mates[0], mates[1]
            perm = {r: 0, u: 1, v: 2}
            rest = [w for w in range(g.n) if w not in (r, u, v)]
            for i, w in enumerate(rest):
                perm[w] = 3 + i
            edges = [
                (eid, perm[a], perm[b])
                for eid, (a, b) in zip(g.edge_ids, g.endpoints)
            ]
            out = HalfIntegralInstance(
                MultiGraph(g.n, edges), inst.costs, strict=True
            )
            out.validate()
            return out
    raise SpecialTripleError("no vertex with two parallel-pair neighbours")
