"""Min-cut structure discovery: critical sets, the cut hierarchy, the cactus.

Every 4-regular 4-edge-connected multigraph decomposes into a rooted tree of
"critical" vertex sets (minimal proper tight sets not crossed by any other
proper tight set).  Contracting a node's children and its complement yields
its local multigraph, which is either a double cycle or has no proper
min-cuts.  The hierarchy encodes every min-cut of the graph: node cuts plus
contiguous-segment cuts of the cycle pieces.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import AssemblyError, SizeLimitExceeded
from .graph import CutView, HalfIntegralInstance, MultiGraph

BRUTE_FORCE_VERTEX_LIMIT = 24


# ---------------------------------------------------------------------------
# exhaustive min-cut enumeration (the trusted oracle)
# ---------------------------------------------------------------------------

def enumerate_min_cuts(g: MultiGraph, limit: int = BRUTE_FORCE_VERTEX_LIMIT) -> list[CutView]:
    """All cuts of value 4, one per shore/complement pair.

    The canonical shore is the side not containing vertex 0.  Includes the
    singleton cuts.  Exhaustive over 2^(n-1) shores, so refuses graphs with
    more than ``limit`` vertices.
    """
    n = g.n
    if n > limit:
        raise SizeLimitExceeded(f"{n} vertices exceeds brute-force limit {limit}")
    if n < 2:
        return []
    total = 1 << (n - 1)
    counts = np.zeros(total, dtype=np.int16)
    masks = np.arange(total, dtype=np.int64)
    for u, v in g.endpoints:
        bu = (masks >> (u - 1)) & 1 if u > 0 else np.zeros(total, dtype=np.int64)
        bv = (masks >> (v - 1)) & 1 if v > 0 else np.zeros(total, dtype=np.int64)
        counts += (bu != bv).astype(np.int16)
    hits = np.nonzero(counts == 4)[0]
    out = []
    for mask in hits:
        if mask == 0:
            continue
        shore = frozenset(v for v in range(1, n) if (int(mask) >> (v - 1)) & 1)
        out.append(g.cut(shore))
    out.sort(key=lambda c: (len(c.shore), sorted(c.shore)))
    return out


def crossing(a: frozenset[int], b: frozenset[int], n: int) -> bool:
    """True when both differences, the intersection, and the outside are nonempty."""
    if not (a & b) or not (a - b) or not (b - a):
        return False
    return len(a | b) < n


def proper_tight_shores(g: MultiGraph, limit: int = BRUTE_FORCE_VERTEX_LIMIT) -> list[frozenset[int]]:
    """Shores of proper cuts with value 4, without complement duplicates."""
    out = []
    for cut in enumerate_min_cuts(g, limit):
        if 1 < len(cut.shore) < g.n - 1:
            out.append(cut.shore)
    return out


def find_critical_set(g: MultiGraph, root_vertex: int) -> Optional[frozenset[int]]:
    """Minimal proper tight set not crossed by any proper tight set.

    Ties are broken by the lexicographically smallest sorted sequence of
    original vertex ids.  Returns None when every proper tight set is
    crossed (the graph is then a double cycle) or none exists.
    """
    shores = proper_tight_shores(g)
    pool: list[frozenset[int]] = []
    for s in shores:
        comp = frozenset(range(g.n)) - s
        for side in (s, comp):
            if any(crossing(side, t, g.n) for t in shores):
                continue
            pool.append(side)
    candidates = [s for s in pool if root_vertex not in s]
    if not candidates:
        return None
    minimal = [s for s in candidates if not any(t < s for t in candidates)]

    def orig_key(s: frozenset[int]) -> list[int]:
        return sorted(v for idx in s for v in g.vertex_sets[idx])

    return min(minimal, key=orig_key)


# ---------------------------------------------------------------------------
# hierarchy data model
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class LocalMultigraph:
    """A node's neighbourhood graph: children and complement contracted.

    ``graph`` has the internal vertices first and the external vertex last.
    ``chain`` is the internal vertex order for cycle pieces (None for degree
    pieces).  ``root_pairs`` carries, for the topmost piece only, the two
    parallel pairs at the external vertex, as edge-id pairs.
    """

    graph: MultiGraph
    external_vertex: int
    child_map: tuple[Optional[int], ...]  # piece vertex -> node id (None for external)
    chain: Optional[tuple[int, ...]] = None
    root_pairs: Optional[tuple[tuple[int, int], tuple[int, int]]] = None

    @property
    def internal_vertices(self) -> list[int]:
        return [v for v in range(self.graph.n) if v != self.external_vertex]

    @property
    def boundary_vertices(self) -> list[int]:
        ext = self.external_vertex
        return sorted({self.graph.other_end(i, ext) for i in self.graph.incident(ext)})

    @property
    def external_edge_ids(self) -> list[int]:
        return sorted(self.graph.incident_ids(self.external_vertex))

    @property
    def internal_edge_ids(self) -> list[int]:
        ext = set(self.graph.incident_ids(self.external_vertex))
        return sorted(eid for eid in self.graph.edge_ids if eid not in ext)

    def internal_graph(self) -> tuple[MultiGraph, dict[int, int]]:
        """The piece without its external vertex, plus vertex renumbering."""
        keep = self.internal_vertices
        mapping = {old: new for new, old in enumerate(keep)}
        edges = [
            (eid, mapping[u], mapping[v])
            for eid, (u, v) in zip(self.graph.edge_ids, self.graph.endpoints)
            if u != self.external_vertex and v != self.external_vertex
        ]
        sets = [self.graph.vertex_sets[old] for old in keep]
        return MultiGraph(len(keep), edges, sets), mapping

    def external_pairs(self) -> list[tuple[int, ...]]:
        """Parallel classes at the external vertex, as sorted edge-id tuples."""
        if self.root_pairs is not None:
            return [tuple(sorted(p)) for p in self.root_pairs]
        classes = self.graph.parallel_classes()
        ext = self.external_vertex
        out = []
        for (a, b), pos in sorted(classes.items()):
            if ext in (a, b):
                out.append(tuple(sorted(self.graph.edge_ids[i] for i in pos)))
        return out

    def internal_pairs(self) -> list[tuple[int, int]]:
        """Partner edge-id pairs between consecutive chain vertices."""
        if self.chain is None:
            return []
        classes = {
            (min(a, b), max(a, b)): pos
            for (a, b), pos in self.graph.parallel_classes().items()
        }
        pairs = []
        for x, y in zip(self.chain, self.chain[1:]):
            pos = classes[(min(x, y), max(x, y))]
            pairs.append(tuple(sorted(self.graph.edge_ids[i] for i in pos)))
        return pairs


@dataclass(frozen=True)
class HierarchyNode:
    """One node of the cut hierarchy."""

    node_id: int
    label: frozenset[int]
    kind: str  # 'degree' | 'cycle' | 'leaf'  (the root is a cycle node)
    children: tuple[int, ...]
    piece: Optional[LocalMultigraph]
    is_root: bool = False


@dataclass(frozen=True)
class CutHierarchy:
    instance: HalfIntegralInstance
    nodes: tuple[HierarchyNode, ...]
    root_id: int

    @property
    def root(self) -> HierarchyNode:
        return self.nodes[self.root_id]

    def non_leaves(self) -> list[HierarchyNode]:
        return [nd for nd in self.nodes if nd.kind != "leaf"]

    def node_by_label(self, label: frozenset[int]) -> HierarchyNode:
        for nd in self.nodes:
            if nd.label == label:
                return nd
        raise KeyError(label)


# ---------------------------------------------------------------------------
# hierarchy construction
# ---------------------------------------------------------------------------

def _root_external_pairs(inst: HalfIntegralInstance, piece_graph: MultiGraph,
                         ext: int) -> tuple[tuple[int, int], tuple[int, int]]:
    """Split the four root edges into their two parallel pairs.

    When the terminal double cycle has three or more vertices the split is
    forced by the piece itself; on two vertices it falls back to the root
    triple's original endpoints, then to edge order.
    """
    ids = sorted(piece_graph.incident_ids(ext))
    assert len(ids) == 4
    by_other: dict[int, list[int]] = {}
    root_orig = min(piece_graph.vertex_sets[ext])
    for eid in ids:
        u, v = inst.graph.endpoints[eid]
        other = v if u == root_orig else u
        by_other.setdefault(other, []).append(eid)
    groups = sorted(by_other.values())
    if len(groups) == 2 and all(len(g) == 2 for g in groups):
        return (tuple(groups[0]), tuple(groups[1]))
    return ((ids[0], ids[1]), (ids[2], ids[3]))


def _piece_from(inst: HalfIntegralInstance, current: MultiGraph,
                shore: frozenset[int], node_ids: dict[frozenset[int], int],
                is_root: bool) -> tuple[LocalMultigraph, str]:
    """Contract the complement of ``shore`` and classify the piece."""
    comp = frozenset(range(current.n)) - shore
    if comp:
        contracted, mapping = current.contract(comp)
        ext = contracted.n - 1
    else:
        raise AssemblyError("piece must have an external side")
    # reorder so internal vertices come first in a deterministic order
    internal_old = sorted(
        (v for v in range(contracted.n) if v != ext),
        key=lambda v: sorted(contracted.vertex_sets[v]),
    )
    order = internal_old + [ext]
    renum = {old: new for new, old in enumerate(order)}
    graph = MultiGraph(
        contracted.n,
        [
            (eid, renum[u], renum[v])
            for eid, (u, v) in zip(contracted.edge_ids, contracted.endpoints)
        ],
        [contracted.vertex_sets[old] for old in order],
    )
    ext = contracted.n - 1
    child_map = tuple(
        node_ids[graph.vertex_sets[v]] if v != ext else None
        for v in range(graph.n)
    )

    cycle_order = graph.double_cycle_order()
    if cycle_order is not None:
        rot = cycle_order.index(ext)
        chain = tuple(cycle_order[rot + 1:] + cycle_order[:rot])
        chain = _canonical_chain(graph, chain)
        root_pairs = _root_external_pairs(inst, graph, ext) if is_root else None
        piece = LocalMultigraph(graph, ext, child_map, chain=chain, root_pairs=root_pairs)
        return piece, "cycle"

    proper = [c for c in enumerate_min_cuts(graph) if 1 < len(c.shore) < graph.n - 1]
    if proper:
        raise AssemblyError(
            "piece is neither a double cycle nor free of proper min-cuts"
        )
    if graph.n < 5:
        raise AssemblyError("degree piece with fewer than five vertices")
    piece = LocalMultigraph(graph, ext, child_map)
    return piece, "degree"


def _canonical_chain(graph: MultiGraph, chain: tuple[int, ...]) -> tuple[int, ...]:
    if len(chain) < 2:
        return chain
    fwd = sorted(graph.vertex_sets[chain[0]])
    bwd = sorted(graph.vertex_sets[chain[-1]])
    return chain if fwd <= bwd else tuple(reversed(chain))


def build_hierarchy(inst: HalfIntegralInstance) -> CutHierarchy:
    """Run the contraction loop and assemble the hierarchy.

    Repeatedly contracts the minimal uncrossed proper tight set avoiding the
    root vertex; each such set becomes a node whose piece is the local
    multigraph at the moment of contraction.  The terminal graph must be a
    double cycle and becomes the root piece.
    """
    g0 = inst.graph
    if inst.strict:
        root_orig = 0
    elif g0.n == 2:
        root_orig = 0
    else:
        raise AssemblyError("hierarchy requires a strict instance")

    nodes: list[HierarchyNode] = []
    node_ids: dict[frozenset[int], int] = {}
    for v in range(g0.n):
        if v == root_orig:
            continue
        label = frozenset([v])
        node_ids[label] = len(nodes)
        nodes.append(HierarchyNode(len(nodes), label, "leaf", (), None))

    current = g0
    while True:
        root_vertex = next(
            v for v in range(current.n) if root_orig in current.vertex_sets[v]
        )
        shore = find_critical_set(current, root_vertex)
        if shore is None:
            break
        piece, kind = _piece_from(inst, current, shore, node_ids, is_root=False)
        label = frozenset().union(*(current.vertex_sets[v] for v in shore))
        children = tuple(
            piece.child_map[v] for v in piece.internal_vertices
        )
        node_ids[label] = len(nodes)
        nodes.append(HierarchyNode(len(nodes), label, kind, children, piece))
        current, _ = current.contract(shore)

    # terminal double cycle becomes the root piece
    root_vertex = next(
        v for v in range(current.n) if root_orig in current.vertex_sets[v]
    )
    shore = frozenset(range(current.n)) - {root_vertex}
    piece, kind = _piece_from(inst, current, shore, node_ids, is_root=True)
    if kind != "cycle":
        raise AssemblyError("terminal graph is not a double cycle")
    label = frozenset(range(g0.n)) - {root_orig}
    children = tuple(piece.child_map[v] for v in piece.internal_vertices)
    root_id = len(nodes)
    nodes.append(
        HierarchyNode(root_id, label, "cycle", children, piece, is_root=True)
    )
    h = CutHierarchy(inst, tuple(nodes), root_id)
    _check_hierarchy(h)
    return h


def _check_hierarchy(h: CutHierarchy) -> None:
    for nd in h.non_leaves():
        parts = [h.nodes[c].label for c in nd.children]
        union = frozenset().union(*parts)
        if union != nd.label or sum(len(p) for p in parts) != len(nd.label):
            raise AssemblyError(f"children of node {nd.node_id} do not partition it")
        piece = nd.piece
        ext_deg = piece.graph.degree(piece.external_vertex)
        if ext_deg != 4 or any(piece.graph.degree(v) != 4 for v in piece.internal_vertices):
            raise AssemblyError(f"piece of node {nd.node_id} is not 4-regular")
        allowed = {0, 2} if nd.kind == "cycle" else {0, 1}
        ext_ids = set(piece.external_edge_ids)
        for v in piece.internal_vertices:
            k = sum(1 for eid in piece.graph.incident_ids(v) if eid in ext_ids)
            if k not in allowed:
                raise AssemblyError(
                    f"boundary pattern {k} not allowed at a {nd.kind} node"
                )


# ---------------------------------------------------------------------------
# min-cuts implied by the hierarchy
# ---------------------------------------------------------------------------

def _canonical_shore(shore: frozenset[int], n: int) -> frozenset[int]:
    return shore if 0 not in shore else frozenset(range(n)) - shore


def min_cuts_via_hierarchy(h: CutHierarchy) -> list[CutView]:
    """Every min-cut: node cuts plus chain-segment cuts of cycle pieces."""
    g = h.instance.graph
    seen: dict[frozenset[int], CutView] = {}

    def add(shore: frozenset[int]) -> None:
        shore = _canonical_shore(shore, g.n)
        cut = g.cut(shore)
        key = frozenset(cut.edge_ids)
        if key not in seen:
            if cut.value != 4:
                raise AssemblyError(f"hierarchy produced a non-minimum cut {sorted(shore)}")
            seen[key] = cut

    for nd in h.nodes:
        add(nd.label)
        if nd.kind == "cycle" and nd.piece is not None and nd.piece.chain:
            chain = nd.piece.chain
            labels = [nd.piece.graph.vertex_sets[v] for v in chain]
            for i in range(len(chain)):
                agg: set[int] = set()
                for j in range(i, len(chain)):
                    agg |= labels[j]
                    add(frozenset(agg))
    return sorted(seen.values(), key=lambda c: (len(c.shore), sorted(c.shore)))


# ---------------------------------------------------------------------------
# cactus representation
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Cactus:
    graph: MultiGraph
    phi: dict[int, int]  # original vertex -> cactus vertex
    cycles: tuple[tuple[int, ...], ...]  # edge-id groups, one per cycle


def build_cactus(h: CutHierarchy) -> Cactus:
    """Cactus whose min-cuts pull back to exactly the graph's min-cuts.

    Cycle nodes contribute a cycle through themselves and their children in
    chain order; degree nodes contribute a two-edge cycle to each child.
    """
    vert_of_node = {nd.node_id: i for i, nd in enumerate(h.nodes)}
    nvert = len(h.nodes)
    edges: list[tuple[int, int, int]] = []
    cycles: list[tuple[int, ...]] = []
    eid = 0

    def new_edge(a: int, b: int) -> int:
        nonlocal eid
        edges.append((eid, a, b))
        eid += 1
        return eid - 1

    for nd in h.non_leaves():
        me = vert_of_node[nd.node_id]
        if nd.kind == "cycle":
            ring = [vert_of_node[h.nodes[nd.piece.child_map[v]].node_id]
                    for v in nd.piece.chain]
            ring = [me] + ring
            cyc = []
            for a, b in zip(ring, ring[1:] + ring[:1]):
                cyc.append(new_edge(a, b))
            cycles.append(tuple(cyc))
        else:
            for c in nd.children:
                child = vert_of_node[c]
                cyc = (new_edge(me, child), new_edge(me, child))
                cycles.append(cyc)

    graph = MultiGraph(nvert, edges, [frozenset([i]) for i in range(nvert)])
    phi: dict[int, int] = {}
    root_orig = 0
    for nd in h.nodes:
        if nd.kind == "leaf":
            phi[min(nd.label)] = vert_of_node[nd.node_id]
    phi[root_orig] = vert_of_node[h.root_id]
    return Cactus(graph, phi, tuple(cycles))


def cactus_min_cut_shores(cactus: Cactus, n_orig: int) -> set[frozenset[int]]:
    """Pull every cactus min-cut back to a canonical original-vertex shore."""
    g = cactus.graph
    out: set[frozenset[int]] = set()
    for cyc in cactus.cycles:
        k = len(cyc)
        for i in range(k):
            for j in range(i + 1, k):
                removed = {cyc[i], cyc[j]}
                comp = _component_after_removal(g, removed)
                shore = frozenset(
                    v for v in range(n_orig) if cactus.phi[v] in comp
                )
                if 0 < len(shore) < n_orig:
                    out.add(_canonical_shore(shore, n_orig))
    return out


def _component_after_removal(g: MultiGraph, removed_eids: set[int]) -> set[int]:
    seen = {0}
    stack = [0]
    while stack:
        v = stack.pop()
        for i in g.incident(v):
            if g.edge_ids[i] in removed_eids:
                continue
            w = g.other_end(i, v)
            if w not in seen:
                seen.add(w)
                stack.append(w)
    return seen
