"""Whole-instance tree sampling over the cut hierarchy.

Each non-leaf node gets a piece sampler: degree pieces run the matching,
shifting, and constrained-tree machinery (matroid route, max-entropy
route, or a per-trial mix), K5 pieces draw a uniform Hamiltonian path,
and cycle pieces draw one edge per partner pair.  The union over pieces
is a rooted tree: the root vertex keeps degree two and everything else is
spanned exactly once.

Degree-piece sampling states (matching, color class, surgery branch) form
a finite mixture, so every piece also exposes its full tree distribution;
the matroid route's probabilities are exact rationals.  Batch experiments
draw from these compiled distributions; single-trial sampling walks the
generative path and keeps the full provenance ledger.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Optional, Union

import numpy as np

from .errors import AssemblyError, SizeLimitExceeded
from .hierarchy import CutHierarchy, HierarchyNode, LocalMultigraph
from .matching import (
    ShiftedSolution,
    apply_surgery,
    decompose_matchings,
    pairings_of,
    seven_coloring,
    shift,
    split_external,
    surgery_options,
)
from .trees import (
    ConstrainedTreeDistribution,
    constrained_tree_distribution,
    k5_paths,
    maxent_fit,
    maxent_tree_distribution,
)

DECOMPOSITION_INTERIOR_LIMIT = 12
DEFAULT_MIX_LAMBDA = Fraction(4715, 10000)


@dataclass(frozen=True)
class SamplerParams:
    """Which tree sampler degree pieces use, and its knobs."""

    sampler: str = "mix"  # 'mi' | 'maxent' | 'mix'
    mix_lambda: Fraction = DEFAULT_MIX_LAMBDA
    maxent_tolerance: float = 1e-6
    interior_limit: int = DECOMPOSITION_INTERIOR_LIMIT

    def __post_init__(self):
        if self.sampler not in ("mi", "maxent", "mix"):
            raise ValueError(f"unknown sampler {self.sampler!r}")
        if not 0 <= self.mix_lambda <= 1:
            raise ValueError("mix_lambda must be in [0, 1]")

    @property
    def effective_lambda(self) -> Fraction:
        """Max-entropy share implied by the sampler choice."""
        if self.sampler == "mi":
            return Fraction(0)
        if self.sampler == "maxent":
            return Fraction(1)
        return Fraction(self.mix_lambda)


# ---------------------------------------------------------------------------
# piece samplers
# ---------------------------------------------------------------------------

class CyclePieceSampler:
    """One edge per partner pair; the topmost piece also draws its root pairs."""

    kind = "cycle"

    def __init__(self, piece: LocalMultigraph, is_root: bool, node_id: Optional[int] = None):
        self.piece = piece
        self.node_id = node_id
        self.pairs: list[tuple[int, int]] = [tuple(p) for p in piece.internal_pairs()]
        if is_root:
            self.pairs += [tuple(p) for p in piece.external_pairs()]

    def sample(self, rng: np.random.Generator) -> tuple[frozenset[int], dict]:
        picks = rng.integers(0, 2, size=len(self.pairs))
        edges = frozenset(p[int(k)] for p, k in zip(self.pairs, picks))
        return edges, {"mode": "cycle"}

    def indicator_distribution(self, eids: list[int]) -> list[tuple[int, object]]:
        pair_of = {}
        for idx, (a, b) in enumerate(self.pairs):
            pair_of[a] = (idx, 0)
            pair_of[b] = (idx, 1)
        patterns = [(0, Fraction(1))]
        by_pair: dict[int, list[int]] = {}
        for j, e in enumerate(eids):
            idx, _ = pair_of[e]
            by_pair.setdefault(idx, []).append(j)
        for idx, members in sorted(by_pair.items()):
            new = []
            a, b = self.pairs[idx]
            for chosen in (a, b):
                bit = 0
                for j in members:
                    if eids[j] == chosen:
                        bit |= 1 << j
                for pat, pr in patterns:
                    new.append((pat | bit, pr * Fraction(1, 2)))
            patterns = new
        merged: dict[int, Fraction] = {}
        for pat, pr in patterns:
            merged[pat] = merged.get(pat, Fraction(0)) + pr
        return sorted(merged.items())

    def exact_marginal(self, eid: int) -> Fraction:
        return Fraction(1, 2)


class EnumeratedPieceSampler:
    """Degree or K5 piece with a fully enumerated interior-tree mixture."""

    def __init__(self, piece: LocalMultigraph, kind: str,
                 trees: list[frozenset[int]], probs: list,
                 exact: bool, generative, node_id: Optional[int] = None):
        self.piece = piece
        self.node_id = node_id
        self.kind = kind
        order = sorted(range(len(trees)), key=lambda i: sorted(trees[i]))
        self.trees = tuple(trees[i] for i in order)
        raw = [probs[i] for i in order]
        self.exact_probs: Optional[tuple[Fraction, ...]] = tuple(raw) if exact else None
        self.probs = np.array([float(p) for p in raw])
        self.probs = self.probs / self.probs.sum()
        self._cdf = np.cumsum(self.probs)
        self._generative = generative
        total = sum(raw, Fraction(0)) if exact else float(np.sum(self.probs))
        if exact:
            assert total == 1

    def sample(self, rng: np.random.Generator) -> tuple[frozenset[int], dict]:
        if self._generative is not None:
            return self._generative(rng)
        i = int(np.searchsorted(self._cdf, rng.random(), side="right"))
        return self.trees[min(i, len(self.trees) - 1)], {"mode": self.kind}

    def sample_compiled(self, rng: np.random.Generator) -> frozenset[int]:
        i = int(np.searchsorted(self._cdf, rng.random(), side="right"))
        return self.trees[min(i, len(self.trees) - 1)]

    def indicator_distribution(self, eids: list[int]) -> list[tuple[int, object]]:
        use_exact = self.exact_probs is not None
        merged: dict[int, object] = {}
        probs = self.exact_probs if use_exact else self.probs
        for t, pr in zip(self.trees, probs):
            pat = 0
            for j, e in enumerate(eids):
                if e in t:
                    pat |= 1 << j
            merged[pat] = merged.get(pat, Fraction(0) if use_exact else 0.0) + pr
        return sorted(merged.items())

    def exact_marginal(self, eid: int):
        if self.exact_probs is not None:
            return sum(
                (p for t, p in zip(self.trees, self.exact_probs) if eid in t),
                Fraction(0),
            )
        return float(sum(p for t, p in zip(self.trees, self.probs) if eid in t))


def k5_sampler(piece: LocalMultigraph, node_id: Optional[int] = None) -> EnumeratedPieceSampler:
    paths = k5_paths(piece)
    probs = [Fraction(1, len(paths))] * len(paths)
    return EnumeratedPieceSampler(piece, "k5", paths, probs, exact=True,
                                  generative=None, node_id=node_id)


# -- degree-piece state enumeration -----------------------------------------

def _submask_of_class(classes: list[list[int]], cls: int) -> int:
    mask = 0
    for i in classes[cls]:
        mask |= 1 << i
    return mask


def _mi_states(piece: LocalMultigraph, limit: int):
    """Yield (probability, ShiftedSolution) over the matroid route."""
    g = piece.graph
    if g.n - 1 > limit:
        raise SizeLimitExceeded(
            f"piece interior {g.n - 1} exceeds exact decomposition limit {limit}"
        )
    seventh = Fraction(1, 7)
    if g.n % 2 == 0:
        dist = decompose_matchings(piece)
        for mk, w in zip(dist.masks, dist.weights):
            classes = seven_coloring(g, mk)
            for cls in range(7):
                sub = _submask_of_class(classes, cls)
                yield w * seventh, shift(piece, mk, sub)
        return
    third = Fraction(1, 3)
    for pairing in pairings_of(piece.external_edge_ids):
        sp = split_external(piece, pairing)
        dist = decompose_matchings(sp)
        for mk, w in zip(dist.masks, dist.weights):
            classes = seven_coloring(sp.graph, mk)
            for cls in range(7):
                sub = _submask_of_class(classes, cls)
                base = third * w * seventh
                for kind, e, f, pb in surgery_options(sp, mk):
                    if kind == "decrease":
                        yield base * pb, apply_surgery(sp, mk, sub, kind, e, f)
                        continue
                    home = [p for p in _parts_of(sp, sub) if f in p]
                    if home and len(home[0]) == 3:
                        for dropped in (x for x in home[0] if x != f):
                            yield base * pb / 2, apply_surgery(
                                sp, mk, sub, kind, e, f, dropped
                            )
                    else:
                        yield base * pb, apply_surgery(sp, mk, sub, kind, e, f)


def _parts_of(sp, submask):
    from .matching import _parts_from_submatching

    return _parts_from_submatching(
        sp.graph, set(sp.internal_edge_ids()), submask
    )


def _maxent_states(piece: LocalMultigraph, limit: int):
    """Yield (probability, ShiftedSolution) over the max-entropy route."""
    g = piece.graph
    if g.n - 1 > limit:
        raise SizeLimitExceeded(
            f"piece interior {g.n - 1} exceeds enumeration limit {limit}"
        )
    if g.n % 2 == 0:
        dist = decompose_matchings(piece)
        for mk, w in zip(dist.masks, dist.weights):
            yield w, shift(piece, mk, 0)
        return
    third = Fraction(1, 3)
    for pairing in pairings_of(piece.external_edge_ids):
        sp = split_external(piece, pairing)
        dist = decompose_matchings(sp)
        for mk, w in zip(dist.masks, dist.weights):
            for kind, e, f, pb in surgery_options(sp, mk):
                yield third * w * pb, apply_surgery(sp, mk, 0, kind, e, f)


class DegreePieceSampler:
    """Runs both routes on one degree piece and caches every distribution."""

    kind = "degree"

    def __init__(self, piece: LocalMultigraph, params: SamplerParams,
                 node_id: Optional[int] = None):
        self.node_id = node_id
        self.params = params
        self.piece = piece
        self._mi_cache: dict = {}
        self._me_cache: dict = {}
        self._mi_mixture = None
        self._me_mixture = None
        self._matching_cache: dict = {}

    def _matching_setup(self, pairing_index: Optional[int]):
        """Cached (split piece, matching distribution) per split pairing."""
        if pairing_index not in self._matching_cache:
            if pairing_index is None:
                self._matching_cache[None] = (None, decompose_matchings(self.piece))
            else:
                sp = split_external(
                    self.piece,
                    pairings_of(self.piece.external_edge_ids)[pairing_index],
                )
                self._matching_cache[pairing_index] = (sp, decompose_matchings(sp))
        return self._matching_cache[pairing_index]

    # -- cached per-state distributions -----------------------------------

    def _mi_dist(self, shifted: ShiftedSolution) -> ConstrainedTreeDistribution:
        key = (tuple(sorted(shifted.values.items())), shifted.parts)
        if key not in self._mi_cache:
            self._mi_cache[key] = constrained_tree_distribution(shifted)
        return self._mi_cache[key]

    def _me_fit(self, shifted: ShiftedSolution):
        key = tuple(sorted(shifted.interior_values().items()))
        if key not in self._me_cache:
            self._me_cache[key] = maxent_fit(
                shifted.interior_graph,
                shifted.interior_values(),
                tolerance=self.params.maxent_tolerance,
            )
        return self._me_cache[key]

    def _me_tree_draw(self, fit, rng: np.random.Generator) -> frozenset[int]:
        table = getattr(fit, "_draw_table", None)
        if table is None:
            trees, probs = maxent_tree_distribution(fit)
            table = (trees, np.cumsum(probs))
            object.__setattr__(fit, "_draw_table", table)
        trees, cdf = table
        i = int(np.searchsorted(cdf, rng.random(), side="right"))
        return trees[min(i, len(trees) - 1)]

    # -- full mixtures ------------------------------------------------------

    def mi_mixture(self) -> dict[frozenset[int], Fraction]:
        if self._mi_mixture is None:
            acc: dict[frozenset[int], Fraction] = {}
            for pr, shifted in _mi_states(self.piece, self.params.interior_limit):
                dist = self._mi_dist(shifted)
                for t, w in zip(dist.trees, dist.weights):
                    acc[t] = acc.get(t, Fraction(0)) + pr * w
            assert sum(acc.values()) == 1
            self._mi_mixture = acc
        return self._mi_mixture

    def maxent_mixture(self) -> dict[frozenset[int], float]:
        if self._me_mixture is None:
            acc: dict[frozenset[int], float] = {}
            for pr, shifted in _maxent_states(self.piece, self.params.interior_limit):
                fit = self._me_fit(shifted)
                trees, probs = maxent_tree_distribution(fit)
                fpr = float(pr)
                for t, w in zip(trees, probs):
                    acc[t] = acc.get(t, 0.0) + fpr * float(w)
            self._me_mixture = acc
        return self._me_mixture

    def compiled(self) -> EnumeratedPieceSampler:
        lam = self.params.effective_lambda
        if lam == 0:
            mix = self.mi_mixture()
            trees = list(mix)
            return EnumeratedPieceSampler(
                self.piece, "degree", trees, [mix[t] for t in trees],
                exact=True, generative=self._generative, node_id=self.node_id,
            )
        me = self.maxent_mixture()
        acc: dict[frozenset[int], float] = {t: float(lam) * p for t, p in me.items()}
        if lam != 1:
            for t, p in self.mi_mixture().items():
                acc[t] = acc.get(t, 0.0) + float(1 - lam) * float(p)
        trees = list(acc)
        return EnumeratedPieceSampler(
            self.piece, "degree", trees, [acc[t] for t in trees],
            exact=False, generative=self._generative, node_id=self.node_id,
        )

    # -- generative path ----------------------------------------------------

    def _generative(self, rng: np.random.Generator) -> tuple[frozenset[int], dict]:
        lam = float(self.params.effective_lambda)
        use_maxent = bool(rng.random() < lam)
        piece = self.piece
        g = piece.graph
        odd = g.n % 2 == 1
        pairing_index = int(rng.integers(0, 3)) if odd else None
        sp, dist = self._matching_setup(pairing_index)
        mk = dist.sample(rng)
        if use_maxent:
            if odd:
                from .matching import odd_surgery

                shifted = odd_surgery(sp, mk, 0, rng)
            else:
                shifted = shift(piece, mk, 0)
            fit = self._me_fit(shifted)
            # drawing from the cached enumerated mixture is equal in law to
            # sequential conditioning and much cheaper per trial
            tree = self._me_tree_draw(fit, rng)
            prov = dict(shifted.provenance, mode="maxent")
            return tree, prov
        target = sp.graph if odd else g
        classes = seven_coloring(target, mk)
        sub = _submask_of_class(classes, int(rng.integers(0, 7)))
        if odd:
            from .matching import odd_surgery

            shifted = odd_surgery(sp, mk, sub, rng)
        else:
            shifted = shift(piece, mk, sub)
        tree = self._mi_dist(shifted).sample(rng)
        prov = dict(shifted.provenance, mode="mi")
        return tree, prov


PieceSampler = Union[CyclePieceSampler, EnumeratedPieceSampler]


def build_piece_samplers(h: CutHierarchy, params: SamplerParams) -> dict[int, PieceSampler]:
    """Compiled sampler per non-leaf node, keyed by node id."""
    out: dict[int, PieceSampler] = {}
    for nd in h.non_leaves():
        if nd.kind == "cycle":
            out[nd.node_id] = CyclePieceSampler(nd.piece, nd.is_root, nd.node_id)
        elif nd.piece.graph.n == 5:
            out[nd.node_id] = k5_sampler(nd.piece, nd.node_id)
        else:
            out[nd.node_id] = DegreePieceSampler(nd.piece, params, nd.node_id).compiled()
    return out


# ---------------------------------------------------------------------------
# assembly
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class TreeSample:
    """A sampled rooted tree plus per-piece provenance."""

    edges: frozenset[int]
    per_node: dict[int, frozenset[int]]
    provenance: dict[int, dict]


def piece_rng(seed: int, trial: int, node_id: int) -> np.random.Generator:
    """Independent, reproducible stream for one piece in one trial."""
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(trial, node_id)))


def sample_r0_tree(
    h: CutHierarchy,
    params: SamplerParams,
    rng: Optional[np.random.Generator] = None,
    *,
    seed: Optional[int] = None,
    trial: int = 0,
    samplers: Optional[dict[int, PieceSampler]] = None,
) -> TreeSample:
    """Sample every piece (post-order) and validate the assembled tree."""
    if samplers is None:
        samplers = build_piece_samplers(h, params)
    edges: set[int] = set()
    prov: dict[int, dict] = {}
    for nd in sorted(h.non_leaves(), key=lambda nd: nd.node_id):
        r = rng if rng is not None else piece_rng(seed or 0, trial, nd.node_id)
        sub, p = samplers[nd.node_id].sample(r)
        edges |= sub
        prov[nd.node_id] = p
    ts = TreeSample(frozenset(edges), {}, prov)
    validate_r0_tree(h, ts.edges)
    return ts


def validate_r0_tree(h: CutHierarchy, edges: frozenset[int]) -> None:
    g = h.instance.graph
    root = h.instance.root
    if len(edges) != g.n:
        raise AssemblyError(f"expected {g.n} edges, got {len(edges)}")
    deg_root = sum(
        1 for eid in edges if root in g.endpoints[eid]
    )
    if deg_root != 2:
        raise AssemblyError(f"root degree {deg_root}, expected 2")
    parent = list(range(g.n))

    def find(x: int) -> int:
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for eid in edges:
        u, v = g.endpoints[eid]
        if root in (u, v):
            continue
        ru, rv = find(u), find(v)
        if ru == rv:
            raise AssemblyError("cycle among non-root edges")
        parent[ru] = rv
    comps = {find(v) for v in range(g.n) if v != root}
    if len(comps) != 1:
        raise AssemblyError("non-root edges do not span the other vertices")


def restrict(h: CutHierarchy, sample_edges: frozenset[int], node_id: int
             ) -> tuple[frozenset[int], dict[int, int]]:
    """Edges of the sample inside a node's piece, and piece-vertex parities."""
    nd = h.nodes[node_id]
    if nd.piece is None:
        return frozenset(), {}
    g = nd.piece.graph
    local = frozenset(eid for eid in g.edge_ids if eid in sample_edges)
    parity = {}
    for v in range(g.n):
        parity[v] = sum(1 for eid in g.incident_ids(v) if eid in local) % 2
    return local, parity
