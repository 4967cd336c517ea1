import itertools
from fractions import Fraction

import numpy as np
import pytest

from htsp.errors import BoundaryTarget
from htsp.generators import standalone_piece
from htsp.graph import MultiGraph
from htsp.matching import ShiftedSolution, decompose_matchings, select_submatching, shift
from htsp.trees import (
    constrained_tree_distribution,
    enumerate_spanning_trees,
    in_spanning_tree_polytope,
    k5_paths,
    maxent_fit,
    maxent_marginals,
    maxent_sample,
    maxent_tree_distribution,
    mi_sample,
    sample_double_cycle,
    sample_k5_path,
    spanning_tree_count,
)

THIRD = Fraction(1, 3)


def shifted_on(graph, values, parts=(), forced=frozenset()):
    return ShiftedSolution(
        values=dict(values),
        interior_graph=graph,
        interior_edge_ids=tuple(sorted(values)),
        parts=tuple(parts),
        forced=frozenset(forced),
        provenance={},
    )


def test_triangle_uniform():
    tri = MultiGraph(3, [(0, 0, 1), (1, 1, 2), (2, 0, 2)])
    sh = shifted_on(tri, {0: Fraction(2, 3), 1: Fraction(2, 3), 2: Fraction(2, 3)})
    dist = constrained_tree_distribution(sh)
    assert sorted(map(sorted, dist.trees)) == [[0, 1], [0, 2], [1, 2]]
    assert all(w == THIRD for w in dist.weights)


def test_tight_part_forces_exactly_one():
    # a four-cycle with one tight two-edge part
    c4 = MultiGraph(4, [(0, 0, 1), (1, 1, 2), (2, 2, 3), (3, 3, 0)])
    values = {0: Fraction(2, 3), 1: Fraction(1, 3), 2: Fraction(1), 3: Fraction(1)}
    sh = shifted_on(c4, values, parts=((0, 1),), forced={2, 3})
    dist = constrained_tree_distribution(sh)
    for t in dist.trees:
        assert len({0, 1} & t) == 1
        assert {2, 3} <= t
    marg = dist.marginals()
    assert marg[0] == Fraction(2, 3) and marg[1] == Fraction(1, 3)


def test_mi_distribution_matches_shift_exactly():
    piece = standalone_piece("k44")
    dist = decompose_matchings(piece)
    rng = np.random.default_rng(4)
    mk = dist.masks[1]
    sub = select_submatching(piece, mk, rng)
    sh = shift(piece, mk, sub)
    ctd = constrained_tree_distribution(sh)
    marg = ctd.marginals()
    for eid, val in sh.interior_values().items():
        assert marg.get(eid, Fraction(0)) == val
    for part in sh.parts:
        for t in ctd.trees:
            assert len(set(part) & t) <= 1


def test_mi_sample_monte_carlo_marginals():
    piece = standalone_piece("k44")
    dist = decompose_matchings(piece)
    rng = np.random.default_rng(4)
    mk = dist.masks[0]
    sub = select_submatching(piece, mk, rng)
    sh = shift(piece, mk, sub)
    ctd = constrained_tree_distribution(sh)
    n = 100_000
    counts = {eid: 0 for eid in sh.interior_edge_ids}
    cdf = ctd.cdf()
    draws = np.searchsorted(cdf, np.random.default_rng(8).random(n), side="right")
    for d in np.minimum(draws, len(ctd.trees) - 1):
        for eid in ctd.trees[d]:
            counts[eid] += 1
    for eid, val in sh.interior_values().items():
        p = float(val)
        sd = max((p * (1 - p) / n) ** 0.5, 1e-9)
        assert abs(counts[eid] / n - p) <= 4 * sd


def test_maxent_c4_symmetry():
    c4 = MultiGraph(4, [(0, 0, 1), (1, 1, 2), (2, 2, 3), (3, 3, 0)])
    targets = {e: Fraction(3, 4) for e in range(4)}
    fit = maxent_fit(c4, targets)
    assert fit.fit_error <= 1e-6
    marg = maxent_marginals(fit)
    assert all(abs(marg[e] - 0.75) <= 1e-9 for e in range(4))
    trees, probs = maxent_tree_distribution(fit)
    assert len(trees) == 4
    assert np.allclose(probs, 0.25, atol=1e-9)


def test_maxent_k44_shifted_fit():
    piece = standalone_piece("k44")
    dist = decompose_matchings(piece)
    sh = shift(piece, dist.masks[0], 0)
    fit = maxent_fit(sh.interior_graph, sh.interior_values())
    assert fit.fit_error <= 1e-6
    marg = maxent_marginals(fit)
    for eid, val in sh.interior_values().items():
        assert abs(marg[eid] - float(val)) <= 1e-6


def test_maxent_rejects_bad_targets():
    tri = MultiGraph(3, [(0, 0, 1), (1, 1, 2), (2, 0, 2)])
    with pytest.raises(BoundaryTarget):
        maxent_fit(tri, {0: Fraction(1, 2), 1: Fraction(1, 2), 2: Fraction(1, 2)})
    with pytest.raises(BoundaryTarget):
        maxent_fit(tri, {0: Fraction(3, 2), 1: Fraction(1, 4), 2: Fraction(1, 4)})


def test_maxent_sample_c4_uniform():
    c4 = MultiGraph(4, [(0, 0, 1), (1, 1, 2), (2, 2, 3), (3, 3, 0)])
    targets = {e: Fraction(3, 4) for e in range(4)}
    fit = maxent_fit(c4, targets)
    rng = np.random.default_rng(3)
    n = 40_000
    counts: dict[frozenset, int] = {}
    for _ in range(n):
        t = maxent_sample(fit, rng)
        counts[t] = counts.get(t, 0) + 1
    assert len(counts) == 4
    for c in counts.values():
        p = c / n
        sd = (0.25 * 0.75 / n) ** 0.5
        assert abs(p - 0.25) <= 4 * sd


def test_maxent_sample_contains_forced():
    piece = standalone_piece("octahedron")
    dist = decompose_matchings(piece)
    sh = shift(piece, dist.masks[0], 0)
    fit = maxent_fit(sh.interior_graph, sh.interior_values())
    rng = np.random.default_rng(1)
    for _ in range(100):
        t = maxent_sample(fit, rng)
        assert sh.forced <= t
        assert len(t) == sh.interior_graph.n - 1


def test_maxent_sequential_matches_enumerated_distribution():
    """Sequential conditioning and the enumerated mixture agree."""
    piece = standalone_piece("octahedron")
    dist = decompose_matchings(piece)
    sh = shift(piece, dist.masks[2], 0)
    fit = maxent_fit(sh.interior_graph, sh.interior_values())
    trees, probs = maxent_tree_distribution(fit)
    idx = {t: i for i, t in enumerate(trees)}
    n = 60_000
    counts = np.zeros(len(trees))
    rng = np.random.default_rng(12)
    for _ in range(n):
        counts[idx[maxent_sample(fit, rng)]] += 1
    for i, p in enumerate(probs):
        sd = max((p * (1 - p) / n) ** 0.5, 1e-9)
        assert abs(counts[i] / n - p) <= 4.5 * sd


def test_maxent_negative_correlation_spot_check():
    piece = standalone_piece("k44")
    dist = decompose_matchings(piece)
    sh = shift(piece, dist.masks[0], 0)
    fit = maxent_fit(sh.interior_graph, sh.interior_values())
    trees, probs = maxent_tree_distribution(fit)
    ids = sorted(sh.interior_edge_ids)
    fractional = [e for e in ids if 0 < sh.values[e] < 1]
    for a, b in itertools.combinations(fractional[:6], 2):
        pa = sum(p for t, p in zip(trees, probs) if a in t)
        pb = sum(p for t, p in zip(trees, probs) if b in t)
        pab = sum(p for t, p in zip(trees, probs) if a in t and b in t)
        assert pab <= pa * pb + 1e-9


def test_sample_double_cycle():
    from tests.conftest import family_instance
    from htsp.hierarchy import build_hierarchy

    inst = family_instance("double-cycle")
    h = build_hierarchy(inst)
    piece = h.root.piece
    pairs = piece.internal_pairs()
    rng = np.random.default_rng(0)
    n = 20_000
    counts = {e: 0 for p in pairs for e in p}
    for _ in range(n):
        t = sample_double_cycle(piece, rng)
        assert len(t) == len(pairs)
        for a, b in pairs:
            assert (a in t) != (b in t)
        for e in t:
            counts[e] += 1
    for e, c in counts.items():
        assert abs(c / n - 0.5) <= 4 * (0.25 / n) ** 0.5


def test_k5_paths():
    from tests.conftest import family_instance
    from htsp.hierarchy import build_hierarchy

    inst = family_instance("k5-gadget")
    h = build_hierarchy(inst)
    piece = next(nd.piece for nd in h.non_leaves() if nd.kind == "degree")
    paths = k5_paths(piece)
    assert len(paths) == 12
    interior, _ = piece.internal_graph()
    for p in paths:
        assert len(p) == 3
        deg = {v: 0 for v in range(4)}
        for eid in p:
            u, v = interior.endpoints[interior.edge_index(eid)]
            deg[u] += 1
            deg[v] += 1
        assert sorted(deg.values()) == [1, 1, 2, 2]
    # each interior edge lies on exactly six of the twelve paths
    for eid in interior.edge_ids:
        assert sum(1 for p in paths if eid in p) == 6
    rng = np.random.default_rng(0)
    seen = {sample_k5_path(piece, rng) for _ in range(500)}
    assert seen == set(paths)


def test_spanning_tree_enumeration_against_kirchhoff():
    rng = np.random.default_rng(5)
    for _ in range(10):
        n = int(rng.integers(3, 6))
        edges = []
        eid = 0
        for u in range(n):
            for v in range(u + 1, n):
                for _ in range(int(rng.integers(0, 3))):
                    edges.append((eid, u, v))
                    eid += 1
        g = MultiGraph(n, edges)
        if not g.is_connected():
            continue
        assert len(enumerate_spanning_trees(g)) == spanning_tree_count(g)


def test_mi_sample_draws_constrained_trees():
    piece = standalone_piece("octahedron")
    dist = decompose_matchings(piece)
    rng = np.random.default_rng(21)
    mk = dist.masks[0]
    sub = select_submatching(piece, mk, rng)
    sh = shift(piece, mk, sub)
    for _ in range(50):
        t = mi_sample(sh, rng)
        assert sh.forced <= t
        assert len(t) == sh.interior_graph.n - 1
        for part in sh.parts:
            assert len(set(part) & t) <= 1


def test_maxent_nonconvergence_and_breakdown():
    from htsp.errors import NonConvergence, NumericalBreakdown
    from htsp.trees import _matrix_tree_marginals

    c4 = MultiGraph(4, [(0, 0, 1), (1, 1, 2), (2, 2, 3), (3, 3, 0)])
    targets = {0: Fraction(7, 10), 1: Fraction(7, 10), 2: Fraction(7, 10),
               3: Fraction(9, 10)}
    with pytest.raises(NonConvergence):
        maxent_fit(c4, targets, max_rounds=1)
    # a disconnected support never reaches the fit (the target sum check
    # rejects it first), but the Laplacian guard still protects sampling
    disconnected = MultiGraph(4, [(0, 0, 1), (1, 0, 1), (2, 2, 3), (3, 2, 3)])
    with pytest.raises(NumericalBreakdown):
        _matrix_tree_marginals(disconnected, [1.0, 1.0, 1.0, 1.0])
