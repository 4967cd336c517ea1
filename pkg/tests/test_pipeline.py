from fractions import Fraction

import numpy as np
import pytest

from htsp.hierarchy import build_hierarchy
from htsp.pipeline import (
    SamplerParams,
    build_piece_samplers,
    restrict,
    sample_r0_tree,
    validate_r0_tree,
)
from tests.conftest import family_instance


@pytest.fixture(params=("mi", "mix"))
def sampler_params(request):
    return SamplerParams(sampler=request.param)


def test_sampled_trees_are_rooted_trees(any_instance, sampler_params):
    h = build_hierarchy(any_instance)
    samplers = build_piece_samplers(h, sampler_params)
    for trial in range(40):
        ts = sample_r0_tree(h, sampler_params, seed=42, trial=trial, samplers=samplers)
        assert len(ts.edges) == any_instance.graph.n  # validated inside as well


def test_edge_count_identity(any_instance):
    h = build_hierarchy(any_instance)
    total = 0
    for nd in h.non_leaves():
        interior = len(nd.piece.internal_vertices)
        total += interior - 1
        if nd.is_root:
            total += 2
    assert total == any_instance.graph.n


def test_compiled_exact_marginals_are_half(any_instance):
    h = build_hierarchy(any_instance)
    samplers = build_piece_samplers(h, SamplerParams(sampler="mi"))
    from htsp.join import classify
    from htsp.oracle import exact_marginals

    marg = exact_marginals(h, samplers, classify(h))
    for e in range(any_instance.graph.m):
        assert marg[e] == Fraction(1, 2)


def test_compiled_mix_marginals_near_half(zoo_instance):
    h = build_hierarchy(zoo_instance)
    samplers = build_piece_samplers(h, SamplerParams(sampler="mix"))
    from htsp.join import classify
    from htsp.oracle import exact_marginals

    marg = exact_marginals(h, samplers, classify(h))
    for e in range(zoo_instance.graph.m):
        assert abs(float(marg[e]) - 0.5) <= 2e-6


def test_generative_matches_compiled_distribution(k5_instance):
    """Frequencies from the generative path match the compiled mixture."""
    h = build_hierarchy(k5_instance)
    sp = SamplerParams(sampler="mi")
    samplers = build_piece_samplers(h, sp)
    degree = next(
        s for s in samplers.values() if getattr(s, "kind", "") in ("degree", "k5")
    )
    n = 30_000
    rng = np.random.default_rng(44)
    counts: dict[frozenset, int] = {}
    for _ in range(n):
        t, _ = degree.sample(rng)
        counts[t] = counts.get(t, 0) + 1
    assert set(counts) <= set(degree.trees)
    for t, p in zip(degree.trees, degree.probs):
        c = counts.get(t, 0)
        sd = max((p * (1 - p) / n) ** 0.5, 1e-9)
        assert abs(c / n - p) <= 4.5 * sd


def test_seeded_sampling_is_reproducible(zoo_instance):
    h = build_hierarchy(zoo_instance)
    sp = SamplerParams(sampler="mix")
    samplers = build_piece_samplers(h, sp)
    a = [sample_r0_tree(h, sp, seed=9, trial=t, samplers=samplers).edges for t in range(5)]
    b = [sample_r0_tree(h, sp, seed=9, trial=t, samplers=samplers).edges for t in range(5)]
    assert a == b
    c = [sample_r0_tree(h, sp, seed=10, trial=t, samplers=samplers).edges for t in range(5)]
    assert a != c


def test_restrict_parities(zoo_instance):
    h = build_hierarchy(zoo_instance)
    sp = SamplerParams(sampler="mi")
    samplers = build_piece_samplers(h, sp)
    ts = sample_r0_tree(h, sp, seed=5, trial=0, samplers=samplers)
    for nd in h.non_leaves():
        local, parity = restrict(h, ts.edges, nd.node_id)
        g = nd.piece.graph
        # interior edges of the restriction form a spanning tree of the piece
        interior_local = [e for e in local if e in set(nd.piece.internal_edge_ids)]
        assert len(interior_local) == len(nd.piece.internal_vertices) - 1
        assert sum(parity.values()) % 2 == 0
        # leaf nodes restrict to nothing
    for nd in h.nodes:
        if nd.kind == "leaf":
            local, parity = restrict(h, ts.edges, nd.node_id)
            assert local == frozenset() and parity == {}


def test_validate_rejects_bad_sets(zoo_instance):
    h = build_hierarchy(zoo_instance)
    from htsp.errors import AssemblyError

    with pytest.raises(AssemblyError):
        validate_r0_tree(h, frozenset(range(zoo_instance.graph.n - 1)))


def test_marginal_monte_carlo_loose(any_instance):
    h = build_hierarchy(any_instance)
    sp = SamplerParams(sampler="mix")
    samplers = build_piece_samplers(h, sp)
    n = 3_000
    counts = np.zeros(any_instance.graph.m)
    for trial in range(n):
        ts = sample_r0_tree(h, sp, seed=77, trial=trial, samplers=samplers)
        for e in ts.edges:
            counts[e] += 1
    sd = (0.25 / n) ** 0.5
    assert np.all(np.abs(counts / n - 0.5) <= 5 * sd)
