from fractions import Fraction

import numpy as np
import pytest

from htsp.errors import FeasibilityViolation
from htsp.hierarchy import build_hierarchy, min_cuts_via_hierarchy
from htsp.join import (
    ReductionParams,
    bipartization_flow,
    build_charge_sites,
    build_join,
    classify,
    coin_rates,
    detect_eal,
    exact_eal_probabilities,
    integral_join_and_tour,
    min_cost_perfect_matching,
    odd_vertices,
    shortest_path_metric,
    verify_join,
)
from htsp.pipeline import SamplerParams, build_piece_samplers, sample_r0_tree
from tests.conftest import family_instance

QUARTER = Fraction(1, 4)


def prepared(inst, sampler="mix"):
    h = build_hierarchy(inst)
    sp = SamplerParams(sampler=sampler)
    rp = ReductionParams.default(sp.effective_lambda)
    samplers = build_piece_samplers(h, sp)
    classes = classify(h)
    probs = exact_eal_probabilities(h, classes, samplers)
    rates = coin_rates(classes, rp, probs)
    sites = build_charge_sites(h, classes, rp)
    return h, sp, rp, samplers, classes, rates, sites


def test_classify_covers_every_edge_once(any_instance):
    h = build_hierarchy(any_instance)
    classes = classify(h)
    assert sorted(classes) == list(range(any_instance.graph.m))
    for eid, cl in classes.items():
        nd = h.nodes[cl.settled]
        assert nd.kind != "leaf"
        if cl.kind == "cycle":
            assert nd.kind == "cycle"
            c, c_prime = cl.canonical_cuts
            assert c and c_prime
        else:
            assert nd.kind == "degree"
            if cl.kind == "k5-degree":
                assert nd.piece.graph.n == 5


def test_classify_kinds_on_families():
    dc = classify(build_hierarchy(family_instance("double-cycle")))
    assert {c.kind for c in dc.values()} == {"cycle"}
    k5 = classify(build_hierarchy(family_instance("k5-gadget")))
    assert {c.kind for c in k5.values()} == {"cycle", "k5-degree"}
    zoo = classify(build_hierarchy(family_instance("zoo")))
    kinds = {c.kind for c in zoo.values()}
    assert {"cycle", "special", "half-special", "other-degree"} <= kinds


def test_detect_eal_double_cycle_flags_everything():
    # the topmost piece draws one edge per pair, so its edges are always even
    inst = family_instance("double-cycle")
    h = build_hierarchy(inst)
    classes = classify(h)
    sp = SamplerParams(sampler="mi")
    samplers = build_piece_samplers(h, sp)
    for trial in range(20):
        ts = sample_r0_tree(h, sp, seed=1, trial=trial, samplers=samplers)
        eal = detect_eal(h, classes, ts.edges)
        assert all(eal.values())


def test_detect_eal_degree_matches_parity_definition(zoo_instance):
    h = build_hierarchy(zoo_instance)
    classes = classify(h)
    sp = SamplerParams(sampler="mix")
    samplers = build_piece_samplers(h, sp)
    for trial in range(30):
        ts = sample_r0_tree(h, sp, seed=3, trial=trial, samplers=samplers)
        eal = detect_eal(h, classes, ts.edges)
        for nd in h.non_leaves():
            g = nd.piece.graph
            deg = {
                v: sum(1 for e in g.incident_ids(v) if e in ts.edges)
                for v in range(g.n)
            }
            if nd.kind == "cycle":
                flags = {
                    eal[e]
                    for e in g.edge_ids
                    if classes[e].settled == nd.node_id
                }
                assert len(flags) == 1  # shared flag per cycle piece
            else:
                for e in nd.piece.internal_edge_ids:
                    u, v = g.endpoints[g.edge_index(e)]
                    assert eal[e] == (deg[u] % 2 == 0 and deg[v] % 2 == 0)


def test_exact_eal_probabilities_clear_bounds(any_instance):
    for sampler in ("mi", "maxent", "mix"):
        h = build_hierarchy(any_instance)
        sp = SamplerParams(sampler=sampler)
        rp = ReductionParams.default(sp.effective_lambda)
        samplers = build_piece_samplers(h, sp)
        classes = classify(h)
        probs = exact_eal_probabilities(h, classes, samplers)
        from htsp.stats import eal_bounds_for

        bounds = eal_bounds_for(sp, rp)
        for e, cl in classes.items():
            assert float(probs[e]) >= float(bounds[cl.kind]) - 1e-12


def test_no_reduction_keeps_quarter(zoo_instance):
    h, sp, rp, samplers, classes, rates, sites = prepared(zoo_instance)
    ts = sample_r0_tree(h, sp, seed=7, trial=0, samplers=samplers)
    zero_rates = {g: 0.0 for g in rates}
    rng = np.random.default_rng(0)
    js = build_join(h, classes, rp, ts.edges, zero_rates, rng, sites)
    assert all(z == QUARTER for z in js.z.values())
    assert not js.reductions and not js.charges


def test_join_ledger_conservation(zoo_instance):
    h, sp, rp, samplers, classes, rates, sites = prepared(zoo_instance)
    degree_sites, pair_sites = sites
    cuts = min_cuts_via_hierarchy(h)
    for trial in range(60):
        ts = sample_r0_tree(h, sp, seed=13, trial=trial, samplers=samplers)
        rng = np.random.default_rng((13, trial))
        js = build_join(h, classes, rp, ts.edges, rates, rng, sites)
        # z equals quarter minus reduction plus received charges
        for e in range(zoo_instance.graph.m):
            expect = QUARTER - js.reductions.get(e, Fraction(0))
            for _, amt in js.charges.get(e, ()):
                expect += amt
            assert js.z[e] == expect
        # every deficient odd min-cut is repaid in full
        for site in degree_sites:
            odd = sum(1 for c in site.cut_ids if c in ts.edges) % 2 == 1
            if site.source in js.reductions and odd:
                received = sum(
                    amt
                    for f, _ in site.targets
                    for srcs, amt in js.charges.get(f, ())
                    if site.source in srcs
                )
                assert received == site.amount
        verify_join(js.z, ts.edges, h, cuts)


def test_partner_coins_correlated(k5_instance):
    h, sp, rp, samplers, classes, rates, sites = prepared(k5_instance)
    for trial in range(40):
        ts = sample_r0_tree(h, sp, seed=3, trial=trial, samplers=samplers)
        rng = np.random.default_rng((5, trial))
        js = build_join(h, classes, rp, ts.edges, rates, rng, sites)
        for e, cl in classes.items():
            if cl.kind != "cycle":
                continue
            partners = [
                f for f, c2 in classes.items() if c2.coin_group == cl.coin_group
            ]
            red = {f in js.reductions for f in partners}
            assert len(red) == 1  # all or none


def test_bipartization_flow_non_k5_cap():
    inst = family_instance("zoo")
    h = build_hierarchy(inst)
    piece = next(nd.piece for nd in h.non_leaves() if nd.kind == "degree")
    demands = {e: Fraction(1) for e in piece.external_edge_ids}
    assign = bipartization_flow(piece, demands)
    assert assign.cap == Fraction(1, 2)
    assert all(l <= assign.cap for l in assign.load.values())
    for s in demands:
        assert sum(x for (_, x) in assign.row(s)) == 1


def test_bipartization_flow_k5_thirds():
    inst = family_instance("k5-gadget")
    h = build_hierarchy(inst)
    piece = next(nd.piece for nd in h.non_leaves() if nd.kind == "degree")
    demands = {e: Fraction(1) for e in piece.external_edge_ids}
    assign = bipartization_flow(piece, demands)
    assert assign.cap == Fraction(2, 3)
    assert all(x == Fraction(1, 3) for x in assign.fractions.values())
    assert max(assign.load.values()) == Fraction(2, 3)


def test_bipartization_flow_mixed_demands():
    inst = family_instance("zoo")
    h = build_hierarchy(inst)
    piece = next(
        nd.piece for nd in h.non_leaves() if nd.kind == "degree" and nd.piece.graph.n > 5
    )
    rp = ReductionParams.default()
    ext = sorted(piece.external_edge_ids)
    demands = {
        ext[0]: rp.tau,
        ext[1]: rp.gamma,
        ext[2]: rp.beta / 2,
        ext[3]: rp.beta / 2,
    }
    assign = bipartization_flow(piece, demands)
    bound = max(rp.tau / 2, rp.gamma / 2, rp.beta / 4)
    assert assign.cap == bound
    assert all(l <= bound for l in assign.load.values())


def test_verify_join_passes_half_x(zoo_instance):
    h = build_hierarchy(zoo_instance)
    z = {e: QUARTER for e in range(zoo_instance.graph.m)}
    sp = SamplerParams(sampler="mi")
    samplers = build_piece_samplers(h, sp)
    ts = sample_r0_tree(h, sp, seed=2, trial=0, samplers=samplers)
    report = verify_join(z, ts.edges, h)
    assert report.ok


def test_verify_join_catches_deficient_cut(zoo_instance):
    h = build_hierarchy(zoo_instance)
    cuts = min_cuts_via_hierarchy(h)
    sp = SamplerParams(sampler="mi")
    samplers = build_piece_samplers(h, sp)
    for trial in range(50):
        ts = sample_r0_tree(h, sp, seed=4, trial=trial, samplers=samplers)
        odd_cut = next(
            (
                c
                for c in cuts
                if sum(1 for e in c.edge_ids if e in ts.edges) % 2 == 1
            ),
            None,
        )
        if odd_cut is not None:
            break
    assert odd_cut is not None
    z = {e: QUARTER for e in range(zoo_instance.graph.m)}
    z[odd_cut.edge_ids[0]] = Fraction(1, 4) - Fraction(1, 12)  # cut at 11/12
    with pytest.raises(FeasibilityViolation):
        verify_join(z, ts.edges, h, cuts)
    report = verify_join(z, ts.edges, h, cuts, raise_on_violation=False)
    assert not report.ok and report.cut_violations


def test_integral_join_empty_and_pair(zoo_instance):
    inst = zoo_instance
    metric = shortest_path_metric(inst)
    h = build_hierarchy(inst)
    sp = SamplerParams(sampler="mi")
    samplers = build_piece_samplers(h, sp)
    d, _ = metric
    for trial in range(30):
        ts = sample_r0_tree(h, sp, seed=6, trial=trial, samplers=samplers)
        res = integral_join_and_tour(inst, ts.edges, metric=metric)
        odd = odd_vertices(inst, ts.edges)
        if not odd:
            assert res.join_cost == 0
        if len(odd) == 2:
            assert res.join_cost == d[odd[0]][odd[1]]
        # a tour visits every vertex exactly once
        assert sorted(res.tour) == list(range(inst.graph.n))
        assert res.tour_cost <= res.tree_cost + res.join_cost


def _brute_force_matching(odd, d):
    best = None
    if not odd:
        return Fraction(0)
    first, rest = odd[0], odd[1:]
    for i in range(len(rest)):
        sub = rest[:i] + rest[i + 1:]
        cand = d[first][rest[i]] + _brute_force_matching(sub, d)
        if best is None or cand < best:
            best = cand
    return best


def test_matching_dp_against_brute_force(zoo_instance):
    inst = zoo_instance
    d, _ = shortest_path_metric(inst)
    h = build_hierarchy(inst)
    sp = SamplerParams(sampler="mix")
    samplers = build_piece_samplers(h, sp)
    memo = {}
    checked = 0
    for trial in range(40):
        ts = sample_r0_tree(h, sp, seed=8, trial=trial, samplers=samplers)
        odd = odd_vertices(inst, ts.edges)
        if len(odd) > 10:
            continue
        cost, pairs = min_cost_perfect_matching(odd, d, memo=memo)
        assert cost == _brute_force_matching(odd, d)
        assert sorted(v for p in pairs for v in p) == sorted(odd)
        checked += 1
    assert checked > 5


def test_exact_net_decrease_meets_delta_floor():
    """At the optimal operating point every edge's expected decrease clears
    the optimized floor, instance by instance, in exact arithmetic."""
    from htsp.oracle import exact_expected_net_decrease
    from htsp.params import solve_amounts

    sol = solve_amounts(Fraction(4715, 10000))
    floor = float(sol.delta)
    for family in ("double-cycle", "k5-gadget", "nested", "zoo", "random-4reg"):
        inst = family_instance(family)
        h = build_hierarchy(inst)
        sp = SamplerParams(sampler="mix")
        rp = ReductionParams.default(sp.effective_lambda)
        samplers = build_piece_samplers(h, sp)
        classes = classify(h)
        net = exact_expected_net_decrease(h, classes, rp, samplers)
        worst = min(float(v) for v in net.values())
        assert worst >= floor - 1e-9, (family, worst, floor)


def test_exact_expected_join_cost_beats_bound():
    """The strongest cost check: the exact expectation of the fractional
    join cost sits below the guaranteed fraction of the LP value."""
    from htsp.oracle import exact_expected_join_cost
    from htsp.params import optimize

    res = optimize()
    for family in ("double-cycle", "k5-gadget", "nested", "zoo", "random-4reg"):
        inst = family_instance(family)
        h = build_hierarchy(inst)
        sp = SamplerParams(sampler="mix", mix_lambda=res.lam)
        rp = ReductionParams(res.tau, res.gamma, res.beta, sp.effective_lambda)
        samplers = build_piece_samplers(h, sp)
        classes = classify(h)
        expected = float(exact_expected_join_cost(h, classes, rp, samplers))
        bound = (0.5 - 0.001695) * float(inst.lp_cost())
        assert expected <= bound + 1e-9, (family, expected, bound)


def test_estimate_below_bound_raises(zoo_instance):
    from htsp.errors import EstimateBelowBound

    h = build_hierarchy(zoo_instance)
    classes = classify(h)
    rp = ReductionParams.default()
    bogus = {e: 1e-6 for e in classes}
    with pytest.raises(EstimateBelowBound):
        coin_rates(classes, rp, bogus)


def test_odd_set_limit():
    from htsp.errors import OddSetTooLarge

    d = [[Fraction(1)] * 24 for _ in range(24)]
    with pytest.raises(OddSetTooLarge):
        min_cost_perfect_matching(list(range(20)), d)
