import json
import subprocess
import sys
from fractions import Fraction

import numpy as np
import pytest

from htsp.generators import (
    PIECE_CATALOG,
    generate,
    generate_nested,
    generate_random_4reg,
    standalone_piece,
)
from htsp.graph import MultiGraph, parse_instance
from htsp.hierarchy import build_hierarchy, enumerate_min_cuts
from tests.conftest import ALL_FAMILIES, family_instance


def test_catalog_graphs_are_valid_pieces():
    for name, (n, edges) in PIECE_CATALOG.items():
        g = MultiGraph(n, [(i, u, v) for i, (u, v) in enumerate(edges)])
        assert all(d == 4 for d in g.degrees()), name
        assert g.edge_connectivity() == 4, name
        proper = [c for c in enumerate_min_cuts(g) if 1 < len(c.shore) < n - 1]
        assert proper == [], name


def test_catalog_special_edges():
    # pieces used for the correlation rows must have the needed structures
    for name in ("c7bar", "c8_12"):
        piece = standalone_piece(name)
        boundary = set(piece.boundary_vertices)
        interior = [
            v for v in piece.internal_vertices if v not in boundary
        ]
        g = piece.graph
        special = [
            eid
            for eid in piece.internal_edge_ids
            if all(
                w not in boundary for w in g.endpoints[g.edge_index(eid)]
            )
        ]
        assert special, name
        full_interior_vertices = [
            v
            for v in piece.internal_vertices
            if all(
                e in set(piece.internal_edge_ids) for e in g.incident_ids(v)
            )
        ]
        assert full_interior_vertices, name


def test_every_family_generates_valid_instances():
    rng = np.random.default_rng(0)
    for family in ALL_FAMILIES:
        inst = generate(family, rng, k=6, n=10, depth=2)
        inst.validate()
        assert inst.strict


def test_metric_costs_satisfy_triangle_inequality():
    inst = family_instance("zoo")
    from htsp.join import shortest_path_metric

    d, _ = shortest_path_metric(inst)
    g = inst.graph
    for eid, (u, v) in zip(g.edge_ids, g.endpoints):
        assert d[u][v] <= inst.costs[eid]
    n = g.n
    for a in range(n):
        for b in range(n):
            for c in range(n):
                assert d[a][b] <= d[a][c] + d[c][b]


def test_unit_costs_flag():
    rng = np.random.default_rng(1)
    inst = generate("double-cycle", rng, k=5, unit_costs=True)
    assert set(inst.costs) == {Fraction(1)}


def test_nested_depths():
    rng = np.random.default_rng(2)
    for depth in (2, 3):
        inst = generate_nested(depth, rng)
        h = build_hierarchy(inst)
        internal = [nd for nd in h.non_leaves() if not nd.is_root]
        chains = max(
            _chain_depth(h, nd) for nd in internal
        )
        assert chains >= depth


def _chain_depth(h, nd):
    depth = 1
    cur = nd
    while True:
        parent = next(
            (p for p in h.non_leaves() if cur.node_id in p.children), None
        )
        if parent is None or parent.is_root:
            return depth
        depth += 1
        cur = parent


def test_random_family_rejects_until_valid():
    rng = np.random.default_rng(3)
    for n in (8, 11, 13):
        inst = generate_random_4reg(n, rng)
        assert inst.graph.n == n
        assert inst.graph.edge_connectivity() == 4


def test_generated_instances_parse_roundtrip(any_instance):
    from htsp.graph import serialize_instance

    text = serialize_instance(any_instance)
    assert parse_instance(text).costs == any_instance.costs


def run_cli(*args: str) -> subprocess.CompletedProcess:
    return subprocess.run(
        [sys.executable, "-m", "htsp", *args],
        capture_output=True,
        text=True,
        check=False,
    )


@pytest.fixture(scope="module")
def instance_file(tmp_path_factory):
    path = tmp_path_factory.mktemp("inst") / "zoo.htsp"
    r = run_cli("generate", "--family", "zoo", "--seed", "3", "--out", str(path))
    assert r.returncode == 0, r.stderr
    return str(path)


def test_cli_generate_is_deterministic(tmp_path):
    a = run_cli("generate", "--family", "nested", "--seed", "5")
    b = run_cli("generate", "--family", "nested", "--seed", "5")
    c = run_cli("generate", "--family", "nested", "--seed", "6")
    assert a.stdout == b.stdout
    assert a.stdout != c.stdout


def test_cli_validate(instance_file):
    r = run_cli("validate", instance_file)
    assert r.returncode == 0 and "valid" in r.stdout


def test_cli_hierarchy_and_cactus(instance_file):
    r = run_cli("hierarchy", instance_file)
    assert r.returncode == 0
    payload = json.loads(r.stdout)
    assert "nodes" in payload and "min_cuts" in payload
    r2 = run_cli("cactus", instance_file)
    assert r2.returncode == 0
    cactus = json.loads(r2.stdout)
    assert cactus["cycles"] and cactus["phi"]


def test_cli_sample_reproducible(instance_file):
    a = run_cli("sample", instance_file, "--trials", "3", "--seed", "9",
                "--dump-shift")
    b = run_cli("sample", instance_file, "--trials", "3", "--seed", "9",
                "--dump-shift")
    assert a.returncode == 0 and a.stdout == b.stdout
    first = json.loads(a.stdout.splitlines()[0])
    assert "provenance" in first and len(first["edges"]) == 14


def test_cli_join_csv_schema(instance_file):
    r = run_cli("join", instance_file, "--trials", "4", "--seed", "2")
    assert r.returncode == 0, r.stderr
    lines = r.stdout.strip().splitlines()
    assert lines[0] == (
        "trial,seed,tree_cost,fractional_join_cost,integral_join_cost,"
        "tour_cost,ratio_to_cx"
    )
    assert len(lines) == 5
    r2 = run_cli("join", instance_file, "--trials", "4", "--seed", "2")
    assert r.stdout == r2.stdout


def test_cli_stats_marginals(instance_file):
    r = run_cli(
        "stats", "--instance", instance_file, "--suite", "marginals",
        "--trials", "4000", "--seed", "1", "--sampler", "mi",
    )
    assert r.returncode == 0, r.stdout + r.stderr
    lines = r.stdout.strip().splitlines()
    assert lines[0].startswith("suite,name,sampler")
    assert all(line.split(",")[9] == "1" for line in lines[1:])


def test_cli_stats_correlation_piece():
    r = run_cli(
        "stats", "--suite", "correlations", "--piece", "c8_12",
        "--sampler", "mi", "--trials", "3000", "--seed", "4",
    )
    assert r.returncode == 0, r.stdout + r.stderr


def test_cli_optimize_params():
    r = run_cli("optimize-params")
    assert r.returncode == 0
    payload = json.loads(r.stdout)
    assert abs(payload["lambda"] - 0.4715) <= 1e-4
    assert payload["binding"]


def test_cli_oracle(instance_file):
    r = run_cli("oracle", instance_file, "--sampler", "mi", "--format", "json")
    assert r.returncode == 0, r.stdout[-2000:]
    payload = json.loads(r.stdout)
    assert all(row["passed"] for row in payload["rows"])


def test_cli_normalize(tmp_path):
    # write a double cycle with the root parked at label 2
    from htsp.graph import serialize_instance
    from htsp.graph import HalfIntegralInstance

    edges = []
    for i in range(5):
        for _ in range(2):
            edges.append((len(edges), i, (i + 1) % 5))
    perm = {0: 2, 1: 0, 2: 3, 3: 4, 4: 1}
    edges = [(eid, perm[u], perm[v]) for eid, u, v in edges]
    inst = HalfIntegralInstance(
        MultiGraph(5, edges), (Fraction(1),) * 10, strict=False
    )
    path = tmp_path / "raw.htsp"
    path.write_text(serialize_instance(inst))
    r = run_cli("normalize", str(path))
    assert r.returncode == 0
    fixed = parse_instance(r.stdout)
    assert fixed.strict
