"""Graph model, statistics, generation and churn."""

from fractions import Fraction

import pytest

from census import (
    ChurnParams,
    GenParams,
    Role,
    SeededRng,
    Topology,
    classify_role,
    compute_stats,
    generate_topology,
    mutate_topology,
    size_from_role_stats,
    topology_from_text,
    topology_to_text,
    validate,
)
from conftest import build_star, build_two_cluster


# -- roles -------------------------------------------------------------------


def test_classify_roles(two_cluster):
    assert classify_role(two_cluster, 0) is Role.MASTER
    assert classify_role(two_cluster, 2) is Role.PMP
    assert classify_role(two_cluster, 3) is Role.PURE_SLAVE


def test_classify_unknown_node(two_cluster):
    with pytest.raises(KeyError):
        classify_role(two_cluster, 99)


def test_classify_masterless_slave_rejected():
    t = Topology()
    t.add_master()
    orphan = t.add_slave()
    with pytest.raises(ValueError):
        classify_role(t, orphan)


def test_master_with_five_slaves_is_master():
    t = build_star(5)
    assert classify_role(t, 0) is Role.MASTER


# -- structural validation -----------------------------------------------------


def test_no_self_loops_or_monochrome_edges():
    t = Topology()
    m = t.add_master()
    m2 = t.add_master()
    s = t.add_slave()
    with pytest.raises(ValueError):
        t.add_edge(m, m)
    with pytest.raises(ValueError):
        t.add_edge(m, m2)
    t.add_edge(m, s)
    with pytest.raises(ValueError):
        t.add_edge(m, s)  # parallel edge


def test_node_ids_never_reused():
    t = Topology()
    a = t.add_master()
    b = t.add_slave()
    t.add_edge(a, b)
    t.remove_node(b)
    assert t.add_slave() == b + 1


# -- statistics ----------------------------------------------------------------


def test_stats_two_cluster(two_cluster):
    s = compute_stats(two_cluster)
    assert (s.n_total, s.n_masters, s.n_slaves, s.n_pmp, s.n_pure) == (7, 2, 5, 1, 4)
    assert s.edge_count == 6
    assert s.avg_deg_masters == 3
    assert s.avg_deg_slaves == Fraction(6, 5)
    assert s.avg_deg_pmp == 2


def test_stats_singleton_master():
    t = Topology()
    t.add_master()
    s = compute_stats(t)
    assert (s.n_total, s.n_masters, s.n_slaves, s.n_pmp, s.n_pure) == (1, 1, 0, 0, 0)
    assert s.avg_deg_masters == 0 and s.avg_deg_pmp == 0 and s.edge_count == 0


@pytest.mark.parametrize("k", [1, 4, 9])
def test_stats_star(k):
    s = compute_stats(build_star(k))
    assert s.n_total == k + 1
    assert s.avg_deg_masters == k
    assert s.n_pmp == 0
    assert s.avg_deg_slaves == 1


def test_stats_empty_topology_rejected():
    with pytest.raises(ValueError):
        compute_stats(Topology())


# -- the closed-form size identity ----------------------------------------------


def test_size_identity_two_cluster():
    assert size_from_role_stats(2, 3, 1, 2) == 7


@pytest.mark.parametrize("k", [0, 1, 7])
def test_size_identity_star(k):
    assert size_from_role_stats(1, k, 0, 0) == k + 1


def test_size_identity_negative_passthrough():
    # undersampled inputs may go negative; reported as-is
    assert size_from_role_stats(1, 0, 2, 5) == -7


def test_size_identity_exact_on_generated_graphs():
    rng = SeededRng(123).substream("topology")
    for i in range(50):
        params = GenParams(n_masters=2 + i % 5, n_slaves=10 + i, pmp_fraction=0.3,
                           max_pmp_degree=3)
        t = generate_topology(rng, params)
        s = compute_stats(t)
        est = size_from_role_stats(s.n_masters, s.avg_deg_masters, s.n_pmp, s.avg_deg_pmp)
        assert est == s.n_total


def test_proof_identities_on_generated_graphs():
    rng = SeededRng(321).substream("topology")
    for i in range(50):
        t = generate_topology(rng, GenParams(2 + i % 4, 8 + i, 0.25, 3))
        s = compute_stats(t)
        # slave-side and PMP-side excess degree agree
        assert s.n_slaves * (s.avg_deg_slaves - 1) == s.n_pmp * (s.avg_deg_pmp - 1)
        # every edge has one master and one slave endpoint
        master_deg = sum(t.degree(v) for v in t.master_ids())
        slave_deg = sum(t.degree(v) for v in t.slave_ids())
        assert master_deg == slave_deg == s.edge_count


# -- generation ------------------------------------------------------------------


def test_generate_star_when_no_pmps():
    t = generate_topology(SeededRng(42).substream("topology"),
                          GenParams(1, 5, 0.0))
    assert t.n_nodes == 6
    assert t.degree(0) == 5
    assert all(t.degree(v) == 1 for v in t.slave_ids())


def test_generate_bridged_pair():
    t = generate_topology(SeededRng(42).substream("topology"),
                          GenParams(2, 5, 0.2, max_pmp_degree=2))
    assert t.n_nodes == 7
    assert t.is_connected()
    s = compute_stats(t)
    assert s.n_pmp >= 1
    validate(t)


def test_generate_deterministic():
    params = GenParams(4, 30, 0.3, 3)
    a = generate_topology(SeededRng(7).substream("topology"), params)
    b = generate_topology(SeededRng(7).substream("topology"), params)
    assert a.edge_list() == b.edge_list()
    assert a.node_ids() == b.node_ids()
    c = generate_topology(SeededRng(8).substream("topology"), params)
    assert a.edge_list() != c.edge_list()


def test_generate_infeasible_connectivity():
    with pytest.raises(ValueError, match="connectivity"):
        generate_topology(SeededRng(1), GenParams(3, 10, 0.0))


def test_generate_pmp_needs_two_masters():
    with pytest.raises(ValueError, match="masters"):
        generate_topology(SeededRng(1), GenParams(1, 10, 0.5))


def test_generate_respects_invariants_across_grid():
    rng = SeededRng(99)
    count = 0
    for n_masters, n_slaves in [(1, 3), (2, 10), (5, 45), (8, 90)]:
        for frac in (0.0, 0.2, 0.4):
            for seed in range(5):
                try:
                    t = generate_topology(SeededRng(seed).substream("topology"),
                                          GenParams(n_masters, n_slaves, frac, 3))
                except ValueError:
                    continue  # infeasible corner of the grid
                validate(t)
                assert t.is_connected()
                count += 1
    assert count >= 30


# -- churn ------------------------------------------------------------------------


def test_migration_preserves_count_and_invariants(two_cluster):
    rng = SeededRng(5).substream("churn")
    changes = mutate_topology(two_cluster, rng, ChurnParams(migration_rate=1.0))
    assert any(c.kind == "migrate" for c in changes)
    assert two_cluster.n_nodes == 7
    validate(two_cluster)


def test_link_drop_demotes_pmp(two_cluster):
    two_cluster.remove_edge(2, 1)
    assert classify_role(two_cluster, 2) is Role.PURE_SLAVE
    assert compute_stats(two_cluster).n_pmp == 0


def test_churn_link_drop_produces_pure_slave():
    # drops happen only at the degree cap once every slave already toggled up
    t = build_two_cluster()
    t.max_pmp_degree = 2
    rng = SeededRng(11).substream("churn")
    seen_drop = False
    for _ in range(40):
        changes = mutate_topology(t, rng,
                                  ChurnParams(pmp_link_rate=0.5, preserve_connectivity=False))
        for c in changes:
            if c.kind == "link_drop" and t.has_node(c.node) and t.degree(c.node) == 1:
                assert classify_role(t, c.node) is Role.PURE_SLAVE
                seen_drop = True
        validate(t)
    assert seen_drop


def test_crash_of_leaf_accepted(two_cluster):
    rng = SeededRng(3).substream("churn")
    removed = None
    for _ in range(50):
        changes = mutate_topology(two_cluster, rng, ChurnParams(crash_rate=0.2))
        crashes = [c for c in changes if c.kind == "crash"]
        if crashes:
            removed = crashes[0]
            break
    assert removed is not None
    assert not two_cluster.has_node(removed.node)
    assert two_cluster.is_connected()
    validate(two_cluster)


def test_crash_of_master_removes_orphans():
    t = build_star(4)
    rng = SeededRng(0).substream("churn")
    for _ in range(30):
        changes = mutate_topology(t, rng, ChurnParams(crash_rate=0.3,
                                                      preserve_connectivity=False))
        if any(c.kind == "crash" and c.node == 0 for c in changes):
            break
    if not t.has_node(0):
        assert t.n_nodes == 0  # all pure slaves were orphaned with it


def test_preserve_connectivity_holds_under_heavy_churn():
    t = generate_topology(SeededRng(17).substream("topology"), GenParams(4, 36, 0.3, 3))
    rng = SeededRng(17).substream("churn")
    churn = ChurnParams(migration_rate=0.2, pmp_link_rate=0.1, crash_rate=0.02)
    for _ in range(60):
        mutate_topology(t, rng, churn)
        assert t.is_connected()
        validate(t)


def test_mutation_deterministic(two_cluster):
    t2 = build_two_cluster()
    churn = ChurnParams(migration_rate=0.5, pmp_link_rate=0.2)
    a = mutate_topology(two_cluster, SeededRng(9).substream("churn"), churn)
    b = mutate_topology(t2, SeededRng(9).substream("churn"), churn)
    assert a == b
    assert two_cluster.edge_list() == t2.edge_list()


# -- serialization -----------------------------------------------------------------


def test_text_round_trip(two_cluster):
    text = topology_to_text(two_cluster)
    back = topology_from_text(text)
    assert back.edge_list() == two_cluster.edge_list()
    assert back.node_ids() == two_cluster.node_ids()
    assert [back.colour(v) for v in back.node_ids()] == \
        [two_cluster.colour(v) for v in two_cluster.node_ids()]
    assert topology_to_text(back) == text


def test_text_format_shape(two_cluster):
    lines = topology_to_text(two_cluster).splitlines()
    assert lines[0] == "nodes 7"
    assert lines[1] == "node 0 m"
    assert lines[3] == "node 2 s"
    assert lines[8] == "edge 0 2"


def test_text_parse_errors():
    with pytest.raises(ValueError, match="line 1"):
        topology_from_text("garbage 1 2\n")
    with pytest.raises(ValueError, match="declares"):
        topology_from_text("nodes 3\nnode 0 m\n")
