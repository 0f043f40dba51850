import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from cityswb._validation import InputError
from cityswb.corpus import partition_by_day
from cityswb.interaction import (CommentTree, DailyGraph, GraphMetrics, TreeMetrics,
                                 average_graph_metrics, average_tree_metrics, build_daily_graph,
                                 build_tree, community_graph_metrics, community_tree_metrics,
                                 graph_metrics, tree_metrics)

from conftest import make_record
from oracles import floyd_warshall_metrics, random_graph, random_tree, recursive_tree_metrics


def _graph(edges, extra=()):
    nodes = sorted({v for e in edges for v in e} | set(extra))
    return DailyGraph(nodes=nodes, edges={tuple(sorted(e)) for e in edges})


# -- graph construction --

def test_reply_makes_edge():
    post = make_record("p", author="A")
    g = build_daily_graph([post, make_record("c", author="B", parent_id="p")], {"p": "A"})
    assert g.nodes == ["A", "B"] and g.edges == {("A", "B")}


def test_repeated_replies_single_edge():
    recs = [make_record(f"c{i}", author="B", parent_id="p") for i in range(2)]
    g = build_daily_graph(recs, {"p": "A"})
    assert g.edges == {("A", "B")}


def test_self_reply_no_edge():
    g = build_daily_graph([make_record("c", author="A", parent_id="p")], {"p": "A"})
    assert g.nodes == ["A"] and not g.edges


def test_deleted_authors_excluded():
    recs = [make_record("c1", author="[deleted]", parent_id="p"),
            make_record("c2", author="B", parent_id="q")]
    g = build_daily_graph(recs, {"p": "A", "q": "[removed]"})
    assert g.nodes == ["B"] and not g.edges


def test_parent_from_another_day_is_a_node():
    g = build_daily_graph([make_record("c", author="B", parent_id="old")], {"old": "Z"})
    assert g.nodes == ["B", "Z"]


def test_missing_parent_counted():
    g = build_daily_graph([make_record("c", author="B", parent_id="gone")], {})
    assert g.missing_parents == 1 and g.nodes == ["B"] and not g.edges


def test_edge_direction_irrelevant():
    g1 = build_daily_graph([make_record("c", author="B", parent_id="x")], {"x": "A"})
    g2 = build_daily_graph([make_record("c", author="A", parent_id="y")], {"y": "B"})
    assert g1.nodes == g2.nodes and g1.edges == g2.edges


# -- graph metrics --

def test_triangle():
    m = graph_metrics(_graph([("A", "B"), ("B", "C"), ("A", "C")]))
    assert m.density == 1.0 and m.diameter == 1 and m.mean_eccentricity == 1.0


def test_path():
    m = graph_metrics(_graph([("A", "B"), ("B", "C")]))
    assert m.density == pytest.approx(2 / 3)
    assert m.diameter == 2
    assert m.mean_eccentricity == pytest.approx(5 / 3)
    assert m.mean_shortest_path == pytest.approx(4 / 3)


def test_single_node():
    m = graph_metrics(DailyGraph(nodes=["A"], edges=set()))
    assert (m.density, m.mean_eccentricity, m.diameter, m.mean_shortest_path) == (0, 0, 0, 0)
    assert m.cc_count == 1 and m.mean_cc_size == 1


def test_two_components_with_isolate():
    m = graph_metrics(_graph([("A", "B"), ("C", "D"), ("D", "E")], extra=["F"]))
    assert m.cc_count == 3
    assert m.mean_cc_size == 2
    assert m.diameter == 2
    # ordered pairs: A-B (2 pairs, d=1), C-D-E (6 pairs, total 8)
    assert m.mean_shortest_path == pytest.approx((2 + 8) / 8)


def test_empty_graph_rejected():
    with pytest.raises(InputError):
        graph_metrics(DailyGraph(nodes=[], edges=set()))


def test_graph_metrics_match_floyd_warshall():
    rng = np.random.default_rng(2024)
    for _ in range(200):
        nodes, edges = random_graph(rng)
        got = graph_metrics(DailyGraph(nodes=nodes, edges=edges)).as_dict()
        want = floyd_warshall_metrics(nodes, edges)
        for k in ("node_count", "edge_count", "cc_count", "diameter"):
            assert got[k] == want[k], k
        for k in ("mean_degree", "density", "mean_eccentricity", "mean_cc_size",
                  "mean_shortest_path"):
            assert got[k] == pytest.approx(want[k], abs=1e-9), k


@settings(max_examples=80, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_graph_metrics_invariant_to_relabeling(seed):
    rng = np.random.default_rng(seed)
    nodes, edges = random_graph(rng)
    perm = dict(zip(nodes, rng.permutation([f"x{i}" for i in range(len(nodes))])))
    relabeled = DailyGraph(nodes=sorted(perm.values()),
                           edges={tuple(sorted((perm[u], perm[v]))) for u, v in edges})
    a = graph_metrics(DailyGraph(nodes=nodes, edges=edges)).as_dict()
    b = graph_metrics(relabeled).as_dict()
    assert a == pytest.approx(b, abs=1e-12)


@settings(max_examples=80, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_graph_metric_ranges(seed):
    nodes, edges = random_graph(np.random.default_rng(seed))
    m = graph_metrics(DailyGraph(nodes=nodes, edges=edges))
    assert 0 <= m.density <= 1 and m.cc_count >= 1
    if m.cc_count == 1:
        assert m.diameter >= m.mean_shortest_path


def test_average_graph_metrics():
    a = graph_metrics(_graph([("A", "B")], extra=["C", "D"]))
    assert average_graph_metrics([a]) == a
    b = GraphMetrics(**{**a.as_dict(), "density": 0.4})
    a = GraphMetrics(**{**a.as_dict(), "density": 0.2})
    assert average_graph_metrics([a, b]).density == pytest.approx(0.3)
    with pytest.raises(InputError):
        average_graph_metrics([])


# -- trees --

def _thread():
    post = make_record("p", created_at=0)
    comments = [make_record("c1", created_at=90, parent_id="p", link_id="p"),
                make_record("c2", created_at=200, parent_id="p", link_id="p"),
                make_record("c3", created_at=300, parent_id="c1", link_id="p")]
    return post, comments


def test_tree_example():
    post, comments = _thread()
    t = build_tree(post, comments)
    m = tree_metrics(t)
    assert (m.tree_size, m.direct_reply_count, m.leaf_node_count, m.max_level_width) == (4, 2, 2, 2)
    assert m.min_response_time_seconds == 90


def test_tree_without_comments():
    m = tree_metrics(build_tree(make_record("p"), []))
    assert (m.tree_size, m.direct_reply_count, m.leaf_node_count, m.max_level_width) == (1, 0, 1, 0)
    assert m.min_response_time_seconds is None


def test_star():
    post = make_record("p", created_at=100)
    comments = [make_record(f"c{i}", created_at=150 + i, parent_id="p") for i in range(5)]
    m = tree_metrics(build_tree(post, comments))
    assert m.max_level_width == 5 and m.leaf_node_count == 5
    assert m.min_response_time_seconds == 50


def test_orphan_attaches_to_root():
    post, comments = _thread()
    comments.append(make_record("c4", created_at=400, parent_id="missing"))
    t = build_tree(post, comments)
    assert t.orphans == 1 and "c4" in t.children["p"]
    assert tree_metrics(t).tree_size == 5


def test_response_time_floored_at_zero():
    post = make_record("p", created_at=1000)
    m = tree_metrics(build_tree(post, [make_record("c", created_at=900, parent_id="p")]))
    assert m.min_response_time_seconds == 0


def test_parent_cycle_cut_loose():
    post = make_record("p")
    comments = [make_record("a", created_at=1, parent_id="b"),
                make_record("b", created_at=2, parent_id="a")]
    t = build_tree(post, comments)
    assert sorted(t.children["p"]) == ["a", "b"] and t.orphans == 2
    assert tree_metrics(t).tree_size == 3


def _tree_from(root, parent, created):
    post = make_record(root, created_at=created[root])
    comments = [make_record(c, created_at=created[c], parent_id=p, link_id=root)
                for c, p in parent.items()]
    return build_tree(post, comments)


def test_tree_metrics_match_recursive_reference():
    rng = np.random.default_rng(7)
    for _ in range(200):
        root, parent, created = random_tree(rng)
        t = _tree_from(root, parent, created)
        children = {}
        for c, p in parent.items():
            children.setdefault(p, []).append(c)
        assert tree_metrics(t).as_dict() == recursive_tree_metrics(root, children, created)


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_tree_invariants(seed):
    root, parent, created = random_tree(np.random.default_rng(seed))
    t = _tree_from(root, parent, created)
    m = tree_metrics(t)
    internal = sum(1 for v in t.created if t.children.get(v))
    assert m.leaf_node_count + internal == m.tree_size
    assert m.direct_reply_count <= m.tree_size - 1
    assert m.leaf_node_count >= 1
    assert m.max_level_width >= m.direct_reply_count


def test_average_tree_metrics():
    one = tree_metrics(build_tree(make_record("p"), []))
    post, comments = _thread()
    three = tree_metrics(build_tree(post, comments[:2]))
    assert average_tree_metrics([one]) == one
    avg = average_tree_metrics([one, three])
    assert avg.tree_size == 2.0
    assert avg.min_response_time_seconds == 90
    with pytest.raises(InputError):
        average_tree_metrics([])


def test_community_level_metrics():
    day = 1546300800  # 2019-01-01
    recs = [make_record("p1", author="A", created_at=day),
            make_record("c1", author="B", created_at=day + 60, parent_id="p1", link_id="p1"),
            make_record("c2", author="C", created_at=day + 90, parent_id="c1", link_id="p1"),
            make_record("p2", author="B", created_at=day + 86400),
            make_record("p0", author="A", created_at=day - 86400)]   # 2018, excluded
    idx = partition_by_day(recs)
    g = community_graph_metrics(idx, "c", 2019)
    # day 1: path A-B-C; day 2: lone B
    assert g.node_count == 2.0 and g.edge_count == 1.0
    t = community_tree_metrics(idx, "c", 2019)
    assert t.tree_size == 2.0 and t.min_response_time_seconds == 60
