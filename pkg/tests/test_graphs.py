import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from mixlab.errors import PreconditionError
from mixlab.graphs import complete, cycle, explicit, hypercube, l1_distance, lazy_step_distribution, parse_graph, torus


def test_hypercube_neighbors_flip_one_coordinate():
    g = hypercube(3)
    got = {tuple(g.coordinates(v)) for v in g.neighbors(0)}
    assert got == {(1, 0, 0), (0, 1, 0), (0, 0, 1)}


def test_cycle_and_torus_neighbors():
    assert sorted(cycle(5).neighbors(0)) == [1, 4]
    g = torus(4, 2)
    got = {tuple(g.coordinates(v)) for v in g.neighbors(0)}
    assert got == {(1, 0), (3, 0), (0, 1), (0, 3)}


@pytest.mark.parametrize("g, expected", [
    (cycle(4), {0: 0.5, 1: 0.25, 3: 0.25}),
    (complete(3), {0: 0.5, 1: 0.25, 2: 0.25}),
])
def test_lazy_step_distribution(g, expected):
    assert dict(lazy_step_distribution(g, 0)) == pytest.approx(expected)


def test_lazy_step_hypercube2():
    g = hypercube(2)
    dist = dict(lazy_step_distribution(g, 0))
    assert dist[0] == 0.5
    assert dist[g.encode([1, 0])] == dist[g.encode([0, 1])] == 0.25
    assert g.encode([1, 1]) not in dist


def test_l1_distance_examples():
    g = torus(5, 2)
    assert l1_distance(g, g.encode([0, 0]), g.encode([2, 4])) == 3
    h = hypercube(4)
    assert l1_distance(h, 0, h.encode([1, 1, 1, 1])) == 4
    assert l1_distance(h, 5, 5) == 0


@settings(max_examples=50, deadline=None)
@given(n=st.integers(3, 7), d=st.integers(1, 3), data=st.data())
def test_torus_codec_roundtrip_and_symmetric_distance(n, d, data):
    g = torus(n, d)
    u = data.draw(st.integers(0, g.vertex_count - 1))
    v = data.draw(st.integers(0, g.vertex_count - 1))
    assert g.encode(g.coordinates(u)) == u
    assert l1_distance(g, u, v) == l1_distance(g, v, u)
    for w in g.neighbors(u):
        assert l1_distance(g, u, w) == 1


def test_lazy_rows_sum_to_one():
    for g in (cycle(6), torus(3, 2), hypercube(3), complete(5)):
        for v in range(g.vertex_count):
            assert sum(p for _, p in lazy_step_distribution(g, v)) == pytest.approx(1.0)


def test_parse_graph_strings(tmp_path):
    assert parse_graph("torus:n=5,d=3").vertex_count == 125
    assert parse_graph("hypercube:d=6").vertex_count == 64
    assert parse_graph("cycle:n=16").vertex_count == 16
    assert parse_graph("complete:n=8").vertex_count == 8
    f = tmp_path / "path.adj"
    f.write_text("0: 1\n1: 0 2\n2: 1\n")
    g = parse_graph(f"explicit:@{f}")
    assert g.vertex_count == 3 and not g.is_regular


@pytest.mark.parametrize("bad", ["cyc(3", "torus:n=5", "cycle:n=x", "moebius:n=3", "cycle:n"])
def test_parse_graph_rejects_malformed(bad):
    with pytest.raises(PreconditionError) as info:
        parse_graph(bad)
    assert info.value.field == "graph"


def test_invalid_construction():
    with pytest.raises(PreconditionError):
        cycle(2)
    with pytest.raises(PreconditionError):
        explicit([[1], []])
    with pytest.raises(PreconditionError):
        cycle(5).check_vertex(5)


def test_neighbor_table_matches_neighbors():
    g = torus(3, 3)
    tab = g.neighbor_table
    for v in range(g.vertex_count):
        assert sorted(tab[v]) == sorted(g.neighbors(v))
    assert np.all(g.degrees == 6)
