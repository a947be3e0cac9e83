import io

import numpy as np
import pytest

from xbargraph.graph import (EdgeListGraph, ParseError, convert_representation,
                             out_degrees, parse_edge_list, sparse_to_edges)


def test_parse_basic_and_comments():
    text = """
    # comment line
    0 1        # trailing comment
    1 2 3.5
    2 0
    """
    g = parse_edge_list(text)
    assert g.num_vertices == 3
    assert g.num_edges == 3
    assert g.weight[(g.src == 1) & (g.dst == 2)][0] == 3.5


def test_parse_rejects_malformed():
    for bad in ("0", "0 1 2 3", "a b", "0 -1", "0 1 nan", "0 1 -2"):
        with pytest.raises(ParseError):
            parse_edge_list(bad)
    with pytest.raises(ParseError):
        parse_edge_list("# only comments")
    err = None
    try:
        parse_edge_list("0 1\nbroken")
    except ParseError as e:
        err = e
    assert err is not None and err.line == 2


def test_parse_weighted_flag():
    with pytest.raises(ParseError):
        parse_edge_list("0 1", weighted=True)
    with pytest.raises(ParseError):
        parse_edge_list("0 1 2", weighted=False)
    assert parse_edge_list("0 1 2", weighted=True).weight[0] == 2.0


def test_parse_accepts_file_object():
    g = parse_edge_list(io.StringIO("0 1\n1 0\n"))
    assert g.num_edges == 2


def test_duplicate_edges_keep_last_weight():
    g = EdgeListGraph.from_edges([(0, 1, 5), (0, 1, 9), (1, 0, 2)])
    assert g.num_edges == 2
    assert g.weight[(g.src == 0) & (g.dst == 1)][0] == 9


def test_from_edges_sorted_and_bounds():
    g = EdgeListGraph.from_edges([(3, 0), (1, 2), (0, 3)])
    pairs = list(zip(g.src.tolist(), g.dst.tolist()))
    assert pairs == sorted(pairs)
    with pytest.raises(ParseError):
        EdgeListGraph.from_edges([(0, 5)], num_vertices=3)


def test_out_degrees():
    g = EdgeListGraph.from_edges([(0, 1), (0, 2), (2, 0)], num_vertices=4)
    assert list(out_degrees(g)) == [2, 0, 1, 0]
    assert list(out_degrees(g, size=6)) == [2, 0, 1, 0, 0, 0]


def test_sparse_roundtrip_all_kinds():
    rng = np.random.default_rng(1)
    src = rng.integers(0, 30, 120)
    dst = rng.integers(0, 30, 120)
    g = EdgeListGraph.from_edges(
        list(zip(src.tolist(), dst.tolist(), range(120))), num_vertices=30)
    base = set(zip(g.src.tolist(), g.dst.tolist(), g.weight.tolist()))
    for kind in ("coo", "csr", "csc"):
        rep = convert_representation(g, kind)
        s, d, w = sparse_to_edges(rep)
        assert set(zip(s.tolist(), d.tolist(), w.tolist())) == base
    with pytest.raises(ValueError):
        convert_representation(g, "ell")
