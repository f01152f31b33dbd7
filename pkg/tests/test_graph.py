import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from rulelink.errors import ContractError, ParseError
from rulelink.graph import KnowledgeGraph, load_graph

from conftest import write_triples


def ids(g, *labels):
    return [g.entities.id(x) for x in labels]


def test_toy_counts(tmp_path, toy_graph):
    train = write_triples(tmp_path / "train.txt",
                          [("a", "s", "b"), ("b", "s", "c"), ("a", "r", "c"), ("a", "s", "d")])
    valid = write_triples(tmp_path / "valid.txt", [])
    test = write_triples(tmp_path / "test.txt", [])
    g = load_graph(train, valid, test)
    assert g.num_entities == 4
    assert g.num_relations == 2
    assert g.counts() == {"train": 4, "valid": 0, "test": 0}


def test_malformed_line_reports_line_number(tmp_path):
    path = tmp_path / "train.txt"
    path.write_text("a\ts\tb\na\tr\n", encoding="utf-8")
    with pytest.raises(ParseError) as err:
        load_graph(path)
    assert err.value.line == 2


def test_crlf_and_blank_lines_tolerated(tmp_path):
    path = tmp_path / "train.txt"
    path.write_bytes(b"a\ts\tb\r\n\r\nb\ts\tc\r\n")
    g = load_graph(path)
    assert g.entities.labels == ("a", "b", "c")


def test_duplicates_are_counted_and_dropped():
    g = KnowledgeGraph([("a", "s", "b"), ("a", "s", "b"), ("a", "s", "c")])
    assert len(g.train) == 2
    assert g.duplicates["train"] == 1


def test_vocabulary_order_is_first_occurrence():
    g = KnowledgeGraph([("x", "p", "y")], valid=[("z", "q", "x")], test=[("w", "p", "y")])
    assert g.entities.labels == ("x", "y", "z", "w")
    assert g.relations.labels == ("p", "q")


def test_labels_are_opaque():
    g = KnowledgeGraph([("A", "s", "a"), (" a", "s", "a")])
    assert g.num_entities == 3


def test_neighbors(toy_graph):
    g = toy_graph
    a, b, c, d = ids(g, "a", "b", "c", "d")
    s, r = g.relations.id("s"), g.relations.id("r")
    assert g.neighbors(s, a, "forward").tolist() == sorted([b, d])
    assert g.neighbors(r, c, "forward").tolist() == []
    assert g.neighbors(s, b, "backward").tolist() == [a]


def test_neighbors_rejects_bad_ids(toy_graph):
    with pytest.raises(ContractError):
        toy_graph.neighbors(0, 99)
    with pytest.raises(ContractError):
        toy_graph.neighbors(7, 0)


def test_csr_only_from_train():
    g = KnowledgeGraph([("a", "s", "b")], valid=[("b", "s", "c")], test=[("c", "s", "a")])
    s = g.relations.id("s")
    assert g.neighbors(s, g.entities.id("b")).tolist() == []


def test_is_known(toy_graph):
    g = toy_graph
    a, c = ids(g, "a", "c")
    r = g.relations.id("r")
    assert g.is_known(a, r, c, {"train"})
    assert not g.is_known(a, r, a, {"train"})
    assert not g.is_known(a, r, c, set())


def test_arrays_are_read_only(toy_graph):
    with pytest.raises(ValueError):
        toy_graph.train[0, 0] = 1
    with pytest.raises(ValueError):
        toy_graph.csr(0).indices[0] = 1


triples = st.lists(
    st.tuples(st.integers(0, 9), st.integers(0, 2), st.integers(0, 9)), max_size=60)


@settings(max_examples=60, deadline=None)
@given(triples)
def test_csr_properties(raw):
    g = KnowledgeGraph([(f"e{h}", f"r{r}", f"e{t}") for h, r, t in raw])
    truth = {tuple(x) for x in g.train.tolist()}
    rebuilt = set()
    for r in range(g.num_relations):
        fwd = g.csr(r, "forward")
        bwd = g.csr(r, "backward")
        # transpose round trip
        back = {(int(h), r, int(t)) for t, h in bwd.pairs().tolist()}
        forw = {(int(h), r, int(t)) for h, t in fwd.pairs().tolist()}
        assert back == forw
        rebuilt |= forw
        for e in range(g.num_entities):
            row = g.neighbors(r, e).tolist()
            assert row == sorted(set(row))
    assert rebuilt == truth
    for h, r, t in truth:
        assert t in g.neighbors(r, h, "forward")
        assert h in g.neighbors(r, t, "backward")


def test_deterministic_ids(tmp_path):
    rows = [("b", "p", "a"), ("c", "q", "b"), ("a", "p", "c")]
    path = write_triples(tmp_path / "t.txt", rows)
    g1, g2 = load_graph(path), load_graph(path)
    assert g1.entities == g2.entities and g1.relations == g2.relations
    assert np.array_equal(g1.train, g2.train)
