import io
import random

import numpy as np
import pytest

from conftest import FIXTURES
from kgbpr.store import (
    Adjacency,
    KnowledgeGraph,
    Triple,
    TripleFormat,
    TripleFormatError,
    UnknownPredicateError,
    extract_bipartite,
    graph_from_pairs,
    parse_triples,
    read_triples,
    subgraph_stats,
)


def test_duplicate_collapse():
    kg = parse_triples(b"a\tp\tb\na\tp\tb\n")
    assert len(kg) == 1
    assert kg.stats.duplicates == 1
    assert kg.stats.parsed == 2


def test_empty_stream():
    kg = parse_triples(io.BytesIO(b""))
    assert len(kg) == 0
    assert kg.predicates == frozenset()


def test_comments_blanks_and_malformed_lines():
    data = b"# header\n\na\tp\tb\nbroken line\nx\tp\ty\textra\n\tp\tb\nc\tq\td\n"
    kg = parse_triples(data)
    assert len(kg) == 2
    assert kg.stats.malformed == 3
    assert kg.stats.malformed_lines == (4, 5, 6)
    assert kg.predicates == {"p", "q"}


def test_crlf_and_field_whitespace():
    kg = parse_triples(b"a \tp\t b\r\nc\tp\td\r\n")
    assert Triple("a", "p", "b") in kg
    assert len(kg) == 2


def test_non_utf8_names_offset():
    with pytest.raises(TripleFormatError, match="offset 7"):
        parse_triples(b"a\tp\tb\nc\xff\tp\td\n")


def test_custom_format():
    fmt = TripleFormat(delimiter=",", columns=(2, 0, 1))
    kg = parse_triples(b"p,b,a\n", fmt)
    assert kg.triples == (Triple("a", "p", "b"),)


def test_triple_rejects_blank_fields():
    with pytest.raises(ValueError):
        Triple(" ", "p", "o")


def test_import_fixture():
    kg = read_triples(FIXTURES / "import.tsv")
    assert len(kg) == 391
    g = extract_bipartite(kg, "Import")
    assert (g.m, g.n, g.edge_count) == (142, 62, 391)


@pytest.mark.parametrize(
    "predicate, expected",
    [("dealsWith", (131, 124, 945)), ("hasOfficialLanguage", (583, 214, 964)), ("Export", (140, 176, 579))],
)
def test_table1_fixture_counts(table1_graphs, predicate, expected):
    assert subgraph_stats(extract_bipartite(table1_graphs, predicate)) == expected


def test_singleton_and_complete_bipartite():
    g = extract_bipartite(parse_triples(b"a\tp\tb\n"), "p")
    assert subgraph_stats(g) == (1, 1, 1)
    g = graph_from_pairs("p", [(s, o) for s in "xy" for o in "abc"])
    assert subgraph_stats(g) == (2, 3, 6)


def test_empty_graph_stats():
    assert subgraph_stats(graph_from_pairs("p", [])) == (0, 0, 0)


def test_unknown_predicate_lists_available():
    kg = parse_triples(b"a\tp\tb\nc\tq\td\n")
    with pytest.raises(UnknownPredicateError) as err:
        extract_bipartite(kg, "r")
    assert "'r'" in str(err.value) and "p, q" in str(err.value)


def test_lexicographic_ids_and_independent_sides():
    kg = parse_triples(b"b\tp\ta\na\tp\tb\nc\tp\ta\n")
    g = extract_bipartite(kg, "p")
    assert g.subjects == ("a", "b", "c")
    assert g.objects == ("a", "b")
    assert g.subject_index["a"] == 0 and g.object_index["a"] == 0
    assert g.neighbors(0).tolist() == [1]
    assert g.neighbors(1).tolist() == [0]


def test_order_independence_and_round_trip():
    rng = random.Random(3)
    pairs = [(f"s{rng.randrange(30)}", f"o{rng.randrange(20)}") for _ in range(200)]
    g1 = graph_from_pairs("p", pairs)
    shuffled = pairs[:]
    rng.shuffle(shuffled)
    assert graph_from_pairs("p", shuffled) == g1
    again = extract_bipartite(parse_triples(g1.dump_tsv().encode()), "p")
    assert again == g1
    assert again.dump_tsv() == g1.dump_tsv()
    assert int(g1.adjacency.degrees().sum()) == g1.edge_count


def test_adjacency_membership_and_removal():
    adj = Adjacency.from_edges(3, 4, [0, 0, 2, 2, 2], [1, 3, 0, 0, 2])
    assert adj.edge_count == 4
    assert adj.neighbors(2).tolist() == [0, 2]
    assert adj.contains([0, 0, 1, 2], [1, 2, 0, 2]).tolist() == [True, False, False, True]
    smaller = adj.without([0], [3])
    assert smaller.edge_count == 3 and not smaller.has_edge(0, 3)
    assert adj.has_edge(0, 3)
    with pytest.raises(ValueError):
        Adjacency.from_edges(2, 2, [0], [2])


def test_graph_is_read_only(planted_graph):
    with pytest.raises(ValueError):
        planted_graph.adjacency.indices[0] = 1
