import json
import random

import pytest

from kgqa.graph_store import (
    GraphLoadError,
    Miss,
    convert_grbench,
    get_degree,
    get_feature,
    get_neighbours,
    graph_from_dict,
    load_graph,
)

from conftest import random_graph_doc, write_json


def test_sample_graph_lookups(sample_graph):
    assert get_feature(sample_graph, "1047566", "category") == "books"
    assert get_neighbours(sample_graph, "203088", "also-bought-item") == ["203010"]
    assert get_degree(sample_graph, "203088", "also-bought-item") == 1


def test_empty_feature_value_is_a_value_not_a_miss(sample_graph):
    assert get_feature(sample_graph, "1047566", "description") == ""


def test_misses(sample_graph):
    assert get_feature(sample_graph, "nope", "title") is Miss.UNKNOWN_NODE
    assert get_feature(sample_graph, "1047566", "colour") is Miss.UNKNOWN_FEATURE
    assert get_neighbours(sample_graph, "nope", "also-bought-item") is Miss.UNKNOWN_NODE
    assert get_degree(sample_graph, "nope", "also-bought-item") is Miss.UNKNOWN_NODE


def test_known_node_without_edges_of_a_label(sample_graph):
    assert get_neighbours(sample_graph, "310001", "also-bought-item") == []
    assert get_degree(sample_graph, "310001", "also-bought-item") == 0


def test_edges_are_directed_as_given(sample_graph):
    assert get_neighbours(sample_graph, "203010", "also-bought-item") == []


def test_schema_and_counts(sample_graph):
    assert len(sample_graph) == 5
    assert sample_graph.schema.feature_names == ("title", "description", "price", "category")
    assert set(sample_graph.schema.edge_labels) == {"also-bought-item", "also-viewed-item"}
    assert sample_graph.edge_count == 5


def test_empty_graph_loads():
    g = graph_from_dict({"nodes": {}, "edges": {}})
    assert len(g) == 0 and g.edge_count == 0


def test_dangling_reference_is_rejected():
    doc = {"nodes": {"a": {"features": {}}}, "edges": {"a": {"r": ["ghost"]}}}
    with pytest.raises(GraphLoadError, match="ghost"):
        graph_from_dict(doc)


def test_dangling_source_is_rejected():
    doc = {"nodes": {"a": {"features": {}}}, "edges": {"ghost": {"r": ["a"]}}}
    with pytest.raises(GraphLoadError, match="ghost"):
        graph_from_dict(doc)


def test_duplicate_neighbours_are_dropped_with_warning():
    doc = {"nodes": {"a": {}, "b": {}}, "edges": {"a": {"r": ["b", "b"]}}}
    g = graph_from_dict(doc)
    assert get_neighbours(g, "a", "r") == ["b"]
    assert len(g.warnings) == 1 and "duplicate" in g.warnings[0]


def test_non_string_feature_rejected():
    with pytest.raises(GraphLoadError):
        graph_from_dict({"nodes": {"a": {"features": {"x": 3}}}})


def test_bad_json_reports_position(tmp_path):
    p = tmp_path / "g.json"
    p.write_text('{"nodes": {', encoding="utf-8")
    with pytest.raises(GraphLoadError, match="line 1"):
        load_graph(p)


def test_neighbour_list_is_a_copy(sample_graph):
    ids = get_neighbours(sample_graph, "203088", "also-viewed-item")
    ids.append("junk")
    assert get_neighbours(sample_graph, "203088", "also-viewed-item") == ["310001", "1047566"]


def test_lookups_are_deterministic(sample_graph):
    first = [get_neighbours(sample_graph, v, r) for v in sample_graph.nodes for r in sample_graph.schema.edge_labels]
    again = [get_neighbours(sample_graph, v, r) for v in sample_graph.nodes for r in sample_graph.schema.edge_labels]
    assert first == again


def _oracle_neighbours(raw_text: str, v: str, r: str) -> list[str]:
    # brute force: rescan the raw file, keeping first occurrences in file order
    doc = json.loads(raw_text)
    out: list[str] = []
    for dst in doc["edges"].get(v, {}).get(r, []):
        if dst not in out:
            out.append(dst)
    return out


@pytest.mark.parametrize("seed", range(5))
def test_random_graphs_match_raw_rescan(tmp_path, seed):
    rng = random.Random(seed)
    doc = random_graph_doc(rng, dup_rate=0.2)
    path = write_json(tmp_path / "g.json", doc)
    g = load_graph(path)
    raw = path.read_text(encoding="utf-8")
    labels = {r for body in doc["edges"].values() for r in body} | {"absent-label"}
    for v in doc["nodes"]:
        for r in labels:
            want = _oracle_neighbours(raw, v, r)
            assert get_neighbours(g, v, r) == want
            assert get_degree(g, v, r) == len(want)


def test_convert_grbench():
    doc = {
        "paper_nodes": {
            "p1": {"features": {"title": "A study", "year": 2001}, "neighbors": {"author": ["a1"]}},
        },
        "author_nodes": {
            "a1": {"features": {"name": "Ada"}, "neighbors": {"paper": ["p1"], "venue": []}},
        },
    }
    canonical = convert_grbench(doc)
    g = graph_from_dict(canonical)
    assert get_feature(g, "p1", "year") == "2001"
    assert get_neighbours(g, "a1", "paper") == ["p1"]
    assert get_neighbours(g, "a1", "venue") == []
    assert "venue" not in g.schema.edge_labels
