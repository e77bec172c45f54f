import json

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pickwhy.scene_model import (
    ATTRIBUTE,
    COMPOUND_SPATIAL,
    DEFAULT_PREDICATES,
    SINGLE_SPATIAL,
    AttributeVocabulary,
    BoundingBox2D,
    FailureCause,
    FailureScenario,
    FormatError,
    PredicateVocabulary,
    RelationTriple,
    SceneError,
    SceneGraph,
    UnknownNodeError,
    classify_failure,
    dumps,
    load_scene,
    save_scene,
    scene_from_dict,
    scene_to_dict,
    subgraph_statements,
    triples_containing,
    validate_graph,
)

from conftest import card_graph, node


def test_validate_reports_unknown_object_id():
    g = SceneGraph([node(0, "cup"), node(1, "bowl")], [RelationTriple(0, "near", 7)])
    assert validate_graph(g) == ["triple 0: unknown object_id 7"]


def test_validate_empty_graph():
    assert validate_graph(SceneGraph()) == []


def test_validate_duplicate_triple_reported_once():
    t = RelationTriple(1, "on", 2)
    g = SceneGraph([node(1, "book"), node(2, "laptop")], [t, t])
    report = validate_graph(g)
    assert len(report) == 1 and "duplicate" in report[0]


def test_validate_flags_unknown_vocabulary_and_self_loops():
    g = SceneGraph([node(0, "cup", "sticky"), node(1, "bowl")],
                   [RelationTriple(0, "above", 1), RelationTriple(1, "near", 1)])
    report = validate_graph(g)
    assert any("unknown attribute" in r for r in report)
    assert any("unknown predicate" in r for r in report)
    assert any("self relation" in r for r in report)


def test_triples_containing_card_scene():
    g = card_graph()
    assert triples_containing(g, 0) == list(g.triples)


def test_triples_containing_isolated_node():
    g = SceneGraph([node(0, "cup"), node(1, "bowl"), node(2, "keys")], [RelationTriple(0, "near", 1)])
    assert triples_containing(g, 2) == []


def test_triples_containing_five_triples():
    nodes = [node(i, "cup") for i in range(5)]
    ts = [RelationTriple(0, "near", 1), RelationTriple(2, "on", 3), RelationTriple(1, "close_to", 2),
          RelationTriple(3, "near", 4), RelationTriple(4, "near", 1)]
    g = SceneGraph(nodes, ts)
    assert triples_containing(g, 1) == [ts[0], ts[2], ts[4]]


def test_triples_containing_unknown_node():
    with pytest.raises(UnknownNodeError):
        triples_containing(card_graph(), 9)


@st.composite
def random_graphs(draw):
    n = draw(st.integers(1, 8))
    nodes = [node(i, "cup") for i in range(n)]
    pairs = st.tuples(st.integers(0, n - 1), st.sampled_from(DEFAULT_PREDICATES), st.integers(0, n - 1))
    ts = [RelationTriple(*p) for p in draw(st.lists(pairs, max_size=50))]
    return SceneGraph(nodes, ts)


@settings(max_examples=100, deadline=None)
@given(random_graphs(), st.data())
def test_triples_containing_matches_scan(g, data):
    n = data.draw(st.sampled_from([x.id for x in g.nodes]))
    got = triples_containing(g, n)
    assert all(t.mentions(n) for t in got)
    assert got == [t for t in g.triples if t.subject_id == n or t.object_id == n]


def test_bbox_rejects_degenerate():
    with pytest.raises(SceneError):
        BoundingBox2D(0, 0, 0, 5)
    with pytest.raises(SceneError):
        BoundingBox2D(0, 0, float("nan"), 5)
    assert BoundingBox2D(1, 2, 4, 6).center == (3.0, 5.0)


def test_vocabulary_is_bijection():
    v = PredicateVocabulary(DEFAULT_PREDICATES)
    assert sorted(v.index(p) for p in v) == list(range(len(v)))
    with pytest.raises(SceneError):
        PredicateVocabulary(("on", "on"))
    with pytest.raises(SceneError):
        AttributeVocabulary(("fragile",))


def test_failure_types():
    t1, t2 = RelationTriple(0, "underneath", 1), RelationTriple(0, "in", 2)
    assert classify_failure([FailureCause.spatial(t1)]) == SINGLE_SPATIAL
    assert classify_failure([FailureCause.spatial(t1), FailureCause.spatial(t2)]) == COMPOUND_SPATIAL
    assert classify_failure([FailureCause.spatial(t1), FailureCause.from_attribute(0, "hot")]) == ATTRIBUTE
    with pytest.raises(SceneError):
        classify_failure([])
    with pytest.raises(SceneError):
        FailureCause.from_attribute(0, "none")


def test_scenario_checks_causes(card_scene):
    g = card_scene.graph
    with pytest.raises(SceneError):
        FailureScenario(g, 0, (FailureCause.spatial(RelationTriple(0, "in", 2)),))
    with pytest.raises(SceneError):
        FailureScenario(g, 0, card_scene.causes, COMPOUND_SPATIAL)
    with pytest.raises(UnknownNodeError):
        FailureScenario(g, 5, card_scene.causes)


def test_failure_type_is_idempotent(compound_scene):
    assert classify_failure(compound_scene.causes) == compound_scene.failure_type == COMPOUND_SPATIAL


def test_scene_json_field_order(card_scene):
    d = scene_to_dict(card_scene.graph, card_scene)
    assert list(d) == ["format_version", "vocab", "nodes", "triples", "failure"]
    assert list(d["nodes"][0]) == ["id", "label", "attribute", "bbox"]
    assert d["triples"][0] == [0, "underneath", 1]
    assert d["failure"]["causes"] == [{"kind": "spatial", "triple": [0, "underneath", 1]}]


def test_scene_round_trip_bytes(tmp_path, card_scene, vase_scene):
    for sc in (card_scene, vase_scene):
        p = tmp_path / "s.json"
        save_scene(p, sc.graph, sc)
        g, back = load_scene(p)
        assert back == sc and g == sc.graph
        assert dumps(scene_to_dict(g, back)) == p.read_text()


def test_graph_without_failure_block():
    g = card_graph()
    g2, sc = scene_from_dict(json.loads(dumps(scene_to_dict(g))))
    assert sc is None and g2 == g


def test_loader_rejects_bad_version_and_fields(card_scene):
    d = scene_to_dict(card_scene.graph, card_scene)
    with pytest.raises(FormatError):
        scene_from_dict({**d, "format_version": 2})
    bad = json.loads(json.dumps(d))
    bad["triples"][0] = [0, "on"]
    with pytest.raises(FormatError, match="triples\\[0\\]"):
        scene_from_dict(bad)
    with pytest.raises(FormatError, match="nodes"):
        scene_from_dict({k: v for k, v in d.items() if k != "nodes"})


def test_subgraph_statements_appends_attribute(vase_scene, card_scene):
    items = subgraph_statements(vase_scene.graph, 0)
    assert items[-1].attribute == "fragile" and len(items) == 2
    assert len(subgraph_statements(card_scene.graph, 0)) == 2
