import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pickwhy.scene_model import COMPOUND_SPATIAL, FAILURE_TYPES, FormatError, RelationTriple, dumps, validate_graph
from pickwhy.synthetic_scenes import (
    Camera,
    GenerationError,
    GeneratorConfig,
    PlacedObject,
    Support,
    build_corpus,
    corpus_dumps,
    derive_failure_causes,
    derive_predicates,
    generate_scene,
    load_corpus,
    project_bbox,
    save_corpus,
    split_sizes,
)

CFG = GeneratorConfig()


def obj(i, label, x, y, support=Support("table"), attribute="none", container=False, open_=False, w=10.0):
    return PlacedObject(i, label, attribute, (x, y, w, w), 5.0, support, open_, container)


def test_newspaper_on_card_gives_converse_pair():
    card = obj(0, "credit card", 0, 0)
    paper = obj(1, "newspaper", 0, 0, Support("on", 0))
    ts = derive_predicates([card, paper], CFG)
    assert RelationTriple(1, "on", 0) in ts and RelationTriple(0, "underneath", 1) in ts


def test_far_pair_has_no_triple():
    ts = derive_predicates([obj(0, "cup", 0, 0), obj(1, "bowl", 100, 0)], CFG)
    assert ts == []


def test_close_threshold_is_inclusive():
    d = CFG.close_threshold
    ts = derive_predicates([obj(0, "cup", 0, 0), obj(1, "bowl", d, 0)], CFG)
    assert [t.predicate for t in ts] == ["close_to", "close_to"]
    ts = derive_predicates([obj(0, "cup", 0, 0), obj(1, "bowl", CFG.near_threshold, 0)], CFG)
    assert [t.predicate for t in ts] == ["near", "near"]


def test_transitive_containment_is_inside():
    box = obj(0, "box", 0, 0, container=True, w=30)
    basket = obj(1, "basket", 2, 2, Support("in", 0), container=True, w=20)
    keys = obj(2, "keys", 4, 4, Support("in", 1), w=5)
    ts = set(derive_predicates([box, basket, keys], CFG))
    assert RelationTriple(2, "in", 1) in ts and RelationTriple(2, "inside", 0) in ts
    assert RelationTriple(1, "in", 0) in ts


def test_causes_for_card_vase_and_mug():
    card = obj(0, "credit card", 0, 0)
    paper = obj(1, "newspaper", 0, 0, Support("on", 0))
    objs = [card, paper]
    causes = derive_failure_causes(objs, derive_predicates(objs, CFG), 0)
    assert [c.triple for c in causes] == [RelationTriple(0, "underneath", 1)]

    vase = obj(0, "vase", 0, 0, attribute="fragile")
    causes = derive_failure_causes([vase], [], 0)
    assert len(causes) == 1 and causes[0].fact.attribute == "fragile"

    box = obj(0, "box", 0, 0, container=True, open_=False, w=30)
    mug = obj(1, "mug", 5, 5, Support("in", 0))
    board = obj(2, "cutting board", 5, 5, Support("on", 1))
    objs = [box, mug, board]
    causes = derive_failure_causes(objs, derive_predicates(objs, CFG), 1)
    assert {c.triple.predicate for c in causes} == {"underneath", "in"}
    from pickwhy.scene_model import classify_failure
    assert classify_failure(causes) == COMPOUND_SPATIAL


def test_open_container_is_not_a_cause():
    box = obj(0, "box", 0, 0, container=True, open_=True, w=30)
    mug = obj(1, "mug", 5, 5, Support("in", 0))
    objs = [box, mug]
    assert derive_failure_causes(objs, derive_predicates(objs, CFG), 1) == []


def test_project_bbox_identity_camera():
    o = PlacedObject(0, "cup", "none", (0.0, 0.0, 10.0, 10.0), 5.0)
    cam = Camera(scale=1.0, depth_scale=1.0, offset_x=0.0, offset_y=5.0, jitter=0.0)
    b = project_bbox(o, cam)
    assert b.as_list() == [0.0, 0.0, 10.0, 15.0]


def test_project_bbox_jitter_bounds():
    o = PlacedObject(3, "cup", "none", (20.0, 20.0, 10.0, 8.0), 6.0)
    base = project_bbox(o, Camera(jitter=0.0))
    cam = Camera(jitter=0.05)
    assert project_bbox(o, cam, 4) == project_bbox(o, cam, 4)
    for seed in range(1000):
        b = project_bbox(o, cam, seed)
        assert abs(b.w - base.w) <= 0.05 * base.w + 1e-9
        assert abs(b.h - base.h) <= 0.05 * base.h + 1e-9
        assert abs(b.x - base.x) <= 0.05 * base.w + 1e-9
        assert abs(b.y - base.y) <= 0.05 * base.h + 1e-9


def test_generate_scene_postconditions():
    objects, sc = generate_scene(CFG, 0)
    lo, hi = CFG.object_count_range
    assert lo <= len(objects) <= hi and len(sc.causes) >= 1
    assert validate_graph(sc.graph) == []
    assert dumps(sc.to_dict()) == dumps(generate_scene(CFG, 0)[1].to_dict())


def test_mean_object_count_over_100_seeds():
    counts = [len(generate_scene(CFG, s)[0]) for s in range(100)]
    assert 11 <= np.mean(counts) <= 15


@pytest.mark.parametrize("ftype", FAILURE_TYPES)
def test_requested_failure_type(ftype):
    for s in range(5):
        assert generate_scene(CFG, s, ftype)[1].failure_type == ftype


def test_unreachable_relation_target_names_constraint():
    cfg = GeneratorConfig(object_count_range=(3, 3), relation_target_range=(40, 50), max_retries=5)
    with pytest.raises(GenerationError, match="relation"):
        generate_scene(cfg, 0)


def test_config_validation():
    with pytest.raises(GenerationError):
        GeneratorConfig(close_threshold=30.0, near_threshold=20.0)
    with pytest.raises(GenerationError):
        GeneratorConfig(object_count_range=(9, 8))
    with pytest.raises(GenerationError, match="unknown"):
        GeneratorConfig.from_dict({"colour": 1})
    assert GeneratorConfig.from_dict(CFG.to_dict()) == CFG


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**31 - 1))
def test_derived_graph_properties(seed):
    objects, sc = generate_scene(CFG, seed)
    pairs = [(t.subject_id, t.object_id) for t in sc.graph.triples]
    assert len(pairs) == len(set(pairs))
    ts = set(sc.graph.triples)
    for t in ts:
        if t.predicate == "on":
            assert RelationTriple(t.object_id, "underneath", t.subject_id) in ts
        if t.predicate == "underneath":
            assert RelationTriple(t.object_id, "on", t.subject_id) in ts
    # occlusion and containment causes do not depend on distance thresholds
    wide = GeneratorConfig(near_threshold=60.0, close_threshold=2.0)
    spatial = {c.triple for c in sc.causes if c.kind == "spatial"}
    again = derive_failure_causes(objects, derive_predicates(objects, wide), sc.desired_object)
    assert {c.triple for c in again if c.kind == "spatial"} == spatial


@pytest.mark.parametrize("n,sizes", [(188, (124, 32, 32)), (3, (1, 1, 1)), (150, (99, 26, 25)), (100, (66, 17, 17))])
def test_split_sizes(n, sizes):
    assert split_sizes(n) == sizes


@settings(max_examples=200)
@given(st.integers(3, 5000))
def test_split_sizes_sum_and_nonempty(n):
    s = split_sizes(n)
    assert sum(s) == n and min(s) >= 1


def test_corpus_round_trip(tmp_path):
    c = build_corpus(CFG, 12, seed=5)
    assert c.split.count("train") == split_sizes(12)[0]
    p = tmp_path / "c.json"
    save_corpus(c, p)
    back = load_corpus(p)
    assert back == c
    assert corpus_dumps(back) == p.read_text()
    assert corpus_dumps(build_corpus(CFG, 12, seed=5)) == p.read_text()


def test_corpus_needs_three_scenes():
    with pytest.raises(GenerationError):
        build_corpus(CFG, 2, seed=0)


def test_corpus_schema_errors_name_field(tmp_path):
    c = build_corpus(CFG, 3, seed=1)
    doc = json.loads(corpus_dumps(c))
    del doc["scenes"][1]["split"]
    p = tmp_path / "bad.json"
    p.write_text(json.dumps(doc))
    with pytest.raises(FormatError, match=r"scenes\[1\]"):
        load_corpus(p)
    p.write_text('{"format_version": 1,\n "config": {}, "scenes": [\n')
    with pytest.raises(FormatError, match="line"):
        load_corpus(p)
