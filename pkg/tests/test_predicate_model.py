from types import SimpleNamespace

import numpy as np
import pytest

from pickwhy.forest import ForestParams
from pickwhy.predicate_model import (
    GEOMETRY_FEATURES,
    NONE_REL,
    ConfusionMatrix,
    PredicateModel,
    VocabularyMismatch,
    classify_attributes,
    classify_predicates,
    evaluate_predicates,
    extract_pair_features,
    iou,
    train_predicate_model,
)
from pickwhy.scene_model import BoundingBox2D, FormatError, SceneError, SceneGraph, SceneNode
from pickwhy.synthetic_scenes import Camera, GeneratorConfig, build_corpus

LABELS = ("cup", "bowl")
FAST = ForestParams(n_trees=15)


def n(i, label, box):
    return SceneNode(i, label, "none", BoundingBox2D(*box))


def feats(a, b):
    return dict(zip(GEOMETRY_FEATURES, extract_pair_features(n(0, "cup", a), n(1, "bowl", b), LABELS)))


def test_identical_boxes():
    f = feats((5, 5, 10, 10), (5, 5, 10, 10))
    assert f["iou"] == 1.0 and f["dx_union"] == 0 and f["dy_union"] == 0
    assert f["w_ratio"] == 1.0 and f["h_ratio"] == 1.0


def test_disjoint_boxes():
    assert feats((0, 0, 10, 10), (50, 50, 10, 10))["iou"] == 0.0


def test_iou_one_third():
    assert feats((0, 0, 10, 10), (5, 0, 10, 10))["iou"] == pytest.approx(1 / 3, abs=1e-15)
    assert iou((0, 0, 10, 10), (5, 0, 10, 10)) == 50 / 150


def test_swap_symmetry():
    a, b = (3, 4, 10, 6), (8, 1, 5, 12)
    f, g = feats(a, b), feats(b, a)
    assert f["iou"] == g["iou"] and f["center_dist"] == g["center_dist"]
    assert f["dx_union"] == -g["dx_union"] and f["dy_ref"] == -g["dy_ref"]


def test_feature_vector_layout():
    v = extract_pair_features(n(0, "cup", (0, 0, 5, 5)), n(1, "bowl", (9, 9, 5, 5)), LABELS)
    assert len(v) == len(GEOMETRY_FEATURES) + 2 * len(LABELS)
    assert v[-4:].tolist() == [1.0, 0.0, 0.0, 1.0]
    assert np.all(np.isfinite(v))


def test_zero_area_box_rejected():
    flat = SimpleNamespace(id=0, label="cup", bbox=SimpleNamespace(x=0, y=0, w=0, h=4))
    with pytest.raises(SceneError, match="zero-area"):
        extract_pair_features(flat, n(1, "bowl", (0, 0, 4, 4)), LABELS)


def test_confusion_perfect_and_constant():
    classes = ("a", "b", "c", "d", "e", "f")
    truth = [c for c in classes for _ in range(10)]
    perfect = ConfusionMatrix.from_pairs(classes, truth, truth)
    assert perfect.accuracy() == 1.0 and np.array_equal(perfect.counts, 10 * np.eye(6, dtype=int))
    const = ConfusionMatrix.from_pairs(classes, truth, ["a"] * len(truth))
    assert const.accuracy() == pytest.approx(1 / 6)
    assert const.counts.sum(axis=1).tolist() == [10] * 6
    assert const.to_csv().splitlines()[0] == "truth\\predicted,a,b,c,d,e,f"
    assert const.to_csv().splitlines()[2] == "b,10,0,0,0,0,0"


@pytest.fixture(scope="module")
def corpus():
    return build_corpus(GeneratorConfig(), 150, seed=7)


@pytest.fixture(scope="module")
def model(corpus):
    return train_predicate_model([s.graph for s in corpus.subset("train")], ForestParams(), seed=0)


@pytest.fixture(scope="module")
def fragile_corpus():
    # attribute_rate 1.0: every vase is fragile
    return build_corpus(GeneratorConfig(attribute_rate=1.0), 40, seed=3)


def test_stacked_pairs_classified_on(model, corpus):
    """Held-out stacked pairs: an ``on`` triple whose boxes overlap (IoU > 0.1) with the subject above."""
    hits = total = 0
    for sc in corpus.subset("test") + corpus.subset("validation"):
        g = sc.graph
        pairs = []
        for t in g.triples:
            a, b = g.node(t.subject_id).bbox, g.node(t.object_id).bbox
            if t.predicate == "on" and iou(a.as_list(), b.as_list()) > 0.1 and a.y < b.y:
                pairs.append((t.subject_id, t.object_id))
        hits += sum(p == "on" for _, p, _ in classify_predicates(model, g, pairs))
        total += len(pairs)
    assert total > 30 and hits / total >= 0.9


def test_far_pairs_mostly_none_rel(model, corpus):
    near = corpus.config.near_threshold * Camera().scale  # in pixels
    votes = []
    for sc in corpus.subset("test"):
        g = sc.graph
        related = {(t.subject_id, t.object_id) for t in g.triples}
        far = [(a.id, b.id) for a in g.nodes for b in g.nodes
               if a.id != b.id and (a.id, b.id) not in related
               and np.hypot(*np.subtract(a.bbox.center, b.bbox.center)) > near]
        votes += [p for _, p, _ in classify_predicates(model, g, far)]
    assert len(votes) > 100 and votes.count(NONE_REL) > len(votes) / 2


def test_empty_candidates(model, corpus):
    assert classify_predicates(model, corpus.scenes[0].graph, []) == []
    assert classify_attributes(model, []) == []


def test_vocabulary_mismatch(model, corpus):
    from pickwhy.scene_model import PredicateVocabulary
    g = corpus.scenes[0].graph
    other = SceneGraph(g.nodes, (), PredicateVocabulary(("on", "near")), g.attributes)
    with pytest.raises(VocabularyMismatch):
        classify_predicates(model, other)


def test_attributes_of_always_fragile_vases(fragile_corpus):
    c = fragile_corpus
    m = train_predicate_model([s.graph for s in c.subset("train")], FAST, seed=0)
    vases = [nd for sc in c.subset("test") + c.subset("validation") for nd in sc.graph.nodes if nd.label == "vase"]
    assert vases and all(v.attribute == "fragile" for v in vases)
    pred = classify_attributes(m, vases)
    assert pred.count("fragile") / len(pred) >= 0.95


def test_unseen_label_gets_prior(model):
    ghost = SceneNode(0, "teapot", "none", BoundingBox2D(0, 0, 5, 5))
    assert classify_attributes(model, [ghost]) == [model.attribute_prior]


def test_evaluation_invariants(model, corpus):
    ev = evaluate_predicates(model, [s.graph for s in corpus.subset("test")])
    cm = ev.confusion
    assert ev.accuracy == np.trace(cm.counts) / cm.counts.sum()
    truth_counts = {}
    for sc in corpus.subset("test"):
        g = sc.graph
        k = len(g.nodes)
        truth_counts[NONE_REL] = truth_counts.get(NONE_REL, 0) + k * (k - 1) - len(g.triples)
        for t in g.triples:
            truth_counts[t.predicate] = truth_counts.get(t.predicate, 0) + 1
    for c, row in zip(cm.classes, cm.counts):
        assert row.sum() == truth_counts.get(c, 0)
    with pytest.raises(ValueError):
        evaluate_predicates(model, [])


def test_model_round_trip(model, tmp_path):
    p = tmp_path / "m.json"
    model.save(p)
    back = PredicateModel.load(p)
    assert back.dumps() == p.read_text()
    p.write_text(p.read_text().replace('"kind":"predicate_model"', '"kind":"ranker"'))
    with pytest.raises(FormatError):
        PredicateModel.load(p)


def test_training_is_deterministic(corpus):
    graphs = [s.graph for s in corpus.subset("train")[:8]]
    p = ForestParams(n_trees=3)
    assert train_predicate_model(graphs, p, 1).dumps() == train_predicate_model(graphs, p, 1).dumps()
