"""Predicate and attribute classification from boxes and object labels.

The classifier sees only what a scene-graph model gets at predicate
classification time: the two ground-truth boxes and their object labels.
It is a random forest over engineered box geometry rather than an image
network. Ordered pairs without a relation carry the extra class ``none_rel``.
"""
from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass

import numpy as np

from .forest import ForestModel, ForestParams, train_forest
from .scene_model import FORMAT_VERSION, FormatError, SceneError, SceneGraph, SceneNode

NONE_REL = "none_rel"
DEFAULT_REF_LENGTH = 100.0

GEOMETRY_FEATURES = (
    "dx_union", "dy_union", "w_ratio", "h_ratio", "iou", "i_in_j", "j_in_i", "center_dist",
    "dx_ref", "dy_ref", "bottom_diff", "w_i", "h_i", "w_j", "h_j",
    "cover_i", "cover_j", "bottom_i_in_j", "top_i_in_j",
)
NODE_FEATURES = ("w", "h", "aspect")


class VocabularyMismatch(SceneError):
    pass


def _box(node: SceneNode):
    b = node.bbox
    if not (b.w > 0 and b.h > 0):
        raise SceneError(f"node {node.id} has a zero-area bounding box")
    return b.x, b.y, b.w, b.h


def iou(a, b) -> float:
    ax, ay, aw, ah = a
    bx, by, bw, bh = b
    iw = min(ax + aw, bx + bw) - max(ax, bx)
    ih = min(ay + ah, by + bh) - max(ay, by)
    if iw <= 0 or ih <= 0:
        return 0.0
    inter = iw * ih
    return inter / (aw * ah + bw * bh - inter)


def _intersection(a, b) -> float:
    ax, ay, aw, ah = a
    bx, by, bw, bh = b
    iw = min(ax + aw, bx + bw) - max(ax, bx)
    ih = min(ay + ah, by + bh) - max(ay, by)
    return iw * ih if iw > 0 and ih > 0 else 0.0


def _inside(a, b) -> float:
    ax, ay, aw, ah = a
    bx, by, bw, bh = b
    return float(ax >= bx and ay >= by and ax + aw <= bx + bw and ay + ah <= by + bh)


def _one_hot(label: str, vocab) -> list[float]:
    return [1.0 if label == v else 0.0 for v in vocab]


def extract_pair_features(node_i: SceneNode, node_j: SceneNode, label_vocab,
                          ref_length: float = DEFAULT_REF_LENGTH) -> np.ndarray:
    """Geometry of box i relative to box j, then one-hot labels of i and j.

    IoU and center distance are symmetric under swapping the two nodes; the
    center offsets change sign.
    """
    a, b = _box(node_i), _box(node_j)
    ax, ay, aw, ah = a
    bx, by, bw, bh = b
    acx, acy = ax + aw / 2, ay + ah / 2
    bcx, bcy = bx + bw / 2, by + bh / 2
    union_w = max(ax + aw, bx + bw) - min(ax, bx)
    union_h = max(ay + ah, by + bh) - min(ay, by)
    inter = _intersection(a, b)
    geom = [
        (bcx - acx) / union_w,
        (bcy - acy) / union_h,
        aw / bw,
        ah / bh,
        iou(a, b),
        _inside(a, b),
        _inside(b, a),
        math.hypot(bcx - acx, bcy - acy) / ref_length,
        (bcx - acx) / ref_length,
        (bcy - acy) / ref_length,
        ((by + bh) - (ay + ah)) / ref_length,
        aw / ref_length,
        ah / ref_length,
        bw / ref_length,
        bh / ref_length,
        inter / (aw * ah),
        inter / (bw * bh),
        (ay + ah - by) / bh,
        (ay - by) / bh,
    ]
    out = np.asarray(geom + _one_hot(node_i.label, label_vocab) + _one_hot(node_j.label, label_vocab))
    if not np.all(np.isfinite(out)):
        raise SceneError(f"non-finite features for nodes {node_i.id}, {node_j.id}")
    return out


def extract_node_features(node: SceneNode, label_vocab, ref_length: float = DEFAULT_REF_LENGTH) -> np.ndarray:
    _, _, w, h = _box(node)
    return np.asarray([w / ref_length, h / ref_length, w / h] + _one_hot(node.label, label_vocab))


def ordered_pairs(graph: SceneGraph) -> list[tuple[int, int]]:
    ids = [n.id for n in graph.nodes]
    return [(i, j) for i in ids for j in ids if i != j]


def pair_dataset(graphs, label_vocab, ref_length=DEFAULT_REF_LENGTH):
    """Rows for every ordered node pair; targets are predicates or ``none_rel``."""
    X, y = [], []
    for g in graphs:
        truth = {(t.subject_id, t.object_id): t.predicate for t in g.triples}
        for i, j in ordered_pairs(g):
            X.append(extract_pair_features(g.node(i), g.node(j), label_vocab, ref_length))
            y.append(truth.get((i, j), NONE_REL))
    return np.asarray(X).reshape(len(X), -1), y


@dataclass
class PredicateModel:
    predicates: tuple[str, ...]
    attributes: tuple[str, ...]
    labels: tuple[str, ...]
    forest: ForestModel
    attribute_forest: ForestModel | None = None
    attribute_prior: str = "none"
    ref_length: float = DEFAULT_REF_LENGTH

    @property
    def classes(self) -> tuple[str, ...]:
        return self.predicates + (NONE_REL,)

    def check_vocab(self, graph: SceneGraph) -> None:
        if tuple(graph.predicates) != self.predicates or tuple(graph.attributes) != self.attributes:
            raise VocabularyMismatch("scene vocabularies differ from the model's")

    def to_dict(self) -> dict:
        return {
            "format_version": FORMAT_VERSION,
            "kind": "predicate_model",
            "predicates": list(self.predicates),
            "attributes": list(self.attributes),
            "labels": list(self.labels),
            "ref_length": self.ref_length,
            "attribute_prior": self.attribute_prior,
            "forest": self.forest.to_dict(),
            "attribute_forest": None if self.attribute_forest is None else self.attribute_forest.to_dict(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "PredicateModel":
        if d.get("format_version") != FORMAT_VERSION or d.get("kind") != "predicate_model":
            raise FormatError("not a version-1 predicate model file")
        try:
            return cls(
                tuple(d["predicates"]), tuple(d["attributes"]), tuple(d["labels"]),
                ForestModel.from_dict(d["forest"]),
                None if d["attribute_forest"] is None else ForestModel.from_dict(d["attribute_forest"]),
                d["attribute_prior"], float(d["ref_length"]),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise FormatError(f"predicate model: {exc}") from None

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), separators=(",", ":")) + "\n"

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(self.dumps())

    @classmethod
    def load(cls, path) -> "PredicateModel":
        with open(path, encoding="utf-8") as fh:
            try:
                return cls.from_dict(json.load(fh))
            except json.JSONDecodeError as exc:
                raise FormatError(f"{path}: line {exc.lineno}: {exc.msg}") from None


def label_vocabulary(graphs) -> tuple[str, ...]:
    return tuple(sorted({n.label for g in graphs for n in g.nodes}))


def train_predicate_model(graphs, params: ForestParams = ForestParams(), seed: int = 0, label_vocab=None,
                          attribute_params: ForestParams | None = None,
                          ref_length: float = DEFAULT_REF_LENGTH) -> PredicateModel:
    graphs = list(graphs)
    if not graphs:
        raise ValueError("no training scenes")
    first = graphs[0]
    for g in graphs:
        if tuple(g.predicates) != tuple(first.predicates) or tuple(g.attributes) != tuple(first.attributes):
            raise VocabularyMismatch("training scenes use different vocabularies")
    labels = tuple(label_vocab) if label_vocab is not None else label_vocabulary(graphs)
    preds, attrs = tuple(first.predicates), tuple(first.attributes)
    X, y = pair_dataset(graphs, labels, ref_length)
    forest = train_forest(X, y, params, seed, classes=preds + (NONE_REL,))

    nodes = [n for g in graphs for n in g.nodes]
    Xa = np.asarray([extract_node_features(n, labels, ref_length) for n in nodes])
    ya = [n.attribute for n in nodes]
    counts = {a: ya.count(a) for a in attrs}
    prior = max(attrs, key=lambda a: counts[a])
    attr_forest = train_forest(Xa, ya, attribute_params or params, seed + 1, classes=attrs)
    return PredicateModel(preds, attrs, labels, forest, attr_forest, prior, ref_length)


def classify_predicates(model: PredicateModel, graph: SceneGraph, pairs=None) -> list[tuple[int, str, int]]:
    """One predicted predicate (possibly ``none_rel``) per ordered candidate pair."""
    model.check_vocab(graph)
    pairs = ordered_pairs(graph) if pairs is None else list(pairs)
    if not pairs:
        return []
    X = np.asarray([extract_pair_features(graph.node(i), graph.node(j), model.labels, model.ref_length)
                    for i, j in pairs])
    return [(i, p, j) for (i, j), p in zip(pairs, model.forest.predict(X))]


def classify_attributes(model: PredicateModel, nodes) -> list[str]:
    """Attribute per node; labels the model never saw get the training prior."""
    nodes = list(nodes)
    if not nodes:
        return []
    known = [n.label in model.labels for n in nodes]
    out = [model.attribute_prior] * len(nodes)
    idx = [k for k, ok in enumerate(known) if ok]
    if idx and model.attribute_forest is not None:
        X = np.asarray([extract_node_features(nodes[k], model.labels, model.ref_length) for k in idx])
        for k, a in zip(idx, model.attribute_forest.predict(X)):
            out[k] = a
    return out


@dataclass
class ConfusionMatrix:
    classes: tuple[str, ...]
    counts: np.ndarray  # rows: ground truth, columns: predicted

    @classmethod
    def from_pairs(cls, classes, truth, predicted) -> "ConfusionMatrix":
        index = {c: i for i, c in enumerate(classes)}
        counts = np.zeros((len(classes), len(classes)), dtype=np.int64)
        for t, p in zip(truth, predicted):
            counts[index[t], index[p]] += 1
        return cls(tuple(classes), counts)

    def __getitem__(self, key) -> int:
        t, p = key
        return int(self.counts[self.classes.index(t), self.classes.index(p)])

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    def accuracy(self) -> float:
        return float(np.trace(self.counts)) / self.total

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["truth\\predicted", *self.classes])
        for c, row in zip(self.classes, self.counts):
            w.writerow([c, *map(int, row)])
        return buf.getvalue()


@dataclass
class PredicateEvaluation:
    accuracy: float
    confusion: ConfusionMatrix
    related_accuracy: float  # over ground-truth pairs that carry a predicate


def evaluate_predicates(model: PredicateModel, graphs) -> PredicateEvaluation:
    graphs = list(graphs)
    truth, pred = [], []
    for g in graphs:
        gt = {(t.subject_id, t.object_id): t.predicate for t in g.triples}
        for i, p, j in classify_predicates(model, g):
            truth.append(gt.get((i, j), NONE_REL))
            pred.append(p)
    if not truth:
        raise ValueError("empty test set")
    cm = ConfusionMatrix.from_pairs(model.classes, truth, pred)
    related = [(t, p) for t, p in zip(truth, pred) if t != NONE_REL]
    rel_acc = sum(t == p for t, p in related) / len(related) if related else float("nan")
    return PredicateEvaluation(cm.accuracy(), cm, rel_acc)
