"""Scene graphs, vocabularies and the pick-failure taxonomy.

A scene graph holds nodes (bounding box, object label, one attribute) and
directed predicate triples between nodes. Everything here is immutable once
built; graphs are validated on demand by :func:`validate_graph` rather than
at construction so that malformed input can be reported instead of raised.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

FORMAT_VERSION = 1

DEFAULT_PREDICATES = ("on", "in", "underneath", "near", "close_to", "inside")
DEFAULT_ATTRIBUTES = ("none", "fragile", "heavy", "hot")

SINGLE_SPATIAL = "single_spatial"
COMPOUND_SPATIAL = "compound_spatial"
ATTRIBUTE = "attribute"
FAILURE_TYPES = (SINGLE_SPATIAL, COMPOUND_SPATIAL, ATTRIBUTE)


class SceneError(ValueError):
    """Malformed scene data or a query the scene cannot answer."""


class UnknownNodeError(SceneError, KeyError):
    def __str__(self):
        return ValueError.__str__(self)


class FormatError(SceneError):
    """A file or document does not follow the expected schema."""


@dataclass(frozen=True)
class BoundingBox2D:
    x: float
    y: float
    w: float
    h: float

    def __post_init__(self):
        vals = (self.x, self.y, self.w, self.h)
        if not all(math.isfinite(v) for v in vals):
            raise SceneError(f"non-finite bounding box {vals}")
        if self.x < 0 or self.y < 0:
            raise SceneError(f"negative bounding box origin {vals}")
        if self.w <= 0 or self.h <= 0:
            raise SceneError(f"bounding box needs positive size, got {vals}")

    @property
    def center(self) -> tuple[float, float]:
        return (self.x + self.w / 2.0, self.y + self.h / 2.0)

    @property
    def area(self) -> float:
        return self.w * self.h

    def as_list(self) -> list[float]:
        return [self.x, self.y, self.w, self.h]


@dataclass(frozen=True)
class _Vocabulary:
    names: tuple[str, ...]

    def __post_init__(self):
        object.__setattr__(self, "names", tuple(self.names))
        if not self.names:
            raise SceneError(f"{type(self).__name__} must not be empty")
        if len(set(self.names)) != len(self.names):
            raise SceneError(f"duplicate names in {type(self).__name__}: {self.names}")

    def __len__(self):
        return len(self.names)

    def __iter__(self):
        return iter(self.names)

    def __contains__(self, name):
        return name in self.names

    def index(self, name: str) -> int:
        try:
            return self.names.index(name)
        except ValueError:
            raise SceneError(f"{name!r} is not in {type(self).__name__}") from None


class PredicateVocabulary(_Vocabulary):
    pass


@dataclass(frozen=True)
class AttributeVocabulary(_Vocabulary):
    def __post_init__(self):
        super().__post_init__()
        if "none" not in self.names:
            raise SceneError("attribute vocabulary must contain 'none'")


DEFAULT_PREDICATE_VOCAB = PredicateVocabulary(DEFAULT_PREDICATES)
DEFAULT_ATTRIBUTE_VOCAB = AttributeVocabulary(DEFAULT_ATTRIBUTES)


@dataclass(frozen=True)
class SceneNode:
    id: int
    label: str
    attribute: str
    bbox: BoundingBox2D


@dataclass(frozen=True, order=True)
class RelationTriple:
    subject_id: int
    predicate: str
    object_id: int

    def mentions(self, node_id: int) -> bool:
        return self.subject_id == node_id or self.object_id == node_id

    def other(self, node_id: int) -> int:
        return self.object_id if self.subject_id == node_id else self.subject_id

    def as_list(self) -> list:
        return [self.subject_id, self.predicate, self.object_id]


@dataclass(frozen=True, order=True)
class AttributeFact:
    """A node carrying a manipulation-relevant attribute, e.g. the vase is fragile."""

    node_id: int
    attribute: str


@dataclass(frozen=True)
class SceneGraph:
    nodes: tuple[SceneNode, ...] = ()
    triples: tuple[RelationTriple, ...] = ()
    predicates: PredicateVocabulary = DEFAULT_PREDICATE_VOCAB
    attributes: AttributeVocabulary = DEFAULT_ATTRIBUTE_VOCAB
    _by_id: dict = field(init=False, repr=False, compare=False, hash=False)

    def __post_init__(self):
        object.__setattr__(self, "nodes", tuple(self.nodes))
        object.__setattr__(self, "triples", tuple(self.triples))
        object.__setattr__(self, "_by_id", {n.id: n for n in self.nodes})

    def has_node(self, node_id) -> bool:
        return node_id in self._by_id

    def node(self, node_id: int) -> SceneNode:
        try:
            return self._by_id[node_id]
        except KeyError:
            raise UnknownNodeError(f"unknown node id {node_id}") from None

    def to_dict(self) -> dict:
        return {
            "vocab": {"predicates": list(self.predicates), "attributes": list(self.attributes)},
            "nodes": [
                {"id": n.id, "label": n.label, "attribute": n.attribute, "bbox": n.bbox.as_list()}
                for n in self.nodes
            ],
            "triples": [t.as_list() for t in self.triples],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SceneGraph":
        try:
            vocab = d["vocab"]
            preds = PredicateVocabulary(tuple(vocab["predicates"]))
            attrs = AttributeVocabulary(tuple(vocab["attributes"]))
            nodes = []
            for i, n in enumerate(d["nodes"]):
                try:
                    nodes.append(SceneNode(int(n["id"]), str(n["label"]), str(n["attribute"]),
                                           BoundingBox2D(*map(float, n["bbox"]))))
                except (KeyError, TypeError, ValueError) as exc:
                    raise FormatError(f"nodes[{i}]: {exc}") from None
            triples = []
            for i, t in enumerate(d["triples"]):
                if not isinstance(t, list) or len(t) != 3:
                    raise FormatError(f"triples[{i}]: expected [subject_id, predicate, object_id]")
                triples.append(RelationTriple(int(t[0]), str(t[1]), int(t[2])))
        except KeyError as exc:
            raise FormatError(f"missing field {exc}") from None
        return cls(tuple(nodes), tuple(triples), preds, attrs)


def validate_graph(graph: SceneGraph) -> list[str]:
    """Return a list of invariant violations; empty when the graph is valid."""
    report = []
    seen_ids = set()
    for i, n in enumerate(graph.nodes):
        if n.id in seen_ids:
            report.append(f"node {i}: duplicate id {n.id}")
        seen_ids.add(n.id)
        if n.attribute not in graph.attributes:
            report.append(f"node {i}: unknown attribute {n.attribute!r}")
    seen_triples = set()
    for i, t in enumerate(graph.triples):
        if t.subject_id not in seen_ids:
            report.append(f"triple {i}: unknown subject_id {t.subject_id}")
        if t.object_id not in seen_ids:
            report.append(f"triple {i}: unknown object_id {t.object_id}")
        if t.subject_id == t.object_id:
            report.append(f"triple {i}: self relation on {t.subject_id}")
        if t.predicate not in graph.predicates:
            report.append(f"triple {i}: unknown predicate {t.predicate!r}")
        if t in seen_triples:
            report.append(f"triple {i}: duplicate triple {t.as_list()}")
        seen_triples.add(t)
    return report


def triples_containing(graph: SceneGraph, node_id: int) -> list[RelationTriple]:
    """Subgraph of ``node_id``: every triple it appears in, in graph order."""
    graph.node(node_id)
    return [t for t in graph.triples if t.mentions(node_id)]


@dataclass(frozen=True)
class FailureCause:
    """Why a pick fails: a grounding relation (spatial) or attribute fact."""

    kind: str
    triple: RelationTriple | None = None
    fact: AttributeFact | None = None

    def __post_init__(self):
        if self.kind == "spatial":
            if self.triple is None or self.fact is not None:
                raise SceneError("spatial cause needs exactly a triple")
        elif self.kind == "attribute":
            if self.fact is None or self.triple is not None:
                raise SceneError("attribute cause needs exactly an attribute fact")
            if self.fact.attribute == "none":
                raise SceneError("attribute cause cannot use 'none'")
        else:
            raise SceneError(f"unknown cause kind {self.kind!r}")

    @classmethod
    def spatial(cls, triple: RelationTriple) -> "FailureCause":
        return cls("spatial", triple=triple)

    @classmethod
    def from_attribute(cls, node_id: int, attribute: str) -> "FailureCause":
        return cls("attribute", fact=AttributeFact(node_id, attribute))

    @property
    def grounding(self):
        return self.triple if self.kind == "spatial" else self.fact

    def to_dict(self) -> dict:
        if self.kind == "spatial":
            return {"kind": "spatial", "triple": self.triple.as_list()}
        return {"kind": "attribute", "node": self.fact.node_id, "attribute": self.fact.attribute}

    @classmethod
    def from_dict(cls, d: dict) -> "FailureCause":
        try:
            if d["kind"] == "spatial":
                s, p, o = d["triple"]
                return cls.spatial(RelationTriple(int(s), str(p), int(o)))
            if d["kind"] == "attribute":
                return cls.from_attribute(int(d["node"]), str(d["attribute"]))
        except (KeyError, TypeError, ValueError) as exc:
            raise FormatError(f"bad failure cause {d!r}: {exc}") from None
        raise FormatError(f"unknown cause kind {d.get('kind')!r}")


def classify_failure(causes: Iterable[FailureCause]) -> str:
    """Failure type of a cause set. Any attribute cause makes it an attribute failure."""
    causes = list(causes)
    if not causes:
        raise SceneError("a failure needs at least one cause")
    if any(c.kind == "attribute" for c in causes):
        return ATTRIBUTE
    return SINGLE_SPATIAL if len(causes) == 1 else COMPOUND_SPATIAL


@dataclass(frozen=True)
class FailureScenario:
    graph: SceneGraph
    desired_object: int
    causes: tuple[FailureCause, ...]
    failure_type: str = ""

    def __post_init__(self):
        causes = tuple(dict.fromkeys(self.causes))
        object.__setattr__(self, "causes", causes)
        expected = classify_failure(causes)
        if not self.failure_type:
            object.__setattr__(self, "failure_type", expected)
        elif self.failure_type != expected:
            raise SceneError(f"failure_type {self.failure_type!r} does not match causes ({expected!r})")
        self.graph.node(self.desired_object)
        triples = set(self.graph.triples)
        for c in causes:
            if c.kind == "spatial" and c.triple not in triples:
                raise SceneError(f"spatial cause {c.triple.as_list()} is not in the scene graph")

    @property
    def desired_node(self) -> SceneNode:
        return self.graph.node(self.desired_object)

    def to_dict(self) -> dict:
        d = {"format_version": FORMAT_VERSION}
        d.update(self.graph.to_dict())
        d["failure"] = {
            "desired_object": self.desired_object,
            "causes": [c.to_dict() for c in self.causes],
            "type": self.failure_type,
        }
        return d


def scene_to_dict(graph: SceneGraph, scenario: FailureScenario | None = None) -> dict:
    if scenario is not None:
        return scenario.to_dict()
    d = {"format_version": FORMAT_VERSION}
    d.update(graph.to_dict())
    return d


def scene_from_dict(d: dict) -> tuple[SceneGraph, FailureScenario | None]:
    """Parse a scene document; the scenario is ``None`` when it has no failure block."""
    if not isinstance(d, dict):
        raise FormatError("scene document must be a JSON object")
    version = d.get("format_version", FORMAT_VERSION)
    if version != FORMAT_VERSION:
        raise FormatError(f"unsupported format_version {version!r}")
    graph = SceneGraph.from_dict(d)
    failure = d.get("failure")
    if failure is None:
        return graph, None
    try:
        causes = tuple(FailureCause.from_dict(c) for c in failure["causes"])
        scenario = FailureScenario(graph, int(failure["desired_object"]), causes, str(failure.get("type", "")))
    except KeyError as exc:
        raise FormatError(f"failure: missing field {exc}") from None
    return graph, scenario


def dumps(doc: dict) -> str:
    return json.dumps(doc, indent=None, separators=(", ", ": ")) + "\n"


def load_scene(path) -> tuple[SceneGraph, FailureScenario | None]:
    with open(path, encoding="utf-8") as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise FormatError(f"{path}: line {exc.lineno}: {exc.msg}") from None
    return scene_from_dict(doc)


def save_scene(path, graph: SceneGraph, scenario: FailureScenario | None = None) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(dumps(scene_to_dict(graph, scenario)))


def subgraph_statements(graph: SceneGraph, node_id: int) -> list:
    """Relations around a node followed by its attribute fact, if it has one."""
    items: list = list(triples_containing(graph, node_id))
    attr = graph.node(node_id).attribute
    if attr != "none":
        items.append(AttributeFact(node_id, attr))
    return items


def vocab_index(vocab: Sequence[str]) -> dict[str, int]:
    return {name: i for i, name in enumerate(vocab)}
