"""Natural-language pick-failure explanations.

Four variants: ``none`` (no text), ``cb`` (coarse single-spatial category
phrase), ``ssg`` (every statement about the object) and ``ssg_r`` (only the
top-ranked statements). All share the sentence head
"The robot could not pick up the <object> because ...".
"""
from __future__ import annotations

from dataclasses import dataclass, field

from .ranking import OracleEnsemble, extract_subgraph, pairwise_rank, top_ranked
from .scene_model import (
    AttributeFact,
    FailureScenario,
    RelationTriple,
    SceneError,
    SceneGraph,
    UnknownNodeError,
)

VARIANTS = ("none", "cb", "ssg", "ssg_r")

PREDICATE_SURFACE = {
    "on": "is on",
    "in": "is in",
    "underneath": "is underneath",
    "near": "is near",
    "close_to": "is close to",
    "inside": "is inside",
}
ATTRIBUTE_SURFACE = {
    "fragile": "is fragile",
    "heavy": "is heavy",
    "hot": "is hot",
}


class LexiconError(SceneError):
    pass


@dataclass(frozen=True)
class PhraseLexicon:
    """Surface forms. ``labels=None`` renders labels as-is (underscores become spaces)."""

    predicates: dict = field(default_factory=lambda: dict(PREDICATE_SURFACE))
    attributes: dict = field(default_factory=lambda: dict(ATTRIBUTE_SURFACE))
    labels: dict | None = None
    article: str = "the"

    def label(self, label: str) -> str:
        if self.labels is None:
            return label.replace("_", " ").lower()
        try:
            return self.labels[label]
        except KeyError:
            raise LexiconError(f"no surface form for label {label!r}") from None

    def predicate(self, name: str) -> str:
        try:
            return self.predicates[name]
        except KeyError:
            raise LexiconError(f"no surface form for predicate {name!r}") from None

    def attribute(self, name: str) -> str:
        try:
            return self.attributes[name]
        except KeyError:
            raise LexiconError(f"no surface form for attribute {name!r}") from None

    def noun(self, label: str) -> str:
        return f"{self.article} {self.label(label)}"

    def check(self, graph: SceneGraph) -> None:
        for p in graph.predicates:
            self.predicate(p)
        for a in graph.attributes:
            if a != "none":
                self.attribute(a)


DEFAULT_LEXICON = PhraseLexicon()


@dataclass(frozen=True)
class Explanation:
    variant: str
    text: str
    supporting_relations: tuple[RelationTriple, ...] = ()
    supporting_attributes: tuple[AttributeFact, ...] = ()

    def to_dict(self) -> dict:
        return {
            "variant": self.variant,
            "text": self.text,
            "supporting_relations": [t.as_list() for t in self.supporting_relations],
            "supporting_attributes": [[f.node_id, f.attribute] for f in self.supporting_attributes],
        }


def render_relation(triple: RelationTriple, lexicon: PhraseLexicon, graph: SceneGraph) -> str:
    subj = graph.node(triple.subject_id)
    obj = graph.node(triple.object_id)
    return f"{lexicon.noun(subj.label)} {lexicon.predicate(triple.predicate)} {lexicon.noun(obj.label)}"


def render_attribute(fact: AttributeFact, lexicon: PhraseLexicon, graph: SceneGraph) -> str:
    node = graph.node(fact.node_id)
    return f"{lexicon.noun(node.label)} {lexicon.attribute(fact.attribute)}"


def render_statement(item, lexicon: PhraseLexicon, graph: SceneGraph) -> str:
    if isinstance(item, AttributeFact):
        return render_attribute(item, lexicon, graph)
    return render_relation(item, lexicon, graph)


def join_phrases(phrases) -> str:
    phrases = list(phrases)
    if len(phrases) <= 1:
        return "".join(phrases)
    return ", ".join(phrases[:-1]) + " and " + phrases[-1]


def sentence(label: str, phrases, lexicon: PhraseLexicon = DEFAULT_LEXICON) -> str:
    head = f"The robot could not pick up {lexicon.noun(label)}"
    phrases = list(phrases)
    if not phrases:
        return head + "."
    return f"{head} because {join_phrases(phrases)}."


def _split(items):
    rels = tuple(i for i in items if isinstance(i, RelationTriple))
    facts = tuple(i for i in items if isinstance(i, AttributeFact))
    return rels, facts


def _render(variant, graph, d_obj, items, lexicon) -> Explanation:
    rels, facts = _split(items)
    ordered = list(rels) + list(facts)
    phrases = [render_statement(it, lexicon, graph) for it in ordered]
    return Explanation(variant, sentence(graph.node(d_obj).label, phrases, lexicon), rels, facts)


def generate_ssg(graph: SceneGraph, d_obj: int, lexicon: PhraseLexicon = DEFAULT_LEXICON) -> Explanation:
    """Enumerate every relation around ``d_obj`` (graph order), then its attribute."""
    if not graph.has_node(d_obj):
        raise UnknownNodeError(f"unknown node id {d_obj}")
    sg = extract_subgraph(graph, d_obj)
    return _render("ssg", graph, d_obj, sg.items, lexicon)


def generate_ssg_r(graph: SceneGraph, d_obj: int, ensemble, lexicon: PhraseLexicon = DEFAULT_LEXICON,
                   ordered: bool = True) -> Explanation:
    """Like :func:`generate_ssg` but keeps only the top-ranked statements.

    Kept statements are rendered in graph order, attribute last.
    """
    if not graph.has_node(d_obj):
        raise UnknownNodeError(f"unknown node id {d_obj}")
    sg = extract_subgraph(graph, d_obj)
    if not len(sg):
        return _render("ssg_r", graph, d_obj, (), lexicon)
    top = set(top_ranked(pairwise_rank(sg, ensemble, ordered)))
    return _render("ssg_r", graph, d_obj, [it for it in sg.items if it in top], lexicon)


def cb_phrase(scenario: FailureScenario, lexicon: PhraseLexicon = DEFAULT_LEXICON) -> str:
    """Category phrase for the first spatial cause, or a generic non-explanation."""
    noun = lexicon.noun(scenario.desired_node.label)
    for c in scenario.causes:
        if c.kind != "spatial":
            continue
        if c.triple.predicate == "underneath":
            return f"{noun} is occluded"
        if c.triple.predicate in ("in", "inside"):
            return f"{noun} is in a closed container"
    return f"{noun} cannot be picked"


def generate_cb(scenario: FailureScenario, lexicon: PhraseLexicon = DEFAULT_LEXICON) -> Explanation:
    text = sentence(scenario.desired_node.label, [cb_phrase(scenario, lexicon)], lexicon)
    return Explanation("cb", text)


def generate_none(scenario: FailureScenario | None = None) -> Explanation:
    return Explanation("none", "")


def explain(variant: str, scenario: FailureScenario, ensemble=None,
            lexicon: PhraseLexicon = DEFAULT_LEXICON) -> Explanation:
    """Dispatch on variant name (``ssg-r`` is accepted for ``ssg_r``)."""
    variant = variant.replace("-", "_")
    if variant == "none":
        return generate_none(scenario)
    if variant == "cb":
        return generate_cb(scenario, lexicon)
    if variant == "ssg":
        return generate_ssg(scenario.graph, scenario.desired_object, lexicon)
    if variant == "ssg_r":
        if ensemble is None:
            raise ValueError("ssg_r explanations need a ranker")
        if ensemble == "oracle":
            ensemble = OracleEnsemble.for_scenario(scenario)
        return generate_ssg_r(scenario.graph, scenario.desired_object, ensemble, lexicon)
    raise ValueError(f"unknown explanation variant {variant!r}")
