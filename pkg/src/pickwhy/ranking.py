"""Pairwise ranking of the statements around a desired object.

Each statement (a relation triple mentioning the object, or the object's
attribute fact) becomes a one-hot feature vector. Three binary classifiers,
one per label pair {0,1}, {0,2}, {1,2}, vote on every pair of statements:
0 means the first statement explains the failure better, 1 the second, 2 a
tie. Votes increment ranks and statements are sorted by rank.
"""
from __future__ import annotations

import itertools
import json
import warnings
from dataclasses import dataclass

import numpy as np

from .forest import ForestModel, ForestParams, cross_val_accuracy, train_forest
from .scene_model import (
    FORMAT_VERSION,
    AttributeFact,
    FailureScenario,
    FormatError,
    RelationTriple,
    SceneError,
    SceneGraph,
    subgraph_statements,
)

N_LABELS = 3
LABEL_PAIRS = tuple(itertools.combinations(range(N_LABELS), 2))
HAS_ATTRIBUTE = "has_attribute"
# the one-hot features are sparse; sampling sqrt(d) of them per split mostly draws irrelevant bits
RANKER_PARAMS = ForestParams(max_features="all")


class RankingError(SceneError):
    pass


@dataclass(frozen=True)
class Subgraph:
    graph: SceneGraph
    desired_object: int
    items: tuple  # RelationTriple | AttributeFact

    def __len__(self):
        return len(self.items)


def extract_subgraph(graph: SceneGraph, desired_object: int) -> Subgraph:
    return Subgraph(graph, desired_object, tuple(subgraph_statements(graph, desired_object)))


def feature_length(predicates, attributes) -> int:
    return 2 * len(predicates) + 1 + 2 * len(attributes)


def relation_features(item, graph: SceneGraph, desired_object: int) -> np.ndarray:
    """One-hot [predicate seen from the desired object | subject attribute | object attribute].

    The predicate block has one slot per predicate with the desired object as
    subject, one per predicate with it as object, and a final slot for the
    object's own attribute fact. Exactly three bits are set.
    """
    P, A = graph.predicates, graph.attributes
    f = np.zeros(feature_length(P, A))
    if isinstance(item, AttributeFact):
        f[2 * len(P)] = 1.0
        subj_attr = obj_attr = item.attribute
    else:
        slot = P.index(item.predicate)
        f[slot if item.subject_id == desired_object else len(P) + slot] = 1.0
        subj_attr = graph.node(item.subject_id).attribute
        obj_attr = graph.node(item.object_id).attribute
    base = 2 * len(P) + 1
    f[base + A.index(subj_attr)] = 1.0
    f[base + len(A) + A.index(obj_attr)] = 1.0
    return f


def subgraph_features(sg: Subgraph) -> np.ndarray:
    return np.asarray([relation_features(it, sg.graph, sg.desired_object) for it in sg.items]).reshape(
        len(sg.items), feature_length(sg.graph.predicates, sg.graph.attributes))


def tie_key(item, graph: SceneGraph):
    if isinstance(item, AttributeFact):
        return (item.node_id, len(graph.predicates), item.node_id)
    return (item.subject_id, graph.predicates.index(item.predicate), item.object_id)


def preference_label(k_is_cause: bool, m_is_cause: bool) -> int:
    if k_is_cause and not m_is_cause:
        return 0
    if m_is_cause and not k_is_cause:
        return 1
    return 2


@dataclass(frozen=True)
class RankedRelationList:
    entries: tuple  # ((item, rank), ...) sorted by rank, then tie key

    @property
    def items(self) -> list:
        return [it for it, _ in self.entries]

    @property
    def ranks(self) -> list[int]:
        return [r for _, r in self.entries]

    def __len__(self):
        return len(self.entries)


def pair_indices(n: int, ordered: bool = True) -> list[tuple[int, int]]:
    if ordered:
        return list(itertools.permutations(range(n), 2))
    return list(itertools.combinations(range(n), 2))


def pairwise_rank(sg: Subgraph, ensemble, ordered: bool = True) -> RankedRelationList:
    """Rank subgraph statements by pairwise classifier votes.

    ``ordered`` visits every (k, m) with m != k; ``ordered=False`` visits only
    k < m. ``ensemble.votes(sg, pairs)`` returns one label per pair and classifier.
    """
    n = len(sg.items)
    if n == 0:
        raise RankingError("cannot rank an empty subgraph")
    pairs = pair_indices(n, ordered)
    ranks = np.zeros(n, dtype=np.int64)
    if pairs:
        votes = np.asarray(ensemble.votes(sg, pairs)).reshape(len(pairs), -1)
        k = np.fromiter((p[0] for p in pairs), dtype=np.intp, count=len(pairs))
        m = np.fromiter((p[1] for p in pairs), dtype=np.intp, count=len(pairs))
        for col in range(votes.shape[1]):
            v = votes[:, col]
            if not np.isin(v, (0, 1, 2)).all():
                raise RankingError(f"classifier {col} produced labels outside {{0, 1, 2}}")
            np.add.at(ranks, k[v != 1], 1)
            np.add.at(ranks, m[v != 0], 1)
    order = sorted(range(n), key=lambda i: (-ranks[i], tie_key(sg.items[i], sg.graph)))
    return RankedRelationList(tuple((sg.items[i], int(ranks[i])) for i in order))


def top_ranked(ranked: RankedRelationList) -> list:
    if not len(ranked):
        raise RankingError("empty ranked list")
    best = ranked.entries[0][1]
    return [it for it, r in ranked.entries if r == best]


# -- classifiers -------------------------------------------------------------

# vote of the oracle classifier for label pair (a, b) given the true label
ORACLE_VOTE = {
    (0, 1): {0: 0, 1: 1, 2: 0},
    (0, 2): {0: 0, 1: 2, 2: 2},
    (1, 2): {0: 2, 1: 1, 2: 2},
}


class OracleEnsemble:
    """Votes straight from ground-truth cause membership.

    When the true label is outside a classifier's pair it picks the nearer
    label: a strict preference seen by the tie-vs-other classifier counts as
    a tie, a tie seen by the {0,1} classifier favours the first argument.
    """

    def __init__(self, causes):
        self.groundings = {c.grounding if hasattr(c, "grounding") else c for c in causes}

    @classmethod
    def for_scenario(cls, scenario: FailureScenario) -> "OracleEnsemble":
        return cls(scenario.causes)

    def label(self, a, b) -> int:
        return preference_label(a in self.groundings, b in self.groundings)

    def votes(self, sg: Subgraph, pairs) -> np.ndarray:
        out = np.empty((len(pairs), len(LABEL_PAIRS)), dtype=np.int64)
        for row, (k, m) in enumerate(pairs):
            t = self.label(sg.items[k], sg.items[m])
            for col, lp in enumerate(LABEL_PAIRS):
                out[row, col] = ORACLE_VOTE[lp][t]
        return out


@dataclass(frozen=True)
class TrainingPair:
    f_k: np.ndarray
    f_m: np.ndarray
    label: int


def build_training_pairs(scenarios) -> list[TrainingPair]:
    """Label every unordered statement pair of each scenario by cause membership."""
    out = []
    for sc in scenarios:
        sg = extract_subgraph(sc.graph, sc.desired_object)
        if len(sg) < 2:
            continue
        causes = {c.grounding for c in sc.causes}
        F = subgraph_features(sg)
        for k, m in itertools.combinations(range(len(sg)), 2):
            out.append(TrainingPair(F[k], F[m], preference_label(sg.items[k] in causes, sg.items[m] in causes)))
    return out


def pair_matrix(pairs, augment: bool = False):
    X = [np.concatenate([p.f_k, p.f_m]) for p in pairs]
    y = [p.label for p in pairs]
    if augment:
        swap = {0: 1, 1: 0, 2: 2}
        X += [np.concatenate([p.f_m, p.f_k]) for p in pairs]
        y += [swap[p.label] for p in pairs]
    width = len(X[0]) if X else 0
    return np.asarray(X).reshape(len(X), width), np.asarray(y, dtype=np.int64)


@dataclass
class RankerEnsemble:
    predicates: tuple[str, ...]
    attributes: tuple[str, ...]
    classifiers: dict  # (a, b) -> ForestModel

    def check_vocab(self, graph: SceneGraph) -> None:
        if tuple(graph.predicates) != self.predicates or tuple(graph.attributes) != self.attributes:
            raise RankingError("scene vocabularies differ from the ranker's")

    def votes(self, sg: Subgraph, pairs) -> np.ndarray:
        self.check_vocab(sg.graph)
        F = subgraph_features(sg)
        k = [p[0] for p in pairs]
        m = [p[1] for p in pairs]
        X = np.hstack([F[k], F[m]])
        cols = [np.asarray(self.classifiers[lp].predict(X), dtype=np.int64) for lp in LABEL_PAIRS]
        return np.stack(cols, axis=1)

    def to_dict(self) -> dict:
        return {
            "format_version": FORMAT_VERSION,
            "kind": "ranker",
            "predicates": list(self.predicates),
            "attributes": list(self.attributes),
            "classifiers": [{"labels": list(lp), "forest": self.classifiers[lp].to_dict()} for lp in LABEL_PAIRS],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "RankerEnsemble":
        if d.get("format_version") != FORMAT_VERSION or d.get("kind") != "ranker":
            raise FormatError("not a version-1 ranker file")
        try:
            classifiers = {tuple(c["labels"]): ForestModel.from_dict(c["forest"]) for c in d["classifiers"]}
            out = cls(tuple(d["predicates"]), tuple(d["attributes"]), classifiers)
        except (KeyError, TypeError, ValueError) as exc:
            raise FormatError(f"ranker: {exc}") from None
        if set(classifiers) != set(LABEL_PAIRS):
            raise FormatError(f"ranker needs classifiers for {LABEL_PAIRS}")
        return out

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), separators=(",", ":")) + "\n"

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(self.dumps())

    @classmethod
    def load(cls, path) -> "RankerEnsemble":
        with open(path, encoding="utf-8") as fh:
            try:
                return cls.from_dict(json.load(fh))
            except json.JSONDecodeError as exc:
                raise FormatError(f"{path}: line {exc.lineno}: {exc.msg}") from None


def one_vs_one_subsets(X, y, labels=LABEL_PAIRS):
    """Rows for each binary classifier: only samples labelled with one of its two labels."""
    out = {}
    for a, b in labels:
        mask = (y == a) | (y == b)
        present = set(np.unique(y[mask]).tolist())
        if present != {a, b}:
            missing = sorted({a, b} - present)
            raise RankingError(f"classifier {{{a},{b}}} has no training data for label(s) {missing}")
        out[(a, b)] = (X[mask], y[mask])
    return out


def train_ranker(pairs, params: ForestParams = RANKER_PARAMS, seed: int = 0, augment: bool = True,
                 predicates=None, attributes=None) -> RankerEnsemble:
    """Fit the three one-vs-one forests.

    With ``augment`` every pair is also added with its arguments swapped and
    labels 0 and 1 exchanged, which makes the classifiers close to
    order-consistent.
    """
    pairs = list(pairs)
    if not pairs:
        raise RankingError("no training pairs")
    X, y = pair_matrix(pairs, augment)
    subsets = one_vs_one_subsets(X, y)
    classifiers = {}
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        for i, lp in enumerate(LABEL_PAIRS):
            Xs, ys = subsets[lp]
            classifiers[lp] = train_forest(Xs, ys, params, seed + i, classes=lp)
    return RankerEnsemble(tuple(predicates or ()), tuple(attributes or ()), classifiers)


def train_ranker_from_scenarios(scenarios, params: ForestParams = RANKER_PARAMS, seed: int = 0,
                                augment: bool = True) -> RankerEnsemble:
    scenarios = list(scenarios)
    if not scenarios:
        raise RankingError("no training scenarios")
    g = scenarios[0].graph
    return train_ranker(build_training_pairs(scenarios), params, seed, augment,
                        tuple(g.predicates), tuple(g.attributes))


def classifier_cv_accuracy(pairs, label_pair=(0, 1), params: ForestParams = RANKER_PARAMS,
                           folds: int = 5, seed: int = 0, augment: bool = False) -> float:
    X, y = pair_matrix(list(pairs), augment)
    Xs, ys = one_vs_one_subsets(X, y, [label_pair])[label_pair]
    return cross_val_accuracy(Xs, ys.tolist(), params, folds, seed, classes=label_pair)
