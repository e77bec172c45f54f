"""Failure- and solution-identification scoring for simulated responders.

A responder reads an explanation and selects the causes it believes in and
the remedies it would try. Compound spatial failures are scored by recall,
all other failure types by F1.
"""
from __future__ import annotations

import csv
import io
import json
import re
from dataclasses import dataclass

import numpy as np

from .explain import DEFAULT_LEXICON, VARIANTS, cb_phrase, explain, render_statement
from .ranking import OracleEnsemble, extract_subgraph
from .scene_model import (
    ATTRIBUTE,
    COMPOUND_SPATIAL,
    FAILURE_TYPES,
    SINGLE_SPATIAL,
    AttributeFact,
    FailureCause,
    FailureScenario,
)

POLICIES = ("oracle", "random-k", "literal-text-parser")
REMEDY_FOR_ATTRIBUTE = {"fragile": "handle_with_care", "heavy": "get_help_for_heavy", "hot": "wait_to_cool"}
SOLUTION_KINDS = ("remove_occluder", "open_container", "handle_with_care", "get_help_for_heavy",
                  "wait_to_cool", "none_needed")


@dataclass(frozen=True, order=True)
class SolutionAction:
    kind: str
    target: int | None = None

    def __post_init__(self):
        if self.kind not in SOLUTION_KINDS:
            raise ValueError(f"unknown solution kind {self.kind!r}")
        if (self.kind in ("remove_occluder", "open_container")) != (self.target is not None):
            raise ValueError(f"{self.kind} {'needs' if self.target is None else 'takes no'} target id")

    def __str__(self):
        return self.kind if self.target is None else f"{self.kind}({self.target})"


@dataclass(frozen=True)
class ResponseRecord:
    scenario_id: int
    selected_causes: frozenset
    selected_solutions: frozenset


# -- metrics -----------------------------------------------------------------

def _check_truth(truth):
    truth = set(truth)
    if not truth:
        raise ValueError("truth set must not be empty")
    return truth


def precision(selected, truth) -> float:
    truth, selected = _check_truth(truth), set(selected)
    return len(selected & truth) / len(selected) if selected else 0.0


def recall(selected, truth) -> float:
    truth = _check_truth(truth)
    return len(set(selected) & truth) / len(truth)


def f1(selected, truth) -> float:
    p, r = precision(selected, truth), recall(selected, truth)
    return 0.0 if p + r == 0 else 2 * p * r / (p + r)


def metric_for(failure_type: str) -> str:
    return "Recall" if failure_type == COMPOUND_SPATIAL else "F1"


def score(selected, truth, failure_type: str) -> float:
    return recall(selected, truth) if failure_type == COMPOUND_SPATIAL else f1(selected, truth)


# -- remedies ----------------------------------------------------------------

def ground_truth_solutions(scenario: FailureScenario) -> frozenset:
    out = set()
    for c in scenario.causes:
        if c.kind == "attribute":
            out.add(SolutionAction(REMEDY_FOR_ATTRIBUTE[c.fact.attribute]))
        elif c.triple.predicate == "underneath":
            out.add(SolutionAction("remove_occluder", c.triple.object_id))
        else:
            out.add(SolutionAction("open_container", c.triple.object_id))
    return frozenset(out)


def remedy_for_statement(item, d_obj: int) -> SolutionAction | None:
    """What a responder would try if it blamed ``item``.

    Containment of the object suggests opening the container; any other
    relation suggests moving the other object away.
    """
    if isinstance(item, AttributeFact):
        kind = REMEDY_FOR_ATTRIBUTE.get(item.attribute)
        return SolutionAction(kind) if kind else None
    if item.subject_id == d_obj and item.predicate in ("in", "inside"):
        return SolutionAction("open_container", item.object_id)
    return SolutionAction("remove_occluder", item.other(d_obj))


def _as_cause(item) -> FailureCause:
    if isinstance(item, AttributeFact):
        return FailureCause.from_attribute(item.node_id, item.attribute)
    return FailureCause.spatial(item)


def _response(scenario_id, scenario, items) -> ResponseRecord:
    d = scenario.desired_object
    causes = frozenset(_as_cause(it) for it in items)
    sols = frozenset(s for s in (remedy_for_statement(it, d) for it in items) if s is not None)
    return ResponseRecord(scenario_id, causes, sols)


# -- responders --------------------------------------------------------------

def _parse_reasoning(text: str, scenario: FailureScenario, lexicon=DEFAULT_LEXICON) -> list:
    m = re.match(r"^The robot could not pick up .*? because (.*)\.$", text)
    if not m:
        return []
    reasoning = m.group(1)
    sg = extract_subgraph(scenario.graph, scenario.desired_object)
    candidates = {render_statement(it, lexicon, scenario.graph): it for it in sg.items}
    found, seen = [], set()
    for phrase in re.split(r", | and (?=the )", reasoning):
        if phrase in candidates:
            it = candidates[phrase]
            if it not in seen:
                found.append(it)
                seen.add(it)
        elif phrase.endswith(" is occluded"):
            found += [t for t in sg.items if getattr(t, "predicate", None) == "underneath"
                      and t.subject_id == scenario.desired_object]
        elif phrase.endswith(" is in a closed container"):
            found += [t for t in sg.items if getattr(t, "predicate", None) in ("in", "inside")
                      and t.subject_id == scenario.desired_object]
    return found


def simulate_responder(scenario: FailureScenario, explanation, policy: str = "oracle", seed: int = 0,
                       scenario_id: int = 0, k: int = 1) -> ResponseRecord:
    """Selections of a simulated participant.

    ``oracle`` blames exactly the statements the explanation rests on,
    ``literal-text-parser`` recovers them from the rendered sentence alone and
    ``random-k`` blames ``k`` statements about the object picked at random.
    """
    if policy == "oracle":
        items = list(explanation.supporting_relations) + list(explanation.supporting_attributes)
    elif policy == "literal-text-parser":
        items = _parse_reasoning(explanation.text, scenario)
    elif policy == "random-k":
        sg = extract_subgraph(scenario.graph, scenario.desired_object)
        rng = np.random.default_rng(np.random.SeedSequence([seed, scenario_id]))
        pick = rng.permutation(len(sg))[: min(k, len(sg))]
        items = [sg.items[i] for i in sorted(pick)]
    else:
        raise ValueError(f"unknown responder policy {policy!r}")
    return _response(scenario_id, scenario, items)


# -- experiments -------------------------------------------------------------

@dataclass(frozen=True)
class ScenarioScore:
    scenario_id: int
    condition: str
    failure_type: str
    metric: str
    fid: float
    sid: float


@dataclass
class ScoreReport:
    rows: list[ScenarioScore]
    conditions: tuple[str, ...]

    def scores(self, condition: str, failure_type: str | None = None, which: str = "fid") -> list[float]:
        return [getattr(r, which) for r in self.rows
                if r.condition == condition and (failure_type in (None, "all") or r.failure_type == failure_type)]

    def mean(self, condition: str, failure_type: str | None = None, which: str = "fid") -> float:
        vals = self.scores(condition, failure_type, which)
        return float(np.mean(vals)) if vals else float("nan")

    def table(self) -> list[dict]:
        """Aggregate rows: per condition, per failure type plus ``all``, for FId and SId."""
        out = []
        for cond in self.conditions:
            for ftype in FAILURE_TYPES + ("all",):
                for which, name in (("fid", "FId"), ("sid", "SId")):
                    vals = self.scores(cond, ftype, which)
                    if not vals:
                        continue
                    metric = name if ftype == "all" else f"{name}-{metric_for(ftype)}"
                    out.append({"condition": cond, "failure_type": ftype, "metric": metric,
                                "mean": sum(vals) / len(vals), "n": len(vals)})
        return out

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["condition", "failure_type", "metric", "mean", "n"])
        for row in self.table():
            w.writerow([row["condition"], row["failure_type"], row["metric"], repr(row["mean"]), row["n"]])
        return buf.getvalue()

    def to_json(self) -> str:
        doc = {
            "format_version": 1,
            "conditions": list(self.conditions),
            "aggregate": self.table(),
            "scenarios": [r.__dict__ for r in self.rows],
        }
        return json.dumps(doc, indent=1) + "\n"


def run_experiment(scenarios, conditions=VARIANTS, ranker=None, seed: int = 0,
                   policy: str = "oracle") -> ScoreReport:
    """Score every scenario under every explanation condition.

    ``ranker`` may be a trained ensemble or the string ``"oracle"``; it is
    required only when ``ssg_r`` is among the conditions.
    """
    scenarios = list(scenarios)
    conditions = tuple(c.replace("-", "_") for c in conditions)
    for c in conditions:
        if c not in VARIANTS:
            raise ValueError(f"unknown condition {c!r}")
    if "ssg_r" in conditions and ranker is None:
        raise ValueError("the ssg_r condition needs a ranker")
    if not scenarios:
        raise ValueError("no test scenarios to evaluate")
    rows = []
    for cond in conditions:
        for sid, sc in enumerate(scenarios):
            ens = OracleEnsemble.for_scenario(sc) if ranker == "oracle" else ranker
            exp = explain(cond, sc, ens)
            resp = simulate_responder(sc, exp, policy, seed, sid)
            rows.append(ScenarioScore(
                sid, cond, sc.failure_type, metric_for(sc.failure_type),
                score(resp.selected_causes, sc.causes, sc.failure_type),
                score(resp.selected_solutions, ground_truth_solutions(sc), sc.failure_type),
            ))
    return ScoreReport(rows, conditions)


__all__ = [
    "ATTRIBUTE", "POLICIES", "ResponseRecord", "ScoreReport", "SINGLE_SPATIAL", "SolutionAction", "cb_phrase",
    "f1", "ground_truth_solutions", "precision", "recall", "run_experiment", "simulate_responder",
]
