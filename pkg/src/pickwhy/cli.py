"""Command-line entry point.

Every subcommand takes ``--seed`` (falling back to ``$PICKWHY_SEED``, then 0)
and an optional ``--config`` JSON file with the sections ``generator``,
``predicate_forest`` and ``ranker_forest``. Unknown keys are rejected before
any work starts.

Exit codes: 0 success, 1 validation error, 2 I/O error. Failures print one
line ``error: <code>: <detail>`` to standard error.
"""
from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import dataclass, field

from .evalharness import POLICIES, run_experiment
from .explain import VARIANTS, generate_cb, generate_none, generate_ssg, generate_ssg_r
from .forest import DEFAULT_GRID, ForestParams, grid_search
from .predicate_model import (
    PredicateModel,
    evaluate_predicates,
    label_vocabulary,
    pair_dataset,
    train_predicate_model,
)
from .ranking import (
    RANKER_PARAMS,
    OracleEnsemble,
    RankerEnsemble,
    extract_subgraph,
    pairwise_rank,
    train_ranker_from_scenarios,
)
from .scene_model import AttributeFact, FormatError, SceneError, SceneGraph, scene_from_dict
from .synthetic_scenes import SPLITS, GeneratorConfig, build_corpus, corpus_from_dict, save_corpus

CONFIG_SECTIONS = ("generator", "predicate_forest", "ranker_forest")


class CliError(Exception):
    def __init__(self, code: str, detail: str, status: int):
        super().__init__(detail)
        self.code, self.detail, self.status = code, detail, status


def validation(detail) -> CliError:
    return CliError("validation", str(detail), 1)


@dataclass
class Config:
    generator: GeneratorConfig = field(default_factory=GeneratorConfig)
    predicate_forest: ForestParams = field(default_factory=ForestParams)
    ranker_forest: ForestParams = RANKER_PARAMS
    seed: int = 0


def _forest_params(section: str, d, base: ForestParams) -> ForestParams:
    if not isinstance(d, dict):
        raise validation(f"config.{section}: expected an object")
    try:
        return ForestParams(**{**base.__dict__, **d})
    except TypeError as exc:
        raise validation(f"config.{section}: {exc}") from None
    except ValueError as exc:
        raise validation(f"config.{section}: {exc}") from None


def load_config(path, seed: int) -> Config:
    cfg = Config(seed=seed)
    if path is None:
        return cfg
    doc = _read_json(path)
    if not isinstance(doc, dict):
        raise validation(f"{path}: config must be a JSON object")
    unknown = sorted(set(doc) - set(CONFIG_SECTIONS))
    if unknown:
        raise validation(f"{path}: unknown config keys {unknown}")
    if "generator" in doc:
        try:
            cfg.generator = GeneratorConfig.from_dict({**cfg.generator.to_dict(), **doc["generator"]})
        except (TypeError, SceneError) as exc:
            raise validation(f"config.generator: {exc}") from None
    if "predicate_forest" in doc:
        cfg.predicate_forest = _forest_params("predicate_forest", doc["predicate_forest"], cfg.predicate_forest)
    if "ranker_forest" in doc:
        cfg.ranker_forest = _forest_params("ranker_forest", doc["ranker_forest"], cfg.ranker_forest)
    return cfg


def resolve_seed(value) -> int:
    if value is not None:
        return value
    env = os.environ.get("PICKWHY_SEED")
    if env is None or env == "":
        return 0
    try:
        return int(env)
    except ValueError:
        raise validation(f"PICKWHY_SEED is not an integer: {env!r}") from None


# -- file helpers ------------------------------------------------------------

def _read_json(path):
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise CliError("io", f"{path}: {exc.strerror or exc}", 2) from None
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise validation(f"{path}: line {exc.lineno}: {exc.msg}") from None


def _write_text(path, text: str) -> None:
    try:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(text)
    except OSError as exc:
        raise CliError("io", f"{path}: {exc.strerror or exc}", 2) from None


def _load_corpus(path):
    return corpus_from_dict(_read_json(path))


def _load_scene(path, index):
    """A scene file, or scene ``index`` of a corpus file."""
    doc = _read_json(path)
    if isinstance(doc, dict) and "scenes" in doc:
        corpus = corpus_from_dict(doc)
        if index is None:
            raise validation(f"{path} is a corpus; pass --index")
        if not 0 <= index < len(corpus.scenes):
            raise validation(f"--index {index} out of range for {len(corpus.scenes)} scenes")
        sc = corpus.scenes[index]
        return sc.graph, sc
    if index is not None:
        raise validation(f"{path} is a single scene; --index does not apply")
    return scene_from_dict(doc)


def _desired_object(graph: SceneGraph, scenario, obj):
    if obj is None:
        if scenario is None:
            raise validation("scene has no failure block; pass --object")
        obj = scenario.desired_object
    if not graph.has_node(obj):
        raise validation(f"unknown node id {obj}")
    return obj


def _scenario_for(graph, scenario, obj):
    if scenario is None or scenario.desired_object != obj:
        raise validation("the oracle ranker needs the scene's failure block for this object")
    return scenario


def _load_ranker(source, graph, scenario, obj):
    if source == "oracle":
        return OracleEnsemble.for_scenario(_scenario_for(graph, scenario, obj))
    d = _read_json(source)
    return RankerEnsemble.from_dict(d)


def _splits(text: str) -> list[str]:
    names = [s.strip() for s in text.split(",") if s.strip()]
    bad = [s for s in names if s not in SPLITS]
    if bad or not names:
        raise validation(f"unknown split names {bad or [text]}; choose from {list(SPLITS)}")
    return names


def _scenes(corpus, splits):
    out = [sc for name in splits for sc in corpus.subset(name)]
    if not out:
        raise validation(f"no scenes in split(s) {splits}")
    return out


# -- subcommands -------------------------------------------------------------

def cmd_gen(args, cfg: Config, out):
    corpus = build_corpus(cfg.generator, args.n, cfg.seed, args.failure_type)
    try:
        save_corpus(corpus, args.out)
    except OSError as exc:
        raise CliError("io", f"{args.out}: {exc.strerror or exc}", 2) from None
    sizes = {name: len(corpus.subset(name)) for name in SPLITS}
    print(f"wrote {len(corpus.scenes)} scenes to {args.out} "
          f"(train {sizes['train']}, validation {sizes['validation']}, test {sizes['test']})", file=out)


def _dot_string(s: str) -> str:
    return '"' + s.replace("\\", "\\\\").replace('"', '\\"') + '"'


def graph_to_dot(graph: SceneGraph, triples=None, name: str = "scene") -> str:
    """``digraph`` text: one node statement per node, one edge per triple labelled by its predicate."""
    triples = graph.triples if triples is None else triples
    lines = [f"digraph {name} {{"]
    for n in graph.nodes:
        label = n.label if n.attribute == "none" else f"{n.label} ({n.attribute})"
        lines.append(f"  n{n.id} [label={_dot_string(label)}];")
    for t in triples:
        lines.append(f"  n{t.subject_id} -> n{t.object_id} [label={_dot_string(t.predicate)}];")
    lines.append("}")
    return "\n".join(lines) + "\n"


def cmd_graph(args, cfg, out):
    graph, scenario = _load_scene(args.scene, args.index)
    triples = graph.triples
    if args.object is not None:
        obj = _desired_object(graph, scenario, args.object)
        triples = tuple(t for t in graph.triples if t.mentions(obj))
    if args.dot:
        out.write(graph_to_dot(graph, triples))
        return
    for n in graph.nodes:
        x, y, w, h = n.bbox.as_list()
        out.write(f"node\t{n.id}\t{n.label}\t{n.attribute}\t{x!r}\t{y!r}\t{w!r}\t{h!r}\n")
    for t in triples:
        out.write(f"triple\t{t.subject_id}\t{t.predicate}\t{t.object_id}\n")
    if scenario is not None:
        out.write(f"failure\t{scenario.desired_object}\t{scenario.failure_type}\n")


def cmd_train_predicates(args, cfg, out):
    corpus = _load_corpus(args.corpus)
    graphs = [sc.graph for sc in _scenes(corpus, _splits(args.splits))]
    params = cfg.predicate_forest
    if args.cv:
        X, y = pair_dataset(graphs, label_vocabulary(graphs))
        params, results = grid_search(X, y, DEFAULT_GRID, args.folds, cfg.seed)
        for p, acc in results:
            print(f"cv\tmax_depth={p.max_depth}\tn_trees={p.n_trees}\t{acc!r}", file=out)
    model = train_predicate_model(graphs, params, cfg.seed)
    _write_text(args.out, model.dumps())
    print(f"wrote predicate model to {args.out} ({len(graphs)} scenes)", file=out)


def cmd_eval_predicates(args, cfg, out):
    corpus = _load_corpus(args.corpus)
    model = PredicateModel.from_dict(_read_json(args.model))
    result = evaluate_predicates(model, [sc.graph for sc in _scenes(corpus, _splits(args.splits))])
    print(f"accuracy\t{result.accuracy!r}", file=out)
    print(f"related_accuracy\t{result.related_accuracy!r}", file=out)
    if args.confusion_out:
        _write_text(args.confusion_out, result.confusion.to_csv())


def cmd_train_ranker(args, cfg, out):
    corpus = _load_corpus(args.corpus)
    scenes = _scenes(corpus, _splits(args.splits))
    ranker = train_ranker_from_scenarios(scenes, cfg.ranker_forest, cfg.seed, augment=not args.no_augment)
    _write_text(args.out, ranker.dumps())
    print(f"wrote ranker to {args.out} ({len(scenes)} scenes)", file=out)


def _item_columns(item):
    if isinstance(item, AttributeFact):
        return item.node_id, "has_attribute", item.attribute
    return item.subject_id, item.predicate, item.object_id


def cmd_rank(args, cfg, out):
    graph, scenario = _load_scene(args.scene, args.index)
    obj = _desired_object(graph, scenario, args.object)
    ranker = _load_ranker(args.ranker, graph, scenario, obj)
    sg = extract_subgraph(graph, obj)
    if not len(sg):
        raise validation(f"node {obj} takes part in no relation and has no attribute")
    for item, rank in pairwise_rank(sg, ranker, ordered=not args.unordered).entries:
        s, p, o = _item_columns(item)
        out.write(f"{rank}\t{s}\t{p}\t{o}\n")


def cmd_explain(args, cfg, out):
    graph, scenario = _load_scene(args.scene, args.index)
    obj = _desired_object(graph, scenario, args.object)
    variant = args.variant.replace("-", "_")
    if variant == "ssg_r":
        if args.ranker is None:
            raise validation("--variant ssg-r needs --ranker")
        ranker = _load_ranker(args.ranker, graph, scenario, obj)
        exp = generate_ssg_r(graph, obj, ranker)
    elif variant == "ssg":
        exp = generate_ssg(graph, obj)
    elif variant == "none":
        exp = generate_none()
    else:
        exp = generate_cb(_scenario_for(graph, scenario, obj))
    if args.json:
        out.write(json.dumps(exp.to_dict(), separators=(", ", ": ")) + "\n")
    else:
        out.write(exp.text + "\n")


def cmd_eval(args, cfg, out):
    corpus = _load_corpus(args.corpus)
    scenes = _scenes(corpus, _splits(args.splits))
    conditions = [c.strip().replace("-", "_") for c in args.conditions.split(",") if c.strip()]
    bad = [c for c in conditions if c not in VARIANTS]
    if bad or not conditions:
        raise validation(f"unknown conditions {bad}; choose from {list(VARIANTS)}")
    ranker = None
    if args.ranker == "oracle":
        ranker = "oracle"
    elif args.ranker is not None:
        ranker = RankerEnsemble.from_dict(_read_json(args.ranker))
    report = run_experiment(scenes, conditions, ranker, cfg.seed, args.policy)
    csv_text = report.to_csv()
    if args.out:
        _write_text(args.out, csv_text)
    else:
        out.write(csv_text)
    if args.json_out:
        _write_text(args.json_out, report.to_json())


# -- parser ------------------------------------------------------------------

def _common(p):
    p.add_argument("--seed", type=int, default=None, help="master seed (default: $PICKWHY_SEED or 0)")
    p.add_argument("--config", default=None, help="JSON file with generator/predicate_forest/ranker_forest overrides")


def _scene_args(p):
    p.add_argument("--scene", required=True, help="scene JSON, or a corpus JSON together with --index")
    p.add_argument("--index", type=int, default=None, help="scene index when --scene is a corpus")
    p.add_argument("--object", type=int, default=None,
                   help="desired object id (default: the scene's failure block)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="pickwhy", description="Explain why a robot could not pick an object.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen", help="generate a synthetic corpus")
    p.add_argument("--n", type=int, default=188, help="number of scenes (default 188)")
    p.add_argument("--out", required=True, help="corpus JSON to write")
    p.add_argument("--failure-type", default=None, choices=("single_spatial", "compound_spatial", "attribute"),
                   help="generate only this failure type")
    _common(p)
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("graph", help="list a scene graph or export it as DOT")
    _scene_args(p)
    p.add_argument("--dot", action="store_true", help="emit graphviz DOT")
    _common(p)
    p.set_defaults(func=cmd_graph)

    p = sub.add_parser("train-predicates", help="train the predicate and attribute classifier")
    p.add_argument("--corpus", required=True)
    p.add_argument("--out", required=True, help="model JSON to write")
    p.add_argument("--splits", default="train", help="comma-separated training splits (default train)")
    p.add_argument("--cv", action="store_true", help="pick depth and tree count by k-fold grid search")
    p.add_argument("--folds", type=int, default=5)
    _common(p)
    p.set_defaults(func=cmd_train_predicates)

    p = sub.add_parser("eval-predicates", help="accuracy and confusion matrix of a predicate model")
    p.add_argument("--corpus", required=True)
    p.add_argument("--model", required=True)
    p.add_argument("--splits", default="test", help="comma-separated evaluation splits (default test)")
    p.add_argument("--confusion-out", default=None, help="CSV file for the confusion matrix")
    _common(p)
    p.set_defaults(func=cmd_eval_predicates)

    p = sub.add_parser("train-ranker", help="train the three pairwise preference classifiers")
    p.add_argument("--corpus", required=True)
    p.add_argument("--out", required=True, help="ranker JSON to write")
    p.add_argument("--splits", default="train,validation", help="comma-separated training splits")
    p.add_argument("--no-augment", action="store_true", help="do not add argument-swapped copies of each pair")
    _common(p)
    p.set_defaults(func=cmd_train_ranker)

    p = sub.add_parser("rank", help="print rank<TAB>subject<TAB>predicate<TAB>object per statement")
    _scene_args(p)
    p.add_argument("--ranker", required=True, help="ranker JSON or 'oracle'")
    p.add_argument("--unordered", action="store_true", help="vote over unordered statement pairs only")
    _common(p)
    p.set_defaults(func=cmd_rank)

    p = sub.add_parser("explain", help="print an explanation sentence")
    _scene_args(p)
    p.add_argument("--variant", required=True, choices=("none", "cb", "ssg", "ssg-r", "ssg_r"))
    p.add_argument("--ranker", default=None, help="ranker JSON or 'oracle' (ssg-r only)")
    p.add_argument("--json", action="store_true", help="emit {variant, text, supporting_relations, ...}")
    _common(p)
    p.set_defaults(func=cmd_explain)

    p = sub.add_parser("eval", help="score explanation conditions with a simulated responder")
    p.add_argument("--corpus", required=True)
    p.add_argument("--conditions", default="none,cb,ssg,ssg_r")
    p.add_argument("--ranker", default=None, help="ranker JSON or 'oracle' (needed for ssg_r)")
    p.add_argument("--policy", default="oracle", choices=POLICIES)
    p.add_argument("--splits", default="test")
    p.add_argument("--out", default=None, help="CSV report (default: standard output)")
    p.add_argument("--json-out", default=None, help="JSON report")
    _common(p)
    p.set_defaults(func=cmd_eval)
    return parser


def main(argv=None, out=None, err=None) -> int:
    out = out or sys.stdout
    err = err or sys.stderr
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = load_config(args.config, resolve_seed(args.seed))
        args.func(args, cfg, out)
    except CliError as exc:
        print(f"error: {exc.code}: {exc.detail}", file=err)
        return exc.status
    except OSError as exc:
        print(f"error: io: {getattr(exc, 'filename', '') or ''}: {exc.strerror or exc}", file=err)
        return 2
    except (SceneError, ValueError, KeyError) as exc:
        code = "format" if isinstance(exc, FormatError) else "validation"
        print(f"error: {code}: {exc}", file=err)
        return 1
    out.flush()
    return 0


if __name__ == "__main__":
    sys.exit(main())
