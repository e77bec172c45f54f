"""Semantic scene-graph explanations for robot pick failures."""
from .explain import Explanation, PhraseLexicon, explain, generate_cb, generate_none, generate_ssg, generate_ssg_r
from .forest import ForestModel, ForestParams, train_forest
from .kernels import BACKEND
from .ranking import OracleEnsemble, RankerEnsemble, extract_subgraph, pairwise_rank, top_ranked
from .scene_model import (
    AttributeFact,
    BoundingBox2D,
    FailureCause,
    FailureScenario,
    RelationTriple,
    SceneGraph,
    SceneNode,
)
from .synthetic_scenes import GeneratorConfig, build_corpus, generate_scene

__version__ = "0.1.0"
