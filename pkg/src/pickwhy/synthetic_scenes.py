"""Synthetic cluttered tabletop scenes with ground-truth relations and failures.

Scenes are 2.5-D: every object has a rectangular footprint on the table plane,
a height, and a support (the table, on top of another object, or in a
container). Predicates are derived from the support forest plus two
center-distance thresholds, and bounding boxes come from a simple oblique
camera projection with seeded jitter.
"""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field, fields

import numpy as np

from .scene_model import (
    ATTRIBUTE,
    COMPOUND_SPATIAL,
    DEFAULT_ATTRIBUTES,
    DEFAULT_PREDICATES,
    FAILURE_TYPES,
    FORMAT_VERSION,
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
    SceneNode,
    classify_failure,
    dumps,
    scene_from_dict,
)

ADVERSE_ATTRIBUTES = ("fragile", "heavy", "hot")
SPLITS = ("train", "validation", "test")
SPLIT_PERCENT = (66, 17, 17)


class GenerationError(SceneError):
    pass


@dataclass(frozen=True)
class CatalogEntry:
    label: str
    width: tuple[float, float]
    depth: tuple[float, float]
    height: tuple[float, float]
    attributes: tuple[str, ...] = ()
    container: bool = False
    supports: bool = False


# sizes in centimetres
CATALOG = (
    CatalogEntry("credit card", (8.5, 8.5), (5.4, 5.4), (0.1, 0.1), supports=True),
    CatalogEntry("newspaper", (28, 34), (36, 42), (0.5, 1.5), supports=True),
    CatalogEntry("book", (15, 20), (21, 26), (2, 5), ("heavy",), supports=True),
    CatalogEntry("laptop", (30, 35), (21, 24), (1.5, 2.5), ("heavy", "hot"), supports=True),
    CatalogEntry("cutting board", (30, 40), (20, 28), (1.5, 3), (), supports=True),
    CatalogEntry("plate", (20, 27), (20, 27), (1.5, 3), ("fragile",), supports=True),
    CatalogEntry("phone", (7, 8), (14, 16), (0.8, 1), ("fragile",), supports=True),
    CatalogEntry("mug", (8, 10), (8, 10), (9, 11), ("hot",)),
    CatalogEntry("cup", (7, 8), (7, 8), (8, 10), ("hot", "fragile")),
    CatalogEntry("bowl", (13, 17), (13, 17), (6, 8), ("fragile",)),
    CatalogEntry("vase", (9, 12), (9, 12), (20, 30), ("fragile",)),
    CatalogEntry("wine glass", (7, 8), (7, 8), (16, 20), ("fragile",)),
    CatalogEntry("bottle", (7, 8), (7, 8), (22, 30), ("heavy",)),
    CatalogEntry("kettle", (17, 21), (15, 19), (20, 24), ("hot",)),
    CatalogEntry("pan", (24, 30), (24, 30), (4, 6), ("hot",)),
    CatalogEntry("apple", (7, 9), (7, 9), (7, 9)),
    CatalogEntry("keys", (5, 7), (3, 5), (1, 2)),
    CatalogEntry("remote", (4, 6), (16, 20), (2, 3)),
    CatalogEntry("box", (22, 32), (18, 26), (10, 16), ("heavy",), container=True, supports=True),
    CatalogEntry("basket", (26, 36), (20, 28), (12, 18), (), container=True),
    CatalogEntry("pot", (22, 26), (22, 26), (14, 18), ("hot", "heavy"), container=True),
)
CATALOG_LABELS = tuple(e.label for e in CATALOG)
_BY_LABEL = {e.label: e for e in CATALOG}


@dataclass(frozen=True)
class Support:
    kind: str  # "table" | "on" | "in"
    target: int | None = None

    def __str__(self):
        return "table" if self.kind == "table" else f"{self.kind}({self.target})"


TABLE = Support("table")


@dataclass(frozen=True)
class PlacedObject:
    id: int
    label: str
    attribute: str
    footprint: tuple[float, float, float, float]  # x, y, w, d
    height: float
    support: Support = TABLE
    container_open: bool = False
    is_container: bool = False
    elevation: float = 0.0

    @property
    def center(self) -> tuple[float, float]:
        x, y, w, d = self.footprint
        return (x + w / 2.0, y + d / 2.0)


@dataclass(frozen=True)
class Camera:
    """Oblique camera: x maps across the image, depth and elevation map upward."""

    scale: float = 4.0
    depth_scale: float = 0.5
    offset_x: float = 0.0
    offset_y: float = 400.0
    jitter: float = 0.05


@dataclass(frozen=True)
class GeneratorConfig:
    object_count_range: tuple[int, int] = (8, 18)
    relation_target_range: tuple[int, int] = (20, 40)
    attribute_rate: float = 0.4
    near_threshold: float = 25.0
    close_threshold: float = 14.0
    rng_seed: int = 0
    table_size: tuple[float, float] = (120.0, 80.0)
    stack_rate: float = 0.25
    contain_rate: float = 0.2
    container_closed_rate: float = 0.5
    failure_type_weights: tuple[float, float, float] = (1.0, 1.0, 1.0)
    labels: tuple[str, ...] = CATALOG_LABELS
    camera_jitter: float = 0.05
    max_retries: int = 200

    def __post_init__(self):
        for name in ("object_count_range", "relation_target_range", "table_size",
                     "failure_type_weights", "labels"):
            object.__setattr__(self, name, tuple(getattr(self, name)))
        lo, hi = self.object_count_range
        if not 2 <= lo <= hi:
            raise GenerationError(f"object_count_range must satisfy 2 <= lo <= hi, got {self.object_count_range}")
        lo, hi = self.relation_target_range
        if not 0 <= lo <= hi:
            raise GenerationError(f"relation_target_range is empty: {self.relation_target_range}")
        if not 0 < self.close_threshold < self.near_threshold:
            raise GenerationError("need 0 < close_threshold < near_threshold")
        for name in ("attribute_rate", "stack_rate", "contain_rate", "container_closed_rate"):
            if not 0.0 <= getattr(self, name) <= 1.0:
                raise GenerationError(f"{name} must lie in [0, 1]")
        if len(self.failure_type_weights) != 3 or min(self.failure_type_weights) < 0 \
                or sum(self.failure_type_weights) <= 0:
            raise GenerationError("failure_type_weights needs three non-negative weights with positive sum")
        unknown = [lab for lab in self.labels if lab not in _BY_LABEL]
        if unknown or not self.labels:
            raise GenerationError(f"unknown catalog labels: {unknown}")
        if self.max_retries < 1:
            raise GenerationError("max_retries must be positive")

    def to_dict(self) -> dict:
        d = asdict(self)
        return {k: list(v) if isinstance(v, tuple) else v for k, v in d.items()}

    @classmethod
    def from_dict(cls, d: dict) -> "GeneratorConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise GenerationError(f"unknown generator config keys: {sorted(unknown)}")
        return cls(**{k: tuple(v) if isinstance(v, list) else v for k, v in d.items()})


def _rng(*keys) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([int(k) for k in keys]))


# -- geometry oracle ---------------------------------------------------------

def _support_chain(obj: PlacedObject, by_id: dict) -> list[Support]:
    chain, cur, seen = [], obj, set()
    while cur.support.kind != "table":
        if cur.id in seen:
            raise SceneError(f"support cycle through object {cur.id}")
        seen.add(cur.id)
        chain.append(cur.support)
        cur = by_id[cur.support.target]
    return chain


def _containers_of(obj: PlacedObject, by_id: dict) -> list[int]:
    """Containers that hold ``obj`` directly or through its support chain."""
    return [s.target for s in _support_chain(obj, by_id) if s.kind == "in"]


def derive_predicates(objects: list[PlacedObject], config: GeneratorConfig) -> list[RelationTriple]:
    """At most one predicate per ordered pair, first matching rule wins."""
    by_id = {o.id: o for o in objects}
    containers = {o.id: _containers_of(o, by_id) for o in objects}
    triples = []
    for a in objects:
        ax, ay = a.center
        for b in objects:
            if a.id == b.id:
                continue
            if a.support == Support("on", b.id):
                pred = "on"
            elif a.support == Support("in", b.id):
                pred = "in"
            elif b.support == Support("on", a.id):
                pred = "underneath"
            elif b.id in containers[a.id]:
                pred = "inside"
            else:
                bx, by = b.center
                dist = math.hypot(ax - bx, ay - by)
                if dist <= config.close_threshold:
                    pred = "close_to"
                elif dist <= config.near_threshold:
                    pred = "near"
                else:
                    continue
            triples.append(RelationTriple(a.id, pred, b.id))
    return triples


def derive_failure_causes(objects, triples, desired_object: int, config=None) -> list[FailureCause]:
    """Occlusion, closed containment and adverse attributes of the desired object."""
    by_id = {o.id: o for o in objects}
    if desired_object not in by_id:
        raise SceneError(f"unknown desired object {desired_object}")
    causes = []
    for t in triples:
        if t.subject_id != desired_object:
            continue
        if t.predicate == "underneath":
            causes.append(FailureCause.spatial(t))
        elif t.predicate in ("in", "inside") and not by_id[t.object_id].container_open:
            causes.append(FailureCause.spatial(t))
    attr = by_id[desired_object].attribute
    if attr in ADVERSE_ATTRIBUTES:
        causes.append(FailureCause.from_attribute(desired_object, attr))
    return causes


def project_bbox(obj: PlacedObject, camera: Camera = Camera(), seed: int = 0) -> BoundingBox2D:
    x, y, w, d = obj.footprint
    if w <= 0 or d <= 0 or obj.height <= 0:
        raise SceneError(f"object {obj.id} needs a positive footprint and height")
    s = camera.scale
    bx = camera.offset_x + s * x
    by = camera.offset_y + s * (camera.depth_scale * y - obj.elevation - obj.height)
    bw = s * w
    bh = s * (camera.depth_scale * d + obj.height)
    if camera.jitter > 0:
        u = _rng(seed, obj.id).uniform(-camera.jitter, camera.jitter, size=4)
        bx += u[0] * bw
        by += u[1] * bh
        bw *= 1.0 + u[2]
        bh *= 1.0 + u[3]
    return BoundingBox2D(max(bx, 0.0), max(by, 0.0), bw, bh)


# -- placement ---------------------------------------------------------------

def _overlaps(a, b, margin=1.0) -> bool:
    ax, ay, aw, ad = a
    bx, by, bw, bd = b
    return not (ax + aw + margin <= bx or bx + bw + margin <= ax
                or ay + ad + margin <= by or by + bd + margin <= ay)


def _place_objects(config: GeneratorConfig, rng: np.random.Generator) -> list[PlacedObject]:
    n = int(rng.integers(config.object_count_range[0], config.object_count_range[1] + 1))
    tw, td = config.table_size
    placed: list[PlacedObject] = []
    contained_area: dict[int, float] = {}
    for _ in range(n):
        oid = len(placed)
        entry = _BY_LABEL[config.labels[int(rng.integers(len(config.labels)))]]
        w = float(rng.uniform(*entry.width))
        d = float(rng.uniform(*entry.depth))
        h = float(rng.uniform(*entry.height))
        attribute = "none"
        if entry.attributes and rng.random() < config.attribute_rate:
            attribute = entry.attributes[int(rng.integers(len(entry.attributes)))]
        is_open = bool(entry.container and rng.random() >= config.container_closed_rate)

        def free(cand, support):
            # objects resting on the same surface must not overlap
            return not any(_overlaps(cand, p.footprint, 0.0) for p in placed if p.support == support)

        def root(p):
            while p.support != TABLE:
                p = placed[p.support.target]
            return p

        def stack():
            bases = [p for p in placed if _BY_LABEL[p.label].supports
                     and not (p.is_container and p.container_open)]
            if not bases:
                return None
            base = bases[int(rng.integers(len(bases)))]
            bx, by, bw, bd = base.footprint
            for _ in range(10):
                cx = bx + bw / 2 + float(rng.uniform(-0.25, 0.25)) * bw
                cy = by + bd / 2 + float(rng.uniform(-0.25, 0.25)) * bd
                cand = (cx - w / 2, cy - d / 2, w, d)
                overhang = any(_overlaps(cand, p.footprint, 0.0) for p in placed
                               if p.support == TABLE and p.id != base.id and p.id != root(base).id)
                if free(cand, Support("on", base.id)) and not overhang:
                    return Support("on", base.id), cand, base.elevation + base.height
            return None

        def contain():
            hosts = [p for p in placed if p.is_container
                     and w <= 0.9 * p.footprint[2] and d <= 0.9 * p.footprint[3]
                     and contained_area.get(p.id, 0.0) + w * d <= 0.8 * p.footprint[2] * p.footprint[3]]
            if not hosts:
                return None
            host = hosts[int(rng.integers(len(hosts)))]
            hx, hy, hw, hd = host.footprint
            for _ in range(10):
                cand = (hx + float(rng.uniform(0, hw - w)), hy + float(rng.uniform(0, hd - d)), w, d)
                if free(cand, Support("in", host.id)):
                    contained_area[host.id] = contained_area.get(host.id, 0.0) + w * d
                    return Support("in", host.id), cand, host.elevation + 1.0
            return None

        def on_table():
            for _ in range(30):
                cand = (float(rng.uniform(0, tw - w)), float(rng.uniform(0, td - d)), w, d)
                if not any(_overlaps(cand, p.footprint) for p in placed):
                    return TABLE, cand, 0.0
            return None

        roll = rng.random()
        spot = None
        if roll < config.stack_rate:
            spot = stack()
        elif roll < config.stack_rate + config.contain_rate:
            spot = contain()
        # a crowded table: stack rather than overlap a neighbour
        spot = spot or on_table() or stack()
        if spot is None:
            continue
        support, footprint, elevation = spot
        placed.append(PlacedObject(oid, entry.label, attribute, footprint, h, support,
                                   is_open, entry.container, elevation))
    return placed


def _attempt(config: GeneratorConfig, seed: int, attempt: int, failure_type: str | None):
    rng = _rng(seed, attempt)
    objects = _place_objects(config, rng)
    if len(objects) < config.object_count_range[0]:
        return None, "object_count_range"
    triples = derive_predicates(objects, config)
    lo, hi = config.relation_target_range
    if not lo <= len(triples) <= hi:
        return None, "relation_target_range"
    by_type: dict[str, list] = {t: [] for t in FAILURE_TYPES}
    for o in objects:
        causes = derive_failure_causes(objects, triples, o.id, config)
        if causes:
            by_type[classify_failure(causes)].append((o.id, causes))
    if failure_type is not None:
        types = [failure_type] if by_type[failure_type] else []
    else:
        types = [t for t, w in zip(FAILURE_TYPES, config.failure_type_weights) if by_type[t] and w > 0]
    if not types:
        return None, "failure_type" if failure_type else "failure cause"
    weights = np.array([config.failure_type_weights[FAILURE_TYPES.index(t)] for t in types], dtype=float)
    if weights.sum() == 0:
        weights[:] = 1.0
    chosen = types[int(rng.choice(len(types), p=weights / weights.sum()))]
    d_obj, causes = by_type[chosen][int(rng.integers(len(by_type[chosen])))]

    camera = Camera(jitter=config.camera_jitter)
    bbox_seed = int(rng.integers(2**31))
    nodes = tuple(SceneNode(o.id, o.label, o.attribute, project_bbox(o, camera, bbox_seed)) for o in objects)
    graph = SceneGraph(nodes, tuple(triples), PredicateVocabulary(DEFAULT_PREDICATES),
                       AttributeVocabulary(DEFAULT_ATTRIBUTES))
    return (objects, FailureScenario(graph, d_obj, tuple(causes))), None


def generate_scene(config: GeneratorConfig = GeneratorConfig(), seed: int = 0,
                   failure_type: str | None = None) -> tuple[list[PlacedObject], FailureScenario]:
    """Generate one scene whose desired object cannot be picked.

    Placement attempts are re-drawn (deterministically from ``seed``) until the
    relation count lands in ``relation_target_range`` and some object has a
    failure of the requested type.
    """
    if failure_type is not None and failure_type not in FAILURE_TYPES:
        raise GenerationError(f"unknown failure type {failure_type!r}")
    misses: dict[str, int] = {}
    for attempt in range(config.max_retries):
        result, miss = _attempt(config, seed, attempt, failure_type)
        if result is not None:
            return result
        misses[miss] = misses.get(miss, 0) + 1
    worst = max(misses, key=misses.get)
    raise GenerationError(f"could not satisfy {worst} after {config.max_retries} attempts (seed {seed})")


# -- corpora -----------------------------------------------------------------

def split_sizes(n: int, percents=SPLIT_PERCENT) -> tuple[int, ...]:
    """Largest-remainder apportionment; with n >= len(percents) no split is empty."""
    total = sum(percents)
    quotas = [n * p for p in percents]
    sizes = [q // total for q in quotas]
    order = sorted(range(len(percents)), key=lambda i: (-(quotas[i] % total), i))
    for i in order[: n - sum(sizes)]:
        sizes[i] += 1
    if n >= len(percents):
        while 0 in sizes:
            donor = max(range(len(sizes)), key=lambda i: (sizes[i], -i))
            sizes[donor] -= 1
            sizes[sizes.index(0)] += 1
    return tuple(sizes)


@dataclass(frozen=True)
class Corpus:
    scenes: tuple[FailureScenario, ...]
    split: tuple[str, ...]
    config: GeneratorConfig = field(default_factory=GeneratorConfig)

    def __post_init__(self):
        object.__setattr__(self, "scenes", tuple(self.scenes))
        object.__setattr__(self, "split", tuple(self.split))
        if len(self.scenes) != len(self.split):
            raise SceneError("every scene needs a split tag")
        bad = set(self.split) - set(SPLITS)
        if bad:
            raise SceneError(f"unknown split tags {sorted(bad)}")

    def subset(self, name: str) -> list[FailureScenario]:
        return [s for s, tag in zip(self.scenes, self.split) if tag == name]

    def to_dict(self) -> dict:
        return {
            "format_version": FORMAT_VERSION,
            "config": self.config.to_dict(),
            "scenes": [{"split": tag, "scene": s.to_dict()} for s, tag in zip(self.scenes, self.split)],
        }


def build_corpus(config: GeneratorConfig = GeneratorConfig(), n_scenes: int = 188, seed: int | None = None,
                 failure_type: str | None = None) -> Corpus:
    if n_scenes < 3:
        raise GenerationError("a corpus needs at least 3 scenes")
    seed = config.rng_seed if seed is None else seed
    scenes = tuple(generate_scene(config, int(s), failure_type)[1]
                   for s in np.random.SeedSequence(seed).generate_state(n_scenes))
    tags = []
    for name, size in zip(SPLITS, split_sizes(n_scenes)):
        tags.extend([name] * size)
    snapshot = GeneratorConfig.from_dict({**config.to_dict(), "rng_seed": seed})
    return Corpus(scenes, tuple(tags), snapshot)


def corpus_dumps(corpus: Corpus) -> str:
    doc = corpus.to_dict()
    lines = ["{" + f'"format_version": {doc["format_version"]}, "config": {json.dumps(doc["config"])}, "scenes": [']
    rows = [dumps(s).rstrip("\n") for s in doc["scenes"]]
    lines.append(",\n".join(rows))
    lines.append("]}")
    return "\n".join(lines) + "\n"


def save_corpus(corpus: Corpus, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(corpus_dumps(corpus))


def corpus_from_dict(doc: dict) -> Corpus:
    if not isinstance(doc, dict):
        raise FormatError("corpus document must be a JSON object")
    if doc.get("format_version") != FORMAT_VERSION:
        raise FormatError(f"format_version: unsupported value {doc.get('format_version')!r}")
    try:
        config = GeneratorConfig.from_dict(doc["config"])
    except KeyError:
        raise FormatError("config: missing") from None
    except (TypeError, SceneError) as exc:
        raise FormatError(f"config: {exc}") from None
    if not isinstance(doc.get("scenes"), list):
        raise FormatError("scenes: missing or not a list")
    scenes, tags = [], []
    for i, row in enumerate(doc["scenes"]):
        try:
            tags.append(row["split"])
            _, scenario = scene_from_dict({"format_version": FORMAT_VERSION, **row["scene"]})
        except KeyError as exc:
            raise FormatError(f"scenes[{i}]: missing field {exc}") from None
        except (TypeError, SceneError) as exc:
            raise FormatError(f"scenes[{i}]: {exc}") from None
        if scenario is None:
            raise FormatError(f"scenes[{i}].scene.failure: missing")
        scenes.append(scenario)
    try:
        return Corpus(tuple(scenes), tuple(tags), config)
    except SceneError as exc:
        raise FormatError(f"scenes: {exc}") from None


def load_corpus(path) -> Corpus:
    with open(path, encoding="utf-8") as fh:
        text = fh.read()
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise FormatError(f"{path}: line {exc.lineno}: {exc.msg}") from None
    return corpus_from_dict(doc)


__all__ = [
    "ADVERSE_ATTRIBUTES", "ATTRIBUTE", "CATALOG", "COMPOUND_SPATIAL", "Camera", "Corpus",
    "GenerationError", "GeneratorConfig", "PlacedObject", "SINGLE_SPATIAL", "Support", "build_corpus",
    "corpus_dumps", "derive_failure_causes", "derive_predicates", "generate_scene", "load_corpus",
    "project_bbox", "save_corpus", "split_sizes",
]
