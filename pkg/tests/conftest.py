import pytest

from pickwhy.scene_model import (
    BoundingBox2D,
    FailureCause,
    FailureScenario,
    RelationTriple,
    SceneGraph,
    SceneNode,
)


def node(i, label, attribute="none", x=None):
    x = 10.0 + 40.0 * i if x is None else x
    return SceneNode(i, label, attribute, BoundingBox2D(x, 20.0, 30.0, 25.0))


CARD, NEWSPAPER, MUG = 0, 1, 2


def card_graph():
    nodes = [node(CARD, "credit card"), node(NEWSPAPER, "newspaper"), node(MUG, "mug")]
    triples = [RelationTriple(CARD, "underneath", NEWSPAPER), RelationTriple(CARD, "near", MUG)]
    return SceneGraph(nodes, triples)


@pytest.fixture
def card_scene():
    g = card_graph()
    return FailureScenario(g, CARD, (FailureCause.spatial(g.triples[0]),))


@pytest.fixture
def vase_scene():
    g = SceneGraph([node(0, "vase", "fragile"), node(1, "bowl")], [RelationTriple(0, "near", 1)])
    return FailureScenario(g, 0, (FailureCause.from_attribute(0, "fragile"),))


@pytest.fixture
def compound_scene():
    # mug underneath a cutting board and in a closed box, near a plate
    nodes = [node(0, "mug"), node(1, "cutting board"), node(2, "box"), node(3, "plate")]
    triples = [
        RelationTriple(1, "on", 0),
        RelationTriple(0, "underneath", 1),
        RelationTriple(0, "in", 2),
        RelationTriple(0, "near", 3),
    ]
    g = SceneGraph(nodes, triples)
    causes = (FailureCause.spatial(triples[1]), FailureCause.spatial(triples[2]))
    return FailureScenario(g, 0, causes)


# PASS/FAIL lines from the acceptance tests, echoed after the run so they show without -s
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[2].rstrip(":"))):
            terminalreporter.write_line(line)
