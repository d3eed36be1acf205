import pathlib

import pytest

from crowdtier import load_edge_list

DATA = pathlib.Path(__file__).parent / "data"

# EX6 fixture: costs by original device label 1..6.
EX6_COSTS = {1: 2, 2: 4, 3: 2, 4: 5, 5: 3, 6: 2}
EX6_BUDGET = 12


@pytest.fixture(scope="session")
def ex6_graph():
    return load_edge_list(str(DATA / "ex6.txt"))


@pytest.fixture(scope="session")
def ex6(ex6_graph):
    """(graph, dense costs, budget, label maps) for the six-device example."""
    to_dense = dict(ex6_graph.id_map)
    to_label = {d: o for o, d in to_dense.items()}
    costs = {to_dense[label]: c for label, c in EX6_COSTS.items()}
    return ex6_graph, costs, EX6_BUDGET, to_dense, to_label


@pytest.fixture(scope="session")
def ex6_paths():
    return str(DATA / "ex6.txt"), str(DATA / "ex6_costs.csv")
