"""Small named graphs used throughout the tests, the CLI and the docs."""
from __future__ import annotations

from .graph_core import load_graph, make_graph

FIX_A = "2 0 1\n0 1 1.0\n"
FIX_B = "3 0 2\n0 1 1\n1 2 1\n"
FIX_C = "3 0 2\n0 1 0.6\n1 2 0.4\n"


def fix_a():
    """Single unit edge s - m."""
    return load_graph(FIX_A)


def fix_b():
    """Unit path s - a - m."""
    return load_graph(FIX_B)


def fix_c(delta=0.1):
    """Path s - x - t with weights 1/2 + delta and 1/2 - delta."""
    return make_graph(3, [(0, 1, 0.5 + delta), (1, 2, 0.5 - delta)], 0, [2])


def fix_d():
    """Path 0 - 1 - 2 - 3 with source 1 and both ends absorbing."""
    return make_graph(4, [(0, 1, 1.0), (1, 2, 1.0), (2, 3, 1.0)], 1, [0, 3])


def fix_e():
    """Cycle C_6 with source 0 and sink {2, 4}."""
    return make_graph(6, [(i, (i + 1) % 6, 1.0) for i in range(6)], 0, [2, 4])


FIXTURES = {"A": fix_a, "B": fix_b, "C": fix_c, "D": fix_d, "E": fix_e}


def all_fixtures():
    return {k: f() for k, f in FIXTURES.items()}
