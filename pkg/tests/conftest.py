"""Shared fixtures and random-instance generators for the test suite."""

from fractions import Fraction

import numpy as np
import pytest

from switchcert import StochasticGraph, SwitchedSystem


@pytest.fixture
def fang_graph():
    """Two-node, two-label running example used throughout the suite."""
    return StochasticGraph.from_edges(2, [
        ("a", "a", 1, "1/3"),
        ("a", "b", 2, "2/3"),
        ("b", "a", 1, "1/4"),
        ("b", "b", 2, "3/4"),
    ])


@pytest.fixture
def fang_system(fang_graph):
    return SwitchedSystem(fang_graph, {
        1: [[0.5, 1.0], [0.0, 0.5]],
        2: [[1.0, 0.0], [0.1, 1.0]],
    })


@pytest.fixture
def single_mode_half():
    g = StochasticGraph.from_edges(1, [("s", "s", 1, 1)])
    return SwitchedSystem(g, {1: [[0.5, 0.0], [0.0, 0.5]]})


@pytest.fixture
def nilpotent_system():
    g = StochasticGraph.from_edges(1, [("s", "s", 1, 1)])
    return SwitchedSystem(g, {1: [[0.0, 2.0], [0.0, 0.0]]})


def random_sc_graph(rng, max_nodes=4, max_labels=3):
    """Random strongly connected stochastic graph with exact rational
    probabilities (integer weights normalized per node)."""
    S = int(rng.integers(1, max_nodes + 1))
    M = int(rng.integers(1, max_labels + 1))
    nodes = [f"n{i}" for i in range(S)]
    keys = set()
    for i in range(S):  # Hamiltonian cycle guarantees strong connectivity
        keys.add((nodes[i], nodes[(i + 1) % S], int(rng.integers(1, M + 1))))
    for _ in range(int(rng.integers(0, 2 * S + 1))):
        keys.add((nodes[int(rng.integers(S))], nodes[int(rng.integers(S))],
                  int(rng.integers(1, M + 1))))
    by_node = {}
    for start, end, label in sorted(keys):
        by_node.setdefault(start, []).append((end, label))
    edges = []
    for start, outs in by_node.items():
        weights = [int(rng.integers(1, 10)) for _ in outs]
        total = sum(weights)
        for (end, label), w in zip(outs, weights):
            edges.append((start, end, label, Fraction(w, total)))
    return StochasticGraph.from_edges(M, edges, nodes=nodes)


def random_system(rng, graph=None, positive=False, dim=2, scale=1.0, **graph_kw):
    """Random switched system, on the given graph or a fresh random one."""
    g = graph if graph is not None else random_sc_graph(rng, **graph_kw)
    mats = {}
    for label in range(1, g.alphabet_size + 1):
        if positive:
            A = rng.uniform(0.05, 1.0, size=(dim, dim))
        else:
            A = rng.uniform(-1.0, 1.0, size=(dim, dim))
        mats[label] = scale * A
    return SwitchedSystem(g, mats)


def growth_oracle(system, xi, k):
    """Exact k-step growth proxy: sum over all length-k paths of
    prob * ||product||, by direct enumeration.  Small k only."""
    from switchcert import enumerate_paths, word_product

    total = 0.0
    for path in enumerate_paths(system.graph, k):
        nrm = float(np.linalg.norm(word_product(system, path.word), 2))
        total += float(path.prob) * xi.of(path.start) * nrm
    return total
