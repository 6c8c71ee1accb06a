"""Graph lifts: trade graph size for tighter stability bounds.

Two constructions are provided.  The *step lift* of order K groups K
consecutive switching steps into one: nodes are unchanged, the alphabet
becomes all length-K words (re-indexed 1..M^K), and each lifted matrix is the
product along its word.  The *path lift* of degree R refines the node memory:
nodes become length-R paths of the original graph while the alphabet and
matrices stay the same.

Bounds computed on a lift transfer back: a bound rho on the K-step lift
yields rho**(1/K) for the original system, and a bound on a path lift applies
directly.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from functools import cached_property

import numpy as np

from .errors import ExplosionLimit, LiftMismatch
from .graph import (
    DEFAULT_ENUMERATION_LIMIT,
    Edge,
    GraphPath,
    LabelWord,
    NodeDistribution,
    StochasticGraph,
    all_words,
    enumerate_paths,
)
from .system import SwitchedSystem, word_product


@dataclass(frozen=True)
class StepLift:
    """K consecutive steps fused into one symbol.

    ``words[i]`` is the length-K word behind lifted label ``i + 1``; lifted
    labels are assigned in lexicographic order of the stored symbol tuples.
    """

    source: SwitchedSystem
    K: int
    graph: StochasticGraph
    words: tuple[LabelWord, ...]
    matrices: dict

    @cached_property
    def system(self) -> SwitchedSystem:
        return SwitchedSystem(self.graph, self.matrices)

    @cached_property
    def word_index(self) -> dict:
        return {w: i + 1 for i, w in enumerate(self.words)}

    def encode_word(self, word: LabelWord) -> LabelWord:
        """Re-express a length-kK word over the original alphabet as a
        length-k word over the lifted alphabet."""
        if len(word) % self.K != 0:
            raise LiftMismatch(f"word length {len(word)} is not a multiple of K={self.K}")
        chunks = [LabelWord(word.symbols[m * self.K:(m + 1) * self.K])
                  for m in range(len(word) // self.K)]
        return LabelWord(tuple(self.word_index[c] for c in chunks))

    def decode_word(self, word: LabelWord) -> LabelWord:
        """Inverse of :meth:`encode_word`."""
        symbols = []
        for s in word.symbols:
            symbols.extend(self.words[s - 1].symbols)
        return LabelWord(tuple(symbols))


def step_lift(system: SwitchedSystem, K: int,
              limit=DEFAULT_ENUMERATION_LIMIT) -> StepLift:
    """Build the K-step lift of a system.

    Edge probabilities are accumulated exactly (Fractions) through the
    recursion: a length-K word's probability from a to b sums, over midpoints
    c, the length-(K-1) probability from a to c times the final edge c -> b.
    """
    if K < 1:
        raise ValueError("K must be >= 1")
    g = system.graph
    M = g.alphabet_size
    if len(g.nodes) ** 2 * M ** K > limit:
        raise ExplosionLimit(len(g.nodes) ** 2 * M ** K, limit)

    # table[(a, b)][word symbols] = exact probability of walking a -> b along word
    table = {}
    for e in g.edges:  # duplicate (start, end, label) keys are impossible in a valid graph
        table.setdefault((e.start, e.end), {})[(e.label,)] = e.prob
    for _ in range(K - 1):
        nxt = {}
        for (a, c), words in table.items():
            for e in g.out_edges[c]:
                bucket = nxt.setdefault((a, e.end), {})
                for w, p in words.items():
                    key = (e.label,) + w
                    bucket[key] = bucket.get(key, Fraction(0)) + p * e.prob
        table = nxt

    words = tuple(all_words(M, K))
    index = {w.symbols: i + 1 for i, w in enumerate(words)}
    edges = []
    for (a, b), wordmap in table.items():
        for symbols, p in wordmap.items():
            edges.append(Edge(a, b, index[symbols], p))
    lifted_graph = StochasticGraph(len(words), g.nodes, tuple(edges))
    matrices = {i + 1: word_product(system, w) for i, w in enumerate(words)}
    return StepLift(system, K, lifted_graph, words, matrices)


@dataclass(frozen=True)
class PathLift:
    """Node memory refined to the last R traversed edges.

    ``node_paths`` maps each lifted node id (of the form ``"a-1->b-2->c"``)
    to the underlying :class:`GraphPath`; for R=0 the lift is the identity
    and paths are None.
    """

    source: SwitchedSystem
    R: int
    graph: StochasticGraph
    node_paths: dict

    @cached_property
    def system(self) -> SwitchedSystem:
        return SwitchedSystem(self.graph, dict(self.source.matrices))


def _path_node_id(path: GraphPath) -> str:
    parts = [path.start]
    for e in path.edges:
        parts.append(f"-{e.label}->{e.end}")
    return "".join(parts)


def path_lift(system: SwitchedSystem, R: int,
              limit=DEFAULT_ENUMERATION_LIMIT) -> PathLift:
    """Build the path lift of degree R.

    Lifted nodes are the length-R paths of the source graph; an edge of the
    lift advances the path window by one original edge, keeping that edge's
    label and probability.  Alphabet and matrices are unchanged.
    """
    if R < 0:
        raise ValueError("R must be >= 0")
    g = system.graph
    if R == 0:
        return PathLift(system, 0, g, {n: None for n in g.nodes})
    paths = enumerate_paths(g, R, limit=limit)
    node_paths = {_path_node_id(p): p for p in paths}
    if len(node_paths) != len(paths):
        raise LiftMismatch("node id collision in path lift; rename graph nodes")
    edges = []
    for q in enumerate_paths(g, R + 1, limit=limit):
        last = q.edges[-1]
        u = _path_node_id(GraphPath(q.edges[:-1]))
        v = _path_node_id(GraphPath(q.edges[1:]))
        edges.append(Edge(u, v, last.label, last.prob))
    lifted_graph = StochasticGraph(g.alphabet_size, tuple(node_paths), tuple(edges))
    return PathLift(system, R, lifted_graph, node_paths)


def lift_distribution(lift, xi: NodeDistribution) -> NodeDistribution:
    """Push a node distribution through a lift.

    For a step lift the nodes are unchanged and so are the weights.  For a
    path lift of degree R, a lifted node (a length-R path q) receives weight
    ``xi(start(q)) * prob(q)``.
    """
    if xi.graph != lift.source.graph:
        raise LiftMismatch("distribution is not over the lift's source graph")
    if isinstance(lift, StepLift):
        return NodeDistribution(lift.graph, xi.weights)
    if not isinstance(lift, PathLift):
        raise LiftMismatch(f"not a lift object: {type(lift).__name__}")
    if lift.R == 0:
        return NodeDistribution(lift.graph, xi.weights)
    weights = []
    for node in lift.graph.nodes:
        q = lift.node_paths[node]
        weights.append(xi.of(q.start) * float(q.prob))
    return NodeDistribution(lift.graph, tuple(weights))
