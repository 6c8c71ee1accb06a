"""Stochastic graphs over a finite label alphabet, and the measures they induce.

A stochastic graph constrains a random switching signal: nodes are memory
states, each edge carries a label from ``{1, ..., M}`` and a probability, and
the outgoing probabilities of every node sum to one.  Together with an initial
node distribution this induces a probability measure on label sequences, which
is what all stability analysis in this package is built on.

Word orientation
----------------
A :class:`LabelWord` stores its symbols most-recent-first: ``symbols[0]`` is
the label applied last and ``symbols[-1]`` the label applied first.  This
matches the product convention ``matrix(word) = A[symbols[0]] @ ... @
A[symbols[-1]]`` used by the system layer.  All I/O — parsing, ``str()``,
reports — uses the opposite, chronological order (first-applied label first),
which is the natural reading of a simulated path.  Use
:meth:`LabelWord.from_applied` / :attr:`LabelWord.applied` at the boundary.

Probabilities are stored as :class:`fractions.Fraction`, so identities like
"the transition matrix of a lifted graph equals a power of the original"
can be checked in exact arithmetic.  Numerical routines convert to floats.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from fractions import Fraction
from functools import cached_property

import numpy as np

from .errors import (
    BadLabel,
    DuplicateEdge,
    ExplosionLimit,
    NoConvergence,
    NonPositiveProbability,
    NotStronglyConnected,
    RowSumViolation,
    UnknownNode,
)

#: Default cap on the number of objects any path/word enumeration may produce.
DEFAULT_ENUMERATION_LIMIT = 10**7

#: Tolerance for "outgoing probabilities sum to one" when inputs are floats.
ROW_SUM_TOL = 1e-12


def as_fraction(value):
    """Convert a probability written as ``Fraction``, ``"p/q"``, decimal string,
    int, or float to an exact :class:`Fraction`.

    Strings are parsed exactly ("1/3" stays one third, "0.25" becomes 1/4);
    floats keep their exact binary value so that round-trips are lossless.
    """
    if isinstance(value, Fraction):
        return value
    if isinstance(value, (str, int)):
        return Fraction(value)
    if isinstance(value, float):
        return Fraction(value)
    raise TypeError(f"cannot interpret {value!r} as a probability")


def fraction_to_json(value: Fraction):
    """Render a Fraction for JSON: a plain float when that is lossless,
    otherwise the exact string ``"p/q"``."""
    f = float(value)
    if Fraction(f) == value:
        return f
    return f"{value.numerator}/{value.denominator}"


@dataclass(frozen=True, order=True)
class LabelWord:
    """A finite word over the alphabet, stored most-recent-first."""

    symbols: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "symbols", tuple(int(s) for s in self.symbols))

    @classmethod
    def from_applied(cls, seq):
        """Build a word from labels listed in the order they are applied."""
        return cls(tuple(reversed(tuple(seq))))

    @classmethod
    def parse(cls, text):
        """Parse chronological text such as ``"2 1"`` (or compact ``"21"``)."""
        text = text.strip()
        if not text:
            return cls(())
        parts = text.replace(",", " ").split()
        if len(parts) == 1 and len(parts[0]) > 1:
            parts = list(parts[0])
        return cls.from_applied(int(p) for p in parts)

    @property
    def applied(self) -> tuple[int, ...]:
        """Symbols in chronological order (first-applied first)."""
        return tuple(reversed(self.symbols))

    @property
    def predecessor(self) -> "LabelWord":
        """The word with its most recent symbol removed."""
        if not self.symbols:
            raise ValueError("empty word has no predecessor")
        return LabelWord(self.symbols[1:])

    @property
    def final(self) -> int:
        """The most recent symbol."""
        if not self.symbols:
            raise ValueError("empty word has no final symbol")
        return self.symbols[0]

    def after(self, earlier: "LabelWord") -> "LabelWord":
        """The word obtained by applying ``earlier`` first, then ``self``."""
        return LabelWord(self.symbols + earlier.symbols)

    def check_alphabet(self, alphabet_size):
        for s in self.symbols:
            if not 1 <= s <= alphabet_size:
                raise BadLabel(s, alphabet_size, where=str(self))

    def __len__(self):
        return len(self.symbols)

    def __str__(self):
        return " ".join(str(s) for s in self.applied)


def all_words(alphabet_size, length):
    """All words of the given length, ordered lexicographically by their
    stored (most-recent-first) symbol tuple."""
    return [LabelWord(t) for t in itertools.product(range(1, alphabet_size + 1), repeat=length)]


@dataclass(frozen=True)
class Edge:
    """A labeled probabilistic edge.  ``prob`` is an exact Fraction in (0, 1]."""

    start: str
    end: str
    label: int
    prob: Fraction

    def __post_init__(self):
        object.__setattr__(self, "prob", as_fraction(self.prob))
        object.__setattr__(self, "label", int(self.label))
        if self.prob <= 0:
            raise NonPositiveProbability(self.key, self.prob)

    @property
    def key(self):
        return (self.start, self.end, self.label)


@dataclass(frozen=True)
class StochasticGraph:
    """A finite stochastic graph.

    Parameters
    ----------
    alphabet_size
        Number of labels M; labels are 1..M.
    nodes
        Node identifiers.  Stored sorted lexicographically; every emitted
        matrix or vector follows this order.
    edges
        Labeled probabilistic edges.  Zero-probability edges must be omitted.
        Stored sorted by (start, label, end).
    """

    alphabet_size: int
    nodes: tuple[str, ...]
    edges: tuple[Edge, ...]

    def __post_init__(self):
        object.__setattr__(self, "alphabet_size", int(self.alphabet_size))
        object.__setattr__(self, "nodes", tuple(sorted(str(n) for n in self.nodes)))
        edges = tuple(sorted((e if isinstance(e, Edge) else Edge(*e) for e in self.edges),
                             key=lambda e: (e.start, e.label, e.end)))
        object.__setattr__(self, "edges", edges)
        validate(self)

    @classmethod
    def from_edges(cls, alphabet_size, edges, nodes=None):
        """Build a graph from ``(start, end, label, prob)`` tuples; nodes are
        collected from the edges unless given explicitly."""
        edge_objs = [Edge(str(s), str(e), l, p) for (s, e, l, p) in edges]
        if nodes is None:
            nodes = {e.start for e in edge_objs} | {e.end for e in edge_objs}
        return cls(alphabet_size, tuple(nodes), tuple(edge_objs))

    # -- derived, cached structure ------------------------------------------

    @cached_property
    def node_index(self) -> dict:
        return {n: i for i, n in enumerate(self.nodes)}

    @cached_property
    def out_edges(self) -> dict:
        table = {n: [] for n in self.nodes}
        for e in self.edges:
            table[e.start].append(e)
        return {n: tuple(es) for n, es in table.items()}

    @cached_property
    def label_matrices(self) -> dict:
        """Per-label transition matrices: ``L[i][a, b] = p_{a,b,i}`` (floats)."""
        S = len(self.nodes)
        mats = {i: np.zeros((S, S)) for i in range(1, self.alphabet_size + 1)}
        idx = self.node_index
        for e in self.edges:
            mats[e.label][idx[e.start], idx[e.end]] = float(e.prob)
        for m in mats.values():
            m.flags.writeable = False
        return mats

    def __len__(self):
        return len(self.nodes)


def validate(graph: StochasticGraph):
    """Check all structural invariants; raises on the first violation.

    Runs automatically at construction time, so a ``StochasticGraph`` instance
    that exists is valid; call this again only on data built by other means.
    """
    if graph.alphabet_size < 1:
        raise BadLabel(None, graph.alphabet_size, where="alphabet")
    if len(set(graph.nodes)) != len(graph.nodes):
        raise UnknownNode("duplicate node ids")
    node_set = set(graph.nodes)
    seen = set()
    sums = {n: Fraction(0) for n in graph.nodes}
    for e in graph.edges:
        if e.start not in node_set:
            raise UnknownNode(e.start)
        if e.end not in node_set:
            raise UnknownNode(e.end)
        if not 1 <= e.label <= graph.alphabet_size:
            raise BadLabel(e.label, graph.alphabet_size, where=e.key)
        if e.prob <= 0:
            raise NonPositiveProbability(e.key, e.prob)
        if e.key in seen:
            raise DuplicateEdge(e.key)
        seen.add(e.key)
        sums[e.start] += e.prob
    for n in graph.nodes:
        if abs(float(sums[n]) - 1.0) > ROW_SUM_TOL:
            raise RowSumViolation(n, sums[n])


def transition_matrix(graph: StochasticGraph, exact=False):
    """Node-to-node transition matrix ``P[a, b] = sum_i p_{a,b,i}``.

    With ``exact=True`` returns an object array of Fractions, suitable for
    exact identities; otherwise a float array.
    """
    S = len(graph.nodes)
    idx = graph.node_index
    if exact:
        P = np.full((S, S), Fraction(0), dtype=object)
        for e in graph.edges:
            P[idx[e.start], idx[e.end]] += e.prob
        return P
    P = np.zeros((S, S))
    for e in graph.edges:
        P[idx[e.start], idx[e.end]] += float(e.prob)
    return P


def exact_matrix_power(P, k):
    """k-th power of a square object array (e.g. of Fractions)."""
    S = P.shape[0]
    out = np.full((S, S), Fraction(0), dtype=object)
    np.fill_diagonal(out, Fraction(1))
    for _ in range(k):
        out = out @ P
    return out


def is_strongly_connected(graph: StochasticGraph) -> bool:
    """True iff every node reaches every other along directed edges."""
    S = len(graph.nodes)
    if S == 0:
        return False
    idx = graph.node_index
    fwd = [[] for _ in range(S)]
    back = [[] for _ in range(S)]
    for e in graph.edges:
        fwd[idx[e.start]].append(idx[e.end])
        back[idx[e.end]].append(idx[e.start])

    def reaches_all(adj):
        seen = [False] * S
        stack = [0]
        seen[0] = True
        count = 1
        while stack:
            u = stack.pop()
            for w in adj[u]:
                if not seen[w]:
                    seen[w] = True
                    count += 1
                    stack.append(w)
        return count == S

    return reaches_all(fwd) and reaches_all(back)


@dataclass(frozen=True)
class NodeDistribution:
    """A probability distribution over the nodes of a graph."""

    graph: StochasticGraph
    weights: tuple[float, ...]

    def __post_init__(self):
        w = tuple(float(x) for x in self.weights)
        object.__setattr__(self, "weights", w)
        if len(w) != len(self.graph.nodes):
            raise UnknownNode(f"{len(w)} weights for {len(self.graph.nodes)} nodes")
        if any(x < -1e-15 for x in w):
            raise NonPositiveProbability("distribution", min(w))
        if abs(sum(w) - 1.0) > 1e-9:
            raise RowSumViolation("distribution", sum(w))

    @classmethod
    def uniform(cls, graph):
        S = len(graph.nodes)
        return cls(graph, (1.0 / S,) * S)

    @classmethod
    def point(cls, graph, node):
        if node not in graph.node_index:
            raise UnknownNode(node)
        i = graph.node_index[node]
        return cls(graph, tuple(1.0 if j == i else 0.0 for j in range(len(graph.nodes))))

    @classmethod
    def from_mapping(cls, graph, mapping):
        missing = set(mapping) - set(graph.nodes)
        if missing:
            raise UnknownNode(sorted(missing)[0])
        return cls(graph, tuple(float(as_fraction(mapping.get(n, 0))) for n in graph.nodes))

    def of(self, node) -> float:
        return self.weights[self.graph.node_index[node]]

    def as_array(self) -> np.ndarray:
        return np.array(self.weights)


def invariant_measure(graph: StochasticGraph) -> NodeDistribution:
    """The unique stationary distribution ``xi`` with ``xi^T P = xi^T``.

    Solves the singular system directly (one balance row replaced by the
    normalization constraint); if that is numerically degenerate, falls back
    to power iteration with tolerance 1e-14.

    Raises
    ------
    NotStronglyConnected
        If the graph is not strongly connected (uniqueness would fail).
    NoConvergence
        If the fallback power iteration stalls.
    """
    if not is_strongly_connected(graph):
        raise NotStronglyConnected()
    P = transition_matrix(graph)
    S = P.shape[0]
    A = P.T - np.eye(S)
    A[-1, :] = 1.0
    rhs = np.zeros(S)
    rhs[-1] = 1.0
    xi = None
    try:
        cand = np.linalg.solve(A, rhs)
        if np.all(np.isfinite(cand)) and np.max(np.abs(P.T @ cand - cand)) <= 1e-10 \
                and abs(cand.sum() - 1.0) <= 1e-10 and np.all(cand > 0):
            xi = cand
    except np.linalg.LinAlgError:
        xi = None
    if xi is None:
        xi = np.full(S, 1.0 / S)
        for _ in range(10**6):
            nxt = xi @ P
            nxt /= nxt.sum()
            if np.max(np.abs(nxt - xi)) <= 1e-14:
                xi = nxt
                break
            xi = nxt
        else:
            raise NoConvergence("power iteration for the invariant measure did not converge")
    if not np.all(xi > 0):
        raise NotStronglyConnected("stationary distribution has non-positive entries")
    return NodeDistribution(graph, tuple(xi))


def _word_vector(graph: StochasticGraph, xi: NodeDistribution, word: LabelWord) -> np.ndarray:
    """Vector of node-word measures: entry s is the probability of observing
    ``word`` and ending at node s, starting from ``xi``."""
    word.check_alphabet(graph.alphabet_size)
    vec = xi.as_array()
    for sym in word.applied:
        vec = vec @ graph.label_matrices[sym]
    return vec


def node_word_measure(graph, xi, node, word) -> float:
    """Probability of observing ``word`` and sitting at ``node`` afterwards."""
    if node not in graph.node_index:
        raise UnknownNode(node)
    return float(_word_vector(graph, xi, word)[graph.node_index[node]])


def cylinder_measure(graph, xi, word) -> float:
    """Probability that the switching signal begins with ``word``."""
    return float(_word_vector(graph, xi, word).sum())


def shift_preimage_measure(graph, xi, word, R) -> float:
    """Probability that ``word`` occurs after R arbitrary initial steps.

    Equals the sum of cylinder measures over all length-R prefixes; computed
    by pushing ``xi`` forward R steps through the transition matrix.
    """
    if R < 0:
        raise ValueError("R must be >= 0")
    vec = xi.as_array()
    P = transition_matrix(graph)
    for _ in range(R):
        vec = vec @ P
    for sym in word.applied:
        vec = vec @ graph.label_matrices[sym]
    return float(vec.sum())


@dataclass(frozen=True)
class GraphPath:
    """A finite path: a sequence of consecutive edges."""

    edges: tuple[Edge, ...]

    @property
    def start(self):
        return self.edges[0].start

    @property
    def end(self):
        return self.edges[-1].end

    @property
    def word(self) -> LabelWord:
        return LabelWord.from_applied(e.label for e in self.edges)

    @property
    def prob(self) -> Fraction:
        p = Fraction(1)
        for e in self.edges:
            p *= e.prob
        return p


def enumerate_paths(graph, length, start=None, limit=DEFAULT_ENUMERATION_LIMIT):
    """All paths of the given length (in edges), optionally from one node.

    Paths are produced in lexicographic order of their edge keys.  Raises
    :class:`ExplosionLimit` if the search could exceed ``limit`` paths.
    """
    if length < 1:
        raise ValueError("path length must be >= 1")
    estimate = len(graph.edges) ** length
    if estimate > limit:
        raise ExplosionLimit(estimate, limit)
    if start is not None and start not in graph.node_index:
        raise UnknownNode(start)
    starts = [start] if start is not None else list(graph.nodes)
    out = []
    for s in starts:
        stack = [(s, ())]
        while stack:
            node, prefix = stack.pop()
            if len(prefix) == length:
                out.append(GraphPath(prefix))
                if len(out) > limit:
                    raise ExplosionLimit(len(out), limit)
                continue
            # reversed keeps DFS output in ascending (label, end) order
            for e in reversed(graph.out_edges[node]):
                stack.append((e.end, prefix + (e,)))
    out.sort(key=lambda p: tuple(e.key for e in p.edges))
    return out
