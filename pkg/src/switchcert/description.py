"""Self-describing JSON system descriptions.

One file carries the whole problem: the stochastic graph, the matrix per
label, and optional analysis defaults.  Probabilities and matrix entries
may be written as rational strings (``"1/3"``) for exactness or as plain
numbers; whichever form is used is preserved through a parse/emit round
trip, and the content digest hashes the canonical form so formatting and
key order do not matter.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path

from .errors import MatrixLabelMismatch, SchemaError
from .graph import NodeDistribution, StochasticGraph, as_fraction, fraction_to_json
from .system import SwitchedSystem
from .util import canonical_json

SCHEMA_VERSION = 1

_DEFAULT_KEYS = {"horizon", "trials", "seed"}


@dataclass(frozen=True)
class SystemDescription:
    """Parsed, exact form of a system description file."""

    version: int
    alphabet: int
    nodes: tuple
    edges: tuple          # (start, end, label, Fraction prob)
    matrices: dict        # label -> tuple of row tuples of Fraction
    initial_distribution: dict | None = None
    defaults: dict | None = None

    def to_dict(self) -> dict:
        data = {
            "version": self.version,
            "graph": {
                "alphabet": self.alphabet,
                "nodes": list(self.nodes),
                "edges": [
                    {"from": s, "to": e, "label": l, "prob": fraction_to_json(p)}
                    for (s, e, l, p) in self.edges
                ],
            },
            "matrices": {
                str(label): [[fraction_to_json(v) for v in row] for row in rows]
                for label, rows in sorted(self.matrices.items())
            },
        }
        if self.initial_distribution is not None:
            data["initial_distribution"] = {
                node: fraction_to_json(p)
                for node, p in sorted(self.initial_distribution.items())
            }
        if self.defaults is not None:
            data["defaults"] = dict(sorted(self.defaults.items()))
        return data

    def emit(self) -> bytes:
        return canonical_json(self.to_dict())

    @property
    def digest(self) -> str:
        """Hex digest of the canonical form (whitespace-insensitive)."""
        return hashlib.sha256(self.emit()).hexdigest()

    def graph(self) -> StochasticGraph:
        return StochasticGraph.from_edges(self.alphabet, self.edges,
                                          nodes=self.nodes)

    def system(self) -> SwitchedSystem:
        mats = {label: [[float(v) for v in row] for row in rows]
                for label, rows in self.matrices.items()}
        return SwitchedSystem(self.graph(), mats)

    def distribution(self, graph=None) -> NodeDistribution | None:
        """The file's initial distribution, or None when absent."""
        if self.initial_distribution is None:
            return None
        return NodeDistribution.from_mapping(graph or self.graph(),
                                             self.initial_distribution)


def _need(data, key, kind, pointer):
    if key not in data:
        raise SchemaError(f"{pointer}/{key}", "missing required field")
    value = data[key]
    if not isinstance(value, kind) or isinstance(value, bool):
        raise SchemaError(f"{pointer}/{key}",
                          f"expected {kind.__name__}, got {type(value).__name__}")
    return value


def _as_exact(value, pointer) -> Fraction:
    if isinstance(value, bool) or not isinstance(value, (int, float, str)):
        raise SchemaError(pointer, "expected a number or rational string")
    try:
        return as_fraction(value)
    except (ValueError, ZeroDivisionError) as exc:
        raise SchemaError(pointer, f"bad rational: {exc}") from exc


def parse_system(source) -> SystemDescription:
    """Parse a description from a path, raw bytes/str, or a decoded dict.

    Structural problems raise ``SchemaError`` with a JSON-pointer-style
    location; a matrices block whose labels do not cover the alphabet
    raises ``MatrixLabelMismatch``.  Rational strings are kept exact.
    """
    if isinstance(source, Path):
        raw = source.read_bytes()
    elif isinstance(source, bytes):
        raw = source
    elif isinstance(source, str):
        # a string is JSON text when it looks like an object, a path otherwise
        raw = source.encode() if source.lstrip().startswith("{") \
            else Path(source).read_bytes()
    else:
        raw = None
    if raw is not None:
        try:
            data = json.loads(raw.decode("utf-8"))
        except (UnicodeDecodeError, json.JSONDecodeError) as exc:
            raise SchemaError("/", f"not valid UTF-8 JSON: {exc}") from exc
    else:
        data = source
    if not isinstance(data, dict):
        raise SchemaError("/", "top level must be an object")

    version = data.get("version", SCHEMA_VERSION)
    if not isinstance(version, int) or isinstance(version, bool):
        raise SchemaError("/version", "must be an integer")
    if version != SCHEMA_VERSION:
        raise SchemaError("/version", f"unsupported version {version}")

    gblock = _need(data, "graph", dict, "")
    alphabet = _need(gblock, "alphabet", int, "/graph")
    if alphabet < 1:
        raise SchemaError("/graph/alphabet", "must be at least 1")
    nodes_raw = _need(gblock, "nodes", list, "/graph")
    nodes = []
    for i, node in enumerate(nodes_raw):
        if not isinstance(node, str) or not node:
            raise SchemaError(f"/graph/nodes/{i}", "node names are non-empty strings")
        nodes.append(node)
    if len(set(nodes)) != len(nodes):
        raise SchemaError("/graph/nodes", "duplicate node name")
    edges_raw = _need(gblock, "edges", list, "/graph")
    edges = []
    for i, entry in enumerate(edges_raw):
        where = f"/graph/edges/{i}"
        if not isinstance(entry, dict):
            raise SchemaError(where, "each edge is an object")
        start = _need(entry, "from", str, where)
        end = _need(entry, "to", str, where)
        label = _need(entry, "label", int, where)
        for node, key in ((start, "from"), (end, "to")):
            if node not in set(nodes):
                raise SchemaError(f"{where}/{key}", f"unknown node {node!r}")
        prob = _as_exact(entry.get("prob"), f"{where}/prob")
        edges.append((start, end, label, prob))

    mblock = _need(data, "matrices", dict, "")
    expected = {str(i) for i in range(1, alphabet + 1)}
    if set(mblock) != expected:
        raise MatrixLabelMismatch(sorted(expected), sorted(mblock))
    matrices = {}
    dim = None
    for key in sorted(mblock, key=int):
        rows_raw = mblock[key]
        where = f"/matrices/{key}"
        if not isinstance(rows_raw, list) or not rows_raw:
            raise SchemaError(where, "expected a non-empty list of rows")
        if dim is None:
            dim = len(rows_raw)
        if len(rows_raw) != dim:
            raise SchemaError(where, f"expected {dim} rows, got {len(rows_raw)}")
        rows = []
        for r, row in enumerate(rows_raw):
            if not isinstance(row, list) or len(row) != dim:
                raise SchemaError(f"{where}/{r}", f"expected a row of {dim} entries")
            rows.append(tuple(_as_exact(v, f"{where}/{r}/{c}")
                              for c, v in enumerate(row)))
        matrices[int(key)] = tuple(rows)

    initial = None
    if "initial_distribution" in data:
        iblock = _need(data, "initial_distribution", dict, "")
        initial = {}
        for node, value in iblock.items():
            if node not in set(nodes):
                raise SchemaError(f"/initial_distribution/{node}", "unknown node")
            initial[node] = _as_exact(value, f"/initial_distribution/{node}")

    defaults = None
    if "defaults" in data:
        dblock = _need(data, "defaults", dict, "")
        defaults = {}
        for key, value in dblock.items():
            if key not in _DEFAULT_KEYS:
                raise SchemaError(f"/defaults/{key}",
                                  f"unknown key (allowed: {sorted(_DEFAULT_KEYS)})")
            if not isinstance(value, int) or isinstance(value, bool):
                raise SchemaError(f"/defaults/{key}", "must be an integer")
            defaults[key] = value

    return SystemDescription(version=version, alphabet=alphabet,
                             nodes=tuple(nodes), edges=tuple(edges),
                             matrices=matrices, initial_distribution=initial,
                             defaults=defaults)


def describe_system(system: SwitchedSystem, initial_distribution=None,
                    defaults=None) -> SystemDescription:
    """Description of an in-memory system (float entries, exact probs).

    ``initial_distribution`` may be a :class:`NodeDistribution` or a plain
    node-to-weight mapping.
    """
    g = system.graph
    edges = tuple((e.start, e.end, e.label, e.prob) for e in g.edges)
    matrices = {label: tuple(tuple(as_fraction(v) for v in row) for row in A)
                for label, A in system.matrices.items()}
    initial = None
    if initial_distribution is not None:
        pairs = (initial_distribution.items()
                 if isinstance(initial_distribution, dict)
                 else zip(g.nodes, initial_distribution.weights))
        initial = {node: as_fraction(w) for node, w in pairs}
    return SystemDescription(version=SCHEMA_VERSION, alphabet=g.alphabet_size,
                             nodes=g.nodes, edges=edges, matrices=matrices,
                             initial_distribution=initial, defaults=defaults)
