"""Exception types raised across the package.

Every error carries enough structure (node ids, edge keys, offending values)
for callers to render a useful message without string parsing.
"""


class SwitchcertError(Exception):
    """Base class for all errors raised by this package."""


class GraphValidationError(SwitchcertError):
    """Base class for structural problems in a stochastic graph."""


class RowSumViolation(GraphValidationError):
    """Outgoing edge probabilities of a node do not sum to one."""

    def __init__(self, node, total):
        self.node = node
        self.total = total
        super().__init__(f"outgoing probabilities of node {node!r} sum to {total}, expected 1")


class DuplicateEdge(GraphValidationError):
    """Two edges share the same (start, end, label) key."""

    def __init__(self, key):
        self.key = key
        super().__init__(f"duplicate edge {key!r}")


class BadLabel(GraphValidationError):
    """An edge or word uses a label outside 1..alphabet_size."""

    def __init__(self, label, alphabet_size, where=None):
        self.label = label
        self.alphabet_size = alphabet_size
        self.where = where
        at = f" at {where!r}" if where is not None else ""
        super().__init__(f"label {label!r}{at} outside alphabet 1..{alphabet_size}")


class NonPositiveProbability(GraphValidationError):
    """An edge carries probability <= 0 (zero-probability edges must be omitted)."""

    def __init__(self, key, prob):
        self.key = key
        self.prob = prob
        super().__init__(f"edge {key!r} has non-positive probability {prob}")


class UnknownNode(GraphValidationError):
    """An edge or distribution references a node id that is not declared."""

    def __init__(self, node):
        self.node = node
        super().__init__(f"unknown node {node!r}")


class NotStronglyConnected(SwitchcertError):
    """The graph is not strongly connected, so no unique invariant measure exists."""

    def __init__(self, detail=""):
        super().__init__("graph is not strongly connected" + (f": {detail}" if detail else ""))


class ExplosionLimit(SwitchcertError):
    """A lift or enumeration would exceed the configured size limit."""

    def __init__(self, requested, limit):
        self.requested = requested
        self.limit = limit
        super().__init__(f"enumeration of ~{requested} objects exceeds limit {limit}")


class NoConvergence(SwitchcertError):
    """An iterative numerical routine failed to converge within its budget."""


class BadMatrix(SwitchcertError):
    """A system matrix is non-square, non-finite, or otherwise unusable."""


class NegativeEntries(SwitchcertError):
    """Copositive machinery received a matrix or vector with entries of the wrong sign."""


class NotPositiveDefinite(SwitchcertError):
    """A quadratic template matrix is not symmetric positive definite."""


class MatrixLabelMismatch(SwitchcertError):
    """The matrices block does not provide exactly one matrix per alphabet label."""

    def __init__(self, expected, got):
        self.expected = expected
        self.got = got
        super().__init__(f"expected matrices for labels {sorted(expected)}, got {sorted(got)}")


class LiftMismatch(SwitchcertError):
    """A certificate's lift context cannot be reconstructed on the given system."""


class SchemaError(SwitchcertError):
    """A JSON document does not match the system-description schema."""

    def __init__(self, pointer, message):
        self.pointer = pointer
        self.message = message
        super().__init__(f"{pointer}: {message}")
