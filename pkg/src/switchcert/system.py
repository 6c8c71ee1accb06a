"""Switched linear systems: a stochastic graph paired with one matrix per label.

The state evolves as ``x_{t+1} = A[label_t] x_t`` where the label sequence is
drawn from the graph.  Matrix products follow the word convention of
:mod:`switchcert.graph`: for a word ``w`` the product ``matrix(w)`` applies
the first (oldest) symbol rightmost.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .errors import BadMatrix, MatrixLabelMismatch, NoConvergence, NotStronglyConnected
from .graph import LabelWord, NodeDistribution, StochasticGraph, is_strongly_connected

#: Build the explicit mean-square operator matrix when n^2 * |S| is at most this.
MS_EXPLICIT_LIMIT = 64


@dataclass(frozen=True)
class SwitchedSystem:
    """A stochastic graph together with one n-by-n real matrix per label."""

    graph: StochasticGraph
    matrices: dict

    def __post_init__(self):
        expected = set(range(1, self.graph.alphabet_size + 1))
        got = {int(k) for k in self.matrices}
        if got != expected:
            raise MatrixLabelMismatch(expected, got)
        mats = {}
        dim = None
        for k in sorted(got):
            A = np.array(self.matrices[k], dtype=float)
            if A.ndim != 2 or A.shape[0] != A.shape[1]:
                raise BadMatrix(f"matrix {k} has shape {A.shape}, expected square")
            if not np.all(np.isfinite(A)):
                raise BadMatrix(f"matrix {k} has non-finite entries")
            if dim is None:
                dim = A.shape[0]
            elif A.shape[0] != dim:
                raise BadMatrix(f"matrix {k} is {A.shape[0]}x{A.shape[0]}, others are {dim}x{dim}")
            A.flags.writeable = False
            mats[k] = A
        object.__setattr__(self, "matrices", mats)

    @property
    def dimension(self) -> int:
        return next(iter(self.matrices.values())).shape[0]

    @cached_property
    def edge_arrays(self):
        """Edge data in array form (starts, ends, labels as indices; probs as
        floats; stacked matrices), used by the optimizers and samplers."""
        g = self.graph
        idx = g.node_index
        starts = np.array([idx[e.start] for e in g.edges], dtype=np.intp)
        ends = np.array([idx[e.end] for e in g.edges], dtype=np.intp)
        labels = np.array([e.label for e in g.edges], dtype=np.intp)
        probs = np.array([float(e.prob) for e in g.edges])
        stacked = np.stack([self.matrices[e.label] for e in g.edges])
        for arr in (starts, ends, labels, probs, stacked):
            arr.flags.writeable = False
        return starts, ends, labels, probs, stacked


def word_product(system: SwitchedSystem, word: LabelWord) -> np.ndarray:
    """Product of system matrices along a word (oldest symbol rightmost)."""
    word.check_alphabet(system.graph.alphabet_size)
    out = np.eye(system.dimension)
    for sym in word.applied:
        out = system.matrices[sym] @ out
    return out


def averaged_matrix(system: SwitchedSystem, xi: NodeDistribution) -> np.ndarray:
    """Expectation of the one-step matrix under ``xi``:
    ``B = sum_i (sum_edges xi(start) p_edge) A_i``."""
    weights = {i: 0.0 for i in system.matrices}
    for e in system.graph.edges:
        weights[e.label] += xi.of(e.start) * float(e.prob)
    B = np.zeros((system.dimension, system.dimension))
    for i, w in weights.items():
        B += w * system.matrices[i]
    return B


def spectral_radius(matrix) -> float:
    """Largest eigenvalue modulus.

    Dimensions 1 and 2 use closed forms (exact up to rounding); larger
    matrices go through LAPACK's general eigenvalue solver.
    """
    A = np.asarray(matrix, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise BadMatrix(f"expected a square matrix, got shape {A.shape}")
    n = A.shape[0]
    if n == 1:
        return abs(A[0, 0])
    if n == 2:
        tr = A[0, 0] + A[1, 1]
        det = A[0, 0] * A[1, 1] - A[0, 1] * A[1, 0]
        disc = tr * tr / 4.0 - det
        if disc >= 0:
            root = np.sqrt(disc)
            return max(abs(tr / 2.0 + root), abs(tr / 2.0 - root))
        return float(np.sqrt(det))  # complex pair: |lambda|^2 = det
    try:
        return float(np.max(np.abs(np.linalg.eigvals(A))))
    except np.linalg.LinAlgError as exc:
        raise NoConvergence(f"eigenvalue computation failed: {exc}") from exc


def mean_square_matrix(system: SwitchedSystem) -> np.ndarray:
    """Explicit matrix of the mean-square operator.

    Acts on node-indexed matrices stacked as one vector (each n-by-n block
    flattened row-major, blocks in node order), so entry blocks satisfy
    ``out_a = sum_{edges a->b, label i} p * kron(A_i^T, A_i^T) @ q_b``.
    Size is ``n^2 |S|`` squared; callers should keep that small.
    """
    n = system.dimension
    S = len(system.graph.nodes)
    idx = system.graph.node_index
    big = np.zeros((n * n * S, n * n * S))
    for e in system.graph.edges:
        A = system.matrices[e.label]
        a, b = idx[e.start], idx[e.end]
        big[a * n * n:(a + 1) * n * n, b * n * n:(b + 1) * n * n] += \
            float(e.prob) * np.kron(A.T, A.T)
    return big


def _ms_apply(system: SwitchedSystem, Qs: dict) -> dict:
    """One application of the mean-square operator:
    ``T(Q)_a = sum_{edges a->b, label i} p * A_i^T Q_b A_i``."""
    n = system.dimension
    out = {a: np.zeros((n, n)) for a in system.graph.nodes}
    for e in system.graph.edges:
        A = system.matrices[e.label]
        out[e.start] += float(e.prob) * (A.T @ Qs[e.end] @ A)
    return out


def mean_square_operator_radius(system: SwitchedSystem, tol=1e-12, max_iter=100_000) -> float:
    """Square root of the spectral radius of the mean-square operator.

    A value below one certifies mean-square stability (the coupled Lyapunov
    inequalities are feasible); above one they are infeasible.  Small
    problems (``n^2 |S| <= 64``) build the operator matrix explicitly and use
    a dense eigenvalue solve; larger ones run matrix-free power iteration on
    node-indexed tuples of symmetric matrices, started from identities, with
    trace normalization.
    """
    if not is_strongly_connected(system.graph):
        raise NotStronglyConnected()
    n = system.dimension
    nodes = system.graph.nodes
    S = len(nodes)
    if n * n * S <= MS_EXPLICIT_LIMIT:
        big = mean_square_matrix(system)
        try:
            rho = float(np.max(np.abs(np.linalg.eigvals(big))))
        except np.linalg.LinAlgError as exc:
            raise NoConvergence(f"mean-square eigenvalue solve failed: {exc}") from exc
        return float(np.sqrt(rho))
    Qs = {a: np.eye(n) for a in nodes}
    lam_prev = None
    for _ in range(max_iter):
        nxt = _ms_apply(system, Qs)
        lam = sum(np.trace(nxt[a]) for a in nodes) / S
        if lam <= 0:
            return 0.0
        for a in nodes:
            nxt[a] /= lam
        if lam_prev is not None and abs(lam - lam_prev) <= tol * max(1.0, lam):
            return float(np.sqrt(lam))
        lam_prev, Qs = lam, nxt
    raise NoConvergence("mean-square power iteration did not converge")
