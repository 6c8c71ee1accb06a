"""Lyapunov multi-function templates and the certificate condition check.

A template assigns one candidate function ``f_a`` to every graph node.  A pair
(template, rho) certifies decay if for every node ``a``

    prod over edges (a -> b, label i) of f_b(A_i x)^{p_edge}  <=  rho * f_a(x)

for all admissible x.  Two families are implemented:

* :class:`CopositiveTemplate` — ``f_a(x) = max_j x_j / v_{a,j}`` with positive
  weight vectors, for systems with entrywise nonnegative matrices.  The check
  is exact: the worst x is the weight vector itself.
* :class:`QuadraticTemplate` — ``f_a(x) = sqrt(x^T Q_a x)`` with positive
  definite matrices.  The check uses the sufficient product-of-induced-norms
  condition ``prod ||A_i||_{Q_a -> Q_b}^{p} <= rho`` (an upper approximation
  of the pointwise condition), plus a random pointwise sampling backstop.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import LiftMismatch, NegativeEntries, NotPositiveDefinite
from .graph import StochasticGraph
from .system import SwitchedSystem

#: Logs of vanishing template values are clamped here instead of -inf.
LOG_CLAMP = math.log(1e-300)


def _first_node(keys):
    return min(keys)


@dataclass(frozen=True)
class CopositiveTemplate:
    """One positive weight vector per node; ``f_a(x) = max_j x_j / v_{a,j}``.

    Vectors are normalized at construction so the first component of the
    (lexicographically) first node's vector equals one; the condition is
    invariant under that global rescaling.
    """

    vectors: dict

    def __post_init__(self):
        vecs = {}
        for node, v in self.vectors.items():
            arr = np.array(v, dtype=float).reshape(-1)
            if not np.all(np.isfinite(arr)) or np.any(arr <= 0):
                raise NegativeEntries(f"template vector for node {node!r} must be strictly positive")
            vecs[node] = arr
        scale = vecs[_first_node(vecs)][0]
        for node in vecs:
            arr = vecs[node] / scale
            arr.flags.writeable = False
            vecs[node] = arr
        object.__setattr__(self, "vectors", vecs)

    def value(self, node, x) -> float:
        return float(np.max(np.asarray(x, dtype=float) / self.vectors[node]))

    @property
    def kind(self):
        return "copositive"

    def parameters(self):
        return {node: [float(t) for t in v] for node, v in self.vectors.items()}


@dataclass(frozen=True)
class QuadraticTemplate:
    """One symmetric positive definite matrix per node;
    ``f_a(x) = sqrt(x^T Q_a x)``.

    Matrices are normalized at construction so the first node's matrix has
    trace n; Cholesky factors are precomputed and failure raises
    :class:`NotPositiveDefinite`.
    """

    forms: dict

    def __post_init__(self):
        mats = {}
        for node, Q in self.forms.items():
            arr = np.array(Q, dtype=float)
            if arr.ndim != 2 or arr.shape[0] != arr.shape[1] or not np.all(np.isfinite(arr)):
                raise NotPositiveDefinite(f"form for node {node!r} is not a finite square matrix")
            if np.max(np.abs(arr - arr.T)) > 1e-9 * max(1.0, np.max(np.abs(arr))):
                raise NotPositiveDefinite(f"form for node {node!r} is not symmetric")
            mats[node] = (arr + arr.T) / 2.0
        n = mats[_first_node(mats)].shape[0]
        scale = np.trace(mats[_first_node(mats)]) / n
        if scale <= 0:
            raise NotPositiveDefinite("first form has non-positive trace")
        chols = {}
        for node in mats:
            arr = mats[node] / scale
            try:
                L = np.linalg.cholesky(arr)
            except np.linalg.LinAlgError as exc:
                raise NotPositiveDefinite(f"form for node {node!r} is not positive definite") from exc
            arr.flags.writeable = False
            L.flags.writeable = False
            mats[node] = arr
            chols[node] = L
        object.__setattr__(self, "forms", mats)
        object.__setattr__(self, "_chol", chols)

    def cholesky(self, node) -> np.ndarray:
        return self._chol[node]

    def value(self, node, x) -> float:
        y = self._chol[node].T @ np.asarray(x, dtype=float)
        return float(np.linalg.norm(y))

    @property
    def kind(self):
        return "quadratic"

    def parameters(self):
        return {node: [[float(t) for t in row] for row in Q] for node, Q in self.forms.items()}


def induced_norm(A, L_from, L_to) -> float:
    """Operator norm of A mapping the metric of ``L_from`` into ``L_to``:
    ``sigma_max(L_to^T A L_from^{-T})`` where L are Cholesky factors."""
    X = np.linalg.solve(L_from, (L_to.T @ A).T).T  # = L_to^T A L_from^{-T}
    return float(np.linalg.norm(X, 2))


def template_from_parameters(kind, parameters):
    """Rebuild a template from its JSON parameter mapping."""
    if kind == "copositive":
        return CopositiveTemplate(dict(parameters))
    if kind == "quadratic":
        return QuadraticTemplate(dict(parameters))
    raise ValueError(f"unknown template kind {kind!r}")


@dataclass(frozen=True)
class LmfReport:
    """Outcome of checking a (template, rho) pair on a system.

    ``margin = log(rho) - max_a score_a``; nonnegative means the certificate
    holds.  ``node_scores`` maps each node to its aggregated log decay factor.
    For quadratic templates ``pointwise_max`` records the largest sampled
    ratio LHS / (rho * f_a(x)) from the statistical backstop (at most ~1 when
    the certificate holds).
    """

    rho: float
    margin: float
    node_scores: dict
    worst_node: str
    degenerate: bool
    kind: str
    pointwise_samples: int = 0
    pointwise_max: float = None

    @property
    def holds(self) -> bool:
        return self.margin >= -1e-9


def node_decay_ratio(system: SwitchedSystem, template, node, x) -> float:
    """Pointwise certificate ratio at x for one node:
    ``prod f_b(A_i x)^p / f_a(x)``; the certificate requires this <= rho."""
    fx = template.value(node, x)
    if fx <= 0:
        return 0.0
    log_lhs = 0.0
    for e in system.graph.out_edges[node]:
        val = template.value(e.end, system.matrices[e.label] @ np.asarray(x, dtype=float))
        log_lhs += float(e.prob) * (math.log(val) if val > 0 else LOG_CLAMP)
    return math.exp(log_lhs) / fx


def _copositive_scores(system, template):
    scores = {}
    degenerate = False
    for a in system.graph.nodes:
        va = template.vectors[a]
        total = 0.0
        for e in system.graph.out_edges[a]:
            y = system.matrices[e.label] @ va
            val = float(np.max(y / template.vectors[e.end]))
            if val <= 0:
                degenerate = True
                total += float(e.prob) * LOG_CLAMP
            else:
                total += float(e.prob) * math.log(val)
        scores[a] = total
    return scores, degenerate


def _quadratic_scores(system, template):
    scores = {}
    degenerate = False
    for a in system.graph.nodes:
        La = template.cholesky(a)
        total = 0.0
        for e in system.graph.out_edges[a]:
            nrm = induced_norm(system.matrices[e.label], La, template.cholesky(e.end))
            if nrm <= 0:
                degenerate = True
                total += float(e.prob) * LOG_CLAMP
            else:
                total += float(e.prob) * math.log(nrm)
        scores[a] = total
    return scores, degenerate


def check_lmf(system: SwitchedSystem, template, rho: float,
              samples: int = 10_000, seed: int = 0) -> LmfReport:
    """Check whether (template, rho) certifies the decay condition.

    Copositive templates are checked exactly (matrices must be entrywise
    nonnegative; the worst case of the pointwise condition is attained at the
    template vectors).  Quadratic templates are checked via the sufficient
    product-of-induced-norms condition and, additionally, ``samples`` random
    unit vectors per node as a statistical backstop on the pointwise
    condition itself.
    """
    template_nodes = set(template.parameters())
    if template_nodes != set(system.graph.nodes):
        raise LiftMismatch(
            f"template covers nodes {sorted(template_nodes)}, system has {sorted(system.graph.nodes)}")
    if template.kind == "copositive":
        for i, A in system.matrices.items():
            if np.any(A < 0):
                raise NegativeEntries(f"matrix {i} has negative entries; copositive templates need A >= 0")
        scores, degenerate = _copositive_scores(system, template)
        pointwise_max = None
        samples_used = 0
    else:
        scores, degenerate = _quadratic_scores(system, template)
        samples_used = samples
        pointwise_max = 0.0
        if samples > 0:
            rng = np.random.default_rng(seed)
            n = system.dimension
            for a in system.graph.nodes:
                X = rng.normal(size=(samples, n))
                X /= np.linalg.norm(X, axis=1, keepdims=True)
                # vectorized pointwise ratio over the sample block
                log_lhs = np.zeros(samples)
                for e in system.graph.out_edges[a]:
                    Y = X @ system.matrices[e.label].T @ template.cholesky(e.end)
                    vals = np.linalg.norm(Y, axis=1)
                    log_lhs += float(e.prob) * np.log(np.maximum(vals, 1e-300))
                fa = np.linalg.norm(X @ template.cholesky(a), axis=1)
                ratios = np.exp(log_lhs) / (rho * np.maximum(fa, 1e-300))
                pointwise_max = max(pointwise_max, float(ratios.max()))
    worst = max(sorted(scores), key=lambda nd: scores[nd])  # ties: first node id wins
    margin = math.log(rho) - scores[worst]
    return LmfReport(rho=float(rho), margin=float(margin), node_scores=scores,
                     worst_node=worst, degenerate=degenerate, kind=template.kind,
                     pointwise_samples=samples_used, pointwise_max=pointwise_max)
