"""Certificate synthesis: optimize Lyapunov multi-function templates over
graph lifts and package the result as verifiable stability certificates.

Two template families are supported.  For entrywise nonnegative systems, a
per-node weight-vector template is optimized with a projected subgradient
method on a convex reformulation in log coordinates.  For general systems,
a per-node quadratic-norm template is optimized by compass pattern search
over Cholesky factors.  Both return the smallest decay factor found
together with the optimized template, and every returned value is
re-checked by the independent condition checker before being reported.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize as _simplex_minimize

from .errors import BadMatrix, LiftMismatch, NegativeEntries
from .graph import DEFAULT_ENUMERATION_LIMIT
from .lifts import path_lift, step_lift
from .system import MS_EXPLICIT_LIMIT, SwitchedSystem, mean_square_matrix
from .templates import (
    CopositiveTemplate,
    LmfReport,
    QuadraticTemplate,
    check_lmf,
    template_from_parameters,
)

__all__ = [
    "SubgradientOptions",
    "PatternSearchOptions",
    "Certificate",
    "BoundEntry",
    "BoundReport",
    "copositive_bound",
    "quadratic_bound",
    "hierarchical_bound",
    "verify_certificate",
]


@dataclass(frozen=True)
class SubgradientOptions:
    """Budget for the weight-vector optimizer.

    All restarts run as one batched iteration in log coordinates; the step
    at iteration t is ``step_scale / sqrt(t)``.  A deterministic compass
    polish tightens the best restart afterwards.
    """

    restarts: int = 20
    iterations: int = 20_000
    step_scale: float = 0.5
    seed: int = 1729


@dataclass(frozen=True)
class PatternSearchOptions:
    """Budget for the quadratic-template optimizer.

    Each restart searches over per-node Cholesky parameters (log-diagonal
    plus strict lower triangle): a compass pattern-search warm-up followed
    by up to ``polish_rounds`` downhill-simplex polishes with a fresh
    simplex each round (the objective is a max of smooth pieces, and the
    simplex handles its ridges far better than axis moves).  On top of
    ``restarts`` random starts (normal with standard deviation ``spread``),
    an identity start and a mean-square Perron warm start are added when
    ``warm_starts`` is set.
    """

    restarts: int = 20
    sweeps: int = 60
    polish_rounds: int = 3
    polish_budget: int = 400
    initial_step: float = 0.5
    min_step: float = 1e-4
    spread: float = 0.8
    seed: int = 1729
    warm_starts: bool = True


# --------------------------------------------------------------------------
# weight-vector template (nonnegative systems)


def _copositive_objective(u, system):
    """Convex objective in log coordinates, batched over restarts.

    ``u`` has shape (R, S, n): per restart, per node, the log of the weight
    vector.  Returns ``(g, scores, parts)`` where ``g[r]`` is the worst
    per-node score, ``scores[r, s]`` the per-node sums, and ``parts`` the
    intermediate arrays needed to assemble a subgradient.
    """
    starts, ends, _, probs, mats = system.edge_arrays
    m = u.max(axis=2)
    V = np.exp(u - m[:, :, None])
    Vs = V[:, starts, :]
    Av = np.einsum("ejk,rek->rej", mats, Vs)
    with np.errstate(divide="ignore"):
        log_av = m[:, starts, None] + np.log(Av)
    terms = log_av - u[:, ends, :]
    jstar = terms.argmax(axis=2)
    best = np.take_along_axis(terms, jstar[:, :, None], axis=2)[:, :, 0]
    S = len(system.graph.nodes)
    onehot = np.zeros((starts.size, S))
    onehot[np.arange(starts.size), starts] = 1.0
    scores = (probs * best) @ onehot
    g = scores.max(axis=1)
    return g, scores, (starts, ends, probs, mats, Vs, Av, jstar, onehot)


def _copositive_subgradient(u, scores, parts):
    starts, ends, probs, mats, Vs, Av, jstar, onehot = parts
    R = u.shape[0]
    astar = scores.argmax(axis=1)          # ties: argmax picks lowest index
    active = onehot[:, astar].T            # (R, E) edges leaving each worst node
    coef = active * probs[None, :]
    rows = mats[np.arange(starts.size)[None, :], jstar, :]   # (R, E, n)
    den = np.take_along_axis(Av, jstar[:, :, None], axis=2)[:, :, 0]
    weights = rows * Vs / np.maximum(den, 1e-300)[:, :, None]
    grad = np.einsum("re,rek,es->rsk", coef, weights, onehot)
    np.subtract.at(grad, (np.arange(R)[:, None], ends[None, :], jstar), coef)
    return grad


def _compass_polish(fun, x, initial=1e-2, floor=1e-9, budget=200):
    """Greedy coordinate descent used to tighten an optimizer result.

    Only ever accepts strict improvements, so the returned point is never
    worse than the input.
    """
    x = np.array(x, dtype=float)
    best = fun(x)
    step = initial
    sweeps = 0
    while step >= floor and sweeps < budget:
        improved = False
        for i in range(x.size):
            for delta in (step, -step):
                trial = x.copy()
                trial.flat[i] += delta
                val = fun(trial)
                if val < best:
                    best, x, improved = val, trial, True
        if not improved:
            step *= 0.5
        sweeps += 1
    return x, best


def copositive_bound(system: SwitchedSystem,
                     options: SubgradientOptions | None = None):
    """Smallest decay factor for a per-node weight-vector template.

    The template condition is checked exactly at the weight vectors, which
    is sufficient for entrywise nonnegative systems because the condition
    there is tight at those points.  Raises ``NegativeEntries`` when a
    system matrix has a negative entry and ``BadMatrix`` when one is
    identically zero (the template value would be identically zero too).

    Returns ``(rho, template, report)`` with ``report`` the independent
    condition check at the returned ``rho``.
    """
    opts = options or SubgradientOptions()
    for k in sorted(system.matrices):
        A = system.matrices[k]
        if np.any(A < 0):
            raise NegativeEntries(f"matrix {k} has negative entries; "
                                  "use the quadratic template instead")
        if not np.any(A > 0):
            raise BadMatrix(f"matrix {k} is identically zero")
    nodes = system.graph.nodes
    S, n = len(nodes), system.dimension
    R = max(1, opts.restarts)
    rng = np.random.default_rng(np.random.SeedSequence(opts.seed))
    u = rng.normal(size=(R, S, n))
    u[0] = 0.0                              # always include the flat start
    best_g = np.full(R, np.inf)
    best_u = u.copy()
    for t in range(1, max(1, opts.iterations) + 1):
        g, scores, parts = _copositive_objective(u, system)
        better = g < best_g
        best_g[better] = g[better]
        best_u[better] = u[better]
        grad = _copositive_subgradient(u, scores, parts)
        u -= (opts.step_scale / math.sqrt(t)) * grad
        u -= u.mean(axis=(1, 2), keepdims=True)
    g, _, _ = _copositive_objective(u, system)
    better = g < best_g
    best_g[better] = g[better]
    best_u[better] = u[better]
    winner = int(np.argmin(best_g))         # ties: lowest restart index

    def flat_objective(vec):
        val, _, _ = _copositive_objective(vec.reshape(1, S, n), system)
        return float(val[0])

    polished, _ = _compass_polish(flat_objective, best_u[winner].ravel())
    vectors = {node: np.exp(polished.reshape(S, n)[i]) for i, node in enumerate(nodes)}
    template = CopositiveTemplate(vectors)
    report = check_lmf(system, template, 1.0)
    rho = math.exp(report.node_scores[report.worst_node])
    report = check_lmf(system, template, rho)
    return rho, template, report


# --------------------------------------------------------------------------
# quadratic template (general systems)


def _chol_from_theta(theta, n):
    L = np.zeros((n, n))
    L[np.diag_indices(n)] = np.exp(np.clip(theta[:n], -300, 300))
    L[np.tril_indices(n, -1)] = theta[n:]
    return L


def _theta_from_chol(L):
    n = L.shape[0]
    return np.concatenate([np.log(np.diag(L)), L[np.tril_indices(n, -1)]])


def _sigma_max(M):
    if M.shape[0] == 2:
        f = M[0, 0] ** 2 + M[0, 1] ** 2 + M[1, 0] ** 2 + M[1, 1] ** 2
        d = M[0, 0] * M[1, 1] - M[0, 1] * M[1, 0]
        disc = max(f * f - 4.0 * d * d, 0.0)
        return math.sqrt(max(0.5 * (f + math.sqrt(disc)), 0.0))
    return float(np.linalg.norm(M, 2))


_LOG_FLOOR = math.log(1e-300)


def _quad_objective(theta, system):
    """Worst per-node sum of log induced norms for one parameter vector."""
    starts, ends, _, probs, mats = system.edge_arrays
    nodes = system.graph.nodes
    n = system.dimension
    d = n + n * (n - 1) // 2
    Ls = [_chol_from_theta(theta[i * d:(i + 1) * d], n) for i in range(len(nodes))]
    inv_ts = []
    for L in Ls:
        if n == 2:
            a, c, b = L[0, 0], L[1, 0], L[1, 1]
            inv_ts.append(np.array([[1.0 / a, -c / (a * b)], [0.0, 1.0 / b]]))
        else:
            inv_ts.append(np.linalg.inv(L).T)
    scores = np.zeros(len(nodes))
    for e in range(starts.size):
        sigma = _sigma_max(Ls[ends[e]].T @ mats[e] @ inv_ts[starts[e]])
        scores[starts[e]] += probs[e] * (math.log(sigma) if sigma > 0 else _LOG_FLOOR)
    return float(scores.max())


def _quad_objective_factory(system):
    """Objective evaluator specialized to the system.

    For two-dimensional systems everything is expanded to scalar
    arithmetic (closed-form largest singular value included); the local
    searches call the objective often enough for array overhead to
    dominate otherwise.  Larger dimensions fall back to the array path.
    """
    if system.dimension != 2:
        return lambda th: _quad_objective(th, system)
    starts, ends, _, probs, mats = system.edge_arrays
    S = len(system.graph.nodes)
    edge_data = [(int(starts[e]), int(ends[e]), float(probs[e]),
                  float(mats[e, 0, 0]), float(mats[e, 0, 1]),
                  float(mats[e, 1, 0]), float(mats[e, 1, 1]))
                 for e in range(starts.size)]

    def fun(theta):
        t = theta.tolist() if hasattr(theta, "tolist") else list(theta)
        ps = [math.exp(min(max(t[3 * i], -300.0), 300.0)) for i in range(S)]
        rs = [math.exp(min(max(t[3 * i + 1], -300.0), 300.0)) for i in range(S)]
        qs = [t[3 * i + 2] for i in range(S)]
        scores = [0.0] * S
        for a, b, p, a00, a01, a10, a11 in edge_data:
            pb, rb, qb = ps[b], rs[b], qs[b]
            x0 = pb * a00 + qb * a10
            x1 = pb * a01 + qb * a11
            y0 = rb * a10
            y1 = rb * a11
            s = 1.0 / ps[a]
            w = 1.0 / rs[a]
            u = -qs[a] * s * w
            m00 = x0 * s
            m01 = x0 * u + x1 * w
            m10 = y0 * s
            m11 = y0 * u + y1 * w
            f = m00 * m00 + m01 * m01 + m10 * m10 + m11 * m11
            dd = m00 * m11 - m01 * m10
            disc = f * f - 4.0 * dd * dd
            sig2 = 0.5 * (f + math.sqrt(disc if disc > 0.0 else 0.0))
            scores[a] += p * (0.5 * math.log(sig2) if sig2 > 0.0 else _LOG_FLOOR)
        return max(scores)

    return fun


def _pattern_search(fun, x0, opts: PatternSearchOptions):
    x = np.array(x0, dtype=float)
    best = fun(x)
    step = opts.initial_step
    for _ in range(opts.sweeps):
        if step < opts.min_step:
            break
        improved = False
        for i in range(x.size):
            for delta in (step, -step):
                trial = x.copy()
                trial[i] += delta
                val = fun(trial)
                if val < best:
                    best, x, improved = val, trial, True
        if not improved:
            step *= 0.5
    return x, best


def _local_minimize(fun, x0, opts: PatternSearchOptions):
    """Compass warm-up, then repeated simplex polish until it stops paying."""
    x, best = _pattern_search(fun, x0, opts)
    for _ in range(max(0, opts.polish_rounds)):
        res = _simplex_minimize(fun, x, method="Nelder-Mead",
                                options={"maxiter": opts.polish_budget * x.size,
                                         "xatol": 1e-11, "fatol": 1e-13})
        if res.fun < best - 1e-14:
            x, best = np.asarray(res.x, dtype=float), float(res.fun)
        else:
            break
    return x, best


def _perron_warm_start(system):
    """Cholesky parameters from the mean-square operator's leading
    eigenvector, projected to positive definite blocks.  Returns ``None``
    when the operator matrix would be too large or the extraction fails."""
    n = system.dimension
    nodes = system.graph.nodes
    if n * n * len(nodes) > MS_EXPLICIT_LIMIT:
        return None
    try:
        big = mean_square_matrix(system)
        vals, vecs = np.linalg.eig(big)
        lead = np.real(vecs[:, int(np.argmax(np.abs(vals)))])
        if sum(lead[i * n * n + j * (n + 1)] for i in range(len(nodes))
               for j in range(n)) < 0:
            lead = -lead
        thetas = []
        for i in range(len(nodes)):
            Q = lead[i * n * n:(i + 1) * n * n].reshape(n, n)
            Q = 0.5 * (Q + Q.T)
            w, U = np.linalg.eigh(Q)
            floor = max(1e-8, 1e-6 * float(np.max(np.abs(w), initial=0.0)))
            Q = (U * np.maximum(w, floor)) @ U.T
            thetas.append(_theta_from_chol(np.linalg.cholesky(Q)))
        return np.concatenate(thetas)
    except np.linalg.LinAlgError:
        return None


def quadratic_bound(system: SwitchedSystem,
                    options: PatternSearchOptions | None = None):
    """Smallest decay factor for a per-node quadratic-norm template.

    Works for arbitrary real matrices.  The optimized condition replaces
    the pointwise product inequality by its induced-norm surrogate, which
    is sufficient but can be conservative.  Returns ``(rho, template,
    report)``; the report includes a pointwise sampling backstop.
    """
    from .util import parallel_map

    opts = options or PatternSearchOptions()
    nodes = system.graph.nodes
    n = system.dimension
    d = n + n * (n - 1) // 2
    dim = d * len(nodes)
    rng = np.random.default_rng(np.random.SeedSequence(opts.seed))
    starts_list = [rng.normal(scale=opts.spread, size=dim)
                   for _ in range(max(1, opts.restarts))]
    if opts.warm_starts:
        starts_list.append(np.zeros(dim))
        warm = _perron_warm_start(system)
        if warm is not None:
            starts_list.append(warm)

    objective = _quad_objective_factory(system)

    def solve(x0):
        return _local_minimize(objective, x0, opts)

    results = parallel_map(solve, starts_list)
    winner = min(range(len(results)), key=lambda i: (results[i][1], i))
    theta = np.array(results[winner][0], dtype=float).reshape(len(nodes), d)
    # Recenter the global scale (the objective is invariant under it) and
    # clamp to a range whose Gram matrices stay Cholesky-factorable in
    # float; only near-singular optima (e.g. nilpotent systems) are
    # affected, and the certified value is recomputed from the clamped
    # template below.
    center = float(theta[:, :n].mean())
    theta[:, :n] -= center
    theta[:, n:] *= math.exp(-center)
    np.clip(theta[:, :n], -8.0, 8.0, out=theta[:, :n])
    np.clip(theta[:, n:], -3000.0, 3000.0, out=theta[:, n:])
    matrices = {}
    for i, node in enumerate(nodes):
        L = _chol_from_theta(theta[i], n)
        matrices[node] = L @ L.T
    template = QuadraticTemplate(matrices)
    report = check_lmf(system, template, 1.0)
    rho = math.exp(report.node_scores[report.worst_node])
    report = check_lmf(system, template, rho)
    return rho, template, report


# --------------------------------------------------------------------------
# certificates


@dataclass(frozen=True)
class Certificate:
    """Self-contained, re-checkable stability certificate.

    Stores the template parameters at full precision together with the
    lift on which the condition was verified, so that an independent
    process can rebuild the lifted system and re-run the check.
    ``rho`` is the certified decay factor on that lift; for a step lift of
    length K the per-original-step factor is ``rho ** (1/K)``.
    """

    template_kind: str
    parameters: dict
    rho: float
    margin: float
    lift_kind: str
    lift_param: int
    optimizer: dict = field(default_factory=dict)
    status: str = "certified"

    def to_dict(self) -> dict:
        return {
            "template_kind": self.template_kind,
            "parameters": self.parameters,
            "rho": self.rho,
            "margin": self.margin,
            "lift": {"kind": self.lift_kind, "parameter": self.lift_param},
            "optimizer": dict(self.optimizer),
            "status": self.status,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2)

    @classmethod
    def from_dict(cls, data: dict) -> "Certificate":
        lift = data.get("lift", {})
        return cls(
            template_kind=data["template_kind"],
            parameters=data["parameters"],
            rho=float(data["rho"]),
            margin=float(data["margin"]),
            lift_kind=lift.get("kind", "step"),
            lift_param=int(lift.get("parameter", 1)),
            optimizer=dict(data.get("optimizer", {})),
            status=data.get("status", "certified"),
        )

    @classmethod
    def from_json(cls, text: str) -> "Certificate":
        return cls.from_dict(json.loads(text))


def _lifted_system(system: SwitchedSystem, kind: str, param: int,
                   limit=DEFAULT_ENUMERATION_LIMIT) -> SwitchedSystem:
    if kind == "step":
        return step_lift(system, param, limit=limit).system
    if kind == "path":
        return path_lift(system, param, limit=limit).system
    raise LiftMismatch(f"unknown lift kind {kind!r}")


def verify_certificate(system: SwitchedSystem, certificate: Certificate,
                       tol: float = 1e-9, samples: int = 10_000,
                       seed: int = 0):
    """Re-check a certificate against a system from scratch.

    Rebuilds the lift named in the certificate, reconstructs the template
    from its stored parameters, and re-runs the condition check.  Returns
    ``(holds, margin)`` where ``margin`` is the log-scale slack at the
    certificate's ``rho`` (negative means the condition fails).
    """
    lifted = _lifted_system(system, certificate.lift_kind, certificate.lift_param)
    template = template_from_parameters(certificate.template_kind,
                                        certificate.parameters)
    report = check_lmf(lifted, template, certificate.rho,
                       samples=samples, seed=seed)
    ok = report.margin >= -tol
    if report.pointwise_max is not None:
        ok = ok and report.pointwise_max <= 1.0 + max(tol, 1e-9)
    return ok, report.margin


@dataclass(frozen=True)
class BoundEntry:
    """One lift/template combination with its certified factors.

    ``raw_rho`` is the factor on the lifted system; ``adjusted_rho`` is
    normalized to one step of the original system (the K-th root for a
    step lift of length K, unchanged for path lifts).
    """

    lift_kind: str
    lift_param: int
    template_kind: str
    raw_rho: float
    adjusted_rho: float
    certificate: Certificate

    def to_dict(self) -> dict:
        return {
            "lift_kind": self.lift_kind,
            "lift_param": self.lift_param,
            "template_kind": self.template_kind,
            "raw_rho": self.raw_rho,
            "adjusted_rho": self.adjusted_rho,
            "certificate": self.certificate.to_dict(),
        }


@dataclass(frozen=True)
class BoundReport:
    """Results of a sweep over lifts, ordered as requested by the caller."""

    entries: tuple
    best_bound: float
    best_index: int
    verdict: str

    @property
    def best(self) -> BoundEntry:
        return self.entries[self.best_index]

    def to_dict(self) -> dict:
        return {
            "entries": [e.to_dict() for e in self.entries],
            "best_bound": self.best_bound,
            "best_index": self.best_index,
            "verdict": self.verdict,
        }


def hierarchical_bound(system: SwitchedSystem, template: str = "copositive",
                       steps=(1,), paths=(),
                       subgradient: SubgradientOptions | None = None,
                       pattern: PatternSearchOptions | None = None,
                       limit=DEFAULT_ENUMERATION_LIMIT) -> BoundReport:
    """Certified decay bounds across a family of lifts.

    Runs the chosen template optimizer on the step lifts of each length in
    ``steps`` and the path lifts of each degree in ``paths``.  Adjusted
    bounds are directly comparable across lifts; the sweep's best bound
    below one yields the verdict ``"certified-stable"``, otherwise
    ``"inconclusive"``.
    """
    if template not in ("copositive", "quadratic"):
        raise ValueError(f"unknown template kind {template!r}")
    entries = []
    jobs = [("step", int(k)) for k in steps] + [("path", int(r)) for r in paths]
    if not jobs:
        raise ValueError("no lifts requested")
    for kind, param in jobs:
        if kind == "step" and param < 1:
            raise ValueError("step lift length must be at least 1")
        if kind == "path" and param < 0:
            raise ValueError("path lift degree must be nonnegative")
        lifted = _lifted_system(system, kind, param, limit=limit)
        if template == "copositive":
            opts = subgradient or SubgradientOptions()
            rho, tpl, report = copositive_bound(lifted, opts)
            meta = {"seed": opts.seed, "restarts": opts.restarts,
                    "iterations": opts.iterations}
        else:
            opts = pattern or PatternSearchOptions()
            rho, tpl, report = quadratic_bound(lifted, opts)
            meta = {"seed": opts.seed, "restarts": opts.restarts,
                    "sweeps": opts.sweeps}
        adjusted = rho ** (1.0 / param) if kind == "step" else rho
        cert = Certificate(
            template_kind=tpl.kind,
            parameters=tpl.parameters(),
            rho=rho,
            margin=report.margin,
            lift_kind=kind,
            lift_param=param,
            optimizer=meta,
            status="degenerate" if report.degenerate else "certified",
        )
        entries.append(BoundEntry(kind, param, tpl.kind, rho, adjusted, cert))
    best_index = min(range(len(entries)),
                     key=lambda i: (entries[i].adjusted_rho, i))
    best_bound = entries[best_index].adjusted_rho
    verdict = "certified-stable" if best_bound < 1.0 else "inconclusive"
    return BoundReport(tuple(entries), best_bound, best_index, verdict)
