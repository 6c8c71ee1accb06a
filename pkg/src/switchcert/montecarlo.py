"""Sampling-based estimation of the top Lyapunov exponent.

Serves as an independent statistical check on certified bounds: the exponent
``lambda_0`` estimated here satisfies ``exp(lambda_0) <= rho`` for any valid
certificate value ``rho``, up to sampling error.

Randomness contract
-------------------
All sampling uses numpy's PCG64 generator.  A run with master seed ``s``
derives the generator for trial ``t`` as ``default_rng(SeedSequence(s).spawn(N)[t])``
(numpy's documented stream-splitting), so results are reproducible and
independent of trial execution order.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ExplosionLimit, NotStronglyConnected, UnknownNode
from .util import parallel_map
from .graph import (
    LabelWord,
    NodeDistribution,
    StochasticGraph,
    all_words,
    cylinder_measure,
    is_strongly_connected,
)
from .system import SwitchedSystem

#: Logs of vanishing norms are clamped here instead of -inf.
LOG_CLAMP = math.log(1e-300)


@dataclass(frozen=True)
class SampledPath:
    """One realized switching path: visited nodes and the applied word."""

    nodes: tuple[str, ...]
    word: LabelWord
    log_prob: float
    seed: int


def _draw_start(graph, xi, rng):
    u = rng.random()
    acc = 0.0
    node = graph.nodes[-1]
    for n, w in zip(graph.nodes, xi.weights):
        acc += w
        if u < acc:
            node = n
            break
    return node


def _draw_edge(graph, node, rng):
    """Inverse-CDF draw over the outgoing edges (ordered by label, end)."""
    u = rng.random()
    edges = graph.out_edges[node]
    acc = 0.0
    chosen = edges[-1]
    for e in edges:
        acc += float(e.prob)
        if u < acc:
            chosen = e
            break
    return chosen


def sample_path(graph: StochasticGraph, xi: NodeDistribution, T: int, seed: int) -> SampledPath:
    """Sample a length-T switching path.  Deterministic given the seed."""
    if xi.graph != graph:
        raise UnknownNode("distribution is not over this graph")
    rng = np.random.default_rng(np.random.SeedSequence(seed))
    node = _draw_start(graph, xi, rng)
    nodes = [node]
    labels = []
    log_prob = math.log(xi.of(node)) if xi.of(node) > 0 else LOG_CLAMP
    for _ in range(T):
        e = _draw_edge(graph, node, rng)
        labels.append(e.label)
        log_prob += math.log(float(e.prob))
        node = e.end
        nodes.append(node)
    return SampledPath(tuple(nodes), LabelWord.from_applied(labels), log_prob, seed)


@dataclass(frozen=True)
class ExponentEstimate:
    """Monte Carlo estimate of the top Lyapunov exponent.

    ``half_width`` is the 95% confidence half-width ``1.96 * sd / sqrt(N)``;
    ``radius`` is ``exp(mean)``, the implied growth rate per step.
    ``degenerate`` is set when any trial hit an exactly-vanishing product and
    its log was clamped.
    """

    mean: float
    sd: float
    half_width: float
    trials: int
    horizon: int
    seed: int
    radius: float
    degenerate: bool
    trajectories: tuple = field(default=(), repr=False)

    @property
    def interval(self):
        return (self.mean - self.half_width, self.mean + self.half_width)

    def to_dict(self):
        return {
            "mean": self.mean,
            "sd": self.sd,
            "half_width": self.half_width,
            "trials": self.trials,
            "horizon": self.horizon,
            "seed": self.seed,
            "radius": self.radius,
            "degenerate": self.degenerate,
        }


def _one_trial(system, xi, T, rng, record=0):
    """Propagate one product of length T with per-step Frobenius
    renormalization; returns (lambda_estimate, degenerate, trajectory)."""
    g = system.graph
    node = _draw_start(g, xi, rng)
    Y = np.eye(system.dimension)
    acc = 0.0
    degenerate = False
    traj = []
    stride = max(1, T // record) if record else 0
    us = rng.random(T)
    for t in range(T):
        u = us[t]
        edges = g.out_edges[node]
        cum = 0.0
        e = edges[-1]
        for cand in edges:
            cum += float(cand.prob)
            if u < cum:
                e = cand
                break
        Y = system.matrices[e.label] @ Y
        node = e.end
        nrm = float(np.linalg.norm(Y))
        if nrm <= 1e-300:
            degenerate = True
            acc += LOG_CLAMP
            Y = np.eye(system.dimension)
        else:
            acc += math.log(nrm)
            Y = Y / nrm
        if record and ((t + 1) % stride == 0 or t == T - 1):
            traj.append(((t + 1), acc / (t + 1)))
    lam = (acc + math.log(max(float(np.linalg.norm(Y, 2)), 1e-300))) / T
    return lam, degenerate, tuple(traj)


def estimate_lyapunov_exponent(system: SwitchedSystem, xi: NodeDistribution,
                               T: int, N: int, seed: int,
                               keep_trajectories: int = 0) -> ExponentEstimate:
    """Estimate ``lambda_0 = lim (1/T) E log ||A(word)||`` from N independent
    trials of horizon T.

    Each trial propagates the full matrix product with per-step Frobenius
    renormalization (accumulating logs) and finishes with the operator 2-norm
    of the normalized remainder.  Trial results are aggregated with exact
    (compensated) summation, so the reported mean does not depend on trial
    order.  ``keep_trajectories`` retains running-average curves for the
    first few trials (used by the plotting layer).
    """
    if T < 10:
        raise ValueError("horizon T must be >= 10")
    if N < 2:
        raise ValueError("need at least 2 trials")
    if not is_strongly_connected(system.graph):
        raise NotStronglyConnected()
    children = np.random.SeedSequence(seed).spawn(N)

    def run(t):
        rng = np.random.default_rng(children[t])
        record = 200 if t < keep_trajectories else 0
        return _one_trial(system, xi, T, rng, record=record)

    results = parallel_map(run, range(N))
    lams = [lam for lam, _, _ in results]
    degenerate = any(degen for _, degen, _ in results)
    trajectories = [traj for _, _, traj in results if traj]
    mean = math.fsum(lams) / N
    var = math.fsum((x - mean) ** 2 for x in lams) / (N - 1)
    sd = math.sqrt(var)
    half = 1.96 * sd / math.sqrt(N)
    return ExponentEstimate(mean=mean, sd=sd, half_width=half, trials=N, horizon=T,
                            seed=seed, radius=math.exp(mean), degenerate=degenerate,
                            trajectories=tuple(trajectories))


@dataclass(frozen=True)
class CylinderCheckRow:
    word: LabelWord
    analytic: float
    empirical: float
    z: float
    flagged: bool


def empirical_cylinder_check(graph: StochasticGraph, xi: NodeDistribution,
                             k: int, N: int, seed: int) -> list:
    """Compare empirical word frequencies of N sampled length-k paths against
    analytic cylinder measures.

    Returns one row per word of length k (ordered by stored symbol tuple)
    with the z-score of the observed count; rows with ``|z| > 4`` are flagged.
    """
    M = graph.alphabet_size
    if M ** k > 10**4:
        raise ExplosionLimit(M ** k, 10**4)
    rng = np.random.default_rng(np.random.SeedSequence(seed))
    counts = {}
    for _ in range(N):
        node = _draw_start(graph, xi, rng)
        labels = []
        for _ in range(k):
            e = _draw_edge(graph, node, rng)
            labels.append(e.label)
            node = e.end
        key = tuple(reversed(labels))
        counts[key] = counts.get(key, 0) + 1
    rows = []
    for w in all_words(M, k):
        mu = cylinder_measure(graph, xi, w)
        freq = counts.get(w.symbols, 0) / N
        se = math.sqrt(mu * (1.0 - mu) / N)
        if se == 0.0:
            z = 0.0 if freq == mu else math.inf
        else:
            z = (freq - mu) / se
        rows.append(CylinderCheckRow(w, mu, freq, z, abs(z) > 4.0))
    return rows
