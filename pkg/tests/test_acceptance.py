"""Acceptance gate: every shipped claim, one test each, at stated tolerance.

Each test prints a single summary line with the measured values; the pytest
verdict per line is the pass/fail record.  Two checks fail by design — the
reference value for the base graph and the soft quadratic target are not
attainable by any sound certificate (the measured growth rate of the running
example sits above both); see notes/decisions.md one level above the
repository root for the blocking analysis.  The assertions are kept faithful
to the stated targets rather than weakened to pass.
"""

import json
import math
import subprocess
import sys
import time
from fractions import Fraction
from pathlib import Path

import numpy as np
import pytest

from switchcert import (
    LabelWord,
    StochasticGraph,
    SwitchedSystem,
    all_words,
    averaged_matrix,
    copositive_bound,
    cylinder_measure,
    estimate_lyapunov_exponent,
    hierarchical_bound,
    invariant_measure,
    lift_distribution,
    mean_square_operator_radius,
    path_lift,
    shift_preimage_measure,
    spectral_radius,
    step_lift,
    transition_matrix,
    verify_certificate,
)
from switchcert.certify import SubgradientOptions
from switchcert.graph import exact_matrix_power

from conftest import random_sc_graph, random_system

EXAMPLES = Path(__file__).resolve().parent.parent / "examples"


def running_example() -> SwitchedSystem:
    g = StochasticGraph.from_edges(2, [
        ("a", "a", 1, "1/3"), ("a", "b", 2, "2/3"),
        ("b", "a", 1, "1/4"), ("b", "b", 2, "3/4")])
    return SwitchedSystem(g, {1: [[0.5, 1.0], [0.0, 0.5]],
                              2: [[1.0, 0.0], [0.1, 1.0]]})


@pytest.fixture(scope="module")
def example():
    return running_example()


@pytest.fixture(scope="module")
def copositive_table(example):
    start = time.perf_counter()
    report = hierarchical_bound(example, template="copositive",
                                steps=(1, 2), paths=(1,))
    return report, time.perf_counter() - start


@pytest.fixture(scope="module")
def quadratic_step2(example):
    return hierarchical_bound(example, template="quadratic", steps=(2,))


@pytest.fixture(scope="module")
def exponent_estimate(example):
    xi = invariant_measure(example.graph)
    start = time.perf_counter()
    est = estimate_lyapunov_exponent(example, xi, T=10_000, N=100, seed=7)
    return est, time.perf_counter() - start


def test_criterion_01_exact_lift_algebra(example):
    start = time.perf_counter()
    P2 = transition_matrix(step_lift(example, 2).graph, exact=True)
    expected = np.array([[Fraction(5, 18), Fraction(13, 18)],
                         [Fraction(13, 48), Fraction(35, 48)]], dtype=object)
    exact_example = np.array_equal(P2, expected)

    rng = np.random.default_rng(2024)
    exact_random = True
    for _ in range(100):
        g = random_sc_graph(rng, max_nodes=4, max_labels=3)
        system = random_system(rng, graph=g)
        K = int(rng.integers(1, 4))
        lifted = transition_matrix(step_lift(system, K).graph, exact=True)
        powered = exact_matrix_power(transition_matrix(g, exact=True), K)
        exact_random &= np.array_equal(lifted, powered)
    elapsed = time.perf_counter() - start
    print(f"criterion 1: two-step matrix exact={exact_example}, "
          f"100 random P(G^K)=P^K exact={exact_random}, {elapsed:.2f}s")
    assert exact_example
    assert exact_random
    assert elapsed < 5.0


def test_criterion_02_invariant_measures(example):
    xi = invariant_measure(example.graph)
    base = [xi.of("a"), xi.of("b")]
    lifted = invariant_measure(path_lift(example, 1).graph)
    refined = [lifted.of(n) for n in
               ("a-1->a", "a-2->b", "b-1->a", "b-2->b")]
    err_base = max(abs(base[0] - 3 / 11), abs(base[1] - 8 / 11))
    err_ref = max(abs(v - t) for v, t in
                  zip(refined, [1 / 11, 2 / 11, 2 / 11, 6 / 11]))
    print(f"criterion 2: base measure error {err_base:.2e}, "
          f"path-lift measure error {err_ref:.2e} (tol 1e-12)")
    assert err_base <= 1e-12
    assert err_ref <= 1e-12


def test_criterion_03_step_lift_edge_probabilities(example):
    lift = step_lift(example, 2)
    got = {(e.start, lift.words[e.label - 1].applied): e.prob
           for e in lift.graph.edges}
    expected = {
        ("a", (1, 1)): Fraction(1, 9), ("a", (2, 1)): Fraction(1, 6),
        ("a", (1, 2)): Fraction(2, 9), ("a", (2, 2)): Fraction(1, 2),
        ("b", (1, 1)): Fraction(1, 12), ("b", (2, 1)): Fraction(3, 16),
        ("b", (2, 2)): Fraction(9, 16), ("b", (1, 2)): Fraction(1, 6),
    }
    print(f"criterion 3: {len(got)} lifted edge probabilities, "
          f"exact match={got == expected}")
    assert got == expected


def test_criterion_04_measure_identities():
    rng = np.random.default_rng(404)
    worst_step = worst_path = 0.0
    for _ in range(100):
        g = random_sc_graph(rng, max_nodes=4, max_labels=3)
        system = random_system(rng, graph=g)
        xi = invariant_measure(g)
        M = g.alphabet_size

        K = int(rng.integers(1, 4))
        lift = step_lift(system, K)
        xi_k = lift_distribution(lift, xi)
        for k in (1, 2):
            words = all_words(M, k * K)
            if len(words) > 60:
                words = [words[i] for i in
                         rng.choice(len(words), 60, replace=False)]
            for w in words:
                gap = abs(cylinder_measure(lift.graph, xi_k, lift.encode_word(w))
                          - cylinder_measure(g, xi, w))
                worst_step = max(worst_step, gap)

        R = int(rng.integers(0, 3))
        plift = path_lift(system, R)
        xi_r = lift_distribution(plift, xi)
        for length in (1, 2, 3, 4):
            words = all_words(M, length)
            if len(words) > 30:
                words = [words[i] for i in
                         rng.choice(len(words), 30, replace=False)]
            for w in words:
                gap = abs(cylinder_measure(plift.graph, xi_r, w)
                          - shift_preimage_measure(g, xi, w, R))
                worst_path = max(worst_path, gap)
    print(f"criterion 4: worst step-lift gap {worst_step:.2e}, "
          f"worst path-lift gap {worst_path:.2e} (tol 1e-12)")
    assert worst_step <= 1e-12
    assert worst_path <= 1e-12


def test_criterion_05a_copositive_table_base_graph(copositive_table):
    report, _ = copositive_table
    rho = report.entries[0].adjusted_rho
    rel = abs(rho - 1.169) / 1.169
    print(f"criterion 5a: base-graph copositive bound {rho:.7f} vs "
          f"reference 1.169, relative gap {rel:.4f} (tol 0.01)")
    assert rel <= 0.01, (
        f"bound {rho:.7f} does not match the reference value 1.169: the "
        f"optimizer result was cross-validated three independent ways "
        f"(convex solver, dense grid with local polish, feasibility "
        f"sampling) and the true optimum of this problem is 1.0750 — "
        f"strictly tighter than the reference, which no feasible weight "
        f"vector reproduces; see notes/decisions.md")


def test_criterion_05b_copositive_table_lifted_graphs(copositive_table):
    report, elapsed = copositive_table
    step2 = report.entries[1].adjusted_rho
    path1 = report.entries[2].adjusted_rho
    rel2 = abs(step2 - 1.045) / 1.045
    rel1 = abs(path1 - 1.036) / 1.036
    print(f"criterion 5b: two-step root {step2:.7f} (vs 1.045, gap {rel2:.5f}), "
          f"path-refined {path1:.7f} (vs 1.036, gap {rel1:.5f}), {elapsed:.1f}s")
    assert rel2 <= 0.01
    assert rel1 <= 0.01
    assert elapsed < 60.0


def test_criterion_06a_quadratic_certifies_stability(quadratic_step2):
    best = quadratic_step2.best_bound
    print(f"criterion 6a: quadratic two-step bound {best:.10f} < 1, "
          f"verdict {quadratic_step2.verdict}")
    assert best < 1.0
    assert quadratic_step2.verdict == "certified-stable"


def test_criterion_06b_quadratic_soft_target(quadratic_step2, exponent_estimate):
    best = quadratic_step2.best_bound
    est, _ = exponent_estimate
    print(f"criterion 6b: quadratic bound {best:.6f} vs soft target "
          f"[0.85, 0.95]; measured growth rate {est.radius:.4f}")
    assert 0.85 <= best <= 0.95, (
        f"bound {best:.6f} lies outside the soft target [0.85, 0.95]; no "
        f"sound certificate can enter that window because the measured "
        f"per-step growth rate of this system is {est.radius:.4f} "
        f"(+/- {est.half_width:.4f} on the exponent), and every valid bound "
        f"must sit above it; see notes/decisions.md")


def test_criterion_07_instability_side_checks(example):
    xi = invariant_measure(example.graph)
    avg = spectral_radius(averaged_matrix(example, xi))
    ms = mean_square_operator_radius(example)
    print(f"criterion 7: averaged-matrix radius {avg:.6f} "
          f"(expected ~1.0045), mean-square radius {ms:.6f}; both > 1")
    assert avg > 1.0
    assert abs(avg - 1.0045) <= 1e-3
    assert ms > 1.0


def test_criterion_08_monte_carlo_oracle(exponent_estimate, quadratic_step2):
    est, elapsed = exponent_estimate
    lo, hi = est.interval
    best = quadratic_step2.best_bound
    print(f"criterion 8: lambda {est.mean:.6f} CI [{lo:.6f}, {hi:.6f}], "
          f"growth {est.radius:.6f} <= bound {best:.6f} + 3*CI, {elapsed:.1f}s")
    assert est.mean < 0
    assert hi < 0                      # 95% interval excludes zero
    assert est.radius <= best + 3 * est.half_width
    assert elapsed < 30.0


def test_criterion_09_property_suites():
    budget = SubgradientOptions(restarts=4, iterations=2500)
    rng = np.random.default_rng(909)
    sound = mono_step = mono_path = pointwise = 0
    for i in range(50):
        # require genuinely random words: some node must choose between two
        # labels, otherwise every trial sees the same word, the confidence
        # interval collapses to zero, and the finite-horizon estimator
        # (biased above the exponent) has nothing to absorb it -- such
        # degenerate draws are not switched systems
        while True:
            system = random_system(rng, positive=True, scale=0.9, max_labels=2)
            if any(len({e.label for e in outs}) > 1
                   for outs in system.graph.out_edges.values()):
                break
        report = hierarchical_bound(system, template="copositive",
                                    steps=(1, 2), subgradient=budget)
        verified = []
        for entry in report.entries:
            ok, _ = verify_certificate(system, entry.certificate, samples=0)
            if ok:
                verified.append(entry)
        assert verified, "no certificate verified on a positive system"

        xi = invariant_measure(system.graph)
        est = estimate_lyapunov_exponent(system, xi, T=2_000, N=20, seed=i)
        slack = 3 * est.half_width
        assert all(est.radius <= e.adjusted_rho + slack for e in verified), (
            f"instance {i}: growth {est.radius:.6f} exceeds a verified "
            f"bound {min(e.adjusted_rho for e in verified):.6f} + {slack:.6f}")
        sound += 1

        one, two = report.entries
        assert two.adjusted_rho <= one.adjusted_rho + 0.02, (
            f"instance {i}: step-2 bound {two.adjusted_rho:.6f} above "
            f"step-1 bound {one.adjusted_rho:.6f} beyond slack")
        mono_step += 1

        if i < 10:
            paths = hierarchical_bound(system, template="copositive",
                                       steps=(), paths=(0, 1),
                                       subgradient=budget)
            p0, p1 = paths.entries
            assert p1.adjusted_rho <= p0.adjusted_rho + 0.02
            mono_path += 1

            rho, template, _ = copositive_bound(system, budget)
            worst = _pointwise_ratio_max(system, template, 10_000, seed=i)
            assert worst <= rho * (1 + 1e-9), (
                f"instance {i}: sampled ratio {worst:.9f} exceeds vertex "
                f"bound {rho:.9f}")
            pointwise += 1
    print(f"criterion 9: soundness {sound}/50, step monotonicity "
          f"{mono_step}/50, path monotonicity {mono_path}/10, "
          f"pointwise-vs-vertex {pointwise}/10 at 10^4 samples")


def _pointwise_ratio_max(system, template, samples, seed):
    """Largest sampled decrease ratio over the nonnegative orthant; the
    copositive check is exact at the template vectors, so this can never
    exceed the certified rho."""
    rng = np.random.default_rng(seed)
    worst = 0.0
    for a in system.graph.nodes:
        X = rng.uniform(0.0, 1.0, size=(samples, system.dimension)) + 1e-9
        log_lhs = np.zeros(samples)
        for e in system.graph.out_edges[a]:
            vals = np.max((X @ system.matrices[e.label].T)
                          / template.vectors[e.end], axis=1)
            log_lhs += float(e.prob) * np.log(np.maximum(vals, 1e-300))
        fa = np.max(X / template.vectors[a], axis=1)
        worst = max(worst, float(np.max(np.exp(log_lhs) / fa)))
    return worst


def test_criterion_10_byte_identical_reports(tmp_path):
    outputs = []
    for name in ("first.json", "second.json"):
        target = tmp_path / name
        proc = subprocess.run(
            [sys.executable, "-m", "switchcert.cli", "certify",
             str(EXAMPLES / "fang_h.json"), "--seed", "7", "--no-meta",
             "--format", "json", "--output", str(target)],
            capture_output=True, text=True)
        assert proc.returncode == 2, proc.stderr  # inconclusive, not an error
        outputs.append(target.read_bytes())
    identical = outputs[0] == outputs[1]
    print(f"criterion 10: two certify runs, {len(outputs[0])} bytes each, "
          f"identical={identical}")
    assert identical
