"""Switched systems: products, spectral radii, the mean-square operator."""

import numpy as np
import pytest

from switchcert import (
    BadMatrix,
    LabelWord,
    MatrixLabelMismatch,
    NotStronglyConnected,
    StochasticGraph,
    SwitchedSystem,
    averaged_matrix,
    invariant_measure,
    mean_square_matrix,
    mean_square_operator_radius,
    spectral_radius,
    word_product,
)

from conftest import random_system


# -- construction ---------------------------------------------------------------

def test_matrix_labels_must_match_alphabet(fang_graph):
    with pytest.raises(MatrixLabelMismatch) as err:
        SwitchedSystem(fang_graph, {1: [[1.0]]})
    assert err.value.expected == {1, 2}
    with pytest.raises(MatrixLabelMismatch):
        SwitchedSystem(fang_graph, {1: [[1.0]], 2: [[1.0]], 3: [[1.0]]})


def test_matrices_must_be_square_finite_consistent(fang_graph):
    with pytest.raises(BadMatrix):
        SwitchedSystem(fang_graph, {1: [[1.0, 2.0]], 2: [[1.0]]})
    with pytest.raises(BadMatrix):
        SwitchedSystem(fang_graph, {1: [[np.nan]], 2: [[1.0]]})
    with pytest.raises(BadMatrix):
        SwitchedSystem(fang_graph, {1: [[1.0]], 2: np.eye(2)})


def test_matrices_stored_read_only(fang_system):
    assert fang_system.dimension == 2
    with pytest.raises(ValueError):
        fang_system.matrices[1][0, 0] = 9.0


def test_edge_arrays_layout(fang_system):
    starts, ends, labels, probs, stacked = fang_system.edge_arrays
    assert starts.tolist() == [0, 0, 1, 1]
    assert ends.tolist() == [0, 1, 0, 1]
    assert labels.tolist() == [1, 2, 1, 2]
    assert probs == pytest.approx([1 / 3, 2 / 3, 1 / 4, 3 / 4])
    assert stacked.shape == (4, 2, 2)
    assert not stacked.flags.writeable


# -- word products ----------------------------------------------------------------

def test_word_product_applies_oldest_rightmost(fang_system):
    w = LabelWord.from_applied([1, 2])
    expect = fang_system.matrices[2] @ fang_system.matrices[1]
    assert np.array_equal(word_product(fang_system, w), expect)
    assert np.array_equal(word_product(fang_system, LabelWord(())), np.eye(2))


def test_word_product_composes(fang_system):
    first = LabelWord.from_applied([2, 1])
    then = LabelWord.from_applied([1, 1, 2])
    combined = then.after(first)
    assert np.allclose(
        word_product(fang_system, combined),
        word_product(fang_system, then) @ word_product(fang_system, first))


# -- spectral radius ----------------------------------------------------------------

def test_spectral_radius_small_dimensions():
    assert spectral_radius([[-3.0]]) == 3.0
    assert spectral_radius([[2.0, 0.0], [0.0, -5.0]]) == 5.0
    assert spectral_radius([[0.0, 2.0], [0.0, 0.0]]) == 0.0
    # complex pair: 0.9 times a rotation has |lambda| = 0.9
    th = 0.7
    R = 0.9 * np.array([[np.cos(th), -np.sin(th)], [np.sin(th), np.cos(th)]])
    assert spectral_radius(R) == pytest.approx(0.9, abs=1e-15)


def test_spectral_radius_matches_eigvals():
    rng = np.random.default_rng(5)
    for n in (2, 3, 5):
        for _ in range(20):
            A = rng.normal(size=(n, n))
            assert spectral_radius(A) == pytest.approx(
                np.max(np.abs(np.linalg.eigvals(A))), rel=1e-12, abs=1e-12)


def test_spectral_radius_rejects_non_square():
    with pytest.raises(BadMatrix):
        spectral_radius(np.zeros((2, 3)))


# -- averaged matrix -----------------------------------------------------------------

def test_averaged_matrix_fang(fang_system):
    xi = invariant_measure(fang_system.graph)
    B = averaged_matrix(fang_system, xi)
    expect = (3 / 11) * fang_system.matrices[1] + (8 / 11) * fang_system.matrices[2]
    assert np.allclose(B, expect, atol=1e-15)
    assert spectral_radius(B) == pytest.approx(1.004472, abs=1e-5)


# -- mean-square operator -------------------------------------------------------------

def test_mean_square_radius_scalar_cases(single_mode_half, nilpotent_system):
    assert mean_square_operator_radius(single_mode_half) == pytest.approx(0.5, abs=1e-12)
    assert mean_square_operator_radius(nilpotent_system) == pytest.approx(0.0, abs=1e-12)


def test_mean_square_radius_fang(fang_system):
    assert mean_square_operator_radius(fang_system) == pytest.approx(1.015667, abs=5e-6)


def test_mean_square_matrix_blocks(fang_system):
    big = mean_square_matrix(fang_system)
    assert big.shape == (8, 8)
    A = fang_system.matrices[1]
    assert np.allclose(big[0:4, 0:4], (1 / 3) * np.kron(A.T, A.T))
    rho = np.max(np.abs(np.linalg.eigvals(big)))
    assert np.sqrt(rho) == pytest.approx(
        mean_square_operator_radius(fang_system), rel=1e-12)


def test_mean_square_radius_similarity_invariant():
    rng = np.random.default_rng(13)
    for _ in range(10):
        system = random_system(rng, scale=0.8)
        T = rng.normal(size=(2, 2)) + 2 * np.eye(2)
        Ti = np.linalg.inv(T)
        conjugated = SwitchedSystem(
            system.graph,
            {i: Ti @ A @ T for i, A in system.matrices.items()})
        assert mean_square_operator_radius(conjugated) == pytest.approx(
            mean_square_operator_radius(system), rel=1e-8)


def test_mean_square_power_iteration_agrees_with_dense():
    # n^2 |S| = 72 > 64 forces the matrix-free branch; compare to the
    # dense eigenvalue of the explicitly assembled operator
    rng = np.random.default_rng(41)
    g = StochasticGraph.from_edges(1, [
        ("a", "b", 1, 1), ("b", "a", 1, "1/2"), ("b", "b", 1, "1/2")])
    system = SwitchedSystem(g, {1: 0.4 * rng.normal(size=(6, 6))})
    iterated = mean_square_operator_radius(system)
    dense = np.sqrt(np.max(np.abs(np.linalg.eigvals(mean_square_matrix(system)))))
    assert iterated == pytest.approx(dense, rel=1e-6)


def test_mean_square_radius_needs_strong_connectivity():
    g = StochasticGraph.from_edges(1, [
        ("a", "a", 1, "1/2"), ("a", "b", 1, "1/2"), ("b", "b", 1, 1)])
    with pytest.raises(NotStronglyConnected):
        mean_square_operator_radius(SwitchedSystem(g, {1: np.eye(2)}))
