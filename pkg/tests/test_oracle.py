"""Centralized reference solvers and the minimal-polynomial probe."""

from fractions import Fraction
from itertools import permutations

import numpy as np
import pytest

from consensus_admm import (LogisticObjective, build_digraph,
                            centralized_l1_logistic,
                            centralized_least_squares, exact_average,
                            fterc_run, make_logistic_instance,
                            minimal_poly_oracle, random_strongly_connected,
                            ratio_weights)


def test_exact_average_pins():
    assert exact_average([1.0, 2.0, 6.0]) == pytest.approx(3.0)
    stacked = np.array([[1.0, 4.0], [3.0, 0.0]])
    assert np.allclose(exact_average(stacked), [2.0, 2.0])


def test_minimal_poly_degree_on_ring():
    g = build_digraph(3, [(1, 0), (2, 1), (0, 2)])
    w = ratio_weights(g)
    for j in range(3):
        assert minimal_poly_oracle(w, j) == 3


def test_minimal_poly_degree_on_complete_graph():
    # every node of K_4 with uniform weights sees just two modes: the mean
    # and one uniform-decay direction
    edges = [(i, j) for i, j in permutations(range(4), 2)]
    w = ratio_weights(build_digraph(4, edges))
    for j in range(4):
        assert minimal_poly_oracle(w, j) == 2


def test_detector_matches_minimal_poly_degree():
    for seed in range(10):
        n = 3 + (seed % 6)
        g = random_strongly_connected(n, extra_edge_prob=0.25, seed=seed)
        w = ratio_weights(g)
        y0 = np.random.default_rng(300 + seed).uniform(-5, 5, size=n)
        results = fterc_run(g, y0)
        for j, res in enumerate(results):
            assert res.defect + 1 == minimal_poly_oracle(w, j, rank_tol=1e-12)


def test_centralized_least_squares_reference():
    rng = np.random.default_rng(4)
    mats = [rng.standard_normal((5, 3)) for _ in range(4)]
    rhss = [rng.standard_normal(5) for _ in range(4)]
    ref = centralized_least_squares(mats, rhss)
    gram = sum(a.T @ a for a in mats)
    rhs = sum(a.T @ b for a, b in zip(mats, rhss))
    assert np.allclose(ref.x_star, np.linalg.solve(gram, rhs), atol=1e-10)
    assert ref.residual < 1e-10
    assert ref.method == "normal_equations"
    # the per-node multipliers certify optimality: they sum to zero and
    # each one is the negative local gradient at the shared optimum
    assert np.allclose(ref.lambda_star.sum(axis=0), 0.0, atol=1e-10)
    for a, b, lam in zip(mats, rhss, ref.lambda_star):
        assert np.allclose(a.T @ (a @ ref.x_star - b), -lam, atol=1e-12)
    value = sum(0.5 * np.sum((a @ ref.x_star - b) ** 2)
                for a, b in zip(mats, rhss))
    assert ref.f_star == pytest.approx(value)
    # any perturbation of the point can only increase the objective
    for trial in range(5):
        shift = 1e-3 * np.random.default_rng(trial).standard_normal(3)
        bumped = sum(0.5 * np.sum((a @ (ref.x_star + shift) - b) ** 2)
                     for a, b in zip(mats, rhss))
        assert bumped >= ref.f_star


def test_centralized_l1_logistic_kkt():
    features, labels = make_logistic_instance(60, 4, seed=3)
    mu = 0.4
    ref = centralized_l1_logistic(features, labels, mu)
    assert ref.residual <= 1e-8
    obj = LogisticObjective(features, labels)
    grad = obj.gradient(ref.x_star)
    # KKT for the composite problem: on active coordinates the gradient
    # exactly balances the penalty sign; on zero coordinates it stays in
    # the [-mu, mu] band; the intercept is free
    for i in range(4):
        if ref.x_star[i] != 0.0:
            assert grad[i] + mu * np.sign(ref.x_star[i]) == pytest.approx(
                0.0, abs=1e-7)
        else:
            assert abs(grad[i]) <= mu + 1e-7
    assert abs(grad[-1]) <= 1e-7
    value = obj.evaluate(ref.x_star) + mu * np.sum(np.abs(ref.x_star[:-1]))
    assert ref.f_star == pytest.approx(value)


def test_centralized_l1_logistic_beats_neighbors():
    features, labels = make_logistic_instance(60, 4, seed=3)
    mu = 0.4
    ref = centralized_l1_logistic(features, labels, mu)
    obj = LogisticObjective(features, labels)

    def total(x):
        return obj.evaluate(x) + mu * np.sum(np.abs(x[:-1]))

    rng = np.random.default_rng(8)
    for _ in range(20):
        probe = ref.x_star + 1e-3 * rng.standard_normal(5)
        assert total(probe) >= ref.f_star - 1e-12
