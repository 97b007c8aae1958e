#!/usr/bin/env python3
"""Tests for the simulated quantum ensemble and its analytic counterpart"""

import sys
import unittest
from pathlib import Path
from unittest import mock

import numpy as np
from hypothesis import given, settings, strategies as st

ROOT = Path(__file__).resolve().parent
BACKEND_PATH = ROOT / "backend"
if str(BACKEND_PATH) not in sys.path:
    sys.path.insert(0, str(BACKEND_PATH))

from app.deutsch_jozsa import BooleanOracle
from app.errors import CapacityError, PostselectionError
from app.models import Dataset, ModelFamily, accuracy_table, generate_dataset
from app.qensemble import (
    ParameterCode,
    accuracy_weighted_state,
    all_thetas,
    apply_A,
    build_classifier_oracle,
    classifier_predictions,
    decode_theta,
    encode_theta,
    exact_ensemble_probabilities,
    majority_vote,
    measure_prediction,
    prepare_weighted_state,
    uniform_ensemble_state,
)
from app.rng import substream
from app.statevector import marginal_probability, register_probabilities

TOL = 1e-10


def random_instance(seed: int):
    """Random perceptron/linear problem with at most 12 parameter bits."""
    rng = substream(seed, 0)
    family = [ModelFamily.LINEAR, ModelFamily.PERCEPTRON][int(rng.integers(0, 2))]
    d = int(rng.integers(1, 5))
    bits = int(rng.integers(1, 12 // d + 1))
    bits = min(bits, 3)
    M = int(rng.integers(1, 65))
    data = generate_dataset(M, d, seed)
    x_tilde = rng.normal(size=d)
    return family, ParameterCode(d, bits), data, x_tilde / np.linalg.norm(x_tilde)


class ParameterCodeTests(unittest.TestCase):
    def test_single_bit_maps_to_endpoints(self):
        np.testing.assert_allclose(decode_theta("01", ParameterCode(2, 1)), [-1.0, 1.0])

    def test_two_bit_grid(self):
        pc = ParameterCode(1, 2)
        self.assertAlmostEqual(float(decode_theta("11", pc)[0]), 1.0)
        self.assertAlmostEqual(float(decode_theta("01", pc)[0]), -1.0 / 3.0)

    def test_length_mismatch(self):
        with self.assertRaises(ValueError):
            decode_theta("011", ParameterCode(2, 1))

    def test_encode_inverts_decode(self):
        pc = ParameterCode(2, 3)
        for k in range(pc.size):
            code = pc.code_string(k)
            self.assertEqual(encode_theta(decode_theta(code, pc), pc), code)

    def test_table_rows_follow_code_order(self):
        pc = ParameterCode(3, 2)
        table = all_thetas(pc)
        self.assertEqual(table.shape, (64, 3))
        for k in (0, 17, 63):
            np.testing.assert_allclose(table[k], decode_theta(pc.code_string(k), pc))

    def test_capacity(self):
        with self.assertRaises(CapacityError):
            ParameterCode(21, 1).check_capacity()


class ClassifierOracleTests(unittest.TestCase):
    def test_perceptron_examples(self):
        pc = ParameterCode(2, 1)
        oracle = build_classifier_oracle(ModelFamily.PERCEPTRON, pc, [1.0, 0.0])
        self.assertEqual(oracle(int("10", 2)), 1)
        self.assertEqual(oracle(int("01", 2)), 0)

    def test_bit_encodes_prediction(self):
        pc = ParameterCode(3, 2)
        x = np.array([0.2, -0.5, 0.3])
        oracle = build_classifier_oracle(ModelFamily.LINEAR, pc, x)
        predictions = classifier_predictions(ModelFamily.LINEAR, pc, x)
        np.testing.assert_array_equal(oracle.truth_table, (1 + predictions) // 2)

    def test_dimension_mismatch(self):
        with self.assertRaises(ValueError):
            build_classifier_oracle(ModelFamily.PERCEPTRON, ParameterCode(2, 1), [1.0, 0.0, 0.0])


class WeightedStateTests(unittest.TestCase):
    def test_uniform_weights_half_branches(self):
        ws = apply_A(prepare_weighted_state(np.ones(4)), BooleanOracle(2, np.array([0, 0, 1, 1])))
        self.assertAlmostEqual(marginal_probability(ws.state, 2, 0), 0.5, delta=TOL)

    def test_one_hot_weight(self):
        ws = apply_A(prepare_weighted_state([1.0, 0.0, 0.0, 0.0]), BooleanOracle(2, np.array([1, 0, 0, 0])))
        self.assertAlmostEqual(marginal_probability(ws.state, 2, 1), 1.0, delta=TOL)

    def test_weight_ratio(self):
        ws = apply_A(prepare_weighted_state([3.0, 1.0]), BooleanOracle(1, np.array([0, 1])))
        self.assertAlmostEqual(marginal_probability(ws.state, 1, 0), 0.75, delta=TOL)
        self.assertAlmostEqual(ws.normalizer, 4.0)

    def test_output_must_start_in_zero(self):
        oracle = BooleanOracle(1, np.array([0, 1]))
        ws = apply_A(prepare_weighted_state([1.0, 1.0]), oracle)
        with self.assertRaises(ValueError):
            apply_A(ws, oracle)

    def test_scaling_weights_leaves_probabilities_unchanged(self):
        oracle = BooleanOracle(2, np.array([1, 0, 1, 1]))
        weights = np.array([0.1, 0.4, 0.2, 0.3])
        base = measure_prediction(apply_A(prepare_weighted_state(weights), oracle))
        scaled = measure_prediction(apply_A(prepare_weighted_state(7.5 * weights), oracle))
        self.assertAlmostEqual(base.p_minus, scaled.p_minus, delta=1e-12)


class MeasurementTests(unittest.TestCase):
    def test_all_minus_branches(self):
        ws = apply_A(prepare_weighted_state(np.ones(2)), BooleanOracle(1, np.array([0, 0])))
        result = measure_prediction(ws)
        self.assertAlmostEqual(result.p_minus, 1.0, delta=TOL)
        self.assertEqual(result.label, -1)

    def test_tie_labels_plus_one(self):
        ws = apply_A(prepare_weighted_state(np.ones(4)), BooleanOracle(2, np.array([0, 0, 1, 1])))
        result = measure_prediction(ws)
        self.assertAlmostEqual(result.p_minus, 0.5, delta=TOL)
        self.assertEqual(result.label, 1)

    def test_weighted_pair_follows_heavier_model(self):
        ws = apply_A(prepare_weighted_state([0.8, 0.2]), BooleanOracle(1, np.array([0, 1])))
        result = measure_prediction(ws)
        self.assertAlmostEqual(result.p_minus, 0.8, delta=TOL)
        self.assertEqual(result.label, -1)
        self.assertEqual(result.per_model["0"], (0.8, -1))
        self.assertEqual(result.per_model["1"], (0.2, 1))

    def test_exact_probabilities(self):
        self.assertEqual(exact_ensemble_probabilities([1, 1], [-1, 1]), (0.5, 0.5))
        p_minus, p_plus = exact_ensemble_probabilities([0.8, 0.2], [1, -1])
        self.assertAlmostEqual(p_minus, 0.2, delta=1e-15)
        self.assertAlmostEqual(p_plus, 0.8, delta=1e-15)
        with self.assertRaises(ValueError):
            exact_ensemble_probabilities([0.0, 0.0], [1, -1])
        with self.assertRaises(ValueError):
            exact_ensemble_probabilities([1.0], [1, -1])

    def test_majority_vote(self):
        self.assertEqual(majority_vote([1, -1, -1]), -1)
        self.assertEqual(majority_vote([1, -1]), 1)


class AccuracyWeightedTests(unittest.TestCase):
    def test_single_perfect_code(self):
        pc = ParameterCode(1, 1)
        data = Dataset(np.array([[1.0], [-1.0]]), np.array([1, -1]))
        ws = accuracy_weighted_state(ModelFamily.PERCEPTRON, pc, data, [1.0])
        # theta = +1 is the only model with nonzero accuracy; it predicts +1 on x = 1
        np.testing.assert_allclose(np.abs(ws.state.amplitudes) ** 2, [0, 0, 0, 1], atol=TOL)
        self.assertEqual(measure_prediction(ws).label, 1)

    def test_zero_accuracies_fail_postselection(self):
        pc = ParameterCode(2, 1)
        data = generate_dataset(4, 2, seed=0)
        with mock.patch("app.qensemble.accuracy_table", return_value=np.zeros(pc.size)):
            with self.assertRaises(PostselectionError):
                accuracy_weighted_state(ModelFamily.PERCEPTRON, pc, data, [1.0, 0.0])

    def test_accuracy_qubit_is_released(self):
        family, pc, data, x_tilde = random_instance(3)
        ws = accuracy_weighted_state(family, pc, data, x_tilde)
        self.assertFalse(ws.has_accuracy_qubit)
        self.assertEqual(ws.state.num_qubits, pc.total_bits + 1)

    @settings(max_examples=50, deadline=None)
    @given(seed=st.integers(min_value=0, max_value=2 ** 32 - 1))
    def test_postselected_amplitudes_follow_accuracy(self, seed):
        family, pc, data, x_tilde = random_instance(seed)
        accuracies = accuracy_table(family, all_thetas(pc), data)
        if accuracies.sum() == 0:
            return
        ws = accuracy_weighted_state(family, pc, data, x_tilde)
        distribution = register_probabilities(ws.state, range(pc.total_bits))
        np.testing.assert_allclose(distribution, accuracies / accuracies.sum(), atol=TOL)

    @settings(max_examples=50, deadline=None)
    @given(seed=st.integers(min_value=0, max_value=2 ** 32 - 1))
    def test_simulation_matches_analytic_probabilities(self, seed):
        family, pc, data, x_tilde = random_instance(seed)
        accuracies = accuracy_table(family, all_thetas(pc), data)
        if accuracies.sum() == 0:
            return
        simulated = measure_prediction(accuracy_weighted_state(family, pc, data, x_tilde))
        p_minus, _ = exact_ensemble_probabilities(accuracies, classifier_predictions(family, pc, x_tilde))
        self.assertLess(abs(simulated.p_minus - p_minus), TOL)

    def test_equal_weights_reduce_to_majority_vote(self):
        for seed in range(10):
            family, pc, _, x_tilde = random_instance(seed)
            result = measure_prediction(uniform_ensemble_state(family, pc, x_tilde))
            self.assertEqual(result.label, majority_vote(classifier_predictions(family, pc, x_tilde)))


if __name__ == "__main__":
    unittest.main()
