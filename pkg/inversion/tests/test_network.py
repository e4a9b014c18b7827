import numpy as np
from django.test import SimpleTestCase

from inversion.exceptions import ConfigurationError, ShapeError
from inversion.services.autodiff import Dual, check_gradient
from inversion.services.network import (
    NetworkParams, forward, forward_recorded, forward_with_derivatives, init_network,
    network_from_dict, network_to_dict,
)


class InitNetworkTest(SimpleTestCase):
    """Tests de l'initialisation des réseaux"""

    def test_same_seed_same_weights(self):
        """Test du déterminisme de l'initialisation"""
        first = init_network([2, 5, 3], 'tanh', seed=11)
        second = init_network([2, 5, 3], 'tanh', seed=11)
        other = init_network([2, 5, 3], 'tanh', seed=12)
        for (w1, b1), (w2, b2) in zip(first.layers, second.layers):
            np.testing.assert_array_equal(w1, w2)
            np.testing.assert_array_equal(b1, b2)
        self.assertFalse(np.array_equal(first.layers[0][0], other.layers[0][0]))

    def test_shapes_and_zero_biases(self):
        """Test des formes des couches"""
        params = init_network([3, 30, 30, 2], seed=0)
        self.assertEqual(params.sizes, [3, 30, 30, 2])
        self.assertEqual(params.layers[0][0].shape, (3, 30))
        self.assertTrue(all(not b.any() for _, b in params.layers))

    def test_invalid_architectures(self):
        """Test du refus des architectures invalides"""
        with self.assertRaises(ConfigurationError):
            init_network([2, 0, 3], seed=0)
        with self.assertRaises(ConfigurationError):
            init_network([2, 3], seed=0)
        with self.assertRaises(ConfigurationError):
            init_network([2, 4, 3], activation='sigmoid', seed=0)


class ForwardTest(SimpleTestCase):
    """Tests de l'évaluation des réseaux"""

    def test_hand_computed_relu_network(self):
        """Test d'un réseau ReLU calculé à la main"""
        params = NetworkParams((
            (np.array([[1.0, -1.0]]), np.zeros(2)),
            (np.array([[1.0], [1.0]]), np.array([0.5])),
        ), 'relu')
        np.testing.assert_array_equal(forward(params, [[2.0]]), [[2.5]])
        np.testing.assert_array_equal(forward(params, [[-3.0]]), [[3.5]])

    def test_output_shape_and_input_check(self):
        """Test de la forme de sortie et du contrôle des entrées"""
        params = init_network([2, 4, 3], seed=1)
        self.assertEqual(forward(params, np.zeros((7, 2))).shape, (7, 3))
        with self.assertRaises(ShapeError):
            forward(params, np.zeros((7, 3)))

    def test_input_scaling(self):
        """Test de la mise à l'échelle vers [-1, 1]"""
        scaled = init_network([2, 4, 2], 'tanh', seed=3, input_bounds=([0.0, 0.0], [10.0, 20.0]))
        plain = NetworkParams(scaled.layers, 'tanh')
        points = np.array([[0.0, 0.0], [10.0, 20.0], [5.0, 5.0]])
        expected = forward(plain, points * np.array([0.2, 0.1]) - 1.0)
        np.testing.assert_allclose(forward(scaled, points), expected, rtol=0, atol=1e-14)


class DerivativesTest(SimpleTestCase):
    """Tests des dérivées par rapport aux entrées"""

    def test_jacobian_matches_finite_differences(self):
        """Test de la jacobienne exacte contre les différences centrées"""
        params = init_network([2, 6, 6, 2], 'tanh', seed=5)
        points = np.random.default_rng(0).uniform(-1, 1, size=(4, 2))
        values, jacobian = forward_with_derivatives(params, points)
        np.testing.assert_allclose(values, forward(params, points), rtol=0, atol=1e-14)
        h = 1e-6
        for axis in range(2):
            shift = np.zeros(2)
            shift[axis] = h
            numeric = (forward(params, points + shift) - forward(params, points - shift)) / (2 * h)
            np.testing.assert_allclose(jacobian[:, :, axis], numeric, rtol=1e-6, atol=1e-8)

    def test_gradient_of_jacobian_wrt_weights(self):
        """Test de d/dθ (∂u/∂x) contre les différences finies"""
        params = init_network([2, 5, 5, 2], 'tanh', seed=9)
        points = np.random.default_rng(1).uniform(-1, 1, size=(6, 2))
        probe = np.random.default_rng(2).normal(size=(6, 2))

        def program(variables):
            layer_vars = [(variables[f"net.W{i}"], variables[f"net.b{i}"]) for i in range(len(params.layers))]
            tape = variables['net.W0'].tape
            out = forward_recorded(params, layer_vars, Dual.seed(tape.constant(points), [0, 1]))
            return (out.tangent(1) * probe).sum() + (out.primal * probe).sum()

        report = check_gradient(program, params.leaves('net'), tolerance=1e-5)
        self.assertTrue(report.passed, msg=report.max_relative_error)


class SerializationTest(SimpleTestCase):
    """Tests de la sérialisation des réseaux"""

    def test_restored_network_predicts_identically(self):
        """Test de la restauration à l'identique"""
        params = init_network([3, 7, 2], 'relu', seed=4, input_bounds=([0, 0, 0], [1, 2, 3]))
        restored = network_from_dict(network_to_dict(params))
        points = np.random.default_rng(3).uniform(0, 1, size=(5, 3))
        np.testing.assert_array_equal(forward(restored, points), forward(params, points))
        self.assertEqual(restored.activation, 'relu')

    def test_unknown_format_version(self):
        """Test du refus d'une version de format inconnue"""
        payload = network_to_dict(init_network([1, 2, 1], seed=0))
        payload['format_version'] = 99
        with self.assertRaises(ConfigurationError):
            network_from_dict(payload)
