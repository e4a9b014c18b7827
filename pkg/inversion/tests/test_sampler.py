import numpy as np
from django.test import SimpleTestCase

from inversion.exceptions import ConfigurationError, PreconditionError
from inversion.services.autodiff import Tape, backward
from inversion.services.physics import CaseGeometry
from inversion.services.sampler import (
    FieldDataset, SamplerConfig, build_batch, sample_collocation, sample_uniform_collocation, split_data,
)


def _dataset(x_values):
    x_values = np.asarray(x_values, dtype=float)
    inputs = np.column_stack([np.linspace(0.0, 1.0, len(x_values)), x_values])
    return FieldDataset(inputs, np.column_stack([x_values, -x_values]), ('t', 'x'), ('E_Y', 'H_Z'))


class SplitDataTest(SimpleTestCase):
    """Tests du découpage des mesures"""

    def test_partition_keeps_order_and_ties(self):
        """Test de la partition x ≤ d / x > d"""
        first, second = split_data(_dataset([3.0, 12.0, 10.0, 1.0, 15.0]), 10.0)
        np.testing.assert_array_equal(first.x, [3.0, 10.0, 1.0])
        np.testing.assert_array_equal(second.x, [12.0, 15.0])
        np.testing.assert_array_equal(first.values[:, 1], [-3.0, -10.0, -1.0])

    def test_empty_side_is_reported(self):
        """Test d'un sous-domaine sans données"""
        with self.assertLogs('inversion.services.sampler', level='WARNING'):
            first, second = split_data(_dataset([3.0, 4.0]), 19.5)
        self.assertEqual(len(first), 2)
        self.assertEqual(len(second), 0)

    def test_data_point_access(self):
        """Test de l'accès à une mesure"""
        point = _dataset([3.0, 4.0])[1]
        self.assertEqual(point.coordinates, (1.0, 4.0))
        np.testing.assert_array_equal(point.u, [4.0, -4.0])


class CollocationTest(SimpleTestCase):
    """Tests de l'échantillonnage adaptatif"""

    def setUp(self):
        self.geometry_1d = CaseGeometry(dimension=1, x_max=20.0, t_max=10.0)
        self.geometry_2d = CaseGeometry(dimension=2, x_max=6.0, t_max=2.0, y_max=5.0)
        self.config = SamplerConfig(n_data=10, n_collocation_1=30, n_collocation_2=20, n_interface=7)

    def test_range_invariants(self):
        """Test des bornes de C_P1, C_P2 et C_I sur des tirages aléatoires"""
        rng = np.random.default_rng(0)
        for _ in range(500):
            geometry = self.geometry_2d if rng.random() < 0.5 else self.geometry_1d
            d = rng.uniform(0.01, geometry.x_max - 0.01)
            c_p1, c_p2, c_i = sample_collocation(d, geometry, self.config, rng)
            self.assertEqual((len(c_p1), len(c_p2), len(c_i)), (30, 20, 7))
            x1 = c_p1.x_values(d, geometry.x_max)
            x2 = c_p2.x_values(d, geometry.x_max)
            self.assertTrue(np.all((x1 >= 0.0) & (x1 <= d)))
            self.assertTrue(np.all((x2 >= d) & (x2 <= geometry.x_max + 1e-12)))
            np.testing.assert_array_equal(c_i.x_values(d, geometry.x_max), np.full(7, d))
            for points in (c_p1, c_p2, c_i):
                self.assertTrue(np.all(geometry.contains(points.inputs(d, geometry.x_max))))

    def test_interface_outside_domain(self):
        """Test du refus de d hors de (0, B)"""
        rng = np.random.default_rng(0)
        for d in (0.0, 20.0, -1.0, 25.0):
            with self.assertRaises(PreconditionError):
                sample_collocation(d, self.geometry_1d, self.config, rng)

    def test_same_seed_same_points(self):
        """Test du déterminisme des tirages"""
        first = sample_collocation(4.0, self.geometry_2d, self.config, np.random.default_rng(5))
        second = sample_collocation(4.0, self.geometry_2d, self.config, np.random.default_rng(5))
        for a, b in zip(first, second):
            np.testing.assert_array_equal(a.inputs(4.0, 6.0), b.inputs(4.0, 6.0))

    def test_abscissae_are_differentiable_in_d(self):
        """Test de ∂x/∂d: ν à gauche, 1 − ν à droite, 1 à l'interface"""
        c_p1, c_p2, c_i = sample_collocation(8.0, self.geometry_1d, self.config, np.random.default_rng(1))
        for points, expected in ((c_p1, c_p1.nu.sum()), (c_p2, (1.0 - c_p2.nu).sum()), (c_i, 7.0)):
            tape = Tape()
            d = tape.leaf('d', 8.0)
            x = points.x_expression(tape, d, 20.0)
            np.testing.assert_allclose(x.value.ravel(), points.x_values(8.0, 20.0), rtol=0, atol=1e-12)
            self.assertAlmostEqual(float(backward(tape, x.sum())['d']), expected, places=10)

    def test_uniform_collocation(self):
        """Test de la collocation uniforme, indépendante de d"""
        uniform = sample_uniform_collocation(self.geometry_1d, 50, np.random.default_rng(2))
        x = uniform.x_values(3.0, 20.0)
        np.testing.assert_array_equal(x, uniform.x_values(17.0, 20.0))
        self.assertTrue(np.all((x >= 0.0) & (x <= 20.0)))
        with self.assertRaises(ConfigurationError):
            sample_uniform_collocation(self.geometry_1d, 0, np.random.default_rng(2))

    def test_invalid_counts(self):
        """Test des effectifs nuls"""
        with self.assertRaises(ConfigurationError):
            SamplerConfig(n_interface=0)

    def test_build_batch(self):
        """Test de l'assemblage d'un lot"""
        collocation = sample_collocation(10.0, self.geometry_1d, self.config, np.random.default_rng(3))
        batch = build_batch(_dataset([3.0, 12.0, 15.0]), 10.0, collocation)
        self.assertEqual((len(batch.d_d1), len(batch.d_d2)), (1, 2))
        self.assertFalse(batch.empty_d1 or batch.empty_d2)

    def test_left_abscissae_mean(self):
        """Test de la moyenne empirique des abscisses de C_P1 (d/2)"""
        config = SamplerConfig(n_collocation_1=20000, n_collocation_2=1, n_interface=1)
        c_p1, _, _ = sample_collocation(8.0, self.geometry_1d, config, np.random.default_rng(4))
        sigma = 8.0 / np.sqrt(12.0 * 20000)
        self.assertLess(abs(c_p1.x_values(8.0, 20.0).mean() - 4.0), 3 * sigma)
