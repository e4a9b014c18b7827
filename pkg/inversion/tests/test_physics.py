import math

import numpy as np
from django.test import SimpleTestCase

from inversion.exceptions import ShapeError
from inversion.services.autodiff import check_gradient
from inversion.services.physics import (
    CaseGeometry, MaterialParams, derivative_map, interface_residual, material_at, residual_1d,
    residual_2d, squared_norm,
)


class MaterialTest(SimpleTestCase):
    """Tests des paramètres matériaux"""

    def setUp(self):
        self.lam = MaterialParams(mu1=1.0, eps1=2.0, mu2=9.0, eps2=5.0, d=10.0)

    def test_material_at_ties_go_to_first_domain(self):
        """Test du choix du sous-domaine, égalité x = d comprise"""
        mu, eps = material_at(self.lam, np.array([0.0, 10.0, 10.000001, 20.0]))
        np.testing.assert_array_equal(mu, [1.0, 1.0, 9.0, 9.0])
        np.testing.assert_array_equal(eps, [2.0, 2.0, 5.0, 5.0])
        self.assertEqual(material_at(self.lam, 10.0), (1.0, 2.0))

    def test_array_round_trip_and_length_check(self):
        """Test de la conversion en vecteur"""
        self.assertEqual(MaterialParams.from_array(self.lam.as_array()), self.lam)
        self.assertEqual(list(self.lam.as_dict()), ['mu1', 'eps1', 'mu2', 'eps2', 'd'])
        with self.assertRaises(ShapeError):
            MaterialParams.from_array([1.0, 2.0])

    def test_geometry_validation(self):
        """Test de la validation du domaine"""
        with self.assertRaises(ShapeError):
            CaseGeometry(dimension=2, x_max=1.0, t_max=1.0)
        with self.assertRaises(ShapeError):
            CaseGeometry(dimension=3, x_max=1.0, t_max=1.0)
        geometry = CaseGeometry(dimension=2, x_max=2 * math.pi, t_max=2.0, y_max=2 * math.pi)
        self.assertEqual(geometry.fields, ('E_X', 'E_Y', 'H_Z'))
        np.testing.assert_array_equal(geometry.contains([[1.0, 1.0, 1.0], [3.0, 1.0, 1.0]]), [True, False])


class ResidualTest(SimpleTestCase):
    """Tests des résidus des équations de Maxwell"""

    def test_residual_1d_formula(self):
        """Test de f = ∂E_Y/∂x + μ ∂H_Z/∂t et h = ∂H_Z/∂x + ε ∂E_Y/∂t"""
        derivs = {'dEy_dx': 1.0, 'dEy_dt': 2.0, 'dHz_dx': 3.0, 'dHz_dt': 4.0}
        res = residual_1d(derivs, mu=0.5, eps=2.0)
        self.assertEqual(res.f, 3.0)
        self.assertEqual(res.h, 7.0)
        self.assertEqual(squared_norm(res), 58.0)

    def test_residual_2d_formula(self):
        """Test des trois composantes du résidu 2D"""
        derivs = {
            'dEx_dt': 1.0, 'dEx_dy': 2.0, 'dEy_dt': 3.0, 'dEy_dx': 4.0,
            'dHz_dt': 5.0, 'dHz_dx': 6.0, 'dHz_dy': 7.0,
        }
        res = residual_2d(derivs, mu=2.0, eps=3.0)
        self.assertEqual(res.r_ax, 3.0 * 1.0 - 7.0)
        self.assertEqual(res.r_ay, 3.0 * 3.0 + 6.0)
        self.assertEqual(res.r_far, 4.0 - 2.0 + 2.0 * 5.0)

    def test_missing_derivative(self):
        """Test d'une dérivée manquante"""
        with self.assertRaises(ShapeError):
            residual_1d({'dEy_dx': 1.0}, 1.0, 1.0)

    def test_derivative_map_layout(self):
        """Test de la correspondance (champ, coordonnée) -> dérivée"""
        derivs = derivative_map(2, lambda field, coord: (field, coord))
        self.assertEqual(derivs['dEx_dy'], (0, 2))
        self.assertEqual(derivs['dEy_dx'], (1, 1))
        self.assertEqual(derivs['dHz_dt'], (2, 0))


class InterfaceResidualTest(SimpleTestCase):
    """Tests du résidu d'interface"""

    def setUp(self):
        self.geometry_1d = CaseGeometry(dimension=1, x_max=20.0, t_max=10.0)
        self.geometry_2d = CaseGeometry(dimension=2, x_max=2 * math.pi, t_max=2.0, y_max=2 * math.pi)
        self.lam = MaterialParams(mu1=1.0, eps1=2.0, mu2=1.0, eps2=1.0, d=1.0)

    def test_continuous_fields_give_zero(self):
        """Test d'un saut nul"""
        fields = np.array([[0.3, -1.2], [2.0, 0.5]])
        np.testing.assert_array_equal(interface_residual(fields, fields, self.lam, self.geometry_1d), [0.0, 0.0])

    def test_tangential_jumps_1d(self):
        """Test de s = (E₁Y − E₂Y)² + (H₁Z − H₂Z)²"""
        s = interface_residual(np.array([[1.0, 2.0]]), np.zeros((1, 2)), self.lam, self.geometry_1d)
        np.testing.assert_array_equal(s, [5.0])

    def test_normal_component_weighted_by_permittivity(self):
        """Test de la continuité de εE_X (et non de E_X)"""
        continuous_flux = interface_residual(
            np.array([[1.0, 0.0, 0.0]]), np.array([[2.0, 0.0, 0.0]]), self.lam, self.geometry_2d
        )
        np.testing.assert_array_equal(continuous_flux, [0.0])
        jump = interface_residual(
            np.array([[1.0, 0.0, 0.0]]), np.array([[1.0, 0.0, 0.0]]), self.lam, self.geometry_2d
        )
        np.testing.assert_array_equal(jump, [1.0])

    def test_width_mismatch(self):
        """Test de champs de largeur incorrecte"""
        with self.assertRaises(ShapeError):
            interface_residual(np.zeros((2, 3)), np.zeros((2, 3)), self.lam, self.geometry_1d)

    def test_swapping_sides_is_symmetric(self):
        """Test de l'invariance par échange des deux côtés"""
        rng = np.random.default_rng(0)
        fields1, fields2 = rng.normal(size=(5, 3)), rng.normal(size=(5, 3))
        swapped = MaterialParams(mu1=1.0, eps1=1.0, mu2=1.0, eps2=2.0, d=1.0)
        np.testing.assert_allclose(
            interface_residual(fields1, fields2, self.lam, self.geometry_2d),
            interface_residual(fields2, fields1, swapped, self.geometry_2d),
            rtol=1e-14,
        )

    def test_gradient_wrt_material(self):
        """Test du gradient de s par rapport à ε₁, ε₂ contre les différences finies"""
        rng = np.random.default_rng(1)
        fields1, fields2 = rng.normal(size=(4, 3)), rng.normal(size=(4, 3))

        def program(v):
            lam = MaterialParams(1.0, v['eps1'], 1.0, v['eps2'], 1.0)
            return interface_residual(v['f1'], v['f2'], lam, self.geometry_2d).sum()

        report = check_gradient(program, {'eps1': np.array(2.0), 'eps2': np.array(1.0),
                                          'f1': fields1, 'f2': fields2})
        self.assertTrue(report.passed, msg=report.max_relative_error)
