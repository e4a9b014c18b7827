from django.test import TestCase
from rest_framework import status
from rest_framework.test import APIClient

from inversion.models import ExperimentRun


class ExperimentRunAPITest(TestCase):
    """Tests de l'API du registre des runs"""

    def setUp(self):
        self.client = APIClient()
        self.run = ExperimentRun.objects.create(
            cas='maxwell1d',
            mode='da-pinn',
            statut='termine',
            graine=3,
            repertoire='runs/maxwell1d-da-pinn-seed3',
            configuration={'case': 'maxwell1d', 'max_iterations': 2},
            parametres_estimes={'mu1': 1.1, 'eps1': 0.9, 'mu2': 9.0, 'eps2': 1.0, 'd': 10.5},
            erreurs_prediction={'E_Y': 0.1, 'H_Z': 0.2},
            nombre_iterations=2,
        )
        self.pending = ExperimentRun.objects.create(
            cas='maxwell2d',
            mode='baseline',
            graine=0,
            repertoire='runs/maxwell2d-baseline-seed0',
        )

    def test_list_runs(self):
        """Test de la liste des runs"""
        response = self.client.get('/api/runs/')
        self.assertEqual(response.status_code, status.HTTP_200_OK)
        self.assertEqual(response.data['count'], 2)
        self.assertNotIn('configuration', response.data['results'][0])

    def test_filter_by_case_and_status(self):
        """Test du filtrage par cas et par statut"""
        response = self.client.get('/api/runs/', {'cas': 'maxwell1d'})
        self.assertEqual([r['id'] for r in response.data['results']], [self.run.id])
        response = self.client.get('/api/runs/', {'statut': 'en_cours'})
        self.assertEqual([r['id'] for r in response.data['results']], [self.pending.id])

    def test_detail_includes_configuration(self):
        """Test du détail d'un run"""
        response = self.client.get(f'/api/runs/{self.run.id}/')
        self.assertEqual(response.status_code, status.HTTP_200_OK)
        self.assertEqual(response.data['configuration']['max_iterations'], 2)
        self.assertEqual(response.data['statut_display'], 'Terminé')

    def test_parameter_table(self):
        """Test du tableau d'estimation des paramètres"""
        response = self.client.get(f'/api/runs/{self.run.id}/parametres/')
        self.assertEqual(response.status_code, status.HTTP_200_OK)
        self.assertEqual([row['parametre'] for row in response.data], ['mu1', 'eps1', 'mu2', 'eps2', 'd'])
        d_row = response.data[4]
        self.assertEqual(d_row['valeur_vraie'], 10.0)
        self.assertAlmostEqual(d_row['erreur_relative_pct'], 5.0, places=10)

    def test_parameter_table_without_estimate(self):
        """Test d'un run sans estimation"""
        response = self.client.get(f'/api/runs/{self.pending.id}/parametres/')
        self.assertEqual(response.status_code, status.HTTP_404_NOT_FOUND)

    def test_read_only(self):
        """Test du refus des écritures"""
        response = self.client.post('/api/runs/', {'cas': 'maxwell1d'})
        self.assertEqual(response.status_code, status.HTTP_405_METHOD_NOT_ALLOWED)
