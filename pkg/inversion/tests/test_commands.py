import json
import shutil
import tempfile
from io import StringIO
from pathlib import Path

import pandas as pd
from django.core.management import call_command
from django.core.management.base import CommandError
from django.test import SimpleTestCase, TestCase

from inversion.exceptions import ConfigurationError
from inversion.models import ExperimentRun
from inversion.presets import resolve
from inversion.services.trainer import load_checkpoint

TINY_CONFIG = {
    'case': 'maxwell1d',
    'mode': 'both',
    'seed': 3,
    'n_data': 16,
    'n_collocation_1': 16,
    'n_collocation_2': 16,
    'n_interface': 8,
    'hidden_layers': [4, 4],
    'activation': 'tanh',
    'input_scaling': True,
    'max_iterations': 2,
    'grid': {'nx': 5, 'nt': 4},
}


class CommandTestCase(TestCase):
    """Base: répertoire temporaire et configuration minimale"""

    def setUp(self):
        self.tmp = Path(tempfile.mkdtemp())
        self.addCleanup(shutil.rmtree, self.tmp, ignore_errors=True)

    def write_config(self, **changes):
        values = dict(TINY_CONFIG, **changes)
        path = self.tmp / 'config.json'
        path.write_text(json.dumps(values), encoding='utf-8')
        return path

    def run_command(self, *args, **options):
        out = StringIO()
        call_command(*args, stdout=out, **options)
        return out.getvalue()


class RunCommandTest(CommandTestCase):
    """Tests de la commande run"""

    def test_both_modes_write_artifacts(self):
        """Test des artefacts des deux méthodes et de la comparaison"""
        out_dir = self.tmp / 'runs'
        output = self.run_command('run', config=str(self.write_config()), out=str(out_dir))
        for mode in ('da-pinn', 'baseline'):
            for name in ('config.json', 'trace.csv', 'checkpoint.json', 'parameters.csv',
                         'metrics.json', 'timing.json', 'errors_E_Y.csv', 'errors_H_Z.csv'):
                self.assertTrue((out_dir / mode / name).exists(), msg=f"{mode}/{name}")
        self.assertTrue((out_dir / 'comparison.csv').exists())
        self.assertTrue((out_dir / 'comparison.txt').exists())
        self.assertIn('erreur_relative_pct', output)
        self.assertEqual(ExperimentRun.objects.filter(statut='termine').count(), 2)

        config = json.loads((out_dir / 'da-pinn' / 'config.json').read_text())
        self.assertEqual(config['mode'], 'da-pinn')
        self.assertEqual(len(config['analytic_corrections']), 2)
        trace = pd.read_csv(out_dir / 'da-pinn' / 'trace.csv')
        self.assertEqual(list(trace.columns),
                         ['iter', 'loss_d', 'loss_p', 'loss_i', 'total', 'mu1', 'eps1', 'mu2', 'eps2', 'd', 'ms'])
        self.assertEqual(len(trace), 2)

    def test_same_seed_same_metrics(self):
        """Test de la reproductibilité à graine égale"""
        config = str(self.write_config(mode='da-pinn'))
        self.run_command('run', config=config, out=str(self.tmp / 'first'))
        self.run_command('run', config=config, out=str(self.tmp / 'second'))
        first = (self.tmp / 'first' / 'metrics.json').read_text()
        second = (self.tmp / 'second' / 'metrics.json').read_text()
        self.assertEqual(first, second)

    def test_options_override_file(self):
        """Test de la priorité des options sur le fichier"""
        out_dir = self.tmp / 'override'
        self.run_command('run', config=str(self.write_config()), out=str(out_dir), mode='baseline',
                         iters=1, seed=5)
        metrics = json.loads((out_dir / 'metrics.json').read_text())
        self.assertEqual((metrics['mode'], metrics['iterations'], metrics['seed']), ('baseline', 1, 5))

    def test_missing_case(self):
        """Test d'une configuration sans cas"""
        values = dict(TINY_CONFIG)
        del values['case']
        path = self.tmp / 'no_case.json'
        path.write_text(json.dumps(values), encoding='utf-8')
        with self.assertRaisesMessage(CommandError, 'case'):
            self.run_command('run', config=str(path), out=str(self.tmp / 'x'))

    def test_unknown_key_suggests_nearest(self):
        """Test d'une clé inconnue avec suggestion"""
        with self.assertRaisesMessage(CommandError, "Vouliez-vous dire 'learning_rate'"):
            self.run_command('run', config=str(self.write_config(learnin_rate=0.1)), out=str(self.tmp / 'x'))

    def test_invalid_value_names_the_key(self):
        """Test d'une valeur hors bornes"""
        with self.assertRaisesMessage(CommandError, 'n_data'):
            self.run_command('run', config=str(self.write_config(n_data=0)), out=str(self.tmp / 'x'))

    def test_config_or_preset_required(self):
        """Test de l'absence de --config et de --preset"""
        with self.assertRaises(CommandError):
            self.run_command('run')


class ArtifactCommandTest(CommandTestCase):
    """Tests des commandes report, export_grid et export_profile"""

    def setUp(self):
        super().setUp()
        self.out_dir = self.tmp / 'runs'
        self.run_command('run', config=str(self.write_config()), out=str(self.out_dir))
        self.da_pinn = self.out_dir / 'da-pinn'
        self.baseline = self.out_dir / 'baseline'

    def test_report(self):
        """Test du tableau comparatif"""
        csv_path = self.tmp / 'table.csv'
        output = self.run_command('report', str(self.da_pinn), str(self.baseline), out=str(csv_path))
        self.assertIn('da-PINN', output)
        self.assertIn('PINNs', output)
        table = pd.read_csv(csv_path)
        self.assertEqual(sorted(set(table['champ'])), ['E_Y', 'H_Z'])
        self.assertEqual(len(table), 4)
        self.assertEqual(int(table['meilleur'].sum()), 2)

    def test_report_incomplete_run(self):
        """Test d'un répertoire de run incomplet"""
        (self.baseline / 'metrics.json').unlink()
        with self.assertRaisesMessage(CommandError, 'metrics.json'):
            self.run_command('report', str(self.da_pinn), str(self.baseline))

    def test_export_grid(self):
        """Test de l'export d'une grille d'erreur"""
        grid_dir = self.tmp / 'grids'
        self.run_command('export_grid', run=str(self.da_pinn), field='H_Z', nx=7, nt=3, out=str(grid_dir))
        frame = pd.read_csv(grid_dir / 'errors_H_Z.csv', index_col=0)
        self.assertEqual(frame.shape, (3, 7))
        self.assertEqual(frame.index.name, 't')
        self.assertTrue((frame.to_numpy() >= 0).all())

    def test_export_grid_unknown_field(self):
        """Test d'un champ absent du cas 1D"""
        with self.assertRaisesMessage(CommandError, 'E_X'):
            self.run_command('export_grid', run=str(self.da_pinn), field='E_X')

    def test_export_profile(self):
        """Test de l'export des profils μ(x), ε(x)"""
        path = self.tmp / 'profile.csv'
        self.run_command('export_profile', run=str(self.da_pinn), nx=11, out=str(path))
        frame = pd.read_csv(path)
        self.assertEqual(list(frame.columns), ['x', 'mu_true', 'eps_true', 'mu_est', 'eps_est'])
        self.assertEqual(len(frame), 11)
        self.assertEqual(frame['mu_true'].iloc[0], 1.0)
        self.assertEqual(frame['mu_true'].iloc[-1], 9.0)

    def test_parameter_table_matches_checkpoint(self):
        """Test du tableau des paramètres recalculé depuis le checkpoint"""
        model, _, _ = load_checkpoint(self.da_pinn / 'checkpoint.json')
        table = pd.read_csv(self.da_pinn / 'parameters.csv', float_precision='round_trip')
        estimate = model.material.as_dict()
        for _, row in table.iterrows():
            self.assertEqual(row['estimation'], estimate[row['parametre']])
            expected = 100.0 * abs(row['estimation'] - row['valeur_vraie']) / abs(row['valeur_vraie'])
            self.assertAlmostEqual(row['erreur_relative_pct'], expected, delta=1e-12 * max(expected, 1.0))


class Maxwell2DCommandTest(CommandTestCase):
    """Tests des commandes sur le cas 2D: grilles par tranche de temps"""

    def setUp(self):
        super().setUp()
        self.out_dir = self.tmp / 'runs2d'
        config = self.write_config(case='maxwell2d', grid={'nx': 5, 't_values': [0.5, 1.5]})
        self.run_command('run', config=str(config), out=str(self.out_dir))
        self.da_pinn = self.out_dir / 'da-pinn'
        self.baseline = self.out_dir / 'baseline'

    def test_run_writes_one_grid_per_slice(self):
        """Test des fichiers errors_<champ>_t<k>.csv"""
        for field in ('E_X', 'E_Y', 'H_Z'):
            for k in (0, 1):
                frame = pd.read_csv(self.da_pinn / f'errors_{field}_t{k}.csv', index_col=0)
                self.assertEqual(frame.shape, (5, 5))
                self.assertEqual(frame.index.name, 'y')
            self.assertFalse((self.da_pinn / f'errors_{field}_t2.csv').exists())
        metrics = json.loads((self.da_pinn / 'metrics.json').read_text())
        self.assertEqual(metrics['mode'], 'da-pinn')

    def test_report_covers_three_fields(self):
        """Test du tableau comparatif 2D"""
        csv_path = self.tmp / 'table2d.csv'
        self.run_command('report', str(self.da_pinn), str(self.baseline), out=str(csv_path))
        table = pd.read_csv(csv_path)
        self.assertEqual(sorted(set(table['champ'])), ['E_X', 'E_Y', 'H_Z'])
        self.assertEqual(len(table), 6)
        self.assertEqual(int(table['meilleur'].sum()), 3)

    def test_missing_slice_is_reported(self):
        """Test d'une tranche de grille manquante"""
        (self.baseline / 'errors_H_Z_t1.csv').unlink()
        with self.assertRaisesMessage(CommandError, 'errors_H_Z_t1.csv'):
            self.run_command('report', str(self.da_pinn), str(self.baseline))

    def test_export_grid_slices(self):
        """Test de l'export 2D avec un nombre de tranches choisi"""
        grid_dir = self.tmp / 'grids2d'
        self.run_command('export_grid', run=str(self.da_pinn), field='E_X', nx=4, nt=3, out=str(grid_dir))
        for k in range(3):
            frame = pd.read_csv(grid_dir / f'errors_E_X_t{k}.csv', index_col=0)
            self.assertEqual(frame.shape, (4, 4))
            self.assertTrue((frame.to_numpy() >= 0).all())


class PresetTest(SimpleTestCase):
    """Tests des préréglages et de l'ordre de priorité"""

    def test_published_presets(self):
        """Test des préréglages 1D et 2D"""
        one = resolve({}, {'preset': 'paper-1d'})
        self.assertEqual((one['case'], one['n_data'], one['hidden_layers']), ('maxwell1d', 2000, [30] * 5))
        self.assertEqual(one['initial_material']['mu2'], 13.0)
        two = resolve({'preset': 'paper-2d'})
        self.assertEqual((two['case'], two['hidden_layers']), ('maxwell2d', [50] * 8))
        reduced = resolve({'preset': 'paper-2d-reduced'})
        self.assertEqual((reduced['n_data'], reduced['hidden_layers']), (4000, [40] * 6))

    def test_file_and_options_override_preset(self):
        """Test de la priorité défaut < préréglage < fichier < options"""
        values = resolve({'preset': 'paper-1d', 'n_data': 100, 'seed': 4}, {'seed': 9, 'mode': None})
        self.assertEqual((values['n_data'], values['seed'], values['mode']), (100, 9, 'da-pinn'))
        self.assertEqual(values['preset'], 'paper-1d')

    def test_unknown_preset(self):
        """Test d'un préréglage inconnu"""
        with self.assertRaisesMessage(ConfigurationError, 'paper-1d'):
            resolve({'preset': 'paper-3d'})
