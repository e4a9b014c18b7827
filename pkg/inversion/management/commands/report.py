"""
Commande Django de comparaison de runs
"""
import logging
from pathlib import Path

from django.core.management.base import BaseCommand, CommandError

from inversion.exceptions import InversionError
from inversion.services.experiment_service import ExperimentService

logger = logging.getLogger(__name__)


class Command(BaseCommand):
    help = "Tableau des erreurs de prédiction (l2 relative) par méthode et par champ"

    def add_arguments(self, parser):
        parser.add_argument('run_dirs', nargs='+', help='Répertoires de runs')
        parser.add_argument('--out', help='Fichier CSV du tableau comparatif')

    def handle(self, *args, **options):
        try:
            report = ExperimentService(record_runs=False).report(options['run_dirs'])
        except (InversionError, OSError) as e:
            logger.error(f"Erreur lors du rapport: {e}")
            raise CommandError(f"Erreur lors du rapport: {e}")

        if options['out']:
            path = Path(options['out'])
            report.table.to_csv(path, index=False, float_format='%.17g')
            path.with_suffix('.txt').write_text(report.render() + '\n', encoding='utf-8')
            self.stdout.write(self.style.SUCCESS(f'Tableau écrit dans {path}'))
        self.stdout.write(report.render())
