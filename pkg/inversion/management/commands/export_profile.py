from django.core.management.base import BaseCommand, CommandError

from inversion.exceptions import InversionError
from inversion.services.experiment_service import ExperimentService


class Command(BaseCommand):
    help = "Exporte les profils μ(x), ε(x) vrais et estimés d'un run"

    def add_arguments(self, parser):
        parser.add_argument('--run', required=True, help='Répertoire du run')
        parser.add_argument('--nx', type=int, default=201, help='Nombre de points en x')
        parser.add_argument('--out', help='Fichier CSV (défaut: <run>/profile.csv)')

    def handle(self, *args, **options):
        try:
            path = ExperimentService(record_runs=False).export_profile(options['run'], options['nx'], options['out'])
        except (InversionError, OSError) as e:
            raise CommandError(str(e))
        self.stdout.write(self.style.SUCCESS(f'Profil écrit: {path}'))
