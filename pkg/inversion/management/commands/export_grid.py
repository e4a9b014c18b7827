from django.core.management.base import BaseCommand, CommandError

from inversion.exceptions import InversionError
from inversion.services.experiment_service import ExperimentService


class Command(BaseCommand):
    help = "Exporte la grille |u − û| d'un champ pour un run"

    def add_arguments(self, parser):
        parser.add_argument('--run', required=True, help='Répertoire du run')
        parser.add_argument('--field', required=True, help='Champ (E_Y, H_Z, E_X)')
        parser.add_argument('--nx', type=int, help='Points en x (et en y en 2D)')
        parser.add_argument('--nt', type=int, help='Points en t (tranches de temps en 2D)')
        parser.add_argument('--out', help='Répertoire de sortie (défaut: le run)')

    def handle(self, *args, **options):
        for name in ('nx', 'nt'):
            if options[name] is not None and options[name] < 1:
                raise CommandError(f"--{name} doit être ≥ 1")
        try:
            paths = ExperimentService(record_runs=False).export_grid(
                options['run'], options['field'], options['nx'], options['nt'], options['out'],
            )
        except (InversionError, OSError) as e:
            raise CommandError(str(e))
        for path in paths:
            self.stdout.write(self.style.SUCCESS(f'Grille écrite: {path}'))
