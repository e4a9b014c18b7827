"""
Commande Django pour l'exécution d'une expérience d'inversion
"""
import logging

from django.core.management.base import BaseCommand, CommandError
from django.utils import timezone

from inversion.exceptions import InversionError
from inversion.serializers import RUN_MODES
from inversion.services.experiment_service import ExperimentService

logger = logging.getLogger(__name__)


class Command(BaseCommand):
    help = "Entraîne da-PINN et/ou le PINN de référence et écrit les artefacts du run"

    def add_arguments(self, parser):
        parser.add_argument('--config', help='Fichier de configuration JSON')
        parser.add_argument('--preset', help='Préréglage (paper-1d, paper-2d, paper-2d-reduced)')
        parser.add_argument('--seed', type=int, help='Graine aléatoire')
        parser.add_argument('--iters', type=int, help="Nombre maximal d'itérations")
        parser.add_argument('--mode', choices=RUN_MODES, help='da-pinn, baseline ou both')
        parser.add_argument('--out', help='Répertoire de sortie')

    def handle(self, *args, **options):
        """Point d'entrée de la commande"""
        if not options['config'] and not options['preset']:
            raise CommandError("--config ou --preset est requis")
        overrides = {
            'preset': options['preset'],
            'seed': options['seed'],
            'max_iterations': options['iters'],
            'mode': options['mode'],
            'output_dir': options['out'],
        }
        self.stdout.write(
            self.style.SUCCESS(f'=== RUN - {timezone.now().strftime("%Y-%m-%d %H:%M:%S")} ===')
        )
        try:
            artifacts = ExperimentService().run(options['config'], overrides)
        except (InversionError, OSError) as e:
            logger.error(f"Erreur lors du run: {e}")
            raise CommandError(f"Erreur lors du run: {e}")

        for run in artifacts:
            self.stdout.write(f"\n📁 {run.mode}: {run.run_dir}")
            self.stdout.write('Estimation des paramètres:')
            self.stdout.write(run.parameters.to_string(index=False))
            self.stdout.write('Erreurs de prédiction (l2 relative):')
            self.stdout.write(run.field_errors.to_string(index=False))
        self.stdout.write(self.style.SUCCESS('✅ Run terminé avec succès!'))
