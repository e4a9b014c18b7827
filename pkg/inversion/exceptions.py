"""
Exceptions de l'application inversion
"""
from typing import Iterable, Optional


class InversionError(ValueError):
    """Classe de base pour toutes les erreurs de l'application"""


class ConfigurationError(InversionError):
    """Configuration invalide (clé inconnue, valeur hors plage, architecture vide...)"""


class ShapeError(InversionError):
    """Dimensions incompatibles"""


class UnsupportedOperationError(InversionError):
    """Type d'opération inconnu du moteur de différentiation"""

    def __init__(self, op: str):
        self.op = op
        super().__init__(f"Opération non supportée: '{op}'")


class UnsupportedDirectionError(InversionError):
    """Direction de dérivation qui n'est pas un axe de coordonnées"""


class NumericalError(InversionError):
    """Valeur non finie rencontrée sur la bande d'enregistrement"""

    def __init__(self, message: str, node_index: Optional[int] = None):
        self.node_index = node_index
        super().__init__(message)


class NonFiniteGradientError(InversionError):
    """Gradient non fini transmis à l'optimiseur"""

    def __init__(self, block: str):
        self.block = block
        super().__init__(f"Gradient non fini pour le bloc de paramètres '{block}'")


class TrainingDivergedError(InversionError):
    """Perte non finie pendant l'entraînement"""

    def __init__(self, iteration: int, checkpoint_path: Optional[str] = None):
        self.iteration = iteration
        self.checkpoint_path = checkpoint_path
        message = f"Perte non finie à l'itération {iteration}"
        if checkpoint_path:
            message += f" (dernier état valide: {checkpoint_path})"
        super().__init__(message)


class DomainRangeError(InversionError):
    """Point hors du domaine espace-temps du cas étudié"""


class PreconditionError(InversionError):
    """Précondition d'appel non respectée"""


class UndefinedMetricError(InversionError):
    """Métrique non définie (norme de référence nulle)"""


class IncompleteArtifactsError(InversionError):
    """Répertoire de run incomplet"""

    def __init__(self, run_dir: str, missing: Iterable[str]):
        self.run_dir = run_dir
        self.missing = sorted(missing)
        super().__init__(
            f"Artefacts manquants dans {run_dir}: {', '.join(self.missing)}"
        )


class UnknownFieldError(InversionError):
    """Nom de champ inconnu pour le cas étudié"""

    def __init__(self, field: str, available: Iterable[str]):
        self.field = field
        self.available = list(available)
        super().__init__(
            f"Champ inconnu '{field}'. Champs disponibles: {', '.join(self.available)}"
        )
