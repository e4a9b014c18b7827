import difflib
from typing import Dict

from rest_framework import serializers

from .exceptions import ConfigurationError
from .models import ExperimentRun
from .presets import DEFAULTS, PRESETS
from .services.analytic import CASES
from .services.network import ACTIVATIONS
from .services.trainer import STOP_CRITERIA

RUN_MODES = ('da-pinn', 'baseline', 'both')


class MaterialSerializer(serializers.Serializer):
    """Vecteur λ = [μ₁, ε₁, μ₂, ε₂, d]"""
    mu1 = serializers.FloatField()
    eps1 = serializers.FloatField()
    mu2 = serializers.FloatField()
    eps2 = serializers.FloatField()
    d = serializers.FloatField()


class GridSerializer(serializers.Serializer):
    """Grille d'évaluation; None = grille par défaut du cas"""
    nx = serializers.IntegerField(min_value=2, allow_null=True, required=False)
    nt = serializers.IntegerField(min_value=1, allow_null=True, required=False)
    t_values = serializers.ListField(child=serializers.FloatField(min_value=0), allow_null=True, required=False)


class ExperimentConfigSerializer(serializers.Serializer):
    """Validation de la configuration résolue d'une expérience"""
    case = serializers.ChoiceField(choices=list(CASES))
    preset = serializers.ChoiceField(choices=list(PRESETS), allow_null=True, required=False)
    mode = serializers.ChoiceField(choices=RUN_MODES)
    seed = serializers.IntegerField(min_value=0)
    learning_rate = serializers.FloatField()
    lr_network = serializers.FloatField(allow_null=True, required=False)
    lr_material = serializers.FloatField(allow_null=True, required=False)
    max_iterations = serializers.IntegerField(min_value=1)
    resample_every = serializers.IntegerField(min_value=1)
    weight_data = serializers.FloatField(min_value=0)
    weight_physics = serializers.FloatField(min_value=0)
    weight_interface = serializers.FloatField(min_value=0)
    clamp_margin = serializers.FloatField(allow_null=True, required=False)
    stop_criterion = serializers.ChoiceField(choices=STOP_CRITERIA)
    plateau_window = serializers.IntegerField(min_value=1)
    plateau_threshold = serializers.FloatField(min_value=0)
    initial_material = MaterialSerializer()
    hidden_layers = serializers.ListField(child=serializers.IntegerField(min_value=1), min_length=1)
    activation = serializers.ChoiceField(choices=ACTIVATIONS)
    input_scaling = serializers.BooleanField()
    n_data = serializers.IntegerField(min_value=1)
    n_collocation_1 = serializers.IntegerField(min_value=1)
    n_collocation_2 = serializers.IntegerField(min_value=1)
    n_interface = serializers.IntegerField(min_value=1)
    noise_sd = serializers.FloatField(min_value=0)
    output_dir = serializers.CharField(allow_null=True, required=False)
    grid = GridSerializer()
    log_every = serializers.IntegerField(min_value=1)

    def _strictly_positive(self, value, name):
        if value is not None and not value > 0:
            raise serializers.ValidationError(f"{name} doit être strictement positif (reçu {value}).")
        return value

    def validate_learning_rate(self, value):
        """η > 0"""
        return self._strictly_positive(value, 'learning_rate')

    def validate_lr_network(self, value):
        return self._strictly_positive(value, 'lr_network')

    def validate_lr_material(self, value):
        return self._strictly_positive(value, 'lr_material')

    def validate_clamp_margin(self, value):
        return self._strictly_positive(value, 'clamp_margin')


def check_unknown_keys(values: Dict, allowed=None, prefix: str = '') -> None:
    """Rejette toute clé inconnue en proposant la clé valide la plus proche"""
    allowed = list(DEFAULTS) if allowed is None else list(allowed)
    for key, value in values.items():
        if key not in allowed:
            nearest = difflib.get_close_matches(key, allowed, n=1)
            hint = f" Vouliez-vous dire '{prefix}{nearest[0]}' ?" if nearest else ""
            raise ConfigurationError(f"Clé de configuration inconnue '{prefix}{key}'.{hint}")
        if isinstance(value, dict) and isinstance(DEFAULTS.get(key), dict) and not prefix:
            check_unknown_keys(value, DEFAULTS[key], prefix=f"{key}.")


def _flatten_errors(errors, prefix=''):
    if isinstance(errors, dict):
        for key, value in errors.items():
            yield from _flatten_errors(value, f"{prefix}{key}.")
    elif isinstance(errors, list) and errors and not isinstance(errors[0], str):
        for i, value in enumerate(errors):
            yield from _flatten_errors(value, f"{prefix}{i}.")
    else:
        messages = errors if isinstance(errors, list) else [errors]
        yield prefix.rstrip('.'), ' '.join(str(m) for m in messages)


def validate_experiment_config(values: Dict) -> Dict:
    """Configuration résolue -> données validées, ou ConfigurationError explicite"""
    check_unknown_keys(values)
    serializer = ExperimentConfigSerializer(data=values)
    if not serializer.is_valid():
        details = '; '.join(f"{key}: {message}" for key, message in _flatten_errors(serializer.errors))
        raise ConfigurationError(f"Configuration invalide - {details}")
    return dict(serializer.validated_data)


class ExperimentRunSerializer(serializers.ModelSerializer):
    """Serializer pour le modèle ExperimentRun"""
    statut_display = serializers.CharField(source='get_statut_display', read_only=True)

    class Meta:
        model = ExperimentRun
        fields = [
            'id', 'cas', 'mode', 'statut', 'statut_display', 'graine', 'repertoire',
            'parametres_estimes', 'erreurs_prediction', 'nombre_iterations',
            'duree_secondes', 'message_erreur', 'date_creation', 'date_fin'
        ]
        read_only_fields = fields


class ExperimentRunDetailSerializer(ExperimentRunSerializer):
    """Détail d'un run, configuration résolue comprise"""

    class Meta(ExperimentRunSerializer.Meta):
        fields = ExperimentRunSerializer.Meta.fields + ['configuration']
        read_only_fields = fields


class ParameterRowSerializer(serializers.Serializer):
    """Ligne du tableau d'estimation des paramètres"""
    parametre = serializers.CharField()
    estimation = serializers.FloatField()
    valeur_vraie = serializers.FloatField()
    erreur_relative_pct = serializers.FloatField()
