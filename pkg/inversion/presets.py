"""
Configuration par défaut et préréglages des expériences de référence
"""
import copy
from typing import Dict

from .exceptions import ConfigurationError

# Jeu complet de valeurs par défaut; toute configuration résolue contient ces clés
DEFAULTS: Dict = {
    'case': None,
    'preset': None,
    'mode': 'da-pinn',
    'seed': 0,
    'learning_rate': 1e-3,
    'lr_network': None,
    'lr_material': None,
    'max_iterations': 50000,
    'resample_every': 1,
    'weight_data': 1.0,
    'weight_physics': 1.0,
    'weight_interface': 1.0,
    'clamp_margin': None,
    'stop_criterion': 'max-iterations',
    'plateau_window': 500,
    'plateau_threshold': 1e-8,
    'initial_material': {'mu1': 1.0, 'eps1': 1.0, 'mu2': 13.0, 'eps2': 0.0, 'd': 15.0},
    'hidden_layers': [30, 30, 30, 30, 30],
    'activation': 'relu',
    'input_scaling': False,
    'n_data': 2000,
    'n_collocation_1': 4000,
    'n_collocation_2': 4000,
    'n_interface': 2000,
    'noise_sd': 0.0,
    'output_dir': None,
    'grid': {'nx': None, 'nt': None, 't_values': None},
    'log_every': 1000,
}

PRESETS: Dict[str, Dict] = {
    'paper-1d': {
        'case': 'maxwell1d',
        'n_data': 2000,
        'n_collocation_1': 4000,
        'n_collocation_2': 4000,
        'n_interface': 2000,
        'hidden_layers': [30] * 5,
        'activation': 'relu',
        'initial_material': {'mu1': 1.0, 'eps1': 1.0, 'mu2': 13.0, 'eps2': 0.0, 'd': 15.0},
        'max_iterations': 50000,
        'input_scaling': True,
    },
    'paper-2d': {
        'case': 'maxwell2d',
        'n_data': 8000,
        'n_collocation_1': 10000,
        'n_collocation_2': 10000,
        'n_interface': 5000,
        'hidden_layers': [50] * 8,
        'activation': 'relu',
        # d⁽⁰⁾ = 15 est hors de [0, 2π]: ramené dans [δ, B − δ] à la première itération
        'initial_material': {'mu1': 2.0, 'eps1': 1.0, 'mu2': 13.0, 'eps2': 0.0, 'd': 15.0},
        'max_iterations': 100000,
        'input_scaling': True,
    },
    'paper-2d-reduced': {
        'case': 'maxwell2d',
        'n_data': 4000,
        'n_collocation_1': 5000,
        'n_collocation_2': 5000,
        'n_interface': 2500,
        'hidden_layers': [40] * 6,
        'activation': 'relu',
        'initial_material': {'mu1': 2.0, 'eps1': 1.0, 'mu2': 13.0, 'eps2': 0.0, 'd': 15.0},
        'max_iterations': 100000,
        'input_scaling': True,
    },
}


def get_preset(name: str) -> Dict:
    try:
        return copy.deepcopy(PRESETS[name])
    except KeyError:
        raise ConfigurationError(
            f"Préréglage inconnu '{name}' (disponibles: {', '.join(PRESETS)})"
        ) from None


def resolve(file_values: Dict, overrides: Dict = None) -> Dict:
    """
    Fusionne défauts < préréglage < fichier < options de ligne de commande.
    Les valeurs None des options sont ignorées.
    """
    overrides = {k: v for k, v in (overrides or {}).items() if v is not None}
    preset_name = overrides.get('preset', file_values.get('preset'))
    resolved = copy.deepcopy(DEFAULTS)
    if preset_name:
        resolved.update(get_preset(preset_name))
    for layer in (file_values, overrides):
        for key, value in layer.items():
            if isinstance(value, dict) and isinstance(resolved.get(key), dict):
                resolved[key] = {**resolved[key], **value}
            else:
                resolved[key] = copy.deepcopy(value)
    resolved['preset'] = preset_name
    return resolved
