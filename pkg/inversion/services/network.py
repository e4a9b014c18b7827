"""
Sous-réseaux entièrement connectés Net_i approchant les champs de chaque sous-domaine
"""
import logging
from dataclasses import dataclass, replace
from typing import Dict, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np

from ..exceptions import ConfigurationError, ShapeError
from .autodiff import Dual, Tape, Var

logger = logging.getLogger(__name__)

ACTIVATIONS = ('relu', 'tanh')
CHECKPOINT_FORMAT_VERSION = 1


@dataclass(frozen=True)
class NetworkParams:
    """
    Poids et biais d'un réseau: couche l = (W de forme (entrées, sorties), b de forme (sorties,)).
    La dernière couche est linéaire. `input_lower`/`input_upper` activent la
    mise à l'échelle affine des entrées vers [-1, 1].
    """
    layers: Tuple[Tuple[np.ndarray, np.ndarray], ...]
    activation: str = 'relu'
    input_lower: Optional[np.ndarray] = None
    input_upper: Optional[np.ndarray] = None

    def __post_init__(self):
        if self.activation not in ACTIVATIONS:
            raise ConfigurationError(
                f"Activation inconnue '{self.activation}' (attendu: {', '.join(ACTIVATIONS)})"
            )
        if not self.layers:
            raise ConfigurationError("Un réseau doit contenir au moins une couche")
        for i, (weights, bias) in enumerate(self.layers):
            if weights.ndim != 2 or bias.shape != (weights.shape[1],):
                raise ShapeError(f"Couche {i}: poids {weights.shape} et biais {bias.shape} incompatibles")
            if i > 0 and weights.shape[0] != self.layers[i - 1][0].shape[1]:
                raise ShapeError(
                    f"Couche {i}: {weights.shape[0]} entrées pour {self.layers[i - 1][0].shape[1]} sorties précédentes"
                )
            if not (np.all(np.isfinite(weights)) and np.all(np.isfinite(bias))):
                raise ShapeError(f"Couche {i}: valeurs non finies")

    @property
    def input_dim(self) -> int:
        return self.layers[0][0].shape[0]

    @property
    def output_dim(self) -> int:
        return self.layers[-1][0].shape[1]

    @property
    def sizes(self) -> List[int]:
        return [self.input_dim] + [w.shape[1] for w, _ in self.layers]

    @property
    def input_scaling(self) -> Optional[Tuple[np.ndarray, np.ndarray]]:
        """(facteur, décalage) de la mise à l'échelle vers [-1, 1], ou None"""
        if self.input_lower is None or self.input_upper is None:
            return None
        scale = 2.0 / (self.input_upper - self.input_lower)
        shift = -1.0 - self.input_lower * scale
        return scale, shift

    def leaves(self, prefix: str) -> Dict[str, np.ndarray]:
        """Paramètres à plat, nommés pour la bande et l'optimiseur"""
        named = {}
        for i, (weights, bias) in enumerate(self.layers):
            named[f"{prefix}.W{i}"] = weights
            named[f"{prefix}.b{i}"] = bias
        return named

    def with_leaves(self, prefix: str, values: Mapping[str, np.ndarray]) -> 'NetworkParams':
        layers = tuple(
            (np.asarray(values[f"{prefix}.W{i}"], dtype=np.float64),
             np.asarray(values[f"{prefix}.b{i}"], dtype=np.float64))
            for i in range(len(self.layers))
        )
        return replace(self, layers=layers)

    def register(self, tape: Tape, prefix: str) -> List[Tuple[Var, Var]]:
        """Enregistre les poids comme feuilles de la bande"""
        return [
            (tape.leaf(f"{prefix}.W{i}", weights), tape.leaf(f"{prefix}.b{i}", bias))
            for i, (weights, bias) in enumerate(self.layers)
        ]


def init_network(sizes: Sequence[int], activation: str = 'relu', seed: Optional[int] = None,
                 input_bounds: Optional[Tuple[Sequence[float], Sequence[float]]] = None,
                 rng: Optional[np.random.Generator] = None) -> NetworkParams:
    """
    Initialise un réseau [entrées, cachées..., sorties].

    Poids uniformes: ±sqrt(6/(fan_in+fan_out)) pour tanh, ±sqrt(6/fan_in)
    (variance 2/fan_in) pour ReLU. Biais nuls. Déterministe pour une graine donnée.
    """
    sizes = [int(s) for s in sizes]
    if len(sizes) < 3:
        raise ConfigurationError(f"Au moins une couche cachée requise, reçu {sizes}")
    if any(s <= 0 for s in sizes):
        raise ConfigurationError(f"Couche de largeur nulle ou négative: {sizes}")
    if activation not in ACTIVATIONS:
        raise ConfigurationError(f"Activation inconnue '{activation}' (attendu: {', '.join(ACTIVATIONS)})")

    rng = rng if rng is not None else np.random.default_rng(seed)
    layers = []
    for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
        if activation == 'tanh':
            limit = np.sqrt(6.0 / (fan_in + fan_out))
        else:
            limit = np.sqrt(6.0 / fan_in)
        weights = rng.uniform(-limit, limit, size=(fan_in, fan_out))
        layers.append((weights, np.zeros(fan_out)))

    lower = upper = None
    if input_bounds is not None:
        lower = np.asarray(input_bounds[0], dtype=np.float64)
        upper = np.asarray(input_bounds[1], dtype=np.float64)
        if lower.shape != (sizes[0],) or upper.shape != (sizes[0],) or np.any(upper <= lower):
            raise ConfigurationError(f"Bornes d'entrée invalides: {lower} / {upper}")
    return NetworkParams(tuple(layers), activation, lower, upper)


def _as_inputs(params: NetworkParams, inputs) -> np.ndarray:
    x = np.asarray(inputs, dtype=np.float64)
    if x.ndim == 1:
        x = x.reshape(1, -1)
    if x.ndim != 2 or x.shape[1] != params.input_dim:
        raise ShapeError(f"Entrée de forme {x.shape}, attendu (n, {params.input_dim})")
    return x


def forward(params: NetworkParams, inputs) -> np.ndarray:
    """Composition MLP standard, dernière couche linéaire. Retourne (n, sorties)."""
    h = _as_inputs(params, inputs)
    scaling = params.input_scaling
    if scaling is not None:
        h = h * scaling[0] + scaling[1]
    last = len(params.layers) - 1
    for i, (weights, bias) in enumerate(params.layers):
        h = h @ weights + bias
        if i < last:
            h = np.maximum(h, 0.0) if params.activation == 'relu' else np.tanh(h)
    return h


def forward_recorded(params: NetworkParams, layer_vars: Sequence[Tuple[Var, Var]],
                     inputs: Union[Var, Dual]) -> Union[Var, Dual]:
    """
    Même composition que `forward`, enregistrée sur la bande. Avec une entrée
    `Dual`, les tangentes (lignes de la jacobienne) suivent couche par couche:
    J <- (J W) * sigma'(z).
    """
    h = inputs
    scaling = params.input_scaling
    if scaling is not None:
        h = h * scaling[0] + scaling[1]
    last = len(layer_vars) - 1
    for i, (weights, bias) in enumerate(layer_vars):
        h = h @ weights + bias
        if i < last:
            h = h.relu() if params.activation == 'relu' else h.tanh()
    return h


def forward_with_derivatives(params: NetworkParams, inputs) -> Tuple[np.ndarray, np.ndarray]:
    """
    Valeurs et jacobienne exacte par rapport aux entrées.

    Returns:
        (valeurs (n, sorties), jacobienne (n, sorties, entrées))
    """
    x = _as_inputs(params, inputs)
    tape = Tape()
    layer_vars = params.register(tape, 'net')
    out = forward_recorded(params, layer_vars, Dual.seed(tape.constant(x), range(params.input_dim)))
    jacobian = np.stack([out.tangent(j).value for j in range(params.input_dim)], axis=-1)
    # les tangentes (1, sorties) d'un réseau affine se diffusent sur les n points
    jacobian = np.broadcast_to(jacobian, (x.shape[0], params.output_dim, params.input_dim)).copy()
    return out.primal.value, jacobian


# ============================================================================
# SÉRIALISATION
# ============================================================================

def network_to_dict(params: NetworkParams) -> Dict:
    """Architecture et valeurs (ordre ligne par ligne), avec version de format"""
    payload = {
        'format_version': CHECKPOINT_FORMAT_VERSION,
        'activation': params.activation,
        'input_bounds': None,
        'layers': [
            {
                'shape': list(weights.shape),
                'weights': weights.ravel(order='C').tolist(),
                'bias': bias.tolist(),
            }
            for weights, bias in params.layers
        ],
    }
    if params.input_lower is not None:
        payload['input_bounds'] = {
            'lower': params.input_lower.tolist(),
            'upper': params.input_upper.tolist(),
        }
    return payload


def network_from_dict(payload: Mapping) -> NetworkParams:
    version = payload.get('format_version')
    if version != CHECKPOINT_FORMAT_VERSION:
        raise ConfigurationError(
            f"Version de format de réseau non supportée: {version} (attendu {CHECKPOINT_FORMAT_VERSION})"
        )
    layers = []
    for layer in payload['layers']:
        rows, cols = layer['shape']
        weights = np.asarray(layer['weights'], dtype=np.float64).reshape(rows, cols)
        layers.append((weights, np.asarray(layer['bias'], dtype=np.float64)))
    bounds = payload.get('input_bounds')
    lower = upper = None
    if bounds:
        lower = np.asarray(bounds['lower'], dtype=np.float64)
        upper = np.asarray(bounds['upper'], dtype=np.float64)
    return NetworkParams(tuple(layers), payload['activation'], lower, upper)
