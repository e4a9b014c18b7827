"""
Entraînement conjoint des sous-réseaux et des paramètres matériaux λ.

Boucle à adaptation de domaine: à chaque itération l'interface d est bornée,
les données sont redécoupées selon x ≤ d, les points de collocation sont
réexprimés en fonction de d, puis un pas d'Adam met à jour (θ₁, θ₂, λ).
La référence (PINN classique) utilise un seul réseau sur tout Ω.
"""
import json
import logging
import math
import time
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Dict, List, Mapping, NamedTuple, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd
from joblib import Parallel, delayed

from ..exceptions import (
    ConfigurationError, DomainRangeError, NonFiniteGradientError, NumericalError,
    ShapeError, TrainingDivergedError,
)
from .autodiff import Dual, Gradient, Tape, Var, backward, record
from .network import NetworkParams, forward, forward_recorded, init_network, network_from_dict, network_to_dict
from .physics import (
    CaseGeometry, MATERIAL_NAMES, MaterialParams, derivative_map, interface_residual,
    residual, squared_norm,
)
from .sampler import (
    CollocationSet, FieldDataset, SampleBatch, SamplerConfig, build_batch,
    sample_collocation, sample_uniform_collocation,
)

logger = logging.getLogger(__name__)

MODES = ('da-pinn', 'baseline')
STOP_CRITERIA = ('max-iterations', 'plateau')
CHECKPOINT_FORMAT_VERSION = 1
TRACE_COLUMNS = ['iter', 'loss_d', 'loss_p', 'loss_i', 'total', 'mu1', 'eps1', 'mu2', 'eps2', 'd', 'ms']

# Préfixes des blocs de paramètres réseau
PREFIXES = {
    'da-pinn': ('net1', 'net2'),
    'baseline': ('net',),
}


class LossWeights(NamedTuple):
    data: float = 1.0
    physics: float = 1.0
    interface: float = 1.0


class LossBreakdown(NamedTuple):
    """Composantes de la perte composite"""
    loss_d: float
    loss_p: float
    loss_i: float
    total: float
    empty_d1: bool = False
    empty_d2: bool = False


@dataclass(frozen=True)
class TrainConfig:
    """Hyperparamètres d'entraînement"""
    mode: str = 'da-pinn'
    learning_rate: float = 1e-3
    lr_network: Optional[float] = None
    lr_material: Optional[float] = None
    max_iterations: int = 50000
    resample_every: int = 1
    weights: LossWeights = LossWeights()
    clamp_margin: Optional[float] = None
    stop_criterion: str = 'max-iterations'
    plateau_window: int = 500
    plateau_threshold: float = 1e-8
    initial_material: MaterialParams = MaterialParams(1.0, 1.0, 13.0, 0.0, 15.0)
    hidden_layers: Tuple[int, ...] = (30, 30, 30, 30, 30)
    activation: str = 'relu'
    input_scaling: bool = False
    seed: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    adam_eps: float = 1e-8
    n_jobs: int = 1
    chunk_size: int = 2048
    log_every: int = 1000

    def __post_init__(self):
        if self.mode not in MODES:
            raise ConfigurationError(f"Mode inconnu '{self.mode}' (attendu: {', '.join(MODES)})")
        if self.stop_criterion not in STOP_CRITERIA:
            raise ConfigurationError(
                f"Critère d'arrêt inconnu '{self.stop_criterion}' (attendu: {', '.join(STOP_CRITERIA)})"
            )
        # η = 0 reste accepté ici: exécution figée utilisée pour les contrôles
        for name in ('learning_rate', 'lr_network', 'lr_material'):
            value = getattr(self, name)
            if value is not None and not (value >= 0 and math.isfinite(value)):
                raise ConfigurationError(f"{name} doit être un réel ≥ 0, reçu {value}")
        if self.max_iterations < 0:
            raise ConfigurationError(f"max_iterations doit être ≥ 0, reçu {self.max_iterations}")
        if self.resample_every < 1 or self.plateau_window < 1 or self.chunk_size < 1 or self.log_every < 1:
            raise ConfigurationError("resample_every, plateau_window, chunk_size et log_every doivent être ≥ 1")
        if any(w < 0 for w in self.weights):
            raise ConfigurationError(f"Poids de perte négatifs: {tuple(self.weights)}")
        if not self.hidden_layers or any(h <= 0 for h in self.hidden_layers):
            raise ConfigurationError(f"Couches cachées invalides: {self.hidden_layers}")
        if not (0.0 <= self.beta1 < 1.0 and 0.0 <= self.beta2 < 1.0 and self.adam_eps > 0):
            raise ConfigurationError("β₁, β₂ doivent être dans [0, 1) et ε_adam > 0")

    def margin(self, geometry: CaseGeometry) -> float:
        """δ: marge de bornage de d, 0.02·B par défaut, dans (0, B/2)"""
        delta = 0.02 * geometry.x_max if self.clamp_margin is None else self.clamp_margin
        if not 0.0 < delta < geometry.x_max / 2:
            raise ConfigurationError(f"Marge δ={delta} hors de (0, {geometry.x_max / 2})")
        return delta

    def learning_rates(self) -> Dict[str, float]:
        return {
            'network': self.learning_rate if self.lr_network is None else self.lr_network,
            'material': self.learning_rate if self.lr_material is None else self.lr_material,
        }


# ============================================================================
# MODÈLES
# ============================================================================

@dataclass(frozen=True)
class NetworkModel:
    """Réseau dont les poids sont des feuilles nommées `{prefix}.W{i}` / `{prefix}.b{i}`"""
    params: NetworkParams
    prefix: str

    def leaves(self) -> Dict[str, np.ndarray]:
        return self.params.leaves(self.prefix)

    def apply(self, variables: Mapping[str, Var], inputs: Union[Var, Dual]) -> Union[Var, Dual]:
        layer_vars = [
            (variables[f"{self.prefix}.W{i}"], variables[f"{self.prefix}.b{i}"])
            for i in range(len(self.params.layers))
        ]
        return forward_recorded(self.params, layer_vars, inputs)


class MaterialVars(NamedTuple):
    mu1: Var
    eps1: Var
    mu2: Var
    eps2: Var
    d: Var


def material_leaves(lam: MaterialParams) -> Dict[str, np.ndarray]:
    return {name: np.array(value, dtype=np.float64) for name, value in lam.as_dict().items()}


@dataclass
class TrainedModel:
    """Réseaux estimés, λ̂ et géométrie du cas: tout ce qu'il faut pour prédire"""
    mode: str
    networks: Dict[str, NetworkParams]
    material: MaterialParams
    geometry: CaseGeometry

    def parameters(self) -> Dict[str, np.ndarray]:
        named = {}
        for prefix in PREFIXES[self.mode]:
            named.update(self.networks[prefix].leaves(prefix))
        named.update(material_leaves(self.material))
        return named

    def with_parameters(self, values: Mapping[str, np.ndarray]) -> 'TrainedModel':
        networks = {
            prefix: self.networks[prefix].with_leaves(prefix, values)
            for prefix in PREFIXES[self.mode]
        }
        material = MaterialParams.from_dict(values)
        return TrainedModel(self.mode, networks, material, self.geometry)

    def field_models(self) -> Tuple[NetworkModel, ...]:
        return tuple(NetworkModel(self.networks[p], p) for p in PREFIXES[self.mode])


# ============================================================================
# PERTE COMPOSITE
# ============================================================================

class WorkUnit(NamedTuple):
    """Tranche de points évaluée sur sa propre bande"""
    component: str   # data | physics | interface
    side: int        # 1 ou 2 (sous-domaine), 0 pour le réseau unique de référence
    start: int
    stop: int
    normalizer: int


def _chunks(component: str, side: int, count: int, chunk_size: int) -> List[WorkUnit]:
    return [
        WorkUnit(component, side, start, min(start + chunk_size, count), count)
        for start in range(0, count, chunk_size)
    ]


def work_units(batch: SampleBatch, mode: str, chunk_size: int) -> List[WorkUnit]:
    """
    Découpage déterministe des ensembles de points. Les bornes ne dépendent que
    de chunk_size, jamais du nombre de fils.
    """
    if mode == 'baseline':
        return _chunks('data', 0, len(batch.d_d1), chunk_size) + _chunks('physics', 0, len(batch.c_p1), chunk_size)
    units = []
    units += _chunks('data', 1, len(batch.d_d1), chunk_size)
    units += _chunks('data', 2, len(batch.d_d2), chunk_size)
    units += _chunks('physics', 1, len(batch.c_p1), chunk_size)
    units += _chunks('physics', 2, len(batch.c_p2), chunk_size)
    units += _chunks('interface', 0, len(batch.c_i), chunk_size)
    return units


def _data_term(unit: WorkUnit, tape: Tape, variables, models, batch: SampleBatch) -> Var:
    dataset = batch.d_d2 if unit.side == 2 else batch.d_d1
    model = models[1] if unit.side == 2 else models[0]
    part = slice(unit.start, unit.stop)
    out = model.apply(variables, tape.constant(dataset.inputs[part]))
    misfit = out - tape.constant(dataset.values[part])
    return misfit.square().sum() * (1.0 / unit.normalizer)


def _physics_term(unit: WorkUnit, tape: Tape, variables, models, batch: SampleBatch,
                  geometry: CaseGeometry) -> Var:
    collocation = (batch.c_p2 if unit.side == 2 else batch.c_p1).subset(slice(unit.start, unit.stop))
    model = models[1] if unit.side == 2 else models[0]
    inputs = collocation.input_expression(tape, variables['d'], geometry.x_max)
    out = model.apply(variables, Dual.seed(inputs, range(geometry.input_dim)))
    tangents = [out.tangent(axis) for axis in range(geometry.input_dim)]
    derivs = derivative_map(geometry.dimension, lambda fi, ci: tangents[ci].column(fi))

    if unit.side == 1:
        mu, eps = variables['mu1'], variables['eps1']
    elif unit.side == 2:
        mu, eps = variables['mu2'], variables['eps2']
    else:
        # masque figé x ≤ d: d ne reçoit aucun gradient dans la référence
        d = float(variables['d'].value)
        first = (collocation.x_values(d, geometry.x_max) <= d).astype(np.float64).reshape(-1, 1)
        inside, outside = tape.constant(first), tape.constant(1.0 - first)
        mu = inside * variables['mu1'] + outside * variables['mu2']
        eps = inside * variables['eps1'] + outside * variables['eps2']

    res = residual(geometry.dimension, derivs, mu, eps)
    return squared_norm(res).sum() * (1.0 / unit.normalizer)


def _interface_term(unit: WorkUnit, tape: Tape, variables, models, batch: SampleBatch,
                    geometry: CaseGeometry) -> Var:
    collocation = batch.c_i.subset(slice(unit.start, unit.stop))
    inputs = collocation.input_expression(tape, variables['d'], geometry.x_max)
    lam = MaterialVars(*(variables[name] for name in MATERIAL_NAMES))
    s = interface_residual(models[0].apply(variables, inputs), models[1].apply(variables, inputs), lam, geometry)
    return s.square().sum() * (1.0 / unit.normalizer)


def _term(unit: WorkUnit, tape: Tape, variables, models, batch, geometry) -> Var:
    if unit.component == 'data':
        return _data_term(unit, tape, variables, models, batch)
    if unit.component == 'physics':
        return _physics_term(unit, tape, variables, models, batch, geometry)
    return _interface_term(unit, tape, variables, models, batch, geometry)


def _leaves(models, lam: MaterialParams) -> Dict[str, np.ndarray]:
    named = {}
    for model in models:
        named.update(model.leaves())
    named.update(material_leaves(lam))
    return named


def _evaluate_unit(unit: WorkUnit, models, lam: MaterialParams, batch, geometry,
                   with_gradient: bool) -> Tuple[float, Optional[Gradient]]:
    tape = record(
        lambda variables: _term(unit, tape_of(variables), variables, models, batch, geometry),
        _leaves(models, lam),
    )
    value = float(tape.nodes[tape.output].value)
    return value, (backward(tape) if with_gradient else None)


def tape_of(variables: Mapping[str, Var]) -> Tape:
    return next(iter(variables.values())).tape


def _check_batch(batch: SampleBatch, mode: str, geometry: CaseGeometry) -> None:
    if mode == 'da-pinn' and len(batch.c_i) == 0:
        raise ConfigurationError("L'ensemble d'interface C_I est vide en mode da-pinn")
    for dataset in (batch.d_d1, batch.d_d2):
        if len(dataset) and dataset.inputs.shape[1] != geometry.input_dim:
            raise ShapeError(f"Données de dimension {dataset.inputs.shape[1]}, attendu {geometry.input_dim}")


def loss_and_gradient(models: Sequence, lam: MaterialParams, batch: SampleBatch,
                      geometry: CaseGeometry, weights: LossWeights = LossWeights(),
                      mode: str = 'da-pinn', chunk_size: int = 2048, n_jobs: int = 1,
                      with_gradient: bool = True) -> Tuple[LossBreakdown, Optional[Gradient]]:
    """
    Perte composite et gradient par rapport à toutes les feuilles (θ, λ).

    Chaque tranche est évaluée sur sa propre bande (joblib, fils), puis les
    contributions sont réduites dans l'ordre des tranches.
    """
    _check_batch(batch, mode, geometry)
    units = work_units(batch, mode, chunk_size)
    if n_jobs == 1:
        results = [_evaluate_unit(u, models, lam, batch, geometry, with_gradient) for u in units]
    else:
        results = Parallel(n_jobs=n_jobs, prefer='threads')(
            delayed(_evaluate_unit)(u, models, lam, batch, geometry, with_gradient) for u in units
        )

    components = {'data': 0.0, 'physics': 0.0, 'interface': 0.0}
    factors = {'data': weights.data, 'physics': weights.physics, 'interface': weights.interface}
    gradient = None
    if with_gradient:
        gradient = {name: np.zeros_like(value) for name, value in _leaves(models, lam).items()}
    for unit, (value, unit_gradient) in zip(units, results):
        components[unit.component] += value
        if unit_gradient is not None:
            factor = factors[unit.component]
            for name, g in unit_gradient.items():
                gradient[name] = gradient[name] + factor * g

    total = (weights.data * components['data'] + weights.physics * components['physics']
             + weights.interface * components['interface'])
    breakdown = LossBreakdown(
        components['data'], components['physics'], components['interface'], total,
        empty_d1=(mode == 'da-pinn' and len(batch.d_d1) == 0),
        empty_d2=(mode == 'da-pinn' and len(batch.d_d2) == 0),
    )
    return breakdown, gradient


def composite_loss(models: Sequence, lam: MaterialParams, batch: SampleBatch, geometry: CaseGeometry,
                   weights: LossWeights = LossWeights(), mode: str = 'da-pinn',
                   chunk_size: int = 2048, n_jobs: int = 1) -> LossBreakdown:
    """
    Loss_D: écart quadratique moyen aux mesures, par sous-domaine, sommé
    Loss_P: moyenne de ‖f̂‖² + ‖ĥ‖² sur C_P1 et C_P2, sommée
    Loss_I: moyenne de ŝ² sur C_I
    total = w_D·Loss_D + w_P·Loss_P + w_I·Loss_I
    """
    breakdown, _ = loss_and_gradient(models, lam, batch, geometry, weights, mode,
                                     chunk_size, n_jobs, with_gradient=False)
    return breakdown


def loss_program(models: Sequence, batch: SampleBatch, geometry: CaseGeometry,
                 weights: LossWeights = LossWeights(), mode: str = 'da-pinn'):
    """
    Perte totale sur une seule bande, sous forme de programme pour
    `check_gradient`. Le découpage des données et les tirages ν sont figés.
    """
    _check_batch(batch, mode, geometry)
    units = work_units(batch, mode, chunk_size=max(1, _largest_set(batch)))
    factors = {'data': weights.data, 'physics': weights.physics, 'interface': weights.interface}

    def program(variables: Mapping[str, Var]) -> Var:
        tape = tape_of(variables)
        total = None
        for unit in units:
            term = _term(unit, tape, variables, models, batch, geometry) * factors[unit.component]
            total = term if total is None else total + term
        return total if total is not None else variables['d'] * 0.0
    return program


def _largest_set(batch: SampleBatch) -> int:
    return max(len(batch.d_d1), len(batch.d_d2), len(batch.c_p1), len(batch.c_p2), len(batch.c_i))


# ============================================================================
# ADAM
# ============================================================================

@dataclass
class OptimizerState:
    """Moments d'ordre 1 et 2 par feuille et compteur de pas"""
    first_moment: Dict[str, np.ndarray] = field(default_factory=dict)
    second_moment: Dict[str, np.ndarray] = field(default_factory=dict)
    step: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    @classmethod
    def zeros_like(cls, params: Mapping[str, np.ndarray], beta1: float = 0.9, beta2: float = 0.999,
                   eps: float = 1e-8) -> 'OptimizerState':
        return cls(
            {name: np.zeros_like(value) for name, value in params.items()},
            {name: np.zeros_like(value) for name, value in params.items()},
            0, beta1, beta2, eps,
        )

    def to_dict(self) -> Dict:
        return {
            'step': self.step,
            'beta1': self.beta1,
            'beta2': self.beta2,
            'eps': self.eps,
            'first_moment': {k: {'shape': list(v.shape), 'values': v.ravel().tolist()}
                             for k, v in self.first_moment.items()},
            'second_moment': {k: {'shape': list(v.shape), 'values': v.ravel().tolist()}
                              for k, v in self.second_moment.items()},
        }

    @classmethod
    def from_dict(cls, payload: Mapping) -> 'OptimizerState':
        def arrays(section):
            return {k: np.asarray(v['values'], dtype=np.float64).reshape(v['shape'])
                    for k, v in payload[section].items()}
        return cls(arrays('first_moment'), arrays('second_moment'), int(payload['step']),
                   float(payload['beta1']), float(payload['beta2']), float(payload['eps']))


def _block_of(name: str) -> str:
    return 'material' if name in MATERIAL_NAMES else 'network'


def adam_step(state: OptimizerState, params: Mapping[str, np.ndarray], grads: Mapping[str, np.ndarray],
              learning_rate: Union[float, Mapping[str, float]]) -> Tuple[OptimizerState, Dict[str, np.ndarray]]:
    """
    Pas d'Adam avec correction de biais. `learning_rate` est un réel ou un
    dictionnaire {'network': η_θ, 'material': η_λ}. Ne modifie pas les entrées.
    """
    for name, g in grads.items():
        if name not in params or np.shape(g) != np.shape(params[name]):
            raise ShapeError(f"Gradient '{name}' de forme {np.shape(g)} incompatible avec le paramètre")
        if not np.all(np.isfinite(g)):
            logger.error(f"Gradient non fini pour '{name}' au pas {state.step + 1}")
            raise NonFiniteGradientError(name)

    step = state.step + 1
    b1, b2 = state.beta1, state.beta2
    correction_1 = 1.0 - b1 ** step
    correction_2 = 1.0 - b2 ** step
    first, second, updated = {}, {}, {}
    for name, value in params.items():
        g = np.asarray(grads.get(name, np.zeros_like(value)), dtype=np.float64)
        m = b1 * state.first_moment.get(name, np.zeros_like(value)) + (1.0 - b1) * g
        v = b2 * state.second_moment.get(name, np.zeros_like(value)) + (1.0 - b2) * g * g
        rate = learning_rate if not isinstance(learning_rate, Mapping) else learning_rate[_block_of(name)]
        updated[name] = value - rate * (m / correction_1) / (np.sqrt(v / correction_2) + state.eps)
        first[name], second[name] = m, v
    return OptimizerState(first, second, step, b1, b2, state.eps), updated


# ============================================================================
# TRACE
# ============================================================================

@dataclass(frozen=True)
class TraceRecord:
    iteration: int
    loss: LossBreakdown
    material: MaterialParams
    ms: float

    def as_row(self) -> Dict:
        row = {
            'iter': self.iteration,
            'loss_d': self.loss.loss_d,
            'loss_p': self.loss.loss_p,
            'loss_i': self.loss.loss_i,
            'total': self.loss.total,
        }
        row.update(self.material.as_dict())
        row['ms'] = self.ms
        return row


class TrainTrace:
    """
    Un enregistrement par itération. Avec un chemin, les lignes sont écrites
    dans le CSV au fil de l'eau (par paquets de `flush_every`).
    """

    def __init__(self, path: Optional[Union[str, Path]] = None, flush_every: int = 100):
        self.records: List[TraceRecord] = []
        self.path = Path(path) if path is not None else None
        self.flush_every = flush_every
        self._written = 0
        if self.path is not None:
            pd.DataFrame(columns=TRACE_COLUMNS).to_csv(self.path, index=False)

    def __len__(self) -> int:
        return len(self.records)

    def __iter__(self):
        return iter(self.records)

    def append(self, record: TraceRecord) -> None:
        self.records.append(record)
        if self.path is not None and len(self.records) - self._written >= self.flush_every:
            self.flush()

    def flush(self) -> None:
        if self.path is None or self._written == len(self.records):
            return
        pending = self.records[self._written:]
        frame = pd.DataFrame([r.as_row() for r in pending], columns=TRACE_COLUMNS)
        frame.to_csv(self.path, mode='a', header=False, index=False, float_format='%.17g')
        self._written = len(self.records)

    @property
    def empty_split_iterations(self) -> List[int]:
        return [r.iteration for r in self.records if r.loss.empty_d1 or r.loss.empty_d2]

    def to_dataframe(self) -> pd.DataFrame:
        return pd.DataFrame([r.as_row() for r in self.records], columns=TRACE_COLUMNS)

    @staticmethod
    def read_csv(path: Union[str, Path]) -> pd.DataFrame:
        return pd.read_csv(path, float_precision='round_trip')


# ============================================================================
# CHECKPOINTS
# ============================================================================

def save_checkpoint(path: Union[str, Path], model: TrainedModel, iteration: int,
                    optimizer: Optional[OptimizerState] = None) -> Path:
    path = Path(path)
    payload = {
        'format_version': CHECKPOINT_FORMAT_VERSION,
        'mode': model.mode,
        'iteration': iteration,
        'geometry': {
            'dimension': model.geometry.dimension,
            'x_max': model.geometry.x_max,
            't_max': model.geometry.t_max,
            'y_max': model.geometry.y_max,
        },
        'material': model.material.as_dict(),
        'networks': {prefix: network_to_dict(params) for prefix, params in model.networks.items()},
        'optimizer': optimizer.to_dict() if optimizer is not None else None,
    }
    path.write_text(json.dumps(payload), encoding='utf-8')
    return path


def load_checkpoint(path: Union[str, Path]) -> Tuple[TrainedModel, Optional[OptimizerState], int]:
    payload = json.loads(Path(path).read_text(encoding='utf-8'))
    version = payload.get('format_version')
    if version != CHECKPOINT_FORMAT_VERSION:
        raise ConfigurationError(
            f"Version de checkpoint non supportée: {version} (attendu {CHECKPOINT_FORMAT_VERSION})"
        )
    model = TrainedModel(
        payload['mode'],
        {prefix: network_from_dict(net) for prefix, net in payload['networks'].items()},
        MaterialParams.from_dict(payload['material']),
        CaseGeometry(**payload['geometry']),
    )
    optimizer = OptimizerState.from_dict(payload['optimizer']) if payload.get('optimizer') else None
    return model, optimizer, int(payload['iteration'])


# ============================================================================
# BOUCLE D'ENTRAÎNEMENT
# ============================================================================

@dataclass
class TrainResult:
    model: TrainedModel
    trace: TrainTrace
    optimizer: OptimizerState
    iterations: int
    stopped_by: str

    @property
    def material(self) -> MaterialParams:
        return self.model.material


def initial_model(config: TrainConfig, geometry: CaseGeometry) -> TrainedModel:
    """Réseaux initialisés (une graine dérivée par réseau) et λ⁽⁰⁾"""
    seeds = np.random.SeedSequence(config.seed).spawn(3)
    sizes = [geometry.input_dim, *config.hidden_layers, len(geometry.fields)]
    bounds = (geometry.lower, geometry.upper) if config.input_scaling else None
    networks = {
        prefix: init_network(sizes, config.activation, input_bounds=bounds,
                             rng=np.random.default_rng(seeds[i]))
        for i, prefix in enumerate(PREFIXES[config.mode])
    }
    return TrainedModel(config.mode, networks, config.initial_material, geometry)


def _collocation_rng(config: TrainConfig) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(config.seed).spawn(3)[2])


def _clamp_interface(params: Dict[str, np.ndarray], delta: float, geometry: CaseGeometry) -> float:
    """Ramène d dans [δ, B − δ] (en place) et retourne la valeur bornée"""
    d = float(np.clip(params['d'], delta, geometry.x_max - delta))
    params['d'] = np.array(d)
    return d


def _plateau_reached(totals: List[float], window: int, threshold: float) -> bool:
    if len(totals) <= window:
        return False
    previous, current = totals[-window - 1], totals[-1]
    return abs(current - previous) / max(abs(previous), 1e-300) < threshold


def _batch_for_iteration(config: TrainConfig, dataset: FieldDataset, d: float, geometry: CaseGeometry,
                         sampler: SamplerConfig, rng, current: Optional[Tuple], iteration: int):
    if current is None or iteration % config.resample_every == 0:
        if config.mode == 'da-pinn':
            current = sample_collocation(d, geometry, sampler, rng)
        else:
            uniform = sample_uniform_collocation(geometry, sampler.n_collocation_1 + sampler.n_collocation_2, rng)
            empty = uniform.subset(slice(0, 0))
            current = (uniform, empty, CollocationSet('interface', empty.t, empty.nu, empty.y))
    if config.mode == 'da-pinn':
        return build_batch(dataset, d, current), current
    empty_data = dataset.subset(slice(0, 0))
    return SampleBatch(dataset, empty_data, *current), current


def _run_training(config: TrainConfig, dataset: FieldDataset, geometry: CaseGeometry,
                  sampler: SamplerConfig, output_dir: Optional[Path], trace_path: Optional[Path]) -> TrainResult:
    if len(dataset) == 0:
        raise ConfigurationError("Le jeu de données D_D est vide")
    if dataset.inputs.shape[1] != geometry.input_dim:
        raise ShapeError(f"Données de dimension {dataset.inputs.shape[1]}, attendu {geometry.input_dim}")

    model = initial_model(config, geometry)
    params = model.parameters()
    optimizer = OptimizerState.zeros_like(params, config.beta1, config.beta2, config.adam_eps)
    trace = TrainTrace(trace_path)
    delta = config.margin(geometry)
    if config.max_iterations == 0:
        trace.flush()
        _clamp_interface(params, delta, geometry)
        return TrainResult(model.with_parameters(params), trace, optimizer, 0, 'max-iterations')

    rates = config.learning_rates()
    _clamp_interface(params, delta, geometry)
    # (modèle, état d'Adam, itération) de la dernière perte finie; l'état initial avant la première
    last_good = (model.with_parameters(params), optimizer, 0)
    rng = _collocation_rng(config)
    collocation = None
    totals: List[float] = []
    stopped_by = 'max-iterations'
    iteration = 0
    logger.info(
        f"Début de l'entraînement {config.mode}: {config.max_iterations} itérations max, "
        f"λ⁽⁰⁾={model.material.as_dict()}"
    )

    for iteration in range(config.max_iterations):
        started = time.perf_counter()
        d = _clamp_interface(params, delta, geometry)
        current = model.with_parameters(params)
        before_step = optimizer
        try:
            batch, collocation = _batch_for_iteration(
                config, dataset, d, geometry, sampler, rng, collocation, iteration
            )
            loss, gradient = loss_and_gradient(
                current.field_models(), current.material, batch, geometry, config.weights,
                config.mode, config.chunk_size, config.n_jobs,
            )
            if not math.isfinite(loss.total):
                raise NumericalError(f"Perte totale non finie: {loss.total}")
            optimizer, params = adam_step(optimizer, params, gradient, rates)
        except (NumericalError, NonFiniteGradientError) as exc:
            checkpoint = None
            if output_dir is not None:
                good_model, good_optimizer, good_iteration = last_good
                checkpoint = str(save_checkpoint(output_dir / 'checkpoint_last_good.json', good_model,
                                                 good_iteration, good_optimizer))
            trace.flush()
            logger.error(f"Divergence à l'itération {iteration}: {exc}")
            if isinstance(exc, NonFiniteGradientError):
                raise
            raise TrainingDivergedError(iteration, checkpoint) from exc

        last_good = (current, before_step, iteration)
        trace.append(TraceRecord(iteration, loss, current.material, (time.perf_counter() - started) * 1000.0))
        totals.append(loss.total)
        if loss.empty_d1 or loss.empty_d2:
            logger.warning(f"Itération {iteration}: sous-domaine sans données (d={d:.6g})")
        if iteration % config.log_every == 0:
            logger.info(
                f"Itération {iteration}: Loss_D={loss.loss_d:.3e} Loss_P={loss.loss_p:.3e} "
                f"Loss_I={loss.loss_i:.3e} total={loss.total:.3e} λ={current.material.as_dict()}"
            )
        if config.stop_criterion == 'plateau' and _plateau_reached(totals, config.plateau_window,
                                                                   config.plateau_threshold):
            stopped_by = 'plateau'
            break

    trace.flush()
    _clamp_interface(params, delta, geometry)
    final = model.with_parameters(params)
    logger.info(f"Fin de l'entraînement ({stopped_by}) après {len(trace)} itération(s): λ̂={final.material.as_dict()}")
    return TrainResult(final, trace, optimizer, len(trace), stopped_by)


def train_da_pinn(config: TrainConfig, dataset: FieldDataset, geometry: CaseGeometry,
                  sampler: SamplerConfig = SamplerConfig(), output_dir: Optional[Union[str, Path]] = None,
                  trace_path: Optional[Union[str, Path]] = None) -> TrainResult:
    """Algorithme à adaptation de domaine: deux réseaux, perte d'interface, collocation adaptative"""
    if config.mode != 'da-pinn':
        config = replace(config, mode='da-pinn')
    return _run_training(config, dataset, geometry, sampler,
                         Path(output_dir) if output_dir else None, Path(trace_path) if trace_path else None)


def train_baseline(config: TrainConfig, dataset: FieldDataset, geometry: CaseGeometry,
                   sampler: SamplerConfig = SamplerConfig(), output_dir: Optional[Union[str, Path]] = None,
                   trace_path: Optional[Union[str, Path]] = None) -> TrainResult:
    """
    PINN de référence: un seul réseau sur Ω, (μ, ε) par morceaux via x ≤ d,
    collocation uniforme (N_P1 + N_P2 points), pas de perte d'interface.
    """
    if config.mode != 'baseline':
        config = replace(config, mode='baseline')
    return _run_training(config, dataset, geometry, sampler,
                         Path(output_dir) if output_dir else None, Path(trace_path) if trace_path else None)


def predict(model: TrainedModel, points) -> np.ndarray:
    """Champs prédits (n, k); x ≤ d̂ → Net₁, x > d̂ → Net₂ (un seul réseau en référence)"""
    points = np.atleast_2d(np.asarray(points, dtype=np.float64))
    if points.shape[1] != model.geometry.input_dim:
        raise ShapeError(f"Points de forme {points.shape}, attendu (n, {model.geometry.input_dim})")
    inside = model.geometry.contains(points)
    if not np.all(inside):
        raise DomainRangeError(f"{int(np.sum(~inside))} point(s) hors du domaine")
    if model.mode == 'baseline':
        return forward(model.networks['net'], points)
    first = points[:, 1] <= model.material.d
    out = np.empty((len(points), len(model.geometry.fields)))
    if np.any(first):
        out[first] = forward(model.networks['net1'], points[first])
    if np.any(~first):
        out[~first] = forward(model.networks['net2'], points[~first])
    return out
