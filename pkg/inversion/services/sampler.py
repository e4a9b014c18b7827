"""
Construction adaptative du découpage des données et des points de collocation
en fonction de l'estimation courante de l'interface d.
"""
import logging
from dataclasses import dataclass
from typing import NamedTuple, Optional, Tuple

import numpy as np

from ..exceptions import ConfigurationError, PreconditionError, ShapeError
from .autodiff import Tape, Var, hstack
from .physics import CaseGeometry

logger = logging.getLogger(__name__)

SIDES = ('left', 'right', 'interface', 'uniform')


class DataPoint(NamedTuple):
    """Mesure ponctuelle: coordonnées (t, x[, y]) et champs u"""
    coordinates: Tuple[float, ...]
    u: np.ndarray


@dataclass(frozen=True)
class FieldDataset:
    """Jeu de mesures stocké en colonnes: entrées (n, t/x[/y]) et champs (n, k)"""
    inputs: np.ndarray
    values: np.ndarray
    coordinates: Tuple[str, ...]
    fields: Tuple[str, ...]

    def __post_init__(self):
        if self.inputs.ndim != 2 or self.values.ndim != 2 or len(self.inputs) != len(self.values):
            raise ShapeError(f"Jeu de données incohérent: {self.inputs.shape} / {self.values.shape}")
        if self.inputs.shape[1] != len(self.coordinates) or self.values.shape[1] != len(self.fields):
            raise ShapeError("Noms de colonnes incompatibles avec les dimensions")

    def __len__(self) -> int:
        return len(self.inputs)

    def __getitem__(self, index: int) -> DataPoint:
        return DataPoint(tuple(float(c) for c in self.inputs[index]), self.values[index].copy())

    @property
    def x(self) -> np.ndarray:
        return self.inputs[:, 1]

    def subset(self, selector) -> 'FieldDataset':
        return FieldDataset(self.inputs[selector], self.values[selector], self.coordinates, self.fields)


@dataclass(frozen=True)
class SamplerConfig:
    """Effectifs N_D, N_P1, N_P2, N_I et graine"""
    n_data: int = 2000
    n_collocation_1: int = 4000
    n_collocation_2: int = 4000
    n_interface: int = 2000
    seed: int = 0

    def __post_init__(self):
        for name in ('n_data', 'n_collocation_1', 'n_collocation_2', 'n_interface'):
            if getattr(self, name) < 1:
                raise ConfigurationError(f"{name} doit être ≥ 1, reçu {getattr(self, name)}")


@dataclass(frozen=True)
class CollocationSet:
    """
    Points de collocation. Les abscisses sont conservées sous forme de tirages
    ν ~ U(0, 1) afin d'être réexprimées à partir de d (différentiable):
    gauche x = ν d, droite x = ν (B − d) + d, interface x = d, uniforme x = ν B.
    """
    side: str
    t: np.ndarray
    nu: np.ndarray
    y: Optional[np.ndarray] = None

    def __post_init__(self):
        if self.side not in SIDES:
            raise ShapeError(f"Côté inconnu '{self.side}'")

    def __len__(self) -> int:
        return len(self.t)

    def subset(self, selector) -> 'CollocationSet':
        return CollocationSet(
            self.side, self.t[selector], self.nu[selector],
            None if self.y is None else self.y[selector],
        )

    def x_values(self, d: float, x_max: float) -> np.ndarray:
        if self.side == 'left':
            return self.nu * d
        if self.side == 'right':
            return self.nu * (x_max - d) + d
        if self.side == 'interface':
            return np.full_like(self.t, d)
        return self.nu * x_max

    def inputs(self, d: float, x_max: float) -> np.ndarray:
        columns = [self.t, self.x_values(d, x_max)]
        if self.y is not None:
            columns.append(self.y)
        return np.column_stack(columns)

    def x_expression(self, tape: Tape, d: Var, x_max: float) -> Var:
        """Abscisses (n, 1) enregistrées comme fonction de la feuille d"""
        nu = self.nu.reshape(-1, 1)
        if self.side == 'left':
            return tape.constant(nu) * d
        if self.side == 'right':
            return tape.constant(nu) * (x_max - d) + d
        if self.side == 'interface':
            return tape.constant(np.ones_like(nu)) * d
        return tape.constant(nu * x_max)

    def input_expression(self, tape: Tape, d: Var, x_max: float) -> Var:
        columns = [tape.constant(self.t.reshape(-1, 1)), self.x_expression(tape, d, x_max)]
        if self.y is not None:
            columns.append(tape.constant(self.y.reshape(-1, 1)))
        return hstack(columns)


@dataclass(frozen=True)
class SampleBatch:
    """Découpage D_D1 / D_D2 et ensembles C_P1 / C_P2 / C_I d'une itération"""
    d_d1: FieldDataset
    d_d2: FieldDataset
    c_p1: CollocationSet
    c_p2: CollocationSet
    c_i: CollocationSet

    @property
    def empty_d1(self) -> bool:
        return len(self.d_d1) == 0

    @property
    def empty_d2(self) -> bool:
        return len(self.d_d2) == 0


def split_data(dataset: FieldDataset, d: float) -> Tuple[FieldDataset, FieldDataset]:
    """Partition x ≤ d / x > d en conservant l'ordre. Un côté vide est signalé, pas rejeté."""
    mask = dataset.x <= d
    first, second = dataset.subset(mask), dataset.subset(~mask)
    if len(first) == 0 or len(second) == 0:
        logger.warning(
            f"Découpage dégénéré pour d={d:.6g}: {len(first)} point(s) dans Ω₁, {len(second)} dans Ω₂"
        )
    return first, second


def _draw_coordinates(geometry: CaseGeometry, count: int, rng: np.random.Generator):
    t = rng.uniform(0.0, geometry.t_max, size=count)
    y = rng.uniform(0.0, geometry.y_max, size=count) if geometry.dimension == 2 else None
    return t, y


def sample_collocation(d: float, geometry: CaseGeometry, config: SamplerConfig,
                       rng: np.random.Generator) -> Tuple[CollocationSet, CollocationSet, CollocationSet]:
    """
    Tire C_P1, C_P2 et C_I pour l'interface courante d (0 < d < B).
    Ordre des tirages fixe: ν puis t (puis y) pour chaque ensemble.
    """
    if not 0.0 < d < geometry.x_max:
        raise PreconditionError(f"d={d} hors de l'intervalle ouvert (0, {geometry.x_max})")

    sets = []
    for side, count in (('left', config.n_collocation_1), ('right', config.n_collocation_2)):
        nu = rng.uniform(0.0, 1.0, size=count)
        t, y = _draw_coordinates(geometry, count, rng)
        sets.append(CollocationSet(side, t, nu, y))
    t, y = _draw_coordinates(geometry, config.n_interface, rng)
    sets.append(CollocationSet('interface', t, np.zeros(config.n_interface), y))
    return tuple(sets)


def sample_uniform_collocation(geometry: CaseGeometry, count: int,
                               rng: np.random.Generator) -> CollocationSet:
    """Collocation uniforme sur tout Ω (PINN de référence)"""
    if count < 1:
        raise ConfigurationError(f"Nombre de points de collocation invalide: {count}")
    nu = rng.uniform(0.0, 1.0, size=count)
    t, y = _draw_coordinates(geometry, count, rng)
    return CollocationSet('uniform', t, nu, y)


def build_batch(dataset: FieldDataset, d: float,
                collocation: Tuple[CollocationSet, CollocationSet, CollocationSet]) -> SampleBatch:
    d_d1, d_d2 = split_data(dataset, d)
    c_p1, c_p2, c_i = collocation
    return SampleBatch(d_d1, d_d2, c_p1, c_p2, c_i)
