"""
Solutions analytiques des deux cas de référence, synthèse des jeux de
données et métrique d'erreur relative l2.
"""
import logging
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, Optional, Tuple, Union

import numpy as np
import pandas as pd

from ..exceptions import ConfigurationError, DomainRangeError, ShapeError, UndefinedMetricError
from .physics import CaseGeometry, MaterialParams
from .sampler import FieldDataset

logger = logging.getLogger(__name__)

# Corrections apportées aux expressions publiées, validées par l'oracle
# résidu + continuité; recopiées dans la configuration de chaque run.
ANALYTIC_CORRECTIONS = (
    "1D: onde réfléchie en cos(0.1t + 0.1x - 1) (se propageant vers x décroissant); "
    "la forme cos(0.1t - 0.1x - 1) ne vérifie ni l'équation ni la continuité en x = 10",
    "2D: pulsation donnée par ω² = (k_X² + k_Y²)/(με), soit ω = 2; "
    "ω = (k_X² + k_Y²)/(με) = 4 laisse un résidu non nul",
)


@dataclass(frozen=True)
class AnalyticCase1D:
    """Onde plane incidente, réfléchie et transmise à travers l'interface x = d"""
    name: str = 'maxwell1d'
    material: MaterialParams = MaterialParams(mu1=1.0, eps1=1.0, mu2=9.0, eps2=1.0, d=10.0)
    geometry: CaseGeometry = CaseGeometry(dimension=1, x_max=20.0, t_max=10.0)
    frequency: float = 0.1
    wavenumber_1: float = 0.1
    wavenumber_2: float = 0.3
    incident: float = 1.0
    reflected: float = 0.5
    transmitted: float = 1.5

    @property
    def fields(self) -> Tuple[str, ...]:
        return self.geometry.fields

    def impedances(self) -> Tuple[float, float]:
        lam = self.material
        return math.sqrt(lam.mu1 / lam.eps1), math.sqrt(lam.mu2 / lam.eps2)


@dataclass(frozen=True)
class AnalyticCase2D:
    """Mode stationnaire TE à deux sous-domaines, interface x = π"""
    name: str = 'maxwell2d'
    material: MaterialParams = MaterialParams(mu1=1.0, eps1=2.0, mu2=1.0, eps2=5.0, d=math.pi)
    geometry: CaseGeometry = CaseGeometry(dimension=2, x_max=2 * math.pi, t_max=2.0, y_max=2 * math.pi)
    kx_1: float = 2.0
    kx_2: float = 4.0
    ky: float = 2.0

    @property
    def fields(self) -> Tuple[str, ...]:
        return self.geometry.fields

    @property
    def omega(self) -> float:
        """ω tel que ω² = (k_X² + k_Y²)/(με), identique dans les deux sous-domaines"""
        lam = self.material
        return math.sqrt((self.kx_1 ** 2 + self.ky ** 2) / (lam.mu1 * lam.eps1))

    def omega_by_side(self) -> Tuple[float, float]:
        lam = self.material
        return (
            math.sqrt((self.kx_1 ** 2 + self.ky ** 2) / (lam.mu1 * lam.eps1)),
            math.sqrt((self.kx_2 ** 2 + self.ky ** 2) / (lam.mu2 * lam.eps2)),
        )


AnalyticCase = Union[AnalyticCase1D, AnalyticCase2D]

CASES: Dict[str, AnalyticCase] = {
    'maxwell1d': AnalyticCase1D(),
    'maxwell2d': AnalyticCase2D(),
}


def get_case(name: str) -> AnalyticCase:
    try:
        return CASES[name]
    except KeyError:
        raise ConfigurationError(f"Cas inconnu '{name}' (disponibles: {', '.join(CASES)})") from None


def _check_domain(geometry: CaseGeometry, *coordinates) -> None:
    points = np.column_stack([np.ravel(np.asarray(c, dtype=np.float64)) for c in coordinates])
    inside = geometry.contains(points)
    if not np.all(inside):
        raise DomainRangeError(
            f"{int(np.sum(~inside))} point(s) hors du domaine, ex. {points[~inside][0].tolist()}"
        )


def _side_mask(x, d: float, side: Optional[int]) -> np.ndarray:
    if side is None:
        return np.asarray(x) <= d
    if side not in (1, 2):
        raise ShapeError(f"Côté invalide: {side}")
    return np.full(np.shape(x), side == 1)


# ============================================================================
# CAS 1D
# ============================================================================

def _phases_1d(case: AnalyticCase1D, t, x):
    d = case.material.d
    incident = case.frequency * t - case.wavenumber_1 * x + case.wavenumber_1 * d
    reflected = case.frequency * t + case.wavenumber_1 * x - case.wavenumber_1 * d
    transmitted = case.frequency * t - case.wavenumber_2 * x + case.wavenumber_2 * d
    return incident, reflected, transmitted


def eval_1d(case: AnalyticCase1D, t, x, side: Optional[int] = None) -> Tuple[np.ndarray, np.ndarray]:
    """
    (E_Y, H_Z) au point (t, x). `side` force l'expression d'un sous-domaine
    (utile pour les contrôles de continuité à l'interface).
    """
    t = np.asarray(t, dtype=np.float64)
    x = np.asarray(x, dtype=np.float64)
    _check_domain(case.geometry, t, x)
    eta_1, eta_2 = case.impedances()
    incident, reflected, transmitted = _phases_1d(case, t, x)

    e_first = case.incident * np.cos(incident) + case.reflected * np.cos(reflected)
    h_first = (case.incident * np.cos(incident) - case.reflected * np.cos(reflected)) / eta_1
    e_second = case.transmitted * np.cos(transmitted)
    h_second = case.transmitted * np.cos(transmitted) / eta_2

    first = _side_mask(x, case.material.d, side)
    return np.where(first, e_first, e_second), np.where(first, h_first, h_second)


def derivatives_1d(case: AnalyticCase1D, t, x, side: Optional[int] = None) -> Dict[str, np.ndarray]:
    """Dérivées partielles exactes de la solution 1D"""
    t = np.asarray(t, dtype=np.float64)
    x = np.asarray(x, dtype=np.float64)
    eta_1, eta_2 = case.impedances()
    w, k1, k2 = case.frequency, case.wavenumber_1, case.wavenumber_2
    incident, reflected, transmitted = _phases_1d(case, t, x)
    s_i, s_r, s_t = np.sin(incident), np.sin(reflected), np.sin(transmitted)

    first = {
        'dEy_dt': -w * (case.incident * s_i + case.reflected * s_r),
        'dEy_dx': k1 * case.incident * s_i - k1 * case.reflected * s_r,
        'dHz_dt': -w * (case.incident * s_i - case.reflected * s_r) / eta_1,
        'dHz_dx': (k1 * case.incident * s_i + k1 * case.reflected * s_r) / eta_1,
    }
    second = {
        'dEy_dt': -w * case.transmitted * s_t,
        'dEy_dx': k2 * case.transmitted * s_t,
        'dHz_dt': -w * case.transmitted * s_t / eta_2,
        'dHz_dx': k2 * case.transmitted * s_t / eta_2,
    }
    mask = _side_mask(x, case.material.d, side)
    return {name: np.where(mask, first[name], second[name]) for name in first}


# ============================================================================
# CAS 2D
# ============================================================================

def _side_constants_2d(case: AnalyticCase2D, mask):
    lam = case.material
    eps = np.where(mask, lam.eps1, lam.eps2)
    mu = np.where(mask, lam.mu1, lam.mu2)
    kx = np.where(mask, case.kx_1, case.kx_2)
    return eps, mu, kx


def eval_2d(case: AnalyticCase2D, t, x, y, side: Optional[int] = None
            ) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """(E_X, E_Y, H_Z) au point (t, x, y)"""
    t = np.asarray(t, dtype=np.float64)
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    _check_domain(case.geometry, t, x, y)
    eps, mu, kx = _side_constants_2d(case, _side_mask(x, case.material.d, side))
    w, ky = case.omega, case.ky
    root_mu = np.sqrt(mu)

    e_x = ky / (eps * root_mu * w) * np.cos(w * t) * np.cos(kx * x) * np.sin(ky * y)
    e_y = -kx / (eps * root_mu * w) * np.cos(w * t) * np.sin(kx * x) * np.cos(ky * y)
    h_z = 1.0 / root_mu * np.sin(w * t) * np.cos(kx * x) * np.cos(ky * y)
    return e_x, e_y, h_z


def derivatives_2d(case: AnalyticCase2D, t, x, y, side: Optional[int] = None) -> Dict[str, np.ndarray]:
    """Dérivées partielles exactes de la solution 2D"""
    t = np.asarray(t, dtype=np.float64)
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    eps, mu, kx = _side_constants_2d(case, _side_mask(x, case.material.d, side))
    w, ky = case.omega, case.ky
    root_mu = np.sqrt(mu)
    cos_t, sin_t = np.cos(w * t), np.sin(w * t)
    cos_x, sin_x = np.cos(kx * x), np.sin(kx * x)
    cos_y, sin_y = np.cos(ky * y), np.sin(ky * y)
    return {
        'dEx_dt': -ky / (eps * root_mu) * sin_t * cos_x * sin_y,
        'dEx_dy': ky * ky / (eps * root_mu * w) * cos_t * cos_x * cos_y,
        'dEy_dt': kx / (eps * root_mu) * sin_t * sin_x * cos_y,
        'dEy_dx': -kx * kx / (eps * root_mu * w) * cos_t * cos_x * cos_y,
        'dHz_dt': w / root_mu * cos_t * cos_x * cos_y,
        'dHz_dx': -kx / root_mu * sin_t * sin_x * cos_y,
        'dHz_dy': -ky / root_mu * sin_t * cos_x * sin_y,
    }


# ============================================================================
# ACCÈS GÉNÉRIQUE, JEUX DE DONNÉES, GRILLES
# ============================================================================

def evaluate(case: AnalyticCase, inputs) -> np.ndarray:
    """Champs exacts (n, k) aux points (n, t/x[/y])"""
    inputs = np.atleast_2d(np.asarray(inputs, dtype=np.float64))
    if inputs.shape[1] != case.geometry.input_dim:
        raise ShapeError(f"Entrées de forme {inputs.shape}, attendu (n, {case.geometry.input_dim})")
    if case.geometry.dimension == 1:
        return np.column_stack(eval_1d(case, inputs[:, 0], inputs[:, 1]))
    return np.column_stack(eval_2d(case, inputs[:, 0], inputs[:, 1], inputs[:, 2]))


def derivatives(case: AnalyticCase, inputs, side: Optional[int] = None) -> Dict[str, np.ndarray]:
    inputs = np.atleast_2d(np.asarray(inputs, dtype=np.float64))
    if case.geometry.dimension == 1:
        return derivatives_1d(case, inputs[:, 0], inputs[:, 1], side)
    return derivatives_2d(case, inputs[:, 0], inputs[:, 1], inputs[:, 2], side)


def generate_dataset(case: AnalyticCase, n: int, seed: Optional[int] = None,
                     noise_sd: float = 0.0) -> FieldDataset:
    """
    N points uniformes sur le domaine espace-temps, champs exacts et bruit
    gaussien i.i.d. optionnel d'écart-type noise_sd.
    """
    if n < 1:
        raise ConfigurationError(f"Le jeu de données doit contenir au moins un point (reçu {n})")
    if noise_sd < 0:
        raise ConfigurationError(f"noise_sd doit être ≥ 0 (reçu {noise_sd})")
    geometry = case.geometry
    rng = np.random.default_rng(seed)
    inputs = rng.uniform(geometry.lower, geometry.upper, size=(n, geometry.input_dim))
    values = evaluate(case, inputs)
    if noise_sd > 0:
        values = values + rng.normal(0.0, noise_sd, size=values.shape)
    logger.info(f"Jeu de données {case.name}: {n} points (bruit σ={noise_sd:g})")
    return FieldDataset(inputs, values, geometry.coordinates, geometry.fields)


def dataset_to_csv(dataset: FieldDataset, path: Union[str, Path]) -> None:
    """CSV avec en-tête t,x[,y],<champs>, doubles en précision aller-retour"""
    frame = pd.DataFrame(
        np.hstack([dataset.inputs, dataset.values]),
        columns=list(dataset.coordinates) + list(dataset.fields),
    )
    frame.to_csv(path, index=False, float_format='%.17g')


def dataset_from_csv(path: Union[str, Path]) -> FieldDataset:
    frame = pd.read_csv(path, float_precision='round_trip')
    columns = list(frame.columns)
    coordinates = tuple(c for c in columns if c in ('t', 'x', 'y'))
    fields = tuple(c for c in columns if c not in coordinates)
    if coordinates not in (('t', 'x'), ('t', 'x', 'y')):
        raise ShapeError(f"En-tête de jeu de données invalide: {columns}")
    return FieldDataset(
        frame[list(coordinates)].to_numpy(dtype=np.float64),
        frame[list(fields)].to_numpy(dtype=np.float64),
        coordinates, fields,
    )


def l2_relative_error(u, u_hat) -> float:
    """‖u − û‖₂ / ‖u‖₂"""
    u = np.asarray(u, dtype=np.float64).ravel()
    u_hat = np.asarray(u_hat, dtype=np.float64).ravel()
    if u.shape != u_hat.shape:
        raise ShapeError(f"Longueurs différentes: {u.size} / {u_hat.size}")
    reference = np.linalg.norm(u)
    if reference == 0.0:
        raise UndefinedMetricError("Erreur relative l2 indéfinie: ‖u‖₂ = 0")
    return float(np.linalg.norm(u - u_hat) / reference)


@dataclass(frozen=True)
class EvaluationGrid:
    """
    Grille d'évaluation. 1D: nt × nx en (t, x). 2D: nx × nx en (x, y) pour
    chacune des tranches de temps `t_values`.
    """
    case_name: str
    nx: int = 201
    nt: int = 201
    t_values: Tuple[float, ...] = ()

    def axes(self, case: AnalyticCase) -> Dict[str, np.ndarray]:
        geometry = case.geometry
        if geometry.dimension == 1:
            return {
                't': np.linspace(0.0, geometry.t_max, self.nt),
                'x': np.linspace(0.0, geometry.x_max, self.nx),
            }
        return {
            't': np.asarray(self.t_values or np.linspace(0.0, geometry.t_max, self.nt), dtype=np.float64),
            'x': np.linspace(0.0, geometry.x_max, self.nx),
            'y': np.linspace(0.0, geometry.y_max, self.nx),
        }

    def points(self, case: AnalyticCase) -> np.ndarray:
        """Points (n, t/x[/y]), t variant le plus lentement"""
        axes = self.axes(case)
        mesh = np.meshgrid(*(axes[name] for name in case.geometry.coordinates), indexing='ij')
        return np.column_stack([m.ravel() for m in mesh])

    def as_dict(self) -> Dict:
        return {'nx': self.nx, 'nt': self.nt, 't_values': list(self.t_values)}


def default_grid(case: AnalyticCase) -> EvaluationGrid:
    if case.geometry.dimension == 1:
        return EvaluationGrid(case.name, nx=201, nt=201)
    return EvaluationGrid(case.name, nx=101, nt=3, t_values=(0.5, 1.0, 1.5))
