"""
Résidus des équations de Maxwell en milieu hétérogène à deux sous-domaines
et résidu des conditions d'interface électromagnétiques.

Les fonctions n'utilisent que l'arithmétique (+, -, *): elles s'appliquent
aussi bien à des tableaux numpy qu'à des variables de la bande de
différentiation.
"""
from dataclasses import asdict, dataclass
from typing import Callable, Dict, Mapping, NamedTuple, Optional, Tuple, Union

import numpy as np

from ..exceptions import ShapeError

# Composantes des champs et coordonnées d'entrée, par dimension
FIELDS = {
    1: ('E_Y', 'H_Z'),
    2: ('E_X', 'E_Y', 'H_Z'),
}
COORDINATES = {
    1: ('t', 'x'),
    2: ('t', 'x', 'y'),
}

DERIVATIVES_1D = ('dEy_dx', 'dEy_dt', 'dHz_dx', 'dHz_dt')
DERIVATIVES_2D = ('dEx_dt', 'dEx_dy', 'dEy_dt', 'dEy_dx', 'dHz_dt', 'dHz_dx', 'dHz_dy')

MATERIAL_NAMES = ('mu1', 'eps1', 'mu2', 'eps2', 'd')


@dataclass(frozen=True)
class MaterialParams:
    """Vecteur physique λ = [μ₁, ε₁, μ₂, ε₂, d]"""
    mu1: float
    eps1: float
    mu2: float
    eps2: float
    d: float

    def as_array(self) -> np.ndarray:
        return np.array([self.mu1, self.eps1, self.mu2, self.eps2, self.d], dtype=np.float64)

    def as_dict(self) -> Dict[str, float]:
        return {name: float(value) for name, value in asdict(self).items()}

    @classmethod
    def from_array(cls, values) -> 'MaterialParams':
        values = [float(v) for v in np.asarray(values, dtype=np.float64).ravel()]
        if len(values) != len(MATERIAL_NAMES):
            raise ShapeError(f"λ doit contenir {len(MATERIAL_NAMES)} valeurs, reçu {len(values)}")
        return cls(*values)

    @classmethod
    def from_dict(cls, values: Mapping[str, float]) -> 'MaterialParams':
        return cls(**{name: float(np.asarray(values[name])) for name in MATERIAL_NAMES})

    def with_interface(self, d: float) -> 'MaterialParams':
        return MaterialParams(self.mu1, self.eps1, self.mu2, self.eps2, float(d))


@dataclass(frozen=True)
class CaseGeometry:
    """Domaine espace-temps: x ∈ [0, B], t ∈ [0, T], y ∈ [0, y_max] en 2D"""
    dimension: int
    x_max: float
    t_max: float
    y_max: Optional[float] = None

    def __post_init__(self):
        if self.dimension not in FIELDS:
            raise ShapeError(f"Dimension non supportée: {self.dimension}")
        if self.x_max <= 0 or self.t_max <= 0:
            raise ShapeError("Les bornes du domaine doivent être positives")
        if self.dimension == 2 and (self.y_max is None or self.y_max <= 0):
            raise ShapeError("Borne y positive requise en 2D")

    @property
    def input_dim(self) -> int:
        return self.dimension + 1

    @property
    def fields(self) -> Tuple[str, ...]:
        return FIELDS[self.dimension]

    @property
    def coordinates(self) -> Tuple[str, ...]:
        return COORDINATES[self.dimension]

    @property
    def lower(self) -> np.ndarray:
        return np.zeros(self.input_dim)

    @property
    def upper(self) -> np.ndarray:
        bounds = [self.t_max, self.x_max]
        if self.dimension == 2:
            bounds.append(self.y_max)
        return np.array(bounds, dtype=np.float64)

    def contains(self, points, atol: float = 1e-12) -> np.ndarray:
        """Masque des points (n, t/x[/y]) à l'intérieur du domaine"""
        points = np.atleast_2d(np.asarray(points, dtype=np.float64))
        return np.all((points >= self.lower - atol) & (points <= self.upper + atol), axis=1)


class Residual1D(NamedTuple):
    f: object
    h: object


class Residual2D(NamedTuple):
    r_ax: object
    r_ay: object
    r_far: object


ResidualVector = Union[Residual1D, Residual2D]


def material_at(lam: MaterialParams, x) -> Tuple[np.ndarray, np.ndarray]:
    """(μ, ε) au point x: côté Ω₁ si x ≤ d (égalité comprise), Ω₂ sinon"""
    inside_first = np.asarray(x) <= lam.d
    mu = np.where(inside_first, lam.mu1, lam.mu2)
    eps = np.where(inside_first, lam.eps1, lam.eps2)
    if mu.ndim == 0:
        return float(mu), float(eps)
    return mu, eps


def _require(derivs: Mapping, names) -> None:
    missing = [name for name in names if name not in derivs]
    if missing:
        raise ShapeError(f"Dérivées manquantes: {', '.join(missing)}")


def residual_1d(derivs: Mapping, mu, eps) -> Residual1D:
    """f = ∂E_Y/∂x + μ ∂H_Z/∂t ; h = ∂H_Z/∂x + ε ∂E_Y/∂t"""
    _require(derivs, DERIVATIVES_1D)
    f = derivs['dEy_dx'] + mu * derivs['dHz_dt']
    h = derivs['dHz_dx'] + eps * derivs['dEy_dt']
    return Residual1D(f, h)


def residual_2d(derivs: Mapping, mu, eps) -> Residual2D:
    """
    r_ax = ε ∂E_X/∂t − ∂H_Z/∂y
    r_ay = ε ∂E_Y/∂t + ∂H_Z/∂x
    r_far = ∂E_Y/∂x − ∂E_X/∂y + μ ∂H_Z/∂t
    """
    _require(derivs, DERIVATIVES_2D)
    r_ax = eps * derivs['dEx_dt'] - derivs['dHz_dy']
    r_ay = eps * derivs['dEy_dt'] + derivs['dHz_dx']
    r_far = derivs['dEy_dx'] - derivs['dEx_dy'] + mu * derivs['dHz_dt']
    return Residual2D(r_ax, r_ay, r_far)


def residual(dimension: int, derivs: Mapping, mu, eps) -> ResidualVector:
    if dimension == 1:
        return residual_1d(derivs, mu, eps)
    return residual_2d(derivs, mu, eps)


def squared_norm(res: ResidualVector):
    """Somme des carrés des composantes du résidu"""
    total = None
    for component in res:
        term = component * component
        total = term if total is None else total + term
    return total


def derivative_map(dimension: int, partial: Callable[[int, int], object]) -> Dict[str, object]:
    """
    Construit le dictionnaire de dérivées attendu par les résidus à partir
    d'un accès partial(indice_champ, indice_coordonnée).
    """
    if dimension == 1:
        # champs (E_Y, H_Z), coordonnées (t, x)
        return {
            'dEy_dt': partial(0, 0), 'dEy_dx': partial(0, 1),
            'dHz_dt': partial(1, 0), 'dHz_dx': partial(1, 1),
        }
    # champs (E_X, E_Y, H_Z), coordonnées (t, x, y)
    return {
        'dEx_dt': partial(0, 0), 'dEx_dy': partial(0, 2),
        'dEy_dt': partial(1, 0), 'dEy_dx': partial(1, 1),
        'dHz_dt': partial(2, 0), 'dHz_dx': partial(2, 1), 'dHz_dy': partial(2, 2),
    }


def _component(fields, index: int):
    if hasattr(fields, 'column'):
        return fields.column(index)
    return np.asarray(fields)[..., index]


def _width(fields) -> int:
    return fields.shape[-1]


def interface_residual(fields1, fields2, lam, geometry: CaseGeometry):
    """
    Saut des champs à l'interface x = d (normale selon x).

    1D: s = (E₁Y − E₂Y)² + (H₁Z − H₂Z)²
    2D: s = (E₁Y − E₂Y)² + (H₁Z − H₂Z)² + (ε₁E₁X − ε₂E₂X)²
    H n'a pas de composante normale et E_X est la seule composante normale de E:
    les autres termes sont absents.
    """
    expected = len(geometry.fields)
    if _width(fields1) != expected or _width(fields2) != expected:
        raise ShapeError(
            f"Champs de largeur {_width(fields1)}/{_width(fields2)}, attendu {expected}"
        )
    if geometry.dimension == 1:
        jump_e = _component(fields1, 0) - _component(fields2, 0)
        jump_h = _component(fields1, 1) - _component(fields2, 1)
        return jump_e * jump_e + jump_h * jump_h
    jump_e = _component(fields1, 1) - _component(fields2, 1)
    jump_h = _component(fields1, 2) - _component(fields2, 2)
    jump_d = lam.eps1 * _component(fields1, 0) - lam.eps2 * _component(fields2, 0)
    return jump_e * jump_e + jump_h * jump_h + jump_d * jump_d
