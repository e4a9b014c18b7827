"""
Moteur de différentiation automatique (mode inverse sur bande + tangentes avant)

Les valeurs des nœuds sont des tableaux numpy en double précision. Les
tangentes avant (dérivées par rapport aux entrées du réseau) sont elles-mêmes
enregistrées sur la bande, ce qui permet de rétropropager à travers elles et
d'obtenir d/dθ (du/dx).

Convention: la dérivée de ReLU en 0 vaut 0.
"""
import logging
from dataclasses import dataclass, field
from typing import Callable, Dict, Iterable, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd

from ..exceptions import (
    NumericalError, ShapeError, UnsupportedDirectionError, UnsupportedOperationError,
)

logger = logging.getLogger(__name__)

# Pas par défaut des différences finies centrées
DEFAULT_FD_STEP = 1e-5

Gradient = Dict[str, np.ndarray]


def _unbroadcast(grad: np.ndarray, shape: Tuple[int, ...]) -> np.ndarray:
    """Ramène un adjoint diffusé (broadcast) à la forme de l'opérande"""
    if grad.shape == shape:
        return grad
    extra = grad.ndim - len(shape)
    if extra > 0:
        grad = grad.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, dim in enumerate(shape) if dim == 1 and grad.shape[i] != 1)
    if axes:
        grad = grad.sum(axis=axes, keepdims=True)
    return grad.reshape(shape)


def _column(a, index):
    return a[:, index:index + 1]


def _column_vjp(g, out, a, index):
    adj = np.zeros_like(a)
    adj[:, index:index + 1] = g
    return (adj,)


def _sum(a, axis=None):
    return np.sum(a, axis=axis, keepdims=axis is not None)


def _sum_vjp(g, out, a, axis=None):
    return (np.broadcast_to(g, a.shape).copy(),)


def _hstack_vjp(g, out, *parts):
    bounds = np.cumsum([p.shape[1] for p in parts])[:-1]
    return tuple(np.split(g, bounds, axis=1))


@dataclass(frozen=True)
class OpSpec:
    """Définition d'un type d'opération: évaluation et produit adjoint (VJP)"""
    arity: int  # -1: nombre variable d'opérandes
    forward: Callable
    vjp: Callable


# Registre des types d'opérations supportés
OPERATIONS: Dict[str, OpSpec] = {
    'add': OpSpec(2, lambda a, b: a + b,
                  lambda g, out, a, b: (_unbroadcast(g, a.shape), _unbroadcast(g, b.shape))),
    'sub': OpSpec(2, lambda a, b: a - b,
                  lambda g, out, a, b: (_unbroadcast(g, a.shape), _unbroadcast(-g, b.shape))),
    'mul': OpSpec(2, lambda a, b: a * b,
                  lambda g, out, a, b: (_unbroadcast(g * b, a.shape), _unbroadcast(g * a, b.shape))),
    'neg': OpSpec(1, lambda a: -a, lambda g, out, a: (-g,)),
    'scale': OpSpec(1, lambda a, factor: a * factor, lambda g, out, a, factor: (g * factor,)),
    'shift': OpSpec(1, lambda a, offset: a + offset, lambda g, out, a, offset: (g,)),
    'matmul': OpSpec(2, lambda a, b: a @ b, lambda g, out, a, b: (g @ b.T, a.T @ g)),
    'tanh': OpSpec(1, np.tanh, lambda g, out, a: (g * (1.0 - out * out),)),
    'relu': OpSpec(1, lambda a: np.maximum(a, 0.0), lambda g, out, a: (g * (a > 0.0),)),
    # dérivée de ReLU: localement constante, adjoint nul
    'step': OpSpec(1, lambda a: (a > 0.0).astype(np.float64), lambda g, out, a: (np.zeros_like(a),)),
    'sin': OpSpec(1, np.sin, lambda g, out, a: (g * np.cos(a),)),
    'cos': OpSpec(1, np.cos, lambda g, out, a: (-g * np.sin(a),)),
    'exp': OpSpec(1, np.exp, lambda g, out, a: (g * out,)),
    'square': OpSpec(1, lambda a: a * a, lambda g, out, a: (2.0 * a * g,)),
    'sum': OpSpec(1, _sum, _sum_vjp),
    'column': OpSpec(1, _column, _column_vjp),
    'hstack': OpSpec(-1, lambda *parts: np.hstack(parts), _hstack_vjp),
}


@dataclass
class Node:
    """Nœud de la bande: type d'opération, parents, valeur primale"""
    kind: str
    parents: Tuple[int, ...]
    value: np.ndarray
    attrs: Dict = field(default_factory=dict)
    name: Optional[str] = None


class Var:
    """Référence vers un nœud d'une bande, avec surcharge des opérateurs"""

    __slots__ = ('tape', 'index')
    # numpy doit déléguer les opérateurs mixtes (ndarray + Var) à Var
    __array_ufunc__ = None

    def __init__(self, tape: 'Tape', index: int):
        self.tape = tape
        self.index = index

    @property
    def value(self) -> np.ndarray:
        return self.tape.nodes[self.index].value

    @property
    def shape(self) -> Tuple[int, ...]:
        return self.value.shape

    def _lift(self, other) -> 'Var':
        if isinstance(other, Var):
            return other
        return self.tape.constant(other)

    def __add__(self, other):
        if isinstance(other, (int, float)):
            return self.tape.apply('shift', self, offset=float(other))
        return self.tape.apply('add', self, self._lift(other))

    def __radd__(self, other):
        return self.__add__(other)

    def __sub__(self, other):
        if isinstance(other, (int, float)):
            return self.tape.apply('shift', self, offset=-float(other))
        return self.tape.apply('sub', self, self._lift(other))

    def __rsub__(self, other):
        if isinstance(other, (int, float)):
            return self.tape.apply('shift', -self, offset=float(other))
        return self.tape.apply('sub', self._lift(other), self)

    def __mul__(self, other):
        if isinstance(other, (int, float)):
            return self.tape.apply('scale', self, factor=float(other))
        return self.tape.apply('mul', self, self._lift(other))

    def __rmul__(self, other):
        return self.__mul__(other)

    def __neg__(self):
        return self.tape.apply('neg', self)

    def __matmul__(self, other):
        return self.tape.apply('matmul', self, self._lift(other))

    def __rmatmul__(self, other):
        return self.tape.apply('matmul', self._lift(other), self)

    def tanh(self) -> 'Var':
        return self.tape.apply('tanh', self)

    def relu(self) -> 'Var':
        return self.tape.apply('relu', self)

    def step(self) -> 'Var':
        return self.tape.apply('step', self)

    def sin(self) -> 'Var':
        return self.tape.apply('sin', self)

    def cos(self) -> 'Var':
        return self.tape.apply('cos', self)

    def exp(self) -> 'Var':
        return self.tape.apply('exp', self)

    def square(self) -> 'Var':
        return self.tape.apply('square', self)

    def sum(self, axis: Optional[int] = None) -> 'Var':
        return self.tape.apply('sum', self, axis=axis)

    def column(self, index: int) -> 'Var':
        return self.tape.apply('column', self, index=index)

    def __repr__(self):
        node = self.tape.nodes[self.index]
        return f"Var(#{self.index}, {node.kind}, shape={node.value.shape})"


def hstack(parts: Sequence[Union[Var, 'Dual']]) -> Union[Var, 'Dual']:
    """Concatène des colonnes enregistrées sur une même bande (variables ou duaux)"""
    if not isinstance(parts[0], Dual):
        return parts[0].tape.apply('hstack', *parts)
    primal = hstack([p.primal for p in parts])
    rows = primal.shape[0]
    ones = primal.tape.constant(np.ones((rows, 1)))
    tangents = []
    for position in range(len(parts[0].tangents)):
        columns = []
        for part in parts:
            t = part.tangent(position)
            # une tangente (1, k) constante se diffuse sur les n lignes
            columns.append(t if t.shape[0] == rows else t * ones)
        tangents.append(hstack(columns))
    return Dual(primal, tangents)


class Tape:
    """
    Bande d'enregistrement ordonnée topologiquement.

    Écriture par un seul fil pendant la construction, lecture seule ensuite
    (replay et backward ne modifient pas les nœuds).
    """

    def __init__(self):
        self.nodes: List[Node] = []
        self.leaves: Dict[str, int] = {}
        self.output: Optional[int] = None

    def __len__(self):
        return len(self.nodes)

    def _push(self, node: Node) -> Var:
        index = len(self.nodes)
        if not np.all(np.isfinite(node.value)):
            raise NumericalError(
                f"Valeur non finie au nœud {index} ({node.kind})", node_index=index
            )
        self.nodes.append(node)
        return Var(self, index)

    def leaf(self, name: str, value) -> Var:
        """Enregistre une feuille nommée (paramètre différentiable)"""
        if name in self.leaves:
            raise ShapeError(f"Feuille '{name}' déjà enregistrée")
        var = self._push(Node('leaf', (), np.array(value, dtype=np.float64), name=name))
        self.leaves[name] = var.index
        return var

    def constant(self, value) -> Var:
        return self._push(Node('constant', (), np.array(value, dtype=np.float64)))

    def apply(self, kind: str, *parents: Var, **attrs) -> Var:
        op = OPERATIONS.get(kind)
        if op is None:
            raise UnsupportedOperationError(kind)
        if op.arity >= 0 and len(parents) != op.arity:
            raise ShapeError(f"L'opération '{kind}' attend {op.arity} opérande(s), reçu {len(parents)}")
        for parent in parents:
            if parent.tape is not self:
                raise ShapeError(f"Opérande de '{kind}' enregistré sur une autre bande")
        values = [self.nodes[p.index].value for p in parents]
        try:
            value = op.forward(*values, **attrs)
        except ValueError as exc:
            raise ShapeError(f"Opération '{kind}' impossible: {exc}") from exc
        return self._push(Node(kind, tuple(p.index for p in parents), np.asarray(value), attrs))

    def replay(self, overrides: Optional[Mapping[str, np.ndarray]] = None) -> List[np.ndarray]:
        """Réévalue toute la bande (feuilles éventuellement remplacées) sans la modifier"""
        overrides = overrides or {}
        values: List[np.ndarray] = []
        for node in self.nodes:
            if node.kind == 'leaf':
                values.append(np.asarray(overrides.get(node.name, node.value), dtype=np.float64))
            elif node.kind == 'constant':
                values.append(node.value)
            else:
                op = OPERATIONS[node.kind]
                values.append(np.asarray(op.forward(*(values[p] for p in node.parents), **node.attrs)))
        return values

    def evaluate(self, overrides: Optional[Mapping[str, np.ndarray]] = None,
                 output: Optional[int] = None) -> np.ndarray:
        index = self.output if output is None else output
        if index is None:
            raise ShapeError("Aucune sortie définie sur la bande")
        return self.replay(overrides)[index]


def record(program: Callable[[Dict[str, Var]], Var], leaves: Mapping[str, np.ndarray]) -> Tape:
    """
    Enregistre `program` appliqué aux feuilles nommées.

    Returns:
        Bande dont le dernier nœud de sortie vaut l'évaluation directe du programme
    """
    tape = Tape()
    variables = {name: tape.leaf(name, value) for name, value in leaves.items()}
    out = program(variables)
    if not isinstance(out, Var):
        raise ShapeError("Le programme doit retourner une variable de la bande")
    tape.output = out.index
    return tape


def backward(tape: Tape, seed: Union[Var, int, None] = None,
             wrt: Optional[Iterable[str]] = None) -> Gradient:
    """
    Accumulation inverse des adjoints depuis un nœud scalaire.

    Returns:
        d(seed)/d(feuille) pour chaque feuille demandée (toutes par défaut)
    """
    if isinstance(seed, Var):
        seed = seed.index
    if seed is None:
        seed = tape.output
    if seed is None:
        raise ShapeError("Aucun nœud de départ pour la rétropropagation")
    root = tape.nodes[seed]
    if root.value.size != 1:
        raise ShapeError(f"Le nœud {seed} n'est pas scalaire (forme {root.value.shape})")

    adjoints: List[Optional[np.ndarray]] = [None] * (seed + 1)
    adjoints[seed] = np.ones_like(root.value)
    for index in range(seed, -1, -1):
        g = adjoints[index]
        node = tape.nodes[index]
        if g is None or not node.parents:
            continue
        op = OPERATIONS[node.kind]
        parent_values = [tape.nodes[p].value for p in node.parents]
        contributions = op.vjp(g, node.value, *parent_values, **node.attrs)
        for parent, contribution in zip(node.parents, contributions):
            if adjoints[parent] is None:
                adjoints[parent] = contribution
            else:
                adjoints[parent] = adjoints[parent] + contribution

    names = list(tape.leaves) if wrt is None else list(wrt)
    gradient: Gradient = {}
    for name in names:
        index = tape.leaves[name]
        adj = adjoints[index] if index <= seed else None
        gradient[name] = np.zeros_like(tape.nodes[index].value) if adj is None else adj
    return gradient


# ============================================================================
# TANGENTES AVANT ENREGISTRÉES
# ============================================================================

class Dual:
    """
    Valeur primale et tangentes (une par direction d'entrée), toutes
    enregistrées sur la bande. `None` désigne une tangente identiquement nulle.
    """

    __slots__ = ('primal', 'tangents')

    def __init__(self, primal: Var, tangents: Sequence[Optional[Var]]):
        self.primal = primal
        self.tangents = tuple(tangents)

    @classmethod
    def seed(cls, x: Var, axes: Sequence[int]) -> 'Dual':
        """Entrée (n, d) avec une tangente e_j par axe demandé"""
        width = x.shape[-1]
        tangents = []
        for axis in axes:
            direction = np.zeros((1, width))
            direction[0, axis] = 1.0
            tangents.append(x.tape.constant(direction))
        return cls(x, tangents)

    def _map(self, fn: Callable[[Var], Var]) -> Tuple[Optional[Var], ...]:
        return tuple(None if t is None else fn(t) for t in self.tangents)

    def __add__(self, other):
        if isinstance(other, Dual):
            tangents = tuple(
                a if b is None else (b if a is None else a + b)
                for a, b in zip(self.tangents, other.tangents)
            )
            return Dual(self.primal + other.primal, tangents)
        return Dual(self.primal + other, self.tangents)

    def __radd__(self, other):
        return self.__add__(other)

    def __neg__(self):
        return Dual(-self.primal, self._map(lambda t: -t))

    def __sub__(self, other):
        return self + (-other)

    def __mul__(self, other):
        if isinstance(other, Dual):
            tangents = []
            for a, b in zip(self.tangents, other.tangents):
                terms = [term for term in (
                    None if a is None else a * other.primal,
                    None if b is None else self.primal * b,
                ) if term is not None]
                tangents.append(sum(terms[1:], terms[0]) if terms else None)
            return Dual(self.primal * other.primal, tangents)
        return Dual(self.primal * other, self._map(lambda t: t * other))

    def __rmul__(self, other):
        return self.__mul__(other)

    def __matmul__(self, weights: Var):
        return Dual(self.primal @ weights, self._map(lambda t: t @ weights))

    def tanh(self) -> 'Dual':
        out = self.primal.tanh()
        slope = 1.0 - out.square()
        return Dual(out, self._map(lambda t: t * slope))

    def relu(self) -> 'Dual':
        out = self.primal.relu()
        mask = self.primal.step()
        return Dual(out, self._map(lambda t: t * mask))

    def sin(self) -> 'Dual':
        cos = self.primal.cos()
        return Dual(self.primal.sin(), self._map(lambda t: t * cos))

    def cos(self) -> 'Dual':
        minus_sin = -self.primal.sin()
        return Dual(self.primal.cos(), self._map(lambda t: t * minus_sin))

    def square(self) -> 'Dual':
        twice = self.primal * 2.0
        return Dual(self.primal.square(), self._map(lambda t: t * twice))

    def column(self, index: int) -> 'Dual':
        return Dual(self.primal.column(index), self._map(lambda t: t.column(index)))

    def tangent(self, position: int = 0) -> Var:
        """Tangente matérialisée (zéros explicites si identiquement nulle)"""
        t = self.tangents[position]
        if t is None:
            return self.primal * 0.0
        return t


def _direction_axis(direction, width: int) -> int:
    if isinstance(direction, (int, np.integer)):
        if not 0 <= int(direction) < width:
            raise UnsupportedDirectionError(f"Axe {direction} hors de [0, {width})")
        return int(direction)
    vector = np.asarray(direction, dtype=np.float64).ravel()
    if vector.size != width:
        raise UnsupportedDirectionError(f"Direction de taille {vector.size}, attendu {width}")
    nonzero = np.flatnonzero(vector)
    if nonzero.size != 1 or vector[nonzero[0]] != 1.0:
        raise UnsupportedDirectionError(f"La direction {vector.tolist()} n'est pas un axe de coordonnées")
    return int(nonzero[0])


def record_tangent(program: Callable[[Dual, Dict[str, Var]], Dual], point,
                   direction, leaves: Optional[Mapping[str, np.ndarray]] = None
                   ) -> Tuple[Tape, Var, Var]:
    """
    Enregistre la valeur et la dérivée directionnelle de `program` au point donné.

    Returns:
        (bande, primal, tangente); la tangente est un nœud ordinaire de la bande,
        la rétropropagation depuis elle donne d/dθ de la dérivée directionnelle.
    """
    x = np.atleast_2d(np.asarray(point, dtype=np.float64))
    axis = _direction_axis(direction, x.shape[1])
    tape = Tape()
    variables = {name: tape.leaf(name, value) for name, value in (leaves or {}).items()}
    inputs = Dual.seed(tape.constant(x), [axis])
    out = program(inputs, variables)
    tangent = out.tangent(0)
    tape.output = out.primal.index
    return tape, out.primal, tangent


def forward_tangent(program: Callable[[Dual, Dict[str, Var]], Dual], point, direction,
                    leaves: Optional[Mapping[str, np.ndarray]] = None
                    ) -> Tuple[np.ndarray, np.ndarray]:
    """Valeur exacte et dérivée directionnelle exacte selon un axe de coordonnées"""
    _, primal, tangent = record_tangent(program, point, direction, leaves)
    return primal.value, tangent.value


# ============================================================================
# VÉRIFICATION PAR DIFFÉRENCES FINIES
# ============================================================================

@dataclass
class GradientCheckReport:
    """Comparaison gradient AD / différences finies centrées, entrée par entrée"""
    entries: List[Dict]
    tolerance: float

    @property
    def max_relative_error(self) -> float:
        return max((e['relative_error'] for e in self.entries), default=0.0)

    @property
    def passed(self) -> bool:
        return self.max_relative_error <= self.tolerance

    @property
    def flagged(self) -> List[Dict]:
        return [e for e in self.entries if e['flagged']]

    def to_dataframe(self) -> pd.DataFrame:
        return pd.DataFrame(self.entries, columns=[
            'leaf', 'index', 'analytic', 'numeric', 'relative_error', 'flagged'
        ])

    def per_leaf(self) -> pd.DataFrame:
        """Erreur relative maximale par feuille"""
        frame = self.to_dataframe()
        return frame.groupby('leaf', sort=False)['relative_error'].max().to_frame()


def relative_error(analytic: float, numeric: float, floor: float = 1e-3) -> float:
    return abs(analytic - numeric) / max(abs(analytic), abs(numeric), floor)


def check_gradient(program: Callable[[Dict[str, Var]], Var], point: Mapping[str, np.ndarray],
                   step: float = DEFAULT_FD_STEP, tolerance: float = 1e-6,
                   floor: float = 1e-3) -> GradientCheckReport:
    """
    Compare `backward` aux différences finies centrées (f(p+h) - f(p-h)) / 2h
    pour chaque entrée de chaque feuille. Rapport seulement, aucune exception.
    """
    tape = record(program, point)
    gradient = backward(tape)
    base = {name: np.array(value, dtype=np.float64) for name, value in point.items()}

    entries = []
    for name, value in base.items():
        flat = value.reshape(-1)
        analytic = gradient[name].reshape(-1)
        for i in range(flat.size):
            perturbed = flat.copy()
            perturbed[i] = flat[i] + step
            f_plus = float(tape.evaluate({name: perturbed.reshape(value.shape)}))
            perturbed[i] = flat[i] - step
            f_minus = float(tape.evaluate({name: perturbed.reshape(value.shape)}))
            numeric = (f_plus - f_minus) / (2.0 * step)
            error = relative_error(float(analytic[i]), numeric, floor)
            entries.append({
                'leaf': name,
                'index': i,
                'analytic': float(analytic[i]),
                'numeric': numeric,
                'relative_error': error,
                'flagged': error > tolerance,
            })

    report = GradientCheckReport(entries, tolerance)
    if not report.passed:
        logger.warning(
            f"Vérification du gradient: {len(report.flagged)} entrée(s) au-delà de {tolerance:g} "
            f"(max {report.max_relative_error:.3e})"
        )
    return report
