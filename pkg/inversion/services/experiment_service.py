"""
Orchestration des expériences: configuration, entraînement, artefacts,
rapports comparatifs et exports de grilles d'erreur.
"""
import json
import logging
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Union

import numpy as np
import pandas as pd
from django.conf import settings
from django.utils import timezone

from ..exceptions import ConfigurationError, IncompleteArtifactsError, UnknownFieldError
from ..models import ExperimentRun
from ..presets import resolve
from ..serializers import check_unknown_keys, validate_experiment_config
from .analytic import (
    ANALYTIC_CORRECTIONS, AnalyticCase, EvaluationGrid, default_grid, evaluate, generate_dataset,
    get_case, l2_relative_error,
)
from .physics import MATERIAL_NAMES, MaterialParams, material_at
from .sampler import SamplerConfig
from .trainer import (
    LossWeights, TrainConfig, TrainResult, TrainedModel, load_checkpoint, predict, save_checkpoint,
    train_baseline, train_da_pinn,
)

logger = logging.getLogger(__name__)

# Flux aléatoire des mesures synthétiques, distinct des flux d'entraînement
DATA_STREAM = 1

METHOD_LABELS = {'da-pinn': 'da-PINN', 'baseline': 'PINNs'}
BASE_ARTIFACTS = ('config.json', 'trace.csv', 'checkpoint.json', 'parameters.csv', 'metrics.json', 'timing.json')


@dataclass
class RunArtifacts:
    """Artefacts d'un run terminé"""
    run_dir: Path
    mode: str
    parameters: pd.DataFrame
    field_errors: pd.DataFrame
    metrics: Dict
    result: TrainResult


@dataclass
class ComparisonReport:
    table: pd.DataFrame
    parameters: pd.DataFrame

    def render(self) -> str:
        table = self.table.copy()
        table['meilleur'] = table['meilleur'].map({True: '*', False: ''})
        table['erreur_l2'] = table['erreur_l2'].map(lambda v: f"{v:.3e}")
        return table.to_string(index=False)


def load_json(path: Union[str, Path]) -> Dict:
    try:
        return json.loads(Path(path).read_text(encoding='utf-8'))
    except json.JSONDecodeError as exc:
        raise ConfigurationError(f"JSON invalide dans {path}: {exc}") from exc


def parameter_table(estimate: MaterialParams, truth: MaterialParams) -> pd.DataFrame:
    """Cinq lignes: estimation, valeur vraie, erreur relative (%)"""
    rows = []
    for name in MATERIAL_NAMES:
        true_value = getattr(truth, name)
        estimated = getattr(estimate, name)
        rows.append({
            'parametre': name,
            'estimation': estimated,
            'valeur_vraie': true_value,
            'erreur_relative_pct': 100.0 * l2_relative_error([true_value], [estimated]),
        })
    return pd.DataFrame(rows, columns=['parametre', 'estimation', 'valeur_vraie', 'erreur_relative_pct'])


def grid_from_config(case: AnalyticCase, grid: Optional[Dict]) -> EvaluationGrid:
    """Grille du run: valeurs explicites sinon grille par défaut du cas"""
    grid = grid or {}
    default = default_grid(case)
    nx = grid.get('nx') or default.nx
    nt = grid.get('nt') or default.nt
    if case.geometry.dimension == 1:
        return EvaluationGrid(case.name, nx=nx, nt=nt)
    t_values = grid.get('t_values')
    if t_values:
        t_values = tuple(float(t) for t in t_values)
    elif grid.get('nt'):
        t_values = tuple(float(t) for t in np.linspace(0.0, case.geometry.t_max, nt))
    else:
        t_values = default.t_values
    return EvaluationGrid(case.name, nx=nx, nt=len(t_values), t_values=t_values)


def error_grids(model: TrainedModel, case: AnalyticCase, grid: EvaluationGrid) -> Dict[str, List[pd.DataFrame]]:
    """
    |u − û| par champ. 1D: une grille (lignes t, colonnes x). 2D: une grille
    par tranche de temps (lignes y, colonnes x).
    """
    axes = grid.axes(case)
    points = grid.points(case)
    errors = np.abs(evaluate(case, points) - predict(model, points))
    grids = {}
    for k, name in enumerate(case.fields):
        if case.geometry.dimension == 1:
            values = errors[:, k].reshape(len(axes['t']), len(axes['x']))
            grids[name] = [pd.DataFrame(values, index=pd.Index(axes['t'], name='t'), columns=axes['x'])]
        else:
            cube = errors[:, k].reshape(len(axes['t']), len(axes['x']), len(axes['y']))
            grids[name] = [
                pd.DataFrame(cube[i].T, index=pd.Index(axes['y'], name='y'), columns=axes['x'])
                for i in range(len(axes['t']))
            ]
    return grids


def grid_filenames(case: AnalyticCase, field: str, slices: int) -> List[str]:
    if case.geometry.dimension == 1:
        return [f"errors_{field}.csv"]
    return [f"errors_{field}_t{k}.csv" for k in range(slices)]


def field_error_table(model: TrainedModel, case: AnalyticCase, grid: EvaluationGrid) -> pd.DataFrame:
    points = grid.points(case)
    truth = evaluate(case, points)
    estimate = predict(model, points)
    rows = [
        {'champ': name, 'erreur_l2': l2_relative_error(truth[:, k], estimate[:, k])}
        for k, name in enumerate(case.fields)
    ]
    return pd.DataFrame(rows, columns=['champ', 'erreur_l2'])


class ExperimentService:
    """Exécution des runs et exploitation de leurs artefacts"""

    def __init__(self, runs_dir: Optional[Union[str, Path]] = None, n_jobs: Optional[int] = None,
                 chunk_size: Optional[int] = None, record_runs: bool = True):
        self.runs_dir = Path(runs_dir or getattr(settings, 'INVERSION_RUNS_DIR', 'runs'))
        self.n_jobs = n_jobs or getattr(settings, 'INVERSION_N_JOBS', 1)
        self.chunk_size = chunk_size or getattr(settings, 'INVERSION_CHUNK_SIZE', 2048)
        self.record_runs = record_runs

    # ------------------------------------------------------------------
    # Configuration
    # ------------------------------------------------------------------

    def load_config(self, config_path: Optional[Union[str, Path]] = None, overrides: Optional[Dict] = None,
                    values: Optional[Dict] = None) -> Dict:
        """Fichier JSON (ou dictionnaire) + options -> configuration résolue et validée"""
        file_values = dict(values or {})
        if config_path is not None:
            file_values.update(load_json(config_path))
        check_unknown_keys(file_values)
        config = validate_experiment_config(resolve(file_values, overrides))
        logger.info(f"Configuration résolue: cas {config['case']}, mode {config['mode']}, graine {config['seed']}")
        return config

    def train_config(self, config: Dict, mode: str) -> TrainConfig:
        return TrainConfig(
            mode=mode,
            learning_rate=config['learning_rate'],
            lr_network=config.get('lr_network'),
            lr_material=config.get('lr_material'),
            max_iterations=config['max_iterations'],
            resample_every=config['resample_every'],
            weights=LossWeights(config['weight_data'], config['weight_physics'], config['weight_interface']),
            clamp_margin=config.get('clamp_margin'),
            stop_criterion=config['stop_criterion'],
            plateau_window=config['plateau_window'],
            plateau_threshold=config['plateau_threshold'],
            initial_material=MaterialParams.from_dict(config['initial_material']),
            hidden_layers=tuple(config['hidden_layers']),
            activation=config['activation'],
            input_scaling=config['input_scaling'],
            seed=config['seed'],
            n_jobs=self.n_jobs,
            chunk_size=self.chunk_size,
            log_every=config['log_every'],
        )

    @staticmethod
    def sampler_config(config: Dict) -> SamplerConfig:
        return SamplerConfig(
            n_data=config['n_data'],
            n_collocation_1=config['n_collocation_1'],
            n_collocation_2=config['n_collocation_2'],
            n_interface=config['n_interface'],
            seed=config['seed'],
        )

    # ------------------------------------------------------------------
    # Exécution
    # ------------------------------------------------------------------

    def run(self, config_path: Optional[Union[str, Path]] = None, overrides: Optional[Dict] = None,
            values: Optional[Dict] = None) -> List[RunArtifacts]:
        """
        Exécute l'entraînement configuré et écrit les artefacts. En mode `both`,
        deux sous-répertoires (da-pinn, baseline) et un fichier de comparaison.
        """
        config = self.load_config(config_path, overrides, values)
        case = get_case(config['case'])
        base_dir = Path(config.get('output_dir') or self.runs_dir / f"{case.name}-{config['mode']}-seed{config['seed']}")
        base_dir.mkdir(parents=True, exist_ok=True)

        data_rng = np.random.default_rng(np.random.SeedSequence([config['seed'], DATA_STREAM]))
        dataset = generate_dataset(case, config['n_data'], seed=data_rng, noise_sd=config['noise_sd'])

        if config['mode'] != 'both':
            return [self._execute(case, dataset, config, config['mode'], base_dir)]

        artifacts = [
            self._execute(case, dataset, config, mode, base_dir / mode)
            for mode in ('da-pinn', 'baseline')
        ]
        comparison = self.report([a.run_dir for a in artifacts])
        comparison.table.to_csv(base_dir / 'comparison.csv', index=False, float_format='%.17g')
        (base_dir / 'comparison.txt').write_text(comparison.render() + '\n', encoding='utf-8')
        logger.info(f"Comparaison écrite dans {base_dir}")
        return artifacts

    def _execute(self, case: AnalyticCase, dataset, config: Dict, mode: str, run_dir: Path) -> RunArtifacts:
        run_dir.mkdir(parents=True, exist_ok=True)
        grid = grid_from_config(case, config.get('grid'))
        resolved = dict(config, mode=mode, grid=grid.as_dict(),
                        analytic_corrections=list(ANALYTIC_CORRECTIONS))
        (run_dir / 'config.json').write_text(json.dumps(resolved, indent=2), encoding='utf-8')

        record = None
        if self.record_runs:
            record = ExperimentRun.objects.create(
                cas=case.name, mode=mode, graine=config['seed'], repertoire=str(run_dir),
                configuration=resolved,
            )
        logger.info(f"Début du run {mode} ({case.name}) dans {run_dir}")
        started = time.perf_counter()
        try:
            train = train_da_pinn if mode == 'da-pinn' else train_baseline
            result = train(self.train_config(config, mode), dataset, case.geometry, self.sampler_config(config),
                           output_dir=run_dir, trace_path=run_dir / 'trace.csv')
            save_checkpoint(run_dir / 'checkpoint.json', result.model, result.iterations, result.optimizer)

            parameters = parameter_table(result.material, case.material)
            parameters.to_csv(run_dir / 'parameters.csv', index=False, float_format='%.17g')
            field_errors = field_error_table(result.model, case, grid)
            for name, frames in error_grids(result.model, case, grid).items():
                for filename, frame in zip(grid_filenames(case, name, len(frames)), frames):
                    frame.to_csv(run_dir / filename, float_format='%.17g')
        except Exception as exc:
            logger.error(f"Échec du run {mode}: {exc}")
            if record is not None:
                record.statut = 'erreur'
                record.message_erreur = str(exc)
                record.date_fin = timezone.now()
                record.save()
            raise
        elapsed = time.perf_counter() - started

        final = result.trace.records[-1].loss if len(result.trace) else None
        metrics = {
            'case': case.name,
            'mode': mode,
            'seed': config['seed'],
            'iterations': result.iterations,
            'stopped_by': result.stopped_by,
            'material': result.material.as_dict(),
            'parameter_errors_pct': dict(zip(parameters['parametre'], parameters['erreur_relative_pct'])),
            'field_errors': dict(zip(field_errors['champ'], field_errors['erreur_l2'])),
            'final_loss': final._asdict() if final is not None else None,
            'empty_split_iterations': len(result.trace.empty_split_iterations),
        }
        (run_dir / 'metrics.json').write_text(json.dumps(metrics, indent=2, default=float), encoding='utf-8')
        (run_dir / 'timing.json').write_text(json.dumps({
            'wall_seconds': elapsed,
            'ms_per_iteration': elapsed * 1000.0 / max(result.iterations, 1),
        }, indent=2), encoding='utf-8')

        if record is not None:
            record.statut = 'termine'
            record.parametres_estimes = metrics['material']
            record.erreurs_prediction = metrics['field_errors']
            record.nombre_iterations = result.iterations
            record.duree_secondes = elapsed
            record.date_fin = timezone.now()
            record.save()
        logger.info(f"Run {mode} terminé en {elapsed:.1f} s: λ̂={metrics['material']}")
        return RunArtifacts(run_dir, mode, parameters, field_errors, metrics, result)

    # ------------------------------------------------------------------
    # Exploitation des artefacts
    # ------------------------------------------------------------------

    def _open_run(self, run_dir: Union[str, Path]):
        run_dir = Path(run_dir)
        missing = [name for name in BASE_ARTIFACTS if not (run_dir / name).exists()]
        if 'config.json' in missing:
            raise IncompleteArtifactsError(str(run_dir), missing)
        config = load_json(run_dir / 'config.json')
        case = get_case(config['case'])
        grid = grid_from_config(case, config.get('grid'))
        for name in case.fields:
            for filename in grid_filenames(case, name, len(grid.t_values) or 1):
                if not (run_dir / filename).exists():
                    missing.append(filename)
        if missing:
            raise IncompleteArtifactsError(str(run_dir), missing)
        model, _, _ = load_checkpoint(run_dir / 'checkpoint.json')
        return config, case, grid, model

    def report(self, run_dirs: Sequence[Union[str, Path]]) -> ComparisonReport:
        """
        Une ligne par (méthode, champ): erreur relative l2 recalculée depuis les
        checkpoints sur la grille commune du cas, meilleure valeur marquée.
        """
        if not run_dirs:
            raise ConfigurationError("Au moins un répertoire de run est requis")
        rows, parameters = [], []
        shared_grids: Dict[str, EvaluationGrid] = {}
        for run_dir in run_dirs:
            config, case, grid, model = self._open_run(run_dir)
            grid = shared_grids.setdefault(case.name, grid)
            for _, row in field_error_table(model, case, grid).iterrows():
                rows.append({
                    'run': str(run_dir),
                    'cas': case.name,
                    'methode': METHOD_LABELS[config['mode']],
                    'champ': row['champ'],
                    'erreur_l2': row['erreur_l2'],
                })
            table = parameter_table(model.material, case.material)
            table.insert(0, 'run', str(run_dir))
            parameters.append(table)

        frame = pd.DataFrame(rows, columns=['run', 'cas', 'methode', 'champ', 'erreur_l2'])
        best = frame.groupby(['cas', 'champ'])['erreur_l2'].transform('min')
        frame['meilleur'] = frame['erreur_l2'] == best
        logger.info(f"Rapport sur {len(run_dirs)} run(s): {len(frame)} ligne(s)")
        return ComparisonReport(frame, pd.concat(parameters, ignore_index=True))

    def export_grid(self, run_dir: Union[str, Path], field: str, nx: Optional[int] = None,
                    nt: Optional[int] = None, out_dir: Optional[Union[str, Path]] = None) -> List[Path]:
        """Grille(s) CSV de |u − û| pour un champ, avec en-têtes d'axes"""
        config, case, grid, model = self._open_run(run_dir)
        if field not in case.fields:
            raise UnknownFieldError(field, case.fields)
        if nx or nt:
            grid = grid_from_config(case, {'nx': nx, 'nt': nt})
        out_dir = Path(out_dir or run_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        frames = error_grids(model, case, grid)[field]
        paths = []
        for filename, frame in zip(grid_filenames(case, field, len(frames)), frames):
            frame.to_csv(out_dir / filename, float_format='%.17g')
            paths.append(out_dir / filename)
        logger.info(f"Grille d'erreur {field} exportée ({len(paths)} fichier(s)) dans {out_dir}")
        return paths

    def export_profile(self, run_dir: Union[str, Path], nx: int = 201,
                       out_path: Optional[Union[str, Path]] = None) -> Path:
        """Profils μ(x), ε(x) vrais et estimés le long de x"""
        if nx < 2:
            raise ConfigurationError(f"nx doit être ≥ 2 (reçu {nx})")
        config, case, grid, model = self._open_run(run_dir)
        x = np.linspace(0.0, case.geometry.x_max, nx)
        mu_true, eps_true = material_at(case.material, x)
        mu_est, eps_est = material_at(model.material, x)
        frame = pd.DataFrame({
            'x': x, 'mu_true': mu_true, 'eps_true': eps_true, 'mu_est': mu_est, 'eps_est': eps_est,
        })
        path = Path(out_path or Path(run_dir) / 'profile.csv')
        frame.to_csv(path, index=False, float_format='%.17g')
        logger.info(f"Profil matériau exporté dans {path}")
        return path
