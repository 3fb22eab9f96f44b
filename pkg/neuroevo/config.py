# Licensed under the Apache License, Version 2.0 (the "License"); you may
# not use this file except in compliance with the License. You may obtain
# a copy of the License at
#
#      http://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS, WITHOUT
# WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied. See the
# License for the specific language governing permissions and limitations
# under the License.

"""Experiment configuration and run manifests.

A run manifest is a YAML mapping (JSON works too). Every section is
optional; unknown keys are rejected so that a typo cannot silently fall
back to a default. The schema is documented in the user guide.
"""

import dataclasses
import logging

import yaml

from neuroevo import data
from neuroevo import engine
from neuroevo import evaluator as evaluator_mod
from neuroevo import exceptions
from neuroevo import genome as genome_mod
from neuroevo.nn import training as training_mod
from neuroevo import operators as operators_mod


LOG = logging.getLogger(__name__)

VARIANTS = {
    (False, False): 'base',
    (True, False): 'regularised',
    (False, True): 'partial',
    (True, True): 'combined',
}


@dataclasses.dataclass(frozen=True)
class ExperimentConfig:
    name: str = 'experiment'
    seed: int = 0
    pop_size: int = 20
    generations: int = 20
    worker_count: int = 1
    penalty_per_hour: float = 0.0
    time_penalty_basis: str = engine.PENALTY_INCREMENTAL
    schedule: engine.EpochSchedule = None
    training: training_mod.TrainingConfig = dataclasses.field(
        default_factory=training_mod.TrainingConfig)
    operators: operators_mod.OperatorConfig = dataclasses.field(
        default_factory=operators_mod.OperatorConfig)
    init: genome_mod.InitConfig = dataclasses.field(
        default_factory=genome_mod.InitConfig)
    evaluator: str = evaluator_mod.SurrogateEvaluator.name
    surrogate: evaluator_mod.SurrogateParams = dataclasses.field(
        default_factory=evaluator_mod.SurrogateParams)
    dataset: data.DatasetSpec = dataclasses.field(
        default_factory=data.DatasetSpec)
    output_dir: str = None

    def __post_init__(self):
        if self.pop_size < 2:
            raise ValueError('population size must be at least 2 for '
                             'tournament selection, got %d' % self.pop_size)
        if self.generations < 1:
            raise ValueError('generations must be at least 1')
        if self.worker_count < 1:
            raise ValueError('worker count must be at least 1')
        if self.penalty_per_hour < 0:
            raise ValueError('time penalty must not be negative')
        if self.time_penalty_basis not in (engine.PENALTY_INCREMENTAL,
                                           engine.PENALTY_CUMULATIVE):
            raise ValueError('time penalty basis must be %r or %r'
                             % (engine.PENALTY_INCREMENTAL,
                                engine.PENALTY_CUMULATIVE))
        evaluator_mod.get_evaluator_class(self.evaluator)
        if self.schedule is None:
            object.__setattr__(self, 'schedule', engine.EpochSchedule(
                generations_total=self.generations))
        elif self.schedule.generations_total != self.generations:
            raise ValueError('schedule spans %d generations, run has %d'
                             % (self.schedule.generations_total,
                                self.generations))

    @property
    def input_shape(self):
        return self.dataset.shape

    @property
    def num_classes(self):
        return self.dataset.num_classes

    @property
    def variant(self):
        """``base``, ``regularised``, ``partial`` or ``combined``."""
        return VARIANTS[(self.penalty_per_hour > 0,
                         self.schedule.is_partial)]

    def replace(self, **changes):
        return dataclasses.replace(self, **changes)


def _coerce(value, kind, where):
    if value is None:
        return None
    if kind is bool:
        if isinstance(value, bool):
            return value
    elif kind is int:
        if isinstance(value, int) and not isinstance(value, bool):
            return value
        if isinstance(value, float) and value.is_integer():
            return int(value)
        if isinstance(value, str):
            try:
                return int(value)
            except ValueError:
                pass
    elif kind is float:
        if not isinstance(value, bool):
            try:
                return float(value)
            except (TypeError, ValueError):
                pass
    elif kind is str:
        if isinstance(value, str):
            return value
    else:
        return value
    raise exceptions.InvalidManifest(
        reason='%s must be %s, got %r' % (where, kind.__name__, value))


def _mapping(values, where):
    if values is None:
        return {}
    if not isinstance(values, dict):
        raise exceptions.InvalidManifest(
            reason='%s must be a mapping' % where)
    return values


def _check_keys(values, allowed, where):
    unknown = sorted(set(values) - set(allowed))
    if unknown:
        raise exceptions.InvalidManifest(
            reason='unknown key(s) in %s: %s' % (where, ', '.join(
                str(k) for k in unknown)))


def _build(cls, values, where, **extra):
    """Instantiate a config dataclass from a manifest section."""
    values = _mapping(values, where)
    fields = {f.name: f for f in dataclasses.fields(cls)}
    _check_keys(values, set(fields) - set(extra), where)
    kwargs = {}
    for name, value in values.items():
        kind = fields[name].type
        if kind is tuple:
            if not isinstance(value, (list, tuple)):
                raise exceptions.InvalidManifest(
                    reason='%s.%s must be a list' % (where, name))
            value = tuple(_coerce(v, int, '%s.%s' % (where, name))
                          for v in value)
        else:
            value = _coerce(value, kind, '%s.%s' % (where, name))
        kwargs[name] = value
    kwargs.update(extra)
    return cls(**kwargs)


TOP_LEVEL_KEYS = ('name', 'seed', 'population_size', 'generations',
                  'workers', 'output_dir', 'fitness', 'schedule', 'training',
                  'operators', 'initialization', 'evaluator', 'dataset')
TRAINING_KEYS = ('batch_size', 'momentum', 'learning_rate', 'decay_factor',
                 'decay_after_epochs')


def _training(values, schedule):
    values = _mapping(values, 'training')
    _check_keys(values, TRAINING_KEYS, 'training')
    default_points = (training_mod.PARTIAL_DECAY_POINTS if schedule.is_partial
                      else training_mod.BASELINE_DECAY_POINTS)
    points = values.get('decay_after_epochs', default_points)
    if not isinstance(points, (list, tuple)):
        raise exceptions.InvalidManifest(
            reason='training.decay_after_epochs must be a list')
    lr = training_mod.LrSchedule(
        initial=_coerce(values.get('learning_rate', 0.1), float,
                        'training.learning_rate'),
        decay_factor=_coerce(values.get('decay_factor', 0.9), float,
                             'training.decay_factor'),
        decay_after_epochs=tuple(
            _coerce(p, int, 'training.decay_after_epochs') for p in points))
    return training_mod.TrainingConfig(
        batch_size=_coerce(values.get('batch_size', 50), int,
                           'training.batch_size'),
        momentum=_coerce(values.get('momentum', 0.9), float,
                         'training.momentum'),
        lr=lr)


def _dataset(values):
    values = dict(_mapping(values, 'dataset'))
    synthetic = _build(data.SyntheticSpec, values.pop('synthetic', None),
                       'dataset.synthetic')
    return _build(data.DatasetSpec, values, 'dataset', synthetic=synthetic)


def _evaluator(values):
    values = _mapping(values, 'evaluator')
    _check_keys(values, ('kind', 'surrogate'), 'evaluator')
    kind = _coerce(values.get('kind', evaluator_mod.SurrogateEvaluator.name),
                   str, 'evaluator.kind')
    params = _build(evaluator_mod.SurrogateParams, values.get('surrogate'),
                    'evaluator.surrogate')
    return kind, params


def from_dict(values):
    """Validate a parsed manifest into an :class:`ExperimentConfig`.

    :raises: :class:`~neuroevo.exceptions.InvalidManifest`
    """
    values = _mapping(values, 'manifest')
    _check_keys(values, TOP_LEVEL_KEYS, 'manifest')
    try:
        generations = _coerce(values.get('generations', 20), int,
                              'generations')
        schedule = _build(engine.EpochSchedule, values.get('schedule'),
                          'schedule', generations_total=generations)

        fitness = _mapping(values.get('fitness'), 'fitness')
        _check_keys(fitness, ('time_penalty_per_hour', 'time_penalty_basis'),
                    'fitness')

        init = _build(genome_mod.InitConfig, values.get('initialization'),
                      'initialization')
        ops = dict(_mapping(values.get('operators'), 'operators'))
        _check_keys(ops, ('p_crossover', 'p_mutation', 'mutation_weights',
                          'max_retries'), 'operators')
        weights = _mapping(ops.pop('mutation_weights', None),
                           'operators.mutation_weights')
        op_kwargs = {}
        if weights:
            op_kwargs['mutation_weights'] = {
                k: _coerce(v, float, 'operators.mutation_weights.%s' % k)
                for k, v in weights.items()}
        op_cfg = _build(operators_mod.OperatorConfig, ops, 'operators',
                        filter_choices=init.filter_choices, **op_kwargs)

        kind, surrogate = _evaluator(values.get('evaluator'))
        cfg = ExperimentConfig(
            name=_coerce(values.get('name', 'experiment'), str, 'name'),
            seed=_coerce(values.get('seed', 0), int, 'seed'),
            pop_size=_coerce(values.get('population_size', 20), int,
                             'population_size'),
            generations=generations,
            worker_count=_coerce(values.get('workers', 1), int, 'workers'),
            penalty_per_hour=_coerce(
                fitness.get('time_penalty_per_hour', 0.0), float,
                'fitness.time_penalty_per_hour'),
            time_penalty_basis=_coerce(
                fitness.get('time_penalty_basis',
                            engine.PENALTY_INCREMENTAL), str,
                'fitness.time_penalty_basis'),
            schedule=schedule,
            training=_training(values.get('training'), schedule),
            operators=op_cfg,
            init=init,
            evaluator=kind,
            surrogate=surrogate,
            dataset=_dataset(values.get('dataset')),
            output_dir=_coerce(values.get('output_dir'), str, 'output_dir'))
    except (TypeError, ValueError) as exc:
        raise exceptions.InvalidManifest(reason=str(exc)) from exc
    LOG.debug('Loaded %s manifest %r', cfg.variant, cfg.name)
    return cfg


def parse_manifest(text):
    try:
        values = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise exceptions.InvalidManifest(
            reason='not valid YAML: %s' % exc) from exc
    return from_dict(values)


def load_manifest(path):
    """Read and validate a manifest file.

    :returns: ``(config, raw bytes)``; the bytes identify the manifest a
        run directory was created from
    """
    try:
        with open(path, 'rb') as f:
            raw = f.read()
    except OSError as exc:
        raise exceptions.InvalidManifest(
            reason='cannot read %s: %s' % (path, exc)) from exc
    return parse_manifest(raw), raw
