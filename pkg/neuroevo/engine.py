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

"""The evolution loop.

Each generation is evaluated at the epoch budget the schedule assigns to
it. Evaluations are looked up in the fitness cache by (genome, epochs);
misses resume the genome's latest checkpoint when it has fewer epochs,
and train from scratch otherwise. Fitness is accuracy minus a penalty
linear in evaluation wall time.
"""

import dataclasses
import fractions
import logging
import math
from concurrent import futures

import numpy as np

from neuroevo import evaluator as evaluator_mod
from neuroevo import genome as genome_mod
from neuroevo import operators
from neuroevo import store


LOG = logging.getLogger(__name__)

SECONDS_PER_HOUR = 3600.0

# Purposes of the derived random streams.
_INIT_STREAM = 0
_BREED_STREAM = 1

PENALTY_INCREMENTAL = 'incremental'
PENALTY_CUMULATIVE = 'cumulative'

STATUS_MEMBER = 'member'
STATUS_ELITE = 'elite'
STATUS_DISPLACED = 'displaced'


@dataclasses.dataclass(frozen=True)
class EpochSchedule:
    """Generation to epoch budget: ``flat`` or ``linear`` from lo to hi."""

    mode: str = 'flat'
    epochs: int = 60
    lo: int = 30
    hi: int = 70
    generations_total: int = 20

    def __post_init__(self):
        if self.mode not in ('flat', 'linear'):
            raise ValueError("schedule mode must be 'flat' or 'linear', "
                             "got %r" % self.mode)
        if self.generations_total < 1:
            raise ValueError('generations_total must be positive')
        if self.epochs < 1 or not 1 <= self.lo <= self.hi:
            raise ValueError('epoch bounds must satisfy 1 <= lo <= hi '
                             'and epochs >= 1')

    @property
    def is_partial(self):
        return self.mode == 'linear'


def epochs_for_generation(generation, schedule):
    """Epoch budget of the 1-based ``generation``.

    The linear schedule interpolates from ``lo`` at the first to ``hi`` at
    the last generation and rounds halves up.
    """
    total = schedule.generations_total
    if not 1 <= generation <= total:
        raise ValueError('generation %d outside [1, %d]'
                         % (generation, total))
    if schedule.mode == 'flat':
        return schedule.epochs
    if total == 1:
        return schedule.hi
    exact = schedule.lo + fractions.Fraction(
        (schedule.hi - schedule.lo) * (generation - 1), total - 1)
    return math.floor(exact + fractions.Fraction(1, 2))


def regularised_fitness(accuracy, wall_seconds, penalty_per_hour):
    """Accuracy minus ``penalty_per_hour`` for every hour spent; unclamped."""
    return accuracy - penalty_per_hour * (wall_seconds / SECONDS_PER_HOUR)


@dataclasses.dataclass
class Individual:
    genome: genome_mod.Genome
    accuracy: float
    wall_seconds: float
    fitness: float
    epochs_trained: int
    checkpoint_ref: str = None
    total_wall_seconds: float = 0.0
    cache_hit: bool = False
    resumed_from: int = None
    worker_id: str = None
    failed: bool = False

    @property
    def key(self):
        return self.genome.key

    def to_dict(self):
        values = dataclasses.asdict(self)
        values['genome'] = self.key
        return values

    @classmethod
    def from_dict(cls, values):
        values = dict(values)
        values['genome'] = genome_mod.parse_key(values['genome'])
        return cls(**values)


@dataclasses.dataclass
class GenerationStats:
    generation: int
    epochs: int
    fitness_min: float
    fitness_mean: float
    fitness_max: float
    accuracy_min: float
    accuracy_mean: float
    accuracy_max: float
    mean_depth: float
    wall_seconds: float
    epochs_trained: int
    evaluations: int
    cache_hits: int
    layer_distribution: list

    def to_dict(self):
        return dataclasses.asdict(self)


def layer_distribution(population):
    """Per depth index, ``[skips, pools]`` among genomes that deep."""
    histogram = []
    for item in population:
        genome = getattr(item, 'genome', item)
        for depth, gene in enumerate(genome.layers):
            if depth == len(histogram):
                histogram.append([0, 0])
            histogram[depth][isinstance(gene, genome_mod.PoolGene)] += 1
    return histogram


def _fitness(record, cfg):
    seconds = (record.total_wall_seconds
               if cfg.time_penalty_basis == PENALTY_CUMULATIVE
               else record.wall_seconds)
    return regularised_fitness(record.accuracy, seconds, cfg.penalty_per_hour)


def _evaluate_job(genome, epochs, evaluator, checkpoints):
    key = genome.key
    try:
        entry = checkpoints.latest(key)
        resume = None
        prior_seconds = 0.0
        if entry is not None and entry.epochs < epochs:
            resume = checkpoints.load(entry)
            prior_seconds = entry.total_wall_seconds
        evaluation = evaluator.evaluate(genome, epochs, resume)
        total = prior_seconds + evaluation.record.wall_seconds
        entry = checkpoints.save(key, evaluation.checkpoint, total)
        return dataclasses.replace(evaluation.record,
                                   total_wall_seconds=total,
                                   checkpoint_ref=entry.ref)
    except Exception:
        LOG.warning('Evaluation of %s at %d epochs failed, assigning '
                    'accuracy 0', key, epochs, exc_info=True)
        return None


def evaluate_population(generation, genomes, evaluator, cache, checkpoints,
                        cfg, executor=None):
    """Evaluate genomes at the generation's epoch budget.

    Distinct uncached genomes are evaluated concurrently; the call returns
    once all of them are done. Results are assembled in slot order, so
    they do not depend on worker scheduling. Repeated genomes within the
    call are cache hits.
    """
    epochs = epochs_for_generation(generation, cfg.schedule)
    pending = {}
    for genome in genomes:
        if cache.get(genome.key, epochs) is None:
            pending.setdefault(genome.key, genome)

    own_executor = executor is None
    if own_executor:
        executor = futures.ThreadPoolExecutor(
            max_workers=cfg.worker_count, thread_name_prefix='evaluator')
    try:
        jobs = {key: executor.submit(_evaluate_job, genome, epochs,
                                     evaluator, checkpoints)
                for key, genome in pending.items()}
        results = {key: job.result() for key, job in jobs.items()}
    finally:
        if own_executor:
            executor.shutdown()

    individuals = []
    for genome in genomes:
        key = genome.key
        fresh = key in results
        record = results.pop(key) if fresh else cache.get(key, epochs)
        if record is None:
            individuals.append(Individual(
                genome=genome, accuracy=0.0, wall_seconds=0.0,
                fitness=0.0, epochs_trained=epochs, failed=True))
            continue
        if fresh:
            cache.put(record)
        else:
            LOG.debug('Cache hit for %s at %d epochs', key, epochs)
        individuals.append(Individual(
            genome=genome,
            accuracy=record.accuracy,
            wall_seconds=record.wall_seconds,
            fitness=_fitness(record, cfg),
            epochs_trained=record.epochs,
            checkpoint_ref=record.checkpoint_ref,
            total_wall_seconds=record.total_wall_seconds,
            cache_hit=not fresh,
            resumed_from=record.resumed_from if fresh else None,
            worker_id=record.worker_id))

    # failures score no higher than the weakest real result
    floor = min([0.0] + [ind.fitness for ind in individuals
                         if not ind.failed])
    for ind in individuals:
        if ind.failed:
            ind.fitness = floor
    return individuals


def _event(generation, slot, individual, status):
    return {
        'generation': generation,
        'slot': slot,
        'key': individual.key,
        'epochs': individual.epochs_trained,
        'accuracy': individual.accuracy,
        'wall_seconds': individual.wall_seconds,
        'fitness': individual.fitness,
        'cache_hit': individual.cache_hit,
        'resumed_from': individual.resumed_from,
        'worker_id': individual.worker_id,
        'status': status,
        'failed': individual.failed,
    }


def generation_stats(generation, epochs, population, evaluated):
    """Statistics of the population after elitism.

    ``evaluated`` lists every individual the generation produced,
    including a displaced one, and drives the work counters.
    """
    fitness = [ind.fitness for ind in population]
    accuracy = [ind.accuracy for ind in population]
    fresh = [ind for ind in evaluated if not ind.cache_hit and not ind.failed]
    return GenerationStats(
        generation=generation,
        epochs=epochs,
        fitness_min=min(fitness),
        fitness_mean=sum(fitness) / len(fitness),
        fitness_max=max(fitness),
        accuracy_min=min(accuracy),
        accuracy_mean=sum(accuracy) / len(accuracy),
        accuracy_max=max(accuracy),
        mean_depth=sum(len(ind.genome) for ind in population)
        / len(population),
        wall_seconds=sum(ind.wall_seconds for ind in fresh),
        epochs_trained=sum(ind.epochs_trained - (ind.resumed_from or 0)
                           for ind in fresh),
        evaluations=len(fresh),
        cache_hits=sum(1 for ind in evaluated if ind.cache_hit),
        layer_distribution=layer_distribution(population))


@dataclasses.dataclass
class RunState:
    """Everything needed to continue a run after a completed generation."""

    generation: int = 0
    population: list = dataclasses.field(default_factory=list)
    history: list = dataclasses.field(default_factory=list)
    best_fitness: Individual = None
    best_accuracy: Individual = None
    cache: store.FitnessCache = dataclasses.field(
        default_factory=store.FitnessCache)
    checkpoints: store.CheckpointStore = dataclasses.field(
        default_factory=store.CheckpointStore)

    def to_primitive(self):
        return {
            'generation': self.generation,
            'population': [ind.to_dict() for ind in self.population],
            'best_fitness': (self.best_fitness.to_dict()
                             if self.best_fitness else None),
            'best_accuracy': (self.best_accuracy.to_dict()
                              if self.best_accuracy else None),
            'cache': self.cache.to_primitive(),
            'checkpoints': self.checkpoints.to_primitive(),
        }

    @classmethod
    def from_primitive(cls, values, history, checkpoint_dir=None):
        def individual(v):
            return Individual.from_dict(v) if v else None

        return cls(
            generation=values['generation'],
            population=[Individual.from_dict(v)
                        for v in values.get('population', [])],
            history=[GenerationStats(**h) for h in history],
            best_fitness=individual(values.get('best_fitness')),
            best_accuracy=individual(values.get('best_accuracy')),
            cache=store.FitnessCache.from_primitive(values.get('cache', [])),
            checkpoints=store.CheckpointStore.from_primitive(
                values.get('checkpoints', []), checkpoint_dir))


@dataclasses.dataclass
class EvolutionResult:
    best_fitness: Individual
    best_accuracy: Individual
    history: list
    events: list


def _stream(seed, purpose, generation):
    return np.random.default_rng([seed, purpose, generation])


def _update_best(state, candidates):
    for ind in candidates:
        if ind.failed:
            continue
        if state.best_fitness is None or (
                ind.fitness > state.best_fitness.fitness):
            state.best_fitness = ind
        if state.best_accuracy is None or (
                ind.accuracy > state.best_accuracy.accuracy):
            state.best_accuracy = ind


def run_evolution(cfg, evaluator, state=None, recorder=None):
    """Evolve ``cfg.pop_size`` genomes for ``cfg.generations`` generations.

    Random streams are derived from ``cfg.seed`` and the generation
    index, so a run continued from a saved :class:`RunState` makes the
    same decisions as an uninterrupted one.

    :param recorder: called as ``recorder(state, stats, events)`` after
        every generation
    :returns: :class:`EvolutionResult`
    """
    if cfg.pop_size < 2:
        raise ValueError('population size must be at least 2')
    state = state or RunState()
    events = []
    shape = cfg.input_shape
    if state.generation >= cfg.generations:
        LOG.info('Run already finished %d generations', state.generation)
        return EvolutionResult(state.best_fitness, state.best_accuracy,
                               state.history, events)

    with futures.ThreadPoolExecutor(
            max_workers=cfg.worker_count,
            thread_name_prefix='evaluator') as executor:
        if state.generation == 0:
            rng = _stream(cfg.seed, _INIT_STREAM, 0)
            genomes = [genome_mod.random_genome(rng, shape, cfg.init)
                       for _slot in range(cfg.pop_size)]
        else:
            genomes = operators.next_generation(
                _stream(cfg.seed, _BREED_STREAM, state.generation),
                state.population, shape, cfg.operators, cfg.pop_size)

        for generation in range(state.generation + 1, cfg.generations + 1):
            epochs = epochs_for_generation(generation, cfg.schedule)
            population = evaluate_population(
                generation, genomes, evaluator, state.cache,
                state.checkpoints, cfg, executor)
            evaluated = list(population)
            statuses = [STATUS_MEMBER] * len(population)
            displaced = None
            if state.population:
                old_best = state.population[
                    operators.fittest_index(state.population)]
                if all(ind.key != old_best.key for ind in population):
                    (elite,) = evaluate_population(
                        generation, [old_best.genome], evaluator,
                        state.cache, state.checkpoints, cfg, executor)
                    if elite.failed:
                        LOG.warning('Elite %s failed at %d epochs, not '
                                    'carried over', elite.key, epochs)
                    else:
                        population, displaced = operators.replace_weakest(
                            population, elite)
                        statuses[population.index(elite)] = STATUS_ELITE
                    evaluated.append(elite)

            generation_events = [
                _event(generation, slot, ind, status)
                for slot, (ind, status) in enumerate(zip(population,
                                                         statuses))]
            if displaced is not None:
                generation_events.append(
                    _event(generation, None, displaced, STATUS_DISPLACED))
            stats = generation_stats(generation, epochs, population,
                                     evaluated)
            _update_best(state, evaluated)
            state.generation = generation
            state.population = population
            state.history.append(stats)
            events.extend(generation_events)
            LOG.info('Generation %d/%d at %d epochs: fitness max %.4f '
                     'mean %.4f, %d evaluations, %d cache hits, %.1fs',
                     generation, cfg.generations, epochs, stats.fitness_max,
                     stats.fitness_mean, stats.evaluations,
                     stats.cache_hits, stats.wall_seconds)
            if recorder is not None:
                recorder(state, stats, generation_events)
            if generation < cfg.generations:
                genomes = operators.next_generation(
                    _stream(cfg.seed, _BREED_STREAM, generation),
                    population, shape, cfg.operators, cfg.pop_size)

    return EvolutionResult(state.best_fitness, state.best_accuracy,
                           state.history, events)
