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

"""Genetic operators: crossover, mutation, selection and replacement.

All operators take an explicit ``numpy.random.Generator`` and have no
other source of randomness, so a per-call stream makes them reproducible
and safe to run concurrently.
"""

import dataclasses
import enum
import logging

from neuroevo import exceptions
from neuroevo import genome as genome_mod


LOG = logging.getLogger(__name__)


class Mutation(enum.Enum):
    INSERT_SKIP = 'insert_skip'
    INSERT_POOL = 'insert_pool'
    REMOVE = 'remove'
    ALTER = 'alter'


DEFAULT_MUTATION_WEIGHTS = {
    Mutation.INSERT_SKIP: 0.7,
    Mutation.INSERT_POOL: 0.1,
    Mutation.REMOVE: 0.1,
    Mutation.ALTER: 0.1,
}


@dataclasses.dataclass(frozen=True)
class OperatorConfig:
    p_crossover: float = 0.9
    p_mutation: float = 0.2
    mutation_weights: dict = dataclasses.field(
        default_factory=lambda: dict(DEFAULT_MUTATION_WEIGHTS))
    max_retries: int = 25
    filter_choices: tuple = genome_mod.FILTER_CHOICES

    def __post_init__(self):
        for name in ('p_crossover', 'p_mutation'):
            value = getattr(self, name)
            if not 0.0 <= value <= 1.0:
                raise ValueError('%s must be within [0, 1], got %s'
                                 % (name, value))
        weights = {Mutation(k): float(v)
                   for k, v in self.mutation_weights.items()}
        missing = set(Mutation) - set(weights)
        if missing:
            raise ValueError('mutation weights missing for %s' % ', '.join(
                sorted(m.value for m in missing)))
        if any(w < 0 for w in weights.values()):
            raise ValueError('mutation weights must not be negative')
        if abs(sum(weights.values()) - 1.0) > 1e-9:
            raise ValueError('mutation weights must sum to 1, got %s'
                             % sum(weights.values()))
        if self.max_retries < 1:
            raise ValueError('max_retries must be positive')
        object.__setattr__(self, 'mutation_weights', weights)


def splice(a, b, cut_a, cut_b):
    """One-point crossover of two genomes at fixed cut positions."""
    return a[:cut_a] + b[cut_b:], b[:cut_b] + a[cut_a:]


def crossover(rng, a, b, input_shape, cfg):
    """Cross two genomes over at independent, uniform cut points.

    Pairs producing a child that pools below one pixel are discarded and
    fresh cuts drawn, up to ``cfg.max_retries`` times; after that the
    parents are returned unchanged.
    """
    for _attempt in range(cfg.max_retries):
        cut_a = int(rng.integers(0, len(a) + 1))
        cut_b = int(rng.integers(0, len(b) + 1))
        child_a, child_b = splice(a, b, cut_a, cut_b)
        if (genome_mod.is_valid(child_a, input_shape)
                and genome_mod.is_valid(child_b, input_shape)):
            return child_a, child_b
    LOG.debug('Crossover of %s and %s found no valid cut in %d attempts',
              a, b, cfg.max_retries)
    return a, b


def draw_mutation(rng, cfg):
    kinds = list(Mutation)
    weights = [cfg.mutation_weights[kind] for kind in kinds]
    return kinds[int(rng.choice(len(kinds), p=weights))]


def _random_skip(rng, cfg):
    return genome_mod.SkipGene(int(rng.choice(cfg.filter_choices)),
                               int(rng.choice(cfg.filter_choices)))


def apply_mutation(rng, genome, kind, cfg):
    """Apply one sub-operation; returns None when it is not applicable."""
    layers = list(genome.layers)
    if kind is Mutation.INSERT_SKIP:
        layers.insert(int(rng.integers(0, len(layers) + 1)),
                      _random_skip(rng, cfg))
    elif kind is Mutation.INSERT_POOL:
        position = int(rng.integers(0, len(layers) + 1))
        pool_kind = (genome_mod.PoolKind.MAX if rng.random() < 0.5
                     else genome_mod.PoolKind.AVERAGE)
        layers.insert(position, genome_mod.PoolGene(pool_kind))
    elif not layers:
        return None
    elif kind is Mutation.REMOVE:
        del layers[int(rng.integers(0, len(layers)))]
    else:
        index = int(rng.integers(0, len(layers)))
        gene = layers[index]
        if isinstance(gene, genome_mod.SkipGene):
            layers[index] = _random_skip(rng, cfg)
        else:
            layers[index] = genome_mod.PoolGene(gene.kind.flipped())
    return genome_mod.Genome(layers)


def mutate(rng, genome, input_shape, cfg):
    """Mutate a genome by one weighted sub-operation.

    An inapplicable draw (remove/alter on an empty genome) or an invalid
    result restarts the whole draw, up to ``cfg.max_retries`` times; then
    the genome is returned unchanged.
    """
    for _attempt in range(cfg.max_retries):
        kind = draw_mutation(rng, cfg)
        mutated = apply_mutation(rng, genome, kind, cfg)
        if mutated is not None and genome_mod.is_valid(mutated, input_shape):
            return mutated
    LOG.debug('Mutation of %s gave up after %d attempts',
              genome, cfg.max_retries)
    return genome


def rank(individual):
    """Ordering key: a failed evaluation ranks below every real result."""
    return (not individual.failed, individual.fitness)


def tournament_select(rng, population):
    """Fitter of two distinct, uniformly drawn individuals."""
    if len(population) < 2:
        raise exceptions.PopulationTooSmall(size=len(population))
    first, second = rng.choice(len(population), size=2, replace=False)
    a, b = population[int(first)], population[int(second)]
    if rank(a) == rank(b):
        return a if rng.random() < 0.5 else b
    return a if rank(a) > rank(b) else b


def next_generation(rng, population, input_shape, cfg, pop_size):
    """Breed ``pop_size`` genomes from an evaluated population.

    Elitism is not applied here: it needs the fitness of the new
    generation, see :func:`replace_weakest`.
    """
    if len(population) < 2:
        raise exceptions.PopulationTooSmall(size=len(population))
    children = []
    while len(children) < pop_size:
        parent = tournament_select(rng, population).genome
        if rng.random() < cfg.p_crossover:
            other = tournament_select(rng, population).genome
            offspring = list(crossover(rng, parent, other, input_shape, cfg))
            if pop_size - len(children) == 1:
                offspring = [offspring[int(rng.integers(0, 2))]]
        else:
            offspring = [parent]
        for child in offspring:
            if rng.random() < cfg.p_mutation:
                child = mutate(rng, child, input_shape, cfg)
            children.append(child)
    return children


def weakest_index(population):
    """Index of the minimum-fitness individual, earliest on ties."""
    return min(range(len(population)),
               key=lambda i: (rank(population[i]), i))


def fittest_index(population):
    """Index of the maximum-fitness individual, earliest on ties."""
    return max(range(len(population)),
               key=lambda i: (rank(population[i]), -i))


def replace_weakest(population, elite):
    """Elitism: put ``elite`` in place of the weakest individual.

    Returns the new list and the displaced individual, or the unchanged
    list and None when a genome equal to the elite's is already present.
    """
    if any(ind.genome == elite.genome for ind in population):
        return list(population), None
    victim = weakest_index(population)
    survivors = list(population)
    displaced = survivors[victim]
    survivors[victim] = elite
    return survivors, displaced
