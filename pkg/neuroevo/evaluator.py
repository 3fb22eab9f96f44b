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

"""Fitness evaluation: the evaluator contract and its two implementations.

The CNN evaluator trains the network a genome describes and times the
work with a monotonic clock. The surrogate evaluator replaces training
by a closed-form learning curve and a simulated clock, which keeps GA
dynamics cheap and reproducible; its constants are not claims about real
CNN behaviour.
"""

import abc
import dataclasses
import hashlib
import math
import threading
import typing

from oslo_utils import timeutils

from neuroevo import data
from neuroevo import genome as genome_mod
from neuroevo.nn import training


@dataclasses.dataclass(frozen=True)
class EvaluationRecord:
    """Outcome of one fitness evaluation.

    ``wall_seconds`` covers only this evaluation's work, which is the
    incremental training when resuming; ``total_wall_seconds`` adds the
    time of every earlier evaluation in the genome's resume chain.
    """

    key: str
    epochs: int
    accuracy: float
    wall_seconds: float
    total_wall_seconds: float = None
    worker_id: str = None
    checkpoint_ref: str = None
    resumed_from: int = None

    def __post_init__(self):
        if self.wall_seconds < 0:
            raise ValueError('wall_seconds must not be negative')
        if not 0.0 <= self.accuracy <= 1.0:
            raise ValueError('accuracy %s outside [0, 1]' % self.accuracy)
        if self.total_wall_seconds is None:
            object.__setattr__(self, 'total_wall_seconds', self.wall_seconds)

    def to_dict(self):
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, values):
        return cls(**values)


@dataclasses.dataclass(frozen=True)
class Checkpoint:
    """A partially trained genome; ``state`` is None for the surrogate."""

    epochs: int
    state: object = None


class Evaluation(typing.NamedTuple):
    record: EvaluationRecord
    checkpoint: Checkpoint


class Evaluator(metaclass=abc.ABCMeta):
    """Maps (genome, epoch budget, optional checkpoint) to a record.

    Implementations are deterministic given their construction
    arguments, the genome and the epoch budget.
    """

    name = None

    @abc.abstractmethod
    def evaluate(self, genome, epochs_target, resume_from=None):
        """Train to ``epochs_target`` epochs and test.

        :returns: :class:`Evaluation`
        """

    @staticmethod
    def _check(genome, epochs_target, resume_from):
        if resume_from is not None and epochs_target <= resume_from.epochs:
            raise ValueError('epochs_target %d must exceed the checkpoint '
                             'at %d epochs' % (epochs_target,
                                               resume_from.epochs))
        if epochs_target < 0:
            raise ValueError('epochs_target must not be negative')


def measured_clock(work):
    """Run ``work()`` and time it with a monotonic clock.

    :returns: ``(result, seconds)``
    """
    with timeutils.StopWatch() as watch:
        result = work()
    return result, watch.elapsed()


@dataclasses.dataclass(frozen=True)
class SurrogateParams:
    """Learning curve, time model and accuracy landscape of the surrogate.

    Simulated seconds are ``seconds_per_mac_epoch * macs * epochs`` plus
    ``overhead_seconds`` once per fresh evaluation. The asymptotic
    accuracy is::

        base + skip_weight * (1 - exp(-skips / skip_scale))
             + filter_weight * mean filter size in [0, 1] (64 -> 0, 256 -> 1)
             + pool_weight * min(pools, max_pools - 1) / (max_pools - 1)
             + alternation_weight * share of adjacent skip/pool changes
             + early_pool_weight * mean pool position, 1 first, 0 last
             - depth_penalty * max(0, depth - depth_knee)

    clipped to [floor, ceiling].
    """

    tau: float = 10.0
    seconds_per_mac_epoch: float = 3e-8
    overhead_seconds: float = 40.0
    base: float = 0.35
    skip_weight: float = 0.3
    skip_scale: float = 2.0
    filter_weight: float = 0.02
    pool_weight: float = 0.1
    alternation_weight: float = 0.05
    early_pool_weight: float = 0.1
    depth_knee: int = 40
    depth_penalty: float = 0.002
    floor: float = 0.05
    ceiling: float = 0.95

    def __post_init__(self):
        if self.tau <= 0 or self.seconds_per_mac_epoch <= 0:
            raise ValueError('tau and seconds_per_mac_epoch must be positive')
        if self.overhead_seconds < 0:
            raise ValueError('overhead_seconds must not be negative')
        if not 0.0 <= self.floor <= self.ceiling <= 1.0:
            raise ValueError('need 0 <= floor <= ceiling <= 1')


class SimulatedClock:
    """Wall time of the surrogate: linear in MACs and epochs."""

    def __init__(self, params):
        self.params = params

    def seconds(self, mac_count, epochs, overhead=True):
        variable = self.params.seconds_per_mac_epoch * mac_count * epochs
        return variable + (self.params.overhead_seconds if overhead else 0.0)


def a_max(genome, input_shape, params):
    """Asymptotic surrogate accuracy of a genome, see SurrogateParams."""
    skips = [g for g in genome.layers if isinstance(g, genome_mod.SkipGene)]
    capacity = 1.0 - math.exp(-len(skips) / params.skip_scale)
    if skips:
        sizes = [(math.log2(g.filters_1 / 64.0) + math.log2(
            g.filters_2 / 64.0)) / 4.0 for g in skips]
        filters = min(1.0, max(0.0, sum(sizes) / len(sizes)))
    else:
        filters = 0.0
    useful_pools = max(1, genome_mod.max_pools(input_shape) - 1)
    pools = min(genome.pool_count, useful_pools) / useful_pools
    changes = sum(1 for a, b in zip(genome.layers, genome.layers[1:])
                  if type(a) is not type(b))
    alternation = changes / (len(genome) - 1) if len(genome) > 1 else 0.0
    positions = [index for index, gene in enumerate(genome.layers)
                 if isinstance(gene, genome_mod.PoolGene)]
    if len(genome) > 1 and positions:
        early = 1.0 - sum(positions) / (len(positions) * (len(genome) - 1))
    else:
        early = float(bool(positions))
    value = (params.base
             + params.skip_weight * capacity
             + params.filter_weight * filters
             + params.pool_weight * pools
             + params.alternation_weight * alternation
             + params.early_pool_weight * early
             - params.depth_penalty * max(0, len(genome) - params.depth_knee))
    return min(params.ceiling, max(params.floor, value))


def surrogate_accuracy(genome, epochs, input_shape, params):
    """``a_max * (1 - exp(-epochs / tau))``."""
    return (a_max(genome, input_shape, params)
            * (1.0 - math.exp(-epochs / params.tau)))


class SurrogateEvaluator(Evaluator):
    name = 'surrogate'

    def __init__(self, input_shape, num_classes=10, params=None):
        self.input_shape = input_shape
        self.num_classes = num_classes
        self.params = params or SurrogateParams()
        self.clock = SimulatedClock(self.params)

    def evaluate(self, genome, epochs_target, resume_from=None):
        self._check(genome, epochs_target, resume_from)
        macs = genome_mod.cost_estimate(genome, self.input_shape,
                                        self.num_classes).mac_count
        if resume_from is None:
            seconds = self.clock.seconds(macs, epochs_target)
        else:
            seconds = self.clock.seconds(
                macs, epochs_target - resume_from.epochs, overhead=False)
        record = EvaluationRecord(
            key=genome.key,
            epochs=epochs_target,
            accuracy=surrogate_accuracy(genome, epochs_target,
                                        self.input_shape, self.params),
            wall_seconds=seconds,
            worker_id=threading.current_thread().name,
            resumed_from=resume_from.epochs if resume_from else None)
        return Evaluation(record, Checkpoint(epochs_target))


class CNNEvaluator(Evaluator):
    """Trains on ``train_set`` and ranks by accuracy on ``eval_set``."""

    name = 'cnn'

    def __init__(self, train_set, eval_set, hyper=None, seed=0):
        self.train_set = train_set
        self.eval_set = eval_set
        self.hyper = hyper or training.TrainingConfig()
        self.seed = seed

    def model_seed(self, genome):
        digest = hashlib.sha256(genome.key.encode('ascii')).digest()
        return [self.seed, int.from_bytes(digest[:8], 'little')]

    def evaluate(self, genome, epochs_target, resume_from=None):
        self._check(genome, epochs_target, resume_from)
        resume_state = resume_from.state if resume_from else None

        def work():
            result = training.train(genome, self.train_set, epochs_target,
                                    resume=resume_state, hyper=self.hyper,
                                    seed=self.model_seed(genome))
            return (result.state,
                    training.test_accuracy(result.state, self.eval_set))

        (state, accuracy), seconds = measured_clock(work)
        record = EvaluationRecord(
            key=genome.key,
            epochs=epochs_target,
            accuracy=accuracy,
            wall_seconds=seconds,
            worker_id=threading.current_thread().name,
            resumed_from=resume_from.epochs if resume_from else None)
        return Evaluation(record, Checkpoint(epochs_target, state))


EVALUATORS = {
    SurrogateEvaluator.name: SurrogateEvaluator,
    CNNEvaluator.name: CNNEvaluator,
}


def get_evaluator_class(name):
    try:
        return EVALUATORS[name]
    except KeyError:
        raise ValueError('Unknown evaluator %r, expected one of: %s'
                         % (name, ', '.join(sorted(EVALUATORS))))


def make_evaluator(cfg, splits=None):
    """Build the evaluator an experiment configuration asks for.

    :param splits: datasets from :func:`neuroevo.data.build_splits`;
        built from ``cfg.dataset`` when omitted and needed
    """
    cls = get_evaluator_class(cfg.evaluator)
    if cls is SurrogateEvaluator:
        return cls(cfg.input_shape, cfg.num_classes, cfg.surrogate)
    splits = splits or data.build_splits(cfg.dataset, cfg.seed)
    return cls(splits['train'], splits['validation'], cfg.training,
               cfg.seed)
