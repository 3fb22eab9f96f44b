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

"""Mini-batch SGD with momentum, stepped learning-rate decay and resume."""

import copy
import dataclasses
import logging

import numpy as np

from neuroevo import exceptions
from neuroevo import genome as genome_mod
from neuroevo.nn import layers
from neuroevo.nn import network


LOG = logging.getLogger(__name__)

BASELINE_DECAY_POINTS = (1, 26, 43)
PARTIAL_DECAY_POINTS = (1, 30, 50)


@dataclasses.dataclass(frozen=True)
class LrSchedule:
    initial: float = 0.1
    decay_factor: float = 0.9
    decay_after_epochs: tuple = BASELINE_DECAY_POINTS

    def __post_init__(self):
        points = tuple(int(p) for p in self.decay_after_epochs)
        if any(b <= a for a, b in zip(points, points[1:])):
            raise ValueError('decay points must be strictly increasing, '
                             'got %s' % (points,))
        if self.initial <= 0 or not 0 < self.decay_factor <= 1:
            raise ValueError('learning rate must be positive and the decay '
                             'factor within (0, 1]')
        object.__setattr__(self, 'decay_after_epochs', points)


@dataclasses.dataclass(frozen=True)
class TrainingConfig:
    batch_size: int = 50
    momentum: float = 0.9
    lr: LrSchedule = dataclasses.field(default_factory=LrSchedule)

    def __post_init__(self):
        if self.batch_size < 1:
            raise ValueError('batch_size must be positive')
        if not 0.0 <= self.momentum < 1.0:
            raise ValueError('momentum must be within [0, 1)')


@dataclasses.dataclass
class ModelState:
    """Everything needed to continue training a genome exactly."""

    genome: genome_mod.Genome
    params: list
    velocity: list
    epochs_completed: int
    rng: np.random.Generator

    @property
    def key(self):
        return self.genome.key

    def copy(self):
        return copy.deepcopy(self)


@dataclasses.dataclass
class TrainingResult:
    state: ModelState
    losses: list


def lr_at_epoch(epoch, schedule):
    """Learning rate for the 0-based epoch index ``epoch``.

    "Decay after k epochs" means the (k+1)-th epoch onward uses the
    decayed rate.
    """
    if epoch < 0:
        raise ValueError('epoch must not be negative, got %d' % epoch)
    elapsed = sum(1 for point in schedule.decay_after_epochs
                  if epoch + 1 > point)
    return schedule.initial * schedule.decay_factor ** elapsed


def sgd_momentum_step(params, velocity, grads, lr, momentum=0.9):
    """Classical momentum, in place: v <- mu*v + g; w <- w - lr*v."""
    for layer_params, layer_velocity, layer_grads in zip(params, velocity,
                                                         grads):
        for name, grad in layer_grads.items():
            v = layer_velocity[name]
            v *= momentum
            v += grad
            layer_params[name] -= lr * v


def init_state(genome, input_shape, num_classes, seed):
    rng = np.random.default_rng(seed)
    params = network.init_params(genome, input_shape, num_classes, rng)
    velocity = [{name: np.zeros_like(value) for name, value in layer.items()}
                for layer in params]
    return ModelState(genome=genome, params=params, velocity=velocity,
                      epochs_completed=0, rng=rng)


def _input_shape(dataset):
    _n, channels, height, width = dataset.images.shape
    return genome_mod.ShapeSpec(height, width, channels)


def train(genome, dataset, epochs_target, resume=None, hyper=None, seed=0):
    """Train ``genome`` until it has seen ``epochs_target`` epochs.

    Continuing from ``resume`` gives bit-identical results to training
    from scratch to the same target, as the epoch counter, momentum and
    shuffling generator all live in the state. ``resume`` itself is not
    modified.

    :raises Diverged: when a mini-batch loss is not finite
    """
    hyper = hyper or TrainingConfig()
    if resume is None:
        state = init_state(genome, _input_shape(dataset),
                           dataset.num_classes, seed)
    else:
        if resume.genome != genome:
            raise ValueError('checkpoint of %s cannot resume %s'
                             % (resume.genome, genome))
        state = resume.copy()
    if epochs_target <= state.epochs_completed:
        raise ValueError('epochs_target %d must exceed the %d epochs '
                         'already trained' % (epochs_target,
                                              state.epochs_completed))
    losses = []
    count = dataset.images.shape[0]
    for epoch in range(state.epochs_completed, epochs_target):
        lr = lr_at_epoch(epoch, hyper.lr)
        order = state.rng.permutation(count)
        for start in range(0, count, hyper.batch_size):
            batch = order[start:start + hyper.batch_size]
            probs, caches = network.forward(genome, state.params,
                                            dataset.images[batch])
            loss, dlogits = layers.cross_entropy(probs,
                                                 dataset.labels[batch])
            if not np.isfinite(loss):
                raise exceptions.Diverged(epoch=epoch + 1)
            grads = network.backward(genome, caches, dlogits)
            sgd_momentum_step(state.params, state.velocity, grads, lr,
                              hyper.momentum)
            losses.append(float(loss))
        state.epochs_completed = epoch + 1
        LOG.debug('%s: epoch %d done, lr %.5f, last loss %.4f',
                  genome, epoch + 1, lr, losses[-1] if losses else 0.0)
    return TrainingResult(state=state, losses=losses)


def test_accuracy(state, dataset):
    """Fraction of ``dataset`` whose argmax prediction is correct."""
    if dataset.images.shape[0] == 0:
        return 0.0
    predicted = network.predict(state.genome, state.params, dataset.images)
    return float(np.mean(predicted == dataset.labels))

