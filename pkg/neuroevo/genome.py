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

"""Topology genome: layer genes, validity, initialization and identity.

A genome is the ordered feature-extraction stack of a CNN. Skip genes are
residual blocks of two 3x3 convolutions, pool genes halve the resolution.
The classifier (flatten, one linear layer, softmax) is implicit and never
part of the genome.
"""

import dataclasses
import enum
import math

from neuroevo import exceptions


FILTER_CHOICES = (64, 128, 256)
EMPTY_KEY = 'E'


class PoolKind(enum.Enum):
    MAX = 'M'
    AVERAGE = 'A'

    def flipped(self):
        return PoolKind.AVERAGE if self is PoolKind.MAX else PoolKind.MAX


@dataclasses.dataclass(frozen=True)
class SkipGene:
    filters_1: int
    filters_2: int

    def __post_init__(self):
        if self.filters_1 < 1 or self.filters_2 < 1:
            raise ValueError('filter counts must be positive, got %s/%s'
                             % (self.filters_1, self.filters_2))

    @property
    def token(self):
        return 'S%d.%d' % (self.filters_1, self.filters_2)


@dataclasses.dataclass(frozen=True)
class PoolGene:
    kind: PoolKind

    @property
    def token(self):
        return 'P' + self.kind.value


@dataclasses.dataclass(frozen=True)
class ShapeSpec:
    height: int
    width: int
    channels: int

    def __post_init__(self):
        if min(self.height, self.width, self.channels) < 1:
            raise ValueError('all shape fields must be >= 1, got %s' % (self,))

    def __str__(self):
        return '%dx%dx%d' % (self.height, self.width, self.channels)

    @property
    def size(self):
        return self.height * self.width * self.channels


@dataclasses.dataclass(frozen=True)
class InitConfig:
    """Parameters of random genome initialization."""

    min_depth: int = 10
    max_depth: int = 120
    filter_choices: tuple = FILTER_CHOICES
    skip_probability: float = 0.5

    def __post_init__(self):
        if not 1 <= self.min_depth <= self.max_depth:
            raise ValueError('depth bounds must satisfy 1 <= min <= max, '
                             'got [%d, %d]' % (self.min_depth, self.max_depth))
        if not self.filter_choices:
            raise ValueError('filter_choices must not be empty')
        if not 0.0 <= self.skip_probability <= 1.0:
            raise ValueError('skip_probability must be within [0, 1]')


@dataclasses.dataclass(frozen=True)
class Genome:
    layers: tuple = ()

    def __post_init__(self):
        # Accept any sequence but store a tuple so genomes stay hashable.
        object.__setattr__(self, 'layers', tuple(self.layers))

    def __len__(self):
        return len(self.layers)

    def __iter__(self):
        return iter(self.layers)

    def __getitem__(self, index):
        if isinstance(index, slice):
            return Genome(self.layers[index])
        return self.layers[index]

    def __add__(self, other):
        return Genome(self.layers + other.layers)

    @property
    def pool_count(self):
        return sum(1 for gene in self.layers if isinstance(gene, PoolGene))

    @property
    def key(self):
        return canonical_key(self)

    def __str__(self):
        return self.key


def max_pools(input_shape):
    """Number of 2x2 pools an input tolerates before going below a pixel."""
    return int(math.floor(math.log2(min(input_shape.height,
                                        input_shape.width))))


def output_shape(genome, input_shape):
    """Feature map shape produced by the genome, before the classifier.

    :raises InvalidGenome: if a pool would take a dimension below 1 pixel
    """
    height, width, channels = (input_shape.height, input_shape.width,
                               input_shape.channels)
    for index, gene in enumerate(genome.layers):
        if isinstance(gene, SkipGene):
            channels = gene.filters_2
        else:
            if height < 2 or width < 2:
                raise exceptions.InvalidGenome(
                    key=canonical_key(genome),
                    reason='pool at depth %d reduces %dx%d below one pixel'
                           % (index, height, width))
            height //= 2
            width //= 2
    return ShapeSpec(height, width, channels)


def is_valid(genome, input_shape):
    return genome.pool_count <= max_pools(input_shape)


def random_genome(rng, input_shape, cfg=None):
    """Build a random valid genome.

    Draws a maximum depth uniformly from [min_depth, max_depth], then keeps
    appending skip or pool genes with equal probability. Generation stops
    at the first pool draw that would go below one pixel, or when the
    genome reaches the maximum depth.

    :param rng: a ``numpy.random.Generator``
    """
    cfg = cfg or InitConfig()
    if min(input_shape.height, input_shape.width) < 2:
        raise ValueError('input resolution must be at least 2, got %s'
                         % input_shape)
    depth_limit = int(rng.integers(cfg.min_depth, cfg.max_depth + 1))
    pool_limit = max_pools(input_shape)
    layers = []
    pools = 0
    while len(layers) < depth_limit:
        if rng.random() < cfg.skip_probability:
            layers.append(SkipGene(
                int(rng.choice(cfg.filter_choices)),
                int(rng.choice(cfg.filter_choices))))
            continue
        if pools == pool_limit:
            break
        kind = PoolKind.MAX if rng.random() < 0.5 else PoolKind.AVERAGE
        layers.append(PoolGene(kind))
        pools += 1
    return Genome(layers)


def canonical_key(genome):
    """ASCII identity of a genome, e.g. ``S64.128|PM|PA``; ``E`` if empty."""
    if not genome.layers:
        return EMPTY_KEY
    return '|'.join(gene.token for gene in genome.layers)


def parse_key(key):
    """Inverse of :func:`canonical_key`."""
    if key == EMPTY_KEY:
        return Genome()
    layers = []
    for token in key.split('|'):
        if token in ('PM', 'PA'):
            layers.append(PoolGene(PoolKind(token[1])))
            continue
        filters = token[1:].split('.')
        if (not token.startswith('S') or len(filters) != 2
                or not all(f.isdigit() and f.isascii() for f in filters)):
            raise ValueError('invalid genome token %r in key %r'
                             % (token, key))
        layers.append(SkipGene(int(filters[0]), int(filters[1])))
    return Genome(layers)


@dataclasses.dataclass(frozen=True)
class CostEstimate:
    conv_macs: int
    classifier_macs: int
    param_count: int

    @property
    def mac_count(self):
        return self.conv_macs + self.classifier_macs


def cost_estimate(genome, input_shape, num_classes=10):
    """Multiply-accumulates per image and weight count of the network.

    Every skip gene costs two same-padded 3x3 convolutions, plus a 1x1
    projection on the shortcut when its input channels differ from
    ``filters_2``. Biases count as parameters but not as MACs.
    """
    output_shape(genome, input_shape)
    height, width, channels = (input_shape.height, input_shape.width,
                               input_shape.channels)
    conv_macs = 0
    params = 0
    for gene in genome.layers:
        if isinstance(gene, PoolGene):
            height //= 2
            width //= 2
            continue
        pixels = height * width
        conv_macs += pixels * 9 * channels * gene.filters_1
        conv_macs += pixels * 9 * gene.filters_1 * gene.filters_2
        params += 9 * channels * gene.filters_1 + gene.filters_1
        params += 9 * gene.filters_1 * gene.filters_2 + gene.filters_2
        if channels != gene.filters_2:
            conv_macs += pixels * channels * gene.filters_2
            params += channels * gene.filters_2 + gene.filters_2
        channels = gene.filters_2
    features = height * width * channels
    classifier_macs = features * num_classes
    params += features * num_classes + num_classes
    return CostEstimate(conv_macs, classifier_macs, params)


def render(genome, input_shape=None):
    """Human readable layer stack, one line per layer, classifier last."""
    lines = []
    shape = input_shape
    for gene in genome.layers:
        if isinstance(gene, SkipGene):
            text = 'skip     conv3x3(%d) -> conv3x3(%d)' % (gene.filters_1,
                                                          gene.filters_2)
        else:
            text = 'pool     %s 2x2' % (
                'max' if gene.kind is PoolKind.MAX else 'average')
        if shape is not None:
            shape = output_shape(Genome([gene]), shape)
            text = '%-42s %s' % (text, shape)
        lines.append(text)
    lines.append('linear   softmax classifier')
    return '\n'.join(lines)
