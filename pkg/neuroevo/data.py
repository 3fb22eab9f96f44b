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

"""Datasets: the CIFAR10 binary format, desk-scale subsets, synthetic sets.

A CIFAR10 binary batch is a sequence of 3073-byte records: one label
byte followed by 3072 pixel bytes, the red, green and blue 32x32 planes
in row-major order.
"""

import dataclasses
import logging
import math
import os

import numpy as np

from neuroevo import exceptions
from neuroevo import genome as genome_mod


LOG = logging.getLogger(__name__)

CIFAR10_CLASSES = 10
CIFAR10_SIDE = 32
RECORD_SIZE = 1 + 3 * CIFAR10_SIDE * CIFAR10_SIDE
RECORDS_PER_FILE = 10000
TRAIN_FILES = tuple('data_batch_%d.bin' % i for i in range(1, 6))
TEST_FILE = 'test_batch.bin'


@dataclasses.dataclass(frozen=True)
class Dataset:
    images: np.ndarray
    labels: np.ndarray
    split: str
    num_classes: int = CIFAR10_CLASSES

    def __post_init__(self):
        if self.images.ndim != 4:
            raise ValueError('images must be N x C x H x W')
        if self.images.shape[0] != self.labels.shape[0]:
            raise ValueError('%d images but %d labels'
                             % (self.images.shape[0], self.labels.shape[0]))
        if self.labels.size and (self.labels.min() < 0
                                 or self.labels.max() >= self.num_classes):
            raise ValueError('labels must lie in [0, %d)' % self.num_classes)

    def __len__(self):
        return self.labels.shape[0]

    @property
    def shape(self):
        _n, channels, height, width = self.images.shape
        return genome_mod.ShapeSpec(height, width, channels)

    def take(self, indices, split=None):
        return Dataset(self.images[indices], self.labels[indices],
                       split or self.split, self.num_classes)


@dataclasses.dataclass(frozen=True)
class RawBatch:
    """Undecoded CIFAR10 records: uint8 labels and N x 3 x 32 x 32 pixels."""

    labels: np.ndarray
    pixels: np.ndarray


def parse_batch(data, path='<bytes>'):
    if len(data) % RECORD_SIZE:
        raise exceptions.DatasetFormatError(
            path=path, reason='size %d is not a multiple of %d'
                              % (len(data), RECORD_SIZE))
    records = np.frombuffer(data, dtype=np.uint8).reshape(-1, RECORD_SIZE)
    labels = records[:, 0].copy()
    bad = np.flatnonzero(labels >= CIFAR10_CLASSES)
    if bad.size:
        raise exceptions.DatasetFormatError(
            path=path, reason='record %d has label byte %d'
                              % (bad[0], labels[bad[0]]))
    pixels = records[:, 1:].reshape(-1, 3, CIFAR10_SIDE, CIFAR10_SIDE).copy()
    return RawBatch(labels=labels, pixels=pixels)


def serialize_batch(batch):
    count = batch.labels.shape[0]
    records = np.empty((count, RECORD_SIZE), dtype=np.uint8)
    records[:, 0] = batch.labels
    records[:, 1:] = batch.pixels.reshape(count, -1)
    return records.tobytes()


def read_batch(path):
    try:
        with open(path, 'rb') as f:
            data = f.read()
    except FileNotFoundError as exc:
        raise exceptions.DatasetFormatError(
            path=path, reason='file is missing') from exc
    return parse_batch(data, path)


def _concat(batches):
    return RawBatch(labels=np.concatenate([b.labels for b in batches]),
                    pixels=np.concatenate([b.pixels for b in batches]))


def channel_statistics(images):
    mean = images.mean(axis=(0, 2, 3))
    std = images.std(axis=(0, 2, 3))
    return mean, np.where(std > 0, std, 1.0)


def standardise(images, mean, std):
    return (images - mean[None, :, None, None]) / std[None, :, None, None]


def load_cifar10(directory):
    """Read the five training batches and the test batch.

    Pixels are scaled to [0, 1] and standardised per channel with the
    training split's statistics.

    :returns: dict with ``train`` (50000 images) and ``test`` (10000)
    """
    raw_train = _concat([read_batch(os.path.join(directory, name))
                         for name in TRAIN_FILES])
    raw_test = read_batch(os.path.join(directory, TEST_FILE))
    train_images = raw_train.pixels.astype(np.float64) / 255.0
    test_images = raw_test.pixels.astype(np.float64) / 255.0
    mean, std = channel_statistics(train_images)
    LOG.info('Loaded CIFAR10 from %s: %d train, %d test images',
             directory, len(raw_train.labels), len(raw_test.labels))
    return {
        'train': Dataset(standardise(train_images, mean, std),
                         raw_train.labels.astype(np.int64), 'train'),
        'test': Dataset(standardise(test_images, mean, std),
                        raw_test.labels.astype(np.int64), 'test'),
    }


def split_validation(dataset, size):
    """Reserve the last ``size`` images as a validation split."""
    if not 0 < size < len(dataset):
        raise ValueError('validation size %d must be within (0, %d)'
                         % (size, len(dataset)))
    cut = len(dataset) - size
    return (dataset.take(np.arange(cut), 'train'),
            dataset.take(np.arange(cut, len(dataset)), 'validation'))


def downsample(images, resolution):
    """Average 2x2 blocks until the images are ``resolution`` pixels wide."""
    side = images.shape[-1]
    if resolution > side or side % resolution:
        raise ValueError('cannot downsample %d pixels to %d'
                         % (side, resolution))
    steps = math.log2(side // resolution)
    if not steps.is_integer():
        raise ValueError('downsampling factor %d is not a power of two'
                         % (side // resolution))
    for _step in range(int(steps)):
        n, c, h, w = images.shape
        images = images.reshape(n, c, h // 2, 2, w // 2, 2).mean(axis=(3, 5))
    return images


def desk_subset(dataset, n_per_class, downsample_to=None, seed=0):
    """Class-balanced, seeded subset, optionally downsampled."""
    rng = np.random.default_rng(seed)
    chosen = []
    for label in range(dataset.num_classes):
        members = np.flatnonzero(dataset.labels == label)
        if members.size < n_per_class:
            raise ValueError('class %d has %d samples, %d requested'
                             % (label, members.size, n_per_class))
        chosen.append(rng.choice(members, size=n_per_class, replace=False))
    indices = np.sort(np.concatenate(chosen))
    subset = dataset.take(indices)
    if downsample_to and downsample_to != subset.shape.width:
        subset = Dataset(downsample(subset.images, downsample_to),
                         subset.labels, subset.split, subset.num_classes)
    return subset


@dataclasses.dataclass(frozen=True)
class SyntheticSpec:
    num_classes: int = 10
    samples_per_class: int = 100
    height: int = 16
    width: int = 16
    channels: int = 3
    noise: float = 0.5

    def __post_init__(self):
        if self.num_classes < 2 or self.samples_per_class < 1:
            raise ValueError('need at least 2 classes and 1 sample each')
        if self.noise < 0:
            raise ValueError('noise must not be negative')


def synthetic_dataset(spec, seed, split='train'):
    """Oriented-gradient images, one orientation per class, plus noise.

    Class ``k`` is a linear ramp at angle ``k * pi / K`` with a random
    per-image amplitude in [0.5, 1.5]; channels carry the same ramp with
    fixed gains. Gaussian pixel noise of std ``spec.noise`` is added.
    """
    rng = np.random.default_rng(seed)
    ys = np.linspace(-1.0, 1.0, spec.height)[:, None]
    xs = np.linspace(-1.0, 1.0, spec.width)[None, :]
    gains = np.linspace(1.0, 0.5, spec.channels)[:, None, None]
    labels = np.repeat(np.arange(spec.num_classes),
                       spec.samples_per_class)
    labels = labels[rng.permutation(labels.size)]
    angles = labels * np.pi / spec.num_classes
    amplitude = rng.uniform(0.5, 1.5, size=labels.size)
    ramps = (np.cos(angles)[:, None, None] * xs
             + np.sin(angles)[:, None, None] * ys)
    images = (amplitude[:, None, None, None] * gains[None]
              * ramps[:, None, :, :])
    if spec.noise:
        images = images + rng.normal(0.0, spec.noise, size=images.shape)
    return Dataset(images, labels.astype(np.int64), split, spec.num_classes)


@dataclasses.dataclass(frozen=True)
class DatasetSpec:
    """Where evaluation data comes from and how it is split.

    ``kind`` is ``synthetic`` or ``cifar10``. For CIFAR10,
    ``samples_per_class`` selects a class-balanced subset and
    ``downsample_to`` shrinks the images. By default (``leak_free``) the
    fitness is measured on a validation split held out of the training
    images; otherwise the test split is used for fitness as well.
    """

    kind: str = 'synthetic'
    directory: str = None
    samples_per_class: int = None
    downsample_to: int = None
    validation_size: int = None
    leak_free: bool = True
    synthetic: SyntheticSpec = SyntheticSpec()

    def __post_init__(self):
        if self.kind not in ('synthetic', 'cifar10'):
            raise ValueError("dataset kind must be 'synthetic' or "
                             "'cifar10', got %r" % self.kind)
        if self.kind == 'cifar10' and not self.directory:
            raise ValueError('a cifar10 dataset needs a directory')

    @property
    def shape(self):
        if self.kind == 'synthetic':
            return genome_mod.ShapeSpec(self.synthetic.height,
                                        self.synthetic.width,
                                        self.synthetic.channels)
        side = self.downsample_to or CIFAR10_SIDE
        return genome_mod.ShapeSpec(side, side, 3)

    @property
    def num_classes(self):
        if self.kind == 'synthetic':
            return self.synthetic.num_classes
        return CIFAR10_CLASSES


def build_splits(spec, seed=0):
    """Materialise ``train``, ``validation`` and ``test`` datasets."""
    if spec.kind == 'synthetic':
        train = synthetic_dataset(spec.synthetic, [seed, 0], 'train')
        test = synthetic_dataset(spec.synthetic, [seed, 1], 'test')
    else:
        full = load_cifar10(spec.directory)
        train, test = full['train'], full['test']
        if spec.samples_per_class:
            n = spec.samples_per_class
            train = desk_subset(train, n, spec.downsample_to, seed)
            test = desk_subset(test, min(n, RECORDS_PER_FILE // 10),
                               spec.downsample_to, seed)
        elif spec.downsample_to:
            train = Dataset(downsample(train.images, spec.downsample_to),
                            train.labels, 'train')
            test = Dataset(downsample(test.images, spec.downsample_to),
                           test.labels, 'test')
    if spec.leak_free:
        size = spec.validation_size or len(train) // 10
        train, validation = split_validation(train, size)
    else:
        validation = test
    LOG.debug('Dataset splits: %d train, %d validation, %d test',
              len(train), len(validation), len(test))
    return {'train': train, 'validation': validation, 'test': test}
