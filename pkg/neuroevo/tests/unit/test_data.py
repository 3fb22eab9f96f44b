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

import os

import fixtures
import numpy as np
from oslotest import base

from neuroevo import data
from neuroevo import exceptions
from neuroevo import genome


def fake_batch(count, seed):
    rng = np.random.default_rng(seed)
    return data.RawBatch(
        labels=(np.arange(count) % 10).astype(np.uint8),
        pixels=rng.integers(0, 256, size=(count, 3, 32, 32), dtype=np.uint8))


def write_cifar10(directory, per_file=20, test=50):
    for index, name in enumerate(data.TRAIN_FILES):
        with open(os.path.join(directory, name), 'wb') as f:
            f.write(data.serialize_batch(fake_batch(per_file, index)))
    with open(os.path.join(directory, data.TEST_FILE), 'wb') as f:
        f.write(data.serialize_batch(fake_batch(test, 99)))


class TestBinaryFormat(base.BaseTestCase):
    def test_byte_exact_round_trip(self):
        blob = data.serialize_batch(fake_batch(7, 0))
        self.assertEqual(7 * data.RECORD_SIZE, len(blob))
        self.assertEqual(blob, data.serialize_batch(data.parse_batch(blob)))

    def test_record_layout(self):
        batch = fake_batch(2, 1)
        blob = data.serialize_batch(batch)
        self.assertEqual(1, blob[data.RECORD_SIZE])
        # red plane first, row-major
        self.assertEqual(batch.pixels[0, 0, 0, 1], blob[2])
        self.assertEqual(batch.pixels[0, 1, 0, 0], blob[1 + 1024])

    def test_truncated_record(self):
        blob = data.serialize_batch(fake_batch(3, 0))
        ex = self.assertRaises(exceptions.DatasetFormatError,
                               data.parse_batch, blob[:-1], 'cut.bin')
        self.assertIn('cut.bin', str(ex))

    def test_bad_label(self):
        blob = bytearray(data.serialize_batch(fake_batch(3, 0)))
        blob[data.RECORD_SIZE] = 255
        ex = self.assertRaises(exceptions.DatasetFormatError,
                               data.parse_batch, bytes(blob))
        self.assertIn('record 1', str(ex))

    def test_missing_file(self):
        self.assertRaises(exceptions.DatasetFormatError, data.read_batch,
                          '/nonexistent/data_batch_1.bin')


class TestLoadCifar10(base.BaseTestCase):
    def setUp(self):
        super(TestLoadCifar10, self).setUp()
        self.directory = self.useFixture(fixtures.TempDir()).path
        write_cifar10(self.directory)

    def test_load(self):
        splits = data.load_cifar10(self.directory)
        self.assertEqual((100, 3, 32, 32), splits['train'].images.shape)
        self.assertEqual((50, 3, 32, 32), splits['test'].images.shape)
        np.testing.assert_allclose(
            np.zeros(3), splits['train'].images.mean(axis=(0, 2, 3)),
            atol=1e-9)
        np.testing.assert_allclose(
            np.ones(3), splits['train'].images.std(axis=(0, 2, 3)))
        self.assertEqual(genome.ShapeSpec(32, 32, 3), splits['test'].shape)

    def test_missing_batch(self):
        os.remove(os.path.join(self.directory, data.TRAIN_FILES[2]))
        self.assertRaises(exceptions.DatasetFormatError, data.load_cifar10,
                          self.directory)

    def test_desk_subset(self):
        train = data.load_cifar10(self.directory)['train']
        subset = data.desk_subset(train, 4, downsample_to=8, seed=1)
        self.assertEqual((40, 3, 8, 8), subset.images.shape)
        np.testing.assert_array_equal(np.full(10, 4),
                                      np.bincount(subset.labels))
        again = data.desk_subset(train, 4, downsample_to=8, seed=1)
        np.testing.assert_array_equal(subset.images, again.images)
        self.assertRaises(ValueError, data.desk_subset, train, 11)

    def test_build_splits(self):
        spec = data.DatasetSpec(kind='cifar10', directory=self.directory,
                                samples_per_class=5, downsample_to=16,
                                leak_free=True, validation_size=10)
        splits = data.build_splits(spec, seed=0)
        self.assertEqual(40, len(splits['train']))
        self.assertEqual(10, len(splits['validation']))
        self.assertEqual(50, len(splits['test']))
        self.assertEqual('validation', splits['validation'].split)
        self.assertEqual(spec.shape, splits['train'].shape)


class TestTransforms(base.BaseTestCase):
    def test_downsample_averages_blocks(self):
        images = np.arange(16.0).reshape(1, 1, 4, 4)
        np.testing.assert_array_equal([[[[2.5, 4.5], [10.5, 12.5]]]],
                                      data.downsample(images, 2))
        self.assertRaises(ValueError, data.downsample, images, 3)
        self.assertRaises(ValueError, data.downsample, images, 8)

    def test_split_validation_takes_the_tail(self):
        dataset = data.Dataset(np.arange(10.0).reshape(10, 1, 1, 1),
                               np.arange(10) % 2, 'train', num_classes=2)
        train, validation = data.split_validation(dataset, 3)
        self.assertEqual(7, len(train))
        np.testing.assert_array_equal([7.0, 8.0, 9.0],
                                      validation.images.ravel())
        self.assertRaises(ValueError, data.split_validation, dataset, 10)

    def test_constant_channel_is_not_divided_by_zero(self):
        images = np.ones((4, 2, 2, 2))
        mean, std = data.channel_statistics(images)
        np.testing.assert_array_equal(np.zeros((4, 2, 2, 2)),
                                      data.standardise(images, mean, std))


class TestSynthetic(base.BaseTestCase):
    spec = data.SyntheticSpec(samples_per_class=100, height=8, width=8,
                              channels=1)

    def test_balanced_and_seeded(self):
        a = data.synthetic_dataset(self.spec, seed=3)
        b = data.synthetic_dataset(self.spec, seed=3)
        self.assertEqual((1000, 1, 8, 8), a.images.shape)
        np.testing.assert_array_equal(np.full(10, 100),
                                      np.bincount(a.labels))
        np.testing.assert_array_equal(a.images, b.images)

    def test_linearly_learnable(self):
        train = data.synthetic_dataset(self.spec, seed=0)
        test = data.synthetic_dataset(self.spec, seed=1, split='test')

        def features(dataset):
            flat = dataset.images.reshape(len(dataset), -1)
            return np.hstack([flat, np.ones((len(dataset), 1))])

        weights, *_rest = np.linalg.lstsq(features(train),
                                          np.eye(10)[train.labels],
                                          rcond=None)
        predicted = (features(test) @ weights).argmax(axis=1)
        self.assertGreater(np.mean(predicted == test.labels), 0.3)

    def test_build_splits(self):
        spec = data.DatasetSpec(synthetic=self.spec)
        splits = data.build_splits(spec, seed=0)
        self.assertEqual(900, len(splits['train']))
        self.assertEqual(100, len(splits['validation']))
        self.assertIsNot(splits['test'], splits['validation'])
        test_fold = data.build_splits(
            data.DatasetSpec(synthetic=self.spec, leak_free=False), seed=0)
        self.assertIs(test_fold['test'], test_fold['validation'])
        self.assertEqual(1000, len(test_fold['train']))
        self.assertEqual(genome.ShapeSpec(8, 8, 1), spec.shape)


class TestDatasetSpec(base.BaseTestCase):
    def test_cifar_shape(self):
        spec = data.DatasetSpec(kind='cifar10', directory='/data',
                                downsample_to=8)
        self.assertEqual(genome.ShapeSpec(8, 8, 3), spec.shape)
        self.assertEqual(10, spec.num_classes)

    def test_invalid(self):
        self.assertRaises(ValueError, data.DatasetSpec, kind='mnist')
        self.assertRaises(ValueError, data.DatasetSpec, kind='cifar10')
