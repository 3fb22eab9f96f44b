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

import testtools

from neuroevo.commands import common
from neuroevo import data
from neuroevo import genome
from neuroevo.nn import training
from neuroevo.tests.functional import base


SYNTHETIC = """
name: desk
seed: 2
population_size: 4
generations: 2
schedule: {mode: flat, epochs: 4}
training:
  batch_size: 20
  learning_rate: 0.05
  decay_after_epochs: [2]
initialization: {min_depth: 1, max_depth: 3, filter_choices: [8, 16]}
evaluator: {kind: cnn}
dataset:
  kind: synthetic
  leak_free: true
  synthetic: {num_classes: 5, samples_per_class: 40, height: 8, width: 8,
              noise: 0.1}
"""

CIFAR10 = """
name: desk-cifar10
population_size: 2
generations: 1
schedule: {mode: flat, epochs: 1}
initialization: {min_depth: 1, max_depth: 2, filter_choices: [8]}
evaluator: {kind: cnn}
dataset:
  kind: cifar10
  directory: %s
  samples_per_class: 10
  downsample_to: 8
"""


class TestDeskLearning(base.BaseTestCase):
    def test_synthetic_networks_learn(self):
        manifest = self.write_manifest('desk.yaml', SYNTHETIC)
        summary = self.run_experiment(manifest, self.path('desk'))
        # chance is 0.2
        self.assertGreater(summary['best_accuracy'], 0.3)
        self.assertTrue(0.0 <= summary['test_accuracy'] <= 1.0)
        self.assertTrue(os.path.exists(
            self.path('desk', common.BEST_FITNESS_CHECKPOINT)))

    @testtools.skipUnless(os.environ.get('NEUROEVO_CIFAR10_DIR'),
                          'NEUROEVO_CIFAR10_DIR is not set')
    def test_cifar10_subset(self):
        manifest = self.write_manifest(
            'cifar10.yaml', CIFAR10 % os.environ['NEUROEVO_CIFAR10_DIR'])
        summary = self.run_experiment(manifest, self.path('cifar10'))
        self.assertEqual(1, summary['generations_completed'])
        self.assertTrue(0.0 <= summary['best_accuracy'] <= 1.0)

    @testtools.skipUnless(os.environ.get('NEUROEVO_CIFAR10_DIR'),
                          'NEUROEVO_CIFAR10_DIR is not set')
    def test_fixed_genome_beats_chance(self):
        full = data.load_cifar10(os.environ['NEUROEVO_CIFAR10_DIR'])
        train = data.desk_subset(full['train'], 100)
        validation = data.desk_subset(full['test'], 100)
        fixed = genome.parse_key('S64.64|PM|S64.64|PM')

        first = training.train(fixed, train, 10, seed=[0, 1])
        second = training.train(fixed, train, 10, seed=[0, 1])
        accuracy = training.test_accuracy(first.state, validation)

        self.assertGreater(accuracy, 0.15)
        self.assertEqual(accuracy,
                         training.test_accuracy(second.state, validation))
