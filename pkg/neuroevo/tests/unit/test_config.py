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
from oslotest import base

from neuroevo import config
from neuroevo import engine
from neuroevo import exceptions
from neuroevo import genome
from neuroevo.nn import training
from neuroevo import operators


COMBINED = """
name: combined
seed: 7
population_size: 10
generations: 5
workers: 3
fitness:
  time_penalty_per_hour: 0.05
schedule:
  mode: linear
  lo: 30
  hi: 70
operators:
  p_crossover: 0.8
  mutation_weights: {insert_skip: 0.4, insert_pool: 0.2, remove: 0.2,
                     alter: 0.2}
initialization:
  max_depth: 40
  filter_choices: [16, 32]
evaluator:
  kind: surrogate
  surrogate:
    seconds_per_mac_epoch: 3e-8
    tau: 12
dataset:
  kind: synthetic
  synthetic:
    height: 8
    width: 8
"""


class TestExperimentConfig(base.BaseTestCase):
    def test_defaults(self):
        cfg = config.ExperimentConfig()
        self.assertEqual(20, cfg.pop_size)
        self.assertEqual(20, cfg.generations)
        self.assertEqual(20, cfg.schedule.generations_total)
        self.assertEqual('base', cfg.variant)
        self.assertEqual(genome.ShapeSpec(16, 16, 3), cfg.input_shape)

    def test_variants(self):
        linear = engine.EpochSchedule('linear', generations_total=20)
        self.assertEqual('regularised', config.ExperimentConfig(
            penalty_per_hour=0.05).variant)
        self.assertEqual('partial', config.ExperimentConfig(
            schedule=linear).variant)
        self.assertEqual('combined', config.ExperimentConfig(
            schedule=linear, penalty_per_hour=0.05).variant)

    def test_preconditions(self):
        for kwargs in ({'pop_size': 1}, {'generations': 0},
                       {'penalty_per_hour': -0.1}, {'worker_count': 0},
                       {'time_penalty_basis': 'hourly'},
                       {'evaluator': 'gpu'},
                       {'schedule': engine.EpochSchedule(
                           generations_total=5)}):
            self.assertRaises(ValueError, config.ExperimentConfig, **kwargs)

    def test_replace(self):
        cfg = config.ExperimentConfig().replace(worker_count=4)
        self.assertEqual(4, cfg.worker_count)


class TestManifest(base.BaseTestCase):
    def test_combined_manifest(self):
        cfg = config.parse_manifest(COMBINED)
        self.assertEqual('combined', cfg.variant)
        self.assertEqual(7, cfg.seed)
        self.assertEqual(10, cfg.pop_size)
        self.assertEqual(3, cfg.worker_count)
        self.assertEqual(5, cfg.schedule.generations_total)
        self.assertEqual(0.05, cfg.penalty_per_hour)
        self.assertEqual(3e-8, cfg.surrogate.seconds_per_mac_epoch)
        self.assertEqual(12.0, cfg.surrogate.tau)
        self.assertEqual((16, 32), cfg.init.filter_choices)
        self.assertEqual((16, 32), cfg.operators.filter_choices)
        self.assertEqual(0.4, cfg.operators.mutation_weights[
            operators.Mutation.INSERT_SKIP])
        self.assertEqual(genome.ShapeSpec(8, 8, 3), cfg.input_shape)
        self.assertEqual(training.PARTIAL_DECAY_POINTS,
                         cfg.training.lr.decay_after_epochs)

    def test_empty_manifest_is_base(self):
        cfg = config.parse_manifest('{}')
        self.assertEqual('base', cfg.variant)
        self.assertEqual(training.BASELINE_DECAY_POINTS,
                         cfg.training.lr.decay_after_epochs)
        self.assertTrue(cfg.dataset.leak_free)

    def test_test_fold_ranking_is_opt_in(self):
        cfg = config.parse_manifest('dataset: {leak_free: false}')
        self.assertFalse(cfg.dataset.leak_free)

    def test_explicit_decay_points(self):
        cfg = config.parse_manifest(
            'training: {decay_after_epochs: [5, 10], learning_rate: 0.05}')
        self.assertEqual((5, 10), cfg.training.lr.decay_after_epochs)
        self.assertEqual(0.05, cfg.training.lr.initial)

    def test_json_is_accepted(self):
        cfg = config.parse_manifest('{"population_size": 4, '
                                    '"generations": 2}')
        self.assertEqual(4, cfg.pop_size)

    def test_population_of_one_rejected(self):
        ex = self.assertRaises(exceptions.InvalidManifest,
                               config.parse_manifest, 'population_size: 1')
        self.assertIn('at least 2', str(ex))

    def test_unknown_keys_rejected(self):
        for text in ('populaton_size: 4', 'schedule: {mode: flat, top: 3}',
                     'dataset: {synthetic: {depth: 3}}',
                     'evaluator: {kind: surrogate, speed: 2}',
                     'operators: {filter_choices: [64]}'):
            ex = self.assertRaises(exceptions.InvalidManifest,
                                   config.parse_manifest, text)
            self.assertIn('unknown key', str(ex))

    def test_bad_values_rejected(self):
        for text in ('generations: many', 'seed: 1.5',
                     'fitness: {time_penalty_per_hour: lots}',
                     'dataset: {leak_free: maybe}',
                     'schedule: {mode: cosine}',
                     'operators: {mutation_weights: {grow: 1}}',
                     'evaluator: {kind: gpu}', 'training: 3',
                     'dataset: {kind: cifar10}', '- a list', '{unclosed'):
            self.assertRaises(exceptions.InvalidManifest,
                              config.parse_manifest, text)

    def test_load_manifest(self):
        path = os.path.join(self.useFixture(fixtures.TempDir()).path,
                            'run.yaml')
        with open(path, 'w') as f:
            f.write(COMBINED)
        cfg, raw = config.load_manifest(path)
        self.assertEqual(COMBINED.encode(), raw)
        self.assertEqual('combined', cfg.name)
        self.assertRaises(exceptions.InvalidManifest, config.load_manifest,
                          path + '.missing')
