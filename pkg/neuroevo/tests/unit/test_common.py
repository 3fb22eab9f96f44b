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

import argparse
import os

import fixtures
from osc_lib import exceptions as osc_exceptions
import oslotest.base as base

from neuroevo.commands import common
from neuroevo import config
from neuroevo import engine
from neuroevo import exceptions
from neuroevo import store


class TestCommon(base.BaseTestCase):
    def setUp(self):
        super(TestCommon, self).setUp()
        self.cfg = config.ExperimentConfig(pop_size=4, generations=2)
        self.run_dir = store.RunDirectory(os.path.join(
            self.useFixture(fixtures.TempDir()).path, 'run'))

    def test_wrap_domain_errors(self):
        def fail():
            with common.wrap_domain_errors():
                raise exceptions.InvalidManifest(reason='bad seed')

        ex = self.assertRaises(osc_exceptions.CommandError, fail)
        self.assertEqual('Invalid run manifest: bad seed', str(ex))
        self.assertIsInstance(ex.__cause__, exceptions.InvalidManifest)

    def test_wrap_domain_errors_passes_other_errors(self):
        def fail():
            with common.wrap_domain_errors():
                raise KeyError('generation')

        self.assertRaises(KeyError, fail)

    def test_apply_overrides(self):
        self.assertIs(self.cfg, common.apply_overrides(
            self.cfg, argparse.Namespace(workers=None)))
        self.assertIs(self.cfg, common.apply_overrides(
            self.cfg, argparse.Namespace()))
        cfg = common.apply_overrides(self.cfg,
                                     argparse.Namespace(workers=4))
        self.assertEqual(4, cfg.worker_count)
        self.assertEqual(self.cfg.seed, cfg.seed)
        self.assertRaises(osc_exceptions.CommandError,
                          common.apply_overrides, self.cfg,
                          argparse.Namespace(workers=0))

    def test_load_state_of_new_run(self):
        self.run_dir.create(b'{}')
        state = common.load_state(self.run_dir, self.run_dir.read_state())
        self.assertEqual(0, state.generation)
        self.assertEqual([], state.population)
        self.assertEqual(self.run_dir.checkpoint_dir,
                         state.checkpoints.directory)

    def test_load_state_history_mismatch(self):
        self.run_dir.create(b'{}')
        ex = self.assertRaises(exceptions.CorruptRunState,
                               common.load_state, self.run_dir,
                               {'generation': 2})
        self.assertIn('history holds 0 generations', str(ex))

    def test_summarize_empty_state(self):
        self.run_dir.create(b'{}')
        summary = common.summarize(self.cfg, self.run_dir,
                                   engine.RunState())
        self.assertEqual(set(common.SUMMARY_FIELDS), set(summary))
        self.assertEqual(0, summary['generations_completed'])
        self.assertIsNone(summary['best_fitness_key'])
        self.assertEqual(0.0, summary['wall_hours'])
        self.assertEqual('base', summary['variant'])
