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

import csv
import io

from neuroevo.commands import common
from neuroevo.commands import report
from neuroevo import store
from neuroevo.tests.functional import base


BASE = """
name: base
seed: 3
population_size: 20
generations: 20
workers: 2
"""

COMBINED = """
name: combined
seed: 3
population_size: 6
generations: 4
fitness:
  time_penalty_per_hour: 0.05
schedule:
  mode: linear
"""


class TestRun(base.BaseTestCase):
    def test_base_experiment(self):
        manifest = self.write_manifest('base.yaml', BASE)
        summary = self.run_experiment(manifest, self.path('base'))

        self.assertEqual('base', summary['variant'])
        self.assertEqual(20, summary['generations_completed'])
        self.assertEqual(summary['best_fitness'],
                         summary['best_fitness_accuracy'])
        self.assertIsNone(summary['test_accuracy'])

        history = self.read('base', store.HISTORY).decode().splitlines()
        self.assertEqual(20, len(history))
        events = list(csv.DictReader(io.StringIO(
            self.read('base', store.EVENTS).decode())))
        members = [e for e in events if e['status'] != 'displaced']
        self.assertEqual(20 * 20, len(members))
        self.assertEqual(BASE.encode(), self.read('base', store.MANIFEST))
        self.assertEqual(
            summary['best_fitness_key'] + '\n',
            self.read('base', common.BEST_FITNESS_KEY).decode())
        summary_csv = self.read('base', report.SUMMARY).decode()
        self.assertTrue(summary_csv.startswith('approach,variant,'))

    def test_combined_variant(self):
        manifest = self.write_manifest('combined.yaml', COMBINED)
        summary = self.run_experiment(manifest, self.path('c'))
        self.assertEqual('combined', summary['variant'])
        self.assertEqual(self.path('c'), summary['output_dir'])
        rows = list(csv.DictReader(io.StringIO(
            self.read('c', report.SUMMARY).decode())))
        self.assertEqual('True', rows[0]['combined'])
        self.assertEqual('30-70', rows[0]['epochs'])

    def test_workers_override(self):
        manifest = self.write_manifest('combined.yaml', COMBINED)
        summary = self.neuroevo(
            '--workers 3 run %s --output-dir %s' % (manifest,
                                                    self.path('w')),
            use_json=True)
        self.assertEqual(4, summary['generations_completed'])

    def test_population_of_one_rejected(self):
        manifest = self.write_manifest('tiny.yaml', 'population_size: 1\n')
        code, error = self.neuroevo(
            'run %s --output-dir %s' % (manifest, self.path('tiny')),
            may_fail=True)
        self.assertEqual(1, code)
        self.assertIn('at least 2', error)

    def test_existing_run_not_overwritten(self):
        manifest = self.write_manifest('combined.yaml', COMBINED)
        self.run_experiment(manifest, self.path('again'))
        code, error = self.neuroevo(
            'run %s --output-dir %s' % (manifest, self.path('again')),
            may_fail=True)
        self.assertEqual(1, code)
        self.assertIn('use resume', error)

    def test_manifest_required(self):
        code, error = self.neuroevo('run', may_fail=True)
        self.assertEqual(2, code)
        self.assertIn(base.ARGUMENTS_MISSING, error)
