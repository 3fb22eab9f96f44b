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

import fixtures

from neuroevo.commands import common
from neuroevo import store
from neuroevo.tests.functional import base


MANIFEST = """
name: resumable
seed: 11
population_size: 8
generations: 6
workers: 1
fitness:
  time_penalty_per_hour: 0.05
schedule:
  mode: linear
"""


class Killed(Exception):
    pass


class TestResume(base.BaseTestCase):
    def setUp(self):
        super(TestResume, self).setUp()
        self.manifest = self.write_manifest('run.yaml', MANIFEST)

    def _kill_after(self, generation):
        record_generation = common._recorder

        def recorder(run_dir, manifest_sha256):
            record = record_generation(run_dir, manifest_sha256)

            def wrapped(state, stats, events):
                record(state, stats, events)
                if state.generation == generation:
                    raise Killed()
            return wrapped

        return fixtures.MonkeyPatch(
            'neuroevo.commands.common._recorder', recorder)

    def test_resume_is_byte_identical(self):
        self.run_experiment(self.manifest, self.path('reference'))

        with self._kill_after(3):
            code, _error = self.neuroevo(
                'run %s --output-dir %s' % (self.manifest,
                                            self.path('killed')),
                may_fail=True)
        self.assertEqual(1, code)
        state = store.RunDirectory(self.path('killed')).read_state()
        self.assertEqual(3, state['generation'])

        # the kill hit while generation 4 was being logged
        with open(self.path('killed', store.HISTORY), 'a') as f:
            f.write('{"generation": 4, "epo')

        summary = self.resume_experiment(self.path('killed'))
        self.assertEqual(6, summary['generations_completed'])
        for name in (store.HISTORY, store.EVENTS,
                     common.BEST_FITNESS_KEY, common.BEST_ACCURACY_KEY):
            self.assertEqual(self.read('reference', name),
                             self.read('killed', name), name)

    def test_resume_finished_run_is_noop(self):
        first = self.run_experiment(self.manifest, self.path('done'))
        history = self.read('done', store.HISTORY)
        second = self.resume_experiment(self.path('done'))
        self.assertEqual(first, second)
        self.assertEqual(history, self.read('done', store.HISTORY))

    def test_resume_with_matching_manifest(self):
        self.run_experiment(self.manifest, self.path('done'))
        summary = self.resume_experiment(self.path('done'), '--manifest',
                                         self.manifest)
        self.assertEqual(6, summary['generations_completed'])

    def test_resume_with_other_manifest(self):
        self.run_experiment(self.manifest, self.path('done'))
        other = self.write_manifest('other.yaml',
                                    MANIFEST.replace('seed: 11', 'seed: 12'))
        code, error = self.neuroevo(
            'resume %s --manifest %s' % (self.path('done'), other),
            may_fail=True)
        self.assertEqual(1, code)
        self.assertIn('does not match', error)

    def test_resume_with_edited_manifest_copy(self):
        self.run_experiment(self.manifest, self.path('done'))
        with open(self.path('done', store.MANIFEST), 'a') as f:
            f.write('# edited\n')
        code, error = self.neuroevo('resume %s' % self.path('done'),
                                    may_fail=True)
        self.assertEqual(1, code)
        self.assertIn('does not match', error)

    def test_resume_missing_run(self):
        code, error = self.neuroevo('resume %s' % self.path('nothing'),
                                    may_fail=True)
        self.assertEqual(1, code)
        self.assertIn('no run state found', error)
