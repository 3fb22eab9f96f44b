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

import io
import json
import logging
import os

import fixtures
from oslotest import base

import neuroevo
from neuroevo import shell


# Loggers reset to WARNING so captured test output stays small.
RESET_LOGGING = [
    'neuroevo.engine',
    'neuroevo.nn.training',
    'stevedore',
]

ARGUMENTS_MISSING = 'the following arguments are required'

MANIFESTS = os.path.join(os.path.dirname(neuroevo.__file__), os.pardir,
                         'etc', 'manifests')


class CommandException(Exception):
    def __init__(self, *args, **kwargs):
        super(CommandException, self).__init__(args[0])
        self.cmd = kwargs['cmd']


class BaseTestCase(base.BaseTestCase):
    def setUp(self):
        super(BaseTestCase, self).setUp()
        self.tmp = self.useFixture(fixtures.TempDir()).path
        self.useFixture(fixtures.EnvironmentVariable('NEUROEVO_WORKERS'))
        for name in RESET_LOGGING:
            logging.getLogger(name).setLevel(logging.WARNING)

    def path(self, *parts):
        return os.path.join(self.tmp, *parts)

    def write_manifest(self, name, text):
        path = self.path(name)
        with open(path, 'w', encoding='utf-8') as f:
            f.write(text)
        return path

    def read(self, *parts):
        with open(self.path(*parts), 'rb') as f:
            return f.read()

    def neuroevo(self, cmd, may_fail=False, use_json=False):
        to_exec = cmd.split()
        if use_json:
            to_exec += ['-f', 'json']

        # Output trapping only around the run().
        self.output = io.StringIO()
        self.error = io.StringIO()
        stdout_fix = fixtures.MonkeyPatch('sys.stdout', self.output)
        stderr_fix = fixtures.MonkeyPatch('sys.stderr', self.error)
        with stdout_fix, stderr_fix:
            try:
                return_code = shell.NeuroevoShell().run(to_exec)
            # argparse exits instead of returning an error code
            except SystemExit as exc:
                return_code = exc.code

        output = self.output.getvalue()
        error = self.error.getvalue()

        if return_code:
            msg = 'Command: "%s"\noutput: %s' % (' '.join(to_exec), error)
            if not may_fail:
                raise CommandException(msg, cmd=' '.join(to_exec))
            return return_code, error

        if use_json and output:
            output = json.loads(output)
        return output

    def run_experiment(self, manifest, output_dir, *options):
        return self.neuroevo(' '.join(
            ('run', manifest, '--output-dir', output_dir) + options),
            use_json=True)

    def resume_experiment(self, run_dir, *options):
        return self.neuroevo(' '.join(('resume', run_dir) + options),
                             use_json=True)

    def report(self, run_dir, *options):
        return self.neuroevo(' '.join(('report', run_dir) + options),
                             use_json=True)
