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

"Command-line shell for neuroevolution experiments"

import logging
import sys

from cliff import app
from cliff import commandmanager
from osc_lib import utils

import neuroevo
from neuroevo.commands import report
from neuroevo.commands import resume
from neuroevo.commands import run


LOG = logging.getLogger(__name__)

COMMANDS = {
    'run': run.RunExperiment,
    'resume': resume.ResumeExperiment,
    'report': report.ReportRun,
}


class NeuroevoShell(app.App):

    def __init__(self):
        super(NeuroevoShell, self).__init__(
            description=__doc__.strip(),
            version=neuroevo.__version__,
            command_manager=commandmanager.CommandManager('neuroevo.cli'),
            deferred_help=True)
        for name, command_class in COMMANDS.items():
            self.command_manager.add_command(name, command_class)

    def build_option_parser(self, description, version,
                            argparse_kwargs=None):
        parser = super(NeuroevoShell, self).build_option_parser(
            description, version, argparse_kwargs=argparse_kwargs)
        parser.add_argument(
            '--workers',
            metavar='<count>',
            type=int,
            default=utils.env('NEUROEVO_WORKERS', default=None),
            help='Number of concurrent evaluations, overrides the manifest '
                 '(Env: NEUROEVO_WORKERS)')
        return parser


def main(argv=None):
    if argv is None:
        argv = sys.argv[1:]
    return NeuroevoShell().run(argv)


if __name__ == '__main__':
    sys.exit(main())
