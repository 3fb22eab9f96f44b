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

from osc_lib.command import command
from osc_lib import utils

from neuroevo.commands import common
from neuroevo.commands import report
from neuroevo import config
from neuroevo import store


class RunExperiment(command.ShowOne):
    """Run an evolution experiment described by a manifest.

    The manifest is copied into the output directory together with the
    run state, the per-generation history and the event log. An
    interrupted run can be continued with ``neuroevo resume``.
    """

    def get_parser(self, prog_name):
        parser = super(RunExperiment, self).get_parser(prog_name)

        parser.add_argument(
            'manifest',
            metavar='<manifest>',
            help='YAML run manifest.'
        )
        parser.add_argument(
            '--output-dir',
            metavar='<dir>',
            help='Directory for the run files. Defaults to the manifest '
                 'output_dir, or the experiment name.'
        )

        return parser

    def take_action(self, parsed_args):
        with common.wrap_domain_errors():
            cfg, raw = config.load_manifest(parsed_args.manifest)
            cfg = common.apply_overrides(cfg, self.app.options)
            path = parsed_args.output_dir or cfg.output_dir or cfg.name
            run_dir = store.RunDirectory(path)
            run_dir.create(raw)
            self.log.info('Created run directory %s', path)
            summary = common.execute(cfg, run_dir)
            report.write_summary(run_dir, cfg, run_dir.read_events(),
                                 run_dir.read_state())

        return common.SUMMARY_FIELDS, utils.get_dict_properties(
            summary, common.SUMMARY_FIELDS)
