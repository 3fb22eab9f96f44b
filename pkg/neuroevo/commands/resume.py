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
from neuroevo import exceptions
from neuroevo import store


class ResumeExperiment(command.ShowOne):
    """Continue an interrupted run from its last completed generation.

    The run continues with the manifest copy stored in the run directory.
    Resuming a finished run changes nothing.
    """

    def get_parser(self, prog_name):
        parser = super(ResumeExperiment, self).get_parser(prog_name)

        parser.add_argument(
            'run_dir',
            metavar='<run-dir>',
            help='Directory of the run to continue.'
        )
        parser.add_argument(
            '--manifest',
            metavar='<manifest>',
            help='Refuse to resume unless the run was started from this '
                 'manifest.'
        )

        return parser

    def take_action(self, parsed_args):
        with common.wrap_domain_errors():
            run_dir = store.RunDirectory(parsed_args.run_dir)
            if not run_dir.exists():
                raise exceptions.CorruptRunState(
                    path=parsed_args.run_dir, reason='no run state found')
            raw = run_dir.read_manifest()
            state = run_dir.read_state()
            expected = state.get('manifest_sha256')
            digests = {
                run_dir.join(store.MANIFEST): store.manifest_digest(raw)}
            if parsed_args.manifest:
                _cfg, other = config.load_manifest(parsed_args.manifest)
                digests[parsed_args.manifest] = store.manifest_digest(other)
            for path, actual in digests.items():
                if actual != expected:
                    raise exceptions.ManifestMismatch(
                        path=path, expected=expected, actual=actual)

            cfg = common.apply_overrides(config.parse_manifest(raw),
                                         self.app.options)
            generation = state['generation']
            run_dir.truncate(generation)
            if generation >= cfg.generations:
                self.log.info('Run in %s already finished all %d '
                              'generations', run_dir.path, generation)
                summary = common.summarize(
                    cfg, run_dir, common.load_state(run_dir, state),
                    state.get('test_accuracy'))
            else:
                self.log.info('Resuming run in %s after generation %d',
                              run_dir.path, generation)
                summary = common.execute(cfg, run_dir, state)
                report.write_summary(run_dir, cfg, run_dir.read_events(),
                                     run_dir.read_state())

        return common.SUMMARY_FIELDS, utils.get_dict_properties(
            summary, common.SUMMARY_FIELDS)
