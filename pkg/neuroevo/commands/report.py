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

"""Plot-ready reports derived from a run's event log."""

import collections
import csv

from osc_lib.command import command

from neuroevo.commands import common
from neuroevo import config
from neuroevo import engine
from neuroevo import exceptions
from neuroevo import genome as genome_mod
from neuroevo import store


GENERATION_STATS = 'generation_stats.csv'
LAYER_DISTRIBUTION = 'layer_distribution.csv'
TIME_DELTA = 'time_delta.csv'
BEST_ARCHITECTURES = 'best_architectures.txt'
SUMMARY = 'summary.csv'

STATS_FIELDS = ('generation', 'epochs', 'fitness_min', 'fitness_mean',
                'fitness_max', 'accuracy_min', 'accuracy_mean',
                'accuracy_max', 'mean_depth', 'wall_seconds', 'evaluations',
                'cache_hits')
DISTRIBUTION_FIELDS = ('generation', 'depth', 'skip', 'pool')
DELTA_FIELDS = ('generation', 'wall_seconds', 'baseline_wall_seconds',
                'delta_seconds', 'cumulative_delta_seconds')
SUMMARY_FIELDS = ('approach', 'variant', 'accuracy_percent',
                  'test_accuracy_percent', 'generations', 'epochs',
                  'batch_size', 'wall_hours', 'combined')
FIELDS = ('file', 'rows')

APPROACHES = {
    'base': 'Base experiment',
    'regularised': 'Regularised fitness',
    'partial': 'Partial training',
    'combined': 'Regularised fitness with partial training',
}


def _members(rows):
    return [r for r in rows if r['status'] != engine.STATUS_DISPLACED]


def _failed(row):
    return row.get('failed') == 'True'


def _fresh(rows):
    return [r for r in rows
            if r['cache_hit'] != 'True' and not _failed(r)]


def by_generation(events):
    grouped = collections.OrderedDict()
    for row in events:
        grouped.setdefault(int(row['generation']), []).append(row)
    return grouped


def generation_stats(events):
    """Min, mean and max of fitness and accuracy per generation."""
    table = []
    for generation, rows in by_generation(events).items():
        members = _members(rows)
        fitness = [float(r['fitness']) for r in members]
        accuracy = [float(r['accuracy']) for r in members]
        depth = [len(genome_mod.parse_key(r['key'])) for r in members]
        table.append({
            'generation': generation,
            'epochs': int(members[0]['epochs']),
            'fitness_min': min(fitness),
            'fitness_mean': sum(fitness) / len(fitness),
            'fitness_max': max(fitness),
            'accuracy_min': min(accuracy),
            'accuracy_mean': sum(accuracy) / len(accuracy),
            'accuracy_max': max(accuracy),
            'mean_depth': sum(depth) / len(depth),
            'wall_seconds': sum(float(r['wall_seconds'])
                                for r in _fresh(rows)),
            'evaluations': len(_fresh(rows)),
            'cache_hits': sum(1 for r in rows if r['cache_hit'] == 'True'),
        })
    return table


def default_generations(last):
    """First, middle and last generation."""
    return sorted({1, (last + 1) // 2, last})


def layer_distribution(events, generations=None):
    """Skip and pool counts per depth for the selected generations."""
    grouped = by_generation(events)
    if generations is None:
        generations = default_generations(max(grouped)) if grouped else []
    table = []
    for generation in generations:
        genomes = [genome_mod.parse_key(r['key'])
                   for r in _members(grouped.get(generation, []))]
        histogram = engine.layer_distribution(genomes)
        for depth, (skip, pool) in enumerate(histogram):
            table.append({'generation': generation, 'depth': depth,
                          'skip': skip, 'pool': pool})
    return table


def wall_time_delta(events, baseline_events):
    """Per-generation wall time saved relative to the baseline run.

    Positive deltas mean the run was faster. Only generations present in
    both logs are reported.
    """
    run = {s['generation']: s['wall_seconds']
           for s in generation_stats(events)}
    baseline = {s['generation']: s['wall_seconds']
                for s in generation_stats(baseline_events)}
    table = []
    cumulative = 0.0
    for generation in sorted(set(run) & set(baseline)):
        delta = baseline[generation] - run[generation]
        cumulative += delta
        table.append({
            'generation': generation,
            'wall_seconds': run[generation],
            'baseline_wall_seconds': baseline[generation],
            'delta_seconds': delta,
            'cumulative_delta_seconds': cumulative,
        })
    return table


def best_events(events):
    """Rows of the best individual by fitness and by accuracy.

    Earliest row wins ties. Failed evaluations are never a best.
    """
    best_fitness = best_accuracy = None
    for row in events:
        if _failed(row):
            continue
        if best_fitness is None or (float(row['fitness'])
                                    > float(best_fitness['fitness'])):
            best_fitness = row
        if best_accuracy is None or (float(row['accuracy'])
                                     > float(best_accuracy['accuracy'])):
            best_accuracy = row
    return best_fitness, best_accuracy


def _epochs_label(schedule):
    if schedule.is_partial:
        return '%d-%d' % (schedule.lo, schedule.hi)
    return str(schedule.epochs)


def summary_row(cfg, events, test_accuracy=None):
    """Summary row: the best network of the run and what the run cost."""
    best_fitness, _best_accuracy = best_events(events)
    stats = generation_stats(events)
    return {
        'approach': APPROACHES[cfg.variant],
        'variant': cfg.variant,
        'accuracy_percent': (100.0 * float(best_fitness['accuracy'])
                             if best_fitness else None),
        'test_accuracy_percent': (100.0 * test_accuracy
                                  if test_accuracy is not None else None),
        'generations': len(stats),
        'epochs': _epochs_label(cfg.schedule),
        'batch_size': cfg.training.batch_size,
        'wall_hours': sum(s['wall_seconds'] for s in stats)
        / engine.SECONDS_PER_HOUR,
        'combined': cfg.variant == 'combined',
    }


def render_best(cfg, events):
    best_fitness, best_accuracy = best_events(events)
    sections = []
    for title, row in (('Best by fitness', best_fitness),
                       ('Best by accuracy', best_accuracy)):
        if row is None:
            continue
        genome = genome_mod.parse_key(row['key'])
        sections.append(
            '%s (generation %s, accuracy %.4f, fitness %.4f, %s epochs)\n'
            '%s\n' % (title, row['generation'], float(row['accuracy']),
                      float(row['fitness']), row['epochs'],
                      genome_mod.render(genome, cfg.input_shape)))
    return '\n'.join(sections)


def write_csv(path, fields, rows):
    with open(path, 'w', encoding='utf-8', newline='') as f:
        writer = csv.DictWriter(f, fieldnames=fields, lineterminator='\n')
        writer.writeheader()
        writer.writerows(rows)
    return len(rows)


def load_run(path):
    """Configuration, event log and state of a run directory."""
    run_dir = store.RunDirectory(path)
    if not run_dir.exists():
        raise exceptions.CorruptRunState(
            path=path, reason='not a run directory')
    cfg = config.parse_manifest(run_dir.read_manifest())
    return run_dir, cfg, run_dir.read_events(), run_dir.read_state()


def write_summary(run_dir, cfg, events, state, baseline=None):
    rows = [summary_row(cfg, events, state.get('test_accuracy'))]
    if baseline is not None:
        _dir, base_cfg, base_events, base_state = baseline
        rows.insert(0, summary_row(base_cfg, base_events,
                                   base_state.get('test_accuracy')))
    return write_csv(run_dir.join(SUMMARY), SUMMARY_FIELDS, rows)


class ReportRun(command.Lister):
    """Write plot-ready CSV reports for a run.

    Everything is derived from the run's event log, so the command can be
    repeated at any time, also while the run is still in progress.
    """

    def get_parser(self, prog_name):
        parser = super(ReportRun, self).get_parser(prog_name)

        parser.add_argument(
            'run_dir',
            metavar='<run-dir>',
            help='Directory of the run to report on.'
        )
        parser.add_argument(
            '--baseline',
            metavar='<run-dir>',
            help='Run to compare wall time with, usually the base '
                 'experiment. Without it the time delta report is skipped.'
        )
        parser.add_argument(
            '--generation',
            metavar='<generation>',
            type=int,
            action='append',
            dest='generations',
            help='Generation to include in the layer distribution report. '
                 'May be repeated; defaults to the first, middle and last '
                 'generation.'
        )

        return parser

    def take_action(self, parsed_args):
        with common.wrap_domain_errors():
            run_dir, cfg, events, state = load_run(parsed_args.run_dir)
            baseline = None
            if parsed_args.baseline:
                if store.RunDirectory(parsed_args.baseline).exists():
                    baseline = load_run(parsed_args.baseline)
                else:
                    self.log.warning('Baseline %s is not a run directory, '
                                     'skipping the time delta report',
                                     parsed_args.baseline)

        written = [
            (GENERATION_STATS, write_csv(run_dir.join(GENERATION_STATS),
                                         STATS_FIELDS,
                                         generation_stats(events))),
            (LAYER_DISTRIBUTION, write_csv(
                run_dir.join(LAYER_DISTRIBUTION), DISTRIBUTION_FIELDS,
                layer_distribution(events, parsed_args.generations))),
        ]
        if baseline is not None:
            written.append((TIME_DELTA, write_csv(
                run_dir.join(TIME_DELTA), DELTA_FIELDS,
                wall_time_delta(events, baseline[2]))))
        elif not parsed_args.baseline:
            self.log.warning('No baseline run given, skipping the time '
                             'delta report')
        with open(run_dir.join(BEST_ARCHITECTURES), 'w',
                  encoding='utf-8') as f:
            f.write(render_best(cfg, events))
        written.append((BEST_ARCHITECTURES, 2 if events else 0))
        written.append((SUMMARY, write_summary(run_dir, cfg, events, state,
                                               baseline)))
        return FIELDS, written
